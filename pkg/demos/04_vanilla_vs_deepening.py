"""Vanilla sampling versus iterative deepening on the stochastic solver.

The simulated solver lands a fresh attempt correctly 30% of the time; each
inserted trigger gives a wrong attempt a 50% chance of recovery. Deepening
therefore lifts per-sample accuracy well above the vanilla baseline, at a
measurable cost in calls and re-read prompt tokens. The comparison table
converts that cost into an equivalent sample count.

Run: python3 demos/04_vanilla_vs_deepening.py   (~20 seconds)
"""

from idsampling import RunConfig, compare_runs, run, synthetic_dataset

QUESTIONS = 300


def config(method: str) -> RunConfig:
    return RunConfig.from_dict({
        "method": method,
        "n": 8,
        "initial_budget": 256,
        "gamma": 2.0,
        "max_total_tokens": 8192,
        "backend": {
            "kind": "stochastic",
            "p_solve": 0.3,
            "p_correct_on_trigger": 0.5,
            "p_derail_on_trigger": 0.0,
        },
        "scorer": {"kind": "stub"},
        "parallelism": 4,
        "seed": 1234,
    })


dataset = synthetic_dataset(QUESTIONS, seed=42)
print(f"running vanilla and deepening over {QUESTIONS} questions, N=8 ...")
vanilla = run(dataset, config("vanilla"))
deepened = run(dataset, config("id_sampling"))

print(f"\n{'':>14} {'vanilla':>10} {'deepening':>10}")
print(f"{'pass@1':>14} {vanilla.metrics['pass1']:>10.3f} {deepened.metrics['pass1']:>10.3f}")
for k in vanilla.metrics["k_grid"]:
    key = str(k)
    print(f"{'BoN@' + key:>14} {vanilla.metrics['bon'][key]:>10.3f} "
          f"{deepened.metrics['bon'][key]:>10.3f}")
for k in vanilla.metrics["k_grid"]:
    key = str(k)
    print(f"{'cons@' + key:>14} {vanilla.metrics['cons'][key]:>10.3f} "
          f"{deepened.metrics['cons'][key]:>10.3f}")

table = compare_runs([vanilla, deepened])
row = table["rows"][1]
print(f"\nrelative cost of deepening: {row['relative_cost']:.2f}x the vanilla run")
print("equivalent-N (compute-fair sample counts at that cost):")
for k in table["k_grid"]:
    print(f"  N={k:>2} costs like vanilla N={row['equivalent_n'][str(k)]}")
