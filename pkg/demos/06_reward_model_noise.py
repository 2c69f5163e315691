"""Best-of-N under a noisy reward model, and when voting degrades.

Two failure mechanisms, reproduced side by side:

1. A reward scorer that inverts its judgment on 30% of candidates makes
   best-of-N select confidently wrong answers, so accuracy stops improving
   with N (and can fall).
2. A solver whose trigger responses derail correct work (and never repair
   wrong work) turns deepening into a liability for majority voting: the
   vote distribution flattens toward wrong answers.

Run: python3 demos/06_reward_model_noise.py   (~25 seconds)
"""

from idsampling import RunConfig, run, synthetic_dataset

BASE = {
    "n": 16,
    "initial_budget": 256,
    "gamma": 2.0,
    "max_total_tokens": 8192,
    "parallelism": 4,
    "seed": 99,
}

print("Part 1: reward-model false comparisons (vanilla, N=16)")
dataset = synthetic_dataset(200, seed=10)
solver_cfg = {"kind": "stochastic", "p_solve": 0.3}
oracle = run(dataset, RunConfig.from_dict(
    {**BASE, "method": "vanilla", "backend": solver_cfg, "scorer": {"kind": "stub"}}))
noisy = run(dataset, RunConfig.from_dict(
    {**BASE, "method": "vanilla", "backend": solver_cfg,
     "scorer": {"kind": "stub", "inversion_probability": 0.3}}))
print(f"{'k':>4} {'BoN oracle':>12} {'BoN inverted':>13}")
for k in oracle.metrics["k_grid"]:
    print(f"{k:>4} {oracle.metrics['bon'][str(k)]:>12.3f} {noisy.metrics['bon'][str(k)]:>13.3f}")

print("\nPart 2: derailing triggers flatten the vote (N=8)")
derail_cfg = {
    "kind": "stochastic",
    "p_solve": 0.3,
    "p_correct_on_trigger": 0.0,
    "p_derail_on_trigger": 0.2,
}
dataset = synthetic_dataset(300, seed=11)
vanilla = run(dataset, RunConfig.from_dict(
    {**BASE, "n": 8, "method": "vanilla", "backend": derail_cfg, "scorer": {"kind": "stub"}}))
deepened = run(dataset, RunConfig.from_dict(
    {**BASE, "n": 8, "method": "id_sampling", "backend": derail_cfg, "scorer": {"kind": "stub"}}))
print(f"{'':>8} {'vanilla':>9} {'deepening':>10}")
for k in vanilla.metrics["k_grid"]:
    key = str(k)
    print(f"{'cons@' + key:>8} {vanilla.metrics['cons'][key]:>9.3f} "
          f"{deepened.metrics['cons'][key]:>10.3f}")
print("\nWith nothing to gain from triggers and a 20% chance of spoiling a")
print("correct draft per trigger, deepening only hurts consensus accuracy.")
