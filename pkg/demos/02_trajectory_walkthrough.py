"""One deepening trajectory, step by step, against a scripted backend.

The script plays a solver that runs out of budget twice (each time the
engine snaps to a step boundary and pads the self-reflection trigger) and
then finishes naturally in round 2.

Run: python3 demos/02_trajectory_walkthrough.py
"""

from idsampling import (
    BudgetSchedule,
    SamplingParams,
    TriggerPolicy,
    id_sample,
    script_define,
)

schedule = BudgetSchedule(initial_budget=16, growth_factor=2.0, max_total=112)
print("planned round budgets:", schedule.plan_rounds())

backend = script_define([
    # round 0: sixteen tokens, cut off mid-line
    ("", "\nLet the side be s. Then the area is s*s and the diagonal is s "
         "times", "length"),
    # boundary snap: the engine asks for a short continuation up to "\n\n"
    ("", " sqrt(2).\n\n", "stop"),
    # round 1: thirty-two tokens, ends at a boundary on its own
    ("", "\nFrom the diagonal d = 10 we get s = 10/sqrt(2), so the area is "
         "100/2 = 50. But wait, the problem asked for the perimeter, not the "
         "area. Let me redo.\n\n", "length"),
    # round 2: a clean finish
    ("", "\nPerimeter = 4*s = 4*10/sqrt(2) = 20*sqrt(2).\n"
         "The final answer is \\boxed{20\\sqrt{2}}.", "stop"),
])

trajectory = id_sample(
    "A square has diagonal 10. What is its perimeter?",
    schedule,
    TriggerPolicy(),
    backend,
    SamplingParams(seed=0),
    snap_allowance=8,
)

print(f"\nstatus: {trajectory.status}")
print(f"rounds: {len(trajectory.rounds)}, triggers inserted: {trajectory.trigger_count}")
for i, round_ in enumerate(trajectory.rounds):
    print(f"  round {i}: allocated={round_.allocated:>3} used={round_.used:>3} "
          f"finish={round_.finish_reason}")
ledger = trajectory.ledger
print(f"ledger: generated={ledger.total_generated} (snap {ledger.snap_generated}), "
      f"trigger tokens={ledger.trigger_tokens}, calls={ledger.generation_calls}")

print("\nfull trajectory text")
print("-" * 60)
print(trajectory.text)
