"""Budget schedules: how the per-round token allowance grows and what the
geometric structure buys.

Run: python3 demos/01_budget_schedules.py
"""

from idsampling import BudgetSchedule, overhead_bound


def show(schedule: BudgetSchedule) -> None:
    plan = schedule.plan_rounds()
    print(f"B0={schedule.initial_budget}, gamma={schedule.growth_factor}, cap={schedule.max_total}")
    print(f"  per-round budgets: {plan}")
    print(f"  rounds to exhaust: {schedule.rounds_to_exhaust()}, sum: {sum(plan)}")


print("The default configuration doubles the budget each round and trims the")
print("last round so the total equals the cumulative cap exactly:\n")
show(BudgetSchedule(256, 2.0, 8192))

print("\nSlower growth means more rounds (and more self-reflection triggers)")
print("before the same cap is reached:\n")
for gamma in (1.2, 1.5, 2.0, 2.5):
    show(BudgetSchedule(256, gamma, 8192))
    print()

print("The geometric structure bounds total spend: the sum of every round")
print("budget through round k stays below gamma/(gamma-1) times round k's")
print("budget alone. For gamma=2 that constant is 2: you never pay more than")
print("twice the final round.\n")
schedule = BudgetSchedule(256, 2.0, 1 << 30)
for k in range(6):
    spent = sum(schedule.round_budget(i) for i in range(k + 1))
    bound = overhead_bound(2.0, schedule.round_budget(k))
    print(f"  through round {k}: spent {spent:>6}  <  bound {bound:>9.0f}")
