"""Geometric budget schedules and token-cost accounting.

A schedule is defined by an initial per-round budget ``B0``, a growth
factor ``gamma > 1``, and a cumulative cap ``B`` on trajectory length.
Round ``k`` is allotted ``floor(B0 * gamma**k)`` tokens, except that the
final round is trimmed so the planned budgets sum exactly to ``B``.

The useful consequence of geometric growth: the total budget spent through
round ``k`` is bounded by ``gamma / (gamma - 1)`` times the budget of round
``k`` alone (sum of a geometric series). A ``gamma * x / (gamma + 1)``
variant of that constant would be smaller than ``x`` itself and cannot
bound a total that includes ``x``, so ``gamma / (gamma - 1)`` is the form
implemented and asserted here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class BudgetSchedule:
    """Geometric per-round token budgets under a cumulative cap.

    Attributes:
        initial_budget: tokens allotted to round 0 (``B0``).
        growth_factor: multiplier applied to the round budget each round
            (``gamma``); must be strictly greater than 1 — at 1.0 and below
            the round sequence never makes progress against the cap.
        max_total: cumulative trajectory-length cap in tokens (``B``).
    """

    initial_budget: int = 256
    growth_factor: float = 2.0
    max_total: int = 8192

    def __post_init__(self) -> None:
        if self.initial_budget < 1:
            raise ValueError("initial_budget must be >= 1")
        if not self.growth_factor > 1.0:
            raise ValueError("growth_factor must be > 1")
        if self.max_total < self.initial_budget:
            raise ValueError("max_total must be >= initial_budget")

    def round_budget(self, k: int) -> int:
        """Uncapped budget of round ``k``: ``floor(B0 * gamma**k)``, min 1."""
        if k < 0:
            raise ValueError("round index must be >= 0")
        return max(1, math.floor(self.initial_budget * self.growth_factor**k))

    def plan_rounds(self) -> list[int]:
        """Per-round budgets; the final entry is trimmed so the sum is exactly
        ``max_total``.

        Budgets follow ``floor(B0 * gamma**k)`` until the next uncapped budget
        would meet or exceed the remaining cap, at which point the remainder is
        emitted as the last round.
        """
        budgets: list[int] = []
        total = 0
        k = 0
        while True:
            uncapped = self.initial_budget * self.growth_factor**k
            remaining = self.max_total - total
            if uncapped >= remaining:
                budgets.append(remaining)
                return budgets
            b = max(1, math.floor(uncapped))
            budgets.append(b)
            total += b
            k += 1

    def rounds_to_exhaust(self) -> int:
        """Number of rounds before the cumulative cap is reached."""
        return len(self.plan_rounds())


def overhead_bound(gamma: float, final_round_budget: float) -> float:
    """Upper bound on the sum of all uncapped round budgets through a round.

    For real-valued budgets ``B0 * gamma**i`` the partial sums satisfy

        sum_{i=0..k} B0 * gamma**i  <  gamma / (gamma - 1) * (B0 * gamma**k)

    strictly, for every ``gamma > 1``. With integer (floored) budgets the
    bound holds up to one token of rounding slack per round.

    ``final_round_budget`` may also be given as a final trajectory length to
    bound total spend in terms of the finished answer's cost; the asserted
    guarantee is the geometric-series form above.
    """
    if not gamma > 1.0:
        raise ValueError("gamma must be > 1")
    if final_round_budget < 1:
        raise ValueError("final_round_budget must be >= 1")
    return gamma / (gamma - 1.0) * final_round_budget


@dataclass
class LedgerRound:
    """Accounting for one generation round (including its boundary snap)."""

    allocated: int
    generated: int
    snap_generated: int = 0
    prompt_tokens: int = 0
    snap_prompt_tokens: int = 0
    wall_time: float = 0.0

    @property
    def total_generated(self) -> int:
        return self.generated + self.snap_generated


@dataclass
class CostLedger:
    """Token and call accounting for a single trajectory.

    ``generated`` figures count model-produced tokens only; trigger
    insertions are tracked separately in ``trigger_tokens`` because they are
    injected by the orchestrator, not sampled. Boundary-snap tokens sit on
    top of the cumulative cap (bounded by the per-round snap allowance).
    """

    rounds: list[LedgerRound] = field(default_factory=list)
    trigger_tokens: int = 0
    generation_calls: int = 0

    @property
    def total_generated(self) -> int:
        return sum(r.total_generated for r in self.rounds)

    @property
    def round_generated(self) -> int:
        return sum(r.generated for r in self.rounds)

    @property
    def snap_generated(self) -> int:
        return sum(r.snap_generated for r in self.rounds)

    @property
    def total_prompt_tokens(self) -> int:
        return sum(r.prompt_tokens + r.snap_prompt_tokens for r in self.rounds)

    @property
    def total_wall_time(self) -> float:
        return sum(r.wall_time for r in self.rounds)

    def cost_proxy(self, prefill_cost: float = 0.02, request_overhead: float = 80.0) -> float:
        """Serving-cost proxy in decode-token units: generated tokens, plus a
        prefill charge proportional to each request's prompt length (prefill
        is far cheaper per token than decode), plus a fixed per-request
        overhead (scheduling, tokenization, queueing)."""
        return (
            self.total_generated
            + prefill_cost * self.total_prompt_tokens
            + request_overhead * self.generation_calls
        )
