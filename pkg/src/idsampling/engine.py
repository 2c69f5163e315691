"""Iterative-deepening trajectory engine.

One trajectory is built by repeatedly asking a completion backend to extend
the accumulated prefix under the scheduled per-round token budget. A round
that stops naturally ends the trajectory; a round that hits its budget is
snapped forward to a reasoning-step boundary, a self-reflection trigger
sentence is padded in, and the next (larger) round continues from there.

Accounting rules, fixed here once:

* round-generated tokens and inserted trigger tokens are charged against the
  schedule's cumulative cap; when the cap is consumed, remaining planned
  rounds are skipped (a round's own ``max_tokens`` is never reduced);
* boundary-snap tokens ride on top of the cap, bounded by the per-round
  snap allowance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

from .backends import (
    DEFAULT_TRIGGER_TEXT,
    FINISH_LENGTH,
    FINISH_STOP,
    BackendError,
    CompletionBackend,
    CompletionRequest,
    CompletionResult,
    count_tokens,
)
from .scheduler import BudgetSchedule, CostLedger, LedgerRound

FINISH_SNAP_CAP = "boundary-snap-cap"

STATUS_FINISHED = "finished"
STATUS_EXHAUSTED = "budget_exhausted"

DEFAULT_BOUNDARY_MARKERS = ("\n\n", "\n")
DEFAULT_SNAP_ALLOWANCE = 64

# A finish detector maps a completion's finish_reason to "naturally done".
FinishDetector = Callable[[str], bool]


def _stop_reason_detector(finish_reason: str) -> bool:
    return finish_reason == FINISH_STOP


@dataclass(frozen=True)
class TriggerPolicy:
    """How and when the self-reflection trigger sentence is inserted.

    ``redundancy_window`` is the number of trailing characters scanned for a
    preexisting trigger; if the tail already ends with the trigger sentence
    (modulo trailing whitespace) nothing is inserted, so spontaneous
    self-reflection is not doubled up.
    """

    trigger_text: str = DEFAULT_TRIGGER_TEXT
    separator: str = "\n"
    redundancy_window: int = 256

    def __post_init__(self) -> None:
        if not self.trigger_text:
            raise ValueError("trigger_text must be nonempty")
        if self.redundancy_window < len(self.trigger_text):
            raise ValueError(
                "redundancy_window must cover at least the trigger text "
                f"({len(self.trigger_text)} chars)"
            )


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.7
    top_p: float | None = None
    seed: int | None = None


@dataclass
class Round:
    """One budget-limited generation round (snap extension included)."""

    text: str
    allocated: int
    used: int
    finish_reason: str  # stop | length | boundary-snap-cap


@dataclass
class Trajectory:
    """A full sampling chain for one question."""

    question: str
    rounds: list[Round] = field(default_factory=list)
    trigger_count: int = 0
    status: str = STATUS_EXHAUSTED
    text: str = ""
    ledger: CostLedger = field(default_factory=CostLedger)

    @property
    def finished(self) -> bool:
        return self.status == STATUS_FINISHED

    @property
    def response(self) -> str:
        """Everything generated after the question prompt (rounds, snaps, and
        inserted triggers)."""
        return self.text[len(self.question):]


class TrajectoryError(RuntimeError):
    """Backend failure mid-trajectory; carries the partial rounds."""

    def __init__(self, message: str, partial: Trajectory):
        super().__init__(message)
        self.partial = partial


def is_finished(round_: Round | CompletionResult, detector: FinishDetector | None = None) -> bool:
    """True iff the round ended on the generator's own stop.

    Length-terminated rounds are never finished; whether the text contains an
    extractable answer is deliberately not consulted here (extraction
    failures surface later as unparsed answers).
    """
    detector = detector or _stop_reason_detector
    return detector(round_.finish_reason)


def pad_trigger(prefix: str, policy: TriggerPolicy | None = None) -> str:
    """Append separator + trigger sentence + separator, unless the tail
    window already ends with the trigger (idempotent)."""
    policy = policy or TriggerPolicy()
    tail = prefix[-policy.redundancy_window:]
    if tail.rstrip().endswith(policy.trigger_text):
        return prefix
    return prefix + policy.separator + policy.trigger_text + policy.separator


@dataclass
class SnapResult:
    prefix: str
    extension: str
    tokens_used: int
    capped: bool
    requested: bool  # whether a backend call was issued


def snap_to_step_boundary(
    prefix: str,
    backend: CompletionBackend,
    allowance: int = DEFAULT_SNAP_ALLOWANCE,
    markers: tuple[str, ...] = DEFAULT_BOUNDARY_MARKERS,
    sampling: SamplingParams | None = None,
) -> SnapResult:
    """Extend a length-terminated prefix to the next step boundary.

    No-op when the prefix already ends at a boundary marker. Otherwise one
    continuation of at most ``allowance`` tokens is requested with the
    markers as stop sequences; if the allowance runs out before a boundary,
    the extended text is kept and the round is flagged ``boundary-snap-cap``.
    """
    if any(prefix.endswith(m) for m in markers):
        return SnapResult(prefix, "", 0, capped=False, requested=False)
    sampling = sampling or SamplingParams()
    request = CompletionRequest(
        prompt=prefix,
        max_tokens=allowance,
        stop_sequences=markers,
        temperature=sampling.temperature,
        top_p=sampling.top_p,
        seed=sampling.seed,
    )
    result = backend.complete(request)[0]
    capped = result.finish_reason == FINISH_LENGTH
    return SnapResult(
        prefix + result.text,
        result.text,
        result.tokens_used,
        capped=capped,
        requested=True,
    )


def id_sample(
    question: str,
    schedule: BudgetSchedule,
    policy: TriggerPolicy,
    backend: CompletionBackend,
    sampling: SamplingParams | None = None,
    snap_allowance: int = DEFAULT_SNAP_ALLOWANCE,
    boundary_markers: tuple[str, ...] = DEFAULT_BOUNDARY_MARKERS,
    detector: FinishDetector | None = None,
) -> Trajectory:
    """Run the iterative-deepening loop for one question.

    Each planned round requests a continuation of the current prefix with
    ``max_tokens`` equal to that round's budget. A natural stop returns
    immediately with status ``finished``; otherwise the prefix is snapped to
    a step boundary, the trigger is padded, and the loop continues until the
    planned rounds (or the cumulative cap) are exhausted.
    """
    sampling = sampling or SamplingParams()
    trajectory = Trajectory(question=question, text=question)
    prefix = question
    prompt_tokens = count_tokens(question)
    cap_charged = 0
    plan = schedule.plan_rounds()

    for k, budget in enumerate(plan):
        start = time.perf_counter()
        request = CompletionRequest(
            prompt=prefix,
            max_tokens=budget,
            temperature=sampling.temperature,
            top_p=sampling.top_p,
            seed=sampling.seed,
        )
        try:
            result = backend.complete(request)[0]
        except BackendError as exc:
            trajectory.text = prefix
            raise TrajectoryError(f"round {k} failed: {exc}", trajectory) from exc

        entry = LedgerRound(
            allocated=budget,
            generated=result.tokens_used,
            prompt_tokens=prompt_tokens,
        )
        trajectory.ledger.rounds.append(entry)
        trajectory.ledger.generation_calls += 1
        prefix += result.text
        prompt_tokens += result.tokens_used
        cap_charged += result.tokens_used
        round_ = Round(
            text=result.text,
            allocated=budget,
            used=result.tokens_used,
            finish_reason=result.finish_reason,
        )
        trajectory.rounds.append(round_)

        if is_finished(result, detector):
            trajectory.status = STATUS_FINISHED
            entry.wall_time = time.perf_counter() - start
            break

        last_planned = k == len(plan) - 1
        if last_planned:
            entry.wall_time = time.perf_counter() - start
            break

        # Snap to a step boundary so the trigger lands between reasoning steps.
        try:
            snap = snap_to_step_boundary(
                prefix, backend, snap_allowance, boundary_markers, sampling
            )
        except BackendError as exc:
            trajectory.text = prefix
            entry.wall_time = time.perf_counter() - start
            raise TrajectoryError(f"boundary snap after round {k} failed: {exc}", trajectory) from exc
        if snap.requested:
            trajectory.ledger.generation_calls += 1
            entry.snap_generated = snap.tokens_used
            entry.snap_prompt_tokens = prompt_tokens
            prefix = snap.prefix
            prompt_tokens += snap.tokens_used
            round_.text += snap.extension
            round_.used += snap.tokens_used
            if snap.capped:
                round_.finish_reason = FINISH_SNAP_CAP

        # Stop before padding a trigger that no round could follow.
        padded = pad_trigger(prefix, policy)
        trigger_tokens = count_tokens(padded[len(prefix):])
        if schedule.max_total - cap_charged - trigger_tokens <= 0:
            entry.wall_time = time.perf_counter() - start
            break
        prefix = padded
        prompt_tokens += trigger_tokens
        cap_charged += trigger_tokens
        trajectory.ledger.trigger_tokens += trigger_tokens
        trajectory.trigger_count += 1
        entry.wall_time = time.perf_counter() - start

    trajectory.text = prefix
    return trajectory


def vanilla_sample(
    question: str,
    schedule: BudgetSchedule,
    backend: CompletionBackend,
    sampling: SamplingParams | None = None,
) -> Trajectory:
    """Single-shot baseline: one round at the full cumulative cap, no triggers."""
    sampling = sampling or SamplingParams()
    trajectory = Trajectory(question=question, text=question)
    request = CompletionRequest(
        prompt=question,
        max_tokens=schedule.max_total,
        temperature=sampling.temperature,
        top_p=sampling.top_p,
        seed=sampling.seed,
    )
    start = time.perf_counter()
    try:
        result = backend.complete(request)[0]
    except BackendError as exc:
        raise TrajectoryError(f"vanilla round failed: {exc}", trajectory) from exc
    trajectory.ledger.rounds.append(
        LedgerRound(
            allocated=schedule.max_total,
            generated=result.tokens_used,
            prompt_tokens=count_tokens(question),
            wall_time=time.perf_counter() - start,
        )
    )
    trajectory.ledger.generation_calls = 1
    trajectory.rounds.append(
        Round(
            text=result.text,
            allocated=schedule.max_total,
            used=result.tokens_used,
            finish_reason=result.finish_reason,
        )
    )
    trajectory.status = STATUS_FINISHED if is_finished(result) else STATUS_EXHAUSTED
    trajectory.text = question + result.text
    return trajectory
