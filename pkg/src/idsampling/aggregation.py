"""Turning N sampled trajectories into one answer.

Best-of-N picks the highest reward score; majority voting groups answers
into mathematical-equivalence classes first (union-find with one
representative comparison per existing class, so at most N * classes
equivalence checks instead of all N^2 pairs) and then counts or weighs the
classes. Ties break toward the lowest candidate index everywhere, which
keeps results reproducible run to run.
"""

from __future__ import annotations

import hashlib
import math
import random
import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import httpx

from .checker import AnswerExpr, RawAnswer, equivalent
from .engine import Trajectory


class ScoringRequiredError(ValueError):
    """Best-of-N was asked to rank candidates that have no scores."""


class ScorerError(RuntimeError):
    """Reward scorer failed for one candidate after retries."""


@dataclass(frozen=True)
class Candidate:
    """One sampled answer for a question."""

    raw: RawAnswer
    expr: AnswerExpr | None
    key: str  # canonical render, or whitespace-collapsed opaque text
    score: float | None = None
    correct: bool | None = None
    trajectory: Trajectory | None = None
    score_error: str | None = None

    @property
    def parsed(self) -> bool:
        return self.expr is not None


@dataclass(frozen=True)
class CandidateSet:
    question_id: str
    question: str
    candidates: tuple[Candidate, ...]

    def __len__(self) -> int:
        return len(self.candidates)


def candidate_equivalent(a: Candidate, b: Candidate) -> bool:
    """Default vote-grouping predicate: symbolic equivalence when both parse,
    opaque-key identity otherwise."""
    if a.parsed and b.parsed:
        return equivalent(a.expr, b.expr)
    if not a.parsed and not b.parsed:
        return a.key == b.key
    return False


class _DisjointSet:
    """Union-find with path compression and union by rank."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: int, y: int) -> None:
        px, py = self.find(x), self.find(y)
        if px == py:
            return
        if self.rank[px] < self.rank[py]:
            px, py = py, px
        self.parent[py] = px
        if self.rank[px] == self.rank[py]:
            self.rank[px] += 1


@dataclass(frozen=True)
class Partition:
    """Equivalence classes over candidate indices, in first-seen order."""

    classes: tuple[tuple[int, ...], ...]
    comparisons: int

    def class_of(self, index: int) -> int:
        for ci, members in enumerate(self.classes):
            if index in members:
                return ci
        raise IndexError(index)


def group_equivalent(
    cset: CandidateSet | Sequence[Candidate],
    eq: Callable[[Candidate, Candidate], bool] = candidate_equivalent,
    limit: int | None = None,
) -> Partition:
    """Partition candidates under the transitive closure of ``eq``.

    Each new candidate is compared against one representative per existing
    class, so the comparison count is at most N * (number of classes).
    """
    candidates = cset.candidates if isinstance(cset, CandidateSet) else tuple(cset)
    if limit is not None:
        candidates = candidates[:limit]
    n = len(candidates)
    dsu = _DisjointSet(n)
    representatives: list[int] = []
    comparisons = 0
    for i in range(n):
        for rep in representatives:
            comparisons += 1
            if eq(candidates[i], candidates[rep]):
                dsu.union(rep, i)
                break
        else:
            representatives.append(i)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(dsu.find(i), []).append(i)
    ordered = sorted(groups.values(), key=lambda members: members[0])
    return Partition(
        classes=tuple(tuple(members) for members in ordered),
        comparisons=comparisons,
    )


def best_of_n(cset: CandidateSet, k: int) -> Candidate:
    """Highest-scoring candidate among the first ``k``; ties go to the
    lowest index. ``k=1`` is pass@1: the first candidate."""
    if not 1 <= k <= len(cset):
        raise ValueError(f"k must be in [1, {len(cset)}]")
    window = cset.candidates[:k]
    missing = [i for i, c in enumerate(window) if c.score is None]
    if missing:
        raise ScoringRequiredError(f"candidates {missing} carry no score")
    best = window[0]
    for c in window[1:]:
        if c.score > best.score:
            best = c
    return best


@dataclass(frozen=True)
class VoteTally:
    classes: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]
    winner: int  # index into classes

    @property
    def winning_candidates(self) -> tuple[int, ...]:
        return self.classes[self.winner]


def majority_vote(
    cset: CandidateSet,
    k: int,
    weights: Sequence[float] | None = None,
    eq: Callable[[Candidate, Candidate], bool] = candidate_equivalent,
) -> VoteTally:
    """(Weighted) majority vote over the first ``k`` candidates.

    Class weight is the member count, or the sum of the supplied nonnegative
    per-candidate weights; the max-weight class wins, ties broken by the
    class containing the lowest candidate index.
    """
    if not 1 <= k <= len(cset):
        raise ValueError(f"k must be in [1, {len(cset)}]")
    if weights is not None:
        if len(weights) < k:
            raise ValueError("need one weight per voting candidate")
        if any(w < 0 for w in weights[:k]):
            raise ValueError("weights must be nonnegative")
    partition = group_equivalent(cset, eq=eq, limit=k)
    tallies = []
    for members in partition.classes:
        if weights is None:
            tallies.append(float(len(members)))
        else:
            tallies.append(float(sum(weights[i] for i in members)))
    winner = 0
    for ci in range(1, len(tallies)):
        # Strict > keeps the earlier (lower min-index) class on ties;
        # classes are already ordered by their first member.
        if tallies[ci] > tallies[winner]:
            winner = ci
    return VoteTally(
        classes=partition.classes,
        weights=tuple(tallies),
        winner=winner,
    )


def consensus_answer(cset: CandidateSet, tally: VoteTally) -> Candidate:
    """The winning class's representative (its lowest-index member)."""
    return cset.candidates[tally.winning_candidates[0]]


# ---------------------------------------------------------------------------
# Reward scorers
# ---------------------------------------------------------------------------


class RewardScorer:
    """Assigns one scalar to a (question, full response) pair."""

    def score(self, question: str, response: str, correct: bool | None = None) -> float:
        raise NotImplementedError


class StubScorer(RewardScorer):
    """Seeded deterministic scorer for controlled experiments.

    With ``noise`` and ``inversion_probability`` both zero it is an oracle:
    1.0 for correct candidates, 0.0 otherwise. Inversion flips the oracle
    score with the given probability per candidate (simulating a reward
    model's false comparisons); ``noise`` adds a seeded Gaussian jitter.
    """

    def __init__(self, seed: int = 0, noise: float = 0.0, inversion_probability: float = 0.0):
        if not 0.0 <= inversion_probability <= 1.0:
            raise ValueError("inversion_probability must be in [0, 1]")
        if noise < 0:
            raise ValueError("noise must be >= 0")
        self.seed = seed
        self.noise = noise
        self.inversion_probability = inversion_probability

    def score(self, question: str, response: str, correct: bool | None = None) -> float:
        key = f"{self.seed}|{question}|{response}"
        digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
        rng = random.Random(int(digest[:16], 16))
        base = 0.5 if correct is None else (1.0 if correct else 0.0)
        if rng.random() < self.inversion_probability:
            base = 1.0 - base
        if self.noise:
            base += self.noise * rng.gauss(0.0, 1.0)
        return base


class HttpRewardScorer(RewardScorer):
    """Client for an external scoring endpoint.

    POSTs ``{"question": ..., "response": ...}`` to ``{base_url}/score`` and
    reads back ``{"score": number}``. Transient failures are retried a fixed
    number of times before raising :class:`ScorerError`.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 60.0,
        attempts: int = 3,
        backoff_base: float = 1.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.attempts = attempts
        self.backoff_base = backoff_base
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def score(self, question: str, response: str, correct: bool | None = None) -> float:
        url = f"{self.base_url}/score"
        last_error: Exception | None = None
        for attempt in range(self.attempts):
            try:
                resp = self._client.post(url, json={"question": question, "response": response})
            except httpx.HTTPError as exc:
                last_error = exc
            else:
                if resp.status_code < 400:
                    try:
                        value = float(resp.json()["score"])
                    except (ValueError, KeyError, TypeError) as exc:
                        raise ScorerError(f"malformed score response: {resp.text[:200]}") from exc
                    if not math.isfinite(value):
                        raise ScorerError(f"non-finite score {value!r}")
                    return value
                last_error = ScorerError(f"HTTP {resp.status_code}")
            if attempt + 1 < self.attempts:
                time.sleep(self.backoff_base * 2**attempt)
        raise ScorerError(f"scoring failed after {self.attempts} attempts: {last_error}")


def score_candidates(cset: CandidateSet, scorer: RewardScorer) -> CandidateSet:
    """Attach one score per candidate; failed candidates stay unscored with
    the error message recorded."""
    scored = []
    for candidate in cset.candidates:
        response = candidate.trajectory.response if candidate.trajectory else candidate.raw.span
        try:
            value = scorer.score(cset.question, response, correct=candidate.correct)
        except ScorerError as exc:
            scored.append(replace(candidate, score=None, score_error=str(exc)))
        else:
            scored.append(replace(candidate, score=float(value)))
    return CandidateSet(
        question_id=cset.question_id,
        question=cset.question,
        candidates=tuple(scored),
    )
