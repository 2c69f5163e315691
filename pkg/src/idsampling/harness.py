"""Experiment driver: run vanilla and iterative-deepening sampling over a
dataset, aggregate metrics, and emit machine-readable reports.

Reports are deterministic byte-for-byte for simulator backends under a fixed
seed (wall-clock timing lives in its own subtree and is the only
nondeterministic part), for any parallelism level: all per-call randomness
is content-addressed, and assembly order is fixed by dataset order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import aggregation, checker
from .aggregation import (
    Candidate,
    CandidateSet,
    HttpRewardScorer,
    RewardScorer,
    ScoringRequiredError,
    StubScorer,
)
from .backends import (
    BackendError,
    CompletionBackend,
    HttpCompletionBackend,
    ScriptedBackend,
    StochasticBackend,
    StochasticModelParams,
    expected_answer,
)
from .engine import (
    DEFAULT_BOUNDARY_MARKERS,
    DEFAULT_SNAP_ALLOWANCE,
    SamplingParams,
    Trajectory,
    TrajectoryError,
    TriggerPolicy,
    id_sample,
    vanilla_sample,
)
from .scheduler import BudgetSchedule

METHOD_VANILLA = "vanilla"
METHOD_ID_SAMPLING = "id_sampling"


class DatasetError(ValueError):
    """Dataset file is malformed; message names the offending line."""


class ComparisonError(ValueError):
    """Reports being compared do not share a dataset and N."""


@dataclass(frozen=True)
class Problem:
    id: str
    question: str
    gold_answer: str

    def __post_init__(self) -> None:
        if not self.question:
            raise ValueError("question must be nonempty")


def load_dataset(path: str) -> list[Problem]:
    """Parse a JSON-lines file of {"id", "question", "answer"} records."""
    problems: list[Problem] = []
    seen: set[str] = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            for key in ("id", "question", "answer"):
                if key not in record:
                    raise DatasetError(f"{path}:{lineno}: missing field {key!r}")
            pid = str(record["id"])
            if pid in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate id {pid!r}")
            seen.add(pid)
            problems.append(
                Problem(id=pid, question=str(record["question"]), gold_answer=str(record["answer"]))
            )
    return problems


def synthetic_dataset(n: int, seed: int = 0) -> list[Problem]:
    """Generate distinct problems whose gold answers the stochastic backend
    knows how to produce (both sides derive them from the question text)."""
    problems = []
    for i in range(n):
        tag = hashlib.sha256(f"{seed}|{i}".encode()).hexdigest()[:10]
        question = (
            f"Problem {tag}: determine the target quantity for configuration {tag}. "
            "Give the final answer as \\boxed{...}."
        )
        problems.append(Problem(id=f"q{i:05d}", question=question, gold_answer=expected_answer(question)))
    return problems


@dataclass
class RunConfig:
    """Everything one experiment run needs; mirrors the config-file keys."""

    method: str = METHOD_ID_SAMPLING
    n: int = 1
    schedule: BudgetSchedule = field(default_factory=BudgetSchedule)
    policy: TriggerPolicy = field(default_factory=TriggerPolicy)
    sampling: SamplingParams = field(default_factory=SamplingParams)
    backend: dict = field(default_factory=lambda: {"kind": "stochastic"})
    scorer: dict = field(default_factory=lambda: {"kind": "stub"})
    parallelism: int = 1
    seed: int = 0
    snap_allowance: int = DEFAULT_SNAP_ALLOWANCE
    boundary_markers: tuple[str, ...] = DEFAULT_BOUNDARY_MARKERS
    prefill_cost: float = 0.02
    request_overhead: float = 80.0

    def __post_init__(self) -> None:
        if self.method not in (METHOD_VANILLA, METHOD_ID_SAMPLING):
            raise ValueError(f"unknown method {self.method!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        schedule = BudgetSchedule(
            initial_budget=int(raw.get("initial_budget", 256)),
            growth_factor=float(raw.get("gamma", 2.0)),
            max_total=int(raw.get("max_total_tokens", 8192)),
        )
        policy_kwargs = {}
        if "trigger_text" in raw:
            policy_kwargs["trigger_text"] = raw["trigger_text"]
        if "trigger_separator" in raw:
            policy_kwargs["separator"] = raw["trigger_separator"]
        if "redundancy_window" in raw:
            policy_kwargs["redundancy_window"] = int(raw["redundancy_window"])
        sampling = SamplingParams(
            temperature=float(raw.get("temperature", 0.7)),
            top_p=raw.get("top_p"),
        )
        return cls(
            method=raw.get("method", METHOD_ID_SAMPLING),
            n=int(raw.get("n", 1)),
            schedule=schedule,
            policy=TriggerPolicy(**policy_kwargs),
            sampling=sampling,
            backend=dict(raw.get("backend", {"kind": "stochastic"})),
            scorer=dict(raw.get("scorer", {"kind": "stub"})),
            parallelism=int(raw.get("parallelism", 1)),
            seed=int(raw.get("seed", 0)),
            snap_allowance=int(raw.get("snap_allowance", DEFAULT_SNAP_ALLOWANCE)),
            boundary_markers=tuple(raw.get("boundary_markers", DEFAULT_BOUNDARY_MARKERS)),
            prefill_cost=float(raw.get("prefill_cost", 0.02)),
            request_overhead=float(raw.get("request_overhead", 80.0)),
        )

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n": self.n,
            "initial_budget": self.schedule.initial_budget,
            "gamma": self.schedule.growth_factor,
            "max_total_tokens": self.schedule.max_total,
            "trigger_text": self.policy.trigger_text,
            "trigger_separator": self.policy.separator,
            "redundancy_window": self.policy.redundancy_window,
            "temperature": self.sampling.temperature,
            "top_p": self.sampling.top_p,
            "backend": dict(self.backend),
            "scorer": dict(self.scorer),
            "parallelism": self.parallelism,
            "seed": self.seed,
            "snap_allowance": self.snap_allowance,
            "boundary_markers": list(self.boundary_markers),
            "prefill_cost": self.prefill_cost,
            "request_overhead": self.request_overhead,
        }


def build_backend(config: RunConfig) -> CompletionBackend:
    options = dict(config.backend)
    kind = options.pop("kind", "stochastic")
    if kind == "stochastic":
        seed = int(options.pop("seed", config.seed))
        params = StochasticModelParams(
            p_solve=float(options.pop("p_solve", 0.3)),
            p_correct_on_trigger=float(options.pop("p_correct_on_trigger", 0.5)),
            p_derail_on_trigger=float(options.pop("p_derail_on_trigger", 0.0)),
            length_lo=int(options.pop("length_lo", 300)),
            length_hi=int(options.pop("length_hi", 2500)),
            trigger_text=config.policy.trigger_text,
        )
        return StochasticBackend(params, seed=seed)
    if kind == "scripted":
        return ScriptedBackend.from_json(options["script_path"])
    if kind == "http":
        return HttpCompletionBackend(
            base_url=options["base_url"],
            model=options.get("model", ""),
            api_key_env=options.get("api_key_env", "IDSAMPLING_API_KEY"),
            timeout=float(options.get("timeout", 120.0)),
            max_connections=int(options.get("max_connections", 16)),
        )
    raise ValueError(f"unknown backend kind {kind!r}")


def build_scorer(config: RunConfig) -> RewardScorer:
    options = dict(config.scorer)
    kind = options.pop("kind", "stub")
    if kind == "stub":
        return StubScorer(
            seed=int(options.get("seed", config.seed)),
            noise=float(options.get("noise", 0.0)),
            inversion_probability=float(options.get("inversion_probability", 0.0)),
        )
    if kind == "http":
        return HttpRewardScorer(
            base_url=options["base_url"],
            timeout=float(options.get("timeout", 60.0)),
            attempts=int(options.get("attempts", 3)),
        )
    raise ValueError(f"unknown scorer kind {kind!r}")


def k_grid(n: int) -> list[int]:
    """Powers of two up to n, always ending at n itself."""
    ks = []
    k = 1
    while k <= n:
        ks.append(k)
        k *= 2
    if ks[-1] != n:
        ks.append(n)
    return ks


@dataclass
class RunReport:
    config: dict
    dataset: dict
    questions: list[dict]
    metrics: dict
    tokens: dict
    timing: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "dataset": self.dataset,
            "questions": self.questions,
            "metrics": self.metrics,
            "tokens": self.tokens,
            "timing": self.timing,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunReport":
        return cls(
            config=raw["config"],
            dataset=raw.get("dataset", {}),
            questions=raw["questions"],
            metrics=raw["metrics"],
            tokens=raw["tokens"],
            timing=raw.get("timing", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def deterministic_json(self) -> str:
        """Report content with the execution subtree (wall time, parallelism)
        removed; seeded simulator runs must agree on this byte-for-byte for
        any parallelism level."""
        body = self.to_dict()
        body.pop("timing", None)
        return json.dumps(body, sort_keys=True, indent=2)

    @property
    def question_ids(self) -> list[str]:
        return [q["id"] for q in self.questions]


def _dataset_fingerprint(dataset: Sequence[Problem]) -> str:
    digest = hashlib.sha256()
    for problem in dataset:
        digest.update(f"{problem.id}\x1f{problem.question}\x1f{problem.gold_answer}\x1e".encode())
    return digest.hexdigest()[:16]


def _trajectory_seed(seed: int, question_id: str, sample_index: int) -> int:
    digest = hashlib.sha256(f"{seed}|{question_id}|{sample_index}".encode()).hexdigest()
    return int(digest[:15], 16)


def _sample_trajectory(problem: Problem, sample_index: int, config: RunConfig,
                       backend: CompletionBackend) -> Trajectory:
    sampling = replace(
        config.sampling, seed=_trajectory_seed(config.seed, problem.id, sample_index)
    )
    if config.method == METHOD_VANILLA:
        return vanilla_sample(problem.question, config.schedule, backend, sampling)
    return id_sample(
        problem.question,
        config.schedule,
        config.policy,
        backend,
        sampling,
        snap_allowance=config.snap_allowance,
        boundary_markers=config.boundary_markers,
    )


def _evaluate_correct(gold_expr: checker.AnswerExpr | None, gold_text: str,
                      raw: checker.RawAnswer, expr: checker.AnswerExpr | None) -> bool:
    if not raw.found:
        return False
    if gold_expr is not None and expr is not None:
        return checker.equivalent(gold_expr, expr)
    if gold_expr is None and expr is None:
        return checker.opaque_key(raw.span) == checker.opaque_key(gold_text)
    return False


def _build_candidates(problem: Problem, trajectories: list[Trajectory],
                      scorer: RewardScorer) -> CandidateSet:
    gold_expr = checker.try_parse(problem.gold_answer)
    candidates = []
    for trajectory in trajectories:
        raw = checker.extract_final_answer(trajectory.response)
        expr = checker.try_parse(raw.span) if raw.found else None
        key = expr.render() if expr is not None else checker.opaque_key(raw.span)
        candidates.append(
            Candidate(
                raw=raw,
                expr=expr,
                key=key,
                correct=_evaluate_correct(gold_expr, problem.gold_answer, raw, expr),
                trajectory=trajectory,
            )
        )
    cset = CandidateSet(
        question_id=problem.id, question=problem.question, candidates=tuple(candidates)
    )
    return aggregation.score_candidates(cset, scorer)


def _candidate_record(candidate: Candidate) -> dict:
    trajectory = candidate.trajectory
    record = {
        "answer": candidate.raw.span,
        "origin": candidate.raw.origin,
        "key": candidate.key,
        "parsed": candidate.parsed,
        "correct": candidate.correct,
        "score": candidate.score,
    }
    if candidate.score_error:
        record["score_error"] = candidate.score_error
    if trajectory is not None:
        record.update(
            {
                "status": trajectory.status,
                "rounds": len(trajectory.rounds),
                "trigger_count": trajectory.trigger_count,
                "finish_reasons": [r.finish_reason for r in trajectory.rounds],
                "generated_tokens": trajectory.ledger.total_generated,
                "trigger_tokens": trajectory.ledger.trigger_tokens,
            }
        )
    return record


def run(
    dataset: Sequence[Problem],
    config: RunConfig,
    backend: CompletionBackend | None = None,
    scorer: RewardScorer | None = None,
) -> RunReport:
    """Produce N trajectories per question, grade and score them, and
    aggregate the metric curves.

    Per-question backend failures mark the question errored; errored
    questions are excluded from every accuracy denominator and reported by
    count. Dataset order fixes assembly order, so results are identical for
    any parallelism level under seeded simulator backends.
    """
    backend = backend if backend is not None else build_backend(config)
    scorer = scorer if scorer is not None else build_scorer(config)
    started = time.perf_counter()

    grid = k_grid(config.n)
    question_records: list[dict] = []
    bon_hits = {k: 0 for k in grid}
    bon_evaluated = {k: 0 for k in grid}
    cons_hits = {k: 0 for k in grid}
    pass1_hits = 0
    evaluated = 0
    errored = 0
    totals = {
        "generated_total": 0,
        "prompt_total": 0,
        "trigger_total": 0,
        "snap_total": 0,
        "generation_calls": 0,
    }

    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        futures: dict[int, list[Future]] = {}
        window = max(1, -(-config.parallelism // config.n)) + 1  # questions in flight
        next_submit = 0

        def submit_upto(limit: int) -> None:
            nonlocal next_submit
            while next_submit < min(limit, len(dataset)):
                problem = dataset[next_submit]
                futures[next_submit] = [
                    pool.submit(_sample_trajectory, problem, si, config, backend)
                    for si in range(config.n)
                ]
                next_submit += 1

        for qi, problem in enumerate(dataset):
            submit_upto(qi + window)
            record: dict = {"id": problem.id, "gold": problem.gold_answer, "errored": False}
            try:
                trajectories = [f.result() for f in futures.pop(qi)]
            except (TrajectoryError, BackendError) as exc:
                record["errored"] = True
                record["error"] = str(exc)
                record["candidates"] = []
                errored += 1
                question_records.append(record)
                continue

            cset = _build_candidates(problem, trajectories, scorer)
            record["candidates"] = [_candidate_record(c) for c in cset.candidates]
            question_records.append(record)

            evaluated += 1
            if cset.candidates[0].correct:
                pass1_hits += 1
            for k in grid:
                try:
                    if aggregation.best_of_n(cset, k).correct:
                        bon_hits[k] += 1
                    bon_evaluated[k] += 1
                except ScoringRequiredError:
                    pass  # unscored candidates exclude this question at this k
                tally = aggregation.majority_vote(cset, k)
                if aggregation.consensus_answer(cset, tally).correct:
                    cons_hits[k] += 1

            for trajectory in trajectories:
                ledger = trajectory.ledger
                totals["generated_total"] += ledger.total_generated
                totals["prompt_total"] += ledger.total_prompt_tokens
                totals["trigger_total"] += ledger.trigger_tokens
                totals["snap_total"] += ledger.snap_generated
                totals["generation_calls"] += ledger.generation_calls

    def ratio(hits: int, denom: int) -> float | None:
        return hits / denom if denom else None

    metrics = {
        "k_grid": grid,
        "pass1": ratio(pass1_hits, evaluated),
        "bon": {str(k): ratio(bon_hits[k], bon_evaluated[k]) for k in grid},
        "cons": {str(k): ratio(cons_hits[k], evaluated) for k in grid},
        "bon_excluded": {str(k): evaluated - bon_evaluated[k] for k in grid},
        "evaluated_questions": evaluated,
        "errored_questions": errored,
    }
    tokens = dict(totals)
    tokens["cost_proxy"] = (
        totals["generated_total"]
        + config.prefill_cost * totals["prompt_total"]
        + config.request_overhead * totals["generation_calls"]
    )

    # parallelism is an execution knob, not run semantics: identical seeds
    # must produce identical deterministic bodies at any worker count
    config_snapshot = config.to_dict()
    config_snapshot.pop("parallelism")

    return RunReport(
        config=config_snapshot,
        dataset={"size": len(dataset), "fingerprint": _dataset_fingerprint(dataset)},
        questions=question_records,
        metrics=metrics,
        tokens=tokens,
        timing={
            "wall_time_s": time.perf_counter() - started,
            "parallelism": config.parallelism,
        },
    )


def equivalent_n(actual_n: int, relative_time: float) -> int:
    """Compute-fair sample count: ``actual_n * ceil(relative_time)``.

    A method running at 1.6-1.9x baseline runtime is charged a full doubling
    of N; the ceiling generalizes that convention conservatively.
    """
    if actual_n < 1:
        raise ValueError("actual_n must be >= 1")
    if relative_time < 1.0:
        raise ValueError("relative_time must be >= 1")
    return actual_n * math.ceil(relative_time - 1e-9)


def compare_runs(reports: Sequence[RunReport]) -> dict:
    """Compare reports against the first one (the baseline).

    Emits, per report: relative cost (baseline = 1.0), per-k accuracy deltas,
    and the equivalent-N conversion of each k under that relative cost.
    """
    if not reports:
        raise ComparisonError("need at least one report")
    baseline = reports[0]
    base_n = baseline.config["n"]
    base_cost = baseline.tokens.get("cost_proxy") or 0.0
    if base_cost <= 0:
        raise ComparisonError("baseline report carries no cost accounting")

    rows = []
    for report in reports:
        if report.dataset != baseline.dataset:
            raise ComparisonError("reports do not share a dataset")
        if report.config["n"] != base_n:
            raise ComparisonError("reports do not share N")
        relative = (report.tokens.get("cost_proxy") or 0.0) / base_cost
        row = {
            "method": report.config["method"],
            "gamma": report.config.get("gamma"),
            "relative_cost": relative,
            "pass1": report.metrics.get("pass1"),
            "pass1_delta": _delta(report.metrics.get("pass1"), baseline.metrics.get("pass1")),
            "bon_delta": {},
            "cons_delta": {},
            "equivalent_n": {},
        }
        for k in baseline.metrics["k_grid"]:
            key = str(k)
            row["bon_delta"][key] = _delta(
                report.metrics["bon"].get(key), baseline.metrics["bon"].get(key)
            )
            row["cons_delta"][key] = _delta(
                report.metrics["cons"].get(key), baseline.metrics["cons"].get(key)
            )
            row["equivalent_n"][key] = equivalent_n(k, max(1.0, relative))
        rows.append(row)
    return {"baseline_method": baseline.config["method"], "k_grid": baseline.metrics["k_grid"], "rows": rows}


def _delta(a: float | None, b: float | None) -> float | None:
    if a is None or b is None:
        return None
    return a - b


def write_report(report: RunReport, out_dir: str) -> dict[str, str]:
    """Write report.json (full), curves.csv, and plot_data.json; returns the
    paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "report": os.path.join(out_dir, "report.json"),
        "curves": os.path.join(out_dir, "curves.csv"),
        "plot_data": os.path.join(out_dir, "plot_data.json"),
    }
    with open(paths["report"], "w") as fh:
        fh.write(report.to_json() + "\n")

    grid = report.metrics["k_grid"]
    with open(paths["curves"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "bon_accuracy", "cons_accuracy"])
        for k in grid:
            writer.writerow(
                [k, report.metrics["bon"].get(str(k)), report.metrics["cons"].get(str(k))]
            )

    plot_data = {
        "method": report.config["method"],
        "series": {
            "bon": [[k, report.metrics["bon"].get(str(k))] for k in grid],
            "cons": [[k, report.metrics["cons"].get(str(k))] for k in grid],
        },
    }
    with open(paths["plot_data"], "w") as fh:
        json.dump(plot_data, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return paths
