"""Iterative-deepening sampling: geometric budget growth with manually
triggered self-correction, plus best-of-N and majority-voting aggregation,
runnable against OpenAI-compatible endpoints or built-in simulators."""

from .aggregation import (
    Candidate,
    CandidateSet,
    HttpRewardScorer,
    Partition,
    RewardScorer,
    ScoringRequiredError,
    StubScorer,
    VoteTally,
    best_of_n,
    candidate_equivalent,
    group_equivalent,
    majority_vote,
    score_candidates,
)
from .backends import (
    DEFAULT_TRIGGER_TEXT,
    BackendError,
    CompletionBackend,
    CompletionRequest,
    CompletionResult,
    HttpCompletionBackend,
    ProtocolError,
    ScriptedBackend,
    ScriptEntry,
    ScriptGapError,
    StochasticBackend,
    StochasticModelParams,
    TransportError,
    count_tokens,
    expected_answer,
    script_define,
)
from .checker import (
    AnswerExpr,
    AnswerParseError,
    RawAnswer,
    answers_match,
    equivalent,
    extract_final_answer,
    opaque_key,
    parse_expr,
    try_parse,
)
from .engine import (
    Round,
    SamplingParams,
    Trajectory,
    TrajectoryError,
    TriggerPolicy,
    id_sample,
    is_finished,
    pad_trigger,
    snap_to_step_boundary,
    vanilla_sample,
)
from .harness import (
    ComparisonError,
    DatasetError,
    Problem,
    RunConfig,
    RunReport,
    compare_runs,
    equivalent_n,
    load_dataset,
    run,
    synthetic_dataset,
    write_report,
)
from .scheduler import BudgetSchedule, CostLedger, LedgerRound, overhead_bound

__version__ = "0.1.0"

__all__ = [
    "AnswerExpr",
    "AnswerParseError",
    "BackendError",
    "BudgetSchedule",
    "Candidate",
    "CandidateSet",
    "ComparisonError",
    "CompletionBackend",
    "CompletionRequest",
    "CompletionResult",
    "CostLedger",
    "DatasetError",
    "DEFAULT_TRIGGER_TEXT",
    "HttpCompletionBackend",
    "HttpRewardScorer",
    "LedgerRound",
    "Partition",
    "Problem",
    "ProtocolError",
    "RawAnswer",
    "RewardScorer",
    "Round",
    "RunConfig",
    "RunReport",
    "SamplingParams",
    "ScoringRequiredError",
    "ScriptEntry",
    "ScriptGapError",
    "ScriptedBackend",
    "StochasticBackend",
    "StochasticModelParams",
    "StubScorer",
    "Trajectory",
    "TrajectoryError",
    "TransportError",
    "TriggerPolicy",
    "VoteTally",
    "answers_match",
    "best_of_n",
    "candidate_equivalent",
    "compare_runs",
    "count_tokens",
    "equivalent",
    "equivalent_n",
    "expected_answer",
    "extract_final_answer",
    "group_equivalent",
    "id_sample",
    "is_finished",
    "load_dataset",
    "majority_vote",
    "opaque_key",
    "overhead_bound",
    "pad_trigger",
    "parse_expr",
    "run",
    "score_candidates",
    "script_define",
    "snap_to_step_boundary",
    "synthetic_dataset",
    "try_parse",
    "vanilla_sample",
    "write_report",
]
