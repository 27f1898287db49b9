"""LM-agnostic decoding engine with span-level PMI verification.

Public surface: value types and config from ``core``, the model contract
and tabular toy model from ``lm``, the decode loop from ``engine``, the
reference strategies from ``baselines``, and the batch harness. The
brute-force replay functions in ``oracle`` back the test suite and the
hidden ``verify`` CLI subcommand; they are not a supported API.
"""

from .core import (
    BEAM,
    CAD,
    CD,
    DIVER_LEFT,
    DIVER_RIGHT,
    DIVER_STRATEGIES,
    DIVER_TOKEN,
    GREEDY,
    NEG_INF,
    NUCLEUS,
    STRATEGIES,
    DecodeTrace,
    DecoderConfig,
    DecodingError,
    LogProbDist,
    TokenSeq,
    Vocab,
    logsumexp,
    normalize_dist,
)
from .divergence import CandidateSet, candidate_set, is_divergence
from .engine import DecodeResult, decode, rerank, select_span
from .lm import LanguageModel, TabularLM
from .spans import (
    CandidateSpan,
    RiskSet,
    Rollout,
    build_spans,
    dynamic_k,
    rollout_candidate,
)
from .verifier import (
    PmiScore,
    PromptTemplatePair,
    load_templates,
    pmi_score,
    pmi_score_batch,
    render_backward_prompt,
)
from .baselines import (
    BeamHypothesis,
    beam_decode,
    cad_decode,
    cd_decode,
    greedy_decode,
    nucleus_decode,
)
from .harness import (
    DatasetRecord,
    RunReport,
    load_dataset,
    resolve_model,
    run_dataset,
    stats,
    sweep_gamma,
)

__all__ = [
    "BEAM",
    "CAD",
    "CD",
    "DIVER_LEFT",
    "DIVER_RIGHT",
    "DIVER_STRATEGIES",
    "DIVER_TOKEN",
    "GREEDY",
    "NEG_INF",
    "NUCLEUS",
    "STRATEGIES",
    "BeamHypothesis",
    "CandidateSet",
    "CandidateSpan",
    "DatasetRecord",
    "DecodeResult",
    "DecodeTrace",
    "DecoderConfig",
    "DecodingError",
    "LanguageModel",
    "LogProbDist",
    "PmiScore",
    "PromptTemplatePair",
    "RiskSet",
    "Rollout",
    "RunReport",
    "TabularLM",
    "TokenSeq",
    "Vocab",
    "beam_decode",
    "build_spans",
    "cad_decode",
    "candidate_set",
    "cd_decode",
    "decode",
    "dynamic_k",
    "greedy_decode",
    "is_divergence",
    "load_dataset",
    "load_templates",
    "logsumexp",
    "normalize_dist",
    "nucleus_decode",
    "pmi_score",
    "pmi_score_batch",
    "render_backward_prompt",
    "rerank",
    "resolve_model",
    "rollout_candidate",
    "run_dataset",
    "select_span",
    "stats",
    "sweep_gamma",
]

__version__ = "0.1.0"
