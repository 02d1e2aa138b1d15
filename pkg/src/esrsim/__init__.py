"""Simulation and audit of an entanglement-based reciprocal information exchange."""

from .analytic import OutcomeTriple, exact_distribution, sample_outcome, sample_outcome_epr
from .audit import KnowledgeView, PosteriorTable, posterior, verify_transcript
from .bitvec import BitVector, concat, dot_mod2, make_aux_b, make_aux_c, split_at, xor
from .errors import (
    DegenerateState,
    ESRError,
    IndexOutOfRange,
    InvalidN,
    LengthMismatch,
    MalformedTranscript,
    QubitLimitExceeded,
    TableTooLarge,
    UnknownBlock,
)
from .protocol import (
    ExchangeConfig,
    PublicMessages,
    Transcript,
    classical_round,
    reconstruct_iB,
    reconstruct_iC,
    run_exchange,
    run_exchange_epr,
)
from .statevector import RegisterLayout, StateVector, prepare_bell_pairs, prepare_ghz3n

__version__ = "0.1.0"

__all__ = [
    "BitVector",
    "classical_round",
    "concat",
    "DegenerateState",
    "dot_mod2",
    "ESRError",
    "exact_distribution",
    "ExchangeConfig",
    "IndexOutOfRange",
    "InvalidN",
    "KnowledgeView",
    "LengthMismatch",
    "make_aux_b",
    "make_aux_c",
    "MalformedTranscript",
    "OutcomeTriple",
    "posterior",
    "PosteriorTable",
    "prepare_bell_pairs",
    "prepare_ghz3n",
    "PublicMessages",
    "QubitLimitExceeded",
    "reconstruct_iB",
    "reconstruct_iC",
    "RegisterLayout",
    "run_exchange",
    "run_exchange_epr",
    "sample_outcome",
    "sample_outcome_epr",
    "split_at",
    "StateVector",
    "TableTooLarge",
    "Transcript",
    "UnknownBlock",
    "verify_transcript",
    "xor",
]
