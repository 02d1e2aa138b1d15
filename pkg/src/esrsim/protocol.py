"""Three-party exchange (and its two-party Bell-pair variant) end to end.

One run has a quantum part, which yields the measured register contents
``a`` (Alice), ``b`` (Bob) and ``c`` (Charlie), and a classical part where
the parties publish the halves of their registers the other side needs:

    Alice   -> Bob      a_C
    Alice   -> Charlie  a_B
    Bob     -> Charlie  b_B
    Charlie -> Bob      c_C

Bob then recovers ``i_C = a_C ^ b_C ^ c_C`` and Charlie ``i_B = a_B ^ b_B ^ c_B``.
``b_C`` and ``c_B`` never leave their owners.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import analytic
from . import statevector as sv
from .bitvec import BitLike, BitVector, as_bitvector, concat, make_aux_b, make_aux_c, split_at, xor
from .errors import InvalidN, LengthMismatch, MalformedTranscript

FORMAT_VERSION = 1
BACKENDS = ("full", "reduced", "analytic")
VARIANTS = ("ghz3", "epr")
PUBLIC_FIELDS = ("a_B", "a_C", "b_B", "c_C")

# outcome tensors are deterministic in (variant, fidelity, secrets); caching
# them means multi-shot runs only pay for sampling
_OUTCOME_CACHE: dict[tuple, np.ndarray] = {}
_OUTCOME_CACHE_BUDGET_BYTES = 256 * 2**20


def rng_for_shot(master_seed: int, shot: int) -> np.random.Generator:
    """Independent generator for one shot, derived from ``(master_seed, shot)`` only."""
    seq = np.random.SeedSequence(entropy=int(master_seed) & (2**64 - 1), spawn_key=(int(shot),))
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class ExchangeConfig:
    i_B: BitVector
    i_C: BitVector
    backend: str = "analytic"
    variant: str = "ghz3"
    master_seed: int = 0
    redact_private: bool = False

    def __post_init__(self):
        object.__setattr__(self, "i_B", as_bitvector(self.i_B))
        object.__setattr__(self, "i_C", as_bitvector(self.i_C))
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.n < 1:
            raise InvalidN("at least one secret must be non-empty")

    @property
    def n(self) -> int:
        return len(self.i_B) + len(self.i_C)

    @property
    def i(self) -> BitVector:
        return concat(self.i_B, self.i_C)

    def required_qubits(self) -> int:
        """Qubits the statevector backends need (0 for the analytic backend)."""
        if self.backend == "analytic":
            return 0
        per_input = 3 if self.variant == "ghz3" else 2
        outputs = 2 if self.backend == "full" else 0
        return per_input * self.n + outputs


@dataclass(frozen=True)
class PublicMessages:
    """Everything published on the classical channels.

    ``a_B`` and ``a_C`` are ``None`` in the two-party variant. A parsed
    transcript may also lack ``b_B``/``c_C``; verification reports that.
    """

    len_ib: int
    len_ic: int
    a_B: Optional[BitVector]
    a_C: Optional[BitVector]
    b_B: Optional[BitVector]
    c_C: Optional[BitVector]

    def disclosed_bits(self) -> int:
        return sum(len(v) for v in (self.a_B, self.a_C, self.b_B, self.c_C) if v is not None)

    def to_dict(self) -> dict[str, Any]:
        return {
            "len_announcement": {"len_ib": self.len_ib, "len_ic": self.len_ic},
            "a_B": "" if self.a_B is None else str(self.a_B),
            "a_C": "" if self.a_C is None else str(self.a_C),
            "b_B": "" if self.b_B is None else str(self.b_B),
            "c_C": "" if self.c_C is None else str(self.c_C),
        }


@dataclass(frozen=True)
class Message:
    sender: str
    receiver: str
    field: str
    payload: Any


class Channel:
    """In-process public channel that records every message it carries."""

    def __init__(self):
        self.log: list[Message] = []

    def send(self, sender: str, receiver: str, name: str, payload: Any) -> Any:
        self.log.append(Message(sender, receiver, name, payload))
        return payload


@dataclass
class Transcript:
    variant: str
    backend: str
    seed: int
    shot: int
    len_ib: int
    len_ic: int
    public: PublicMessages
    success: bool
    secrets: Optional[dict[str, BitVector]] = None
    private: Optional[dict[str, BitVector]] = None
    reconstructed: Optional[dict[str, BitVector]] = None
    channel_log: list[dict[str, str]] = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    @property
    def n(self) -> int:
        return self.len_ib + self.len_ic

    @property
    def redacted(self) -> bool:
        return self.private is None

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "format_version": self.format_version,
            "variant": self.variant,
            "backend": self.backend,
            "n": self.n,
            "len_ib": self.len_ib,
            "len_ic": self.len_ic,
            "seed": self.seed,
            "shot": self.shot,
            "redacted": self.redacted,
        }
        if self.secrets is not None:
            doc["secrets"] = {k: str(v) for k, v in self.secrets.items()}
        doc["public"] = self.public.to_dict()
        doc["channel_log"] = list(self.channel_log)
        if self.private is not None:
            doc["private"] = {k: str(v) for k, v in self.private.items()}
        if self.reconstructed is not None:
            doc["reconstructed"] = {k: str(v) for k, v in self.reconstructed.items()}
        doc["success"] = self.success
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: Any) -> "Transcript":
        """Parse a transcript document.

        Only structure is checked here (keys, types, bitstring syntax);
        semantic consistency is :func:`esrsim.audit.verify_transcript`'s job.
        """
        if not isinstance(doc, dict):
            raise MalformedTranscript("transcript must be a JSON object")
        try:
            public_doc = doc["public"]
            lengths = public_doc["len_announcement"]
            public = PublicMessages(
                len_ib=_as_int(lengths["len_ib"], "public.len_announcement.len_ib"),
                len_ic=_as_int(lengths["len_ic"], "public.len_announcement.len_ic"),
                a_B=_opt_bits(public_doc.get("a_B"), "public.a_B", doc.get("variant")),
                a_C=_opt_bits(public_doc.get("a_C"), "public.a_C", doc.get("variant")),
                b_B=_opt_bits(public_doc.get("b_B"), "public.b_B", None),
                c_C=_opt_bits(public_doc.get("c_C"), "public.c_C", None),
            )
            transcript = cls(
                variant=str(doc["variant"]),
                backend=str(doc["backend"]),
                seed=_as_int(doc["seed"], "seed"),
                shot=_as_int(doc.get("shot", 0), "shot"),
                len_ib=_as_int(doc["len_ib"], "len_ib"),
                len_ic=_as_int(doc["len_ic"], "len_ic"),
                public=public,
                success=bool(doc["success"]),
                secrets=_bits_map(doc.get("secrets"), "secrets"),
                private=_bits_map(doc.get("private"), "private"),
                reconstructed=_bits_map(doc.get("reconstructed"), "reconstructed"),
                channel_log=list(doc.get("channel_log", [])),
                format_version=_as_int(doc["format_version"], "format_version"),
            )
        except KeyError as exc:
            raise MalformedTranscript(f"missing field {exc.args[0]!r}") from None
        except TypeError as exc:
            raise MalformedTranscript(str(exc)) from None
        if "n" in doc and _as_int(doc["n"], "n") != transcript.n:
            raise MalformedTranscript(f"n={doc['n']} disagrees with len_ib + len_ic = {transcript.n}")
        return transcript

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedTranscript(f"not valid JSON: {exc}") from None
        return cls.from_dict(doc)


def _as_int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedTranscript(f"{name} must be an integer, got {value!r}")
    return value


def _bits(value: Any, name: str) -> BitVector:
    if not isinstance(value, str):
        raise MalformedTranscript(f"{name} must be a bitstring, got {value!r}")
    try:
        return BitVector.from_str(value)
    except ValueError:
        raise MalformedTranscript(f"{name} is not a bitstring: {value!r}") from None


def _opt_bits(value: Any, name: str, variant: Any) -> Optional[BitVector]:
    if value is None:
        return None
    bits = _bits(value, name)
    if variant == "epr" and len(bits) == 0:
        return None
    return bits


def _bits_map(value: Any, name: str) -> Optional[dict[str, BitVector]]:
    if value is None:
        return None
    if not isinstance(value, dict):
        raise MalformedTranscript(f"{name} must be an object")
    return {k: _bits(v, f"{name}.{k}") for k, v in value.items()}


# -- quantum part -----------------------------------------------------------


def circuit_phases(i_B: BitLike, i_C: BitLike, variant: str = "ghz3", fidelity: str = "full",
                   cap: int | None = None) -> list[sv.StateVector]:
    """States psi0..psi3 of the exchange circuit (everything before measurement).

    ``fidelity="full"`` keeps the BOR/COR output qubits and applies each
    party's oracle as ``|y>|x> -> |y ^ f(x)>|x>``, so the sign appears by
    phase kickback. ``fidelity="reduced"`` drops the output qubits and applies
    the sign ``(-1)**(i~ . x)`` directly.
    """
    i_B, i_C = as_bitvector(i_B), as_bitvector(i_C)
    n = len(i_B) + len(i_C)
    outputs = fidelity == "full"
    if fidelity not in ("full", "reduced"):
        raise ValueError(f"fidelity must be 'full' or 'reduced', got {fidelity!r}")
    if variant == "ghz3":
        psi0 = sv.prepare_ghz3n(n, outputs=outputs, cap=cap)
        inputs = ("AIR", "BIR", "CIR")
    elif variant == "epr":
        psi0 = sv.prepare_bell_pairs(n, outputs=outputs, cap=cap)
        inputs = ("BIR", "CIR")
    else:
        raise ValueError(f"unknown variant {variant!r}")
    aux_b = make_aux_b(i_B, len(i_C))
    aux_c = make_aux_c(i_C, len(i_B))

    state = psi0
    if outputs:
        state = sv.apply_hadamard_block(state, "BOR")
        state = sv.apply_hadamard_block(state, "COR")
    psi1 = state
    if outputs:
        state = sv.apply_xor_oracle(state, "BIR", "BOR", aux_b)
        state = sv.apply_xor_oracle(state, "CIR", "COR", aux_c)
    else:
        state = sv.apply_phase_oracle(state, "BIR", aux_b)
        state = sv.apply_phase_oracle(state, "CIR", aux_c)
    psi2 = state
    for block in inputs:
        state = sv.apply_hadamard_block(state, block)
    psi3 = state
    return [psi0, psi1, psi2, psi3]


def pre_measurement_state(config: ExchangeConfig, cap: int | None = None) -> sv.StateVector:
    sv.check_qubit_budget(config.required_qubits(), cap)
    return circuit_phases(config.i_B, config.i_C, config.variant, config.backend, cap)[3]


def _outcome_tensor(config: ExchangeConfig, blocks: tuple[str, ...], cap: int | None) -> np.ndarray:
    sv.check_qubit_budget(config.required_qubits(), cap)
    key = (config.variant, config.backend, str(config.i_B), str(config.i_C))
    probs = _OUTCOME_CACHE.get(key)
    if probs is None:
        probs = sv.outcome_probabilities(pre_measurement_state(config, cap), blocks)
        _OUTCOME_CACHE[key] = probs
        while sum(p.nbytes for p in _OUTCOME_CACHE.values()) > _OUTCOME_CACHE_BUDGET_BYTES:
            del _OUTCOME_CACHE[next(iter(_OUTCOME_CACHE))]
    return probs


def clear_state_cache() -> None:
    _OUTCOME_CACHE.clear()


def _measure_all(config: ExchangeConfig, blocks: tuple[str, ...], rng: np.random.Generator,
                 cap: int | None) -> list[BitVector]:
    """Measure ``blocks`` in order on the pre-measurement state."""
    outcomes = sv.sample_sequential(_outcome_tensor(config, blocks, cap), rng)
    return [BitVector(x, config.n) for x in outcomes]


# -- classical part ---------------------------------------------------------


def classical_round(a: BitLike, b: BitLike, c: BitLike, len_b: int, len_c: int) -> PublicMessages:
    """Split each register and keep only the halves that are published."""
    a, b, c = as_bitvector(a), as_bitvector(b), as_bitvector(c)
    n = len_b + len_c
    if not len(a) == len(b) == len(c) == n:
        raise LengthMismatch(
            f"registers have lengths {len(a)}, {len(b)}, {len(c)}; expected {n}"
        )
    a_B, a_C = split_at(a, len_b)
    b_B, _ = split_at(b, len_b)
    _, c_C = split_at(c, len_b)
    return PublicMessages(len_b, len_c, a_B=a_B, a_C=a_C, b_B=b_B, c_C=c_C)


def classical_round_epr(b: BitLike, c: BitLike, len_b: int, len_c: int) -> PublicMessages:
    b, c = as_bitvector(b), as_bitvector(c)
    if not len(b) == len(c) == len_b + len_c:
        raise LengthMismatch(f"registers have lengths {len(b)}, {len(c)}; expected {len_b + len_c}")
    b_B, _ = split_at(b, len_b)
    _, c_C = split_at(c, len_b)
    return PublicMessages(len_b, len_c, a_B=None, a_C=None, b_B=b_B, c_C=c_C)


def reconstruct_iC(a_C: BitLike, b_C: BitLike, c_C: BitLike) -> BitVector:
    return xor(a_C, xor(b_C, c_C))


def reconstruct_iB(a_B: BitLike, b_B: BitLike, c_B: BitLike) -> BitVector:
    return xor(a_B, xor(b_B, c_B))


def _log_entries(channel: Channel) -> list[dict[str, str]]:
    return [{"from": m.sender, "to": m.receiver, "field": m.field} for m in channel.log]


def _announce_lengths(channel: Channel, config: ExchangeConfig) -> tuple[int, int]:
    len_b = channel.send("bob", "*", "len_ib", len(config.i_B))
    len_c = channel.send("charlie", "*", "len_ic", len(config.i_C))
    return len_b, len_c


def _finish(config: ExchangeConfig, shot: int, channel: Channel, public: PublicMessages,
            private: dict[str, BitVector], rec_B: BitVector, rec_C: BitVector) -> Transcript:
    success = rec_B == config.i_B and rec_C == config.i_C
    redact = config.redact_private
    return Transcript(
        variant=config.variant,
        backend=config.backend,
        seed=config.master_seed,
        shot=shot,
        len_ib=len(config.i_B),
        len_ic=len(config.i_C),
        public=public,
        success=success,
        secrets=None if redact else {"i_B": config.i_B, "i_C": config.i_C},
        private=None if redact else private,
        reconstructed=None if redact else {"i_B": rec_B, "i_C": rec_C},
        channel_log=_log_entries(channel),
    )


def run_exchange(config: ExchangeConfig, shot: int = 0, cap: int | None = None) -> Transcript:
    """Run one exchange; dispatches to :func:`run_exchange_epr` for the two-party variant."""
    if config.variant == "epr":
        return run_exchange_epr(config, shot, cap)
    rng = rng_for_shot(config.master_seed, shot)
    channel = Channel()
    len_b, len_c = _announce_lengths(channel, config)
    n = len_b + len_c

    if config.backend == "analytic":
        triple = analytic.sample_outcome(concat(config.i_B, config.i_C), rng)
        a, b, c = triple.a, triple.b, triple.c
    else:
        a, b, c = _measure_all(config, ("AIR", "BIR", "CIR"), rng, cap)
    assert len(a) == n

    msgs = classical_round(a, b, c, len_b, len_c)
    # each party only touches what it holds plus what it receives
    a_C_at_bob = channel.send("alice", "bob", "a_C", msgs.a_C)
    a_B_at_charlie = channel.send("alice", "charlie", "a_B", msgs.a_B)
    b_B_at_charlie = channel.send("bob", "charlie", "b_B", msgs.b_B)
    c_C_at_bob = channel.send("charlie", "bob", "c_C", msgs.c_C)

    _, b_C = split_at(b, len_b)
    c_B, _ = split_at(c, len_b)
    rec_C = reconstruct_iC(a_C_at_bob, b_C, c_C_at_bob)
    rec_B = reconstruct_iB(a_B_at_charlie, b_B_at_charlie, c_B)
    return _finish(config, shot, channel, msgs, {"a": a, "b": b, "c": c}, rec_B, rec_C)


def run_exchange_epr(config: ExchangeConfig, shot: int = 0, cap: int | None = None) -> Transcript:
    """Two-party run over Bell pairs; Bob and Charlie exchange ``b_B`` and ``c_C`` only."""
    if config.variant != "epr":
        raise ValueError("run_exchange_epr needs variant='epr'")
    rng = rng_for_shot(config.master_seed, shot)
    channel = Channel()
    len_b, len_c = _announce_lengths(channel, config)

    if config.backend == "analytic":
        b, c = analytic.sample_outcome_epr(concat(config.i_B, config.i_C), rng)
    else:
        b, c = _measure_all(config, ("BIR", "CIR"), rng, cap)

    msgs = classical_round_epr(b, c, len_b, len_c)
    b_B_at_charlie = channel.send("bob", "charlie", "b_B", msgs.b_B)
    c_C_at_bob = channel.send("charlie", "bob", "c_C", msgs.c_C)

    _, b_C = split_at(b, len_b)
    c_B, _ = split_at(c, len_b)
    rec_C = xor(b_C, c_C_at_bob)
    rec_B = xor(b_B_at_charlie, c_B)
    return _finish(config, shot, channel, msgs, {"b": b, "c": c}, rec_B, rec_C)


def run_shots(config: ExchangeConfig, shots: int, cap: int | None = None) -> list[Transcript]:
    return [run_exchange(config, s, cap) for s in range(shots)]
