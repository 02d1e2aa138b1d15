"""Exact knowledge audits and transcript verification.

:func:`posterior` answers "what can this party say about the secrets?" by
brute force. Under a uniform prior on the aggregated secret ``i``, every
hidden configuration ``(i, a, b, c)`` with ``a ^ b ^ c == i`` (``b ^ c == i``
for the two-party variant) is equally likely, so the posterior of a
candidate is proportional to the number of such configurations that agree
with every bit the party has seen. Counts are plain integers; no floating
point enters the verdict.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Union

import numpy as np

from .bitvec import BitVector, concat, split_at, xor
from .errors import LengthMismatch, MalformedTranscript, TableTooLarge
from .protocol import BACKENDS, FORMAT_VERSION, VARIANTS, Transcript

MAX_AUDIT_N = 8

PUBLIC_VIEW = ("lengths", "a_B", "a_C", "b_B", "c_C")
ROLE_FIELDS: dict[str, tuple[str, ...]] = {
    "eavesdropper": PUBLIC_VIEW,
    "alice": ("a",) + PUBLIC_VIEW,
    # each broker also knows its own secret
    "bob": PUBLIC_VIEW + ("b", "i_B"),
    "charlie": PUBLIC_VIEW + ("c", "i_C"),
}

# field -> (register, which half); half is None for the whole register
_FIELD_HALVES: dict[str, tuple[str, str | None]] = {
    "a": ("a", None), "a_B": ("a", "B"), "a_C": ("a", "C"),
    "b": ("b", None), "b_B": ("b", "B"), "b_C": ("b", "C"),
    "c": ("c", None), "c_B": ("c", "B"), "c_C": ("c", "C"),
    "i_B": ("i", "B"), "i_C": ("i", "C"),
}
_INDEXED = re.compile(r"^([abci]_[BC]|[abc])\[(\d+)\]$")


@dataclass(frozen=True)
class KnowledgeView:
    """A party's knowledge, as transcript field names.

    Entries are whole fields (``"b_C"``) or single bits of a field in text
    order (``"b_C[0]"`` is the leading bit of ``b_C``). ``"lengths"`` adds no
    constraint: the split point is always public.
    """

    role: str
    known: tuple[str, ...]

    @classmethod
    def for_role(cls, role: str, extra: Iterable[str] = (), variant: str = "ghz3") -> "KnowledgeView":
        if role not in ROLE_FIELDS:
            raise ValueError(f"role must be one of {sorted(ROLE_FIELDS)}, got {role!r}")
        known = ROLE_FIELDS[role]
        if variant == "epr":
            if role == "alice":
                raise ValueError("the two-party variant has no Alice")
            known = tuple(f for f in known if not f.startswith("a"))
        return cls(role, known + tuple(extra))

    def with_leak(self, *names: str) -> "KnowledgeView":
        return KnowledgeView(self.role, self.known + names)


@dataclass
class PosteriorTable:
    """Consistent-configuration counts per candidate ``(i_B, i_C)``."""

    counts: dict[tuple[str, str], int]
    view: KnowledgeView | None = None

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def probability(self, i_B: str, i_C: str) -> Fraction:
        return Fraction(self.counts[(i_B, i_C)], self.total)

    def probabilities(self) -> dict[tuple[str, str], Fraction]:
        total = self.total
        return {k: Fraction(c, total) for k, c in self.counts.items()}

    def support(self) -> list[tuple[str, str]]:
        return [k for k, c in self.counts.items() if c]

    def is_uniform(self) -> bool:
        """True when every candidate secret carries the same nonzero count."""
        values = set(self.counts.values())
        return len(values) == 1 and values.pop() > 0

    def marginal(self, which: str) -> dict[str, int]:
        """Counts summed onto ``i_B`` (``which="B"``) or ``i_C`` (``which="C"``)."""
        pos = {"B": 0, "C": 1}[which]
        out: dict[str, int] = {}
        for key, c in self.counts.items():
            out[key[pos]] = out.get(key[pos], 0) + c
        return out

    def verdict(self) -> str:
        return "UNIFORM" if self.is_uniform() else "NON-UNIFORM"

    def to_dict(self) -> dict[str, Any]:
        total = self.total
        return {
            "format_version": FORMAT_VERSION,
            "kind": "posterior",
            "view": None if self.view is None else {"role": self.view.role, "known": list(self.view.known)},
            "total": total,
            "candidates": [
                {"i_B": b, "i_C": c, "count": n, "probability": str(Fraction(n, total))}
                for (b, c), n in self.counts.items()
            ],
            "verdict": self.verdict(),
        }


def _field_value(name: str, t: Transcript) -> BitVector:
    pub = t.public
    if name in ("a_B", "a_C", "b_B", "c_C"):
        value = getattr(pub, name)
        if value is None:
            raise MalformedTranscript(f"view needs public field {name!r}, which the transcript lacks")
        return value
    if name in ("i_B", "i_C"):
        if t.secrets is None or name not in t.secrets:
            raise MalformedTranscript(f"view needs {name!r} but the transcript's secrets are redacted")
        return t.secrets[name]
    register, half = _FIELD_HALVES[name]
    if t.private is not None and register in t.private:
        whole = t.private[register]
    elif register == "a" and pub.a_B is not None and pub.a_C is not None:
        whole = concat(pub.a_B, pub.a_C)
    else:
        raise MalformedTranscript(f"view needs private register {register!r}, which is not in the transcript")
    if len(whole) != t.n:
        raise MalformedTranscript(f"register {register} has {len(whole)} bits, expected {t.n}")
    if half is None:
        return whole
    hi, lo = split_at(whole, t.len_ib)
    return hi if half == "B" else lo


def _constraints(view: KnowledgeView, t: Transcript) -> dict[str, tuple[int, int]]:
    """Per register, the ``(mask, value)`` pair every consistent candidate must match."""
    cons = {r: (0, 0) for r in "abci"}
    len_c = t.len_ic

    def add(register: str, mask: int, value: int) -> None:
        m, v = cons[register]
        if v < 0:
            return
        value &= mask
        overlap = m & mask
        # value -1 marks contradictory knowledge: no candidate survives
        cons[register] = (m | mask, -1 if (v & overlap) != (value & overlap) else v | value)

    for entry in view.known:
        if entry == "lengths":
            continue
        bit_index = None
        match = _INDEXED.match(entry)
        if match:
            entry, bit_index = match.group(1), int(match.group(2))
        if entry not in _FIELD_HALVES:
            raise ValueError(f"unknown view field {entry!r}")
        register, half = _FIELD_HALVES[entry]
        value = _field_value(entry, t)
        shift = 0 if half in (None, "C") else len_c
        width = len(value)
        if bit_index is None:
            mask = ((1 << width) - 1) << shift
        else:
            if not 0 <= bit_index < width:
                raise ValueError(f"bit index {bit_index} outside field {entry} of width {width}")
            mask = 1 << (shift + width - 1 - bit_index)
        add(register, mask, value.value << shift)
    return cons


def _candidates(n: int, constraint: tuple[int, int]) -> np.ndarray:
    mask, value = constraint
    x = np.arange(1 << n, dtype=np.int64)
    if value < 0:
        return x[:0]
    return x[(x & mask) == value]


def posterior(view: KnowledgeView, transcript: Transcript) -> PosteriorTable:
    """Exact posterior over ``(i_B, i_C)`` for a party holding ``view``."""
    n = transcript.n
    if n > MAX_AUDIT_N:
        raise TableTooLarge(f"audit enumerates 2^(3n) configurations; n={n} exceeds {MAX_AUDIT_N}")
    if n < 1:
        raise MalformedTranscript("transcript has no secret bits")
    if transcript.variant not in VARIANTS:
        raise MalformedTranscript(f"unknown variant {transcript.variant!r}")
    cons = _constraints(view, transcript)
    two_party = transcript.variant == "epr"
    if two_party and cons["a"][0]:
        raise ValueError("the two-party variant has no Alice register")

    A = _candidates(n, cons["a"])
    B = _candidates(n, cons["b"])
    mask_c, val_c = cons["c"]
    allowed_i = set(_candidates(n, cons["i"]).tolist())

    if two_party:
        pairs = B
    else:
        pairs = (A[:, None] ^ B[None, :]).reshape(-1)

    len_b = transcript.len_ib
    counts: dict[tuple[str, str], int] = {}
    for i in range(1 << n):
        if i in allowed_i and val_c >= 0:
            c = pairs ^ i
            count = int(np.count_nonzero((c & mask_c) == val_c))
        else:
            count = 0
        i_B, i_C = split_at(BitVector(i, n), len_b)
        counts[(str(i_B), str(i_C))] = count
    return PosteriorTable(counts, view)


# -- verification -----------------------------------------------------------

PASS, FAIL, NOT_EVALUABLE = "PASS", "FAIL", "NOT_EVALUABLE"


@dataclass
class Check:
    name: str
    status: str
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.status != FAIL for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if c.status == FAIL]

    def status(self, name: str) -> str:
        for c in self.checks:
            if c.name == name:
                return c.status
        raise KeyError(name)

    def add(self, name: str, ok: bool | None, detail: str = "") -> None:
        status = NOT_EVALUABLE if ok is None else (PASS if ok else FAIL)
        self.checks.append(Check(name, status, detail))

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "verification_report",
            "passed": self.passed,
            "checks": [{"name": c.name, "status": c.status, "detail": c.detail} for c in self.checks],
        }


_ALLOWED_PUBLIC_KEYS = {"len_announcement", "a_B", "a_C", "b_B", "c_C"}
_ALLOWED_LOG_FIELDS = {"len_ib", "len_ic", "a_B", "a_C", "b_B", "c_C"}


def _length(v: BitVector | None) -> int | None:
    return None if v is None else len(v)


def verify_transcript(transcript: Union[Transcript, Mapping[str, Any]]) -> VerificationReport:
    """Run every consistency check a referee can perform on a transcript.

    Accepts a parsed :class:`Transcript` or the raw JSON document; the raw
    form additionally lets the scan for undisclosed fields see unknown keys.
    """
    raw = transcript if isinstance(transcript, Mapping) else None
    t = Transcript.from_dict(dict(raw)) if raw is not None else transcript
    raw_public = raw["public"] if raw is not None else t.public.to_dict()
    report = VerificationReport()
    pub = t.public
    two_party = t.variant == "epr"

    report.add("format_version", t.format_version == FORMAT_VERSION,
               f"found {t.format_version}, expected {FORMAT_VERSION}")
    report.add("variant_backend", t.variant in VARIANTS and t.backend in BACKENDS,
               f"variant={t.variant} backend={t.backend}")
    report.add("n_positive", t.len_ib >= 0 and t.len_ic >= 0 and t.n >= 1,
               f"len_ib={t.len_ib} len_ic={t.len_ic}")
    report.add("length_announcement", (pub.len_ib, pub.len_ic) == (t.len_ib, t.len_ic),
               f"announced ({pub.len_ib}, {pub.len_ic}), header ({t.len_ib}, {t.len_ic})")

    if two_party:
        missing = [k for k in ("b_B", "c_C") if getattr(pub, k) is None]
        stray = [k for k in ("a_B", "a_C") if getattr(pub, k) is not None]
        report.add("message_presence", not missing and not stray,
                   f"missing={missing} unexpected={stray}")
    else:
        missing = [k for k in ("a_B", "a_C", "b_B", "c_C") if getattr(pub, k) is None]
        report.add("message_presence", not missing, f"missing={missing}")

    expected = {"a_B": t.len_ib, "b_B": t.len_ib, "a_C": t.len_ic, "c_C": t.len_ic}
    if two_party:
        del expected["a_B"], expected["a_C"]
    bad = {k: _length(getattr(pub, k)) for k, want in expected.items()
           if getattr(pub, k) is not None and len(getattr(pub, k)) != want}
    report.add("length_consistency", not bad,
               "; ".join(f"|{k}|={got}, expected {expected[k]}" for k, got in bad.items()))

    extra_keys = sorted(set(raw_public) - _ALLOWED_PUBLIC_KEYS) if isinstance(raw_public, Mapping) else []
    want_bits = t.n if two_party else 2 * t.n
    got_bits = pub.disclosed_bits()
    report.add("minimal_disclosure", not extra_keys and got_bits == want_bits,
               f"public bits={got_bits} expected={want_bits} extra_fields={extra_keys}")

    log_fields = []
    for entry in t.channel_log:
        if not isinstance(entry, Mapping) or "field" not in entry:
            raise MalformedTranscript(f"channel_log entry is malformed: {entry!r}")
        log_fields.append(entry["field"])
    leaked = sorted(set(log_fields) - _ALLOWED_LOG_FIELDS)
    report.add("channel_log", not leaked, f"undisclosable fields on channel: {leaked}" if leaked else "")

    _check_private(report, t)
    return report


def _check_private(report: VerificationReport, t: Transcript) -> None:
    two_party = t.variant == "epr"
    registers = ("b", "c") if two_party else ("a", "b", "c")
    if t.private is None:
        for name in ("register_lengths", "fcp", "public_private_consistency",
                     "reconstruction", "success_flag"):
            report.add(name, None, "private fields redacted")
        return
    priv = t.private
    missing = [r for r in registers if r not in priv]
    if missing:
        raise MalformedTranscript(f"private section lacks registers {missing}")
    bad_len = {r: len(priv[r]) for r in registers if len(priv[r]) != t.n}
    report.add("register_lengths", not bad_len, f"lengths {bad_len}, expected {t.n}" if bad_len else "")
    if bad_len:
        for name in ("fcp", "public_private_consistency", "reconstruction", "success_flag"):
            report.add(name, None, "register lengths inconsistent")
        return

    parity = xor(priv["b"], priv["c"]) if two_party else xor(priv["a"], xor(priv["b"], priv["c"]))
    secrets = t.secrets
    if secrets is None or "i_B" not in secrets or "i_C" not in secrets:
        report.add("fcp", None, "secrets not recorded")
    else:
        try:
            i = concat(secrets["i_B"], secrets["i_C"])
            ok = len(i) == t.n and parity == i
            report.add("fcp", ok, f"register parity {parity} vs i {i}")
        except LengthMismatch as exc:
            report.add("fcp", False, str(exc))

    pub = t.public
    halves = {r: split_at(priv[r], t.len_ib) for r in registers}
    mismatched = []
    if not two_party:
        if pub.a_B != halves["a"][0]:
            mismatched.append("a_B")
        if pub.a_C != halves["a"][1]:
            mismatched.append("a_C")
    if pub.b_B != halves["b"][0]:
        mismatched.append("b_B")
    if pub.c_C != halves["c"][1]:
        mismatched.append("c_C")
    report.add("public_private_consistency", not mismatched,
               f"public halves disagree with registers: {mismatched}" if mismatched else "")

    if mismatched or t.reconstructed is None:
        report.add("reconstruction", None, "inputs inconsistent" if mismatched else "not recorded")
    else:
        b_C, c_B = halves["b"][1], halves["c"][0]
        if two_party:
            rec_C, rec_B = xor(b_C, pub.c_C), xor(pub.b_B, c_B)
        else:
            rec_C = xor(pub.a_C, xor(b_C, pub.c_C))
            rec_B = xor(pub.a_B, xor(pub.b_B, c_B))
        ok = t.reconstructed.get("i_B") == rec_B and t.reconstructed.get("i_C") == rec_C
        report.add("reconstruction", ok, f"recomputed i_B={rec_B} i_C={rec_C}")

    if secrets is None or t.reconstructed is None:
        report.add("success_flag", None, "secrets or reconstructions not recorded")
    else:
        expect = (t.reconstructed.get("i_B") == secrets.get("i_B")
                  and t.reconstructed.get("i_C") == secrets.get("i_C"))
        report.add("success_flag", t.success == expect and t.success,
                   f"flag={t.success} recomputed={expect}")
