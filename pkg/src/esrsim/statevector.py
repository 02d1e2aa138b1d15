"""Dense statevector simulation over named qubit blocks.

Qubit ordering: a :class:`RegisterLayout` lists its blocks from least to most
significant, so for the three-party circuit the listing ``CIR, COR, BIR, BOR,
AIR`` gives the global basis index

    idx = ((((a * 2 + bor) * 2**n + b) * 2 + cor) * 2**n + c)

Within a block, bit ``x_k`` of the block content sits on global qubit
``offset + k``.

Gate functions take a :class:`StateVector` and return a new one; the input is
never modified.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bitvec import BitLike, BitVector, as_bitvector
from .errors import (
    DegenerateState,
    IndexOutOfRange,
    InvalidN,
    LengthMismatch,
    QubitLimitExceeded,
    TableTooLarge,
    UnknownBlock,
)

DEFAULT_QUBIT_CAP = 26
MAX_TABLE_BITS = 24
AMP_ATOL = 1e-12
PROB_ATOL = 1e-10

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def qubit_cap() -> int:
    """Active qubit cap: ``ESR_QUBIT_CAP`` if set, else 26."""
    raw = os.environ.get("ESR_QUBIT_CAP")
    if raw is None or raw.strip() == "":
        return DEFAULT_QUBIT_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"ESR_QUBIT_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"ESR_QUBIT_CAP must be positive, got {cap}")
    return cap


def check_qubit_budget(total_qubits: int, cap: int | None = None) -> None:
    cap = qubit_cap() if cap is None else cap
    if total_qubits > cap:
        raise QubitLimitExceeded(
            f"{total_qubits} qubits requested but the cap is {cap} "
            f"(~{16 * 2**total_qubits / 2**30:.2f} GiB of amplitudes)"
        )


@dataclass(frozen=True)
class RegisterLayout:
    """Named qubit blocks, least significant block first."""

    blocks: tuple[tuple[str, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "_total", sum(w for _, w in self.blocks))
        names = [name for name, _ in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate block names in {names}")
        for name, width in self.blocks:
            if width < 1:
                raise ValueError(f"block {name!r} has width {width}")

    @property
    def total_qubits(self) -> int:
        return self._total

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.blocks)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def span(self, name: str) -> tuple[int, int]:
        """``(offset, width)`` of a block in global qubit positions."""
        offset = 0
        for block, width in self.blocks:
            if block == name:
                return offset, width
            offset += width
        raise UnknownBlock(f"no block named {name!r} in layout {self.names}")

    def width(self, name: str) -> int:
        return self.span(name)[1]

    def index_of(self, contents: Mapping[str, BitLike | int]) -> int:
        """Global basis index for the given block contents (missing blocks are 0)."""
        unknown = set(contents) - set(self.names)
        if unknown:
            raise UnknownBlock(f"unknown blocks {sorted(unknown)}")
        idx = 0
        for name, value in contents.items():
            offset, width = self.span(name)
            if isinstance(value, int):
                v = value
            else:
                bv = as_bitvector(value)
                if len(bv) != width:
                    raise LengthMismatch(f"block {name} has width {width}, got {len(bv)} bits")
                v = bv.value
            if not 0 <= v < 1 << width:
                raise LengthMismatch(f"value {v} does not fit block {name} (width {width})")
            idx |= v << offset
        return idx


def ghz3_layout(n: int, outputs: bool = True) -> RegisterLayout:
    if outputs:
        return RegisterLayout((("CIR", n), ("COR", 1), ("BIR", n), ("BOR", 1), ("AIR", n)))
    return RegisterLayout((("CIR", n), ("BIR", n), ("AIR", n)))


def epr_layout(n: int, outputs: bool = True) -> RegisterLayout:
    if outputs:
        return RegisterLayout((("CIR", n), ("COR", 1), ("BIR", n), ("BOR", 1)))
    return RegisterLayout((("CIR", n), ("BIR", n)))


class StateVector:
    """Complex amplitudes over a :class:`RegisterLayout`."""

    __slots__ = ("amplitudes", "layout")

    def __init__(self, amplitudes: np.ndarray, layout: RegisterLayout):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (1 << layout.total_qubits,):
            raise LengthMismatch(
                f"expected {1 << layout.total_qubits} amplitudes for "
                f"{layout.total_qubits} qubits, got shape {amplitudes.shape}"
            )
        self.amplitudes = amplitudes
        self.layout = layout

    @property
    def num_qubits(self) -> int:
        return self.layout.total_qubits

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.layout)

    def support(self, atol: float = AMP_ATOL) -> np.ndarray:
        """Indices of amplitudes with magnitude above ``atol``."""
        return np.flatnonzero(np.abs(self.amplitudes) > atol)

    def allclose(self, other: "StateVector", atol: float = AMP_ATOL) -> bool:
        return self.layout == other.layout and np.allclose(
            self.amplitudes, other.amplitudes, rtol=0.0, atol=atol
        )

    def __repr__(self) -> str:
        return f"StateVector({self.num_qubits} qubits, blocks={self.layout.names})"


def basis_state(layout: RegisterLayout, contents: Mapping[str, BitLike | int] | None = None,
                cap: int | None = None) -> StateVector:
    check_qubit_budget(layout.total_qubits, cap)
    amps = np.zeros(1 << layout.total_qubits, dtype=np.complex128)
    amps[layout.index_of(contents or {})] = 1.0
    return StateVector(amps, layout)


def _axes_view(amps: np.ndarray, total: int, spans: Sequence[tuple[int, int]]):
    """Reshape ``amps`` so each ``(offset, width)`` span is its own axis.

    Returns the view and, for each span, the axis holding it.
    """
    order = sorted(range(len(spans)), key=lambda k: spans[k][0], reverse=True)
    shape: list[int] = []
    axes = [0] * len(spans)
    top = total
    for k in order:
        offset, width = spans[k]
        if offset + width > top:
            raise ValueError(f"overlapping spans {spans}")
        shape.append(1 << (top - offset - width))
        axes[k] = len(shape)
        shape.append(1 << width)
        top = offset
    shape.append(1 << top)
    return amps.reshape(shape), axes


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.num_qubits:
        raise IndexOutOfRange(f"qubit {qubit} outside 0..{state.num_qubits - 1}")


def apply_hadamard(state: StateVector, qubit: int) -> StateVector:
    _check_qubit(state, qubit)
    v, (ax,) = _axes_view(state.amplitudes, state.num_qubits, [(qubit, 1)])
    v0 = np.take(v, 0, axis=ax)
    v1 = np.take(v, 1, axis=ax)
    out = np.stack(((v0 + v1) * _INV_SQRT2, (v0 - v1) * _INV_SQRT2), axis=ax)
    return StateVector(out.reshape(-1), state.layout)


def apply_x(state: StateVector, qubit: int) -> StateVector:
    _check_qubit(state, qubit)
    v, (ax,) = _axes_view(state.amplitudes, state.num_qubits, [(qubit, 1)])
    return StateVector(np.flip(v, axis=ax).reshape(-1).copy(), state.layout)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise ValueError("control and target must differ")
    v, (cax, tax) = _axes_view(state.amplitudes, state.num_qubits, [(control, 1), (target, 1)])
    t = np.moveaxis(v, (cax, tax), (0, 1))
    out = t.copy()
    out[1] = t[1, ::-1]
    return StateVector(np.moveaxis(out, (0, 1), (cax, tax)).reshape(-1), state.layout)


def apply_hadamard_block(state: StateVector, block: str) -> StateVector:
    offset, width = state.layout.span(block)
    for q in range(offset, offset + width):
        state = apply_hadamard(state, q)
    return state


def _parity_table(mask: int, width: int) -> np.ndarray:
    """``parity(mask & x)`` for every ``x`` in ``0 .. 2**width - 1``."""
    x = np.arange(1 << width, dtype=np.int64) & mask
    parity = np.zeros(1 << width, dtype=np.int8)
    while np.any(x):
        parity ^= (x & 1).astype(np.int8)
        x >>= 1
    return parity


def _oracle_mask(state: StateVector, block: str, i_tilde: BitLike) -> tuple[int, int, int]:
    offset, width = state.layout.span(block)
    i_tilde = as_bitvector(i_tilde)
    if len(i_tilde) != width:
        raise LengthMismatch(f"oracle vector has {len(i_tilde)} bits but block {block} has {width}")
    return offset, width, i_tilde.value


def apply_phase_oracle(state: StateVector, block: str, i_tilde: BitLike) -> StateVector:
    """Multiply each component by ``(-1)**dot_mod2(i_tilde, x)`` where ``x`` is the block content."""
    offset, width, mask = _oracle_mask(state, block, i_tilde)
    signs = 1.0 - 2.0 * _parity_table(mask, width)
    v, (ax,) = _axes_view(state.amplitudes, state.num_qubits, [(offset, width)])
    shape = [1] * v.ndim
    shape[ax] = -1
    return StateVector((v * signs.reshape(shape)).reshape(-1), state.layout)


def apply_xor_oracle(state: StateVector, block: str, output: str, i_tilde: BitLike) -> StateVector:
    """``|y>|x> -> |y xor f(x)>|x>`` with ``f(x) = dot_mod2(i_tilde, x)``.

    ``output`` must be a width-1 block. When it holds ``|->`` this acts as
    :func:`apply_phase_oracle` on ``block``.
    """
    offset, width, mask = _oracle_mask(state, block, i_tilde)
    out_offset, out_width = state.layout.span(output)
    if out_width != 1:
        raise LengthMismatch(f"output block {output} must have width 1, has {out_width}")
    flip = _parity_table(mask, width).astype(bool)
    v, (oax, bax) = _axes_view(
        state.amplitudes, state.num_qubits, [(out_offset, 1), (offset, width)]
    )
    t = np.moveaxis(v, (oax, bax), (0, 1))
    out = t.copy()
    out[:, flip] = t[::-1][:, flip]
    return StateVector(np.moveaxis(out, (0, 1), (oax, bax)).reshape(-1), state.layout)


def _block_probabilities(state: StateVector, blocks: Sequence[str]) -> np.ndarray:
    spans = [state.layout.span(b) for b in blocks]
    bits = sum(w for _, w in spans)
    if bits > MAX_TABLE_BITS:
        raise TableTooLarge(f"marginal over {bits} bits exceeds the {MAX_TABLE_BITS}-bit limit")
    v, axes = _axes_view(np.abs(state.amplitudes) ** 2, state.num_qubits, spans)
    others = tuple(ax for ax in range(v.ndim) if ax not in axes)
    probs = v.sum(axis=others)
    # remaining axes are in ascending original order; put them in request order
    remaining = sorted(axes)
    return np.transpose(probs, [remaining.index(ax) for ax in axes])


def block_marginal(state: StateVector, block: str, atol: float = 0.0) -> dict[str, float]:
    """Born-rule distribution of one block's content, keyed by msb-first bitstring.

    Entries with probability ``<= atol`` are dropped.
    """
    width = state.layout.width(block)
    probs = _block_probabilities(state, [block])
    return {
        format(x, f"0{width}b"): float(p)
        for x, p in enumerate(probs)
        if p > atol
    }


def joint_marginal(state: StateVector, blocks: Sequence[str],
                   atol: float = PROB_ATOL) -> dict[tuple[str, ...], float]:
    """Joint distribution over several blocks; keys are tuples of bitstrings."""
    widths = [state.layout.width(b) for b in blocks]
    probs = _block_probabilities(state, blocks)
    table = {}
    for idx in zip(*np.nonzero(probs > atol)):
        key = tuple(format(int(x), f"0{w}b") for x, w in zip(idx, widths))
        table[key] = float(probs[idx])
    return table


def project_block(state: StateVector, block: str, outcome: BitLike) -> tuple[float, StateVector]:
    """Probability of ``outcome`` on ``block`` and the renormalized post-measurement state."""
    offset, width = state.layout.span(block)
    outcome = as_bitvector(outcome)
    if len(outcome) != width:
        raise LengthMismatch(f"outcome has {len(outcome)} bits but block {block} has {width}")
    v, (ax,) = _axes_view(state.amplitudes, state.num_qubits, [(offset, width)])
    sel = [slice(None)] * v.ndim
    sel[ax] = outcome.value
    sel = tuple(sel)
    kept = v[sel]
    prob = float(np.vdot(kept, kept).real)
    if prob < 1e-9:
        raise DegenerateState(f"outcome {outcome} on {block} has probability {prob:.3e}")
    collapsed = np.zeros_like(v)
    collapsed[sel] = kept / math.sqrt(prob)
    return prob, StateVector(collapsed.reshape(-1), state.layout)


def _draw(weights: np.ndarray, rng: np.random.Generator) -> int:
    """Index drawn with probability proportional to ``weights``; one uniform per call."""
    cdf = np.cumsum(weights)
    if cdf[-1] < 1e-9:
        raise DegenerateState(f"total weight {cdf[-1]:.3e} is degenerate")
    x = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), weights.size - 1)
    # never land on a zero-weight outcome through rounding at the edges
    while weights[x] <= 0.0:
        x -= 1
    return x


def measure_block(state: StateVector, block: str, rng: np.random.Generator) -> tuple[BitVector, StateVector]:
    """Sample a block by the Born rule and collapse the state onto the result."""
    outcome = BitVector(_draw(_block_probabilities(state, [block]), rng), state.layout.width(block))
    _, collapsed = project_block(state, block, outcome)
    return outcome, collapsed


def outcome_probabilities(state: StateVector, blocks: Sequence[str]) -> np.ndarray:
    """Joint Born-rule tensor over ``blocks``, one axis per block in the given order."""
    return _block_probabilities(state, blocks)


def sample_sequential(probs: np.ndarray, rng: np.random.Generator) -> tuple[int, ...]:
    """Measure the axes of a joint outcome tensor one after another.

    Each axis is drawn from its marginal conditioned on the earlier results,
    which is what repeated :func:`measure_block` calls do on the full state,
    and the generator is consumed the same way.
    """
    results = []
    for _ in range(probs.ndim):
        marginal = probs.reshape(probs.shape[0], -1).sum(axis=1)
        x = _draw(marginal, rng)
        results.append(x)
        probs = probs[x]
    return tuple(results)


def output_register_fidelity(state: StateVector, block: str) -> float:
    """``<-| rho |->`` for the reduced state of a single-qubit block."""
    offset, width = state.layout.span(block)
    if width != 1:
        raise LengthMismatch(f"block {block} has width {width}; fidelity needs a single qubit")
    v, (ax,) = _axes_view(state.amplitudes, state.num_qubits, [(offset, 1)])
    a0 = np.take(v, 0, axis=ax).reshape(-1)
    a1 = np.take(v, 1, axis=ax).reshape(-1)
    rho00 = np.vdot(a0, a0).real
    rho11 = np.vdot(a1, a1).real
    rho01 = np.vdot(a1, a0)  # sum a0 * conj(a1)
    return float((rho00 + rho11 - 2.0 * rho01.real) / 2.0)


def _inject_equal_pattern(layout: RegisterLayout, inputs: Iterable[str], n: int,
                          ones: Iterable[str]) -> StateVector:
    amps = np.zeros(1 << layout.total_qubits, dtype=np.complex128)
    x = np.arange(1 << n, dtype=np.int64)
    idx = np.zeros_like(x)
    for name in inputs:
        idx |= x << layout.span(name)[0]
    for name in ones:
        idx |= 1 << layout.span(name)[0]
    amps[idx] = 1.0 / math.sqrt(1 << n)
    return StateVector(amps, layout)


def _check_n(n: int) -> None:
    if n < 1:
        raise InvalidN(f"n must be at least 1, got {n}")


def prepare_ghz3n(n: int, outputs: bool = True, method: str = "inject",
                  cap: int | None = None) -> StateVector:
    """``n`` GHZ triplets across AIR/BIR/CIR with BOR = COR = |1>.

    ``method="gates"`` builds the same state with X on the output qubits and,
    per triplet, H on Alice's qubit followed by a CNOT chain A -> B -> C.
    With ``outputs=False`` the two output qubits are left out.
    """
    _check_n(n)
    layout = ghz3_layout(n, outputs)
    check_qubit_budget(layout.total_qubits, cap)
    ones = ("BOR", "COR") if outputs else ()
    if method == "inject":
        return _inject_equal_pattern(layout, ("AIR", "BIR", "CIR"), n, ones)
    if method != "gates":
        raise ValueError(f"unknown preparation method {method!r}")
    state = basis_state(layout, cap=cap)
    for name in ones:
        state = apply_x(state, layout.span(name)[0])
    a0, b0, c0 = (layout.span(name)[0] for name in ("AIR", "BIR", "CIR"))
    for k in range(n):
        state = apply_hadamard(state, a0 + k)
        state = apply_cnot(state, a0 + k, b0 + k)
        state = apply_cnot(state, b0 + k, c0 + k)
    return state


def prepare_bell_pairs(n: int, outputs: bool = True, method: str = "inject",
                       cap: int | None = None) -> StateVector:
    """``n`` |Phi+> pairs across BIR/CIR with BOR = COR = |1>."""
    _check_n(n)
    layout = epr_layout(n, outputs)
    check_qubit_budget(layout.total_qubits, cap)
    ones = ("BOR", "COR") if outputs else ()
    if method == "inject":
        return _inject_equal_pattern(layout, ("BIR", "CIR"), n, ones)
    if method != "gates":
        raise ValueError(f"unknown preparation method {method!r}")
    state = basis_state(layout, cap=cap)
    for name in ones:
        state = apply_x(state, layout.span(name)[0])
    b0, c0 = layout.span("BIR")[0], layout.span("CIR")[0]
    for k in range(n):
        state = apply_hadamard(state, b0 + k)
        state = apply_cnot(state, b0 + k, c0 + k)
    return state
