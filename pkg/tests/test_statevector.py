from itertools import permutations, product
from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esrsim import statevector as sv
from esrsim.bitvec import BitVector
from esrsim.errors import (
    DegenerateState,
    IndexOutOfRange,
    InvalidN,
    LengthMismatch,
    QubitLimitExceeded,
    TableTooLarge,
    UnknownBlock,
)
from esrsim.protocol import circuit_phases

from oracles import (
    H,
    dense_joint_marginal,
    dense_psi_phases,
    fcp_triples,
    ghz3_index,
    hadamard_table,
    single_qubit_operator,
)

ATOL = 1e-12


def one_block(width: int, name: str = "R") -> sv.RegisterLayout:
    return sv.RegisterLayout(((name, width),))


def random_state(layout: sv.RegisterLayout, seed: int) -> sv.StateVector:
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=2**layout.total_qubits) + 1j * rng.normal(size=2**layout.total_qubits)
    return sv.StateVector(amps / np.linalg.norm(amps), layout)


# -- layout ----------------------------------------------------------------


def test_ghz3_layout_index_formula():
    n = 2
    layout = sv.ghz3_layout(n)
    assert layout.total_qubits == 3 * n + 2
    for a, bor, b, cor, c in product(range(4), range(2), range(4), range(2), range(4)):
        idx = layout.index_of({"AIR": a, "BOR": bor, "BIR": b, "COR": cor, "CIR": c})
        assert idx == ghz3_index(a, bor, b, cor, c, n)


def test_layout_rejects_duplicates_and_unknown_blocks():
    with pytest.raises(ValueError):
        sv.RegisterLayout((("A", 1), ("A", 2)))
    with pytest.raises(UnknownBlock):
        sv.ghz3_layout(1).span("XYZ")


# -- preparation -------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ghz_support_and_amplitudes(n):
    state = sv.prepare_ghz3n(n)
    support = state.support()
    assert len(support) == 2**n
    expected = {ghz3_index(x, 1, x, 1, x, n) for x in range(2**n)}
    assert set(support.tolist()) == expected
    assert np.allclose(state.amplitudes[support], 1 / sqrt(2**n), atol=ATOL)


def test_ghz_n1_matches_textbook_state():
    state = sv.prepare_ghz3n(1, outputs=False)
    # reduced layout: index = (a*2 + b)*2 + c
    expected = np.zeros(8, dtype=complex)
    expected[0b000] = expected[0b111] = 1 / sqrt(2)
    assert np.allclose(state.amplitudes, expected, atol=ATOL)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("outputs", [True, False])
def test_ghz_gate_path_matches_injection(n, outputs):
    injected = sv.prepare_ghz3n(n, outputs=outputs)
    gated = sv.prepare_ghz3n(n, outputs=outputs, method="gates")
    assert injected.allclose(gated)


def test_ghz_n1_measurement_statistics():
    state = sv.prepare_ghz3n(1)
    table = sv.joint_marginal(state, ["AIR", "BIR", "CIR"])
    assert table.keys() == {("0", "0", "0"), ("1", "1", "1")}
    assert all(abs(p - 0.5) < 1e-12 for p in table.values())


@pytest.mark.parametrize("n", [1, 2, 3])
def test_bell_pairs(n):
    state = sv.prepare_bell_pairs(n)
    assert state.layout.names == ("CIR", "COR", "BIR", "BOR")
    support = state.support()
    assert len(support) == 2**n
    assert np.allclose(state.amplitudes[support], 1 / sqrt(2**n), atol=ATOL)
    table = sv.joint_marginal(state, ["BIR", "CIR"])
    assert all(b == c for b, c in table)
    assert sv.prepare_bell_pairs(n, method="gates").allclose(state)


def test_preparation_errors():
    with pytest.raises(InvalidN):
        sv.prepare_ghz3n(0)
    with pytest.raises(InvalidN):
        sv.prepare_bell_pairs(0)
    with pytest.raises(QubitLimitExceeded):
        sv.prepare_ghz3n(3, cap=10)
    sv.prepare_ghz3n(3, outputs=False, cap=9)


def test_qubit_cap_env_override(monkeypatch):
    monkeypatch.setenv("ESR_QUBIT_CAP", "7")
    assert sv.qubit_cap() == 7
    with pytest.raises(QubitLimitExceeded):
        sv.prepare_ghz3n(2)
    monkeypatch.delenv("ESR_QUBIT_CAP")
    assert sv.qubit_cap() == sv.DEFAULT_QUBIT_CAP


# -- Hadamard ----------------------------------------------------------------


def test_hadamard_on_one():
    state = sv.basis_state(one_block(1), {"R": "1"})
    out = sv.apply_hadamard(state, 0)
    assert np.allclose(out.amplitudes, [1 / sqrt(2), -1 / sqrt(2)], atol=ATOL)


def test_hadamard_on_zero():
    out = sv.apply_hadamard(sv.basis_state(one_block(1)), 0)
    assert np.allclose(out.amplitudes, [1 / sqrt(2), 1 / sqrt(2)], atol=ATOL)


def test_hadamard_index_error():
    with pytest.raises(IndexOutOfRange):
        sv.apply_hadamard(sv.basis_state(one_block(2)), 2)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_hadamard_block_matches_direct_coefficients(n):
    for xv in range(2**n):
        x = format(xv, f"0{n}b")
        out = sv.apply_hadamard_block(sv.basis_state(one_block(n), {"R": x}), "R")
        table = hadamard_table(x)
        expected = np.array([table[format(z, f"0{n}b")] for z in range(2**n)])
        assert np.allclose(out.amplitudes, expected, rtol=0, atol=ATOL)


def test_hadamard_block_inside_larger_layout():
    layout = sv.RegisterLayout((("LO", 2), ("MID", 3), ("HI", 1)))
    state = sv.basis_state(layout, {"LO": "10", "MID": "011", "HI": "1"})
    out = sv.apply_hadamard_block(state, "MID")
    table = hadamard_table("011")
    for z, coeff in table.items():
        idx = layout.index_of({"LO": "10", "MID": z, "HI": "1"})
        assert abs(out.amplitudes[idx] - coeff) < ATOL
    assert abs(out.norm() - 1) < ATOL


def test_single_qubit_hadamard_matches_dense_operator():
    layout = sv.RegisterLayout((("R", 4),))
    state = random_state(layout, 5)
    for q in range(4):
        dense = single_qubit_operator(H, q, 4) @ state.amplitudes
        assert np.allclose(sv.apply_hadamard(state, q).amplitudes, dense, atol=ATOL)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1), st.data())
def test_hadamard_involution_and_norm(nq, seed, data):
    state = random_state(one_block(nq), seed)
    q = data.draw(st.integers(0, nq - 1))
    once = sv.apply_hadamard(state, q)
    assert abs(once.norm() - 1) < ATOL
    assert sv.apply_hadamard(once, q).allclose(state)


# -- oracles -----------------------------------------------------------------


def test_zero_oracle_is_identity():
    state = random_state(sv.ghz3_layout(2), 1)
    assert sv.apply_phase_oracle(state, "BIR", "00").allclose(state)


def test_phase_oracle_n1():
    plus = sv.apply_hadamard(sv.basis_state(one_block(1)), 0)
    out = sv.apply_phase_oracle(plus, "R", "1")
    assert np.allclose(out.amplitudes, [1 / sqrt(2), -1 / sqrt(2)], atol=ATOL)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.data())
def test_phase_oracle_diagonal_and_involutive(n, seed, data):
    state = random_state(sv.RegisterLayout((("X", 1), ("R", n))), seed)
    i_tilde = data.draw(st.text("01", min_size=n, max_size=n))
    once = sv.apply_phase_oracle(state, "R", i_tilde)
    assert np.allclose(np.abs(once.amplitudes), np.abs(state.amplitudes), atol=ATOL)
    assert abs(once.norm() - 1) < ATOL
    assert sv.apply_phase_oracle(once, "R", i_tilde).allclose(state)


def test_phase_oracle_errors():
    state = sv.prepare_ghz3n(2)
    with pytest.raises(LengthMismatch):
        sv.apply_phase_oracle(state, "BIR", "1")
    with pytest.raises(UnknownBlock):
        sv.apply_phase_oracle(state, "DIR", "11")


@pytest.mark.parametrize("i_tilde", ["00", "01", "10", "11"])
def test_xor_oracle_with_minus_output_equals_phase_oracle(i_tilde):
    layout = sv.RegisterLayout((("R", 2), ("OUT", 1)))
    base = random_state(sv.RegisterLayout((("R", 2),)), 3).amplitudes
    minus = np.array([1, -1]) / sqrt(2)
    state = sv.StateVector(np.kron(minus, base), layout)
    kicked = sv.apply_xor_oracle(state, "R", "OUT", i_tilde)
    direct = sv.apply_phase_oracle(state, "R", i_tilde)
    assert kicked.allclose(direct)


def test_xor_oracle_flips_output_on_basis_states():
    layout = sv.RegisterLayout((("OUT", 1), ("R", 3)))
    for x in range(8):
        for y in range(2):
            state = sv.basis_state(layout, {"R": x, "OUT": y})
            out = sv.apply_xor_oracle(state, "R", "OUT", "101")
            f = bin(x & 0b101).count("1") % 2
            assert out.amplitudes[layout.index_of({"R": x, "OUT": y ^ f})] == 1


# -- circuit phases vs dense oracle -------------------------------------------


@pytest.mark.parametrize("i_b, i_c", [("1", ""), ("", "1"), ("1", "0"), ("0", "1"), ("11", ""), ("1", "1")])
def test_full_circuit_matches_dense_matrices(i_b, i_c):
    ours = circuit_phases(i_b, i_c, "ghz3", "full")
    dense = dense_psi_phases(i_b, i_c)
    for k, (a, d) in enumerate(zip(ours, dense)):
        assert np.allclose(a.amplitudes, d, atol=ATOL), f"psi{k} differs"


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fcp_exhaustive_scan(n):
    for iv in range(2**n):
        i = format(iv, f"0{n}b")
        psi3 = circuit_phases(i, "", "ghz3", "full")[3]
        table = sv.joint_marginal(psi3, ["AIR", "BIR", "CIR"])
        assert set(table) == fcp_triples(i)
        assert all(abs(p - 4.0**-n) < 1e-10 for p in table.values())


@pytest.mark.parametrize("i_b, i_c", [("10", "1"), ("", "011"), ("1", "01")])
def test_full_and_reduced_agree(i_b, i_c):
    full = circuit_phases(i_b, i_c, "ghz3", "full")[3]
    reduced = circuit_phases(i_b, i_c, "ghz3", "reduced")[3]
    blocks = ["AIR", "BIR", "CIR"]
    tf, tr = sv.joint_marginal(full, blocks), sv.joint_marginal(reduced, blocks)
    assert tf.keys() == tr.keys()
    assert all(abs(tf[k] - tr[k]) < 1e-10 for k in tf)


def test_dense_marginal_agrees_with_block_marginal():
    psi3 = dense_psi_phases("1", "0")[3]
    ours = sv.joint_marginal(circuit_phases("1", "0")[3], ["AIR", "BIR", "CIR"])
    dense = dense_joint_marginal(psi3, 2)
    assert ours.keys() == dense.keys()
    assert all(abs(ours[k] - dense[k]) < 1e-12 for k in ours)


# -- marginals and measurement -------------------------------------------------


def test_block_marginal_ghz():
    table = sv.block_marginal(sv.prepare_ghz3n(1), "AIR")
    assert table.keys() == {"0", "1"}
    assert all(abs(p - 0.5) < 1e-12 for p in table.values())


def test_block_marginal_basis_state():
    layout = sv.RegisterLayout((("A", 2), ("B", 3)))
    state = sv.basis_state(layout, {"A": "01", "B": "110"})
    assert sv.block_marginal(state, "B") == {"110": 1.0}
    assert sv.block_marginal(state, "A") == {"01": 1.0}


def test_marginal_sums_to_one():
    state = random_state(sv.ghz3_layout(2), 9)
    for block in state.layout.names:
        assert abs(sum(sv.block_marginal(state, block).values()) - 1) < 1e-12


def test_marginal_table_too_large(monkeypatch):
    monkeypatch.setattr(sv, "MAX_TABLE_BITS", 3)
    with pytest.raises(TableTooLarge):
        sv.block_marginal(sv.prepare_ghz3n(4, outputs=False), "AIR")


def test_measure_basis_state_is_certain():
    layout = sv.RegisterLayout((("A", 3),))
    state = sv.basis_state(layout, {"A": "101"})
    outcome, after = sv.measure_block(state, "A", np.random.default_rng(0))
    assert outcome == BitVector.from_str("101")
    assert after.allclose(state)


def test_measure_ghz_gives_equal_bits():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        state = sv.prepare_ghz3n(1)
        a, state = sv.measure_block(state, "AIR", rng)
        b, state = sv.measure_block(state, "BIR", rng)
        c, state = sv.measure_block(state, "CIR", rng)
        assert a == b == c


def test_measure_psi3_n1_frequencies():
    psi3 = circuit_phases("1", "", "ghz3", "full")[3]
    rng = np.random.default_rng(123)
    counts: dict[tuple[str, str, str], int] = {}
    shots = 4000
    for _ in range(shots):
        state = psi3
        out = []
        for block in ("AIR", "BIR", "CIR"):
            r, state = sv.measure_block(state, block, rng)
            out.append(str(r))
        counts[tuple(out)] = counts.get(tuple(out), 0) + 1
    assert set(counts) == {("0", "0", "1"), ("0", "1", "0"), ("1", "0", "0"), ("1", "1", "1")}
    # 5 sigma on a binomial(4000, 1/4)
    sigma = sqrt(shots * 0.25 * 0.75)
    assert all(abs(c - shots / 4) < 5 * sigma for c in counts.values())


def test_project_block_rejects_impossible_outcome():
    with pytest.raises(DegenerateState):
        sv.project_block(sv.prepare_ghz3n(1), "BOR", "0")


def _sequential_distribution(state, order):
    """Exact outcome law when blocks are measured one after another in ``order``."""
    table = {}

    def recurse(state, k, prob, outcome):
        if k == len(order):
            key = tuple(outcome[b] for b in ("AIR", "BIR", "CIR"))
            table[key] = table.get(key, 0.0) + prob
            return
        block = order[k]
        for x, p in sv.block_marginal(state, block, atol=1e-12).items():
            _, after = sv.project_block(state, block, x)
            recurse(after, k + 1, prob * p, {**outcome, block: x})

    recurse(state, 0, 1.0, {})
    return table


@pytest.mark.parametrize("i", ["1", "01", "110"])
def test_measurement_order_independence_exact(i):
    psi3 = circuit_phases(i, "", "ghz3", "reduced")[3]
    reference = sv.joint_marginal(psi3, ["AIR", "BIR", "CIR"])
    for order in permutations(("AIR", "BIR", "CIR")):
        seq = _sequential_distribution(psi3, order)
        assert seq.keys() == reference.keys()
        assert all(abs(seq[k] - reference[k]) < 1e-10 for k in seq)


def test_measurement_order_independence_statistical():
    psi3 = circuit_phases("10", "", "ghz3", "full")[3]
    shots = 3000
    tallies = []
    for order in (("AIR", "BIR", "CIR"), ("CIR", "AIR", "BIR")):
        counts = {}
        for s in range(shots):
            rng = np.random.default_rng([99, s])
            state = psi3
            res = {}
            for block in order:
                r, state = sv.measure_block(state, block, rng)
                res[block] = str(r)
            key = (res["AIR"], res["BIR"], res["CIR"])
            counts[key] = counts.get(key, 0) + 1
        tallies.append(counts)
    assert tallies[0].keys() == tallies[1].keys() == fcp_triples("10")
    sigma = sqrt(shots * (1 / 16) * (15 / 16))
    for key in tallies[0]:
        assert abs(tallies[0][key] - tallies[1][key]) < 5 * sqrt(2) * sigma


# -- output registers ----------------------------------------------------------


def test_output_register_fidelity_phases():
    psi0, psi1, psi2, psi3 = circuit_phases("10", "1", "ghz3", "full")
    for block in ("BOR", "COR"):
        assert abs(sv.output_register_fidelity(psi0, block) - 0.5) < ATOL
        assert abs(sv.output_register_fidelity(psi1, block) - 1.0) < ATOL
        assert abs(sv.output_register_fidelity(psi2, block) - 1.0) < ATOL
        assert abs(sv.output_register_fidelity(psi3, block) - 1.0) < ATOL


def test_output_register_fidelity_needs_single_qubit():
    with pytest.raises(LengthMismatch):
        sv.output_register_fidelity(sv.prepare_ghz3n(2), "AIR")
    with pytest.raises(UnknownBlock):
        sv.output_register_fidelity(sv.prepare_ghz3n(2, outputs=False), "BOR")


def test_norm_preserved_through_every_phase():
    for variant in ("ghz3", "epr"):
        for fidelity in ("full", "reduced"):
            for state in circuit_phases("101", "10", variant, fidelity):
                assert abs(state.norm() - 1) < ATOL


def test_statevector_rejects_wrong_size():
    with pytest.raises(LengthMismatch):
        sv.StateVector(np.zeros(3), one_block(2))


@pytest.mark.parametrize("i_B, i_C", [("1", "0"), ("10", "1"), ("011", "")])
def test_sequential_sampling_matches_collapse(i_B, i_C):
    psi3 = circuit_phases(i_B, i_C, "ghz3", "full")[3]
    blocks = ("AIR", "BIR", "CIR")
    probs = sv.outcome_probabilities(psi3, blocks)
    for seed in range(50):
        fast = sv.sample_sequential(probs, np.random.default_rng(seed))
        rng, state, slow = np.random.default_rng(seed), psi3, []
        for block in blocks:
            outcome, state = sv.measure_block(state, block, rng)
            slow.append(outcome.value)
        assert fast == tuple(slow)
