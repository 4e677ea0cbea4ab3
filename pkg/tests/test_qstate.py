import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sosgap.boolcore import gen_3xor
from sosgap.errors import DegreeError, ResourceLimitError
from sosgap.pseudoexp import distribution_pe, grigoriev_pe, point_mass_pe
from sosgap.qstate import (
    DensityMatrix,
    HilbertShape,
    dps_certificate,
    honest_witness,
    load_matrix,
    mixture_state,
    moment_state,
    partial_trace,
    partial_transpose,
    permute_subsystems,
    save_matrix,
    sym_projector,
)

signs = lambda n: st.lists(st.sampled_from([1, -1]), min_size=n, max_size=n)


def random_density(rng, d):
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = G @ G.conj().T
    return rho / np.trace(rho)


def test_witness_examples():
    v = honest_witness([1, 1], 1).amplitudes
    assert np.allclose(v, [1 / math.sqrt(2)] * 2)
    w = honest_witness([1, -1], 2).amplitudes
    u = np.array([1, -1]) / math.sqrt(2)
    assert np.allclose(w, np.kron(u, u))


@given(signs(5), signs(5), st.integers(1, 3))
def test_witness_overlap(x, y, c):
    a = honest_witness(x, c).amplitudes
    b = honest_witness(y, c).amplitudes
    assert abs(np.vdot(a, b) - (np.dot(x, y) / 5) ** c) < 1e-12
    assert abs(np.linalg.norm(a) - 1) < 1e-12


def test_witness_cap():
    with pytest.raises(ResourceLimitError):
        honest_witness([1] * 20, 4)


def test_moment_state_zero_registers():
    assert moment_state(point_mass_pe([1, -1, 1]), 0).entries.tolist() == [[1.0]]


def test_moment_state_degree_guard():
    with pytest.raises(DegreeError):
        moment_state(point_mass_pe([1, -1, 1], 3), 2)


@given(signs(4), st.integers(1, 2))
def test_moment_state_point_mass(x, r):
    rho = moment_state(point_mass_pe(x, 4), r).entries
    assert np.allclose(rho, honest_witness(x, r).density().entries, atol=1e-14)


@given(signs(4), signs(4))
def test_moment_state_mixture(x, y):
    pe = distribution_pe([x, y], [Fraction(1, 2)] * 2, 4)
    rho = moment_state(pe, 2).entries
    ref = mixture_state([honest_witness(x, 2), honest_witness(y, 2)], [0.5, 0.5]).entries
    assert np.max(np.abs(rho - ref)) <= 1e-12


def test_moment_state_real_symmetric_and_consistent():
    pe = grigoriev_pe(gen_3xor(6, 4, "planted", seed=3), 6)
    rho = moment_state(pe, 3)
    assert np.array_equal(rho.entries, rho.entries.T)
    red = partial_trace(rho, [0, 1])
    assert np.allclose(red, moment_state(pe, 2).entries, atol=1e-14)
    assert rho.min_eig() >= -1e-9


def test_partial_trace_product_and_bell():
    rng = np.random.default_rng(0)
    a, b = random_density(rng, 2), random_density(rng, 3)
    assert np.allclose(partial_trace(np.kron(a, b), [0], (2, 3)), a)
    assert np.allclose(partial_trace(np.kron(a, b), [1], (2, 3)), b)
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert np.allclose(partial_trace(np.outer(phi, phi), [0], (2, 2)), np.eye(2) / 2)
    assert partial_trace(np.kron(a, b), [], (2, 3)).shape == (1, 1)


@given(st.integers(0, 1000))
def test_partial_trace_preserves_trace(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, 12)
    for keep in ([0], [1], [2], [0, 2]):
        assert abs(np.trace(partial_trace(rho, keep, (2, 3, 2))) - 1) < 1e-12


def test_partial_transpose_examples():
    rng = np.random.default_rng(1)
    prod = np.kron(random_density(rng, 2), random_density(rng, 2))
    for flip in ([0], [1], [0, 1]):
        assert np.linalg.eigvalsh(partial_transpose(prod, flip, (2, 2)))[0] >= -1e-12
    s = np.array([0, 1, -1, 0]) / math.sqrt(2)
    ev = np.linalg.eigvalsh(partial_transpose(np.outer(s, s), [0], (2, 2)))
    assert abs(ev[0] + 0.5) < 1e-12


@given(st.integers(0, 1000))
def test_partial_transpose_involution(seed):
    rho = random_density(np.random.default_rng(seed), 8)
    dims = (2, 2, 2)
    once = partial_transpose(rho, [0, 2], dims)
    assert np.allclose(once, once.conj().T)
    assert np.allclose(partial_transpose(once, [0, 2], dims), rho)


def test_permute_subsystems_matches_swap():
    rng = np.random.default_rng(2)
    a, b = random_density(rng, 2), random_density(rng, 3)
    out = permute_subsystems(np.kron(a, b), [1, 0], (2, 3))
    assert np.allclose(out, np.kron(b, a))


def test_sym_projector_examples():
    assert np.allclose(sym_projector(HilbertShape(3, 1)), np.eye(3))
    P = sym_projector(HilbertShape(2, 2))
    assert round(np.trace(P)) == 3
    w = honest_witness([1, -1, 1], 2).amplitudes
    assert np.linalg.norm(sym_projector(HilbertShape(3, 2)) @ w - w) <= 1e-10


@pytest.mark.parametrize("n,r", [(2, 3), (3, 2), (3, 3)])
def test_sym_projector_idempotent(n, r):
    P = sym_projector(HilbertShape(n, r))
    assert np.linalg.norm(P @ P - P) <= 1e-10
    assert np.allclose(P, P.T)


def test_dps_point_mass():
    rep = dps_certificate(point_mass_pe([1, -1, 1, -1], 4), 1, 1)
    assert rep.ok and rep.permutation_residual == 0
    rep = dps_certificate(point_mass_pe([1, -1, 1], 8), 1, 2)
    assert rep.ok and rep.first_violation() is None


def test_dps_grigoriev_n8():
    inst = gen_3xor(8, 6, "planted", seed=4)
    rep = dps_certificate(grigoriev_pe(inst, 8), 1, 2)
    assert rep.ok
    assert max(rep.residuals().values()) <= 1e-9
    assert rep.permutation_residual == 0


def test_dps_cap():
    with pytest.raises(ResourceLimitError):
        dps_certificate(point_mass_pe([1] * 14, 8), 1, 2)


def test_invariant_residuals():
    rho = DensityMatrix(HilbertShape(2, 2), np.eye(4) / 4)
    r = rho.invariant_residuals()
    assert r["hermitian"] == 0 and r["trace"] < 1e-15 and abs(r["min_eig"] - 0.25) < 1e-15


def test_matrix_file_round_trip(tmp_path):
    M = random_density(np.random.default_rng(3), 6)
    p = tmp_path / "m.sgm"
    save_matrix(p, M)
    raw = p.read_bytes()
    assert raw[:4] == b"SGM1" and len(raw) == 12 + 16 * 36
    assert np.array_equal(load_matrix(p), M)
