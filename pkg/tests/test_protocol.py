import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sosgap.boolcore import brute_force_opt, gen_3xor
from sosgap.errors import ConfigurationError, DegreeError, InvalidMeasurementError
from sosgap.pseudoexp import distribution_pe, grigoriev_pe, point_mass_pe, pushforward
from sosgap.protocol import (
    ProtocolParams,
    accept_probability,
    clause_vector,
    greedy_blocks,
    honest_sweep,
    hsep_seesaw,
    make_params,
    norm24_bridge,
    norm24_grid,
    product_sym_accept,
    round_robin_matchings,
    satisfiability_accept,
    two_to_four_bridge,
    uniformity_accept,
    uniformity_operator,
)
from sosgap.reduce import EQ, TWO_OF_FOUR, eval_csp, expand_embedding, expanderize, xor_to_2oo4


def reduced(inst, seed=0, expand=True):
    csp, emb = xor_to_2oo4(inst)
    if expand:
        csp = expanderize(csp, seed=seed)
        emb = expand_embedding(emb, csp)
    return csp, emb


def embed(emb, x):
    return np.array([int(p.evaluate(x)) for p in emb])


@pytest.fixture
def k4_csp(k4):
    return reduced(k4)


# ---------------------------------------------------------------------------
# parameters


@pytest.mark.parametrize("n", [2, 5, 8, 19])
def test_round_robin_covers_each_pair_once(n):
    rounds = round_robin_matchings(n)
    seen = set()
    for M in rounds:
        assert sorted(v for p in M for v in p if v >= 0) == list(range(n))
        for i, j in M:
            if j >= 0:
                assert (i, j) not in seen
                seen.add((i, j))
    assert len(seen) == n * (n - 1) // 2


def test_blocks_are_disjoint_partition(k4_csp):
    csp, _ = k4_csp
    seen = []
    for kind in (TWO_OF_FOUR, EQ):
        for b in greedy_blocks(csp, kind):
            vs = [v for ci in b for v in csp.clauses[ci].vars]
            assert len(vs) == len(set(vs))
            seen += b
    assert sorted(seen) == list(range(csp.m))


def test_params_validation(k4_csp):
    csp, _ = k4_csp
    with pytest.raises(ConfigurationError):
        ProtocolParams(test_weights=(1, 0, 0, 1))
    with pytest.raises(ConfigurationError):
        ProtocolParams(repetitions=0)
    p = make_params(csp)
    p.clause_blocks = {TWO_OF_FOUR: [[0]], EQ: []}
    with pytest.raises(ConfigurationError):
        satisfiability_accept(csp, np.ones(csp.nvars, int), p)


# ---------------------------------------------------------------------------
# tests 1-2


def test_product_and_symmetry():
    csp, _ = reduced(gen_3xor(4, 1, "planted", seed=0), expand=False)
    p = make_params(csp, copies=2)
    x = np.random.default_rng(0).choice([1, -1], size=csp.nvars)
    for path in ("matrix", "polynomial"):
        prod, sym = product_sym_accept(x, p, csp.nvars, path)
        assert abs(prod - 1) < 1e-12 and abs(sym - 1) < 1e-12


def test_antisymmetric_vector_fails_product_test():
    N = 3
    p = ProtocolParams(matching_family=round_robin_matchings(N))
    v = np.zeros(N * N)
    v[0 * N + 1], v[1 * N + 0] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    prod, sym = product_sym_accept(v, p, N)
    assert abs(prod) < 1e-15 and abs(sym - 1) < 1e-15


def test_pe_passes_tests_one_and_two():
    inst = gen_3xor(8, 3, "planted", seed=1)
    csp, emb = reduced(inst)
    pushed = pushforward(grigoriev_pe(inst, 8), emb)
    p = make_params(csp)
    for path in ("matrix", "polynomial"):
        prod, sym = product_sym_accept(pushed, p, csp.nvars, path)
        assert abs(prod - 1) <= 1e-9 and abs(sym - 1) <= 1e-9


# ---------------------------------------------------------------------------
# test 3


def test_uniformity_honest(k4_csp):
    csp, _ = k4_csp
    p = make_params(csp)
    for x in np.random.default_rng(1).choice([1, -1], size=(3, csp.nvars)):
        assert abs(uniformity_accept(x, p, csp.nvars) - 1) < 1e-12
        assert abs(uniformity_accept(x, p, csp.nvars, "polynomial") - 1) < 1e-12


def test_uniformity_adversarial_basis_state(k4_csp):
    csp, _ = k4_csp
    N = csp.nvars
    p = make_params(csp)
    v = np.zeros(N * N)
    v[0 * N + 1] = 1
    val = uniformity_accept(v, p, N)
    # the pair {0, 1} is matched in exactly one round out of len(family);
    # then the two outcomes collide with opposite signs with probability 1/2
    assert abs(val - (1 - 1 / (2 * len(p.matching_family)))) < 1e-12
    assert val < 1
    U = uniformity_operator(N, 2, p.matching_family)
    assert abs(v @ U @ v - val) < 1e-12


def test_uniformity_even_dimension_formula():
    N = 6
    p = ProtocolParams(matching_family=round_robin_matchings(N))
    v = np.zeros(N * N)
    v[2 * N + 5] = 1
    assert abs(uniformity_accept(v, p, N) - (1 - 1 / (2 * (N - 1)))) < 1e-12


# ---------------------------------------------------------------------------
# test 4


def test_clause_vectors_are_unit(k4_csp):
    csp, _ = k4_csp
    for ci in range(csp.m):
        assert abs(np.linalg.norm(clause_vector(csp, ci)) - 1) < 1e-15


def test_satisfiability_one_violated_clause():
    inst = gen_3xor(6, 4, "planted", seed=8)
    csp, emb = reduced(inst, expand=False)
    _, x = brute_force_opt(inst)
    y = embed(emb, x)
    p = make_params(csp)
    assert abs(satisfiability_accept(csp, y, p) - 1) < 1e-12
    # flip one dummy: exactly the clauses containing it break
    y2 = y.copy()
    y2[csp.dummy_map[0][0]] *= -1
    broken = [ci for ci, c in enumerate(csp.clauses) if not c.satisfied(y2)]
    assert broken
    val = satisfiability_accept(csp, y2, p)
    # each broken clause has |<C|psi>|^2 = (sum of literals)^2 / (4N) = 1/N
    w = p.clause_weights(csp)
    q = sum(float(w[ci]) / csp.nvars for ci in broken)
    assert abs(val - (1 - q) ** 2) < 1e-12
    assert abs(val - satisfiability_accept(csp, y2, p, "polynomial")) < 1e-12


# ---------------------------------------------------------------------------
# full verifier


def test_satisfiable_honest_accepts(k4_csp):
    inst = gen_3xor(7, 6, "planted", seed=2)
    csp, emb = reduced(inst)
    _, x = brute_force_opt(inst)
    rep = accept_probability(csp, embed(emb, x), make_params(csp))
    assert abs(rep.total - 1) < 1e-12 and rep.consistent()


def test_degree_guard_on_pe_witness(k4, k4_csp):
    csp, emb = k4_csp
    pushed = pushforward(grigoriev_pe(k4, 3), emb)
    with pytest.raises(DegreeError):
        accept_probability(csp, pushed, make_params(csp))


def test_pushed_pe_accepts_with_certainty():
    inst = gen_3xor(8, 3, "planted", seed=3)
    csp, emb = reduced(inst)
    pushed = pushforward(grigoriev_pe(inst, 8), emb)
    p = make_params(csp)
    a = accept_probability(csp, pushed, p, "matrix")
    b = accept_probability(csp, pushed, p, "polynomial")
    assert abs(a.total - 1) <= 1e-8 and abs(a.total - b.total) <= 1e-9


@given(st.integers(0, 10_000))
def test_two_path_agreement_on_mixtures(seed):
    rng = np.random.default_rng(seed)
    inst = gen_3xor(6, 2, "random", seed)
    csp, _ = reduced(inst, seed)
    pts = rng.choice([1, -1], size=(3, csp.nvars))
    probs = rng.dirichlet(np.ones(3))
    pe = distribution_pe(pts, probs, 4)
    p = make_params(csp, weights=(Fraction(1, 10), Fraction(2, 10), Fraction(3, 10), Fraction(4, 10)))
    a = accept_probability(csp, pe, p, "matrix")
    b = accept_probability(csp, pe, p, "polynomial")
    for t in a.per_test:
        assert abs(a.per_test[t] - b.per_test[t]) <= 1e-9
    assert a.consistent()


@given(st.integers(0, 10_000))
def test_repetition_squares(seed):
    rng = np.random.default_rng(seed)
    csp, _ = reduced(gen_3xor(5, 2, "random", seed), seed)
    y = rng.choice([1, -1], size=csp.nvars)
    one = accept_probability(csp, y, make_params(csp, reps=1)).total
    two = accept_probability(csp, y, make_params(csp, reps=2)).total
    assert abs(two - one**2) <= 1e-10


def test_honest_sweep_unsat_below_one(k4):
    csp, _ = reduced(k4, expand=False)
    p = make_params(csp)
    best, y = honest_sweep(csp, p)
    brute, _ = honest_sweep(csp, p, "brute")
    assert best < 1 and abs(best - brute) < 1e-12
    assert abs(accept_probability(csp, y, p).total - best) < 1e-12
    assert eval_csp(csp, y) < 1


def test_honest_sweep_satisfiable_is_one():
    inst = gen_3xor(6, 4, "planted", seed=5)
    csp, _ = reduced(inst)
    best, y = honest_sweep(csp, make_params(csp))
    assert abs(best - 1) < 1e-12 and eval_csp(csp, y) == 1


def test_honest_sweep_monotone_in_weights(k4_csp):
    csp, _ = k4_csp
    light = honest_sweep(csp, make_params(csp, weights=(Fraction(3, 10),) * 3 + (Fraction(1, 10),)))[0]
    heavy = honest_sweep(csp, make_params(csp, weights=(Fraction(1, 10),) * 3 + (Fraction(7, 10),)))[0]
    assert heavy < light < 1


# ---------------------------------------------------------------------------
# h_Sep and the 2->4 norm


def test_seesaw_examples():
    e00 = np.zeros((4, 4))
    e00[0, 0] = 1
    assert abs(hsep_seesaw(e00, (2, 2)).value - 1) < 1e-12
    swap = np.eye(4)[[0, 2, 1, 3]]
    sym = (np.eye(4) + swap) / 2
    assert abs(hsep_seesaw(sym, (2, 2)).value - 1) < 1e-12
    s = np.array([0, 1, -1, 0]) / math.sqrt(2)
    # a separate Bloch-sphere grid gives 1/2 for the singlet
    assert abs(hsep_seesaw(np.outer(s, s), (2, 2)).value - 0.5) < 1e-9


def test_seesaw_monotone_history():
    rng = np.random.default_rng(4)
    G = rng.normal(size=(9, 9))
    M = G @ G.T
    M /= np.linalg.eigvalsh(M)[-1]
    h = hsep_seesaw(M, (3, 3), restarts=1, iters=50).history
    assert all(b >= a - 1e-12 for a, b in zip(h, h[1:]))


def test_seesaw_rejects_invalid_measurement():
    with pytest.raises(InvalidMeasurementError):
        hsep_seesaw(2 * np.eye(4), (2, 2))
    with pytest.raises(InvalidMeasurementError):
        hsep_seesaw(-np.eye(4), (2, 2))


def test_bridge_examples():
    A = np.array([[1.0, 0.0]])
    assert abs(norm24_grid(A)[0] - 1) < 1e-12
    assert abs(norm24_bridge(A) - 1) < 1e-9
    I = np.eye(2)
    assert abs(norm24_bridge(I) - 1) < 1e-9
    M = two_to_four_bridge(I)
    assert np.allclose(M, M.T)


@given(st.integers(0, 10_000))
def test_bridge_quadratic_form(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    x, y = rng.normal(size=3), rng.normal(size=3)
    M = two_to_four_bridge(A)
    lhs = np.kron(x, y) @ M @ np.kron(x, y)
    assert abs(lhs - np.sum((A @ x) ** 2 * (A @ y) ** 2)) < 1e-9 * max(1, abs(lhs))


@pytest.mark.parametrize("seed", range(5))
def test_bridge_matches_grid_oracle(seed):
    A = np.random.default_rng(seed).normal(size=(3, 3))
    grid, _ = norm24_grid(A)
    assert abs(norm24_bridge(A) - grid) <= 1e-6
