import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sosgap.boolcore import XorInstance, brute_force_opt, gen_3xor
from sosgap.errors import DegreeError, DegreeTooHighError
from sosgap.pseudoexp import (
    MultilinearPoly,
    PseudoExpectation,
    check_pe,
    compose_maps,
    distribution_pe,
    grigoriev_pe,
    max_consistent_degree,
    moment_matrix,
    moment_rows,
    pe_eval,
    point_mass_pe,
    pushforward,
    xor_constraints,
    xor_objective,
)
from sosgap.reduce import csp_constraints, literal_sum_constraints, xor_to_2oo4


@st.composite
def polys(draw, n=5, max_terms=6):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        s = draw(st.integers(0, (1 << n) - 1))
        terms[s] = Fraction(draw(st.integers(-6, 6)), draw(st.sampled_from([1, 2, 4])))
    return MultilinearPoly(n, terms)


@st.composite
def distributions(draw, n=4):
    k = draw(st.integers(1, 5))
    pts = [draw(st.lists(st.sampled_from([1, -1]), min_size=n, max_size=n)) for _ in range(k)]
    w = [draw(st.integers(1, 5)) for _ in range(k)]
    return pts, [Fraction(v, sum(w)) for v in w]


def cube(n):
    return np.array(list(itertools.product([1, -1], repeat=n)))


# ---------------------------------------------------------------------------
# polynomials


@given(polys(), polys())
def test_poly_arithmetic_matches_pointwise(f, g):
    X = cube(5)
    for x in X[::5]:
        assert (f * g).evaluate(x) == f.evaluate(x) * g.evaluate(x)
        assert (f + g).evaluate(x) == f.evaluate(x) + g.evaluate(x)
    assert np.allclose((f - g).evaluate(X), f.evaluate(X) - g.evaluate(X))


def test_poly_square_of_variable_is_one():
    x = MultilinearPoly.var(3, 1)
    assert x * x == 1
    assert (x * x).degree() == 0


def test_poly_rejects_out_of_range():
    with pytest.raises(ValueError):
        MultilinearPoly(2, {frozenset({2}): 1})


def test_terms_view_uses_index_sets():
    f = MultilinearPoly.monomial(4, (0, 3), Fraction(1, 2))
    assert f.terms == {frozenset({0, 3}): Fraction(1, 2)}


# ---------------------------------------------------------------------------
# closure pe


def test_normalisation_and_single_clause():
    inst = XorInstance.from_lists(3, [(0, 1, 2, 1)])
    pe = grigoriev_pe(inst, 3)
    assert pe[()] == 1
    assert pe[(0, 1, 2)] == 1
    assert pe_eval(pe, xor_objective(inst)) == 1


def test_constant_poly_has_unit_value():
    pe = grigoriev_pe(gen_3xor(6, 4, "planted", seed=2), 2)
    assert pe_eval(pe, MultilinearPoly.const(6, 1)) == 1


def test_contradiction_reports_bisected_degree(k4):
    with pytest.raises(DegreeTooHighError) as e:
        grigoriev_pe(k4, 4)
    assert e.value.max_degree == 3 == max_consistent_degree(k4)


def test_k4_pe_is_valid_gap(k4):
    pe = grigoriev_pe(k4, 3)
    rep = check_pe(pe, xor_constraints(k4))
    assert rep.ok and rep.constraint_residual == 0 and rep.constraint_checks > 0
    assert pe_eval(pe, xor_objective(k4)) == 1
    assert brute_force_opt(k4)[0] == Fraction(3, 4)


def test_random_unsat_instance_at_max_degree():
    # density 1.4n is refuted at small width; the pe at the bisected degree
    # is still valid and supported on ±1/0 entries
    inst = gen_3xor(10, 14, seed=3)
    d = max_consistent_degree(inst)
    assert 0 <= d < 3
    pe = grigoriev_pe(inst, d)
    rep = check_pe(pe, xor_constraints(inst), strict_degree=False)
    assert rep.psd_ok and rep.min_eig >= -1e-9
    assert set(pe.table.values()) <= {-1, 0, 1}
    with pytest.raises(DegreeError):
        pe_eval(pe, xor_objective(inst))


@given(st.integers(0, 500))
def test_closure_pe_entries_are_signs(seed):
    inst = gen_3xor(8, 6, seed=seed)
    d = max_consistent_degree(inst, 6)
    if d < 0:
        return
    pe = grigoriev_pe(inst, d)
    assert set(pe.table.values()) <= {-1, 1}
    assert check_pe(pe, xor_constraints(inst), strict_degree=False).ok


# ---------------------------------------------------------------------------
# moment matrices and validity


def test_moment_matrix_degree_zero():
    assert moment_matrix(point_mass_pe([1, -1, 1]), 0).tolist() == [[1.0]]


def test_moment_matrix_point_mass_is_rank_one():
    x = np.array([1, -1, -1, 1])
    M = moment_matrix(point_mass_pe(x, 4))
    v = np.array([np.prod(x[[i for i in range(4) if (S >> i) & 1]]) for S in moment_rows(4, 4)])
    assert np.array_equal(M, np.outer(v, v))


def test_moment_matrix_degree_overflow():
    with pytest.raises(DegreeError):
        moment_matrix(point_mass_pe([1, 1, 1], 2), 4)


def test_point_mass_report():
    rep = check_pe(point_mass_pe([1, -1, 1, 1], 4))
    assert rep.normalization_residual == 0 and rep.constraint_residual == 0
    assert abs(rep.min_eig) < 1e-9


def test_perturbed_pe_flagged():
    pe = point_mass_pe([1, -1, 1, 1], 4)
    t = dict(pe.table)
    t[0b0011] += 0.5
    rep = check_pe(PseudoExpectation(4, 4, t))
    assert rep.min_eig < -1e-3
    assert not rep.ok and "min eig" in rep.first_violation()


def test_pe_eval_point_mass_equals_brute_force():
    inst = gen_3xor(8, 20, seed=11)
    val, x = brute_force_opt(inst)
    assert pe_eval(point_mass_pe(x, 3), xor_objective(inst)) == val


def test_pe_eval_degree_overflow():
    with pytest.raises(DegreeError):
        pe_eval(point_mass_pe([1, 1, 1], 1), MultilinearPoly.monomial(3, (0, 1)))


def test_pe_json_round_trip():
    pe = grigoriev_pe(gen_3xor(6, 4, "planted", seed=1), 4)
    back = PseudoExpectation.from_json(pe.to_json())
    assert back.table == pe.table and back.degree == pe.degree
    d = json.loads(pe.to_json())
    assert set(d) == {"nvars", "degree", "table"}


@given(distributions())
def test_true_distributions_are_psd(dist):
    pts, probs = dist
    pe = distribution_pe(pts, probs, 4)
    rep = check_pe(pe)
    assert rep.min_eig >= -1e-10 and rep.normalization_residual == 0


@given(distributions())
def test_full_degree_pe_recovers_probabilities(dist):
    # on n = 4 the full moment table determines the distribution by
    # Fourier inversion
    pts, probs = dist
    pe = distribution_pe(pts, probs, 4)
    X = cube(4)
    p = np.zeros(len(X))
    for S in range(16):
        chi = np.prod(np.where([(S >> i) & 1 for i in range(4)], X, 1), axis=1)
        p += float(pe.table.get(S, 0)) * chi / 16
    assert p.min() >= -1e-9
    for x, q in zip(pts, probs):
        row = int(np.flatnonzero((X == x).all(axis=1))[0])
        assert p[row] >= float(q) - 1e-9


@given(polys(), polys(), st.integers(-3, 3), st.integers(-3, 3))
def test_pe_eval_linear(f, g, a, b):
    pe = distribution_pe(cube(5)[:7], [Fraction(1, 7)] * 7, 5)
    assert pe_eval(pe, f * a + g * b) == a * pe_eval(pe, f) + b * pe_eval(pe, g)


# ---------------------------------------------------------------------------
# pushforward


def test_identity_pushforward():
    pe = grigoriev_pe(gen_3xor(6, 4, "planted", seed=5), 4)
    ident = [MultilinearPoly.var(6, i) for i in range(6)]
    assert pushforward(pe, ident).table == pe.table


def test_pushforward_degree_divides():
    pe = point_mass_pe([1, -1, 1, 1, -1], 5)
    maps = [MultilinearPoly.monomial(5, (0, 1)), MultilinearPoly.monomial(5, (2, 3)), MultilinearPoly.var(5, 4)]
    out = pushforward(pe, maps)
    assert out.degree == 5 // 2
    with pytest.raises(DegreeError):
        pushforward(pe, maps, degree=3)


def test_pushforward_gadget_satisfies_csp_constraints():
    inst = gen_3xor(8, 3, "planted", seed=2)
    csp, emb = xor_to_2oo4(inst)
    pushed = pushforward(grigoriev_pe(inst, 8), emb)
    assert pushed.degree == 4
    rep = check_pe(pushed, csp_constraints(csp) + literal_sum_constraints(csp))
    assert rep.ok and rep.constraint_residual == 0


@given(st.integers(0, 2000))
def test_pushforward_transitive(seed):
    rng = np.random.default_rng(seed)
    x = rng.choice([1, -1], size=4)
    pe = distribution_pe([x, -x, rng.choice([1, -1], size=4)], [Fraction(1, 3)] * 3, 4)
    inner = [MultilinearPoly.monomial(4, tuple(sorted(rng.choice(4, 2, replace=False).tolist()))) for _ in range(4)]
    outer = [MultilinearPoly.var(4, int(rng.integers(4))) * MultilinearPoly.var(4, int(rng.integers(4))) for _ in range(3)]
    two_step = pushforward(pushforward(pe, inner), outer, degree=1)
    one_step = pushforward(pe, compose_maps(outer, inner), degree=1)
    assert two_step.table == one_step.table


def test_negative_degree_is_degree_error(k4):
    from sosgap.errors import DegreeError

    with pytest.raises(DegreeError):
        grigoriev_pe(k4, -1)
