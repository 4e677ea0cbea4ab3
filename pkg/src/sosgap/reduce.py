"""Low-degree reduction 3XOR -> 2-out-of-4-SAT-EQ.

Variable layout produced by :func:`xor_to_2oo4` for an instance with ``n``
variables and ``m`` clauses: source variables keep indices ``0..n-1``, the
dummies of clause ``c`` are ``n+3c, n+3c+1, n+3c+2`` (``y1, y2, y3``) and the
parity reference bit ``z`` is ``n+3m``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import networkx as nx
import numpy as np

from .boolcore import (
    DEFAULT_BRUTE_CAP,
    XorInstance,
    brute_force_max,
    brute_force_opt,
    exact_max,
)
from .errors import GenerationError, InvalidAssignmentError, ResourceLimitError
from .pseudoexp import MultilinearPoly

__all__ = [
    "CspClause",
    "CspInstance",
    "VarEmbedding",
    "xor_to_2oo4",
    "expanderize",
    "expand_embedding",
    "copy_graph",
    "second_eigenvalue_modulus",
    "csp_to_poly",
    "clause_indicator",
    "csp_constraints",
    "literal_sum_constraints",
    "eval_csp",
    "csp_opt",
    "occurrences",
    "soundness_probe",
    "SoundnessReport",
    "csp_to_json",
    "csp_from_json",
]

TWO_OF_FOUR = "2oo4"
EQ = "eq"


@dataclass(frozen=True)
class CspClause:
    kind: str
    lits: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "lits", tuple((int(v), int(s)) for v, s in self.lits))
        want = 4 if self.kind == TWO_OF_FOUR else 2 if self.kind == EQ else None
        if want is None:
            raise ValueError(f"unknown clause kind {self.kind!r}")
        if len(self.lits) != want:
            raise ValueError(f"{self.kind} clause needs {want} literals")
        vs = [v for v, _ in self.lits]
        if len(set(vs)) != len(vs):
            raise ValueError(f"repeated variable in clause {self.lits}")
        if any(s not in (1, -1) for _, s in self.lits):
            raise ValueError("literal signs must be +1 or -1")

    @property
    def vars(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.lits)

    def satisfied(self, y) -> bool:
        vals = [s * int(y[v]) for v, s in self.lits]
        if self.kind == TWO_OF_FOUR:
            return sum(vals) == 0
        return vals[0] == vals[1]


@dataclass(frozen=True)
class CspInstance:
    nvars: int
    clauses: tuple[CspClause, ...]
    parity_bit: int
    dummy_map: tuple[tuple[int, int, int], ...] = ()
    copy_groups: tuple[tuple[int, ...], ...] = ()
    origin: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))
        if not 0 <= self.parity_bit < self.nvars:
            raise ValueError("parity_bit out of range")
        for c in self.clauses:
            if max(c.vars) >= self.nvars:
                raise ValueError(f"clause {c.lits} out of range")

    @property
    def m(self) -> int:
        return len(self.clauses)


# A map from source assignments to target assignments: one polynomial per
# target variable, in the source variables.
VarEmbedding = list


# ---------------------------------------------------------------------------


def _dummy_tables(rhs: int) -> list[dict[tuple[int, int, int], int]]:
    """Dummy values on the four satisfying patterns of ``x_i x_j x_k = rhs``."""
    tabs: list[dict] = [{}, {}, {}]
    for xi in (1, -1):
        for xj in (1, -1):
            xk = rhs * xi * xj
            x = (xi, xj, xk)
            if rhs == 1:
                y = (-1, -1, -1) if x == (1, 1, 1) else x
            else:
                # mirror image of the +1 table under global negation
                mx = tuple(-v for v in x)
                y = tuple(-v for v in ((-1, -1, -1) if mx == (1, 1, 1) else mx))
            for t in range(3):
                tabs[t][x] = y[t]
    return tabs


def _interpolate_dummy(n: int, trip: tuple[int, int, int], rhs: int, table) -> MultilinearPoly:
    """Degree-2 interpolant over ``{1, x_j x_k, x_i x_k, x_i x_j}``.

    On the satisfying patterns these four functions span everything; the
    interpolant is also ±1 on the unsatisfying patterns because it equals the
    satisfying-pattern value at the negated point.
    """
    pats = sorted(table)
    basis = lambda x: [1, x[1] * x[2], x[0] * x[2], x[0] * x[1]]
    A = [[Fraction(b) for b in basis(p)] for p in pats]
    rhs_vec = [Fraction(table[p]) for p in pats]
    coef = _solve_fraction(A, rhs_vec)
    i, j, k = trip
    monos = [(), (j, k), (i, k), (i, j)]
    terms = {}
    for c, mono in zip(coef, monos):
        if c != 0:
            m = 0
            for v in mono:
                m |= 1 << v
            terms[m] = float(c) if c.denominator in (1, 2, 4) else c
    return MultilinearPoly(n, terms)


def _solve_fraction(A, b):
    n = len(A)
    M = [row[:] + [bb] for row, bb in zip(A, b)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        M[col] = [v / pv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def xor_to_2oo4(inst: XorInstance) -> tuple[CspInstance, VarEmbedding]:
    """Gadget reduction; returns the CSP and the embedding of source
    assignments (``z = +1``, copies of ``x``, degree-2 dummies)."""
    n, m = inst.n, inst.m
    z = n + 3 * m
    nv = n + 3 * m + 1
    clauses = []
    dmap = []
    emb: list[MultilinearPoly] = [MultilinearPoly.var(n, v) for v in range(n)]
    for ci, c in enumerate(inst.clauses):
        i, j, k = c.vars
        y1, y2, y3 = n + 3 * ci, n + 3 * ci + 1, n + 3 * ci + 2
        zs = 1 if c.rhs == 1 else -1
        clauses.append(CspClause(TWO_OF_FOUR, ((i, 1), (y2, 1), (y3, 1), (z, zs))))
        clauses.append(CspClause(TWO_OF_FOUR, ((j, 1), (y1, 1), (y3, 1), (z, zs))))
        clauses.append(CspClause(TWO_OF_FOUR, ((k, 1), (y1, 1), (y2, 1), (z, zs))))
        dmap.append((y1, y2, y3))
        for tab in _dummy_tables(c.rhs):
            emb.append(_interpolate_dummy(n, (i, j, k), c.rhs, tab))
    emb.append(MultilinearPoly.const(n, 1))
    csp = CspInstance(nv, tuple(clauses), z, tuple(dmap), (), tuple(range(nv)))
    return csp, emb


# ---------------------------------------------------------------------------
# expanderization


def occurrences(csp: CspInstance) -> np.ndarray:
    occ = np.zeros(csp.nvars, dtype=np.int64)
    for c in csp.clauses:
        for v in c.vars:
            occ[v] += 1
    return occ


def second_eigenvalue_modulus(g: nx.Graph) -> float:
    A = nx.to_numpy_array(g, nodelist=sorted(g.nodes()))
    ev = np.sort(np.abs(np.linalg.eigvalsh(A)))[::-1]
    return float(ev[1]) if len(ev) > 1 else 0.0


def copy_graph(t: int, rng: np.random.Generator, bound: float = 2.9, tries: int = 1000) -> nx.Graph:
    """Graph joining ``t`` copies of a variable.

    ``t <= 4``: complete graph.  Otherwise a random graph with every degree 3
    (one vertex of degree 2 when ``t`` is odd), resampled until it is
    connected and its second-largest adjacency eigenvalue modulus is at most
    ``bound``.
    """
    if t <= 4:
        return nx.complete_graph(t)
    seq = [3] * t if t % 2 == 0 else [3] * (t - 1) + [2]
    for _ in range(tries):
        s = int(rng.integers(2**31))
        try:
            if t % 2 == 0:
                g = nx.random_regular_graph(3, t, seed=s)
            else:
                g = nx.random_degree_sequence_graph(seq, seed=s, tries=50)
        except nx.NetworkXError:
            continue
        if nx.is_connected(g) and second_eigenvalue_modulus(g) <= bound:
            return g
    raise GenerationError(f"no certified copy graph on {t} nodes after {tries} tries")


def expanderize(csp: CspInstance, seed: int = 0, max_occ: int = 4, bound: float = 2.9) -> CspInstance:
    """Split every variable occurring in more than ``max_occ`` clauses into one
    copy per occurrence, tied together by EQ clauses along a certified
    low-degree expander."""
    rng = np.random.default_rng(seed)
    occ = occurrences(csp)
    base = csp.origin if csp.origin is not None else tuple(range(csp.nvars))
    new_index: dict[int, list[int]] = {}
    origin: list[int] = []
    for v in range(csp.nvars):
        k = int(occ[v]) if occ[v] > max_occ else 1
        new_index[v] = list(range(len(origin), len(origin) + k))
        origin.extend([base[v]] * k)
    used = {v: 0 for v in range(csp.nvars)}
    clauses = []
    for c in csp.clauses:
        lits = []
        for v, s in c.lits:
            if occ[v] > max_occ:
                lits.append((new_index[v][used[v]], s))
                used[v] += 1
            else:
                lits.append((new_index[v][0], s))
        clauses.append(CspClause(c.kind, tuple(lits)))
    groups = []
    for v in range(csp.nvars):
        copies = new_index[v]
        if len(copies) == 1:
            continue
        groups.append(tuple(copies))
        g = copy_graph(len(copies), rng, bound)
        for a, b in sorted(tuple(sorted(e)) for e in g.edges()):
            clauses.append(CspClause(EQ, ((copies[a], 1), (copies[b], 1))))
    dmap = tuple(tuple(new_index[y][0] for y in trip) for trip in csp.dummy_map)
    return CspInstance(
        len(origin),
        tuple(clauses),
        new_index[csp.parity_bit][0],
        dmap,
        tuple(csp.copy_groups) + tuple(groups),
        tuple(origin),
    )


def expand_embedding(emb: VarEmbedding, csp: CspInstance) -> VarEmbedding:
    """Embedding into an expanderized CSP: each copy inherits its original."""
    if csp.origin is None:
        return list(emb)
    return [emb[o] for o in csp.origin]


# ---------------------------------------------------------------------------
# polynomials and exact optima


def clause_indicator(c: CspClause, nvars: int) -> MultilinearPoly:
    """1 on satisfying assignments, 0 elsewhere.

    For 2-out-of-4 with literal sum ``S``: ``(S^2 - 4)(S^2 - 16) / 64``,
    which is 1 exactly when ``S = 0``.
    """
    if c.kind == EQ:
        (a, sa), (b, sb) = c.lits
        return MultilinearPoly(nvars, {0: Fraction(1, 2), (1 << a) | (1 << b): Fraction(sa * sb, 2)})
    S = MultilinearPoly(nvars)
    for v, s in c.lits:
        S = S + MultilinearPoly.var(nvars, v, s)
    S2 = S * S
    return (S2 - 4) * (S2 - 16) * Fraction(1, 64)


def csp_to_poly(csp: CspInstance) -> MultilinearPoly:
    """Fraction of satisfied clauses as a multilinear polynomial."""
    f = MultilinearPoly(csp.nvars)
    for c in csp.clauses:
        f = f + clause_indicator(c, csp.nvars)
    return f * Fraction(1, csp.m)


def csp_constraints(csp: CspInstance) -> list[MultilinearPoly]:
    """Hard constraints ``indicator - 1 = 0``."""
    return [clause_indicator(c, csp.nvars) - 1 for c in csp.clauses]


def literal_sum_constraints(csp: CspInstance) -> list[MultilinearPoly]:
    """``sum of literals = 0`` for each 2-out-of-4 clause."""
    out = []
    for c in csp.clauses:
        if c.kind == TWO_OF_FOUR:
            out.append(MultilinearPoly(csp.nvars, {1 << v: s for v, s in c.lits}))
    return out


def eval_csp(csp: CspInstance, y) -> Fraction:
    y = np.asarray(y)
    if y.shape != (csp.nvars,) or not np.all(np.abs(y) == 1):
        raise InvalidAssignmentError("assignment must be a ±1 vector of length nvars")
    return Fraction(sum(1 for c in csp.clauses if c.satisfied(y)), csp.m)


def _clause_factor(c: CspClause):
    vs = c.vars
    tab = np.zeros((2,) * len(vs), dtype=np.int64)
    for idx in np.ndindex(*tab.shape):
        y = {v: (1 if b == 0 else -1) for v, b in zip(vs, idx)}
        tab[idx] = int(c.satisfied(y))
    return vs, tab


def csp_opt(csp: CspInstance, method: str = "auto", cap: int = DEFAULT_BRUTE_CAP, max_scope: int = 24):
    """Exact ``(OPT, argmax)`` of the fraction of satisfied clauses.

    ``method="brute"`` enumerates all assignments (``nvars <= cap``);
    ``method="ve"`` runs exact max-sum variable elimination; ``"auto"`` picks
    brute force when it fits.
    """
    factors = [_clause_factor(c) for c in csp.clauses]
    if method == "auto":
        method = "brute" if csp.nvars <= min(cap, 20) else "ve"
    if method == "brute":
        val, y = brute_force_max(csp.nvars, factors, cap)
    elif method == "ve":
        val, y = exact_max(csp.nvars, factors, max_scope)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Fraction(int(val), csp.m), y


# ---------------------------------------------------------------------------


@dataclass
class SoundnessReport:
    opt_source: Fraction
    delta: Fraction
    opt_gadget: Fraction
    bound_gadget: Fraction
    opt_expanded: Fraction
    eta: Fraction | None
    gadget_ok: bool
    expanded_ok: bool
    nvars_gadget: int
    nvars_expanded: int

    @property
    def ok(self) -> bool:
        return self.gadget_ok and self.expanded_ok

    def as_dict(self) -> dict:
        f = lambda v: None if v is None else str(v)
        return {
            "opt_source": f(self.opt_source),
            "delta": f(self.delta),
            "opt_gadget": f(self.opt_gadget),
            "bound_gadget": f(self.bound_gadget),
            "opt_expanded": f(self.opt_expanded),
            "eta": f(self.eta),
            "gadget_ok": self.gadget_ok,
            "expanded_ok": self.expanded_ok,
        }


def soundness_probe(
    inst: XorInstance,
    csp: CspInstance | None = None,
    expanded: CspInstance | None = None,
    seed: int = 0,
    cap: int = DEFAULT_BRUTE_CAP,
) -> SoundnessReport:
    """Exact optima of the source, the gadget CSP and its expanderization.

    With ``OPT(source) = 1 - delta`` the gadget must satisfy
    ``OPT <= 1 - delta/3``; after expanderization the report records
    ``eta = (1 - OPT') / delta`` and requires ``eta > 0`` when ``delta > 0``
    (and ``OPT' = 1`` when ``delta = 0``).  All arithmetic is rational.
    """
    if inst.n > cap:
        raise ResourceLimitError(f"source n={inst.n} exceeds cap {cap}")
    if csp is None:
        csp, _ = xor_to_2oo4(inst)
    if expanded is None:
        expanded = expanderize(csp, seed=seed)
    opt_src, _ = brute_force_opt(inst, cap)
    delta = 1 - opt_src
    opt_g, _ = csp_opt(csp, cap=cap)
    opt_e, _ = csp_opt(expanded, method="ve")
    bound = 1 - delta / 3
    gadget_ok = opt_g <= bound and (delta > 0 or opt_g == 1)
    if delta > 0:
        eta = (1 - opt_e) / delta
        exp_ok = eta > 0
    else:
        eta = None
        exp_ok = opt_e == 1
    return SoundnessReport(opt_src, delta, opt_g, bound, opt_e, eta, gadget_ok, exp_ok, csp.nvars, expanded.nvars)


# ---------------------------------------------------------------------------


def csp_to_json(csp: CspInstance) -> str:
    return json.dumps(
        {
            "nvars": csp.nvars,
            "clauses": [{"kind": c.kind, "lits": [list(l) for l in c.lits]} for c in csp.clauses],
            "parity_bit": csp.parity_bit,
            "copy_groups": [list(g) for g in csp.copy_groups],
        }
    )


def csp_from_json(text: str) -> CspInstance:
    d = json.loads(text)
    clauses = tuple(CspClause(c["kind"], tuple(tuple(l) for l in c["lits"])) for c in d["clauses"])
    return CspInstance(
        int(d["nvars"]),
        clauses,
        int(d["parity_bit"]),
        copy_groups=tuple(tuple(g) for g in d.get("copy_groups", [])),
    )
