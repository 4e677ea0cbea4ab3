"""Pseudo-expectations over the boolean cube.

Monomials are multilinear (``x_i^2 = 1``) and keyed by ``int`` bit sets: bit
``v`` set means ``x_v`` is present, so the product of two monomials is the XOR
of their keys.  A :class:`PseudoExpectation` stores a sparse table; monomials
of degree at most ``degree`` that are absent from the table have value 0.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .boolcore import XorInstance, gf2_closure
from .errors import DegreeError, DegreeTooHighError, ResourceLimitError

__all__ = [
    "MultilinearPoly",
    "PseudoExpectation",
    "ValidityReport",
    "mask_of",
    "bits_of",
    "subsets_upto",
    "grigoriev_pe",
    "max_consistent_degree",
    "point_mass_pe",
    "distribution_pe",
    "moment_matrix",
    "moment_rows",
    "check_pe",
    "pe_eval",
    "pushforward",
    "compose_maps",
    "xor_objective",
    "xor_constraints",
    "psd_tolerance",
]


def mask_of(idx: Iterable[int]) -> int:
    m = 0
    for v in idx:
        m ^= 1 << int(v)
    return m


def bits_of(mask: int) -> tuple[int, ...]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return tuple(out)


def subsets_upto(nvars: int, k: int) -> Iterator[int]:
    """Masks of all subsets of size <= k, by size then lexicographically."""
    for size in range(0, min(k, nvars) + 1):
        for c in itertools.combinations(range(nvars), size):
            yield mask_of(c)


def psd_tolerance(dim: int) -> float:
    return 1e-9 * max(1, dim)


# ---------------------------------------------------------------------------


class MultilinearPoly:
    """Sparse multilinear polynomial ``sum_S c_S x_S`` with ``x_i^2 = 1``."""

    __slots__ = ("nvars", "_t")

    def __init__(self, nvars: int, terms: Mapping | None = None):
        self.nvars = int(nvars)
        self._t: dict[int, Number] = {}
        if terms:
            for k, c in terms.items():
                m = k if isinstance(k, int) else mask_of(k)
                if m >> self.nvars:
                    raise ValueError(f"monomial {bits_of(m)} exceeds nvars={nvars}")
                self._add(m, c)

    def _add(self, m: int, c) -> None:
        v = self._t.get(m, 0) + c
        if v == 0:
            self._t.pop(m, None)
        else:
            self._t[m] = v

    # constructors
    @classmethod
    def const(cls, nvars: int, c=1) -> "MultilinearPoly":
        return cls(nvars, {0: c})

    @classmethod
    def var(cls, nvars: int, i: int, sign: int = 1) -> "MultilinearPoly":
        return cls(nvars, {1 << i: sign})

    @classmethod
    def monomial(cls, nvars: int, idx: Iterable[int], c=1) -> "MultilinearPoly":
        return cls(nvars, {mask_of(idx): c})

    # views
    @property
    def terms(self) -> dict[frozenset, Number]:
        return {frozenset(bits_of(m)): c for m, c in self._t.items()}

    def items(self):
        return self._t.items()

    def degree(self) -> int:
        return max((m.bit_count() for m in self._t), default=0)

    def is_zero(self) -> bool:
        return not self._t

    def __len__(self) -> int:
        return len(self._t)

    def __repr__(self) -> str:
        parts = [f"{c}*x{list(bits_of(m))}" for m, c in sorted(self._t.items())]
        return f"MultilinearPoly({self.nvars}, {' + '.join(parts) or '0'})"

    def __eq__(self, other) -> bool:
        if isinstance(other, Number):
            other = MultilinearPoly.const(self.nvars, other)
        return isinstance(other, MultilinearPoly) and self._t == other._t

    # arithmetic
    def _coerce(self, other) -> "MultilinearPoly":
        if isinstance(other, MultilinearPoly):
            return other
        if isinstance(other, Number):
            return MultilinearPoly.const(self.nvars, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = MultilinearPoly(max(self.nvars, other.nvars))
        out._t = dict(self._t)
        for m, c in other._t.items():
            out._add(m, c)
        return out

    __radd__ = __add__

    def __neg__(self):
        out = MultilinearPoly(self.nvars)
        out._t = {m: -c for m, c in self._t.items()}
        return out

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            out = MultilinearPoly(self.nvars)
            if other != 0:
                out._t = {m: c * other for m, c in self._t.items()}
            return out
        if not isinstance(other, MultilinearPoly):
            return NotImplemented
        out = MultilinearPoly(max(self.nvars, other.nvars))
        t: dict[int, Number] = {}
        for m1, c1 in self._t.items():
            for m2, c2 in other._t.items():
                k = m1 ^ m2
                t[k] = t.get(k, 0) + c1 * c2
        out._t = {k: c for k, c in t.items() if c != 0}
        return out

    __rmul__ = __mul__

    def __pow__(self, e: int):
        out = MultilinearPoly.const(self.nvars, 1)
        for _ in range(e):
            out = out * self
        return out

    def substitute(self, images: Sequence["MultilinearPoly"], nvars: int | None = None) -> "MultilinearPoly":
        """Replace ``x_v`` by ``images[v]``."""
        nv = nvars if nvars is not None else (images[0].nvars if images else 0)
        out = MultilinearPoly(nv)
        for m, c in self._t.items():
            p = MultilinearPoly.const(nv, c)
            for v in bits_of(m):
                p = p * images[v]
            out = out + p
        return out

    def evaluate(self, x) -> Number:
        """Value at a single ±1 point or, for a 2-D array, at each row."""
        x = np.asarray(x)
        if x.ndim == 1:
            tot = 0
            for m, c in self._t.items():
                s = 1
                for v in bits_of(m):
                    s *= int(x[v])
                tot += c * s
            return tot
        out = np.zeros(x.shape[0], dtype=float)
        for m, c in self._t.items():
            b = list(bits_of(m))
            col = np.prod(x[:, b], axis=1) if b else np.ones(x.shape[0])
            out += float(c) * col
        return out


# ---------------------------------------------------------------------------


@dataclass
class PseudoExpectation:
    nvars: int
    degree: int
    table: dict[int, Number] = field(default_factory=dict)

    def __post_init__(self):
        for m in self.table:
            if m.bit_count() > self.degree or m >> self.nvars:
                raise DegreeError(f"table entry {bits_of(m)} outside degree {self.degree}")

    def __getitem__(self, key) -> Number:
        m = key if isinstance(key, int) else mask_of(key)
        if m.bit_count() > self.degree:
            raise DegreeError(f"monomial of degree {m.bit_count()} exceeds pe degree {self.degree}")
        return self.table.get(m, 0)

    def restrict(self, degree: int) -> "PseudoExpectation":
        if degree > self.degree:
            raise DegreeError("cannot raise degree by restriction")
        return PseudoExpectation(
            self.nvars, degree, {m: v for m, v in self.table.items() if m.bit_count() <= degree}
        )

    def to_json(self) -> str:
        rows = []
        for m in sorted(self.table, key=lambda m: (m.bit_count(), bits_of(m))):
            v = self.table[m]
            rows.append([list(bits_of(m)), int(v) if float(v).is_integer() else float(v)])
        return json.dumps({"nvars": self.nvars, "degree": self.degree, "table": rows})

    @classmethod
    def from_json(cls, text: str) -> "PseudoExpectation":
        d = json.loads(text)
        table = {}
        for idx, v in d["table"]:
            m = mask_of(idx)
            if m in table:
                raise ValueError(f"duplicate table entry {idx}")
            table[m] = v
        return cls(int(d["nvars"]), int(d["degree"]), table)

    def _lookup_arrays(self):
        keys = np.array(sorted(self.table), dtype=np.uint64)
        vals = np.array([float(self.table[int(k)]) for k in keys], dtype=float)
        return keys, vals


# ---------------------------------------------------------------------------
# constructions


def max_consistent_degree(inst: XorInstance, hi: int | None = None) -> int:
    """Largest ``d <= hi`` whose closure is contradiction-free (-1 if none).

    Closures grow with the width, so consistency is monotone and bisection
    applies.
    """
    hi = inst.n if hi is None else hi
    if hi < 0:
        return -1
    if not gf2_closure(inst, 0).contradiction:
        lo = 0
    else:
        return -1
    if not gf2_closure(inst, hi).contradiction:
        return hi
    bad = hi
    while bad - lo > 1:
        mid = (lo + bad) // 2
        if gf2_closure(inst, mid).contradiction:
            bad = mid
        else:
            lo = mid
    return lo


def grigoriev_pe(inst: XorInstance, degree: int) -> PseudoExpectation:
    """Closure pseudo-expectation: ``E[x_S] = (-1)^b`` when ``(S, b)`` is
    derivable at width ``degree``, else 0.

    Raises :class:`DegreeTooHighError` (carrying the bisected maximum) if the
    closure is contradictory.
    """
    if degree < 0:
        raise DegreeError(f"degree must be nonnegative, got {degree}")
    cl = gf2_closure(inst, degree)
    if cl.truncated:
        raise ResourceLimitError("closure hit the equation budget")
    if cl.contradiction:
        raise DegreeTooHighError(degree, max_consistent_degree(inst, degree - 1))
    table = {s: (1 if b == 0 else -1) for s, b in cl.table.items() if s.bit_count() <= degree}
    table[0] = 1
    return PseudoExpectation(inst.n, degree, table)


def point_mass_pe(x, degree: int | None = None) -> PseudoExpectation:
    x = np.asarray(x, dtype=np.int64)
    n = x.shape[0]
    d = n if degree is None else degree
    table = {}
    for size in range(0, min(d, n) + 1):
        for c in itertools.combinations(range(n), size):
            table[mask_of(c)] = int(np.prod(x[list(c)])) if c else 1
    return PseudoExpectation(n, d, table)


def distribution_pe(points, probs, degree: int) -> PseudoExpectation:
    pts = np.asarray(points, dtype=np.int64)
    probs = list(probs)
    n = pts.shape[1]
    table = {}
    for size in range(0, min(degree, n) + 1):
        for c in itertools.combinations(range(n), size):
            col = np.prod(pts[:, list(c)], axis=1) if c else np.ones(len(pts), dtype=np.int64)
            v = sum(p * int(s) for p, s in zip(probs, col))
            if v != 0:
                table[mask_of(c)] = v
    return PseudoExpectation(n, degree, table)


# ---------------------------------------------------------------------------
# moment matrices and validity


def moment_rows(nvars: int, degree: int) -> list[int]:
    return list(subsets_upto(nvars, degree // 2))


def moment_matrix(pe: PseudoExpectation, degree: int | None = None) -> np.ndarray:
    """``M[S, T] = E[x_{S xor T}]`` over ``|S|, |T| <= degree // 2``."""
    d = pe.degree if degree is None else degree
    if d > pe.degree:
        raise DegreeError(f"requested degree {d} exceeds pe degree {pe.degree}")
    rows = moment_rows(pe.nvars, d)
    return _gram(pe, rows)


def _gram(pe: PseudoExpectation, rows: Sequence[int]) -> np.ndarray:
    if pe.nvars <= 63:
        keys, vals = pe._lookup_arrays()
        r = np.array(rows, dtype=np.uint64)
        x = r[:, None] ^ r[None, :]
        pos = np.searchsorted(keys, x)
        pos = np.minimum(pos, max(len(keys) - 1, 0))
        hit = keys[pos] == x if len(keys) else np.zeros(x.shape, bool)
        return np.where(hit, vals[pos] if len(keys) else 0.0, 0.0)
    M = np.zeros((len(rows), len(rows)))
    for a, s in enumerate(rows):
        for b, t in enumerate(rows):
            M[a, b] = float(pe.table.get(s ^ t, 0))
    return M


@dataclass
class ValidityReport:
    normalization_residual: float
    min_eigs: dict[int, float]
    psd_tolerances: dict[int, float]
    constraint_residual: float
    constraint_checks: int
    skipped_constraints: int = 0
    worst_constraint: int | None = None

    @property
    def min_eig(self) -> float:
        return min(self.min_eigs.values()) if self.min_eigs else 0.0

    @property
    def psd_ok(self) -> bool:
        return all(self.min_eigs[k] >= -self.psd_tolerances[k] for k in self.min_eigs)

    @property
    def ok(self) -> bool:
        return self.psd_ok and self.normalization_residual == 0 and self.constraint_residual == 0

    def first_violation(self) -> str | None:
        if self.normalization_residual != 0:
            return f"normalization residual {self.normalization_residual} (tolerance 0)"
        for k, e in sorted(self.min_eigs.items()):
            if e < -self.psd_tolerances[k]:
                return f"moment block level {k}: min eig {e:.3e} (tolerance {-self.psd_tolerances[k]:.1e})"
        if self.constraint_residual != 0:
            return f"constraint {self.worst_constraint} residual {self.constraint_residual} (tolerance 0)"
        return None

    def as_dict(self) -> dict:
        return {
            "normalization_residual": float(self.normalization_residual),
            "min_eigs": {str(k): v for k, v in self.min_eigs.items()},
            "min_eig": self.min_eig,
            "constraint_residual": float(self.constraint_residual),
            "constraint_checks": self.constraint_checks,
            "skipped_constraints": self.skipped_constraints,
            "ok": self.ok,
        }


def check_pe(
    pe: PseudoExpectation,
    hard_constraints: Sequence[MultilinearPoly] = (),
    strict_degree: bool = True,
) -> ValidityReport:
    """Normalisation, per-level PSD and exact constraint residuals.

    Each constraint ``g`` (meaning ``g = 0`` on the feasible set) is tested
    against every multiplier monomial of degree ``<= pe.degree - deg g``.
    With ``strict_degree=False`` constraints above ``pe.degree`` are counted
    in ``skipped_constraints`` instead of raising.
    """
    norm = abs(pe.table.get(0, 0) - 1)
    rows_all = moment_rows(pe.nvars, pe.degree)
    M = _gram(pe, rows_all)
    min_eigs, tols = {}, {}
    for k in range(pe.degree // 2 + 1):
        size = sum(1 for r in rows_all if r.bit_count() <= k)
        sub = M[:size, :size]
        min_eigs[k] = float(np.linalg.eigvalsh(sub)[0]) if size else 0.0
        tols[k] = psd_tolerance(size)
    worst, worst_g, checks, skipped = 0, None, 0, 0
    for gi, g in enumerate(hard_constraints):
        dg = g.degree()
        if dg > pe.degree:
            if strict_degree:
                raise DegreeError(f"constraint {gi} has degree {dg} > {pe.degree}")
            skipped += 1
            continue
        for q in subsets_upto(pe.nvars, pe.degree - dg):
            val = 0
            for m, c in g.items():
                val += c * pe.table.get(m ^ q, 0)
            checks += 1
            if abs(val) > worst:
                worst, worst_g = abs(val), gi
    return ValidityReport(norm, min_eigs, tols, worst, checks, skipped, worst_g)


def pe_eval(pe: PseudoExpectation, f: MultilinearPoly) -> Number:
    if f.degree() > pe.degree:
        raise DegreeError(f"polynomial degree {f.degree()} exceeds pe degree {pe.degree}")
    return sum((c * pe.table.get(m, 0) for m, c in f.items()), 0)


# ---------------------------------------------------------------------------
# pushforward


def pushforward(
    pe: PseudoExpectation,
    maps: Sequence[MultilinearPoly],
    target_constraints: Sequence[MultilinearPoly] | None = None,
    degree: int | None = None,
) -> PseudoExpectation:
    """``E_B[y_T] = E[prod_{t in T} p_t(x)]`` at degree ``floor(pe.degree / kappa)``.

    ``kappa`` is the largest degree among the map components.  When
    ``target_constraints`` is given the result is checked against them and a
    nonzero residual raises ``ValueError``.
    """
    kappa = max(1, max((p.degree() for p in maps), default=1))
    top = pe.degree // kappa
    d = top if degree is None else degree
    if d * kappa > pe.degree:
        raise DegreeError(f"target degree {d} needs source degree {d * kappa} > {pe.degree}")
    nt = len(maps)
    table: dict[int, Number] = {0: pe.table.get(0, 0)}
    items = [list(p.items()) for p in maps]
    get = pe.table.get

    def dfs(start: int, mask: int, prod: dict[int, Number], size: int):
        if size == d:
            return
        for t in range(start, nt):
            nxt: dict[int, Number] = {}
            for m1, c1 in prod.items():
                for m2, c2 in items[t]:
                    k = m1 ^ m2
                    nxt[k] = nxt.get(k, 0) + c1 * c2
            nxt = {k: c for k, c in nxt.items() if c != 0}
            val = sum((c * get(k, 0) for k, c in nxt.items()), 0)
            tm = mask | (1 << t)
            if val != 0:
                table[tm] = val
            dfs(t + 1, tm, nxt, size + 1)

    dfs(0, 0, {0: 1}, 0)
    out = PseudoExpectation(nt, d, table)
    if target_constraints is not None:
        rep = check_pe(out, target_constraints, strict_degree=False)
        if rep.constraint_residual != 0:
            raise ValueError(f"pushforward violates target constraints: {rep.first_violation()}")
    return out


def compose_maps(outer: Sequence[MultilinearPoly], inner: Sequence[MultilinearPoly]) -> list[MultilinearPoly]:
    """Map ``x -> outer(inner(x))``."""
    nv = inner[0].nvars if inner else 0
    return [p.substitute(inner, nv) for p in outer]


# ---------------------------------------------------------------------------
# 3XOR polynomials


def xor_objective(inst: XorInstance) -> MultilinearPoly:
    """``(1/m) sum_C (1 + a_C x_i x_j x_k) / 2``, exact rational coefficients."""
    f = MultilinearPoly(inst.n)
    w = Fraction(1, 2 * inst.m)
    for c in inst.clauses:
        f = f + MultilinearPoly(inst.n, {0: w, c.mask: w * c.rhs})
    return f


def xor_constraints(inst: XorInstance) -> list[MultilinearPoly]:
    """Hard constraints ``x_i x_j x_k - a = 0``."""
    return [MultilinearPoly(inst.n, {c.mask: 1, 0: -c.rhs}) for c in inst.clauses]
