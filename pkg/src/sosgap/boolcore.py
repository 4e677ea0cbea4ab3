"""GF(2) linear algebra, 3XOR instances and exact small-scale optimum oracles.

Conventions
-----------
Assignments are ``±1`` integer vectors.  In GF(2) form a value ``+1`` is the
bit 0 and ``-1`` is the bit 1, so a clause ``x_i x_j x_k = a`` becomes the
equation ``t_i + t_j + t_k = [a == -1]`` over GF(2).  Supports of equations are
Python ``int`` bit sets with bit ``v`` standing for variable ``v``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidAssignmentError, InvalidInstanceError, ResourceLimitError

__all__ = [
    "XorClause",
    "XorInstance",
    "Gf2Equation",
    "ClosureResult",
    "gen_3xor",
    "eval_3xor",
    "brute_force_opt",
    "gf2_closure",
    "gf2_satisfiable",
    "xor_objective_counts",
    "exact_max",
    "brute_force_max",
    "instance_to_json",
    "instance_from_json",
    "sign_to_bit",
    "bit_to_sign",
]

DEFAULT_BRUTE_CAP = 24
DEFAULT_EQUATION_BUDGET = 10**6


def sign_to_bit(s: int) -> int:
    return 0 if s == 1 else 1


def bit_to_sign(b: int) -> int:
    return 1 if b == 0 else -1


@dataclass(frozen=True)
class XorClause:
    vars: tuple[int, int, int]
    rhs: int

    def __post_init__(self):
        if len(self.vars) != 3 or len(set(self.vars)) != 3:
            raise InvalidInstanceError(f"clause needs 3 distinct variables, got {self.vars}")
        if any(v < 0 for v in self.vars):
            raise InvalidInstanceError(f"negative variable index in {self.vars}")
        if self.rhs not in (1, -1):
            raise InvalidInstanceError(f"rhs must be +1 or -1, got {self.rhs}")

    @property
    def mask(self) -> int:
        i, j, k = self.vars
        return (1 << i) | (1 << j) | (1 << k)


@dataclass(frozen=True)
class XorInstance:
    n: int
    clauses: tuple[XorClause, ...]
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))
        if self.n < 1:
            raise InvalidInstanceError("n must be positive")
        if not self.clauses:
            raise InvalidInstanceError("clause list is empty")
        for c in self.clauses:
            if max(c.vars) >= self.n:
                raise InvalidInstanceError(f"clause {c.vars} out of range for n={self.n}")

    @property
    def m(self) -> int:
        return len(self.clauses)

    @classmethod
    def from_lists(cls, n: int, clauses: Iterable[Sequence[int]], seed: int | None = None):
        cl = [XorClause((int(c[0]), int(c[1]), int(c[2])), int(c[3])) for c in clauses]
        return cls(n, tuple(cl), seed)


@dataclass(frozen=True)
class Gf2Equation:
    """``sum_{v in support} t_v = rhs`` over GF(2)."""

    support: int
    rhs: int

    def variables(self) -> tuple[int, ...]:
        return _bits(self.support)

    def __xor__(self, other: "Gf2Equation") -> "Gf2Equation":
        return Gf2Equation(self.support ^ other.support, self.rhs ^ other.rhs)


def _bits(mask: int) -> tuple[int, ...]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return tuple(out)


# ---------------------------------------------------------------------------
# generation and evaluation


def gen_3xor(n: int, m: int, mode: str = "random", seed: int = 0) -> XorInstance:
    """Sample a 3XOR instance.

    ``mode="random"`` draws each triple uniformly (three distinct variables)
    and each sign uniformly.  ``mode="planted"`` draws a hidden assignment and
    sets every sign so that it is satisfied.
    """
    if n < 3:
        raise InvalidInstanceError("need n >= 3 for 3XOR")
    if m < 1:
        raise InvalidInstanceError("need m >= 1")
    if mode not in ("random", "planted", "planted-satisfiable"):
        raise InvalidInstanceError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    hidden = rng.choice(np.array([-1, 1]), size=n) if mode != "random" else None
    clauses = []
    for _ in range(m):
        trip = tuple(sorted(int(v) for v in rng.choice(n, size=3, replace=False)))
        if hidden is None:
            rhs = int(rng.choice(np.array([-1, 1])))
        else:
            rhs = int(hidden[trip[0]] * hidden[trip[1]] * hidden[trip[2]])
        clauses.append(XorClause(trip, rhs))
    return XorInstance(n, tuple(clauses), seed)


def _check_assignment(x, n: int) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (n,):
        raise InvalidAssignmentError(f"expected {n} entries, got shape {x.shape}")
    if not np.all((x == 1) | (x == -1)):
        raise InvalidAssignmentError("entries must be +1 or -1")
    return x.astype(np.int64)


def eval_3xor(inst: XorInstance, x) -> Fraction:
    """Fraction of clauses satisfied by ``x``, as an exact rational."""
    x = _check_assignment(x, inst.n)
    sat = sum(1 for c in inst.clauses if x[c.vars[0]] * x[c.vars[1]] * x[c.vars[2]] == c.rhs)
    return Fraction(sat, inst.m)


def xor_objective_counts(inst: XorInstance, chunk: int = 1 << 20):
    """Yield ``(start, counts)`` where ``counts[t]`` is the number of satisfied
    clauses for the assignment with index ``start + t``.

    Assignment index ``s`` encodes variable ``v`` in bit ``n-1-v`` with bit 1
    meaning ``+1``; index order is lexicographic order with ``-1 < +1``.
    """
    n = inst.n
    total = 1 << n
    trips = np.array([c.vars for c in inst.clauses], dtype=np.int64)
    rbits = np.array([sign_to_bit(c.rhs) for c in inst.clauses], dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        counts = np.zeros(idx.shape, dtype=np.int64)
        for (i, j, k), r in zip(trips, rbits):
            t = ((idx >> (n - 1 - i)) ^ (idx >> (n - 1 - j)) ^ (idx >> (n - 1 - k))) & 1
            # bit 1 means +1, so the GF(2) value t_v is the complement
            par = t ^ 1  # parity of three complements is the complement of the parity
            counts += (par == r)
        yield start, counts


def _index_to_assignment(s: int, n: int) -> np.ndarray:
    return np.array([1 if (s >> (n - 1 - v)) & 1 else -1 for v in range(n)], dtype=np.int64)


def brute_force_opt(inst: XorInstance, cap: int = DEFAULT_BRUTE_CAP) -> tuple[Fraction, np.ndarray]:
    """Exact optimum by enumeration; ties go to the lexicographically smallest
    assignment (``-1 < +1``)."""
    if inst.n > cap:
        raise ResourceLimitError(f"n={inst.n} exceeds brute-force cap {cap}")
    best, arg = -1, 0
    for start, counts in xor_objective_counts(inst):
        j = int(np.argmax(counts))
        if counts[j] > best:
            best, arg = int(counts[j]), start + j
    return Fraction(best, inst.m), _index_to_assignment(arg, inst.n)


# ---------------------------------------------------------------------------
# GF(2) closure


@dataclass
class ClosureResult:
    width: int
    table: dict[int, int]
    contradiction: bool
    truncated: bool = False

    @property
    def equations(self) -> frozenset[Gf2Equation]:
        return frozenset(Gf2Equation(s, b) for s, b in self.table.items())

    def __contains__(self, eq: Gf2Equation) -> bool:
        return self.table.get(eq.support) == eq.rhs

    def __len__(self) -> int:
        return len(self.table)


def gf2_closure(inst: XorInstance, width: int, budget: int = DEFAULT_EQUATION_BUDGET) -> ClosureResult:
    """Width-bounded derivation closure of the clause equations.

    Seeds with every clause equation, then repeatedly adds the XOR of two
    derived equations whenever the result has support size at most ``width``.
    Derivation stops early once ``(empty, 1)`` appears.
    """
    if inst.n > 63:
        raise ResourceLimitError("closure uses 64-bit supports; n must be <= 63")
    if width < 0:
        raise ValueError("width must be nonnegative")
    table: dict[int, int] = {}
    order: list[int] = []
    bits: list[int] = []

    def add(s: int, b: int) -> bool:
        """Insert; return False on a clash."""
        old = table.get(s)
        if old is None:
            table[s] = b
            order.append(s)
            bits.append(b)
            return True
        return old == b

    for c in inst.clauses:
        if not add(c.mask, sign_to_bit(c.rhs)):
            return ClosureResult(width, table, True)
    sup = np.zeros(max(1024, 2 * len(order)), dtype=np.uint64)
    rb = np.zeros(sup.shape, dtype=np.uint8)
    q = 0
    while q < len(order):
        if len(order) > budget:
            return ClosureResult(width, table, False, truncated=True)
        if len(order) > sup.shape[0]:
            grow = max(2 * sup.shape[0], len(order))
            sup = np.resize(sup, grow)
            rb = np.resize(rb, grow)
        cnt = len(order)
        sup[:cnt] = np.fromiter(order, dtype=np.uint64, count=cnt)
        rb[:cnt] = np.fromiter(bits, dtype=np.uint8, count=cnt)
        s0, b0 = order[q], bits[q]
        q += 1
        x = sup[:cnt] ^ np.uint64(s0)
        ok = np.bitwise_count(x) <= width
        for s, b in zip(x[ok].tolist(), (rb[:cnt][ok] ^ b0).tolist()):
            if not add(int(s), int(b)):
                return ClosureResult(width, table, True)
        if 0 in table and table[0] == 1:
            return ClosureResult(width, table, True)
    return ClosureResult(width, table, False)


def gf2_satisfiable(inst: XorInstance) -> tuple[bool, np.ndarray | None]:
    """Gaussian elimination; returns ``(True, solution)`` or ``(False, None)``."""
    n = inst.n
    pivots: dict[int, tuple[int, int]] = {}
    for c in inst.clauses:
        s, b = c.mask, sign_to_bit(c.rhs)
        for v in range(n):
            if not (s >> v) & 1:
                continue
            if v in pivots:
                ps, pb = pivots[v]
                s, b = s ^ ps, b ^ pb
            else:
                pivots[v] = (s, b)
                break
        else:
            if b:
                return False, None
    t = [0] * n
    for v in sorted(pivots, reverse=True):
        s, b = pivots[v]
        val = b
        for u in _bits(s):
            if u != v:
                val ^= t[u]
        t[v] = val
    return True, np.array([bit_to_sign(b) for b in t], dtype=np.int64)


# ---------------------------------------------------------------------------
# exact maximisation of sums of local tables


def _expand(arr: np.ndarray, scope: Sequence[int], union: Sequence[int]) -> np.ndarray:
    pos = {v: k for k, v in enumerate(union)}
    perm = sorted(range(len(scope)), key=lambda a: pos[scope[a]])
    arr = np.transpose(arr, perm)
    shape = [1] * len(union)
    for v in scope:
        shape[pos[v]] = 2
    return arr.reshape(shape)


def exact_max(nvars: int, factors, max_scope: int = 24):
    """Maximise ``sum_f table_f(x_scope_f)`` over ``x in {+1,-1}^nvars``.

    ``factors`` is a list of ``(scope, table)`` with ``table`` of shape
    ``(2,)*len(scope)``; axis index 0 is ``+1`` and 1 is ``-1``.  Uses max-sum
    variable elimination with a greedy min-fill order, which is exact; the
    cost is exponential only in the induced width.  Returns ``(value, x)``.
    """
    facs = [(tuple(int(v) for v in s), np.asarray(t)) for s, t in factors]
    for s, t in facs:
        if t.shape != (2,) * len(s):
            raise ValueError("table shape does not match scope")
    remaining = set(range(nvars))
    nbrs: dict[int, set[int]] = {v: set() for v in range(nvars)}
    for s, _ in facs:
        for v in s:
            nbrs[v].update(u for u in s if u != v)
    const = 0
    trail = []
    while remaining:
        def fill(v):
            nb = nbrs[v] & remaining
            return sum(1 for a in nb for b in nb if a < b and b not in nbrs[a]), len(nb), v
        v = min(remaining, key=fill)
        remaining.discard(v)
        bucket = [f for f in facs if v in f[0]]
        facs = [f for f in facs if v not in f[0]]
        union = sorted(set().union(*[set(s) for s, _ in bucket]) | {v}) if bucket else [v]
        if len(union) > max_scope:
            raise ResourceLimitError(f"induced scope {len(union)} exceeds {max_scope}")
        rest = [u for u in union if u != v]
        total = np.zeros((2,) * len(union), dtype=np.result_type(*[t for _, t in bucket]) if bucket else np.int64)
        for s, t in bucket:
            total = total + _expand(t, s, union)
        axis = union.index(v)
        trail.append((v, union, total))
        reduced = total.max(axis=axis)
        if rest:
            facs.append((tuple(rest), reduced))
            nb = set(rest)
            for u in rest:
                nbrs[u].update(nb - {u})
        else:
            const = const + reduced.item()
    x = np.zeros(nvars, dtype=np.int64)
    val_idx: dict[int, int] = {}
    for v, union, total in reversed(trail):
        index = tuple(slice(None) if u == v else val_idx[u] for u in union)
        val_idx[v] = int(np.argmax(total[index]))
    for v in range(nvars):
        x[v] = 1 if val_idx[v] == 0 else -1
    return const, x


def brute_force_max(nvars: int, factors, cap: int = DEFAULT_BRUTE_CAP):
    """Reference oracle for :func:`exact_max` by full enumeration."""
    if nvars > cap:
        raise ResourceLimitError(f"{nvars} variables exceeds brute-force cap {cap}")
    idx = np.arange(1 << nvars, dtype=np.int64)
    # axis index 0 is +1: use bit (nvars-1-v) == 1 for -1 so index 0 is all +1
    total = None
    for s, t in factors:
        t = np.asarray(t)
        sub = tuple(((idx >> (nvars - 1 - v)) & 1) for v in s)
        vals = t[sub] if s else np.full(idx.shape, t.item())
        total = vals if total is None else total + vals
    if total is None:
        return 0, np.ones(nvars, dtype=np.int64)
    j = int(np.argmax(total))
    x = np.array([-1 if (j >> (nvars - 1 - v)) & 1 else 1 for v in range(nvars)], dtype=np.int64)
    return total[j].item(), x


# ---------------------------------------------------------------------------
# serialisation


def instance_to_json(inst: XorInstance) -> str:
    return json.dumps(
        {
            "n": inst.n,
            "clauses": [[*c.vars, c.rhs] for c in inst.clauses],
            "seed": inst.seed,
        }
    )


def instance_from_json(text: str) -> XorInstance:
    try:
        d = json.loads(text)
        return XorInstance.from_lists(int(d["n"]), d["clauses"], d.get("seed"))
    except (KeyError, TypeError, IndexError, json.JSONDecodeError) as e:
        raise InvalidInstanceError(f"malformed instance JSON: {e}") from e
