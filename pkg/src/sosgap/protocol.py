"""QMA(2) verifier for 2-out-of-4-SAT-EQ as explicit operators and polynomials.

Registers are ordered ``A_1..A_c, B_1..B_c``, each a qudit of dimension
``N = csp.nvars``.  Every test has two evaluation paths:

* matrix path: the test operator applied to a state (the honest product
  witness, or the moment state ``rho~`` of a pseudo-expectation);
* polynomial path: the acceptance probability of the honest witness
  ``|psi_x>^{2c}`` written as a multilinear polynomial in ``x`` and then
  evaluated at a point or under a pseudo-expectation.

By linearity ``tr(T rho~) = E~[<psi_x|T|psi_x>]``, so the paths must agree.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .boolcore import brute_force_max, exact_max
from .errors import ConfigurationError, DegreeError, InvalidMeasurementError, ResourceLimitError
from .pseudoexp import MultilinearPoly, PseudoExpectation, pe_eval
from .qstate import DEFAULT_DIM_CAP, DensityMatrix, honest_witness, moment_state
from .reduce import EQ, TWO_OF_FOUR, CspInstance

__all__ = [
    "ProtocolParams",
    "AcceptReport",
    "SeesawResult",
    "make_params",
    "round_robin_matchings",
    "greedy_blocks",
    "product_sym_accept",
    "uniformity_accept",
    "satisfiability_accept",
    "accept_probability",
    "honest_sweep",
    "hsep_seesaw",
    "two_to_four_bridge",
    "norm24_grid",
    "norm24_bridge",
    "clause_vector",
    "satisfiability_operator",
    "uniformity_operator",
]

TEST_NAMES = ("product", "symmetry", "uniformity", "satisfiability")


# ---------------------------------------------------------------------------
# parameters


def round_robin_matchings(n: int) -> list[list[tuple[int, int]]]:
    """1-factorisation of ``K_n`` by the circle method.

    For odd ``n`` a dummy vertex is added; the vertex paired with it in a
    round appears as ``(v, -1)`` and is unmatched in that round.
    """
    if n < 2:
        return [[(0, -1)]] if n == 1 else []
    m = n if n % 2 == 0 else n + 1
    fixed = m - 1
    rounds = []
    for r in range(m - 1):
        pairs = [(r, fixed)]
        for i in range(1, m // 2):
            a, b = (r + i) % (m - 1), (r - i) % (m - 1)
            pairs.append((a, b))
        out = []
        for a, b in pairs:
            if a >= n:
                out.append((b, -1))
            elif b >= n:
                out.append((a, -1))
            else:
                out.append((min(a, b), max(a, b)))
        rounds.append(sorted(out))
    return rounds


def greedy_blocks(csp: CspInstance, kind: str) -> list[list[int]]:
    """Variable-disjoint blocks of the clauses of one kind, by greedy colouring
    in clause-index order."""
    blocks: list[list[int]] = []
    used: list[set[int]] = []
    for ci, c in enumerate(csp.clauses):
        if c.kind != kind:
            continue
        vs = set(c.vars)
        for b, u in zip(blocks, used):
            if not (u & vs):
                b.append(ci)
                u |= vs
                break
        else:
            blocks.append([ci])
            used.append(set(vs))
    return blocks


@dataclass
class ProtocolParams:
    copies_per_side: int = 1
    test_weights: tuple = (Fraction(1, 4),) * 4
    repetitions: int = 1
    matching_family: list = field(default_factory=list)
    clause_blocks: dict = field(default_factory=dict)
    kind_weights: dict = field(default_factory=dict)

    def __post_init__(self):
        w = tuple(self.test_weights)
        if len(w) != 4 or any(v < 0 for v in w) or abs(sum(w) - 1) > 1e-12:
            raise ConfigurationError("test_weights must be 4 nonnegative numbers summing to 1")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        if self.copies_per_side < 1:
            raise ConfigurationError("copies_per_side must be >= 1")

    @property
    def registers(self) -> int:
        return 2 * self.copies_per_side

    def validate(self, csp: CspInstance) -> None:
        seen = []
        for kind, blocks in self.clause_blocks.items():
            for b in blocks:
                vs: set[int] = set()
                for ci in b:
                    c = csp.clauses[ci]
                    if c.kind != kind:
                        raise ConfigurationError(f"clause {ci} is not of kind {kind}")
                    if vs & set(c.vars):
                        raise ConfigurationError(f"block {b} is not variable-disjoint")
                    vs |= set(c.vars)
                seen.extend(b)
        if sorted(seen) != list(range(csp.m)):
            raise ConfigurationError("blocks must partition the clauses")
        N = csp.nvars
        for M in self.matching_family:
            covered = sorted(v for p in M for v in p if v >= 0)
            if covered != list(range(N)):
                raise ConfigurationError("each matching must cover every index once")

    def clause_weights(self, csp: CspInstance) -> dict[int, float]:
        """Probability that a register is tested against clause ``C``
        (kind chosen by ``kind_weights``, then a uniform block)."""
        out = {}
        for kind, blocks in self.clause_blocks.items():
            if not blocks:
                continue
            w = self.kind_weights.get(kind, 0)
            for b in blocks:
                for ci in b:
                    out[ci] = w / len(blocks)
        return out


def make_params(
    csp: CspInstance,
    copies: int = 1,
    weights: Sequence = (Fraction(1, 4),) * 4,
    reps: int = 1,
) -> ProtocolParams:
    blocks = {TWO_OF_FOUR: greedy_blocks(csp, TWO_OF_FOUR), EQ: greedy_blocks(csp, EQ)}
    present = [k for k in (TWO_OF_FOUR, EQ) if blocks[k]]
    kw = {k: Fraction(1, len(present)) for k in present}
    p = ProtocolParams(copies, tuple(weights), reps, round_robin_matchings(csp.nvars), blocks, kw)
    p.validate(csp)
    return p


# ---------------------------------------------------------------------------
# reports


@dataclass
class AcceptReport:
    per_test: dict[str, float]
    total: float
    path: str
    weights: tuple
    repetitions: int

    def single_round(self) -> float:
        return sum(float(w) * self.per_test[t] for w, t in zip(self.weights, TEST_NAMES))

    def consistent(self, tol: float = 1e-12) -> bool:
        inr = all(-1e-9 <= v <= 1 + 1e-9 for v in self.per_test.values())
        return inr and abs(self.single_round() ** self.repetitions - self.total) <= tol

    def as_dict(self) -> dict:
        return {
            "per_test": {k: float(v) for k, v in self.per_test.items()},
            "total": float(self.total),
            "path": self.path,
            "weights": [str(w) for w in self.weights],
            "repetitions": self.repetitions,
        }


# ---------------------------------------------------------------------------
# witness handling


class _Witness:
    """Normalised view of the supported witness kinds."""

    def __init__(self, witness, N: int, R: int, path: str, cap: int):
        self.N, self.R, self.path = N, R, path
        self.pe = witness if isinstance(witness, PseudoExpectation) else None
        self.x = None
        self.vec = None
        self.rho = None
        if isinstance(witness, DensityMatrix):
            self.rho = witness.entries
            return
        if self.pe is None:
            arr = np.asarray(witness)
            if arr.ndim == 1 and arr.shape[0] == N and np.all(np.abs(arr) == 1):
                self.x = arr.astype(np.int64)
            elif arr.ndim == 1 and arr.shape[0] == N**R:
                self.vec = arr.astype(complex)
            elif arr.ndim == 2:
                self.rho = arr
            else:
                raise ConfigurationError("witness must be an assignment, state vector, density matrix or pe")
        if self.pe is not None and self.pe.nvars != N:
            raise ConfigurationError("pe variable count does not match the CSP")
        if path == "matrix":
            if self.pe is not None:
                self.rho = moment_state(self.pe, R, cap).entries
            elif self.x is not None:
                self.vec = honest_witness(self.x, R, cap).amplitudes

    def poly_value(self, f: MultilinearPoly) -> float:
        if self.pe is not None:
            return float(pe_eval(self.pe, f))
        if self.x is not None:
            return float(f.evaluate(self.x))
        raise ConfigurationError("polynomial path needs an assignment or a pe witness")

    def apply_local(self, op: np.ndarray) -> float:
        """``tr(op^{tensor R} rho)`` or ``<v|op^{tensor R}|v>``."""
        N, R = self.N, self.R
        if self.vec is not None:
            T = self.vec.reshape((N,) * R)
            U = T
            for ax in range(R):
                U = np.moveaxis(np.tensordot(op, U, axes=([1], [ax])), 0, ax)
            return float(np.real(np.vdot(T.reshape(-1), U.reshape(-1))))
        T = self.rho.reshape((N,) * (2 * R))
        for ax in range(R):
            T = np.moveaxis(np.tensordot(op, T, axes=([1], [ax])), 0, ax)
        return float(np.real(np.trace(T.reshape(N**R, N**R))))

    def perm_expect(self, perm: Sequence[int]) -> float:
        """``tr(P_perm rho)``."""
        N, R = self.N, self.R
        if self.vec is not None:
            T = self.vec.reshape((N,) * R)
            return float(np.real(np.vdot(T.reshape(-1), np.transpose(T, perm).reshape(-1))))
        T = self.rho.reshape((N,) * (2 * R))
        axes = list(perm) + list(range(R, 2 * R))
        return float(np.real(np.trace(np.transpose(T, axes).reshape(N**R, N**R))))

    def outcome_probs(self, B: np.ndarray) -> np.ndarray:
        """Joint outcome distribution when every register is measured in the
        orthonormal basis given by the columns of ``B``."""
        N, R = self.N, self.R
        if self.vec is not None:
            T = self.vec.reshape((N,) * R)
            for ax in range(R):
                T = np.moveaxis(np.tensordot(B.conj().T, T, axes=([1], [ax])), 0, ax)
            return np.abs(T) ** 2
        T = self.rho.reshape((N,) * (2 * R))
        for ax in range(R):
            T = np.moveaxis(np.tensordot(B.conj().T, T, axes=([1], [ax])), 0, ax)
            T = np.moveaxis(np.tensordot(B.T, T, axes=([1], [R + ax])), 0, R + ax)
        D = N**R
        return np.real(np.diagonal(T.reshape(D, D))).reshape((N,) * R)


# ---------------------------------------------------------------------------
# tests 1 and 2


def _side_perms(c: int):
    return list(itertools.permutations(range(c)))


def product_sym_accept(witness, params: ProtocolParams, N: int, path: str = "matrix", cap: int = DEFAULT_DIM_CAP):
    """``(product, symmetry)`` acceptance probabilities.

    Product test: projector onto ``Sym^2`` of every pair ``A_i B_i``.
    Symmetry test: projector onto ``Sym^c`` of each side.
    """
    c = params.copies_per_side
    R = 2 * c
    w = witness if isinstance(witness, _Witness) else _Witness(witness, N, R, path, cap)
    if path == "polynomial":
        norm = MultilinearPoly(N)
        for i in range(N):
            xi = MultilinearPoly.var(N, i)
            norm = norm + xi * xi * Fraction(1, N)
        # on a product of identical states every permutation operator has
        # expectation <psi|psi>^R, so both projectors average to that
        v = w.poly_value(norm**R)
        return v, v
    prod = 0.0
    for T in itertools.product((0, 1), repeat=c):
        perm = list(range(R))
        for i, t in enumerate(T):
            if t:
                perm[i], perm[c + i] = c + i, i
        prod += w.perm_expect(perm)
    prod /= 2**c
    sym = 0.0
    sp = _side_perms(c)
    for pa, pb in itertools.product(sp, sp):
        perm = list(pa) + [c + v for v in pb]
        sym += w.perm_expect(perm)
    sym /= len(sp) ** 2
    return prod, sym


# ---------------------------------------------------------------------------
# test 3


def _matching_basis(N: int, M) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Columns: ``(|i>+|j>)/sqrt2`` and ``(|i>-|j>)/sqrt2`` per pair, ``|u>`` for
    an unmatched index.  Returns the basis, pair id and sign per column."""
    B = np.zeros((N, N))
    pid = np.zeros(N, dtype=np.int64)
    sgn = np.zeros(N, dtype=np.int64)
    col = 0
    s2 = 1 / math.sqrt(2)
    for p, (i, j) in enumerate(M):
        if j < 0:
            B[i, col] = 1.0
            pid[col], sgn[col] = p, 0
            col += 1
            continue
        B[i, col], B[j, col] = s2, s2
        pid[col], sgn[col] = p, 1
        col += 1
        B[i, col], B[j, col] = s2, -s2
        pid[col], sgn[col] = p, -1
        col += 1
    return B, pid, sgn


def _accept_mask(pid: np.ndarray, sgn: np.ndarray, R: int) -> np.ndarray:
    N = pid.shape[0]
    ok = np.ones((N,) * R, dtype=bool)
    for a, b in itertools.combinations(range(R), 2):
        sa = [1] * R
        sa[a] = N
        sb = [1] * R
        sb[b] = N
        clash = (pid.reshape(sa) == pid.reshape(sb)) & (sgn.reshape(sa) * sgn.reshape(sb) == -1)
        ok &= ~clash
    return ok


def uniformity_operator(N: int, R: int, matchings) -> np.ndarray:
    """Explicit accept operator (dimension ``N^R``), averaged over matchings."""
    D = N**R
    if D > DEFAULT_DIM_CAP:
        raise ResourceLimitError(f"dimension {D} exceeds cap")
    U = np.zeros((D, D))
    for M in matchings:
        B, pid, sgn = _matching_basis(N, M)
        BR = B
        for _ in range(R - 1):
            BR = np.kron(BR, B)
        mask = _accept_mask(pid, sgn, R).reshape(-1).astype(float)
        U += (BR * mask) @ BR.T
    return U / len(matchings)


def _pair_polys(N: int, M):
    """Outcome probabilities of one register for the honest state, as
    polynomials: ``(x_i + s x_j)^2 / (2N)`` and ``x_u^2 / N``."""
    out = []
    for i, j in M:
        if j < 0:
            xi = MultilinearPoly.var(N, i)
            out.append([xi * xi * Fraction(1, N)])
        else:
            xi, xj = MultilinearPoly.var(N, i), MultilinearPoly.var(N, j)
            plus = (xi + xj) * (xi + xj) * Fraction(1, 2 * N)
            minus = (xi - xj) * (xi - xj) * Fraction(1, 2 * N)
            out.append([plus, minus])
    return out


def _occupancy_sum(N: int, polys, R: int) -> MultilinearPoly:
    """Sum over maps ``registers -> pairs`` of ``prod_p sum_s pi_{p,s}^{k_p}``,
    where ``k_p`` registers land on pair ``p`` and must share a sign.

    Equals ``R! [t^R] prod_p sum_k f_p(k) t^k / k!``; the product is built one
    pair at a time, truncated at degree ``R``.
    """
    gen = [MultilinearPoly.const(N, 1)] + [MultilinearPoly.const(N, 0)] * R
    for ps in polys:
        f = [MultilinearPoly.const(N, 1)]
        for k in range(1, R + 1):
            f.append(sum((q**k for q in ps), MultilinearPoly.const(N, 0)) * Fraction(1, math.factorial(k)))
        new = [MultilinearPoly.const(N, 0)] * (R + 1)
        for a in range(R + 1):
            if gen[a].is_zero():
                continue
            for k in range(R + 1 - a):
                new[a + k] = new[a + k] + gen[a] * f[k]
        gen = new
    return gen[R] * math.factorial(R)


def uniformity_accept(witness, params: ProtocolParams, N: int, path: str = "matrix", cap: int = DEFAULT_DIM_CAP) -> float:
    """Average over the matching family of Pr[no register pair reports the
    same matched pair with opposite signs]."""
    fam = params.matching_family
    if not fam:
        raise ConfigurationError("matching family is empty")
    R = params.registers
    w = witness if isinstance(witness, _Witness) else _Witness(witness, N, R, path, cap)
    if path == "polynomial":
        total = MultilinearPoly.const(N, 0)
        for M in fam:
            polys = _pair_polys(N, M)
            acc = _occupancy_sum(N, polys, R)
            total = total + acc
        return w.poly_value(total * Fraction(1, len(fam)))
    val = 0.0
    for M in fam:
        B, pid, sgn = _matching_basis(N, M)
        probs = w.outcome_probs(B)
        val += float(np.sum(probs[_accept_mask(pid, sgn, R)]))
    return val / len(fam)


# ---------------------------------------------------------------------------
# test 4


def clause_vector(csp: CspInstance, ci: int) -> np.ndarray:
    """``|C> = (1/2) sum_l s_l |v_l>`` for 2-out-of-4 and
    ``(s_a|a> - s_b|b>)/sqrt2`` for EQ."""
    c = csp.clauses[ci]
    v = np.zeros(csp.nvars)
    if c.kind == TWO_OF_FOUR:
        for idx, s in c.lits:
            v[idx] = 0.5 * s
    else:
        (a, sa), (b, sb) = c.lits
        v[a], v[b] = sa / math.sqrt(2), -sb / math.sqrt(2)
    return v


def satisfiability_operator(csp: CspInstance, params: ProtocolParams) -> np.ndarray:
    """Single-register accept operator ``I - sum_C w_C |C><C|``."""
    N = csp.nvars
    A = np.eye(N)
    for ci, wc in params.clause_weights(csp).items():
        v = clause_vector(csp, ci)
        A -= float(wc) * np.outer(v, v)
    return A


def _sat_register_poly(csp: CspInstance, params: ProtocolParams) -> MultilinearPoly:
    """``1 - sum_C w_C <C|psi_x>^2`` with ``<C|psi_x>^2 = (1/4N)(sum s x)^2`` or
    ``(1/2N)(s_a x_a - s_b x_b)^2``."""
    N = csp.nvars
    f = MultilinearPoly.const(N, 1)
    for ci, wc in params.clause_weights(csp).items():
        c = csp.clauses[ci]
        if c.kind == TWO_OF_FOUR:
            S = MultilinearPoly(N, {1 << v: s for v, s in c.lits})
            f = f - S * S * (Fraction(wc) * Fraction(1, 4 * N))
        else:
            (a, sa), (b, sb) = c.lits
            d = MultilinearPoly(N, {1 << a: sa}) - MultilinearPoly(N, {1 << b: sb})
            f = f - d * d * (Fraction(wc) * Fraction(1, 2 * N))
    return f


def satisfiability_accept(csp: CspInstance, witness, params: ProtocolParams, path: str = "matrix", cap: int = DEFAULT_DIM_CAP) -> float:
    """Every register picks a clause kind and a block, measures the block's
    clause-span POVM and rejects on the outcome ``|C>``."""
    params.validate(csp)
    N, R = csp.nvars, params.registers
    w = witness if isinstance(witness, _Witness) else _Witness(witness, N, R, path, cap)
    if path == "polynomial":
        return w.poly_value(_sat_register_poly(csp, params) ** R)
    return w.apply_local(satisfiability_operator(csp, params))


# ---------------------------------------------------------------------------


def accept_probability(
    csp: CspInstance,
    witness,
    params: ProtocolParams,
    path: str = "matrix",
    cap: int = DEFAULT_DIM_CAP,
) -> AcceptReport:
    """Weighted mixture of the four tests, raised to the repetition count.

    ``witness`` may be a ±1 assignment of the CSP variables (honest witness
    ``|psi_x>^{2c}``), a pseudo-expectation (state ``rho~ = E~[|psi_x><psi_x|^{2}]``),
    a state vector or a density matrix on ``2c`` registers (matrix path only).
    """
    if path not in ("matrix", "polynomial"):
        raise ValueError("path must be 'matrix' or 'polynomial'")
    N, R = csp.nvars, params.registers
    if isinstance(witness, PseudoExpectation) and witness.degree < 2 * R:
        raise DegreeError(f"pe degree {witness.degree} < {2 * R} needed for {R} registers")
    w = _Witness(witness, N, R, path, cap)
    prod, sym = product_sym_accept(w, params, N, path)
    unif = uniformity_accept(w, params, N, path)
    sat = satisfiability_accept(csp, w, params, path)
    per = dict(zip(TEST_NAMES, (prod, sym, unif, sat)))
    single = sum(float(wt) * per[t] for wt, t in zip(params.test_weights, TEST_NAMES))
    return AcceptReport(per, single**params.repetitions, path, tuple(params.test_weights), params.repetitions)


def honest_sweep(csp: CspInstance, params: ProtocolParams, method: str = "ve", cap: int = 24):
    """Exact maximum of the acceptance probability over honest witnesses
    ``|psi_y>`` with ``y in {+1,-1}^N``.

    On honest witnesses tests 1-3 accept with certainty and test 4 accepts
    with ``(1 - Q(y))^{2c}`` where ``Q(y) = sum_C w_C <C|psi_y>^2`` is a sum of
    clause-local terms, so maximising amounts to minimising ``Q`` exactly
    (variable elimination, or enumeration with ``method="brute"``).
    Returns ``(max probability, argmax)``.
    """
    params.validate(csp)
    N = csp.nvars
    factors = []
    for ci, wc in params.clause_weights(csp).items():
        c = csp.clauses[ci]
        vs = c.vars
        tab = np.zeros((2,) * len(vs))
        for idx in np.ndindex(*tab.shape):
            vals = [s * (1 if b == 0 else -1) for (v, s), b in zip(c.lits, idx)]
            if c.kind == TWO_OF_FOUR:
                q = sum(vals) ** 2 / (4 * N)
            else:
                q = (vals[0] - vals[1]) ** 2 / (2 * N)
            tab[idx] = -float(wc) * q
        factors.append((vs, tab))
    if method == "brute":
        if N > cap:
            raise ResourceLimitError(f"{N} variables exceeds brute-force cap {cap}")
        negq, y = brute_force_max(N, factors, cap)
    elif method == "ve":
        negq, y = exact_max(N, factors)
    else:
        raise ValueError(f"unknown method {method!r}")
    s = 1.0 + float(negq)
    R = params.registers
    per = {"product": 1.0, "symmetry": 1.0, "uniformity": 1.0, "satisfiability": s**R}
    single = sum(float(wt) * per[t] for wt, t in zip(params.test_weights, TEST_NAMES))
    return single**params.repetitions, y


# ---------------------------------------------------------------------------
# h_Sep and the 2->4 norm


@dataclass
class SeesawResult:
    value: float
    x: np.ndarray
    y: np.ndarray
    history: list[float]


def _top_vec(H: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh((H + H.conj().T) / 2)
    return V[:, -1]


def hsep_seesaw(
    M: np.ndarray,
    dims: tuple[int, int],
    restarts: int = 20,
    iters: int = 200,
    seed: int = 0,
    tol: float = 1e-9,
    check: bool = True,
) -> SeesawResult:
    """Lower bound on ``max <x,y|M|x,y>`` over unit product vectors.

    Alternates: fix ``y`` and take ``x`` as the top eigenvector of the
    contracted operator, then swap roles.  Each step cannot decrease the
    value.  Best over ``restarts`` random complex starts.
    """
    d1, d2 = dims
    M = np.asarray(M, dtype=complex)
    if M.shape != (d1 * d2, d1 * d2):
        raise InvalidMeasurementError("M shape does not match dims")
    if check:
        if np.max(np.abs(M - M.conj().T)) > tol:
            raise InvalidMeasurementError("M is not Hermitian")
        ev = np.linalg.eigvalsh((M + M.conj().T) / 2)
        if ev[0] < -tol or ev[-1] > 1 + tol:
            raise InvalidMeasurementError(f"M not within [0, I]: spectrum [{ev[0]:.3g}, {ev[-1]:.3g}]")
    T = M.reshape(d1, d2, d1, d2)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        y = rng.normal(size=d2) + 1j * rng.normal(size=d2)
        y /= np.linalg.norm(y)
        hist = []
        x = None
        for _ in range(iters):
            Mx = np.einsum("k,ikjl,l->ij", y.conj(), T, y)
            x = _top_vec(Mx)
            My = np.einsum("i,ikjl,j->kl", x.conj(), T, x)
            y = _top_vec(My)
            val = float(np.real(np.einsum("i,k,ikjl,j,l->", x.conj(), y.conj(), T, x, y)))
            hist.append(val)
            if len(hist) > 2 and abs(hist[-1] - hist[-2]) < 1e-15:
                break
        if best is None or hist[-1] > best.value:
            best = SeesawResult(hist[-1], x, y, hist)
    return best


def two_to_four_bridge(A: np.ndarray) -> np.ndarray:
    """``M_{(i,k),(j,l)} = sum_a A_{ai} A_{aj} A_{ak} A_{al}``.

    ``<x,y|M|x,y> = sum_a |<a,x>|^2 |<a,y>|^2`` with ``a`` ranging over rows,
    so ``h_Sep(M) = ||A||_{2->4}^4``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    q = A.shape[1]
    T = np.einsum("ai,aj,ak,al->ikjl", A, A, A, A)
    return T.reshape(q * q, q * q)


def _sphere_grid(q: int, res: int) -> np.ndarray:
    if q == 1:
        return np.array([[1.0]])
    angles = [np.linspace(0, np.pi, res, endpoint=True)] * (q - 2) + [np.linspace(0, 2 * np.pi, 2 * res, endpoint=False)]
    grids = np.meshgrid(*angles, indexing="ij")
    phis = [g.reshape(-1) for g in grids]
    pts = np.ones((phis[0].shape[0], q))
    s = np.ones(phis[0].shape[0])
    for t, ph in enumerate(phis):
        pts[:, t] = s * np.cos(ph)
        s = s * np.sin(ph)
    pts[:, q - 1] = s
    return pts


def norm24_grid(A: np.ndarray, res: int | None = None, polish: int = 8) -> tuple[float, np.ndarray]:
    """``||A||_{2->4}^4`` by a dense grid on the real unit sphere followed by
    fixed-point polishing of the best grid points.  Real vectors suffice for
    real ``A``."""
    A = np.asarray(A, dtype=float)
    q = A.shape[1]
    res = res or {1: 1, 2: 720, 3: 160, 4: 48}.get(q, 24)
    P = _sphere_grid(q, res)
    vals = np.sum((P @ A.T) ** 4, axis=1)
    best_val, best_x = -1.0, None
    for idx in np.argsort(vals)[::-1][:polish]:
        x = P[idx].copy()
        for _ in range(2000):
            g = A.T @ ((A @ x) ** 3)
            nx_ = g / np.linalg.norm(g) if np.linalg.norm(g) > 0 else x
            if np.linalg.norm(nx_ - x) < 1e-14:
                x = nx_
                break
            x = nx_
        v = float(np.sum((A @ x) ** 4))
        v = max(v, float(vals[idx]))
        if v > best_val:
            best_val, best_x = v, x
    return best_val, best_x


def norm24_bridge(A: np.ndarray, restarts: int = 20, iters: int = 300, seed: int = 0) -> float:
    """Seesaw estimate of ``h_Sep(M)`` for the bridge ``M``, rescaled so the
    seesaw sees ``M / ||M||`` inside ``[0, I]``."""
    M = two_to_four_bridge(A)
    q = np.asarray(A).shape[1]
    scale = float(np.linalg.eigvalsh(M)[-1])
    if scale <= 0:
        return 0.0
    res = hsep_seesaw(M / scale, (q, q), restarts, iters, seed)
    return res.value * scale
