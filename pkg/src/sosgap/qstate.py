"""Dense tensor-space linear algebra for witness and moment states.

Index order: subsystem 0 is the most significant digit and matrices are
row-major, so a basis state ``|i_0 i_1 ... i_{r-1}>`` of ``r`` qudits of
dimension ``n`` has flat index ``sum_t i_t n^(r-1-t)``.
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegreeError, ResourceLimitError
from .pseudoexp import PseudoExpectation, psd_tolerance

__all__ = [
    "HilbertShape",
    "PureState",
    "DensityMatrix",
    "DpsReport",
    "DEFAULT_DIM_CAP",
    "honest_witness",
    "moment_state",
    "mixture_state",
    "partial_trace",
    "partial_transpose",
    "permute_subsystems",
    "sym_projector",
    "dps_certificate",
    "save_matrix",
    "load_matrix",
]

DEFAULT_DIM_CAP = 2**14


@dataclass(frozen=True)
class HilbertShape:
    local_dim: int
    num_subsystems: int

    def __post_init__(self):
        if self.local_dim < 2:
            raise ValueError("local_dim must be >= 2")
        if self.num_subsystems < 0:
            raise ValueError("num_subsystems must be >= 0")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.local_dim,) * self.num_subsystems

    @property
    def total(self) -> int:
        return self.local_dim**self.num_subsystems

    def check_cap(self, cap: int = DEFAULT_DIM_CAP) -> None:
        if self.total > cap:
            raise ResourceLimitError(f"dimension {self.total} exceeds cap {cap}")


@dataclass
class PureState:
    shape: HilbertShape
    amplitudes: np.ndarray

    def density(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(self.shape, np.outer(v, v.conj()))


@dataclass
class DensityMatrix:
    shape: HilbertShape
    entries: np.ndarray

    @property
    def dims(self) -> tuple[int, ...]:
        return self.shape.dims

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(_herm(self.entries))[0])

    def hermiticity_residual(self) -> float:
        E = self.entries
        return float(np.max(np.abs(E - E.conj().T))) if E.size else 0.0

    def invariant_residuals(self) -> dict[str, float]:
        return {
            "hermitian": self.hermiticity_residual(),
            "trace": float(abs(self.trace() - 1)),
            "min_eig": self.min_eig(),
        }


def _herm(M: np.ndarray) -> np.ndarray:
    return (M + M.conj().T) / 2


# ---------------------------------------------------------------------------


def honest_witness(x, copies: int, cap: int = DEFAULT_DIM_CAP) -> PureState:
    """``((1/sqrt n) sum_i x_i |i>)^{tensor c}``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    shape = HilbertShape(n, copies)
    shape.check_cap(cap)
    v1 = x / math.sqrt(n)
    v = np.ones(1)
    for _ in range(copies):
        v = np.kron(v, v1)
    return PureState(shape, v.astype(complex))


def _register_masks(n: int, r: int) -> np.ndarray:
    """Parity mask of each basis tuple: XOR of ``1 << i_t``."""
    one = np.array([1 << i for i in range(n)], dtype=np.uint64)
    m = np.zeros(1, dtype=np.uint64)
    for _ in range(r):
        m = (m[:, None] ^ one[None, :]).reshape(-1)
    return m


def moment_state(pe: PseudoExpectation, registers: int, cap: int = DEFAULT_DIM_CAP) -> DensityMatrix:
    """``rho[(I), (J)] = E[x_I x_J] / n^r``; real symmetric."""
    n, r = pe.nvars, registers
    if 2 * r > pe.degree:
        raise DegreeError(f"{r} registers need pe degree {2 * r}, have {pe.degree}")
    if r == 0:
        return DensityMatrix(HilbertShape(max(n, 2), 0), np.ones((1, 1)))
    shape = HilbertShape(n, r)
    shape.check_cap(cap)
    if n > 63:
        raise ResourceLimitError("moment_state supports at most 63 variables")
    masks = _register_masks(n, r)
    keys, vals = pe._lookup_arrays()
    x = masks[:, None] ^ masks[None, :]
    pos = np.minimum(np.searchsorted(keys, x), len(keys) - 1)
    rho = np.where(keys[pos] == x, vals[pos], 0.0) / float(n) ** r
    return DensityMatrix(shape, rho)


def mixture_state(states: Sequence[PureState], probs: Sequence[float]) -> DensityMatrix:
    rho = sum(p * np.outer(s.amplitudes, s.amplitudes.conj()) for s, p in zip(states, probs))
    return DensityMatrix(states[0].shape, rho)


# ---------------------------------------------------------------------------
# partial operations on arbitrary dims


def _as_tensor(M: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    return M.reshape(tuple(dims) + tuple(dims))


def partial_trace(rho, keep: Sequence[int], dims: Sequence[int] | None = None) -> np.ndarray:
    """Trace out every subsystem not in ``keep`` (kept in increasing order).

    An empty ``keep`` returns the scalar trace as a 1x1 matrix.
    """
    M, dims = _unwrap(rho, dims)
    r = len(dims)
    keep = sorted(set(keep))
    if any(k < 0 or k >= r for k in keep):
        raise ValueError("keep must index existing subsystems")
    T = _as_tensor(M, dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    upper = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if r > 26:
        raise ValueError("too many subsystems")
    row = [letters[t] for t in range(r)]
    col = [letters[t] if t not in keep else upper[t] for t in range(r)]
    out = [letters[t] for t in keep] + [upper[t] for t in keep]
    res = np.einsum("".join(row) + "".join(col) + "->" + "".join(out), T)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return res.reshape(d, d)


def partial_transpose(rho, flip: Sequence[int], dims: Sequence[int] | None = None) -> np.ndarray:
    """Swap row and column indices on the ``flip`` subsystems."""
    M, dims = _unwrap(rho, dims)
    r = len(dims)
    T = _as_tensor(M, dims)
    perm = list(range(2 * r))
    for s in flip:
        perm[s], perm[r + s] = r + s, s
    return np.transpose(T, perm).reshape(M.shape)


def permute_subsystems(rho, perm: Sequence[int], dims: Sequence[int] | None = None) -> np.ndarray:
    """``P rho P^dagger`` where ``P`` sends subsystem ``perm[t]`` to slot ``t``."""
    M, dims = _unwrap(rho, dims)
    r = len(dims)
    T = _as_tensor(M, dims)
    axes = list(perm) + [r + p for p in perm]
    return np.transpose(T, axes).reshape(M.shape)


def _unwrap(rho, dims):
    if isinstance(rho, DensityMatrix):
        return rho.entries, rho.dims if dims is None else dims
    if dims is None:
        raise ValueError("dims required for a bare matrix")
    return np.asarray(rho), tuple(dims)


def sym_projector(shape: HilbertShape, cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    """``(1/r!) sum_pi P_pi`` on ``(C^n)^{tensor r}``."""
    shape.check_cap(cap)
    n, r = shape.local_dim, shape.num_subsystems
    D = shape.total
    idx = np.arange(D).reshape((n,) * r) if r else np.zeros(())
    P = np.zeros((D, D))
    perms = list(itertools.permutations(range(r)))
    for p in perms:
        src = np.transpose(idx, p).reshape(-1) if r else np.zeros(1, dtype=int)
        P[np.arange(D), src] += 1.0
    return P / len(perms)


# ---------------------------------------------------------------------------


@dataclass
class DpsReport:
    registers: int
    psd_min_eig: float
    trace_residual: float
    permutation_residual: float
    ppt_min_eigs: dict[str, float]
    reduction_residual: float
    tolerance: float
    hermitian_residual: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def ppt_min_eig(self) -> float:
        return min(self.ppt_min_eigs.values()) if self.ppt_min_eigs else 0.0

    def residuals(self) -> dict[str, float]:
        return {
            "psd": max(0.0, -self.psd_min_eig),
            "trace": self.trace_residual,
            "permutation": self.permutation_residual,
            "ppt": max(0.0, -self.ppt_min_eig),
            "reduction": self.reduction_residual,
            "hermitian": self.hermitian_residual,
        }

    @property
    def ok(self) -> bool:
        return all(v <= self.tolerance for v in self.residuals().values())

    def first_violation(self) -> str | None:
        for k, v in self.residuals().items():
            if v > self.tolerance:
                return f"{k} residual {v:.3e} (tolerance {self.tolerance:.1e})"
        return None

    def as_dict(self) -> dict:
        return {
            "registers": self.registers,
            "residuals": self.residuals(),
            "ppt_min_eigs": self.ppt_min_eigs,
            "tolerance": self.tolerance,
            "ok": self.ok,
        }


def dps_certificate(
    pe: PseudoExpectation,
    registers_per_side: int,
    level: int,
    tolerance: float = 1e-9,
    full_cuts: bool = False,
    cap: int = DEFAULT_DIM_CAP,
) -> DpsReport:
    """Certify that ``rho_x`` on ``2 k c`` registers is a symmetric PPT
    extension of the ``2c``-register state ``rho~``.

    Checks PSD, unit trace, invariance under adjacent transpositions (which
    generate every permutation), PPT across each single subsystem and the
    balanced cut (every cut with ``full_cuts``), and that tracing out the
    extra registers gives ``moment_state(pe, 2c)``.
    """
    c, k = registers_per_side, level
    R = 2 * k * c
    rho = moment_state(pe, R, cap)
    M = rho.entries
    dims = rho.dims
    herm = rho.hermiticity_residual()
    ev = float(np.linalg.eigvalsh(_herm(M))[0])
    tr = float(abs(np.trace(M) - 1))
    perm_res = 0.0
    for t in range(R - 1):
        p = list(range(R))
        p[t], p[t + 1] = p[t + 1], p[t]
        perm_res = max(perm_res, float(np.max(np.abs(permute_subsystems(M, p, dims) - M))))
    cuts: dict[str, tuple[int, ...]] = {}
    if full_cuts:
        for size in range(1, R // 2 + 1):
            for s in itertools.combinations(range(R), size):
                cuts[",".join(map(str, s))] = s
    else:
        for t in range(R):
            cuts[str(t)] = (t,)
        cuts["half"] = tuple(range(R // 2))
    # entries depend only on the multiset of row and column indices, so a
    # partial transpose usually returns the matrix itself; reuse the
    # eigenvalue in that case instead of decomposing the same matrix again
    ppt = {}
    for name, s in cuts.items():
        T = partial_transpose(M, s, dims)
        ppt[name] = ev if np.array_equal(T, M) else float(np.linalg.eigvalsh(_herm(T))[0])
    # reduction: keep the first c registers of each side's block of k c
    keep = list(range(c)) + list(range(k * c, k * c + c))
    red = partial_trace(M, keep, dims)
    target = moment_state(pe, 2 * c, cap).entries
    red_res = float(np.max(np.abs(red - target)))
    tol = max(tolerance, 0.0)
    return DpsReport(R, ev, tr, perm_res, ppt, red_res, tol, herm)


# ---------------------------------------------------------------------------
# binary matrix format: b"SGM1", uint32 rows, uint32 cols, complex128 LE data


def save_matrix(path, M: np.ndarray) -> None:
    M = np.asarray(M, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(b"SGM1")
        fh.write(struct.pack("<II", *M.shape))
        fh.write(M.tobytes(order="C"))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != b"SGM1":
            raise ValueError("not an SGM1 matrix file")
        rows, cols = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<c16")
    return data.reshape(rows, cols).copy()
