"""Oracularised 3XOR games, their classical value, and the lift of a
commutative pseudo-expectation to a non-commutative one.

A game is stored by acceptance counts: the verifier's sampling events are
enumerated with unit weight, and ``counts[q1, q2, a1, a2]`` is the number of
events that ask ``(q1, q2)`` and accept answers ``(a1, a2)``.  This keeps the
verifier's private randomness (which variable is checked, and the clause
sign when two clauses share a triple) exact without a separate table.

Answers are bit-packed: bit ``t`` of ``a1`` (resp. ``a2``) set means the
player's ``t``-th answer is ``-1``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .boolcore import DEFAULT_BRUTE_CAP, XorInstance, brute_force_opt, eval_3xor
from .errors import ConfigurationError, DegreeError, ResourceLimitError
from .pseudoexp import MultilinearPoly, PseudoExpectation, ValidityReport, psd_tolerance

__all__ = [
    "NonlocalGame",
    "NcPseudoExpectation",
    "oracularize",
    "classical_value",
    "strategy_value",
    "honest_strategy",
    "honest_game_value",
    "game_polynomial",
    "ncsos_lift",
    "nc_words",
    "nc_moment_check",
    "game_value_under_ncpe",
    "entangled_upper_bound",
]

DEFAULT_STRATEGY_CAP = 1 << 20


def _signs(k: int) -> np.ndarray:
    """Row ``a`` holds the ``k`` ±1 answers packed in ``a``."""
    a = np.arange(1 << k)
    return np.array([[1 - 2 * ((v >> t) & 1) for t in range(k)] for v in a], dtype=np.int64)


S3, S2 = _signs(3), _signs(2)


@dataclass
class NonlocalGame:
    q1_set: list[tuple[int, int, int]]
    q2_set: list[tuple[int, int]]
    counts: np.ndarray
    total: int
    nvars: int
    qcount: np.ndarray
    mix: tuple[Fraction, Fraction] | None = None
    source: XorInstance | None = None
    answer_bits: tuple[int, int] = (3, 2)

    def __post_init__(self):
        shape = (len(self.q1_set), len(self.q2_set), 1 << self.answer_bits[0], 1 << self.answer_bits[1])
        if self.counts.shape != shape:
            raise ValueError(f"counts shape {self.counts.shape} != {shape}")

    @property
    def dist(self) -> dict[tuple[int, int], Fraction]:
        return {
            (i, j): Fraction(int(c), self.total)
            for (i, j), c in np.ndenumerate(self.qcount)
            if c
        }

    def predicate(self, q1: int, q2: int, a1: int, a2: int) -> Fraction:
        """Acceptance probability given the questions and answers.  It is 0 or
        1 unless the verifier's private randomness matters."""
        n = int(self.qcount[q1, q2])
        if n == 0:
            raise ValueError("question pair has probability 0")
        return Fraction(int(self.counts[q1, q2, a1, a2]), n)

    def to_json(self) -> str:
        nz = np.argwhere(self.counts)
        return json.dumps(
            {
                "nvars": self.nvars,
                "q1_set": [list(q) for q in self.q1_set],
                "q2_set": [list(q) for q in self.q2_set],
                "total": self.total,
                "mix": None if self.mix is None else [str(v) for v in self.mix],
                "dist": [[i, j, int(c)] for (i, j), c in np.ndenumerate(self.qcount) if c],
                "counts": [[*map(int, idx), int(self.counts[tuple(idx)])] for idx in nz],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "NonlocalGame":
        d = json.loads(text)
        q1 = [tuple(q) for q in d["q1_set"]]
        q2 = [tuple(q) for q in d["q2_set"]]
        counts = np.zeros((len(q1), len(q2), 8, 4), dtype=np.int64)
        for i, j, a, b, c in d["counts"]:
            counts[i, j, a, b] = c
        mix = None if d["mix"] is None else tuple(Fraction(v) for v in d["mix"])
        qc = np.zeros((len(q1), len(q2)), dtype=np.int64)
        for i, j, c in d["dist"]:
            qc[i, j] = c
        return cls(q1, q2, counts, int(d["total"]), int(d["nvars"]), qc, mix)


def oracularize(inst: XorInstance, mix: Sequence | None = None) -> NonlocalGame:
    """Two-prover game from a 3XOR instance.

    Two clauses ``c, c'`` are drawn uniformly; player 1 gets the variables of
    ``c``, player 2 gets ``(i_j, i'_p)`` or ``(i'_p, i_j)`` with ``j, p`` uniform
    in ``{0,1,2}`` and both orders equally likely.  By default the verifier
    accepts iff player 1's answers satisfy ``c`` and both players agree on
    ``i_j``.  With ``mix=(alpha, beta)`` it instead runs only the simulation
    check with probability ``alpha`` and only the consistency check with
    probability ``beta``.
    """
    if mix is not None:
        alpha, beta = Fraction(mix[0]), Fraction(mix[1])
        if alpha < 0 or beta < 0 or alpha + beta != 1:
            raise ConfigurationError("mix weights must be nonnegative and sum to 1")
        den = alpha.denominator * beta.denominator
        wa, wb = int(alpha * den), int(beta * den)
    else:
        den, wa, wb = 1, 0, 0
    triples = [tuple(c.vars) for c in inst.clauses]
    q1_set = sorted(set(triples))
    q1_idx = {q: i for i, q in enumerate(q1_set)}
    pairs = set()
    for t in triples:
        for t2 in triples:
            for u in t:
                for v in t2:
                    pairs.add((u, v))
                    pairs.add((v, u))
    q2_set = sorted(pairs)
    q2_idx = {q: i for i, q in enumerate(q2_set)}
    counts = np.zeros((len(q1_set), len(q2_set), 8, 4), dtype=np.int64)
    qcount = np.zeros((len(q1_set), len(q2_set)), dtype=np.int64)
    prod3 = S3.prod(axis=1)
    for c in inst.clauses:
        q1 = q1_idx[tuple(c.vars)]
        sim = (prod3 == c.rhs).astype(np.int64)[:, None]
        for c2 in inst.clauses:
            for j in range(3):
                u = c.vars[j]
                for v in c2.vars:
                    for slot in (0, 1):
                        q2 = q2_idx[(u, v) if slot == 0 else (v, u)]
                        cons = (S3[:, j][:, None] == S2[:, slot][None, :]).astype(np.int64)
                        if mix is None:
                            counts[q1, q2] += sim * cons
                        else:
                            counts[q1, q2] += wa * sim + wb * cons
                        qcount[q1, q2] += den
    total = int(qcount.sum())
    return NonlocalGame(q1_set, q2_set, counts, total, inst.n, qcount, None if mix is None else (alpha, beta), inst)


# ---------------------------------------------------------------------------
# classical value


def strategy_value(game: NonlocalGame, s1: Sequence[int], s2: Sequence[int]) -> Fraction:
    """Winning probability of deterministic strategies ``q -> packed answer``."""
    s1 = np.asarray(s1)
    s2 = np.asarray(s2)
    i = np.arange(len(game.q1_set))[:, None]
    j = np.arange(len(game.q2_set))[None, :]
    wins = game.counts[i, j, s1[:, None], s2[None, :]].sum()
    return Fraction(int(wins), game.total)


def _pack(signs) -> int:
    return sum(1 << t for t, s in enumerate(signs) if s == -1)


def honest_strategy(game: NonlocalGame, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x)
    s1 = np.array([_pack([x[v] for v in q]) for q in game.q1_set])
    s2 = np.array([_pack([x[v] for v in q]) for q in game.q2_set])
    return s1, s2


def classical_value(
    game: NonlocalGame,
    method: str = "best-response",
    cap: int = DEFAULT_STRATEGY_CAP,
) -> tuple[Fraction, tuple[np.ndarray, np.ndarray]]:
    """Exact classical value and an optimal deterministic strategy pair.

    ``best-response`` enumerates the strategies of the player with fewer of
    them and answers each question of the other player independently (the
    objective decomposes over that player's questions).  ``exhaustive``
    enumerates both players and is only for tiny games.
    """
    Q1, Q2 = len(game.q1_set), len(game.q2_set)
    W = game.counts
    if method == "exhaustive":
        if 8**Q1 * 4**Q2 > cap:
            raise ResourceLimitError(f"{8**Q1 * 4**Q2} strategy pairs exceed cap {cap}")
        best, arg = -1, None
        for s1 in itertools.product(range(8), repeat=Q1):
            for s2 in itertools.product(range(4), repeat=Q2):
                v = strategy_value(game, s1, s2)
                if v > best:
                    best, arg = v, (np.array(s1), np.array(s2))
        return best, arg
    if method != "best-response":
        raise ValueError(f"unknown method {method!r}")
    if 8**Q1 <= 4**Q2:
        enum_side, n_enum, n_ans = 1, Q1, 8
        T = W.transpose(0, 2, 1, 3)  # (q1, a1, q2, a2): free side is q2
    else:
        enum_side, n_enum, n_ans = 2, Q2, 4
        T = W.transpose(1, 3, 0, 2)  # (q2, a2, q1, a1)
    if n_ans**n_enum > cap:
        raise ResourceLimitError(f"{n_ans**n_enum} strategies exceed cap {cap}")
    best, arg = -1, None
    chunk = 4096
    all_strats = itertools.product(range(n_ans), repeat=n_enum)
    qs = np.arange(n_enum)
    while True:
        block = np.array(list(itertools.islice(all_strats, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        # S[s, q_free, a_free] = sum_q T[q, s(q), q_free, a_free]
        S = T[qs[None, :], block].sum(axis=1)
        vals = S.max(axis=2).sum(axis=1)
        k = int(np.argmax(vals))
        if vals[k] > best:
            best = int(vals[k])
            resp = S[k].argmax(axis=1)
            arg = (block[k].copy(), resp) if enum_side == 1 else (resp, block[k].copy())
    return Fraction(best, game.total), arg


def honest_game_value(game: NonlocalGame, x) -> Fraction:
    """``alpha * Phi(x) + beta`` with ``Phi`` the satisfied clause fraction of
    the source instance; ``(alpha, beta) = (1, 0)`` for the conjunctive game.

    Under honest play the consistency check always passes, so this equals
    the winning probability of :func:`honest_strategy`.
    """
    if game.source is None:
        raise ConfigurationError("game has no source instance")
    alpha, beta = game.mix if game.mix is not None else (Fraction(1), Fraction(0))
    return alpha * eval_3xor(game.source, x) + beta


# ---------------------------------------------------------------------------
# non-commutative lift


@dataclass
class NcPseudoExpectation:
    """``E'[w]`` for words ``w`` over tagged letters ``(player, i)`` standing
    for observables ``C_i`` with ``C_i^2 = I``.

    Letters of different players commute; within the lift all letters
    commute and a word reduces to the parity of its letters, so the value
    is read from the commutative table.
    """

    nvars: int
    degree: int
    table: dict[int, float] = field(default_factory=dict)

    @staticmethod
    def canonical(word) -> tuple:
        """Sort letters inside each player block and cancel pairs."""
        letters = [(0, w) if isinstance(w, (int, np.integer)) else tuple(w) for w in word]
        out = []
        for p in sorted({p for p, _ in letters}):
            cnt: dict[int, int] = {}
            for q, i in letters:
                if q == p:
                    cnt[i] = cnt.get(i, 0) ^ 1
            out.extend((p, i) for i in sorted(cnt) if cnt[i])
        return tuple(out)

    @staticmethod
    def mask(word) -> int:
        m = 0
        for w in word:
            i = w if isinstance(w, (int, np.integer)) else w[1]
            m ^= 1 << int(i)
        return m

    def __getitem__(self, word) -> float:
        m = self.mask(word)
        if m.bit_count() > self.degree:
            raise DegreeError(f"word reduces to degree {m.bit_count()} > {self.degree}")
        return self.table.get(m, 0)


def ncsos_lift(pe: PseudoExpectation) -> NcPseudoExpectation:
    """``E'[C_{i_1} ... C_{i_k}] = E[x_{i_1} ... x_{i_k}]``."""
    return NcPseudoExpectation(pe.nvars, pe.degree, dict(pe.table))


def nc_words(nvars: int, length: int, players: int = 2) -> list[tuple]:
    """Words of at most ``length`` tagged letters with no letter repeated
    adjacently, in length-then-lex order."""
    letters = [(p, i) for p in range(players) for i in range(nvars)]
    words: list[tuple] = [()]
    frontier: list[tuple] = [()]
    for _ in range(length):
        nxt = []
        for w in frontier:
            for a in letters:
                if not w or w[-1] != a:
                    nxt.append(w + (a,))
        words.extend(nxt)
        frontier = nxt
    return words


def nc_moment_check(ncpe: NcPseudoExpectation, level: int, cap: int = 4096) -> ValidityReport:
    """PSD test of ``M[u, v] = E'[u^dagger v]`` over words of length
    ``<= level``, and of every cross-player commutator on the same words."""
    if 2 * level > ncpe.degree:
        raise DegreeError(f"level {level} needs degree {2 * level}, have {ncpe.degree}")
    n = ncpe.nvars
    words = nc_words(n, level)
    if len(words) > cap:
        raise ResourceLimitError(f"{len(words)} words exceed cap {cap}")
    masks = np.array([NcPseudoExpectation.mask(w) for w in words], dtype=np.int64)
    lens = np.array([len(w) for w in words])
    X = masks[:, None] ^ masks[None, :]
    vals = np.vectorize(lambda m: float(ncpe.table.get(int(m), 0)))(X) if X.size else X
    min_eigs, tols = {}, {}
    for k in range(level + 1):
        idx = np.flatnonzero(lens <= k)
        sub = vals[np.ix_(idx, idx)]
        min_eigs[k] = float(np.linalg.eigvalsh(sub)[0])
        tols[k] = psd_tolerance(len(idx))
    # commutation: E'[u^dag (ab - ba) v] for a on player 0, b on player 1,
    # with |u| + |v| + 2 <= degree
    worst, checks = 0.0, 0
    short = [w for w in words if 2 * len(w) + 2 <= ncpe.degree]
    for u in short:
        for v in short:
            for i in range(n):
                for j in range(n):
                    a, b = (0, i), (1, j)
                    left = ncpe[tuple(reversed(u)) + (a, b) + v]
                    right = ncpe[tuple(reversed(u)) + (b, a) + v]
                    worst = max(worst, abs(left - right))
                    checks += 1
    norm = abs(ncpe.table.get(0, 0) - 1)
    return ValidityReport(norm, min_eigs, tols, worst, checks)


def game_polynomial(game: NonlocalGame) -> MultilinearPoly:
    """Winning probability under the substitution ``A^{a}_{q} = prod_t
    (I + a_t C_{q_t}) / 2`` and ``B`` likewise, after word reduction.

    The coefficient of each product of answer projectors is the
    multilinear (Walsh) expansion of the acceptance counts.
    """
    n = game.nvars
    poly = MultilinearPoly(n)
    # chi[a, S] = prod_{t in S} sign_t(a) over the 5 answer slots
    signs = np.concatenate(
        [np.repeat(S3, 4, axis=0), np.tile(S2, (8, 1))], axis=1
    )  # rows indexed by a1 * 4 + a2
    subsets = list(range(32))
    chi = np.array([[np.prod(signs[r, [t for t in range(5) if (S >> t) & 1]]) for S in subsets] for r in range(32)])
    for qi, q1 in enumerate(game.q1_set):
        for qj, q2 in enumerate(game.q2_set):
            c = game.counts[qi, qj].reshape(-1)
            if not c.any():
                continue
            coef = c @ chi  # sum_a W(a) chi_S(a); divide by 32 and total below
            slots = list(q1) + list(q2)
            for S, k in zip(subsets, coef):
                if k == 0:
                    continue
                m = 0
                for t in range(5):
                    if (S >> t) & 1:
                        m ^= 1 << slots[t]
                poly = poly + MultilinearPoly(n, {m: Fraction(int(k), 32 * game.total)})
    return poly


def game_value_under_ncpe(game: NonlocalGame, ncpe: NcPseudoExpectation) -> Fraction | float:
    if ncpe.nvars != game.nvars:
        raise ConfigurationError(f"ncpe has {ncpe.nvars} variables, game has {game.nvars}")
    f = game_polynomial(game)
    if f.degree() > ncpe.degree:
        raise DegreeError(f"game polynomial degree {f.degree()} exceeds {ncpe.degree}")
    return sum((c * ncpe.table.get(m, 0) for m, c in f.items()), Fraction(0))


def entangled_upper_bound(inst: XorInstance, gamma, opt: Fraction | None = None, cap: int = DEFAULT_BRUTE_CAP):
    """``1 - gamma (1 - OPT)^2 / m^2``; ``gamma`` is supplied, never fitted."""
    if opt is None:
        opt, _ = brute_force_opt(inst, cap)
    g = Fraction(gamma) if not isinstance(gamma, float) else gamma
    return 1 - g * (1 - opt) ** 2 / inst.m**2
