"""Quadratic-correlation finding over F_2^d.

Two backends share one contract: given access to a bounded function g on
F_2^{m+n}, return a quadratic polynomial q together with the correlation
|E_z g(z) (-1)^{q(z)}|.  ``exhaustive_quad_fit`` is an exact argmax for tiny
d; ``bilinear_quad_fit`` targets g(x, y) = 1_S(x) (-1)^{f(x).y} and scales with
the size of the x-domain.

Points z of F_2^{m+n} are packed as ``x | (y << m)``: variables 0..m-1 are the
x-coordinates and m..m+n-1 the y-coordinates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AmbiguityError, CapExceeded, DimensionMismatch, DensificationFailure
from .gf2core import BitMat, Subspace, check_vec, lift_functional, popcount_parity

EXHAUSTIVE_CAP = 7
TABLE_CAP = 20
RESOLVE_CAP = 1024


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis.

    Returns F(s) = sum_x h(x) (-1)^{s.x} in exact int64 arithmetic.
    """
    a = np.array(values, dtype=np.int64, copy=True)
    N = a.shape[-1]
    if N == 0 or N & (N - 1):
        raise ValueError(f"table length {N} is not a power of two")
    lead = a.shape[:-1]
    h = 1
    while h < N:
        view = a.reshape(*lead, N // (2 * h), 2, h)
        lo = view[..., 0, :].copy()
        hi = view[..., 1, :]
        view[..., 0, :] += hi
        np.subtract(lo, hi, out=hi)
        h *= 2
    return a


@dataclass(frozen=True)
class Spectrum:
    """Walsh spectrum of h on F_2^d, stored scaled by 2^d."""

    d: int
    scaled: np.ndarray

    def coef(self, z: int) -> Fraction:
        return Fraction(int(self.scaled[z]), 1 << self.d)

    def __getitem__(self, z: int) -> Fraction:
        return self.coef(z)

    def as_float(self) -> np.ndarray:
        return self.scaled / float(1 << self.d)

    def energy_scaled(self) -> int:
        """sum_z (2^d h^(z))^2, equal to 2^d sum_x h(x)^2 by Parseval."""
        return int(sum(int(v) * int(v) for v in self.scaled))

    def argmax_abs(self) -> int:
        return int(np.argmax(np.abs(self.scaled)))


def wht(values) -> Spectrum:
    arr = np.asarray(values, dtype=np.int64)
    N = arr.shape[-1]
    if arr.ndim != 1:
        raise ValueError("wht expects a single table")
    if N == 0 or N & (N - 1):
        raise ValueError(f"table length {N} is not a power of two")
    return Spectrum(N.bit_length() - 1, fwht(arr))


@dataclass(frozen=True)
class QuadPoly:
    """q(z) = sum_{i<j} form[i,j] z_i z_j + linear . z + constant over F_2^d."""

    d: int
    form: BitMat
    linear: int = 0
    constant: int = 0

    def __post_init__(self):
        if self.form.shape != (self.d, self.d):
            raise DimensionMismatch(f"form {self.form.shape} for d={self.d}")
        for i, row in enumerate(self.form.rows):
            if row & ((1 << (i + 1)) - 1):
                raise ValueError("form must be strictly upper triangular")
        check_vec(self.linear, self.d)
        if self.constant not in (0, 1):
            raise ValueError("constant must be a bit")

    @classmethod
    def zero(cls, d: int) -> "QuadPoly":
        return cls(d, BitMat.zeros(d, d))

    @classmethod
    def from_pairs(cls, d: int, pairs, linear: int = 0, constant: int = 0) -> "QuadPoly":
        rows = [0] * d
        for i, j in pairs:
            if i == j:
                linear ^= 1 << i
                continue
            i, j = min(i, j), max(i, j)
            rows[i] ^= 1 << j
        return cls(d, BitMat(tuple(rows), d), linear, constant)

    @classmethod
    def bilinear(cls, M: BitMat, v: int = 0) -> "QuadPoly":
        """q(x, y) = y . Mx + v . y for M of shape (n, m)."""
        n, m = M.shape
        rows = [0] * (m + n)
        for j, row in enumerate(M.rows):
            for i in range(m):
                if row >> i & 1:
                    rows[i] |= 1 << (m + j)
        return cls(m + n, BitMat(tuple(rows), m + n), v << m, 0)

    def __call__(self, z: int) -> int:
        acc = (self.linear & z).bit_count() + self.constant
        for i, row in enumerate(self.form.rows):
            if row and z >> i & 1:
                acc += (row & z).bit_count()
        return acc & 1

    evaluate = __call__

    def evaluate_all(self) -> np.ndarray:
        z = np.arange(1 << self.d, dtype=np.int64)
        acc = popcount_parity(z & np.int64(self.linear)) ^ self.constant
        for i, row in enumerate(self.form.rows):
            if row:
                acc ^= ((z >> i) & 1) & popcount_parity(z & np.int64(row))
        return acc.astype(np.int64)


def _pairs(d: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(d) for j in range(i + 1, d)]


def correlation(g_table: np.ndarray, q: QuadPoly) -> Fraction:
    """Signed E_z g(z) (-1)^{q(z)} as an exact fraction."""
    g = np.asarray(g_table, dtype=np.int64)
    s = int((g * (1 - 2 * q.evaluate_all())).sum())
    return Fraction(s, 1 << q.d)


def exhaustive_quad_fit(g_table, d: Optional[int] = None, cap: int = EXHAUSTIVE_CAP):
    """Exact argmax over all quadratics of |E g (-1)^q| for a full table.

    Every strictly upper triangular form is enumerated; for each, one Walsh
    transform of the form-twisted table yields the best linear part.  Ties go
    to the lowest form index, then the lowest linear part, then constant 0.
    Returns (QuadPoly, correlation as Fraction).
    """
    g = np.asarray(g_table, dtype=np.int64)
    N = len(g)
    if N == 0 or N & (N - 1):
        raise ValueError(f"table length {N} is not a power of two")
    if d is None:
        d = N.bit_length() - 1
    if N != 1 << d:
        raise DimensionMismatch(f"table of length {N} for d={d}")
    if d > cap:
        raise CapExceeded("d", d, cap)
    pairs = _pairs(d)
    z = np.arange(N, dtype=np.int64)
    mono = np.array([((z >> i) & (z >> j) & 1) for i, j in pairs], dtype=np.int64).reshape(
        len(pairs), N
    )
    nforms = 1 << len(pairs)
    chunk = max(1, (1 << 20) // N)
    best = (-1, 0, 0, 0)  # (|raw|, form index, linear, raw)
    for start in range(0, nforms, chunk):
        idx = np.arange(start, min(start + chunk, nforms), dtype=np.int64)
        bits = ((idx[:, None] >> np.arange(len(pairs), dtype=np.int64)[None, :]) & 1)
        Q = (bits @ mono) & 1 if len(pairs) else np.zeros((len(idx), N), dtype=np.int64)
        W = fwht(g[None, :] * (1 - 2 * Q))
        flat = int(np.argmax(np.abs(W)))
        f_off, lin = divmod(flat, N)
        raw = int(W[f_off, lin])
        if abs(raw) > best[0]:
            best = (abs(raw), start + f_off, lin, raw)
    _, fidx, lin, raw = best
    chosen = [p for k, p in enumerate(pairs) if fidx >> k & 1]
    q = QuadPoly.from_pairs(d, chosen, linear=lin, constant=1 if raw < 0 else 0)
    return q, Fraction(abs(raw), N)


def quad_to_bilinear(q: QuadPoly, m: int, n: int) -> BitMat:
    """M = A12^T + A21: the bilinear part y . Mx of q(x, y) - q(x,0) - q(0,y) + q(0,0)."""
    if q.d != m + n:
        raise DimensionMismatch(f"q over F_2^{q.d}, split ({m}, {n})")
    A = q.form
    rows = []
    for j in range(n):
        r = 0
        for i in range(m):
            if A.get(i, m + j) ^ A.get(m + j, i):
                r |= 1 << i
        rows.append(r)
    return BitMat(tuple(rows), m)


def second_difference(q: QuadPoly, x: int, y: int, m: int) -> int:
    """B(x, y) = q(x,y) + q(x,0) + q(0,y) + q(0,0) over F_2."""
    yy = y << m
    return q(x | yy) ^ q(x) ^ q(yy) ^ q(0)


class CorrelationTarget:
    """Query access to g(x, y) = 1_S(x) (-1)^{f(x).y} on F_2^{m+n}.

    ``fiber(x)`` returns f(x) for x in S and None otherwise; one call answers
    g(x, y) for every y.  ``domain`` is a subspace of F_2^m known to contain S
    (None means all of F_2^m).
    """

    def __init__(self, m: int, n: int, fiber: Callable[[int], Optional[int]],
                 domain: Optional[Subspace] = None):
        if domain is not None and domain.ambient != m:
            raise DimensionMismatch(f"domain in F_2^{domain.ambient}, m={m}")
        self.m = m
        self.n = n
        self.fiber = fiber
        self.domain = domain if domain is not None else Subspace.full(m)

    def g(self, x: int, y: int) -> int:
        fx = self.fiber(x)
        if fx is None:
            return 0
        return -1 if (fx & y).bit_count() & 1 else 1

    def f_values(self, xs: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """(mask of x in S, f(x) or 0) for each x, one fiber call apiece."""
        mask = np.zeros(len(xs), dtype=bool)
        vals = np.zeros(len(xs), dtype=np.int64)
        for k, x in enumerate(xs):
            fx = self.fiber(int(x))
            if fx is not None:
                mask[k] = True
                vals[k] = fx
        return mask, vals

    def table(self, cap: int = EXHAUSTIVE_CAP) -> np.ndarray:
        """Full table of g over F_2^{m+n}, indexed by x | (y << m)."""
        d = self.m + self.n
        if d > cap:
            raise CapExceeded("m+n", d, cap)
        xs = list(range(1 << self.m))
        mask, vals = self.f_values(xs)
        y = np.arange(1 << self.n, dtype=np.int64)
        signs = 1 - 2 * popcount_parity(vals[:, None] & y[None, :])
        G = signs * mask[:, None]
        # G[x, y] -> index x | (y << m)
        return G.T.reshape(-1).astype(np.int64)


@dataclass
class BilinearFit:
    poly: QuadPoly
    M: BitMat
    v: int
    correlation: Fraction
    evidence: int
    ambiguous_rows: tuple[int, ...] = ()


def _row_candidates(raw_row: np.ndarray, tol_raw: float) -> list[int]:
    mags = np.abs(raw_row)
    top = mags.max()
    if top == 0:
        return [0]
    cand = np.flatnonzero(mags >= top - tol_raw)
    # strongest first, then lowest frequency
    order = np.lexsort((cand, -mags[cand]))
    return [int(c) for c in cand[order]]


def _residual_bits(coords: np.ndarray, fbits: np.ndarray, w: int) -> np.ndarray:
    """Per evidence point: (lam . x) xor f_i(x), with lam given in domain coordinates."""
    return popcount_parity(coords & np.int64(w)) ^ fbits


def _mode_count(residual: np.ndarray) -> int:
    if len(residual) == 0:
        return 0
    _, counts = np.unique(residual, return_counts=True)
    return int(counts.max())


def _select_rows(n, candidates, coords, fvals, on_tie, resolve_cap):
    """Choose one frequency per row; return (choices, ambiguous rows)."""
    fbits = [((fvals >> i) & 1) for i in range(n)]
    # candidates inducing the same row function on the evidence (up to the
    # sign bit) are one hypothesis
    for i in range(n):
        seen = {}
        for w in candidates[i]:
            r = _residual_bits(coords, fbits[i], w).astype(np.uint8)
            key, flipped = np.packbits(r).tobytes(), np.packbits(1 - r).tobytes()
            if key in seen or flipped in seen:
                continue
            seen[key] = w
        candidates[i] = list(seen.values())
    ambiguous = tuple(i for i in range(n) if len(candidates[i]) > 1)
    if ambiguous and on_tie == "raise":
        i = ambiguous[0]
        raise AmbiguityError(i, candidates[i])
    choice = [c[0] for c in candidates]
    if not ambiguous:
        return choice, ambiguous

    def residual(ch):
        acc = np.zeros(len(coords), dtype=np.int64)
        for i, w in enumerate(ch):
            acc |= _residual_bits(coords, fbits[i], w).astype(np.int64) << i
        return acc

    combos = 1
    for i in ambiguous:
        combos *= len(candidates[i])
    if combos <= resolve_cap:
        best = (-1, None)
        for pick in itertools.product(*(candidates[i] for i in ambiguous)):
            ch = list(choice)
            for i, w in zip(ambiguous, pick):
                ch[i] = w
            score = _mode_count(residual(ch))
            if score > best[0]:
                best = (score, ch)
        return best[1], ambiguous
    # greedy: fix rows one at a time against the partial residual
    fixed = [i for i in range(n) if i not in ambiguous]
    partial = np.zeros(len(coords), dtype=np.int64)
    for i in fixed:
        partial |= _residual_bits(coords, fbits[i], choice[i]).astype(np.int64) << i
    for i in ambiguous:
        best = (-1, candidates[i][0])
        for w in candidates[i]:
            trial = partial | (_residual_bits(coords, fbits[i], w).astype(np.int64) << i)
            score = _mode_count(trial)
            if score > best[0]:
                best = (score, w)
        choice[i] = best[1]
        partial |= _residual_bits(coords, fbits[i], choice[i]).astype(np.int64) << i
    return choice, ambiguous


def bilinear_quad_fit(
    target: CorrelationTarget,
    tie_tol: Optional[float] = None,
    on_tie: str = "raise",
    table_cap: int = TABLE_CAP,
    resolve_cap: int = RESOLVE_CAP,
    rng: Optional[np.random.Generator] = None,
    gl_tau: float = 0.25,
    gl_samples: int = 600,
) -> BilinearFit:
    """Fit q(x, y) = y . Mx + v . y by per-row heavy Walsh coefficients.

    Row i of M is the largest-magnitude frequency of h_i(x) = g(x, e_i) over
    the target's domain; the sign of that coefficient gives bit i of v.  Two
    candidates within ``tie_tol`` (default 2^{-k/2+1} for a k-dimensional
    domain) are ambiguous unless they induce the same row function on the
    observed points of S.  ``on_tie="raise"`` raises AmbiguityError;
    ``"resolve"`` picks the jointly best combination on the evidence.
    Domains above ``table_cap`` dimensions use sampled Goldreich-Levin search.
    """
    if on_tie not in ("raise", "resolve"):
        raise ValueError(f"on_tie must be 'raise' or 'resolve', not {on_tie!r}")
    D = target.domain
    k, n, m = D.dim, target.n, target.m
    if tie_tol is None:
        tie_tol = 2.0 ** (-k / 2 + 1)
    if k <= table_cap:
        points = D.elements_array(cap=table_cap)
        mask, fvals = target.f_values(points.tolist())
        H = np.where(mask[None, :], 1 - 2 * ((fvals[None, :] >> np.arange(n)[:, None]) & 1), 0)
        raw = fwht(H) if n else np.zeros((0, 1 << k), dtype=np.int64)
        tol_raw = tie_tol * (1 << k)
        candidates = [_row_candidates(raw[i], tol_raw) for i in range(n)]
        coords = np.arange(1 << k, dtype=np.int64)[mask]
        ev_vals = fvals[mask]
    else:
        if rng is None:
            raise ValueError("sampled search needs an rng")
        candidates, coords, ev_vals = _sampled_candidates(
            target, D, rng, gl_tau, gl_samples, tie_tol
        )
        drawn = gl_samples
    if len(coords) == 0:
        raise DensificationFailure("no point of S observed in the domain")
    choice, ambiguous = _select_rows(n, candidates, coords, ev_vals, on_tie, resolve_cap)
    # sign of each chosen row: majority of agreement on the evidence
    v = 0
    for i, w in enumerate(choice):
        bits = _residual_bits(coords, (ev_vals >> i) & 1, w)
        if 2 * int(bits.sum()) > len(bits):
            v |= 1 << i
    M = BitMat(tuple(lift_functional(D, w) for w in choice), m)
    x_pts = np.array([D.from_coords(int(c)) for c in coords], dtype=np.int64)
    agree = int((M.apply_many(x_pts) ^ np.int64(v) == ev_vals).sum())
    if k <= table_cap:
        corr = Fraction(agree, 1 << m)
    else:
        # sampled evidence: density of agreement within the sampled domain points
        corr = Fraction(agree, drawn) * Fraction(1 << k, 1 << m)
    return BilinearFit(QuadPoly.bilinear(M, v), M, v, corr, len(coords), ambiguous)


def _sampled_candidates(target, D, rng, tau, samples, tie_tol):
    """Kushilevitz-Mansour search for heavy frequencies, shared across rows.

    Each level draws one batch of point pairs agreeing on the high coordinates
    and queries the fiber once per point; every row and live prefix reuses it.
    """
    k, n = D.dim, target.n
    live = [[0] for _ in range(n)]
    thresh = tau * tau / 2
    keep = max(4, int(4 / (tau * tau)))
    for ell in range(1, k + 1):
        lo_mask = (1 << ell) - 1
        hi = rng.integers(0, 1 << (k - ell), size=samples, dtype=np.int64) << ell
        y1 = rng.integers(0, 1 << ell, size=samples, dtype=np.int64)
        y2 = rng.integers(0, 1 << ell, size=samples, dtype=np.int64)
        w1, w2 = hi | y1, hi | y2
        pts1 = [D.from_coords(int(w)) for w in w1]
        pts2 = [D.from_coords(int(w)) for w in w2]
        m1, f1 = target.f_values(pts1)
        m2, f2 = target.f_values(pts2)
        lo = (y1 ^ y2) & lo_mask
        for i in range(n):
            h1 = np.where(m1, 1 - 2 * ((f1 >> i) & 1), 0)
            h2 = np.where(m2, 1 - 2 * ((f2 >> i) & 1), 0)
            prod = h1 * h2
            nxt = []
            for a in live[i]:
                for bit in (0, 1):
                    alpha = a | (bit << (ell - 1))
                    est = float((prod * (1 - 2 * popcount_parity(lo & np.int64(alpha)))).mean())
                    if est >= thresh:
                        nxt.append((est, alpha))
            nxt.sort(key=lambda t: (-t[0], t[1]))
            live[i] = [a for _, a in nxt[:keep]]
    w = rng.integers(0, 1 << k, size=samples, dtype=np.int64)
    pts = [D.from_coords(int(x)) for x in w]
    mask, fvals = target.f_values(pts)
    candidates = []
    for i in range(n):
        h = np.where(mask, 1 - 2 * ((fvals >> i) & 1), 0)
        scored = []
        for a in live[i]:
            est = float((h * (1 - 2 * popcount_parity(w & np.int64(a)))).mean())
            scored.append((abs(est), a))
        if not scored:
            candidates.append([0])
            continue
        scored.sort(key=lambda t: (-t[0], t[1]))
        top = scored[0][0]
        candidates.append([a for s, a in scored if s >= top - tie_tol])
    return candidates, w[mask], fvals[mask]
