"""Homomorphism testing and structured approximate homomorphisms on function tables."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import CapExceeded, DimensionMismatch, ParseError
from .gf2core import BitMat, Subspace, from_bits, to_bits
from .pfr import HomFit, PipelineConfig, hoeffding_count, restricted_hom_fit
from .setops import PointSet, ruzsa_cover

TRIPLE_CAP = 10
PAIR_CAP = 11


class FuncTable:
    """f: F_2^m -> F_2^n as an explicit table, values[x] = f(x).

    Also serves as query access for the homomorphism fit: S is all of
    F_2^m and ``query_f`` is a counted table lookup.
    """

    def __init__(self, m: int, n: int, values):
        values = np.asarray(values, dtype=np.int64)
        if values.shape != (1 << m,):
            raise DimensionMismatch(f"table for m={m} needs {1 << m} values, got {values.shape}")
        if len(values) and (values.min() < 0 or int(values.max()) >> n):
            raise DimensionMismatch(f"values do not fit in {n} bits")
        self.m = m
        self.n = n
        self.values = values
        self.calls = 0

    @property
    def domain(self) -> Subspace:
        return Subspace.full(self.m)

    def __call__(self, x: int) -> int:
        return int(self.values[x])

    def query_f(self, x: int) -> int:
        self.calls += 1
        return int(self.values[x])

    def query_S(self, x: int) -> int:
        self.calls += 1
        return 1

    def agreement(self, M: BitMat, v: int) -> int:
        xs = np.arange(1 << self.m, dtype=np.int64)
        return int((M.apply_many(xs) ^ np.int64(v) == self.values).sum())


def quadruple_agreement(f: FuncTable, mode: str = "exact", rng: Optional[np.random.Generator] = None,
                        samples: Optional[int] = None) -> Fraction:
    """Pr[f(x1)+f(x2) = f(x3)+f(x4)] over x1+x2 = x3+x4.

    Exact mode groups pairs (x1, x2) by (x1+x2, f(x1)+f(x2)); the count of
    agreeing quadruples is the sum of squared group sizes, out of 2^{3m}.
    Sampled mode draws x1, x2, x3 independently and sets x4 = x1+x2+x3.
    """
    m = f.m
    if mode == "exact":
        if m > TRIPLE_CAP:
            raise CapExceeded("m", m, TRIPLE_CAP)
        xs = np.arange(1 << m, dtype=np.int64)
        total = 0
        for s in range(1 << m):
            d = f.values ^ f.values[xs ^ s]
            counts = np.bincount(d, minlength=1)
            total += int((counts.astype(np.int64) ** 2).sum())
        return Fraction(total, 1 << (3 * m))
    if mode != "sampled":
        raise ValueError(f"mode must be 'exact' or 'sampled', not {mode!r}")
    if rng is None:
        raise ValueError("sampled mode needs an rng")
    if samples is None:
        samples = hoeffding_count(0.02, 0.95)
    x1, x2, x3 = (rng.integers(0, 1 << m, size=samples, dtype=np.int64) for _ in range(3))
    x4 = x1 ^ x2 ^ x3
    v = f.values
    hits = int(((v[x1] ^ v[x2]) == (v[x3] ^ v[x4])).sum())
    return Fraction(hits, samples)


def hom_test_fit(f: FuncTable, config: Optional[PipelineConfig] = None,
                 rng: Optional[np.random.Generator] = None) -> HomFit:
    """Affine (M, v) with large agreement: the restricted fit with S = F_2^m."""
    config = config or PipelineConfig(K=1)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    fit = restricted_hom_fit(f, config, rng)
    # the table is known, so the reported agreement is always an exact recount
    fit.agreement = f.agreement(fit.M, fit.v)
    fit.exact = True
    return fit


def delta_image(f: FuncTable) -> PointSet:
    """{f(x) + f(y) + f(x+y) : x, y in F_2^m}."""
    if f.m > PAIR_CAP:
        raise CapExceeded("m", f.m, PAIR_CAP)
    xs = np.arange(1 << f.m, dtype=np.int64)
    seen = np.zeros(1 << f.n, dtype=bool)
    for x in range(1 << f.m):
        seen[f.values[x] ^ f.values ^ f.values[xs ^ x]] = True
    return PointSet._trusted(f.n, np.flatnonzero(seen).tolist())


@dataclass
class ApproxHomResult:
    M: BitMat
    v: int
    agreement: int
    residual_image: PointSet
    cover_size: int
    delta_size: Optional[int]

    @property
    def residual_image_size(self) -> int:
        return len(self.residual_image)

    @property
    def bound(self) -> Optional[int]:
        """|X| * |delta f|^2, the covering bound on the residual image."""
        if self.delta_size is None:
            return None
        return self.cover_size * self.delta_size ** 2

    @property
    def within_bound(self) -> Optional[bool]:
        b = self.bound
        return None if b is None else self.residual_image_size <= b


def residual_image(f: FuncTable, M: BitMat) -> PointSet:
    xs = np.arange(1 << f.m, dtype=np.int64)
    return PointSet._trusted(f.n, np.unique(f.values ^ M.apply_many(xs)).tolist())


def approx_hom_decompose(f: FuncTable, config: Optional[PipelineConfig] = None,
                         rng: Optional[np.random.Generator] = None,
                         delta_size: Optional[int] = None) -> ApproxHomResult:
    """Linear M with {f(x) - Mx} small, plus the exact residual image.

    ``delta_size`` is |delta f| when already known; otherwise it is computed
    when m is within the pair-enumeration cap.
    """
    fit = hom_test_fit(f, config, rng)
    if delta_size is None and f.m <= PAIR_CAP:
        delta_size = len(delta_image(f))
    xs = np.arange(1 << f.m, dtype=np.int64)
    E = xs[(fit.M.apply_many(xs) ^ np.int64(fit.v)) == f.values]
    X = ruzsa_cover(PointSet.from_array(f.m, E), PointSet.from_subspace(Subspace.full(f.m))).X
    return ApproxHomResult(fit.M, fit.v, fit.agreement, residual_image(f, fit.M), len(X), delta_size)


# -- table files ---------------------------------------------------------------

def write_table(path, f: FuncTable):
    lines = [f"m={f.m} n={f.n}"]
    lines += [to_bits(int(v), f.n) for v in f.values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> FuncTable:
    """Parse ``m=<int> n=<int>`` then 2^m lines of n-bit values in domain order."""
    from .access import _parse_header

    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError(path, 1, "empty file")
    hdr = _parse_header(path, lines[0], ("m", "n"))
    m, n = hdr["m"], hdr["n"]
    body = lines[1:]
    while body and not body[-1].strip():
        body.pop()
    vals = []
    for i, line in enumerate(body, start=2):
        s = line.strip()
        if len(s) != n or (s and set(s) - {"0", "1"}):
            raise ParseError(path, i, f"expected a {n}-bit binary string, got {s!r}")
        vals.append(from_bits(s))
    if len(vals) != 1 << m:
        raise ParseError(path, len(body) + 2, f"expected {1 << m} values for m={m}, found {len(vals)}")
    return FuncTable(m, n, vals)
