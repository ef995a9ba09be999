"""Finite-set additive combinatorics over F_2^n."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, CapExceeded, DimensionMismatch, EmptyInputError
from .gf2core import NUMPY_MAX_DIM, LinearMap, Subspace, check_vec, span

SUMSET_BUDGET = 1 << 24
QUADRUPLE_CAP = 32
# dense indicator arrays are used below this dimension
DENSE_DIM = 26
# dimensions where sumsets of large sets go through the Walsh transform
FOURIER_DIM = 22


class PointSet:
    """A deduplicated, ordered subset of F_2^n with O(1) membership."""

    __slots__ = ("n", "_elems", "_members", "_array")

    def __init__(self, n: int, elements: Iterable[int] = ()):
        self.n = n
        seen: dict[int, None] = {}
        for x in elements:
            x = int(x)
            check_vec(x, n)
            seen.setdefault(x, None)
        self._elems = tuple(seen)
        self._members = frozenset(self._elems)
        self._array = None

    @classmethod
    def _trusted(cls, n: int, elements: Sequence[int]) -> "PointSet":
        # elements already distinct and in range
        ps = cls.__new__(cls)
        ps.n = n
        ps._elems = tuple(int(x) for x in elements)
        ps._members = frozenset(ps._elems)
        ps._array = None
        return ps

    @classmethod
    def from_array(cls, n: int, arr: np.ndarray) -> "PointSet":
        return cls._trusted(n, np.unique(arr).tolist())

    @classmethod
    def from_subspace(cls, V: Subspace, shift: int = 0) -> "PointSet":
        return cls._trusted(V.ambient, sorted(x ^ shift for x in V.elements(cap=26)))

    def __len__(self) -> int:
        return len(self._elems)

    def __iter__(self):
        return iter(self._elems)

    def __contains__(self, x) -> bool:
        return x in self._members

    def __getitem__(self, i: int) -> int:
        return self._elems[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self.n == other.n and self._members == other._members

    def __hash__(self):
        return hash((self.n, self._members))

    def __repr__(self) -> str:
        return f"PointSet(n={self.n}, size={len(self)})"

    @property
    def elements(self) -> tuple[int, ...]:
        return self._elems

    @property
    def members(self) -> frozenset:
        return self._members

    def array(self) -> np.ndarray:
        if self.n > NUMPY_MAX_DIM:
            raise DimensionMismatch(f"numpy path supports n <= {NUMPY_MAX_DIM}")
        if self._array is None:
            self._array = np.fromiter(self._elems, dtype=np.int64, count=len(self._elems))
        return self._array

    def sorted(self) -> list[int]:
        return sorted(self._elems)

    def sample(self, rng: np.random.Generator) -> int:
        if not self._elems:
            raise EmptyInputError("cannot sample from an empty set")
        return self._elems[int(rng.integers(len(self._elems)))]

    def translate(self, v: int) -> "PointSet":
        return PointSet._trusted(self.n, [x ^ v for x in self._elems])


def _same_dim(A: PointSet, B: PointSet):
    if A.n != B.n:
        raise DimensionMismatch(f"F_2^{A.n} vs F_2^{B.n}")


def _sum_array(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Sorted distinct values of {x ^ y}."""
    if len(a) > len(b):
        a, b = b, a
    if len(a) == 0:
        return np.zeros(0, dtype=np.int64)
    if n <= FOURIER_DIM and len(a) * len(b) >= 2 * (n << n):
        # support of the XOR-convolution 1_a * 1_b, via three transforms
        from .quadfit import fwht

        ia = np.zeros(1 << n, dtype=np.int64)
        ib = np.zeros(1 << n, dtype=np.int64)
        ia[a] = 1
        ib[b] = 1
        return np.flatnonzero(fwht(fwht(ia) * fwht(ib))).astype(np.int64)
    if n <= DENSE_DIM and (1 << n) <= max(8 * len(a) * len(b), 1 << 16):
        mask = np.zeros(1 << n, dtype=bool)
        for x in a.tolist():
            mask[b ^ x] = True
        return np.flatnonzero(mask).astype(np.int64)
    chunk = max(1, (1 << 22) // len(b))
    parts = []
    for i in range(0, len(a), chunk):
        parts.append(np.unique((a[i:i + chunk, None] ^ b[None, :]).ravel()))
    return np.unique(np.concatenate(parts))


def sumset(A: PointSet, B: PointSet) -> PointSet:
    """A + B = {a + b}, returned in increasing order."""
    _same_dim(A, B)
    if A.n > NUMPY_MAX_DIM:
        return PointSet._trusted(A.n, sorted({a ^ b for a in A for b in B}))
    return PointSet._trusted(A.n, _sum_array(A.array(), B.array(), A.n).tolist())


def iterated_sumset(A: PointSet, k: int) -> PointSet:
    """kA by repeated doubling; iterated_sumset(A, 1) is A itself."""
    if k < 1:
        raise ValueError("k must be positive")
    result: Optional[PointSet] = None
    power = A
    while k:
        if k & 1:
            result = power if result is None else sumset(result, power)
        k >>= 1
        if k:
            power = sumset(power, power)
    return result


def doubling_constant(A: PointSet) -> int:
    """Smallest integer K with |A + A| <= K |A|."""
    if not len(A):
        raise EmptyInputError("doubling constant of the empty set")
    s = len(sumset(A, A))
    return -(-s // len(A))


@dataclass(frozen=True)
class EnergyProfile:
    energy: int
    rep_counts: dict[int, int] = field(repr=False)

    @property
    def support(self) -> list[int]:
        return sorted(self.rep_counts)


def representation_counts(A: PointSet) -> dict[int, int]:
    """z -> #{(a, b) in A^2 : a + b = z}."""
    if A.n > NUMPY_MAX_DIM:
        return dict(Counter(a ^ b for a in A for b in A))
    arr = A.array()
    counts: Counter = Counter()
    chunk = max(1, (1 << 22) // max(len(arr), 1))
    for i in range(0, len(arr), chunk):
        z, c = np.unique((arr[i:i + chunk, None] ^ arr[None, :]).ravel(), return_counts=True)
        counts.update(dict(zip(z.tolist(), c.tolist())))
    return dict(counts)


def additive_energy(A: PointSet) -> EnergyProfile:
    if not len(A):
        raise EmptyInputError("additive energy of the empty set")
    reps = representation_counts(A)
    return EnergyProfile(sum(c * c for c in reps.values()), reps)


def additive_energy_fourier(A: PointSet) -> int:
    """Cross-check: E(A) = 2^-n sum_s F(s)^4 with F the integer Walsh transform of 1_A."""
    from .quadfit import fwht

    if A.n > 24:
        raise CapExceeded("n", A.n, 24)
    ind = np.zeros(1 << A.n, dtype=np.int64)
    ind[A.array()] = 1
    F = fwht(ind).astype(object)
    total = sum(int(v) ** 4 for v in F)
    return total >> A.n


@dataclass(frozen=True)
class IsoCheck:
    ok: bool
    witness: Optional[int] = None

    def __bool__(self) -> bool:
        return self.ok


def freiman_iso_check(pi: LinearMap, A: PointSet, budget: int = SUMSET_BUDGET,
                      four: Optional[PointSet] = None) -> IsoCheck:
    """Kernel criterion: pi is a Freiman isomorphism on A iff pi(x) != 0 on 4A minus 0.

    ``four`` may carry a precomputed 4A when checking many maps on one set.
    """
    if A.n != pi.domain_dim:
        raise DimensionMismatch(f"A in F_2^{A.n}, pi on F_2^{pi.domain_dim}")
    if not len(A):
        return IsoCheck(True)
    if four is None:
        two = sumset(A, A)
        bound = min(len(two) ** 2, 1 << A.n)
        if bound > budget:
            raise BudgetExceeded(f"|4A| may reach {bound}, budget {budget}")
        four = sumset(two, two)
    if A.n > NUMPY_MAX_DIM:
        bad = [x for x in four if x and pi(x) == 0]
        return IsoCheck(not bad, min(bad) if bad else None)
    arr = four.array()
    img = pi.apply_many(arr)
    bad = arr[(img == 0) & (arr != 0)]
    if len(bad):
        return IsoCheck(False, int(bad.min()))
    return IsoCheck(True)


def freiman_iso_exhaustive(
    phi: Callable[[int], int], A: PointSet, cap: int = QUADRUPLE_CAP
) -> IsoCheck:
    """Quadruple-level definition: a+b = c+d  <=>  phi(a)+phi(b) = phi(c)+phi(d).

    On failure the witness is the packed quadruple index a*s^3 + b*s^2 + c*s + d
    into A's element order (s = |A|).
    """
    s = len(A)
    if s > cap:
        raise CapExceeded("|A|", s, cap)
    elems = list(A)
    images = [phi(a) for a in elems]
    if s == 0:
        return IsoCheck(True)
    wide = max(max(elems).bit_length(), max(images).bit_length()) > NUMPY_MAX_DIM
    dtype = object if wide else np.int64
    src = np.array([[a ^ b for b in elems] for a in elems], dtype=dtype).ravel()
    dst = np.array([[a ^ b for b in images] for a in images], dtype=dtype).ravel()
    same_src = src[:, None] == src[None, :]
    same_dst = dst[:, None] == dst[None, :]
    bad = np.argwhere(same_src != same_dst)
    if len(bad):
        p, q = (int(v) for v in bad[0])
        return IsoCheck(False, p * s * s + q)
    return IsoCheck(True)


@dataclass(frozen=True)
class RuzsaCover:
    X: PointSet
    verified: bool


class _Marks:
    """Membership structure shared by the greedy covering scan."""

    def __init__(self, n: int):
        self.dense = n <= DENSE_DIM
        self.mask = np.zeros(1 << n, dtype=bool) if self.dense else None
        self.set: set = set()

    def any(self, arr) -> bool:
        if self.dense:
            return bool(self.mask[arr].any())
        return not self.set.isdisjoint(arr.tolist() if hasattr(arr, "tolist") else arr)

    def add(self, arr):
        if self.dense:
            self.mask[arr] = True
        else:
            self.set.update(arr.tolist() if hasattr(arr, "tolist") else arr)


def ruzsa_cover(S: PointSet, T: PointSet) -> RuzsaCover:
    """Greedy Ruzsa covering: X subset of T with disjoint translates x + S.

    T is scanned in increasing order; t joins X iff t + S misses every
    translate already taken.  Maximality gives T within X + 2S.
    """
    _same_dim(S, T)
    if not len(S):
        raise EmptyInputError("ruzsa_cover needs a nonempty S")
    n = S.n
    marks = _Marks(n)
    X = []
    if n <= NUMPY_MAX_DIM:
        s_arr = S.array()
        for t in T.sorted():
            shifted = s_arr ^ t
            if not marks.any(shifted):
                X.append(t)
                marks.add(shifted)
    else:
        for t in T.sorted():
            shifted = [t ^ s for s in S]
            if not marks.any(shifted):
                X.append(t)
                marks.add(shifted)
    Xs = PointSet._trusted(n, X)
    return RuzsaCover(Xs, covers_with_double(Xs, S, T))


def covers_with_double(X: PointSet, S: PointSet, T: PointSet) -> bool:
    """Explicit containment check T within X + S + S."""
    if not len(T):
        return True
    if not len(X):
        return False
    cover = sumset(X, sumset(S, S))
    return T.members <= cover.members


@dataclass(frozen=True)
class CoverCertificate:
    subspace: Subspace
    reps: tuple[int, ...]
    covered: bool

    @property
    def cover_size(self) -> int:
        return len(self.reps)


def verify_cover(A: PointSet, V: Subspace, reps: Sequence[int]) -> CoverCertificate:
    """covered iff every a in A has a + reps[i] in V for some i."""
    if A.n != V.ambient:
        raise DimensionMismatch(f"A in F_2^{A.n}, V in F_2^{V.ambient}")
    reps = tuple(int(r) for r in reps)
    for r in reps:
        check_vec(r, A.n)
    classes = {V.reduce(r) for r in reps}
    if A.n <= NUMPY_MAX_DIM and len(A):
        reduced = V.reduce_many(A.array())
        covered = bool(np.isin(reduced, np.fromiter(classes, dtype=np.int64)).all())
    else:
        covered = all(V.reduce(a) in classes for a in A)
    return CoverCertificate(V, reps, covered)


@dataclass(frozen=True)
class BoundsReport:
    size: int
    K: int
    sum2: int
    sum4: int
    span_dim: int
    energy: int
    pluennecke: bool
    span_bound: bool
    energy_lower: bool
    energy_range: bool

    @property
    def all_hold(self) -> bool:
        return self.pluennecke and self.span_bound and self.energy_lower and self.energy_range


def sanity_bounds(A: PointSet, K: Optional[int] = None) -> BoundsReport:
    """Evaluate the standard inequalities for A exactly in integer arithmetic."""
    if not len(A):
        raise EmptyInputError("sanity_bounds of the empty set")
    two = sumset(A, A)
    if K is None:
        K = -(-len(two) // len(A))
    four = sumset(two, two)
    d = span(A, A.n).dim
    E = additive_energy(A).energy
    a = len(A)
    return BoundsReport(
        size=a,
        K=K,
        sum2=len(two),
        sum4=len(four),
        span_dim=d,
        energy=E,
        pluennecke=len(four) <= K**4 * a,
        span_bound=(1 << d) * 2 * K <= (1 << (2 * K)) * a,
        energy_lower=E * len(two) >= a**4,
        energy_range=a * a <= E <= a**3,
    )
