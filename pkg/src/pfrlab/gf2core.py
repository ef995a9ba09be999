"""Exact linear algebra over F_2 on int bitsets.

A vector of F_2^n is a plain Python ``int``: bit ``j`` holds coordinate ``j``.
Text form is the big-endian binary string of length ``n``, so the leftmost
character is coordinate ``n - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import CapExceeded, DimensionMismatch

BitVec = int

KERNEL_CAP = 20
# numpy fast paths store points as int64
NUMPY_MAX_DIM = 62


def parity(x: int) -> int:
    return x.bit_count() & 1


def dot(x: int, y: int) -> int:
    return (x & y).bit_count() & 1


def to_bits(x: int, n: int) -> str:
    return format(x, f"0{n}b") if n else ""


def from_bits(s: str) -> int:
    s = s.strip()
    if s and set(s) - {"0", "1"}:
        raise ValueError(f"not a binary string: {s!r}")
    return int(s, 2) if s else 0


def check_vec(x: int, n: int) -> int:
    if x < 0 or x >> n:
        raise DimensionMismatch(f"vector {x:#x} does not fit in F_2^{n}")
    return x


def random_vec(n: int, rng: np.random.Generator) -> int:
    if n == 0:
        return 0
    if n <= NUMPY_MAX_DIM:
        return int(rng.integers(0, 1 << n))
    nbytes = (n + 7) // 8
    return int.from_bytes(rng.bytes(nbytes), "little") & ((1 << n) - 1)


def random_vecs(n: int, count: int, rng: np.random.Generator) -> list[int]:
    if n <= NUMPY_MAX_DIM:
        if n == 0:
            return [0] * count
        return [int(v) for v in rng.integers(0, 1 << n, size=count)]
    return [random_vec(n, rng) for _ in range(count)]


def popcount_parity(arr: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(arr) & 1).astype(np.int64)


@dataclass(frozen=True)
class BitMat:
    """An r x c matrix over F_2 stored as r row bitsets."""

    rows: tuple[int, ...]
    cols: int

    def __post_init__(self):
        if self.cols < 0:
            raise ValueError("negative column count")
        for r in self.rows:
            check_vec(r, self.cols)

    @classmethod
    def zeros(cls, r: int, c: int) -> "BitMat":
        return cls((0,) * r, c)

    @classmethod
    def identity(cls, n: int) -> "BitMat":
        return cls(tuple(1 << i for i in range(n)), n)

    @classmethod
    def from_columns(cls, columns: Sequence[int], nrows: int) -> "BitMat":
        rows = [0] * nrows
        for j, col in enumerate(columns):
            check_vec(col, nrows)
            for i in range(nrows):
                if col >> i & 1:
                    rows[i] |= 1 << j
        return cls(tuple(rows), len(columns))

    @classmethod
    def from_lists(cls, entries: Sequence[Sequence[int]]) -> "BitMat":
        """Build from nested 0/1 lists, entries[i][j] being row i column j."""
        cols = len(entries[0]) if entries else 0
        rows = []
        for row in entries:
            if len(row) != cols:
                raise DimensionMismatch("ragged matrix")
            rows.append(sum((b & 1) << j for j, b in enumerate(row)))
        return cls(tuple(rows), cols)

    @classmethod
    def random(cls, r: int, c: int, rng: np.random.Generator) -> "BitMat":
        return cls(tuple(random_vecs(c, r, rng)), c)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), self.cols)

    def get(self, i: int, j: int) -> int:
        if not (0 <= i < self.nrows and 0 <= j < self.cols):
            raise IndexError((i, j))
        return self.rows[i] >> j & 1

    def column(self, j: int) -> int:
        if not 0 <= j < self.cols:
            raise IndexError(j)
        return sum((row >> j & 1) << i for i, row in enumerate(self.rows))

    def columns(self) -> list[int]:
        return [self.column(j) for j in range(self.cols)]

    def apply(self, x: int) -> int:
        check_vec(x, self.cols)
        out = 0
        for i, row in enumerate(self.rows):
            if (row & x).bit_count() & 1:
                out |= 1 << i
        return out

    def apply_many(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized ``apply`` over an int64 array (dims up to 62)."""
        if self.cols > NUMPY_MAX_DIM or self.nrows > NUMPY_MAX_DIM:
            return np.array([self.apply(int(x)) for x in xs], dtype=object)
        xs = np.asarray(xs, dtype=np.int64)
        out = np.zeros(xs.shape, dtype=np.int64)
        for i, row in enumerate(self.rows):
            if row:
                out |= popcount_parity(xs & np.int64(row)).astype(np.int64) << i
        return out

    def transpose(self) -> "BitMat":
        return BitMat(tuple(self.columns()), self.nrows)

    def __matmul__(self, other: "BitMat") -> "BitMat":
        if self.cols != other.nrows:
            raise DimensionMismatch(f"{self.shape} @ {other.shape}")
        rows = []
        for row in self.rows:
            acc = 0
            k = row
            while k:
                low = k & -k
                acc ^= other.rows[low.bit_length() - 1]
                k ^= low
            rows.append(acc)
        return BitMat(tuple(rows), other.cols)

    def __add__(self, other: "BitMat") -> "BitMat":
        if self.shape != other.shape:
            raise DimensionMismatch(f"{self.shape} + {other.shape}")
        return BitMat(tuple(a ^ b for a, b in zip(self.rows, other.rows)), self.cols)

    def to_lists(self) -> list[list[int]]:
        return [[row >> j & 1 for j in range(self.cols)] for row in self.rows]


def _insert(pivots: dict[int, int], v: int) -> int:
    """Reduce v against a reduced-echelon table and insert it; return residue."""
    for p in sorted(pivots, reverse=True):
        if v >> p & 1:
            v ^= pivots[p]
    if v:
        p = v.bit_length() - 1
        for q, row in pivots.items():
            if row >> p & 1:
                pivots[q] = row ^ v
        pivots[p] = v
    return v


@dataclass(frozen=True)
class Subspace:
    """A subspace of F_2^n held as a reduced row-echelon basis.

    Rows are sorted by strictly decreasing pivot (highest set bit), and each
    pivot bit is set in exactly one row.
    """

    ambient: int
    basis: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def size(self) -> int:
        return 1 << len(self.basis)

    @property
    def pivots(self) -> tuple[int, ...]:
        return tuple(b.bit_length() - 1 for b in self.basis)

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(n, ())

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(n, tuple(1 << j for j in reversed(range(n))))

    def reduce(self, v: int) -> int:
        """Canonical coset representative of v + self."""
        for b in self.basis:
            if v >> (b.bit_length() - 1) & 1:
                v ^= b
        return v

    def reduce_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.array(xs, dtype=np.int64, copy=True)
        for b in self.basis:
            p = b.bit_length() - 1
            hit = (xs >> p) & 1
            xs ^= hit * np.int64(b)
        return xs

    def __contains__(self, v: int) -> bool:
        return self.reduce(v) == 0

    def coords(self, v: int) -> int:
        """Coordinates of a member v in the basis, as a bitset (bit j = row j)."""
        w = 0
        for j, b in enumerate(self.basis):
            if v >> (b.bit_length() - 1) & 1:
                w |= 1 << j
        return w

    def from_coords(self, w: int) -> int:
        v = 0
        j = 0
        while w:
            if w & 1:
                v ^= self.basis[j]
            w >>= 1
            j += 1
        return v

    def elements(self, cap: int = KERNEL_CAP) -> list[int]:
        """All members; entry w is ``from_coords(w)``."""
        if self.dim > cap:
            raise CapExceeded("dim", self.dim, cap)
        out = [0]
        for b in self.basis:
            out += [x ^ b for x in out]
        return out

    def elements_array(self, cap: int = 26) -> np.ndarray:
        if self.dim > cap:
            raise CapExceeded("dim", self.dim, cap)
        if self.ambient > NUMPY_MAX_DIM:
            return np.array(self.elements(cap), dtype=object)
        out = np.zeros(1, dtype=np.int64)
        for b in self.basis:
            out = np.concatenate([out, out ^ np.int64(b)])
        return out

    def truncate(self, k: int) -> "Subspace":
        """Keep the first k basis rows (the highest pivots)."""
        return Subspace(self.ambient, self.basis[:k])

    def is_subspace_of(self, other: "Subspace") -> bool:
        return all(b in other for b in self.basis)

    def __iter__(self) -> Iterator[int]:
        return iter(self.elements())


def span(vectors: Iterable[int], n: Optional[int] = None) -> Subspace:
    """Linear span of bitset vectors in F_2^n, as a reduced echelon Subspace."""
    vectors = list(vectors)
    if n is None:
        n = max((v.bit_length() for v in vectors), default=0)
    pivots: dict[int, int] = {}
    for v in vectors:
        check_vec(v, n)
        _insert(pivots, v)
    return Subspace(n, tuple(pivots[p] for p in sorted(pivots, reverse=True)))


def rank(M: BitMat) -> int:
    return span(M.rows, M.cols).dim


def image_basis(M: BitMat) -> Subspace:
    """Column space {Mx} as a subspace of F_2^rows."""
    return span(M.columns(), M.nrows)


def kernel_basis(M: BitMat) -> Subspace:
    """Null space {x : Mx = 0} as a subspace of F_2^cols."""
    rs = span(M.rows, M.cols)
    pivot_of = dict(zip(rs.pivots, rs.basis))
    vecs = []
    for f in range(M.cols):
        if f in pivot_of:
            continue
        x = 1 << f
        for p, row in pivot_of.items():
            if row >> f & 1:
                x |= 1 << p
        vecs.append(x)
    return span(vecs, M.cols)


@dataclass(frozen=True)
class LinearMap:
    domain_dim: int
    codomain_dim: int
    matrix: BitMat

    def __post_init__(self):
        if self.matrix.shape != (self.codomain_dim, self.domain_dim):
            raise DimensionMismatch(
                f"matrix {self.matrix.shape} vs map {self.domain_dim}->{self.codomain_dim}"
            )

    def __call__(self, x: int) -> int:
        return self.matrix.apply(x)

    apply = __call__

    def apply_many(self, xs: np.ndarray) -> np.ndarray:
        return self.matrix.apply_many(xs)

    def kernel(self) -> Subspace:
        return kernel_basis(self.matrix)

    def image(self) -> Subspace:
        return image_basis(self.matrix)


@dataclass(frozen=True)
class AffineMap:
    """x -> linear @ x + offset, with linear of shape (n, m)."""

    linear: BitMat
    offset: int

    def __post_init__(self):
        check_vec(self.offset, self.linear.nrows)

    def __call__(self, x: int) -> int:
        return self.linear.apply(x) ^ self.offset

    apply = __call__

    def apply_many(self, xs: np.ndarray) -> np.ndarray:
        return self.linear.apply_many(xs) ^ np.int64(self.offset)


@dataclass(frozen=True)
class RestrictedInverse:
    """Inverse of pi restricted to U, up to the kernel of pi on U."""

    ker: Subspace
    image: Subspace
    codomain_dim: int
    _table: tuple[tuple[int, int, int], ...]  # (pivot, image row, preimage row)

    def preimage(self, x: int) -> Optional[int]:
        """Some u in U with pi(u) = x, or None when x is outside pi(U)."""
        check_vec(x, self.codomain_dim)
        pre = 0
        for p, row, src in self._table:
            if x >> p & 1:
                x ^= row
                pre ^= src
        return pre if x == 0 else None

    __call__ = preimage

    def fiber(self, x: int, cap: int = KERNEL_CAP) -> list[int]:
        base = self.preimage(x)
        if base is None:
            return []
        return [base ^ k for k in self.ker.elements(cap)]


def restricted_inverse(pi: LinearMap, U: Subspace) -> RestrictedInverse:
    if U.ambient != pi.domain_dim:
        raise DimensionMismatch(f"U in F_2^{U.ambient}, pi on F_2^{pi.domain_dim}")
    rows: dict[int, tuple[int, int]] = {}
    kernel_vecs = []
    for b in U.basis:
        img, src = pi(b), b
        for p in sorted(rows, reverse=True):
            if img >> p & 1:
                r, s = rows[p]
                img ^= r
                src ^= s
        if img:
            rows[img.bit_length() - 1] = (img, src)
        else:
            kernel_vecs.append(src)
    table = tuple((p, rows[p][0], rows[p][1]) for p in sorted(rows, reverse=True))
    return RestrictedInverse(
        ker=span(kernel_vecs, U.ambient),
        image=span([r for _, r, _ in table], pi.codomain_dim),
        codomain_dim=pi.codomain_dim,
        _table=table,
    )


def random_linear_map(U: Subspace, m: int, rng: np.random.Generator) -> LinearMap:
    """Random linear map on U: basis images are independent uniform points of F_2^m.

    The returned map is defined on all of F_2^n by reading the pivot
    coordinates, which are the basis coordinates of any member of U.
    """
    if m < 1:
        raise ValueError("codomain dimension must be at least 1")
    images = random_vecs(m, U.dim, rng)
    columns = [0] * U.ambient
    for p, img in zip(U.pivots, images):
        columns[p] = img
    return LinearMap(U.ambient, m, BitMat.from_columns(columns, m))


def lift_functional(basis: Subspace, w: int) -> int:
    """A functional lam on F_2^n with lam . basis[j] = bit j of w.

    Supported on the pivot coordinates, so it vanishes on the standard
    complement of the subspace.
    """
    lam = 0
    for j, p in enumerate(basis.pivots):
        if w >> j & 1:
            lam |= 1 << p
    return lam
