"""Query/sample access to sets, the simulated dense-model access, and planted instances."""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import CapExceeded, DimensionMismatch, EmptyInputError, IsoViolation, ParseError
from .gf2core import (
    KERNEL_CAP,
    BitMat,
    LinearMap,
    Subspace,
    check_vec,
    from_bits,
    random_vec,
    random_vecs,
    restricted_inverse,
    span,
    to_bits,
)
from .setops import PointSet, doubling_constant


class MembershipOracle:
    """Counts every membership query and uniform sample made against a set.

    The backing set is reachable only through ``query``/``sample``, plus
    ``audit`` which exists for after-the-fact verification and is never
    called by the algorithms.
    """

    def __init__(self, backing: PointSet):
        self._backing = backing
        self._lock = threading.Lock()
        self.membership_queries = 0
        self.sample_draws = 0

    @property
    def n(self) -> int:
        return self._backing.n

    @property
    def size(self) -> int:
        return len(self._backing)

    def query(self, x: int) -> int:
        check_vec(x, self._backing.n)
        with self._lock:
            self.membership_queries += 1
        return 1 if x in self._backing else 0

    def sample(self, rng: np.random.Generator) -> int:
        if not len(self._backing):
            raise EmptyInputError("cannot sample from an empty set")
        with self._lock:
            self.sample_draws += 1
        return self._backing.sample(rng)

    def audit(self) -> PointSet:
        return self._backing

    def reset_counters(self):
        with self._lock:
            self.membership_queries = 0
            self.sample_draws = 0


def query(oracle, x: int) -> int:
    return oracle.query(x)


def sample(oracle, rng: np.random.Generator) -> int:
    return oracle.sample(rng)


class RestrictedOracle:
    """Membership in A cap U at the price of exactly one query to A."""

    def __init__(self, base: MembershipOracle, U: Subspace):
        if U.ambient != base.n:
            raise DimensionMismatch(f"U in F_2^{U.ambient}, oracle on F_2^{base.n}")
        self.base = base
        self.U = U
        self.membership_queries = 0

    @property
    def n(self) -> int:
        return self.base.n

    def query(self, x: int) -> int:
        self.membership_queries += 1
        hit = self.base.query(x)
        return 1 if hit and x in self.U else 0


class SFAccess:
    """Queries to S = pi(A') and f = (pi restricted to A')^{-1} by fiber enumeration.

    For x in pi(U), both ``query_S`` and ``query_f`` walk the whole fiber
    preimage(x) + ker, so each costs exactly 2^{dim ker} queries to A'.
    Points outside pi(U) cannot lie in S and are answered without queries.
    """

    def __init__(self, pi: LinearMap, U: Subspace, A_oracle, cap: int = KERNEL_CAP):
        self.pi = pi
        self.U = U
        self.inverse = restricted_inverse(pi, U)
        self.ker = self.inverse.ker
        if self.ker.dim > cap:
            raise CapExceeded("dim ker", self.ker.dim, cap)
        self.A_oracle = A_oracle
        self.calls = 0
        self.fiber_calls = 0
        self._kernel = self.ker.elements(cap)

    @property
    def m(self) -> int:
        return self.pi.codomain_dim

    @property
    def n(self) -> int:
        return self.pi.domain_dim

    @property
    def domain(self) -> Subspace:
        """pi(U), a subspace of F_2^m containing S."""
        return self.inverse.image

    @property
    def cost_per_query(self) -> int:
        return len(self._kernel)

    def _hits(self, x: int) -> list[int]:
        self.calls += 1
        base = self.inverse.preimage(x)
        if base is None:
            return []
        self.fiber_calls += 1
        return [base ^ k for k in self._kernel if self.A_oracle.query(base ^ k)]

    def query_S(self, x: int) -> int:
        return 1 if self._hits(x) else 0

    def query_f(self, x: int) -> Optional[int]:
        """The unique member of A' over x, or None when x is not in S."""
        hits = self._hits(x)
        if len(hits) > 1:
            raise IsoViolation(x, hits)
        return hits[0] if hits else None

    @property
    def queries_charged(self) -> int:
        return self.fiber_calls * len(self._kernel)


def make_sf_access(pi: LinearMap, U: Subspace, A_oracle, cap: int = KERNEL_CAP) -> SFAccess:
    return SFAccess(pi, U, A_oracle, cap)


def random_subspace(n: int, dim: int, rng: np.random.Generator) -> Subspace:
    if not 0 <= dim <= n:
        raise ValueError(f"cannot draw a {dim}-dimensional subspace of F_2^{n}")
    vecs: list[int] = []
    V = Subspace.zero(n)
    while V.dim < dim:
        v = random_vec(n, rng)
        if v not in V:
            vecs.append(v)
            V = span(vecs, n)
    return V


@dataclass
class PlantedInstance:
    set: PointSet
    hidden_V: Subspace
    hidden_reps: list[int]
    n: int
    dimV: int
    c: int
    noise: float
    doubling: int
    seed: Optional[int] = None
    clean_part: PointSet = field(default=None, repr=False)

    def sidecar(self) -> dict:
        return {
            "kind": "cover",
            "n": self.n,
            "dimV": self.dimV,
            "cosets": self.c,
            "reps": [to_bits(r, self.n) for r in self.hidden_reps],
            "basis": [to_bits(b, self.n) for b in self.hidden_V.basis],
            "noise": self.noise,
            "doubling": self.doubling,
            "seed": self.seed,
        }


def gen_planted_cover(n: int, dimV: int, c: int, noise: float, rng: np.random.Generator,
                      seed: Optional[int] = None) -> PlantedInstance:
    """Union of c random cosets of a random dimV-subspace, with optional noise.

    ``noise * |A|`` members (rounded down) are swapped for uniform points
    outside the planted union, keeping |A| fixed.
    """
    if not 0 <= dimV <= n:
        raise ValueError(f"need 0 <= dimV <= n, got dimV={dimV}, n={n}")
    if c < 1 or c > 1 << (n - dimV):
        raise ValueError(f"need 1 <= c <= 2^(n-dimV), got c={c}")
    if not 0 <= noise < 1:
        raise ValueError(f"noise must lie in [0, 1), got {noise}")
    V = random_subspace(n, dimV, rng)
    reps: list[int] = []
    seen = set()
    while len(reps) < c:
        r = V.reduce(random_vec(n, rng))
        if r not in seen:
            seen.add(r)
            reps.append(r)
    velems = V.elements(cap=n)
    union = sorted(r ^ v for r in reps for v in velems)
    clean = PointSet(n, union)
    k = int(math.floor(noise * len(union)))
    if k and (1 << n) - len(union) < k:
        raise ValueError("not enough room outside the planted union for the noise")
    members = list(union)
    if k:
        drop = set(rng.choice(len(members), size=k, replace=False).tolist())
        kept = [x for i, x in enumerate(members) if i not in drop]
        taken = set(union)
        extra = []
        while len(extra) < k:
            x = random_vec(n, rng)
            if x not in taken:
                taken.add(x)
                extra.append(x)
        members = sorted(kept + extra)
    A = PointSet(n, members)
    clean_part = PointSet(n, [x for x in members if x in clean])
    return PlantedInstance(A, V, reps, n, dimV, c, noise, doubling_constant(A), seed, clean_part)


@dataclass
class PlantedAffine:
    """f(x) = Mx + v on exactly ``agree`` points, something else elsewhere."""

    m: int
    n: int
    values: np.ndarray
    M: BitMat
    v: int
    agree: int
    rho: float
    seed: Optional[int] = None

    def sidecar(self) -> dict:
        return {
            "kind": "affine",
            "m": self.m,
            "n": self.n,
            "M": [to_bits(r, self.m) for r in self.M.rows],
            "v": to_bits(self.v, self.n),
            "rho": self.rho,
            "agree": self.agree,
            "seed": self.seed,
        }


def gen_planted_affine(m: int, n: int, rho: float, rng: np.random.Generator,
                       seed: Optional[int] = None) -> PlantedAffine:
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if m < 0 or n < 0:
        raise ValueError("dimensions must be nonnegative")
    M = BitMat.random(n, m, rng)
    v = random_vec(n, rng)
    size = 1 << m
    xs = np.arange(size, dtype=np.int64)
    truth = M.apply_many(xs) ^ np.int64(v)
    agree = min(size, math.ceil(rho * size)) if n else size
    good = np.zeros(size, dtype=bool)
    good[rng.choice(size, size=agree, replace=False)] = True
    values = truth.copy()
    bad = np.flatnonzero(~good)
    if len(bad):
        # a uniform nonzero shift keeps these points off the planted map
        shift = rng.integers(1, 1 << n, size=len(bad), dtype=np.int64)
        values[bad] ^= shift
    return PlantedAffine(m, n, values, M, v, agree, rho, seed)


@dataclass
class SmallImage:
    """f(x) = Mx + h(x) where h takes values in a small subspace H."""

    m: int
    n: int
    values: np.ndarray
    M: BitMat
    H: Subspace
    h_image: list[int]
    imgk: int
    seed: Optional[int] = None

    def sidecar(self) -> dict:
        return {
            "kind": "smallimage",
            "m": self.m,
            "n": self.n,
            "M": [to_bits(r, self.m) for r in self.M.rows],
            "image": [to_bits(w, self.n) for w in self.h_image],
            "imgk": self.imgk,
            "seed": self.seed,
        }


def gen_small_image(m: int, n: int, imgK: int, rng: np.random.Generator,
                    zero_rate: float = 0.75, seed: Optional[int] = None) -> SmallImage:
    """f = Mx + h(x) with Im(h) inside a random subspace H, |H| <= imgK.

    Since Im(h) lies in H, the coboundary set {f(x)+f(y)+f(x+y)} lies in H
    too, so its size is at most imgK.  h(x) is 0 with probability
    ``zero_rate`` and uniform on the rest of H otherwise.
    """
    if imgK < 1:
        raise ValueError(f"imgK must be at least 1, got {imgK}")
    if not 0 <= zero_rate <= 1:
        raise ValueError("zero_rate must lie in [0, 1]")
    k = min(imgK.bit_length() - 1, n)
    M = BitMat.random(n, m, rng)
    H = random_subspace(n, k, rng)
    helems = np.array(H.elements(cap=n), dtype=np.int64)
    size = 1 << m
    h = np.zeros(size, dtype=np.int64)
    if len(helems) > 1:
        nonzero = rng.random(size) >= zero_rate
        h[nonzero] = helems[rng.integers(1, len(helems), size=int(nonzero.sum()))]
    values = M.apply_many(np.arange(size, dtype=np.int64)) ^ h
    image = sorted(set(h.tolist()))
    return SmallImage(m, n, values, M, H, image, imgK, seed)


# -- set files ---------------------------------------------------------------

def write_set(path, A: PointSet):
    lines = [f"n={A.n} count={len(A)}"]
    lines += [to_bits(x, A.n) for x in A]
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(path, text: str, keys: tuple[str, ...]) -> dict[str, int]:
    fields = {}
    for tok in text.split():
        if "=" not in tok:
            raise ParseError(path, 1, f"bad header token {tok!r}")
        k, v = tok.split("=", 1)
        try:
            fields[k] = int(v)
        except ValueError:
            raise ParseError(path, 1, f"non-integer header value {tok!r}") from None
    missing = [k for k in keys if k not in fields]
    if missing:
        raise ParseError(path, 1, f"header missing {', '.join(missing)}")
    return fields


def read_set(path) -> PointSet:
    """Parse a set file: header ``n=<int> count=<int>``, then one bitstring per line."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError(path, 1, "empty file")
    hdr = _parse_header(path, lines[0], ("n", "count"))
    n, count = hdr["n"], hdr["count"]
    body = lines[1:]
    while body and not body[-1].strip():
        body.pop()
    elems = []
    seen = set()
    for i, line in enumerate(body, start=2):
        s = line.strip()
        if len(s) != n or (s and set(s) - {"0", "1"}):
            raise ParseError(path, i, f"expected a {n}-bit binary string, got {s!r}")
        x = from_bits(s)
        if x in seen:
            raise ParseError(path, i, f"duplicate element {s}")
        seen.add(x)
        elems.append(x)
    if len(elems) != count:
        raise ParseError(path, len(lines) + 1, f"header says count={count}, found {len(elems)}")
    return PointSet._trusted(n, elems)


def write_sidecar(path, data: dict):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_sidecar(path) -> dict:
    return json.loads(Path(path).read_text())


def instance_from_sidecar(A: PointSet, data: dict) -> tuple[Subspace, list[int]]:
    n = data["n"]
    V = span([from_bits(b) for b in data.get("basis", [])], n)
    reps = [from_bits(r) for r in data["reps"]]
    return V, reps


__all__ = [
    "MembershipOracle",
    "RestrictedOracle",
    "SFAccess",
    "make_sf_access",
    "query",
    "sample",
    "PlantedInstance",
    "PlantedAffine",
    "SmallImage",
    "gen_planted_cover",
    "gen_planted_affine",
    "gen_small_image",
    "random_subspace",
    "random_vecs",
    "read_set",
    "write_set",
    "read_sidecar",
    "write_sidecar",
]
