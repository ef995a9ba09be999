"""The sparse-set covering pipeline: localize, densify, fit an affine map, cover."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .access import MembershipOracle, RestrictedOracle, SFAccess, make_sf_access
from .errors import (
    AmbiguityError,
    CapExceeded,
    DensificationFailure,
    EmptyInputError,
    IsoViolation,
    ModelFailure,
)
from .gf2core import (
    KERNEL_CAP,
    BitMat,
    LinearMap,
    Subspace,
    image_basis,
    random_linear_map,
    span,
)
from .quadfit import (
    EXHAUSTIVE_CAP,
    TABLE_CAP,
    CorrelationTarget,
    bilinear_quad_fit,
    exhaustive_quad_fit,
    quad_to_bilinear,
)
from .setops import CoverCertificate, PointSet, freiman_iso_check, ruzsa_cover, verify_cover


def hoeffding_count(eps: float, confidence: float, hypotheses: int = 1) -> int:
    """Samples so that every one of ``hypotheses`` means is within eps w.p. >= confidence."""
    delta = 1.0 - confidence
    return math.ceil(math.log(2 * hypotheses / delta) / (2 * eps * eps))


@dataclass
class PipelineConfig:
    K: int
    size: Optional[int] = None
    t_override: Optional[int] = None
    m_override: Optional[int] = None
    m_slack: int = 10
    restarts: int = 8
    kernel_cap: int = KERNEL_CAP
    offset_candidates: int = 16
    offset_draws: int = 1024
    est_eps: float = 0.1
    est_confidence: float = 0.9
    min_agreement: float = 0.0
    backend: str = "bilinear"
    tie_policy: str = "resolve"
    table_cap: int = TABLE_CAP
    exact_iso: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        if self.backend not in ("bilinear", "exhaustive"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.restarts < 0:
            raise ValueError("restart limit must be nonnegative")

    def t(self, size: int) -> int:
        """Number of localization samples: ceil(28 log2|A|) + 56K."""
        if self.t_override is not None:
            return self.t_override
        return math.ceil(28 * math.log2(max(size, 1))) + 56 * self.K

    def m(self, size: int) -> int:
        """Dense-model dimension: ceil(log2|A|) + ceil(4 log2 K) + slack."""
        if self.m_override is not None:
            return self.m_override
        return max(1, math.ceil(math.log2(max(size, 1))) + math.ceil(4 * math.log2(self.K)) + self.m_slack)

    @property
    def estimation_samples(self) -> int:
        return hoeffding_count(self.est_eps, self.est_confidence, self.offset_candidates)


@dataclass
class PipelineReport:
    certificate: Optional[CoverCertificate]
    n: int
    K: int
    m: int
    dimU: int
    dim_ker: int
    samples: int
    membership_queries: int
    restarts: int
    seed: int
    success: bool
    size: int
    agreement: Optional[int] = None
    sf_queries: int = 0
    stage_ms: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def dimV(self) -> Optional[int]:
        return self.certificate.subspace.dim if self.certificate else None

    @property
    def covered(self) -> bool:
        return bool(self.certificate and self.certificate.covered)

    @property
    def cover_size(self) -> Optional[int]:
        return self.certificate.cover_size if self.certificate else None

    def to_dict(self, timings: bool = False) -> dict:
        return {
            "n": self.n,
            "K": self.K,
            "m": self.m,
            "dimU": self.dimU,
            "dimV": self.dimV,
            "cover_size": self.cover_size,
            "covered": self.covered,
            "success": self.success,
            "samples": self.samples,
            "membership_queries": self.membership_queries,
            "restarts": self.restarts,
            "seed": self.seed,
            "stage_ms": {k: round(v, 3) for k, v in self.stage_ms.items()} if timings else None,
        }


def localize(A_oracle: MembershipOracle, t: int, rng: np.random.Generator):
    """Span of t uniform samples of A, and membership access to A cap U."""
    if t < 1:
        raise ValueError(f"need at least one sample, got t={t}")
    if A_oracle.size == 0:
        raise EmptyInputError("cannot localize an empty set")
    pts = [A_oracle.sample(rng) for _ in range(t)]
    U = span(pts, A_oracle.n)
    return U, RestrictedOracle(A_oracle, U)


def dense_model(U: Subspace, Aprime_oracle, m: int, rng: np.random.Generator, R: int = 8,
                cap: int = KERNEL_CAP, audit: Optional[PointSet] = None):
    """Random pi: U -> F_2^m with SF access wired through it.

    With ``audit`` (the enumerated A') each draw is checked by the exact
    kernel criterion and redrawn on failure; otherwise the first draw is
    accepted and collisions surface later as IsoViolation.
    """
    if m < 1:
        raise ValueError("codomain dimension must be at least 1")
    if U.dim - m > cap:
        raise CapExceeded("dim ker", U.dim - m, cap)
    for attempt in range(R + 1):
        pi = random_linear_map(U, m, rng)
        if audit is not None and not freiman_iso_check(pi, audit):
            continue
        return pi, make_sf_access(pi, U, Aprime_oracle, cap)
    raise ModelFailure(f"no Freiman-isomorphic projection in {R + 1} draws (m={m})")


@dataclass
class HomFit:
    M: BitMat
    v: int
    agreement: int
    exact: bool
    candidates: int
    estimates: dict = field(default_factory=dict)


def restricted_hom_fit(sf, config: PipelineConfig, rng: np.random.Generator) -> HomFit:
    """Affine (M, v) agreeing with f on a large part of S.

    ``sf`` needs ``m``, ``n``, ``domain`` (a subspace of F_2^m holding S) and
    ``query_f``.  Fiber answers are memoized within one fit, so every x is
    paid for at most once.
    """
    m, n, D = sf.m, sf.n, sf.domain
    fiber = lru_cache(maxsize=None)(sf.query_f)
    target = CorrelationTarget(m, n, fiber, D)
    if config.backend == "exhaustive":
        if m + n > EXHAUSTIVE_CAP:
            raise CapExceeded("m+n", m + n, EXHAUSTIVE_CAP)
        q, _ = exhaustive_quad_fit(target.table(EXHAUSTIVE_CAP), m + n)
        M = quad_to_bilinear(q, m, n)
        v_fit = None
    else:
        fit = bilinear_quad_fit(target, on_tie=config.tie_policy, table_cap=config.table_cap, rng=rng)
        M, v_fit = fit.M, fit.v

    # candidate offsets from observed points of S
    cands: list[int] = []
    for _ in range(config.offset_draws):
        if len(cands) >= config.offset_candidates:
            break
        x = D.from_coords(int(rng.integers(0, 1 << D.dim))) if D.dim < 63 else _big_draw(D, rng)
        fx = fiber(x)
        if fx is not None:
            z = fx ^ M.apply(x)
            if z not in cands:
                cands.append(z)
    if not cands:
        raise DensificationFailure("no point of S among the offset draws")
    if v_fit is not None and v_fit not in cands:
        cands.append(v_fit)

    # shared empirical estimate for every candidate
    est_pts = [D.from_coords(int(w)) for w in rng.integers(0, 1 << min(D.dim, 62), size=config.estimation_samples)]
    hits = {}
    for x in est_pts:
        fx = fiber(x)
        if fx is not None:
            z = fx ^ M.apply(x)
            hits[z] = hits.get(z, 0) + 1
    estimates = {z: hits.get(z, 0) for z in cands}
    v = min(cands, key=lambda z: (-estimates[z], z))

    # authoritative recount over the whole domain when it is enumerable
    if D.dim <= config.table_cap:
        pts = D.elements_array(cap=config.table_cap)
        Mx = M.apply_many(pts)
        agree = 0
        for x, mx in zip(pts.tolist(), Mx.tolist()):
            fx = fiber(x)
            if fx is not None and fx == mx ^ v:
                agree += 1
        return HomFit(M, v, agree, True, len(cands), estimates)
    scaled = estimates[v] * (1 << D.dim) // max(1, len(est_pts))
    return HomFit(M, v, scaled, False, len(cands), estimates)


def _big_draw(D: Subspace, rng: np.random.Generator) -> int:
    w = 0
    for j in range(D.dim):
        w |= int(rng.integers(0, 2)) << j
    return D.from_coords(w)


def extract_subspace(psi_linear: BitMat, psi_offset: int, cap: int) -> Subspace:
    """Im(M), cut down by dropping the lowest-pivot basis rows until |V| <= cap."""
    V = image_basis(psi_linear)
    keep = V.dim
    while keep > 0 and (1 << keep) > cap:
        keep -= 1
    return V.truncate(keep)


def cover_from_patch(A: PointSet, M: BitMat, v: int, V: Subspace) -> tuple[list[int], Optional[PointSet]]:
    """Representatives of V-cosets covering A, built from the patch A cap (v + Im M).

    ruzsa_cover(patch, A) gives A within X + 2*patch; each x + s there is
    folded to its canonical V-coset representative, and representatives
    whose coset holds no point of A are dropped.
    """
    image = image_basis(M)
    patch_elems = [a for a in A if image.reduce(a ^ v) == 0]
    if not patch_elems:
        return [], None
    patch = PointSet._trusted(A.n, patch_elems)
    X = ruzsa_cover(patch, A).X
    parr = patch.array()
    doubles = np.unique((parr[:, None] ^ parr[None, :]).ravel()) if len(parr) <= 4096 else None
    occupied = set(V.reduce_many(A.array()).tolist())
    reps = set()
    for x in X:
        if doubles is None:
            cand = V.reduce_many(A.array() ^ np.int64(x))
        else:
            cand = V.reduce_many(doubles ^ np.int64(x))
        reps.update(int(c) for c in np.unique(cand) if int(c) in occupied)
    return sorted(reps), patch


def run_pipeline(A_oracle: MembershipOracle, config: PipelineConfig,
                 audit: Optional[PointSet] = None) -> PipelineReport:
    """Localize, densify, fit, extract, then certify the cover by enumeration.

    ``audit`` is the enumerated set used only for certification (and for the
    exact isomorphism check when ``config.exact_iso``); it defaults to the
    oracle's own audit view and never touches the query counters.
    """
    rng = np.random.default_rng(config.seed)
    audit = audit if audit is not None else A_oracle.audit()
    size = config.size if config.size is not None else A_oracle.size
    t, m = config.t(size), config.m(size)
    q0, s0 = A_oracle.membership_queries, A_oracle.sample_draws
    stage_ms: dict[str, float] = {}
    failures: list[str] = []

    def tick(name, since):
        stage_ms[name] = stage_ms.get(name, 0.0) + (time.perf_counter() - since) * 1000

    clock = time.perf_counter()
    U, Ap = localize(A_oracle, t, rng)
    tick("localize", clock)
    Aprime = None
    if config.exact_iso:
        Aprime = PointSet._trusted(audit.n, [a for a in audit if a in U])

    restarts = 0
    dim_ker = max(0, U.dim - m)
    cert, agreement = None, None
    sf_queries = 0
    for attempt in range(config.restarts + 1):
        restarts = attempt
        sf = None
        try:
            clock = time.perf_counter()
            pi, sf = dense_model(U, Ap, m, rng, config.restarts, config.kernel_cap, Aprime)
            dim_ker = sf.ker.dim
            tick("dense_model", clock)
            clock = time.perf_counter()
            fit = restricted_hom_fit(sf, config, rng)
            tick("hom_fit", clock)
        except (IsoViolation, AmbiguityError, DensificationFailure, ModelFailure) as exc:
            failures.append(f"{type(exc).__name__}: {exc}")
            continue
        finally:
            if sf is not None:
                sf_queries += sf.queries_charged
        agreement = fit.agreement
        if agreement < config.min_agreement * (1 << sf.domain.dim):
            failures.append(f"agreement {agreement} below threshold")
            continue
        clock = time.perf_counter()
        V = extract_subspace(fit.M, fit.v, size)
        reps, _ = cover_from_patch(audit, fit.M, fit.v, V)
        cert = verify_cover(audit, V, reps)
        tick("cover", clock)
        if cert.covered:
            break
        failures.append("cover did not verify")

    success = bool(cert is not None and cert.covered and cert.subspace.size <= size
                   and cert.subspace.size <= len(audit))
    return PipelineReport(
        certificate=cert,
        n=A_oracle.n,
        K=config.K,
        m=m,
        dimU=U.dim,
        dim_ker=dim_ker,
        samples=A_oracle.sample_draws - s0,
        membership_queries=A_oracle.membership_queries - q0,
        restarts=restarts,
        seed=config.seed,
        success=success,
        size=size,
        agreement=agreement,
        sf_queries=sf_queries,
        stage_ms=stage_ms,
        failures=failures,
    )
