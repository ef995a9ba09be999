"""Covering sets of small doubling in F_2^n by subspace translates, with query accounting."""

from .access import (
    MembershipOracle,
    SFAccess,
    gen_planted_affine,
    gen_planted_cover,
    gen_small_image,
    make_sf_access,
    read_set,
    write_set,
)
from .errors import (
    AmbiguityError,
    CapExceeded,
    DensificationFailure,
    DimensionMismatch,
    EmptyInputError,
    IsoViolation,
    ModelFailure,
    ParseError,
    PfrlabError,
)
from .gf2core import BitMat, LinearMap, Subspace, rank, span
from .homo import FuncTable, approx_hom_decompose, delta_image, hom_test_fit, quadruple_agreement
from .pfr import PipelineConfig, PipelineReport, run_pipeline
from .quadfit import QuadPoly, bilinear_quad_fit, exhaustive_quad_fit, quad_to_bilinear, wht
from .setops import PointSet, doubling_constant, ruzsa_cover, sumset, verify_cover

__version__ = "0.1.0"
