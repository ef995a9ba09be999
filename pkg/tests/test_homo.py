import itertools
from fractions import Fraction

import numpy as np
import pytest

from pfrlab.access import gen_planted_affine, gen_small_image
from pfrlab.errors import CapExceeded, ParseError
from pfrlab.gf2core import BitMat
from pfrlab.homo import (
    FuncTable,
    approx_hom_decompose,
    delta_image,
    hom_test_fit,
    quadruple_agreement,
    read_table,
    residual_image,
    write_table,
)
from pfrlab.pfr import PipelineConfig


def brute_quadruple(f):
    v = f.values
    x = np.arange(1 << f.m)
    x1, x2, x3 = np.meshgrid(x, x, x, indexing="ij")
    x4 = x1 ^ x2 ^ x3
    return Fraction(int(((v[x1] ^ v[x2]) == (v[x3] ^ v[x4])).sum()), 1 << (3 * f.m))


def exhaustive_affine_best(f):
    xs = np.arange(1 << f.m)
    best = 0
    for bits in range(1 << (f.m * f.n)):
        rows = tuple((bits >> (f.m * i)) & ((1 << f.m) - 1) for i in range(f.n))
        img = BitMat(rows, f.m).apply_many(xs)
        for v in range(1 << f.n):
            best = max(best, int(((img ^ v) == f.values).sum()))
    return best


def test_affine_has_agreement_one(rng):
    inst = gen_planted_affine(6, 4, 1.0, rng)
    assert quadruple_agreement(FuncTable(6, 4, inst.values)) == 1


def test_quadruple_exact_matches_brute_and_sampled(rng):
    f = FuncTable(6, 4, rng.integers(0, 16, size=64))
    exact = quadruple_agreement(f)
    assert exact == brute_quadruple(f)
    est = quadruple_agreement(f, "sampled", rng=rng, samples=20_000)
    sigma = (float(exact) * (1 - float(exact)) / 20_000) ** 0.5
    assert abs(float(est) - float(exact)) <= 3 * sigma


def test_quadruple_planted_subspace_half(rng):
    inst = gen_planted_affine(5, 3, 0.5, rng)
    f = FuncTable(5, 3, inst.values)
    assert quadruple_agreement(f) == brute_quadruple(f)


def test_quadruple_cap():
    with pytest.raises(CapExceeded):
        quadruple_agreement(FuncTable(11, 1, np.zeros(2048, dtype=np.int64)))


def test_delta_image_linear(rng):
    M = BitMat.random(4, 6, rng)
    f = FuncTable(6, 4, M.apply_many(np.arange(64)))
    assert list(delta_image(f)) == [0]


def test_delta_image_two_valued(rng):
    M = BitMat.random(4, 6, rng)
    h = rng.integers(0, 2, size=64) * 0b1010
    f = FuncTable(6, 4, M.apply_many(np.arange(64)) ^ h)
    assert set(delta_image(f)) <= {0, 0b1010}


def test_delta_image_loop_order_oracle(rng):
    f = FuncTable(5, 4, rng.integers(0, 16, size=32))
    swapped = {int(f.values[x] ^ f.values[y] ^ f.values[x ^ y]) for y in range(32) for x in range(32)}
    assert set(delta_image(f)) == swapped


def test_delta_image_cap():
    with pytest.raises(CapExceeded):
        delta_image(FuncTable(12, 1, np.zeros(4096, dtype=np.int64)))


def test_hom_fit_exact_affine(rng):
    inst = gen_planted_affine(7, 5, 1.0, rng)
    fit = hom_test_fit(FuncTable(7, 5, inst.values), PipelineConfig(K=1, seed=1))
    assert fit.agreement == 128 and fit.M == inst.M and fit.v == inst.v


def test_hom_fit_partial_agreement():
    good = 0
    for seed in range(30):
        inst = gen_planted_affine(8, 6, 0.4, np.random.default_rng(seed))
        fit = hom_test_fit(FuncTable(8, 6, inst.values), PipelineConfig(K=1, seed=seed))
        good += fit.agreement >= 0.3 * 256
    assert good >= 20


def test_hom_fit_small_against_exhaustive():
    for seed in range(5):
        f = FuncTable(3, 3, np.random.default_rng(seed).integers(0, 8, size=8))
        fit = hom_test_fit(f, PipelineConfig(K=1, seed=seed))
        assert fit.agreement >= exhaustive_affine_best(f) - 1


def test_approx_hom_linear(rng):
    M = BitMat.random(5, 6, rng)
    f = FuncTable(6, 5, M.apply_many(np.arange(64)))
    res = approx_hom_decompose(f, PipelineConfig(K=1))
    assert res.M == M and list(res.residual_image) == [0]
    assert res.delta_size == 1 and res.residual_image_size == 1


@pytest.mark.parametrize("seed", range(6))
def test_approx_hom_bound_mechanics(seed):
    rng = np.random.default_rng(seed)
    si = gen_small_image(7, 5, 4, rng)
    f = FuncTable(7, 5, si.values)
    res = approx_hom_decompose(f, PipelineConfig(K=4, seed=seed))
    assert res.residual_image == residual_image(f, res.M)
    assert res.residual_image_size <= res.cover_size * res.delta_size ** 2


def test_table_round_trip(tmp_path, rng):
    f = FuncTable(4, 3, rng.integers(0, 8, size=16))
    p = tmp_path / "f.tab"
    write_table(p, f)
    g = read_table(p)
    assert (g.values == f.values).all() and (g.m, g.n) == (4, 3)


def test_truncated_table(tmp_path):
    p = tmp_path / "f.tab"
    p.write_text("m=2 n=2\n00\n01\n10\n")
    with pytest.raises(ParseError) as err:
        read_table(p)
    assert "expected 4 values" in str(err.value)


def test_functable_validation():
    with pytest.raises(ValueError):
        FuncTable(2, 2, [0, 1, 2])
    with pytest.raises(ValueError):
        FuncTable(1, 1, [0, 2])
