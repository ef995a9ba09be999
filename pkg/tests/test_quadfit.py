import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfrlab.access import gen_planted_affine
from pfrlab.errors import AmbiguityError, CapExceeded
from pfrlab.gf2core import BitMat, Subspace
from pfrlab.quadfit import (
    CorrelationTarget,
    QuadPoly,
    bilinear_quad_fit,
    correlation,
    exhaustive_quad_fit,
    fwht,
    quad_to_bilinear,
    second_difference,
    wht,
)


def hadamard(d):
    z = np.arange(1 << d)
    return 1 - 2 * (np.array([[bin(a & b).count("1") & 1 for b in z] for a in z]))


def naive_quad_eval(pairs, linear, constant, z):
    acc = constant
    for i, j in pairs:
        acc ^= (z >> i) & (z >> j) & 1
    acc ^= bin(linear & z).count("1") & 1
    return acc


def test_character_is_one_hot():
    d = 6
    for a in (0, 5, 63):
        h = [1 - 2 * (bin(a & y).count("1") & 1) for y in range(1 << d)]
        spectrum = wht(h)
        assert spectrum[a] == 1
        assert all(spectrum[z] == 0 for z in range(1 << d) if z != a)


def test_constant_table():
    assert wht([1] * 8)[0] == 1


def test_wht_rejects_bad_length():
    with pytest.raises(ValueError):
        wht([1, 1, 1])


@pytest.mark.parametrize("d", range(1, 9))
def test_wht_matches_naive_transform(d, rng):
    h = rng.choice([-1, 1], size=1 << d)
    assert (fwht(h) == hadamard(d) @ h).all()


def test_wht_parseval_and_involution(rng):
    h = rng.choice([-1, 1], size=1 << 10)
    spectrum = wht(h)
    assert spectrum.energy_scaled() == (1 << 10) * int((h * h).sum())
    assert (fwht(fwht(h)) == (1 << 10) * h).all()


def test_exhaustive_recovers_planted_quadratic():
    q0 = QuadPoly.from_pairs(4, [(0, 1), (2, 3), (1, 3)], linear=0b0101, constant=1)
    g = 1 - 2 * q0.evaluate_all()
    q, corr = exhaustive_quad_fit(g)
    assert corr == 1
    assert (q.evaluate_all() == q0.evaluate_all()).all()


def test_exhaustive_zero_table():
    q, corr = exhaustive_quad_fit(np.zeros(16, dtype=np.int64))
    assert corr == 0
    assert q == QuadPoly.zero(4)


def test_exhaustive_cap():
    with pytest.raises(CapExceeded):
        exhaustive_quad_fit(np.ones(256, dtype=np.int64), cap=7)
    with pytest.raises(CapExceeded):
        exhaustive_quad_fit(np.ones(128, dtype=np.int64), cap=6)


@pytest.mark.parametrize("seed", range(3))
def test_exhaustive_is_true_argmax_d5(seed):
    d = 5
    rng = np.random.default_rng(seed)
    g = rng.choice([-1, 1], size=1 << d)
    _, corr = exhaustive_quad_fit(g)
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    best = 0
    for k in range(len(pairs) + 1):
        for chosen in itertools.combinations(pairs, k):
            for linear in range(1 << d):
                s = sum(int(g[z]) * (1 - 2 * naive_quad_eval(chosen, linear, 0, z)) for z in range(1 << d))
                best = max(best, abs(s))
    assert corr == Fraction(best, 1 << d)


def test_quad_to_bilinear_examples(rng):
    M0 = BitMat.random(3, 4, rng)
    assert quad_to_bilinear(QuadPoly.bilinear(M0, 0b101), 4, 3) == M0
    only_x = QuadPoly.from_pairs(7, [(0, 1), (2, 3)], linear=0b11)
    assert quad_to_bilinear(only_x, 4, 3) == BitMat.zeros(3, 4)


quad_strategy = st.tuples(st.integers(0, 2**45 - 1), st.integers(0, 1023), st.integers(0, 1))


@settings(max_examples=25, deadline=None)
@given(quad_strategy)
def test_second_difference_is_bilinear(params):
    form_bits, linear, constant = params
    m = n = 5
    pairs = [(i, j) for i in range(10) for j in range(i + 1, 10)]
    chosen = [p for k, p in enumerate(pairs) if form_bits >> k & 1]
    q = QuadPoly.from_pairs(10, chosen, linear=linear, constant=constant)
    M = quad_to_bilinear(q, m, n)
    for x in range(1 << m):
        mx = M.apply(x)
        for y in range(1 << n):
            assert second_difference(q, x, y, m) == bin(mx & y).count("1") & 1


def test_quad_eval_matches_naive(rng):
    pairs = [(0, 2), (1, 3), (2, 4)]
    q = QuadPoly.from_pairs(5, pairs, linear=0b10011, constant=1)
    table = q.evaluate_all()
    for z in range(32):
        assert q(z) == table[z] == naive_quad_eval(pairs, 0b10011, 1, z)


def table_target(values, m, n, domain=None):
    return CorrelationTarget(m, n, lambda x: int(values[x]), domain)


def test_bilinear_recovers_exact_linear_map(rng):
    m, n = 7, 5
    M = BitMat.random(n, m, rng)
    values = M.apply_many(np.arange(1 << m))
    fit = bilinear_quad_fit(table_target(values, m, n))
    assert fit.M == M and fit.v == 0 and fit.correlation == 1


def test_bilinear_sampled_path_recovers_linear_map(rng):
    m, n = 9, 4
    M = BitMat.random(n, m, rng)
    values = M.apply_many(np.arange(1 << m)) ^ 0b0110
    fit = bilinear_quad_fit(table_target(values, m, n), table_cap=4, rng=rng)
    assert fit.M == M and fit.v == 0b0110


def exact_correlation(values, m, n, q):
    """E over the full 2^{m+n} table of g(x,y)(-1)^{q(x,y)}."""
    y = np.arange(1 << n)
    G = 1 - 2 * (np.array([[bin(int(values[x]) & int(b)).count("1") & 1 for b in y] for x in range(1 << m)]))
    g = G.T.reshape(-1)
    return correlation(g, q)


def test_bilinear_planted_correlation():
    good = 0
    for seed in range(30):
        inst = gen_planted_affine(8, 6, 0.6, np.random.default_rng(seed))
        fit = bilinear_quad_fit(table_target(inst.values, 8, 6), on_tie="resolve")
        corr = exact_correlation(inst.values, 8, 6, fit.poly)
        assert corr == fit.correlation
        good += corr >= Fraction(5, 10)
    assert good >= 20


def test_bilinear_ambiguity_raises():
    # the AND function: all four Walsh coefficients have magnitude 1/2
    values = [0, 0, 0, 1]
    with pytest.raises(AmbiguityError) as err:
        bilinear_quad_fit(table_target(values, 2, 1), on_tie="raise")
    assert err.value.row == 0 and len(err.value.candidates) >= 2
    fit = bilinear_quad_fit(table_target(values, 2, 1), on_tie="resolve")
    assert fit.correlation == Fraction(3, 4)


def test_bilinear_respects_restricted_domain(rng):
    # S inside a 3-dimensional subspace of F_2^6
    D = Subspace(6, (0b100100, 0b010010, 0b001001))
    M = BitMat.random(4, 6, rng)
    vals = {x: M.apply(x) ^ 0b1001 for x in D.elements()}
    target = CorrelationTarget(6, 4, vals.get, D)
    fit = bilinear_quad_fit(target)
    assert all(fit.M.apply(x) ^ fit.v == vals[x] for x in D.elements())
