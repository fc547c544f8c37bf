import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from mavol_lab.bergman import gram_matrix
from mavol_lab.geometry import NotAmpleError, fs_base_coefficient, schur_horizontal
from mavol_lab.sympow import (
    ProjectivizedWeight,
    SplitBundle,
    griffiths_check,
    predicted_horizontal,
    projectivized_crosscheck,
    projectivized_kahler,
    quadrature_rescaled_mavol,
    sym_power_weights,
    sympow_limit,
    sympow_mavol_rescaled,
)

degrees = st.lists(st.integers(1, 6), min_size=1, max_size=4)


def test_split_bundle_normalises():
    b = SplitBundle((3, 1))
    assert b.degrees == (1, 3)
    assert b.rank == 2 and b.ample and not b.projectively_flat
    assert SplitBundle((2, 2)).projectively_flat
    assert not SplitBundle((0, 1)).ample
    with pytest.raises(ValueError):
        SplitBundle(())
    with pytest.raises(ValueError):
        SplitBundle((1.5, 2))


def test_sym_power_examples():
    assert sym_power_weights(SplitBundle((1, 3)), 2).values() == [2, 4, 6]
    assert sym_power_weights(SplitBundle((1, 3, 4)), 1).values() == [1, 3, 4]
    assert sym_power_weights(SplitBundle((1, 2, 5)), 2).size == 6
    with pytest.raises(ValueError):
        sym_power_weights(SplitBundle((1, 2)), 0)


@settings(max_examples=50, deadline=None)
@given(degrees, st.integers(1, 12))
def test_spectrum_cardinality_and_means(degs, k):
    b = SplitBundle(tuple(degs))
    spec = sym_power_weights(b, k)
    assert spec.size == math.comb(k + b.rank - 1, b.rank - 1)
    # each summand appears with the same average weight k / r
    assert spec.arithmetic_mean == Fraction(k * sum(b.degrees), b.rank)
    ratio = sympow_mavol_rescaled(b, k)
    if b.projectively_flat:
        assert ratio == 1.0
    else:
        assert ratio < 1.0
        assert spec.gm_am_power() < 1


@settings(max_examples=30, deadline=None)
@given(degrees, st.integers(1, 10), st.integers(2, 5))
def test_gm_am_homogeneous_of_degree_zero(degs, k, c):
    a = sympow_mavol_rescaled(SplitBundle(tuple(degs)), k)
    b = sympow_mavol_rescaled(SplitBundle(tuple(c * d for d in degs)), k)
    assert a == pytest.approx(b, rel=1e-14)


@pytest.mark.parametrize("k", [1, 2, 17, 200])
def test_flat_bundles_exactly_one(k):
    assert sympow_mavol_rescaled(SplitBundle((3, 3)), k) == 1.0


def test_one_two_at_k2():
    assert sympow_mavol_rescaled(SplitBundle((1, 2)), 2) == pytest.approx(24 ** (1 / 3) / 3, abs=1e-15)


@pytest.mark.parametrize("k", [3, 20, 128])
def test_one_two_against_high_precision(k):
    ref = float(oracles.gm_over_am(oracles.sympow_degrees_rank2(1, 2, k)))
    assert sympow_mavol_rescaled(SplitBundle((1, 2)), k) == pytest.approx(ref, rel=1e-13)


def test_limit_and_rate():
    lim = sympow_limit(SplitBundle((1, 2)))
    assert lim == pytest.approx(float(oracles.sympow_limit_12()), rel=1e-14)
    assert sympow_limit(SplitBundle((2, 2))) == 1.0
    ks = [16, 32, 64, 128]
    errs = [abs(sympow_mavol_rescaled(SplitBundle((1, 2)), k) - lim) for k in ks]
    # O(1/k): k * error settles
    scaled = [k * e for k, e in zip(ks, errs)]
    assert abs(scaled[-1] - scaled[-2]) < 0.05 * scaled[-1]
    with pytest.raises(ValueError):
        sympow_limit(SplitBundle((1, 2, 3)))


def test_non_ample_rejected():
    with pytest.raises(NotAmpleError):
        sympow_mavol_rescaled(SplitBundle((0, 2)), 3)
    with pytest.raises(NotAmpleError):
        ProjectivizedWeight(0, 1)


@pytest.mark.parametrize("a1, a2", [(1, 1), (1, 2), (2, 5)])
def test_projectivized_hessian_matches_symbolic(a1, a2):
    fn = oracles.projectivized_hessian(a1, a2)
    for zeta, w in [(0.3 + 0.1j, -0.2 + 0.7j), (2.0j, 1.5), (-0.5, 0.0)]:
        ref = [complex(v) for v in oracles.eval_at(fn, zeta, w)]
        m = projectivized_kahler(a1, a2, zeta, w)
        assert complex(m.zz) == pytest.approx(ref[0], rel=1e-12)
        assert complex(m.ww) == pytest.approx(ref[1], rel=1e-12)
        assert complex(m.zw) == pytest.approx(ref[2], rel=1e-12, abs=1e-15)


def test_griffiths_flat_and_aligned_cases():
    zeta = np.array([0.0, 0.4 - 0.3j, 3.0])
    w = 0.7 + 0.2j
    h = schur_horizontal(projectivized_kahler(2, 2, zeta, w))
    assert np.allclose(h, 2 * fs_base_coefficient(w), rtol=1e-12)
    h0 = schur_horizontal(projectivized_kahler(1, 3, np.array([0.0]), w))
    assert h0[0] == pytest.approx(fs_base_coefficient(w), rel=1e-12)
    assert predicted_horizontal(1, 3, 0.0, w) == pytest.approx(fs_base_coefficient(w))


@pytest.mark.parametrize("degs", [(1, 1), (1, 2), (2, 3), (1, 4)])
def test_griffiths_identity_random_points(degs):
    rng = np.random.default_rng(11)
    zeta = rng.normal(size=100) + 1j * rng.normal(size=100)
    w = rng.normal(size=100) + 1j * rng.normal(size=100)
    assert griffiths_check(SplitBundle(degs), zeta, w) <= 1e-8
    with pytest.raises(ValueError):
        griffiths_check(SplitBundle((1, 2, 3)), zeta, w)


@pytest.mark.parametrize("k, j", [(2, 0), (2, 1), (3, 2)])
def test_projectivized_gram_against_l2_oracle(k, j):
    w = 0.3
    H = gram_matrix(ProjectivizedWeight(1, 2), w, k).monomial()
    assert H[j, j].real == pytest.approx(float(oracles.projectivized_l2(1, 2, k, j, w)), rel=1e-9)


def test_crosscheck_k1_cases():
    H = gram_matrix(ProjectivizedWeight(1, 2), 0.3 + 0.2j, 1).monomial()
    assert abs(H[0, 1]) < 1e-14 * abs(H[0, 0])
    flat = projectivized_crosscheck(SplitBundle((2, 2)), 1)
    assert flat.gap < 1e-10


@pytest.mark.parametrize("k", [1, 2, 4, 6])
def test_crosscheck_gap_and_scale(k):
    res = projectivized_crosscheck(SplitBundle((1, 2)), k)
    assert res.gap <= 1e-6
    assert res.scale == pytest.approx(1 / (k + 1), rel=1e-8)
    with pytest.raises(ValueError):
        projectivized_crosscheck(SplitBundle((1, 2)), 7)


def test_quadrature_route_matches_exact_value():
    rescaled, deg = quadrature_rescaled_mavol(SplitBundle((1, 2)), 2)
    assert deg == pytest.approx(9.0, abs=1e-5)
    assert rescaled == pytest.approx(sympow_mavol_rescaled(SplitBundle((1, 2)), 2), abs=1e-6)
