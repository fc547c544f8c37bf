import numpy as np
import pytest

import oracles
from mavol_lab.directimage import (
    FamilyGram,
    FDInstabilityError,
    base_quadrature,
    curvature_at,
    dual_nakano_check,
    ma_zhang_gap,
    positivity_threshold,
    product_curvature,
    rank_c1_check,
)
from mavol_lab.geometry import FiberedWeight
from mavol_lab.numerics import sphere_rule

FS = FiberedWeight(1, 1)
SEP = FiberedWeight(1, 1, "sep", 0.2)
CROSS = FiberedWeight(1, 1, "cross", 0.1)


@pytest.mark.parametrize("w", [0.3 + 0.4j, -1.2 + 0.1j, 2.5j])
def test_curvature_matches_high_precision_oracle(w):
    lam = curvature_at(FamilyGram(SEP, 2), w).eigenvalues()
    ref = np.array([float(x) for x in oracles.sep_curvature_eigenvalues(2, 0.2, w)])
    assert np.abs(lam - ref).max() <= 1e-7 * ref.max()


@pytest.mark.parametrize("k, w", [(1, 0.0), (4, 0.7 - 0.2j), (8, 2.0), (8, -3.0j)])
def test_product_curvature_is_scalar(k, w):
    W = FiberedWeight(1, 2)
    s = curvature_at(FamilyGram(W, k), w)
    ref = product_curvature(W, k, w)
    assert np.abs(s.hermitian() - ref * np.eye(k + 1)).max() <= 1e-7 * ref


def test_richardson_beats_central():
    fam = FamilyGram(FS, 4)
    w = 1.5 + 0.5j
    ref = product_curvature(FS, 4, w)
    err_c = np.abs(curvature_at(fam, w, scheme="central").eigenvalues() - ref).max()
    err_r = np.abs(curvature_at(fam, w).eigenvalues() - ref).max()
    assert err_r < err_c / 10
    with pytest.raises(ValueError):
        curvature_at(fam, w, scheme="upwind")


def test_curvature_is_frame_independent():
    rng = np.random.default_rng(7)
    N = 5
    frame = np.eye(N) + 0.3 * (rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))
    w = 0.4 - 0.6j
    A0 = curvature_at(FamilyGram(CROSS, 4), w)
    A1 = curvature_at(FamilyGram(CROSS, 4, frame=frame), w)
    # A transforms by similarity: A1 = F^{-1} A0 F
    assert np.allclose(A1.matrix, np.linalg.solve(frame, A0.matrix @ frame), atol=1e-9)
    assert np.allclose(A0.eigenvalues(), A1.eigenvalues(), atol=1e-9)


def test_step_guards():
    with pytest.raises(ValueError):
        FamilyGram(FS, 2, step=1e-9)
    with pytest.raises(ValueError):
        curvature_at(FamilyGram(FS, 2), 0.0, step=1e-8)


def test_corrupted_stencil_reports_instability(monkeypatch):
    # symmetric stencils keep A self-adjoint for any h; a non-Hermitian perturbation must not pass
    fam = FamilyGram(CROSS, 3)
    clean = fam.stencil

    def noisy(w, step=None):
        logs, mats = clean(w, step)
        mats = mats.copy()
        mats[3, 2] += 1e-3 * np.triu(np.ones(mats.shape[-2:]), 1)
        return logs, mats

    monkeypatch.setattr(fam, "stencil", noisy)
    with pytest.raises(FDInstabilityError):
        curvature_at(fam, 0.2 + 0.1j)


@pytest.mark.parametrize("weight", [FS, SEP, CROSS, FiberedWeight(2, 1, "cross", 0.1)])
def test_degree_is_integer_and_exact(weight):
    rep = rank_c1_check(weight, 4)
    assert rep.integrality_defect < 1e-6
    assert rep.degree == pytest.approx(rep.degree_expected, abs=1e-6)
    assert rep.rank == weight.rank(4)


def test_rank_and_degree_leading_terms():
    ks = [4, 8]
    rank_gaps = []
    deg_gaps = []
    for k in ks:
        rep = rank_c1_check(FS, k)
        rank_gaps.append(rep.rank_gap)
        deg_gaps.append(rep.degree_gap)
    assert rank_gaps == pytest.approx([1 / 4, 1 / 8])
    assert deg_gaps[1] < deg_gaps[0]


def test_ma_zhang_product_gap_vanishes():
    rep = ma_zhang_gap(FS, 6)
    assert rep.sup < 1e-6


def test_ma_zhang_perturbed_gap_bounded():
    sups = [ma_zhang_gap(CROSS, k, base_quadrature(6, 4)).sup for k in (4, 8)]
    assert 0 < sups[0] and sups[1] / sups[0] <= 2.0


def test_dual_nakano_positive_and_threshold():
    base = sphere_rule(4, 4)
    thr, mins = positivity_threshold(SEP, [2, 4], base)
    assert thr == 2
    assert all(m > 0 for m in mins.values())
    s = curvature_at(FamilyGram(SEP, 2, base), 0.5)
    assert dual_nakano_check(s) == pytest.approx(s.eigenvalues()[0])


def test_threads_do_not_change_results():
    base = sphere_rule(3, 4)
    a = [s.matrix for s in FamilyGram(CROSS, 3, base, threads=1).samples()]
    b = [s.matrix for s in FamilyGram(CROSS, 3, base, threads=3).samples()]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
