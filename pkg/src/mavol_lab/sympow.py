"""Symmetric powers of split bundles O(a_1) + ... + O(a_r) over the projective line.

With the Fubini-Study metric on every summand, the curvature of S^k F is
diagonal in the monomial basis with eigenvalues ``sum m_i a_i`` times the
unit-mass base form, so the rescaled MAVol is exactly GM / AM of that list.

Rank-two bundles are also realised on the projectivised dual P(F*): fibre
coordinate zeta, weight ``Phi = log(S_1 + |zeta|^2 S_2)`` with
``S_i = (1 + |w|^2)^{a_i}``, whose direct images recover S^k F.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations_with_replacement

import numpy as np

from .bergman import gram_matrix
from .geometry import (
    TWO_PI,
    KahlerCoefficients,
    NotAmpleError,
    audit_grid,
    check_positivity,
    fs_base_coefficient,
    fs_density,
    schur_horizontal,
)

MAX_CROSSCHECK_K = 6


@dataclass(frozen=True)
class SplitBundle:
    degrees: tuple

    def __post_init__(self):
        degs = tuple(sorted(int(a) for a in self.degrees))
        if not degs:
            raise ValueError("a split bundle needs at least one summand")
        if any(int(a) != a for a in self.degrees):
            raise ValueError("degrees must be integers")
        object.__setattr__(self, "degrees", degs)

    @property
    def rank(self) -> int:
        return len(self.degrees)

    @property
    def ample(self) -> bool:
        return self.degrees[0] >= 1

    @property
    def projectively_flat(self) -> bool:
        return len(set(self.degrees)) == 1


@dataclass(frozen=True)
class SymPowerSpectrum:
    k: int
    multiplicities: dict  # degree -> multiplicity

    @property
    def size(self) -> int:
        return sum(self.multiplicities.values())

    def values(self) -> list:
        return sorted(Counter(self.multiplicities).elements())

    @property
    def arithmetic_mean(self) -> Fraction:
        return Fraction(sum(d * m for d, m in self.multiplicities.items()), self.size)

    def gm_am_power(self) -> Fraction:
        """(GM / AM)^size as an exact rational."""
        n = self.size
        prod = 1
        for d, m in self.multiplicities.items():
            prod *= d**m
        return Fraction(prod) / self.arithmetic_mean**n

    @property
    def geometric_mean(self) -> float:
        n = self.size
        return math.exp(math.fsum(m * math.log(d) for d, m in self.multiplicities.items()) / n)


def sym_power_weights(bundle: SplitBundle, k: int) -> SymPowerSpectrum:
    """Degrees sum m_i a_i over all multi-indices with sum m_i = k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(sum(c) for c in combinations_with_replacement(bundle.degrees, k))
    return SymPowerSpectrum(k, dict(counts))


def _ratio_from_power(q: Fraction, n: int) -> float:
    if q == 1:
        return 1.0
    return math.exp((math.log(q.numerator) - math.log(q.denominator)) / n)


def sympow_mavol_rescaled(bundle: SplitBundle, k: int) -> float:
    """GM / AM of the S^k F degree spectrum, in exact arithmetic until the last root."""
    if not bundle.ample:
        raise NotAmpleError(f"bundle {bundle.degrees} is not ample")
    spec = sym_power_weights(bundle, k)
    return _ratio_from_power(spec.gm_am_power(), spec.size)


def sympow_limit(bundle: SplitBundle) -> float:
    """k -> infinity limit of GM / AM for a rank-two bundle (a_1, a_2)."""
    if bundle.rank != 2:
        raise ValueError("closed-form limit implemented for rank two")
    a1, a2 = bundle.degrees
    if a1 == a2:
        return 1.0
    # degrees spread uniformly over [a_1, a_2]
    mean_log = (a2 * math.log(a2) - a1 * math.log(a1)) / (a2 - a1) - 1.0
    return math.exp(mean_log) / (0.5 * (a1 + a2))


# -- the projectivised dual ---------------------------------------------------------


def _s_terms(a, w):
    """S, S_w, S_wbar, S_wwbar for S = (1 + |w|^2)^a."""
    r2 = np.abs(w) ** 2
    q = 1.0 + r2
    S = q**a
    Sw = a * np.conj(w) * q ** (a - 1)
    Swb = a * w * q ** (a - 1)
    Swwb = a * q ** (a - 1) + a * (a - 1) * r2 * q ** (a - 2)
    return S, Sw, Swb, Swwb


def projectivized_kahler(a1: int, a2: int, zeta, w) -> KahlerCoefficients:
    """Coefficients (over 2 pi) of the curvature of O(1) on P(F*)."""
    zeta = np.asarray(zeta, dtype=complex)
    S1, S1w, S1wb, S1ww = _s_terms(a1, w)
    S2, S2w, S2wb, S2ww = _s_terms(a2, w)
    r2 = np.abs(zeta) ** 2
    Q = S1 + r2 * S2
    zz = S1 * S2 / Q**2
    ww = (S1ww + r2 * S2ww) / Q - np.abs(S1w + r2 * S2w) ** 2 / Q**2
    zw = np.conj(zeta) * S2wb / Q - np.conj(zeta) * S2 * (S1wb + r2 * S2wb) / Q**2
    zz = zz + 0 * r2
    return KahlerCoefficients(zz / TWO_PI, zw / TWO_PI, ww / TWO_PI + 0 * r2)


def predicted_horizontal(a1: int, a2: int, zeta, w):
    """<Theta^F u, u> / 2 pi at the unit vector matching [1 : zeta]."""
    S1 = (1.0 + np.abs(w) ** 2) ** a1
    S2 = (1.0 + np.abs(w) ** 2) ** a2
    r2 = np.abs(np.asarray(zeta)) ** 2
    return fs_base_coefficient(w) * (a1 * S1 + a2 * r2 * S2) / (S1 + r2 * S2)


def griffiths_check(bundle: SplitBundle, zeta, w) -> float:
    """Max relative deviation of omega_H from the Griffiths prediction."""
    if bundle.rank != 2:
        raise ValueError("Griffiths check implemented for rank two")
    a1, a2 = bundle.degrees
    m = projectivized_kahler(a1, a2, zeta, w)
    h = schur_horizontal(m)
    pred = predicted_horizontal(a1, a2, zeta, w)
    return float(np.max(np.abs(h - pred) / np.abs(pred)))


@dataclass(frozen=True)
class ProjectivizedWeight:
    """O(1) over P(F*) for F = O(a_1) + O(a_2), in the weight protocol of module geometry.

    The L^2 product uses the omega-induced fibre volume.
    """

    a1: int
    a2: int

    def __post_init__(self):
        if min(self.a1, self.a2) < 1:
            raise NotAmpleError("both summands must have positive degree")

    def fiber_degree(self, k: int) -> int:
        return int(k)

    def rank(self, k: int) -> int:
        return int(k) + 1

    @property
    def fiber_mass(self) -> float:
        return 1.0

    @property
    def total_volume(self) -> float:
        return float(self.a1 + self.a2)

    def direct_image_degree(self, k: int) -> float:
        return (k + 1) * k * (self.a1 + self.a2) / 2.0

    def _q(self, zeta, w):
        S1 = (1.0 + np.abs(w) ** 2) ** self.a1
        S2 = (1.0 + np.abs(w) ** 2) ** self.a2
        return S1, S2, S1 + np.abs(zeta) ** 2 * S2

    def log_excess(self, k, zeta, w):
        _, _, Q = self._q(zeta, w)
        return k * (np.log1p(np.abs(zeta) ** 2) - np.log(Q))

    def kahler(self, zeta, w) -> KahlerCoefficients:
        return projectivized_kahler(self.a1, self.a2, zeta, w)

    def omega_density(self, zeta, w):
        S1, S2, Q = self._q(zeta, w)
        return S1 * S2 / Q**2 / fs_density(zeta) ** 2

    fiber_density = omega_density

    @cached_property
    def audit(self):
        return check_positivity(self, audit_grid())

    def ensure_ample(self):
        rep = self.audit
        if not rep.passed:
            raise NotAmpleError(f"curvature of O(1) not positive: {rep.min_eigenvalue:.3g}")
        return rep


def algebraic_gram(bundle: SplitBundle, k: int, w) -> np.ndarray:
    """Induced metric on S^k F in the monomial basis e_1^{k-j} e_2^j."""
    a1, a2 = bundle.degrees
    q = 1.0 + abs(w) ** 2
    j = np.arange(k + 1)
    coeff = np.array([1.0 / math.comb(k, int(i)) for i in j])
    return np.diag(coeff * q ** (-(a1 * (k - j) + a2 * j)))


@dataclass(frozen=True)
class CrosscheckResult:
    k: int
    scale: float
    gap: float


def projectivized_crosscheck(bundle: SplitBundle, k: int, w: complex = 0.3 + 0.2j) -> CrosscheckResult:
    """Direct-image Gram on P(F*) against the algebraic metric of S^k F.

    One global scale is fitted (least squares) and reported; the gap is the
    relative Frobenius residual after scaling.
    """
    if bundle.rank != 2:
        raise ValueError("cross-check implemented for rank two")
    if k > MAX_CROSSCHECK_K:
        raise ValueError(f"cross-check limited to k <= {MAX_CROSSCHECK_K}")
    W = ProjectivizedWeight(*bundle.degrees)
    H = gram_matrix(W, w, k).monomial()
    # zeta^j pairs with e_1^{k-j} e_2^j
    Alg = algebraic_gram(bundle, k, w)
    scale = float(np.real(np.vdot(Alg, H)) / np.vdot(Alg, Alg).real)
    gap = float(np.linalg.norm(H - scale * Alg) / np.linalg.norm(H))
    return CrosscheckResult(k, scale, gap)


def quadrature_rescaled_mavol(bundle: SplitBundle, k: int, radial: int = 96):
    """Rescaled MAVol of S^k F through the direct-image pipeline on P(F*).

    The fibre mass of O(k) concentrates near |zeta|^2 = S_1 / S_2, far from
    the chart origin at large |w|, hence the fine default radial order.
    Returns (rescaled value, numerical degree).
    """
    from .directimage import FamilyGram, base_quadrature, numerical_degree
    from .mavol import mavol_from_samples
    from .numerics import sphere_rule

    if bundle.rank != 2:
        raise ValueError("quadrature route implemented for rank two")
    if k > MAX_CROSSCHECK_K:
        raise ValueError(f"cross-check limited to k <= {MAX_CROSSCHECK_K}")
    W = ProjectivizedWeight(*bundle.degrees)
    base = base_quadrature()
    fam = FamilyGram(W, k, base, fiber_quad=sphere_rule(radial, 4 * (k + 2)))
    samples = fam.samples()
    deg = numerical_degree(samples, base)
    return mavol_from_samples(samples, base) * W.rank(k) / deg, deg
