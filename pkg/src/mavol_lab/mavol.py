"""Monge-Ampere volume of E_k, its leading-order prediction and the saturation test.

With base dimension one, the MAVol density at w is ``det(A)^{1/N}`` times
``i dw ^ dw-bar`` (the transposition does not change the determinant), so

    MAVol(E_k) = int_B exp(log det A / N) i dw ^ dw-bar.

Base volume forms ``nu_B = n(w) i dw ^ dw-bar`` are selected by a tag; see
``BASE_VOLUMES``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .directimage import DEFAULT_STEP, FamilyGram, base_quadrature, dual_nakano_check, numerical_degree
from .geometry import fiber_pushforward, fs_base_coefficient, horizontal_form, integrate_base
from .numerics import NumericalError, QuadratureRule, empirical_order, sphere_rule, stable_sum

BOUND_TOL = 1e-6
BASE_VOLUMES = ("fs", "pushforward", "tilted")


class DemaillyBoundViolation(NumericalError):
    """Rescaled MAVol above 1 beyond tolerance: a numerics bug, not mathematics."""


class PositivityFailure(NumericalError):
    pass


def base_volume(weight, tag: str, w):
    """Density n(w) of nu_B with respect to i dw ^ dw-bar."""
    w = np.asarray(w)
    c = fs_base_coefficient(w)
    if tag == "fs":
        return c
    if tag == "tilted":
        t = np.abs(w) ** 2 / (1.0 + np.abs(w) ** 2)
        return c * (1.0 + 0.5 * (1.0 - 2.0 * t))
    if tag == "pushforward":
        vals = np.array([fiber_pushforward(weight, x) for x in np.ravel(w)])
        return vals.reshape(w.shape) / (2.0 * weight.fiber_mass)
    raise ValueError(f"unknown base volume {tag!r}")


# -- MAVol -------------------------------------------------------------------


def mavol_from_samples(samples, base: QuadratureRule) -> float:
    """Base quadrature of det(A)^{1/N}; aborts at the first non-positive sample."""
    dens = []
    for s in samples:
        lam = s.eigenvalues()
        if lam[0] <= 0:
            raise PositivityFailure(
                f"curvature not positive at base point w={s.w:.6g} (min eigenvalue {lam[0]:.3e})"
            )
        dens.append(math.exp(math.fsum(np.log(lam)) / len(lam)))
    return float(integrate_base(np.array(dens), base, np.array([s.w for s in samples])))


def mavol(weight, k: int, base: QuadratureRule | None = None, step: float = DEFAULT_STEP, samples=None) -> float:
    base = base if base is not None else base_quadrature()
    if samples is None:
        samples = FamilyGram(weight, k, base, step).samples()
    return mavol_from_samples(samples, base)


def mavol_rescaled(value: float, rank: int, degree: float, tol: float = BOUND_TOL) -> float:
    """MAVol / (rk^{-1} deg E_k); hard failure above 1 + tol."""
    if degree <= 0:
        raise ValueError("degree of E_k must be positive")
    out = value * rank / degree
    if out > 1.0 + tol:
        raise DemaillyBoundViolation(f"rescaled MAVol {out!r} exceeds 1 + {tol}")
    return out


# -- leading-order prediction ----------------------------------------------------


def _fiber_log_mean(weight, w, n_w, fiber: QuadratureRule) -> float:
    z = fiber.nodes
    h = horizontal_form(weight, z, w)
    if np.any(h <= 0):
        raise PositivityFailure(f"omega_H not positive over w={w}")
    rho = weight.omega_density(z, w)
    return stable_sum(np.log(h / n_w) * rho * fiber.weights) / weight.fiber_mass


def asymptotic_rhs(weight, nu: str = "fs", base: QuadratureRule | None = None, fiber: QuadratureRule | None = None) -> float:
    """int_B exp(fibre omega-average of log(omega_H / nu_B)) d nu_B."""
    weight.ensure_ample()
    base = base if base is not None else sphere_rule(24, 16)
    fiber = fiber if fiber is not None else sphere_rule(32, 32)
    w = base.nodes
    n = base_volume(weight, nu, w)
    vals = np.array([math.exp(_fiber_log_mean(weight, wi, ni, fiber)) * ni for wi, ni in zip(w, n)])
    return float(integrate_base(vals, base))


@dataclass(frozen=True)
class MAVolReport:
    k: int
    rank: int
    mavol: float
    degree: float
    rescaled: float
    rhs: float
    nu: str
    min_curvature: float

    @property
    def ratio(self) -> float:
        """MAVol / (k * RHS)."""
        return self.mavol / (self.k * self.rhs)


def mavol_report(weight, k: int, nu: str = "fs", base: QuadratureRule | None = None, step: float = DEFAULT_STEP, rhs: float | None = None) -> MAVolReport:
    base = base if base is not None else base_quadrature()
    samples = FamilyGram(weight, k, base, step).samples()
    value = mavol_from_samples(samples, base)
    deg = numerical_degree(samples, base)
    rhs = asymptotic_rhs(weight, nu) if rhs is None else rhs
    return MAVolReport(
        k,
        weight.rank(k),
        value,
        deg,
        mavol_rescaled(value, weight.rank(k), deg),
        rhs,
        nu,
        min(dual_nakano_check(s) for s in samples),
    )


def fitted_limit(ks, values, terms: int = 2) -> float:
    """Extrapolate values(k) = L + c_1/k + ... to k -> infinity by least squares."""
    ks = np.asarray(ks, dtype=float)
    if len(ks) < terms:
        raise ValueError("need at least as many k values as fit terms")
    V = np.vander(1.0 / ks, terms, increasing=True)
    coef, *_ = np.linalg.lstsq(V, np.asarray(values, dtype=float), rcond=None)
    return float(coef[0])


@dataclass(frozen=True)
class RatioSweep:
    ks: list
    ratios: list

    @property
    def deviations(self) -> list:
        return [abs(r - 1.0) for r in self.ratios]

    @property
    def order(self) -> float:
        return empirical_order(self.ks, self.deviations)

    @property
    def limit(self) -> float:
        return fitted_limit(self.ks, self.ratios)


def asymptotic_ratio(weight, ks, nu: str = "fs", base: QuadratureRule | None = None, step: float = DEFAULT_STEP) -> RatioSweep:
    """MAVol(E_k) / (k * RHS) along an increasing k ladder."""
    ks = list(ks)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("k ladder must be increasing")
    rhs = asymptotic_rhs(weight, nu)
    return RatioSweep(ks, [mavol(weight, k, base, step) / (k * rhs) for k in ks])


# -- saturation ------------------------------------------------------------------


@dataclass(frozen=True)
class SaturationReport:
    residual: float
    base_points: np.ndarray
    density: np.ndarray  # g(w): fibre mean of omega_H / p
    pointwise: np.ndarray  # sup over the fibre, per base point

    @property
    def saturated(self) -> bool:
        return self.residual <= 1e-10


def saturation_residual(weight, base: QuadratureRule | None = None, fiber: QuadratureRule | None = None, push_orders=(24, 32)) -> SaturationReport:
    """Deviation of omega_H from a pullback of g * pi_*(omega^2).

    ``push_orders`` are the (radial, angular) fibre orders of the pushforward.
    """
    weight.ensure_ample()
    base = base if base is not None else sphere_rule(12, 8)
    fiber = fiber if fiber is not None else sphere_rule(24, 24)
    z = fiber.nodes
    dens, sups = [], []
    for w in base.nodes:
        p = fiber_pushforward(weight, w, *push_orders)
        ratio = horizontal_form(weight, z, w) / p
        rho = weight.omega_density(z, w)
        mean = stable_sum(ratio * rho * fiber.weights) / weight.fiber_mass
        dens.append(mean)
        sups.append(float(np.max(np.abs(ratio - mean))))
    sups = np.array(sups)
    return SaturationReport(float(sups.max()), base.nodes, np.array(dens), sups)


def demailly_gap(weight, nu: str = "fs", base: QuadratureRule | None = None, fiber: QuadratureRule | None = None, push_orders=(24, 32)) -> tuple[float, float]:
    """(LHS, RHS) of the integrated bound: asymptotic RHS against int_B pi_*(omega^2) / (2 a)."""
    base = base if base is not None else sphere_rule(24, 16)
    lhs = asymptotic_rhs(weight, nu, base, fiber)
    push = np.array([fiber_pushforward(weight, w, *push_orders) for w in base.nodes])
    rhs = float(integrate_base(push, base)) / (2.0 * weight.fiber_mass)
    return lhs, rhs
