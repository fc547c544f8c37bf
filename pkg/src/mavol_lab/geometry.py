"""Model fibrations P^1 x P^1 -> P^1 and their Kahler data.

Coordinates: ``z`` on the fibre, ``w`` on the base. A :class:`FiberedWeight`
is the weight of the line bundle O(a, b)^k (x) G,

    Phi_k(z, w) = k * (a log(1+|z|^2) + b log(1+|w|^2) + eps * psi(z, w)) + psi_G(z, w),

with ``psi``, ``psi_G`` taken from a closed-form catalog of smooth functions on
P^1 x P^1. The Kahler form is omega = (i/2pi) d d-bar of the bracket; its
coefficient matrix with respect to i du ^ du-bar is ``Phi_{u v-bar} / 2pi``.
An area on a coordinate curve is therefore ``Phi_{u u-bar} / pi * dA``.

Every fibre/base integral is taken against the unit-mass Fubini-Study measure
``mu_FS = (1/pi) (1+|u|^2)^-2 dA`` with a density relative to it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

from .numerics import NumericalError, sphere_rule, stable_sum

TWO_PI = 2.0 * math.pi
POSITIVITY_MARGIN = 1e-3


class NotAmpleError(NumericalError):
    """The Kahler coefficient matrix fails to be positive definite."""


class QuadratureConvergenceError(NumericalError):
    pass


def fs_density(u):
    """p(u) = 1/(1+|u|^2)."""
    return 1.0 / (1.0 + np.abs(u) ** 2)


def fs_base_coefficient(w):
    """Coefficient (w.r.t. i dw ^ dw-bar) of the unit-mass Fubini-Study form."""
    return fs_density(w) ** 2 / TWO_PI


def _x(u):
    a = np.abs(u) ** 2
    return a / (1.0 + a)


def _x_uu(u):
    a = np.abs(u) ** 2
    return (1.0 - a) / (1.0 + a) ** 3


class Perturbation(NamedTuple):
    """A catalog function psi with its Wirtinger second derivatives."""

    value: Callable
    zz: Callable  # psi_{z z-bar}
    ww: Callable  # psi_{w w-bar}
    zw: Callable  # psi_{z w-bar}


def _zero(z, w):
    return np.zeros(np.broadcast(z, w).shape)


def _re_zwbar(z, w):
    return np.real(z * np.conj(w))


PERTURBATIONS: dict[str, Perturbation] = {
    "none": Perturbation(_zero, _zero, _zero, _zero),
    "sep": Perturbation(
        lambda z, w: _x(z) * _x(w),
        lambda z, w: _x_uu(z) * _x(w),
        lambda z, w: _x(z) * _x_uu(w),
        lambda z, w: np.conj(z) * fs_density(z) ** 2 * w * fs_density(w) ** 2,
    ),
    "cross": Perturbation(
        lambda z, w: _re_zwbar(z, w) * fs_density(z) * fs_density(w),
        lambda z, w: -2.0 * fs_density(z) ** 3 * fs_density(w) * _re_zwbar(z, w),
        lambda z, w: -2.0 * fs_density(w) ** 3 * fs_density(z) * _re_zwbar(z, w),
        lambda z, w: 0.5 * fs_density(z) ** 2 * fs_density(w) ** 2 * (1.0 + np.conj(z) ** 2 * w**2),
    ),
    "fiber-only": Perturbation(
        lambda z, w: _x(z) + 0.0 * _x(w),
        lambda z, w: _x_uu(z) + 0.0 * _x(w),
        _zero,
        _zero,
    ),
}

# Auxiliary-bundle weights psi_G only need values; they never enter omega.
AUX_WEIGHTS: dict[str, Callable] = {
    "none": _zero,
    "sep": PERTURBATIONS["sep"].value,
    "cross": PERTURBATIONS["cross"].value,
    "fiber-only": PERTURBATIONS["fiber-only"].value,
    "base-only": lambda z, w: _x(w) + 0.0 * _x(z),
}

FIBER_VOLUMES = ("omega", "fs")


class KahlerCoefficients(NamedTuple):
    """Entries of the Hermitian 2x2 coefficient matrix of omega (already / 2pi)."""

    zz: np.ndarray
    zw: np.ndarray  # coefficient of i dz ^ dw-bar
    ww: np.ndarray

    def matrix(self) -> np.ndarray:
        """2x2 matrix at a single point."""
        zz, zw, ww = (complex(np.asarray(v).ravel()[0]) for v in self)
        return np.array([[zz, zw], [np.conj(zw), ww]])

    @property
    def det(self):
        return np.real(self.zz) * np.real(self.ww) - np.abs(self.zw) ** 2


@dataclass(frozen=True)
class PositivityReport:
    min_eigenvalue: float
    location: tuple[complex, complex]
    margin: float
    n_points: int

    @property
    def passed(self) -> bool:
        return self.min_eigenvalue > self.margin


@dataclass(frozen=True)
class FiberedWeight:
    """Weight of O(a, b)^k (x) G on P^1 x P^1 with a catalog perturbation.

    ``fiber_volume`` selects the relative volume form of the L^2 product:
    ``"omega"`` (restriction of omega to the fibre, mass ``a``) or ``"fs"``
    (unperturbed unit-mass Fubini-Study). ``base_rotation`` pulls the
    perturbation back by a real rotation of the base sphere, which only
    relabels the base chart.
    """

    a: int = 1
    b: int = 1
    perturbation: str = "none"
    eps: float = 0.0
    aux: str = "none"
    aux_eps: float = 1.0
    fiber_volume: str = "omega"
    base_rotation: float = 0.0

    def __post_init__(self):
        if int(self.a) != self.a or self.a < 1 or int(self.b) != self.b or self.b < 1:
            raise ValueError("fibre and base degrees must be positive integers")
        if self.perturbation not in PERTURBATIONS:
            raise ValueError(f"unknown perturbation id {self.perturbation!r}")
        if self.aux not in AUX_WEIGHTS:
            raise ValueError(f"unknown auxiliary weight id {self.aux!r}")
        if self.fiber_volume not in FIBER_VOLUMES:
            raise ValueError(f"unknown fibre volume {self.fiber_volume!r}")

    # -- base relabelling ----------------------------------------------------
    def _rotate(self, w):
        if self.base_rotation == 0.0:
            return w, 1.0
        c, s = math.cos(self.base_rotation), math.sin(self.base_rotation)
        den = s * w + c
        return (c * w - s) / den, 1.0 / den**2

    # -- integer data ---------------------------------------------------------
    def fiber_degree(self, k: int) -> int:
        return int(k * self.a)

    def rank(self, k: int) -> int:
        return self.fiber_degree(k) + 1

    @property
    def fiber_mass(self) -> float:
        """Integral of c_1(L) over a fibre."""
        return float(self.a)

    @property
    def total_volume(self) -> float:
        """Integral of c_1(L)^2 over the total space."""
        return 2.0 * self.a * self.b

    def direct_image_degree(self, k: int) -> float:
        return float(self.rank(k) * k * self.b)

    # -- weights --------------------------------------------------------------
    def psi(self, z, w):
        W, _ = self._rotate(w)
        return PERTURBATIONS[self.perturbation].value(z, W)

    def psi_aux(self, z, w):
        W, _ = self._rotate(w)
        return self.aux_eps * AUX_WEIGHTS[self.aux](z, W)

    def potential(self, z, w):
        """phi = Phi_k / k without the auxiliary weight."""
        return (
            self.a * np.log1p(np.abs(z) ** 2)
            + self.b * np.log1p(np.abs(w) ** 2)
            + self.eps * self.psi(z, w)
        )

    def total_weight(self, k, z, w):
        return k * self.potential(z, w) + self.psi_aux(z, w)

    def log_excess(self, k, z, w):
        """log of e^{-Phi_k} relative to the Fubini-Study frame weight (1+|z|^2)^{-ka}."""
        out = -k * (self.b * np.log1p(np.abs(w) ** 2) + self.eps * self.psi(z, w))
        return out - self.psi_aux(z, w)

    # -- Kahler form ------------------------------------------------------------
    def kahler(self, z, w) -> KahlerCoefficients:
        pert = PERTURBATIONS[self.perturbation]
        W, dW = self._rotate(w)
        eps = self.eps
        zz = self.a * fs_density(z) ** 2 + eps * pert.zz(z, W)
        ww = self.b * fs_density(w) ** 2 + eps * pert.ww(z, W) * np.abs(dW) ** 2
        zw = eps * pert.zw(z, W) * np.conj(dW) + 0.0j * zz
        return KahlerCoefficients(zz / TWO_PI, zw / TWO_PI, ww / TWO_PI)

    def omega_density(self, z, w):
        """omega restricted to the fibre, relative to mu_FS(z)."""
        return TWO_PI * np.real(self.kahler(z, w).zz) / fs_density(z) ** 2

    def fiber_density(self, z, w):
        """Density of the L^2 relative volume form, relative to mu_FS(z)."""
        if self.fiber_volume == "fs":
            return np.ones(np.broadcast(z, w).shape)
        return self.omega_density(z, w)

    # -- positivity -------------------------------------------------------------
    @cached_property
    def audit(self) -> PositivityReport:
        return check_positivity(self, audit_grid())

    def ensure_ample(self):
        rep = self.audit
        if not rep.passed:
            raise NotAmpleError(
                f"omega not positive for {self}: min eigenvalue {rep.min_eigenvalue:.4g} "
                f"at (z, w) = {rep.location}"
            )
        return rep


def audit_grid(radial: int = 12, angular: int = 12):
    """Points of the sphere (chart values) used for positivity audits."""
    rule = sphere_rule(radial, angular)
    # include the chart origin; t = 1 is handled by the normalisation below
    return np.concatenate([[0.0 + 0.0j], rule.nodes])


def normalized_kahler(weight, z, w) -> np.ndarray:
    """Coefficient matrices rescaled by the product Fubini-Study metric.

    Bounded and smooth on the compact total space, so its eigenvalues are a
    chart-independent positivity measure. Shape (..., 2, 2).
    """
    m = weight.kahler(z, w)
    pz, pw = fs_density(z), fs_density(w)
    zz = np.real(m.zz) / pz**2
    ww = np.real(m.ww) / pw**2
    zw = m.zw / (pz * pw)
    zz, zw, ww = np.broadcast_arrays(zz, zw, ww)
    out = np.empty(zz.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = zz
    out[..., 0, 1] = zw
    out[..., 1, 0] = np.conj(zw)
    out[..., 1, 1] = ww
    return TWO_PI * out


def check_positivity(weight, grid, margin: float = POSITIVITY_MARGIN) -> PositivityReport:
    """Minimum eigenvalue of the normalised Kahler matrix over grid x grid."""
    grid = np.asarray(grid)
    if grid.size == 0:
        raise ValueError("audit grid must be nonempty")
    Z, W = np.meshgrid(grid, grid, indexing="ij")
    lam = np.linalg.eigvalsh(normalized_kahler(weight, Z, W))[..., 0]
    idx = np.unravel_index(np.argmin(lam), lam.shape)
    return PositivityReport(float(lam[idx]), (complex(Z[idx]), complex(W[idx])), margin, lam.size)


def eval_kahler(weight, z: complex, w: complex) -> KahlerCoefficients:
    """Coefficients of omega at (z, w); raises if not positive definite there."""
    m = weight.kahler(np.asarray(z), np.asarray(w))
    lam = np.linalg.eigvalsh(normalized_kahler(weight, np.asarray(z), np.asarray(w)))
    if np.min(lam) <= 0:
        raise NotAmpleError(f"omega not positive at (z, w) = ({z}, {w})")
    return m


def schur_horizontal(m: KahlerCoefficients):
    """omega(dw^H, dw^H): Schur complement of the fibre block."""
    return np.real(m.ww) - np.abs(m.zw) ** 2 / np.real(m.zz)


def horizontal_form(weight, z, w):
    """Horizontal coefficient omega_H(d_w, d_w-bar) at (z, w), vectorised."""
    m = weight.kahler(z, w)
    if np.any(np.real(m.zz) <= 0) or np.any(m.det <= 0):
        raise NotAmpleError("omega not positive where omega_H was requested")
    return schur_horizontal(m)


def fiber_rule(radial: int, angular: int):
    return sphere_rule(radial, angular)


def _pushforward_once(weight, w, rule):
    z = rule.nodes
    m = weight.kahler(z, w)
    # omega^2 = 2 det(M) (i dz dz-bar)(i dw dw-bar); i dz dz-bar = 2 dA = 2 pi mu_FS / p^2
    integrand = 2.0 * m.det * 2.0 * math.pi / fs_density(z) ** 2
    return stable_sum(integrand * rule.weights)


def fiber_pushforward(weight, w, radial: int = 24, angular: int = 32, tol: float = 1e-8) -> float:
    """Coefficient of pi_*(omega^2) w.r.t. i dw ^ dw-bar at base point w.

    Raises :class:`QuadratureConvergenceError` when doubling the fibre rule
    moves the value by more than ``tol`` (relative).
    """
    coarse = _pushforward_once(weight, w, fiber_rule(radial, angular))
    fine = _pushforward_once(weight, w, fiber_rule(2 * radial, 2 * angular))
    if abs(fine - coarse) > tol * max(abs(fine), 1e-300):
        raise QuadratureConvergenceError(
            f"fibre pushforward at w={w} not converged: {coarse!r} vs {fine!r}"
        )
    return fine


def integrate_base(values, base_rule, w=None):
    """Integrate coefficients (w.r.t. i dw ^ dw-bar) over the base sphere."""
    w = base_rule.nodes if w is None else w
    return stable_sum(np.asarray(values) / fs_base_coefficient(w) * base_rule.weights)
