"""Deterministic numerical kernel.

Quadrature rules, Hermitian eigenproblems, log-determinants, operator norms
and the finite-difference stencils used by the rest of the package. All
functions are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_FD_STEP = 1e-6
HERMITIAN_RTOL = 1e-12
POSDEF_RTOL = 1e-13


class NumericalError(RuntimeError):
    """Base class for numerical aborts (positivity, stencil instability, ...)."""


class NotHermitianError(NumericalError, ValueError):
    pass


class NotPositiveDefiniteError(NumericalError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights on a reference domain.

    ``domain`` is ``"interval"`` for rules on [-1, 1] (or a mapped interval)
    and ``"sphere"`` for the product rule on the Riemann sphere, in which case
    ``nodes`` holds complex chart points and the weights integrate against the
    unit-mass Fubini-Study measure.
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: str = "interval"
    measure: float = 2.0

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise ValueError("a quadrature rule needs at least two nodes")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be strictly positive")

    def integrate(self, values) -> complex | float:
        return stable_sum(np.asarray(values) * self.weights)


def stable_sum(values) -> complex | float:
    """Compensated, order-fixed sum of a real or complex array."""
    values = np.ravel(np.asarray(values))
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag))
    return math.fsum(values)


def gauss_legendre(order: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1]; exact for degree <= 2*order - 1."""
    if int(order) != order or order < 2:
        raise ValueError(f"Gauss-Legendre order must be an integer >= 2, got {order!r}")
    x, w = np.polynomial.legendre.leggauss(int(order))
    return QuadratureRule(x, w, "interval", 2.0)


def gauss_legendre_interval(order: int, a: float, b: float) -> QuadratureRule:
    rule = gauss_legendre(order)
    half = 0.5 * (b - a)
    return QuadratureRule(a + half * (rule.nodes + 1.0), half * rule.weights, "interval", b - a)


def sphere_rule(radial: int, angular: int) -> QuadratureRule:
    """Product rule on the Riemann sphere for the unit-mass Fubini-Study measure.

    The chart radius is substituted by t = r^2/(1+r^2) in [0, 1), integrated by
    Gauss-Legendre, and the angle by the uniform trapezoid rule. Under this
    substitution the Fubini-Study measure becomes dt * dtheta / (2 pi), so the
    point at infinity (t = 1) carries no mass and is never sampled.
    """
    if angular < 2:
        raise ValueError("angular node count must be >= 2")
    rad = gauss_legendre_interval(radial, 0.0, 1.0)
    theta = 2.0 * np.pi * np.arange(angular) / angular
    t = np.repeat(rad.nodes, angular)
    th = np.tile(theta, radial)
    r = np.sqrt(t / (1.0 - t))
    nodes = r * np.exp(1j * th)
    weights = np.repeat(rad.weights, angular) / angular
    return QuadratureRule(nodes, weights, "sphere", 1.0)


def _as_square(H) -> np.ndarray:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    return H


def check_hermitian(H, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    H = _as_square(H)
    scale = max(np.max(np.abs(H)), np.finfo(float).tiny)
    if np.max(np.abs(H - H.conj().T)) > rtol * scale:
        raise NotHermitianError("matrix is not conjugate-symmetric")
    return H


def eig_hermitian(H) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix."""
    H = check_hermitian(H)
    return np.linalg.eigvalsh(0.5 * (H + H.conj().T))


def log_det_posdef(H) -> float:
    """log det of a Hermitian positive definite matrix.

    Eigenvalues below ``POSDEF_RTOL * ||H||`` are an error rather than being
    clamped: positivity is something we test, not assume.
    """
    lam = eig_hermitian(H)
    norm = np.max(np.abs(lam))
    if lam[0] <= POSDEF_RTOL * norm or lam[0] <= 0.0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (smallest eigenvalue {lam[0]:.3e}, norm {norm:.3e})"
        )
    return math.fsum(np.log(lam))


def operator_norm(A) -> float:
    """Largest singular value."""
    A = _as_square(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


# -- finite differences on a 5x5 stencil -------------------------------------
#
# samples[i, j] holds the value at  w0 + (i - 2) * step + 1j * (j - 2) * step.
# Only the cross-shaped entries (row 2 and column 2) are read; corners may be
# NaN. Second-order central differences use spacing ``step`` (inner ring) and
# ``2 * step`` (outer ring); Richardson extrapolation combines the two.


def _check_stencil(samples, step):
    samples = np.asarray(samples)
    if samples.shape[:2] != (5, 5):
        raise ValueError("stencil samples must have leading shape (5, 5)")
    if not step >= MIN_FD_STEP:
        raise ValueError(f"finite-difference step {step!r} below guard {MIN_FD_STEP}")
    return samples


def _partials(samples, step, ring):
    h = ring * step
    c = samples[2, 2]
    up, um = samples[2 + ring, 2], samples[2 - ring, 2]
    vp, vm = samples[2, 2 + ring], samples[2, 2 - ring]
    fu = (up - um) / (2 * h)
    fv = (vp - vm) / (2 * h)
    lap = (up + um + vp + vm - 4 * c) / (h * h)
    return fu, fv, lap


def fd_wirtinger(samples, step: float, ring: int = 1):
    """(d/dw, d/dw-bar, d^2/dw dw-bar) at the stencil centre, second order."""
    samples = _check_stencil(samples, step)
    fu, fv, lap = _partials(samples, step, ring)
    return 0.5 * (fu - 1j * fv), 0.5 * (fu + 1j * fv), 0.25 * lap


def fd_mixed_second(samples, step: float, richardson: bool = False):
    """Approximate d^2 f / dw dw-bar (a quarter of the Laplacian).

    Second-order accurate; with ``richardson=True`` the inner and outer rings
    are combined to cancel the O(step^2) term.
    """
    inner = fd_wirtinger(samples, step, 1)[2]
    if not richardson:
        return inner
    outer = fd_wirtinger(samples, step, 2)[2]
    return (4 * inner - outer) / 3


def richardson(fine, coarse, order: int = 2):
    """Combine estimates at step h (fine) and 2h (coarse) of given order."""
    f = 2 ** order
    return (f * fine - coarse) / (f - 1)


def empirical_order(ks, errors) -> float:
    """Observed decay order at the finest step of a k ladder.

    ``log(e_{n-1} / e_n) / log(k_n / k_{n-1})`` for the last two entries, the
    usual observed order of a refinement study. See :func:`fitted_order` for
    the slope over the whole ladder.
    """
    ks = list(ks)
    err = [abs(float(e)) for e in errors]
    if len(ks) < 2 or len(ks) != len(err):
        raise ValueError("need at least two (k, error) pairs")
    if err[-1] == 0:
        return math.inf
    if err[-2] == 0:
        return -math.inf
    return math.log(err[-2] / err[-1]) / math.log(ks[-1] / ks[-2])


def fitted_order(ks, errors) -> float:
    """Least-squares slope of -log|error| against log k over the whole ladder."""
    ks = np.asarray(ks, dtype=float)
    err = np.abs(np.asarray(errors, dtype=float))
    if np.any(err == 0):
        return math.inf
    slope = np.polyfit(np.log(ks), np.log(err), 1)[0]
    return float(-slope)


def local_orders(ks, values) -> list[float]:
    """Pairwise decay orders log(v_i / v_{i+1}) / log(k_{i+1} / k_i)."""
    out = []
    for (k0, v0), (k1, v1) in zip(zip(ks, values), zip(ks[1:], values[1:])):
        out.append(math.log(abs(v0) / abs(v1)) / math.log(k1 / k0))
    return out
