"""Section spaces over a fibre, L^2 Gram matrices and the Bergman kernel.

Sections of O(d) over the fibre are represented in the frame
``e_j = s_j z^j`` with ``s_j = sqrt((d+1) binom(d, j))``, a constant rescaling
of the monomials that makes the unperturbed Fubini-Study Gram matrix the
identity. ``GramMatrix.monomial()`` converts back to the raw frame z^j.

Convention: ``G[i, j] = <e_j, e_i>`` (L^2 product, linear in the first slot),
so that for coefficient columns ``<s, t> = t^H G s`` and operators act on
columns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .numerics import (
    QuadratureRule,
    empirical_order,
    local_orders,
    log_det_posdef,
    sphere_rule,
    stable_sum,
)


def default_orders(d: int) -> tuple[int, int]:
    """Default (radial, angular) fibre orders for sections of O(d)."""
    return 2 * (d + 4), 4 * (d + 4)


def fiber_quadrature(d: int, radial: int | None = None, angular: int | None = None) -> QuadratureRule:
    r0, a0 = default_orders(d)
    return sphere_rule(radial or r0, angular or a0)


@dataclass(frozen=True)
class SectionBasis:
    """Holomorphic frame z^0..z^d of H^0(P^1, O(d)), rescaled."""

    d: int

    @property
    def dim(self) -> int:
        return self.d + 1

    @cached_property
    def scale(self) -> np.ndarray:
        j = np.arange(self.d + 1)
        log_binom = gammaln(self.d + 1) - gammaln(j + 1) - gammaln(self.d - j + 1)
        return np.exp(0.5 * (np.log(self.d + 1) + log_binom))

    def values(self, z) -> np.ndarray:
        """e_j(z) (1+|z|^2)^{-d/2}, shape (len(z), d+1); bounded by sqrt(d+1)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        j = np.arange(self.d + 1)
        r = np.abs(z)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            logmag = j * np.log(r) - 0.5 * self.d * np.log1p(r**2)
        logmag = np.where((r == 0) & (j == 0), 0.0, logmag)
        mag = np.exp(logmag) * self.scale
        return mag * np.exp(1j * j * np.angle(z)[:, None])


@dataclass
class FiberSpace:
    """H^0 of the fibre over a base point w, with its L^2 quadrature.

    Holds the node-wise measure ``mass`` such that
    ``<s, t> = sum_q mass_q * s(z_q) conj(t(z_q))`` in the unit trivialisation.
    A nonzero ``shift`` rescales the whole inner product by ``exp(-shift)``
    (used to keep large-k Gram matrices away from underflow).
    """

    weight: object
    k: int
    w: complex
    quad: QuadratureRule
    frame: np.ndarray | None = None
    shift: float = 0.0
    basis_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.basis = SectionBasis(self.weight.fiber_degree(self.k))
        self.nodes = self.quad.nodes

    @cached_property
    def values(self) -> np.ndarray:
        if self.basis_values is not None:
            return self.basis_values
        v = self.basis.values(self.nodes)
        if self.frame is not None:
            v = v @ self.frame
        return v

    @cached_property
    def log_excess(self) -> np.ndarray:
        return self.weight.log_excess(self.k, self.nodes, self.w)

    @cached_property
    def mass(self) -> np.ndarray:
        dens = self.weight.fiber_density(self.nodes, self.w)
        return self.quad.weights * np.exp(self.log_excess - self.shift) * dens

    def moment(self, symbol_values=None) -> np.ndarray:
        """M[i, j] = <f e_j, e_i> for a symbol sampled at the nodes."""
        m = self.mass if symbol_values is None else self.mass * symbol_values
        v = self.values
        return (v.conj().T * m) @ v

    def gram(self) -> "GramMatrix":
        return GramMatrix(self, self.moment())


@dataclass
class GramMatrix:
    """L^2 Gram matrix of the rescaled monomial frame at one base point."""

    space: FiberSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        self.matrix = 0.5 * (m + m.conj().T)

    @property
    def w(self) -> complex:
        return self.space.w

    @property
    def k(self) -> int:
        return self.space.k

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def cholesky(self) -> np.ndarray:
        """Lower-triangular L with G = L L^H."""
        try:
            return np.linalg.cholesky(self.matrix)
        except np.linalg.LinAlgError as exc:
            from .numerics import NotPositiveDefiniteError

            raise NotPositiveDefiniteError(
                "Gram matrix lost positive definiteness (under-resolved quadrature?)"
            ) from exc

    @cached_property
    def inverse(self) -> np.ndarray:
        eye = np.eye(self.dim)
        return np.linalg.solve(self.matrix, eye)

    def to_orthonormal(self, X) -> np.ndarray:
        """Similarity L^H X L^{-H}: the operator X in an orthonormal frame."""
        LH = self.cholesky.conj().T
        return np.linalg.solve(LH.T, (LH @ X).T).T

    def hermitian_form(self, F) -> np.ndarray:
        """L^{-1} F L^{-H}: the operator G^{-1} F in an orthonormal frame."""
        L = self.cholesky
        Y = np.linalg.solve(L, F)
        return np.linalg.solve(L, Y.conj().T).conj().T

    def monomial(self) -> np.ndarray:
        """Gram matrix of the raw monomials, H[i, j] = int z^i conj(z^j) e^{-Phi} dnu."""
        s = self.space.basis.scale
        if self.space.frame is not None:
            raise ValueError("monomial view undefined for a custom frame")
        return (self.matrix / np.outer(s, s)).T

    def log_det(self) -> float:
        return log_det_posdef(self.matrix)


def gram_matrix(weight, w: complex, k: int, quad: QuadratureRule | None = None) -> GramMatrix:
    weight.ensure_ample()
    if quad is None:
        quad = fiber_quadrature(weight.fiber_degree(k))
    return FiberSpace(weight, k, complex(w), quad).gram()


def section_values_unit(space: FiberSpace, x) -> np.ndarray:
    """Frame values at fibre points x in the unit-norm trivialisation."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    v = space.basis.values(x)
    if space.frame is not None:
        v = v @ space.frame
    le = space.weight.log_excess(space.k, x, space.w) - space.shift
    return v * np.exp(0.5 * le)[:, None]


def _orthonormal_coefficients(gram: GramMatrix, x) -> np.ndarray:
    # columns A(x) = L^{-1} conj(u(x)); then P(x, y) = A(x)^H A(y)
    ux = section_values_unit(gram.space, x)
    return np.linalg.solve(gram.cholesky, ux.conj().T)


def bergman_kernel(gram: GramMatrix, x, xp) -> np.ndarray:
    """P_k(x, x') with the metric weights attached at both points.

    Kernel of the orthogonal projection with respect to the L^2 fibre volume:
    P(x, y) = u(x)^T G^{-1} conj(u(y)). Returns the outer table over x, x'.
    """
    a = _orthonormal_coefficients(gram, x)
    b = _orthonormal_coefficients(gram, xp)
    return np.squeeze(a.conj().T @ b)


def kernel_diagonal(gram: GramMatrix, x) -> np.ndarray:
    a = _orthonormal_coefficients(gram, x)
    return np.sum(np.abs(a) ** 2, axis=0)


def kernel_trace(gram: GramMatrix) -> float:
    """Integral of P_k(x, x) against the L^2 fibre volume."""
    sp = gram.space
    diag = kernel_diagonal(gram, sp.nodes)
    dens = sp.weight.fiber_density(sp.nodes, sp.w)
    return stable_sum(diag * dens * sp.quad.weights)


@dataclass(frozen=True)
class DiagonalReport:
    ks: list
    leading_deviation: list  # sup |P_k(x,x) rho/rho_omega / (k * fiber-mass-normalisation) - 1|
    normalized_spread: list  # sup |P_k(x,x) V / N_k - 1|, V the fibre volume mass
    order: float

    @property
    def passed(self) -> bool:
        return self.order >= 0.9 or max(self.leading_deviation) == 0.0


def diagonal_expansion_check(weight, ks, w: complex = 0.0, grid=None) -> DiagonalReport:
    """Diagonal Bergman density against its leading term k (omega-volume units)."""
    ks = list(ks)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("k list must be increasing")
    grid = sphere_rule(10, 12).nodes if grid is None else np.asarray(grid)
    lead, spread = [], []
    for k in ks:
        g = gram_matrix(weight, w, k)
        diag = kernel_diagonal(g, grid)
        rho = weight.fiber_density(grid, w)
        rho_omega = weight.omega_density(grid, w)
        volume = g.space.quad.integrate(weight.fiber_density(g.space.nodes, w))
        lead.append(float(np.max(np.abs(diag * rho / rho_omega / k - 1.0))))
        spread.append(float(np.max(np.abs(diag * volume / weight.rank(k) - 1.0))))
    return DiagonalReport(ks, lead, spread, empirical_order(ks, lead) if min(lead) > 0 else math.inf)


def sphere_distance(x, y):
    """Geodesic angle between chart points on the round unit sphere."""
    def embed(u):
        u = np.asarray(u, dtype=complex)
        n = 1.0 + np.abs(u) ** 2
        return np.stack([2 * u.real / n, 2 * u.imag / n, (np.abs(u) ** 2 - 1) / n], axis=-1)

    ex, ey = embed(x), embed(y)
    c = np.clip(np.sum(ex * ey, axis=-1), -1.0, 1.0)
    return np.arccos(c)


@dataclass(frozen=True)
class OffDiagonalReport:
    ks: list
    sup_kernel: list
    orders: list

    @property
    def passed(self) -> bool:
        """Super-polynomial: local decay orders positive and growing by >= 1.5x."""
        o = self.orders
        if len(o) < 3 or o[0] <= 0:
            return False
        return all(b >= 1.5 * a for a, b in zip(o, o[1:]))


def offdiag_decay_check(weight, ks, separation: float, w: complex = 0.0, grid=None) -> OffDiagonalReport:
    """sup |P_k(x, x')| over grid pairs at sphere distance > separation."""
    if not separation > 0:
        raise ValueError("separation must be positive")
    ks = list(ks)
    grid = sphere_rule(6, 8).nodes if grid is None else np.asarray(grid)
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    mask = sphere_distance(X, Y) > separation
    if not mask.any():
        raise ValueError("no grid pairs beyond the separation")
    sups = []
    for k in ks:
        g = gram_matrix(weight, w, k)
        P = bergman_kernel(g, grid, grid)
        sups.append(float(np.max(np.abs(P[mask]))))
    return OffDiagonalReport(ks, sups, local_orders(ks, sups))
