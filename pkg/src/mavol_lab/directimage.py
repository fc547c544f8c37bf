"""The direct-image bundle E_k over the base: Gram family and Chern curvature.

In the holomorphic frame the Chern connection of ``h(s, t) = t^H G s`` is
``G^{-1} dG`` and the curvature coefficient along ``dw ^ dw-bar`` is

    A = sign / (2 pi) * [G^{-1} G_{w wbar} - G^{-1} G_wbar G^{-1} G_w]

with ``sign = CURVATURE_SIGN`` fixed by the product case, where A must equal
``k b c(w) Id``. Derivatives are central differences on a 5x5 cross stencil,
combined over two rings by Richardson extrapolation.

Each Gram matrix is split as ``G = s U`` with ``det U = 1``; the scalar part
contributes ``d dbar log s * Id`` and the differences act on the well-scaled
U, which keeps the large scalar weight out of the cancellation.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bergman import FiberSpace, GramMatrix, fiber_quadrature
from .geometry import TWO_PI, fs_base_coefficient, horizontal_form, integrate_base
from .numerics import (
    MIN_FD_STEP,
    NumericalError,
    QuadratureRule,
    eig_hermitian,
    fd_wirtinger,
    operator_norm,
    richardson,
    sphere_rule,
)
from .toeplitz import toeplitz_from_values

CURVATURE_SIGN = -1.0
DEFAULT_STEP = 1e-2
FD_RESIDUAL_TOL = 1e-4
DEFAULT_BASE_ORDERS = (16, 8)

_OFFSETS = [(i, j) for i in range(-2, 3) for j in range(-2, 3) if i == 0 or j == 0]


class FDInstabilityError(NumericalError):
    pass


def base_quadrature(radial: int | None = None, angular: int | None = None) -> QuadratureRule:
    r0, a0 = DEFAULT_BASE_ORDERS
    return sphere_rule(radial or r0, angular or a0)


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("MAVOL_LAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class FamilyGram:
    """Gram matrices of E_k over the base in one global holomorphic frame.

    ``frame`` is an optional constant invertible matrix; columns give the new
    frame in terms of the rescaled monomials.
    """

    weight: object
    k: int
    base: QuadratureRule = field(default_factory=base_quadrature)
    step: float = DEFAULT_STEP
    frame: np.ndarray | None = None
    fiber_quad: QuadratureRule | None = None
    threads: int = field(default_factory=_default_threads)

    def __post_init__(self):
        if not self.step >= MIN_FD_STEP:
            raise ValueError(f"finite-difference step {self.step!r} below guard {MIN_FD_STEP}")
        self.weight.ensure_ample()
        if self.fiber_quad is None:
            self.fiber_quad = fiber_quadrature(self.weight.fiber_degree(self.k))
        probe = FiberSpace(self.weight, self.k, 0j, self.fiber_quad, self.frame)
        self._values = probe.values

    @property
    def rank(self) -> int:
        return self.weight.rank(self.k)

    def space(self, w: complex) -> FiberSpace:
        """Fibre space over w, scaled by the smooth factor exp(-mean log excess)."""
        w = complex(w)
        le = self.weight.log_excess(self.k, self.fiber_quad.nodes, w)
        shift = float(np.dot(self.fiber_quad.weights, le))
        sp = FiberSpace(self.weight, self.k, w, self.fiber_quad, self.frame, shift, self._values)
        sp.__dict__["log_excess"] = le
        return sp

    def gram(self, w: complex) -> GramMatrix:
        return self.space(w).gram()

    def split_gram(self, w: complex):
        """(log s, G / s) with s = exp(shift) det(G_shifted)^{1/N}, so det(G / s) = 1."""
        g = self.gram(w)
        sign, ld = np.linalg.slogdet(g.matrix)
        if not sign.real > 0:
            raise NumericalError(f"Gram matrix at w={w} is not positive definite")
        n = self.rank
        return g.space.shift + ld / n, g.matrix * math.exp(-ld / n)

    def stencil(self, w: complex, step: float | None = None):
        """Split Gram data on the 5x5 cross around w; corners are NaN."""
        h = self.step if step is None else step
        N = self.rank
        logs = np.full((5, 5), np.nan)
        mats = np.full((5, 5, N, N), np.nan, dtype=complex)
        for i, j in _OFFSETS:
            logs[i + 2, j + 2], mats[i + 2, j + 2] = self.split_gram(w + h * (i + 1j * j))
        return logs, mats

    def samples(self, step: float | None = None, scheme: str = "richardson") -> list["CurvatureSample"]:
        nodes = list(self.base.nodes)
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                return list(ex.map(lambda w: curvature_at(self, w, step=step, scheme=scheme), nodes))
        return [curvature_at(self, w, step=step, scheme=scheme) for w in nodes]


@dataclass
class CurvatureSample:
    w: complex
    matrix: np.ndarray  # A, acting on coefficient columns
    gram: GramMatrix
    residual: float  # relative H-self-adjointness residual
    step: float

    def hermitian(self) -> np.ndarray:
        """A in an orthonormal frame, symmetrised."""
        X = self.gram.to_orthonormal(self.matrix)
        return 0.5 * (X + X.conj().T)

    def eigenvalues(self) -> np.ndarray:
        return eig_hermitian(self.hermitian())

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))


def _curvature_ring(logs, mats, step, ring):
    # G = s * U with det U = 1: the scalar factor contributes d dbar log s * Id
    scalar = fd_wirtinger(logs, step, ring)[2]
    dw, dwb, lap = fd_wirtinger(mats, step, ring)
    U = mats[2, 2]
    Uinv_dw = np.linalg.solve(U, dw)
    A = np.linalg.solve(U, lap - dwb @ Uinv_dw) + scalar * np.eye(U.shape[0])
    return CURVATURE_SIGN / TWO_PI * A


def curvature_at(family: FamilyGram, w: complex, step: float | None = None, scheme: str = "richardson") -> CurvatureSample:
    """Curvature coefficient of E_k at base point w.

    ``scheme`` is ``"richardson"`` (rings h and 2h combined) or ``"central"``
    (second order, ring h only).
    """
    h = family.step if step is None else step
    if not h >= MIN_FD_STEP:
        raise ValueError(f"finite-difference step {h!r} below guard {MIN_FD_STEP}")
    logs, mats = family.stencil(w, h)
    A = _curvature_ring(logs, mats, h, 1)
    if scheme == "richardson":
        A = richardson(A, _curvature_ring(logs, mats, h, 2), 2)
    elif scheme != "central":
        raise ValueError(f"unknown FD scheme {scheme!r}")
    gram = family.gram(w)
    G = gram.matrix
    GA = G @ A
    norm = max(np.max(np.abs(GA)), 1e-300)
    res = float(np.max(np.abs(GA - GA.conj().T)) / norm)
    if res > FD_RESIDUAL_TOL:
        raise FDInstabilityError(
            f"curvature at w={w} not self-adjoint (residual {res:.2e} > {FD_RESIDUAL_TOL})"
        )
    return CurvatureSample(complex(w), A, gram, res, h)


def horizontal_toeplitz(gram: GramMatrix, weight) -> np.ndarray:
    """T_{omega_H, k} at the gram's base point, as G^{-1} F."""
    sp = gram.space
    vals = horizontal_form(weight, sp.nodes, sp.w)
    return toeplitz_from_values(gram, vals).matrix


def ma_zhang_gap_at(sample: CurvatureSample, weight) -> float:
    g = sample.gram
    diff = sample.matrix - g.k * horizontal_toeplitz(g, weight)
    return operator_norm(g.to_orthonormal(diff))


@dataclass(frozen=True)
class MaZhangReport:
    k: int
    points: list
    gaps: list

    @property
    def sup(self) -> float:
        return max(self.gaps)


def ma_zhang_gap(weight, k: int, base: QuadratureRule | None = None, step: float = DEFAULT_STEP) -> MaZhangReport:
    """Curvature of E_k against k times the Toeplitz operator of omega_H."""
    fam = FamilyGram(weight, k, base if base is not None else base_quadrature(), step)
    samples = fam.samples()
    return MaZhangReport(k, [s.w for s in samples], [ma_zhang_gap_at(s, weight) for s in samples])


def dual_nakano_check(sample: CurvatureSample) -> float:
    """Minimum of the dual-Nakano form; for a curve base the smallest eigenvalue."""
    return float(sample.eigenvalues()[0])


@dataclass(frozen=True)
class RankC1Report:
    k: int
    rank: int
    rank_leading: float
    degree: float
    degree_expected: float
    degree_leading: float

    @property
    def rank_gap(self) -> float:
        return abs(self.rank - self.rank_leading) / self.rank_leading

    @property
    def degree_gap(self) -> float:
        """Relative gap of the numerical degree to its leading term."""
        return abs(self.degree - self.degree_leading) / self.degree_leading

    @property
    def integrality_defect(self) -> float:
        return abs(self.degree - round(self.degree))


def numerical_degree(samples, base: QuadratureRule) -> float:
    tr = np.array([s.trace for s in samples])
    return float(integrate_base(tr, base, np.array([s.w for s in samples])))


def rank_c1_check(weight, k: int, base: QuadratureRule | None = None, step: float = DEFAULT_STEP, samples=None) -> RankC1Report:
    """Rank and degree of E_k against their leading terms in k."""
    base = base if base is not None else base_quadrature()
    if samples is None:
        samples = FamilyGram(weight, k, base, step).samples()
    deg = numerical_degree(samples, base)
    return RankC1Report(
        k,
        weight.rank(k),
        k * weight.fiber_degree(1),
        deg,
        weight.direct_image_degree(k),
        k**2 * weight.total_volume / 2.0,
    )


def product_curvature(weight, k: int, w) -> float:
    """Closed-form curvature eigenvalue k b c(w) for the unperturbed product."""
    return k * weight.b * fs_base_coefficient(w)


def positivity_threshold(weight, ks, base: QuadratureRule | None = None, step: float = DEFAULT_STEP):
    """Smallest k in ``ks`` from which the dual-Nakano minimum stays positive."""
    mins = {}
    for k in ks:
        fam = FamilyGram(weight, k, base if base is not None else base_quadrature(), step)
        mins[k] = min(dual_nakano_check(s) for s in fam.samples())
    threshold = None
    for k in sorted(ks, reverse=True):
        if mins[k] > 0:
            threshold = k
        else:
            break
    return threshold, mins
