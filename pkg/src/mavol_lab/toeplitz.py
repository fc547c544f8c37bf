"""Toeplitz operators T_{f,k} = P_k M_f on the fibre section space.

``T = G^{-1} F`` in the holomorphic frame, with ``F[i, j] = <f e_j, e_i>``.
Spectra and operator norms are taken after the similarity by the Cholesky
factor of G, i.e. in an orthonormal frame, so norms are L^2 operator norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bergman import GramMatrix, _orthonormal_coefficients, gram_matrix
from .geometry import fs_density, _x
from .numerics import NumericalError, eig_hermitian, log_det_posdef, operator_norm, sphere_rule, stable_sum

RANGE_SLACK = 1e-8


class SymbolRangeError(NumericalError):
    pass


class TestFunctionDomainError(ValueError):
    __test__ = False


@dataclass(frozen=True)
class SymbolFunction:
    """Real smooth function on the fibre (possibly depending on the base point).

    ``fn(z, w)`` is vectorised over z; ``f_range`` is a declared interval
    containing the image.
    """

    name: str
    fn: Callable = field(compare=False, repr=False)
    f_range: tuple[float, float] = (-math.inf, math.inf)

    def __call__(self, z, w=0.0):
        return np.real(np.asarray(self.fn(z, w), dtype=complex)) * np.ones(np.shape(z))

    def __mul__(self, other: "SymbolFunction") -> "SymbolFunction":
        lo1, hi1 = self.f_range
        lo2, hi2 = other.f_range
        prods = [lo1 * lo2, lo1 * hi2, hi1 * lo2, hi1 * hi2]
        prods = [p for p in prods if not math.isnan(p)]
        return SymbolFunction(
            f"({self.name})*({other.name})",
            lambda z, w, f=self, g=other: f(z, w) * g(z, w),
            (min(prods), max(prods)),
        )


def _sphere_re(z):
    return 2.0 * np.real(z) * fs_density(z)


def symbol(name: str, **params) -> SymbolFunction:
    """Build a catalog symbol.

    ``one``, ``const`` (value c), ``x`` = |z|^2/(1+|z|^2), ``affine-x``
    (alpha + beta x), ``sphere-re`` = 2 Re z/(1+|z|^2), ``tilt``
    = 1 + x/2 + Re(z)/(4(1+|z|^2)), ``base-x`` = x(z) x(w) + 1.
    """
    if name == "one":
        return SymbolFunction("one", lambda z, w: np.ones(np.shape(z)), (1.0, 1.0))
    if name == "const":
        c = float(params.get("c", 1.0))
        return SymbolFunction(f"const({c})", lambda z, w: c * np.ones(np.shape(z)), (c, c))
    if name == "x":
        return SymbolFunction("x", lambda z, w: _x(z), (0.0, 1.0))
    if name == "affine-x":
        al, be = float(params.get("alpha", 1.0)), float(params.get("beta", 0.5))
        lo, hi = sorted((al, al + be))
        return SymbolFunction(f"{al}+{be}x", lambda z, w: al + be * _x(z), (lo, hi))
    if name == "sphere-re":
        return SymbolFunction("sphere-re", lambda z, w: _sphere_re(z), (-1.0, 1.0))
    if name == "tilt":
        return SymbolFunction(
            "tilt", lambda z, w: 1.0 + 0.5 * _x(z) + 0.125 * _sphere_re(z), (0.875, 1.625)
        )
    if name == "base-x":
        return SymbolFunction("base-x", lambda z, w: 1.0 + _x(z) * _x(w), (1.0, 2.0))
    raise ValueError(f"unknown symbol id {name!r}")


SYMBOL_IDS = ("one", "const", "x", "affine-x", "sphere-re", "tilt", "base-x")


def symbol_matrix(name: str) -> list[list[SymbolFunction]]:
    """Catalog of pointwise positive definite symbol matrices."""
    if name == "lemma-2x2":
        f11 = SymbolFunction("1+x/2", lambda z, w: 1.0 + 0.5 * _x(z), (1.0, 1.5))
        f12 = SymbolFunction("x/4", lambda z, w: 0.25 * _x(z), (0.0, 0.25))
        f22 = symbol("one")
        return [[f11, f12], [f12, f22]]
    if name == "diag-const":
        c1, c2 = symbol("const", c=2.0), symbol("const", c=3.0)
        zero = symbol("const", c=0.0)
        return [[c1, zero], [zero, c2]]
    if name == "lemma-3x3":
        f11 = SymbolFunction("1+x/2", lambda z, w: 1.0 + 0.5 * _x(z), (1.0, 1.5))
        f12 = SymbolFunction("x/4", lambda z, w: 0.25 * _x(z), (0.0, 0.25))
        f13 = SymbolFunction("re/8", lambda z, w: 0.125 * _sphere_re(z), (-0.125, 0.125))
        f33 = SymbolFunction("1.2-x/5", lambda z, w: 1.2 - 0.2 * _x(z), (1.0, 1.2))
        one = symbol("one")
        zero = symbol("const", c=0.0)
        return [[f11, f12, f13], [f12, one, zero], [f13, zero, f33]]
    raise ValueError(f"unknown symbol matrix id {name!r}")


TEST_FUNCTIONS: dict[str, tuple[Callable, Callable]] = {
    # name: (g, domain check on an interval (lo, hi))
    "one": (lambda x: np.ones_like(x), lambda lo, hi: True),
    "id": (lambda x: x, lambda lo, hi: True),
    "square": (lambda x: x * x, lambda lo, hi: True),
    "log": (np.log, lambda lo, hi: lo > 0),
    "log1p": (np.log1p, lambda lo, hi: lo > -1),
}


@dataclass
class ToeplitzMatrix:
    """T_{f,k} = G^{-1} F in the rescaled monomial frame."""

    gram: GramMatrix
    moment: np.ndarray
    symbol: SymbolFunction | None = None

    @property
    def k(self) -> int:
        return self.gram.k

    @property
    def matrix(self) -> np.ndarray:
        return np.linalg.solve(self.gram.matrix, self.moment)

    def hermitian(self) -> np.ndarray:
        """Orthonormal-frame representative (Hermitian)."""
        H = self.gram.hermitian_form(self.moment)
        return 0.5 * (H + H.conj().T)

    def eigenvalues(self) -> np.ndarray:
        return eig_hermitian(self.hermitian())

    def self_adjoint_residual(self) -> float:
        F = self.moment
        return float(np.max(np.abs(F - F.conj().T)) / max(np.max(np.abs(F)), 1e-300))


def toeplitz_matrix(gram: GramMatrix, f: SymbolFunction, check_range: bool = True) -> ToeplitzMatrix:
    sp = gram.space
    vals = f(sp.nodes, sp.w)
    T = ToeplitzMatrix(gram, sp.moment(vals), f)
    if check_range:
        lam = T.eigenvalues()
        lo, hi = f.f_range
        if lam[0] < lo - RANGE_SLACK or lam[-1] > hi + RANGE_SLACK:
            raise SymbolRangeError(
                f"spectrum [{lam[0]:.6g}, {lam[-1]:.6g}] of T_{f.name} escapes declared range {f.f_range}"
            )
    return T


def toeplitz_from_values(gram: GramMatrix, values) -> ToeplitzMatrix:
    """Toeplitz matrix of a symbol given by its values at the fibre nodes."""
    return ToeplitzMatrix(gram, gram.space.moment(values))


@dataclass(frozen=True)
class SpectralMeasureReport:
    k: int
    test_function: str
    empirical_mean: float
    limit: float

    @property
    def signed_gap(self) -> float:
        return self.empirical_mean - self.limit

    @property
    def gap(self) -> float:
        return abs(self.empirical_mean - self.limit)


def omega_average(weight, values_fn, w=0.0, radial: int = 64, angular: int = 64) -> float:
    """Fibre average of a function against omega, normalised by int_X c_1(L)."""
    rule = sphere_rule(radial, angular)
    z = rule.nodes
    dens = weight.omega_density(z, w)
    return stable_sum(values_fn(z) * dens * rule.weights) / weight.fiber_mass


def spectral_measure_gap(weight, f: SymbolFunction, g: str, k: int, w: complex = 0.0) -> SpectralMeasureReport:
    """Both sides of the spectral-measure limit for the test function g."""
    if g not in TEST_FUNCTIONS:
        raise TestFunctionDomainError(f"unknown test function {g!r}")
    gfun, domain_ok = TEST_FUNCTIONS[g]
    if not domain_ok(*f.f_range):
        raise TestFunctionDomainError(f"test function {g} undefined on symbol range {f.f_range}")
    T = toeplitz_matrix(gram_matrix(weight, w, k), f)
    lam = T.eigenvalues()
    mean = math.fsum(gfun(lam)) / len(lam)
    limit = omega_average(weight, lambda z: gfun(f(z, w)), w)
    return SpectralMeasureReport(k, g, mean, limit)


def product_defect(weight, f: SymbolFunction, g: SymbolFunction, k: int, w: complex = 0.0) -> float:
    """|| T_f T_g - T_{fg} || in the L^2 operator norm."""
    gram = gram_matrix(weight, w, k)
    Tf = toeplitz_matrix(gram, f).matrix
    Tg = toeplitz_matrix(gram, g).matrix
    Tfg = toeplitz_matrix(gram, f * g).matrix
    return operator_norm(gram.to_orthonormal(Tf @ Tg - Tfg))


def _pointwise_matrix(symbols, z, w):
    l = len(symbols)
    out = np.empty((len(z), l, l))
    for i in range(l):
        for j in range(l):
            out[:, i, j] = symbols[i][j](z, w)
    return out


@dataclass
class DetLemmaResult:
    k: int
    ratio: float
    log_det_block: float
    log_det_scalar: float
    cholesky_factors: np.ndarray | None = None  # pointwise g_ij at fibre nodes
    cholesky_residual: float | None = None


def det_lemma_ratio(weight, symbols, k: int, w: complex = 0.0, diagnostics: bool = False) -> DetLemmaResult:
    """|det (T_{f_ij})|^{1/N} / |det T_{det f}|^{1/N} for an l x l symbol matrix."""
    l = len(symbols)
    if l > 3 or any(len(row) != l for row in symbols):
        raise ValueError("symbol matrix must be square with size <= 3")
    gram = gram_matrix(weight, w, k)
    sp = gram.space
    fz = _pointwise_matrix(symbols, sp.nodes, sp.w)
    if np.any(np.abs(fz - np.swapaxes(fz, 1, 2)) > 1e-14):
        raise ValueError("symbol matrix must be symmetric")
    if np.min(np.linalg.eigvalsh(fz)) <= 0:
        raise SymbolRangeError("symbol matrix is not positive definite at every fibre node")
    N = gram.dim
    blocks = [[gram.hermitian_form(sp.moment(fz[:, i, j])) for j in range(l)] for i in range(l)]
    big = np.block(blocks)
    big = 0.5 * (big + big.conj().T)
    ld_block = log_det_posdef(big)
    detf = np.linalg.det(fz)
    ld_scalar = log_det_posdef(gram.hermitian_form(sp.moment(detf)))
    ratio = math.exp((ld_block - ld_scalar) / N)
    res = DetLemmaResult(k, ratio, ld_block, ld_scalar)
    if diagnostics:
        gz = np.linalg.cholesky(fz)  # lower triangular, f = g g^T pointwise
        Tg = [[gram.hermitian_form(sp.moment(gz[:, i, j])) for j in range(l)] for i in range(l)]
        lower = np.block(Tg)
        upper = np.block([[Tg[j][i] for j in range(l)] for i in range(l)])
        res.cholesky_factors = gz
        res.cholesky_residual = operator_norm(big - lower @ upper)
    return res


def trace_power_crosscheck(weight, f: SymbolFunction, k: int, w: complex = 0.0, chunk: int = 512):
    """(sum of squared eigenvalues, double integral of f f |P_k|^2)."""
    gram = gram_matrix(weight, w, k)
    sp = gram.space
    lam = toeplitz_matrix(gram, f).eigenvalues()
    spectral = math.fsum(lam**2)
    nodes = sp.nodes
    fv = f(nodes, sp.w)
    meas = sp.quad.weights * sp.weight.fiber_density(nodes, sp.w)
    A = _orthonormal_coefficients(gram, nodes)  # P(x, y) = A(x)^H A(y)
    fm = fv * meas
    parts = []
    for start in range(0, len(nodes), chunk):
        P = A[:, start:start + chunk].conj().T @ A
        parts.append(np.abs(P) ** 2 @ fm * fm[start:start + chunk])
    double = stable_sum(np.concatenate(parts))
    return spectral, double
