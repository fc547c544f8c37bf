"""Independent reference values.

Nothing here imports mavol_lab: values come from exact rational arithmetic,
mpmath at high precision, or sympy differentiation.
"""
from fractions import Fraction
from functools import lru_cache

import mpmath
import sympy as sp

mpmath.mp.dps = 40


# -- Fubini-Study Toeplitz closed forms ---------------------------------------------


def fs_x_eigenvalues(k):
    """Eigenvalues of T_x on O(k) with FS data: Beta ratios B(i+2, k+1-i) / B(i+1, k+1-i)."""
    return [mpmath.beta(i + 2, k + 1 - i) / mpmath.beta(i + 1, k + 1 - i) for i in range(k + 1)]


def fs_x_eigenvalues_exact(k):
    return [Fraction(i + 1, k + 2) for i in range(k + 1)]


def fs_x2_diagonal_exact(k):
    """Diagonal of T_{x^2}: B(i+3, k+1-i) / B(i+1, k+1-i)."""
    return [Fraction((i + 1) * (i + 2), (k + 2) * (k + 3)) for i in range(k + 1)]


def fs_square_gap(k):
    """(1/N) sum lambda^2 - int_0^1 x^2 dx, exactly."""
    lam = fs_x_eigenvalues_exact(k)
    return sum(l * l for l in lam) / (k + 1) - Fraction(1, 3)


def fs_defect(k):
    """max_i |lambda_i^2 - (T_{x^2})_ii|, the operator norm of a diagonal matrix."""
    lam = fs_x_eigenvalues_exact(k)
    d2 = fs_x2_diagonal_exact(k)
    return max(abs(l * l - d) for l, d in zip(lam, d2))


def fs_trace_square(k):
    return sum(l * l for l in fs_x_eigenvalues_exact(k))


def fs_monomial_gram(d):
    """int |z|^{2j} (1+|z|^2)^{-d} omega_FS, omega_FS of unit mass: j! (d-j)! / (d+1)!."""
    return [mpmath.quad(lambda s, j=j: s**j * (1 + s) ** (-d - 2), [0, 1, mpmath.inf]) for j in range(d + 1)]


# -- perturbation catalog, differentiated symbolically ----------------------------------------

z, zb, w, wb = sp.symbols("z zb w wb")


def _x(u, ub):
    return u * ub / (1 + u * ub)


def _p(u, ub):
    return 1 / (1 + u * ub)


SYMBOLIC_PERTURBATIONS = {
    "sep": _x(z, zb) * _x(w, wb),
    "cross": (z * wb + zb * w) / 2 * _p(z, zb) * _p(w, wb),
    "fiber-only": _x(z, zb),
}


@lru_cache(maxsize=None)
def perturbation_derivatives(name):
    """Lambdified (psi_zzbar, psi_wwbar, psi_z wbar) for a catalog perturbation."""
    psi = SYMBOLIC_PERTURBATIONS[name]
    exprs = [sp.diff(psi, z, zb), sp.diff(psi, w, wb), sp.diff(psi, z, wb)]
    return sp.lambdify((z, zb, w, wb), exprs, "mpmath")


@lru_cache(maxsize=None)
def horizontal_coefficient(name, eps, a=1, b=1):
    """Schur complement of the Hessian of the full potential, over 2 pi."""
    phi = a * sp.log(1 + z * zb) + b * sp.log(1 + w * wb) + sp.nsimplify(eps) * SYMBOLIC_PERTURBATIONS[name]
    pzz, pww, pzw = sp.diff(phi, z, zb), sp.diff(phi, w, wb), sp.diff(phi, z, wb)
    pwz = sp.diff(phi, w, zb)
    h = (pww - pzw * pwz / pzz) / (2 * sp.pi)
    return sp.lambdify((z, zb, w, wb), h, "mpmath")


def eval_at(fn, zv, wv):
    zv, wv = mpmath.mpc(zv), mpmath.mpc(wv)
    return fn(zv, mpmath.conj(zv), wv, mpmath.conj(wv))


# -- projectivised dual of O(a1) + O(a2) ----------------------------------------------------

zeta, zetab = sp.symbols("zeta zetab")


@lru_cache(maxsize=None)
def projectivized_hessian(a1, a2):
    """(Phi_zeta zetabar, Phi_w wbar, Phi_zeta wbar) / 2 pi of log(S1 + |zeta|^2 S2)."""
    q = 1 + w * wb
    phi = sp.log(q**a1 + zeta * zetab * q**a2)
    exprs = [sp.diff(phi, zeta, zetab), sp.diff(phi, w, wb), sp.diff(phi, zeta, wb)]
    return sp.lambdify((zeta, zetab, w, wb), [e / (2 * sp.pi) for e in exprs], "mpmath")


def projectivized_l2(a1, a2, k, j, wv):
    """int |zeta|^{2j} Q^{-k} omega over the fibre, by mpmath quadrature in s = |zeta|^2."""
    q = 1 + abs(wv) ** 2
    S1, S2 = mpmath.mpf(q) ** a1, mpmath.mpf(q) ** a2
    return mpmath.quad(lambda s: s**j * (S1 + s * S2) ** (-k - 2) * S1 * S2, [0, 1, mpmath.inf])


# -- symmetric powers ------------------------------------------------------------------------------


def gm_over_am(values):
    """GM / AM at 40 digits."""
    n = len(values)
    gm = mpmath.exp(mpmath.fsum(mpmath.log(v) for v in values) / n)
    am = mpmath.fsum(values) / n
    return gm / am


def sympow_degrees_rank2(a1, a2, k):
    return [(k - j) * a1 + j * a2 for j in range(k + 1)]


def sympow_limit_12():
    """exp(int_0^1 log(1 + t) dt) / (3/2) = (4/e) / 1.5."""
    return mpmath.exp(mpmath.quad(lambda t: mpmath.log(1 + t), [0, 1])) / mpmath.mpf(1.5)


# -- direct image curvature for a radial perturbation -------------------------------------


def sep_gram_diagonal(k, eps, a, b, j, u, v):
    """G_jj(w) for the sep perturbation: radial in z, so the Gram matrix is diagonal.

    Monomial z^j of O(ka), omega fibre volume, as a function of w = u + i v.
    """
    r2 = u * u + v * v
    xw = r2 / (1 + r2)
    d = k * a

    def integrand(s):
        xs = s / (1 + s)
        dens = a + eps * xw * (1 - s) / (1 + s)
        return s**j * (1 + s) ** (-d - 2) * mpmath.exp(-k * eps * xs * xw) * dens

    return (1 + r2) ** (-k * b) * mpmath.quad(integrand, [0, 1, mpmath.inf])


def sep_curvature_eigenvalues(k, eps, w, a=1, b=1):
    """-(1/2 pi) d dbar log G_jj, via the real Laplacian / 4."""
    u0, v0 = mpmath.mpf(w.real), mpmath.mpf(w.imag)
    out = []
    for j in range(k * a + 1):
        f = lambda u, v, j=j: mpmath.log(sep_gram_diagonal(k, eps, a, b, j, u, v))
        lap = mpmath.diff(f, (u0, v0), (2, 0)) + mpmath.diff(f, (u0, v0), (0, 2))
        out.append(-lap / 4 / (2 * mpmath.pi))
    return sorted(out)
