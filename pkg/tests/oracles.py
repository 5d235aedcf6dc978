"""Independent reference computations used to derive expected values.

Nothing here calls into the code under test beyond plain kernel
evaluation; every quantity is recomputed the slow, obvious way.
"""
import itertools
import math

import numpy as np
import sympy as sp
from scipy.special import gamma as gamma_fn
from scipy.special import kv


# geometry ------------------------------------------------------------------

def brute_fill_distance(points, lower, upper, resolution):
    """Double loop over probe grid and sites, no spatial index."""
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(lower, upper)]
    worst = 0.0
    for probe in itertools.product(*axes):
        nearest = min(math.dist(probe, p) for p in points)
        worst = max(worst, nearest)
    return worst


def brute_separation(points):
    return 0.5 * min(math.dist(a, b) for a, b in itertools.combinations(points, 2))


def radical_inverse_by_digits(i, base):
    digits = []
    while i:
        i, r = divmod(i, base)
        digits.append(r)
    return sum(dg / base ** (k + 1) for k, dg in enumerate(digits))


# radial profiles -------------------------------------------------------------

_s = sp.Symbol("s", nonnegative=True)
_r = sp.Symbol("r", nonnegative=True)


def matern_half_integer_r(nu):
    """Matern profile in r for nu = p + 1/2 from the general half-integer sum."""
    p = int(nu - sp.Rational(1, 2))
    u = sp.sqrt(2 * sp.Rational(nu)) * _r
    poly = sum(
        sp.factorial(p + i) / (sp.factorial(i) * sp.factorial(p - i)) * (2 * u) ** (p - i)
        for i in range(p + 1)
    )
    return sp.factorial(p) / sp.factorial(2 * p) * poly * sp.exp(-u)


def wendland_r(k, ell):
    """Wendland profile from repeated application of I f(r) = int_r^1 t f(t) dt
    to (1 - r)^ell, normalised to 1 at the origin."""
    t = sp.Symbol("t", nonnegative=True)
    f = (1 - _r) ** ell
    for _ in range(k):
        f = sp.integrate((t * f.subs(_r, t)), (t, _r, 1))
    f = sp.expand(f)
    return sp.simplify(f / f.subs(_r, 0))


def symbolic_profile(family, nu=None, k=None, dim=3):
    """(psi, psi', psi'') in s = r^2 as numpy callables."""
    if family == "gaussian":
        psi = sp.exp(-_s)
    else:
        if family == "matern":
            in_r = matern_half_integer_r(sp.Rational(int(2 * nu), 2))
        else:
            in_r = wendland_r(k, dim // 2 + k + 1)
        psi = in_r.subs(_r, sp.sqrt(_s))
    d1 = sp.diff(psi, _s)
    d2 = sp.diff(d1, _s)
    return tuple(sp.lambdify(_s, e, "numpy") for e in (psi, d1, d2))


def matern_via_bessel(nu, r):
    """2^(1-nu)/Gamma(nu) (sqrt(2 nu) r)^nu K_nu(sqrt(2 nu) r)."""
    u = math.sqrt(2 * nu) * np.asarray(r, dtype=float)
    return 2 ** (1 - nu) / gamma_fn(nu) * u ** nu * kv(nu, u)


# matrix kernels --------------------------------------------------------------

def symbolic_matrix_kernel(psi_expr_in_s, dim, mode, kappa=1.0, alpha2=1.0):
    """Matrix kernel from symbolic differentiation of Phi(z) = alpha2 psi(kappa^2 |z|^2)."""
    z = sp.symbols(f"z1:{dim + 1}", real=True)
    s_val = kappa ** 2 * sum(zi ** 2 for zi in z)
    phi = alpha2 * psi_expr_in_s.subs(_s, s_val)
    H = sp.Matrix(dim, dim, lambda a, b: sp.diff(phi, z[a], z[b]))
    if mode == "divergence_free":
        K = -H.trace() * sp.eye(dim) + H
    elif mode == "curl_free":
        K = -H
    else:
        K = phi * sp.eye(dim)
    return sp.lambdify(z, K, "numpy")


# dense posterior formulas ----------------------------------------------------

def dense_block(kernel, X, Y):
    """Block matrix by explicit double loop over kernel evaluations."""
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    d = kernel.dim
    out = np.zeros((len(X) * d, len(Y) * d))
    for i, x in enumerate(X):
        for j, y in enumerate(Y):
            out[i * d:(i + 1) * d, j * d:(j + 1) * d] = kernel(x, y)
    return out


def dense_posterior_cov(kernel, X, x, x2, shift=0.0):
    G = dense_block(kernel, X, X) + shift * np.eye(len(X) * kernel.dim)
    kx = dense_block(kernel, X, x)
    kx2 = dense_block(kernel, X, x2)
    return kernel(x, x2) - kx.T @ np.linalg.solve(G, kx2)


def error_representer_norm2(kernel, X, x, alpha):
    """||K(., x) alpha - sum_j K(., x_j) u_j(x)^T alpha||_H^2 with cardinal
    coefficients c = G^{-1} K(X, x) alpha from a general dense solve."""
    G = dense_block(kernel, X, X)
    kx = dense_block(kernel, X, x) @ alpha
    c = np.linalg.solve(G, kx)
    return float(alpha @ kernel(x, x) @ alpha - 2.0 * kx @ c + c @ G @ c)


def naive_site_norm(values, p):
    total = 0.0
    best = 0.0
    for row in values:
        for v in row:
            best = max(best, abs(v))
            if p != math.inf:
                total += abs(v) ** p
    return best if p == math.inf else total ** (1.0 / p)
