"""Gaussian field samples on grids, Nystrom eigensystems and truncated
Karhunen-Loeve sampling.

The integral operator ``(A w)(x) = int_D K(x, y) w(y) dy`` is discretised
with a positive-weight quadrature rule ``(x_i, w_i)``. With ``W`` the
diagonal weight matrix (each weight repeated d times) the symmetric
matrix ``W^{1/2} K W^{1/2}`` has eigenpairs ``(lam_k, u_k)``; the grid
values ``phi_k(x_i) = u_k[i] / sqrt(w_i)`` are orthonormal in the weighted
inner product and ``K(x_i, x_j) = sum_k lam_k phi_k(x_i) phi_k(x_j)^T``.
Off the grid, eigenfunctions are continued with

    phi_k(x) = lam_k^{-1} sum_i w_i K(x, x_i) phi_k(x_i).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gp import GPModel, prior_model, robust_cholesky
from .kernels import MatrixKernel

EIGEN_CUTOFF = 1e-12


@dataclass(frozen=True)
class EvaluationGrid:
    points: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (len(pts),) or np.any(w <= 0):
                raise ValueError("quadrature weights must be positive, one per point")
            object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]


def midpoint_grid(domain, per_axis):
    """Cell-centre grid of the box with equal cell-volume weights."""
    lo, hi = np.array(domain.lower), np.array(domain.upper)
    width = (hi - lo) / per_axis
    axes = [lo[i] + width[i] * (np.arange(per_axis) + 0.5) for i in range(domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return EvaluationGrid(pts, np.full(len(pts), float(np.prod(width))))


@dataclass
class FieldSample:
    values: np.ndarray
    seed: int
    source: str
    coefficients: Optional[np.ndarray] = None


def _stream(seed, index):
    return np.random.default_rng([seed, index])


def sample_gaussian_field(source, grid, n_samples, seed):
    """Draw fields from the prior (``source`` a MatrixKernel) or posterior
    (``source`` a GPModel) jointly over the grid points.

    Sample ``i`` uses its own generator keyed by ``(seed, i)``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    model = prior_model(source) if isinstance(source, MatrixKernel) else source
    pts = grid.points if isinstance(grid, EvaluationGrid) else np.atleast_2d(grid)
    if len(pts) == 0:
        raise ValueError("empty evaluation grid")
    mean = model.predict_mean(pts).reshape(-1)
    cov = model.predict_cov_matrix(pts)
    prior_scale = float(np.mean(np.diag(model.kernel.matrix(pts[:1], pts[:1]))))
    L, _ = robust_cholesky(cov, prior_scale)
    label = "prior" if model.n_sites == 0 else "posterior"
    shape = pts.shape
    return [
        FieldSample((mean + L @ _stream(seed, i).standard_normal(len(mean))).reshape(shape), seed, label)
        for i in range(n_samples)
    ]


@dataclass
class NystromEigensystem:
    """Discrete eigenpairs of the kernel integral operator.

    ``eigenfunctions`` has shape ``(m, M, d)``: eigenfunction ``k`` at grid
    point ``i``.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    grid: EvaluationGrid
    kernel: MatrixKernel
    requested: int

    @property
    def count(self):
        return len(self.eigenvalues)

    def extend(self, x, m=None):
        """Eigenfunction values at arbitrary points, shape ``(m, P, d)``."""
        m = self.count if m is None else m
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cross = self.kernel.matrix(x, self.grid.points)  # (P d, M d)
        w = np.repeat(self.grid.weights, self.kernel.dim)
        phi = self.eigenfunctions[:m].reshape(m, -1)
        vals = cross @ (w[:, None] * phi.T) / self.eigenvalues[:m]
        return vals.T.reshape(m, len(x), self.kernel.dim)

    def expansion(self, xi, x=None):
        """``sum_k sqrt(lam_k) xi_k phi_k`` on the grid, or at ``x`` via extension."""
        xi = np.asarray(xi, dtype=float)
        m = len(xi)
        phi = self.eigenfunctions[:m] if x is None else self.extend(x, m)
        return np.tensordot(np.sqrt(self.eigenvalues[:m]) * xi, phi, axes=1)


def nystrom_eigensystem(kernel, grid, m=None):
    """Leading ``m`` Nystrom eigenpairs (all positive ones if ``m`` is None).

    Eigenvalues below ``EIGEN_CUTOFF * lam_1`` are discarded, so fewer than
    ``m`` pairs may come back; ``requested`` records ``m``.
    """
    if grid.weights is None:
        raise ValueError("Nystrom discretisation needs quadrature weights")
    d = kernel.dim
    total = len(grid) * d
    m = total if m is None else int(m)
    if not 1 <= m <= total:
        raise ValueError(f"truncation must be between 1 and {total}")
    sw = np.sqrt(np.repeat(grid.weights, d))
    K = kernel.matrix(grid.points, grid.points)
    B = sw[:, None] * K * sw[None, :]
    B = 0.5 * (B + B.T)
    lam, U = np.linalg.eigh(B)
    order = np.argsort(lam)[::-1]
    lam, U = lam[order], U[:, order]
    keep = lam > EIGEN_CUTOFF * lam[0]
    lam, U = lam[keep][:m], U[:, keep][:, :m]
    # fix the sign of each eigenvector for reproducibility
    signs = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(U.shape[1])])
    U = U * signs
    phi = (U / sw[:, None]).T.reshape(-1, len(grid), d)
    return NystromEigensystem(lam, phi, grid, kernel, m)


def mercer_residual(eigs, pairs, m=None):
    """Max Frobenius error of the truncated Mercer sum at grid-index pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no test pairs given")
    m = eigs.count if m is None else min(m, eigs.count)
    lam, phi = eigs.eigenvalues[:m], eigs.eigenfunctions[:m]
    pts = eigs.grid.points
    worst = 0.0
    for i, j in pairs:
        exact = eigs.kernel(pts[i], pts[j])
        approx = np.einsum("k,ka,kb->ab", lam, phi[:, i], phi[:, j])
        worst = max(worst, float(np.linalg.norm(exact - approx)))
    return worst


def truncated_mercer(eigs, i, j, m=None):
    m = eigs.count if m is None else min(m, eigs.count)
    phi = eigs.eigenfunctions[:m]
    return np.einsum("k,ka,kb->ab", eigs.eigenvalues[:m], phi[:, i], phi[:, j])


def kl_sample(eigs, seed, m=None, index=0):
    """Truncated KL draw on the eigensystem grid with i.i.d. normal weights."""
    m = eigs.count if m is None else min(m, eigs.count)
    xi = _stream(seed, index).standard_normal(m)
    return FieldSample(eigs.expansion(xi), seed, f"kl_truncated({m})", xi)
