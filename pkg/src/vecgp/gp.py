"""Conditioning a matrix-valued Gaussian process on vector observations.

One dense block system ``(K(X,X) + c I) A = Y - m(X)`` covers three
estimators, distinguished only by what ``c`` means:

* ``interpolate``  c = 0 (plus jitter): the interpolant I_X, posterior with exact data
* ``posterior``    c = sigma^2: posterior mean and covariance under Gaussian noise
* ``penalized``    c = lambda: minimiser of sum_j |s(x_j) - y_j|^2 + lambda |s|_H^2

Blocks are stacked site-major: entry ``j*d + a`` is component ``a`` at site ``j``.
"""
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .geometry import PointSet
from .kernels import MatrixKernel

JITTER_RUNGS = (0.0, 1e-12, 1e-10, 1e-8)
FIT_MODES = ("interpolate", "posterior", "penalized")
EXPORT_FORMAT = "vecgp-model-v1"


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class MeanFunction:
    """Prior mean ``x -> m(x)``, vectorised over rows of an (M, d) array."""

    evaluator: Callable
    structure: str = "generic"

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.evaluator(x), dtype=float).reshape(x.shape)


def zero_mean():
    return MeanFunction(lambda x: np.zeros_like(x), "zero")


@dataclass
class Observations:
    """Sites, vector data values and the noise model they were drawn under.

    ``noise_variance`` is None for exact data.
    """

    sites: PointSet
    values: np.ndarray
    noise_variance: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.sites, PointSet):
            self.sites = PointSet(self.sites)
        vals = np.asarray(self.values, dtype=float)
        vals = vals.reshape(len(self.sites), -1) if vals.size else vals.reshape(0, self.sites.dim)
        if vals.shape != self.sites.points.shape:
            raise ValueError(
                f"expected values of shape {self.sites.points.shape}, got {np.shape(self.values)}"
            )
        self.values = vals

    def __len__(self):
        return len(self.sites)

    @property
    def stacked(self):
        return self.values.reshape(-1)


def assemble_gram(kernel, X, diagonal_shift=0.0):
    """Block Gram matrix ``K(X, X) + diagonal_shift * I``, exactly symmetric."""
    pts = X.points if isinstance(X, PointSet) else np.atleast_2d(X)
    G = kernel.matrix(pts, pts)
    G = np.triu(G) + np.triu(G, 1).T
    if diagonal_shift:
        G[np.diag_indices_from(G)] += diagonal_shift
    return G


def robust_cholesky(matrix, scale=None, rungs=JITTER_RUNGS):
    """Lower Cholesky factor with jitter escalation.

    Tries ``matrix + r * scale * I`` for each rung ``r``; ``scale`` defaults
    to the mean diagonal. Returns ``(L, jitter)`` where ``jitter`` is the
    absolute shift that succeeded.
    """
    n = matrix.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    if scale is None:
        scale = float(np.mean(np.diag(matrix)))
    for rung in rungs:
        jitter = rung * scale
        shifted = matrix if jitter == 0.0 else matrix + jitter * np.eye(n)
        try:
            return linalg.cholesky(shifted, lower=True, check_finite=False), jitter
        except linalg.LinAlgError:
            continue
    try:
        cond = float(np.linalg.cond(matrix))
    except np.linalg.LinAlgError:
        cond = math.inf
    raise FitError(f"gram not positive definite (condition estimate {cond:.3e})")


class GPModel:
    """A fitted posterior: kernel, sites, coefficient blocks and the factor of
    the shifted Gram matrix. Immutable after construction."""

    def __init__(self, kernel, sites, coefficients, factor, mode="interpolate",
                 regularization=0.0, jitter_used=0.0, prior_mean=None):
        self.kernel = kernel
        self.sites = sites if isinstance(sites, PointSet) else PointSet(sites)
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.factor = factor
        self.mode = mode
        self.regularization = float(regularization)
        self.jitter_used = float(jitter_used)
        self.prior_mean = prior_mean if prior_mean is not None else zero_mean()
        for arr in (self.coefficients, self.factor):
            arr.setflags(write=False)

    @property
    def dim(self):
        return self.kernel.dim

    @property
    def n_sites(self):
        return len(self.sites)

    @property
    def coefficient_blocks(self):
        return self.coefficients.reshape(-1, self.dim)

    def _points(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim}-vectors, got shape {x.shape}")
        return x

    def _single(self, x):
        pts = self._points(x)
        if len(pts) != 1:
            raise ValueError(f"predict_cov takes a single point, got {len(pts)}; use predict_cov_matrix")
        return pts

    def predict_mean(self, x):
        """Posterior mean at one point (shape (d,)) or at rows of (M, d)."""
        single = np.ndim(x) == 1
        pts = self._points(x)
        out = self.prior_mean(pts)
        if self.n_sites:
            out = out + (self.kernel.matrix(pts, self.sites.points) @ self.coefficients).reshape(pts.shape)
        return out[0] if single else out

    def _whitened(self, pts):
        # L^{-1} K(X, pts), shape (N d, M d)
        cross = self.kernel.matrix(self.sites.points, pts)
        return linalg.solve_triangular(self.factor, cross, lower=True, check_finite=False)

    def predict_cov(self, x, x2=None):
        """Posterior covariance block ``K_N(x, x2)`` of two single points, a d x d matrix.

        Use ``predict_cov_matrix`` or ``predict_var_blocks`` for many points.
        """
        x = self._single(x)
        x2 = x if x2 is None else self._single(x2)
        prior = self.kernel(x[0], x2[0])
        if not self.n_sites:
            return prior
        V1 = self._whitened(x)
        V2 = V1 if x2 is x else self._whitened(x2)
        return prior - V1.T @ V2

    def predict_cov_matrix(self, pts):
        """Joint posterior covariance over all rows of ``pts``, shape (M d, M d)."""
        pts = self._points(pts)
        prior = self.kernel.matrix(pts, pts)
        if not self.n_sites:
            return prior
        V = self._whitened(pts)
        C = prior - V.T @ V
        return 0.5 * (C + C.T)

    def predict_var_blocks(self, pts):
        """Diagonal blocks ``K_N(x, x)`` for each row of ``pts``, shape (M, d, d)."""
        pts = self._points(pts)
        d = self.dim
        prior = self.kernel(pts, pts)
        if not self.n_sites:
            return prior
        V = self._whitened(pts).reshape(-1, len(pts), d)
        return prior - np.einsum("nma,nmb->mab", V, V)

    def power_function(self, x):
        """``(K_N(x, x), lambda_max)`` for an interpolation model.

        For a single point returns a d x d matrix and a float; for rows of
        an (M, d) array returns arrays of shape (M, d, d) and (M,).
        """
        if self.mode != "interpolate":
            raise FitError("power function defined for interpolation only")
        single = np.ndim(x) == 1
        blocks = self.predict_var_blocks(x)
        blocks = 0.5 * (blocks + np.swapaxes(blocks, -1, -2))
        lam = np.linalg.eigvalsh(blocks)[..., -1]
        return (blocks[0], float(lam[0])) if single else (blocks, lam)

    def native_norm(self):
        """sqrt(A^T K(X,X) A), the native-space norm of the kernel part."""
        if not self.n_sites:
            return 0.0
        G = assemble_gram(self.kernel, self.sites)
        return math.sqrt(max(float(self.coefficients @ G @ self.coefficients), 0.0))

    def system_residual(self, obs):
        """Relative residual of the solved block system against ``obs``."""
        G = assemble_gram(self.kernel, self.sites, self.regularization + self.jitter_used)
        rhs = obs.stacked - self.prior_mean(obs.sites.points).reshape(-1)
        r = G @ self.coefficients - rhs
        return float(np.linalg.norm(r) / max(np.linalg.norm(rhs), np.finfo(float).tiny))

    def to_dict(self):
        if self.prior_mean.structure != "zero":
            raise ValueError("only zero-mean models can be exported")
        return {
            "format": EXPORT_FORMAT,
            "kernel": self.kernel.to_config(),
            "mode": self.mode,
            "regularization": self.regularization,
            "jitter_used": self.jitter_used,
            "sites": self.sites.points.tolist(),
            "coefficients": self.coefficients.tolist(),
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != EXPORT_FORMAT:
            raise ValueError(f"unrecognised model format {data.get('format')!r}")
        kernel = MatrixKernel.from_config(data["kernel"])
        d = kernel.dim
        sites = PointSet(np.asarray(data["sites"], dtype=float).reshape(-1, d))
        shift = data["regularization"] + data["jitter_used"]
        G = assemble_gram(kernel, sites, shift)
        factor = linalg.cholesky(G, lower=True, check_finite=False) if len(sites) else np.zeros((0, 0))
        return cls(kernel, sites, np.asarray(data["coefficients"], dtype=float), factor,
                   data["mode"], data["regularization"], data["jitter_used"])

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit(kernel, obs, mode="interpolate", regularization=0.0, prior_mean=None):
    """Condition the prior GP(prior_mean, kernel) on ``obs``.

    Parameters
    ----------
    kernel : MatrixKernel
    obs : Observations
    mode : {"interpolate", "posterior", "penalized"}
        ``regularization`` is ignored for ``interpolate``, is the noise
        variance sigma^2 for ``posterior`` and the penalty lambda for
        ``penalized``.
    prior_mean : MeanFunction, optional
        Defaults to the zero mean. The system is solved against the
        residuals ``Y - m(X)``.
    """
    if mode not in FIT_MODES:
        raise ValueError(f"unknown fit mode {mode!r}")
    if obs.sites.dim != kernel.dim:
        raise ValueError(f"observations are {obs.sites.dim}-dimensional, kernel is {kernel.dim}")
    reg = 0.0 if mode == "interpolate" else float(regularization)
    if reg < 0:
        raise ValueError("regularization must be non-negative")
    prior_mean = prior_mean if prior_mean is not None else zero_mean()
    G = assemble_gram(kernel, obs.sites)
    scale = float(np.mean(np.diag(G))) if G.size else 0.0
    if reg:
        G[np.diag_indices_from(G)] += reg
    L, jitter = robust_cholesky(G, scale)
    rhs = obs.stacked - prior_mean(obs.sites.points).reshape(-1) if len(obs) else np.zeros(0)
    coef = linalg.cho_solve((L, True), rhs, check_finite=False) if len(obs) else np.zeros(0)
    return GPModel(kernel, obs.sites, coef, L, mode, reg, jitter, prior_mean)


def prior_model(kernel, prior_mean=None):
    """The unconditioned GP as a model with no sites."""
    sites = PointSet(np.zeros((0, kernel.dim)))
    return GPModel(kernel, sites, np.zeros(0), np.zeros((0, 0)), "interpolate", 0.0, 0.0, prior_mean)


def predict_mean(model, x):
    return model.predict_mean(x)


def predict_cov(model, x, x2=None):
    return model.predict_cov(x, x2)


def power_function(model, x):
    return model.power_function(x)


def native_norm(model):
    return model.native_norm()


def penalized_objective(model, obs):
    """``sum_j |Y_j - s(x_j)|^2 + lambda * |s|_H^2`` for a fitted penalized model."""
    fitted = model.predict_mean(obs.sites.points)
    misfit = float(np.sum((obs.values - fitted) ** 2))
    return misfit + model.regularization * model.native_norm() ** 2
