"""Radial base kernels and the matrix-valued kernels built from them.

Every base kernel is written as ``Phi(z) = alpha2 * psi(kappa**2 * |z|**2)``
with a unit-normalised profile ``psi`` of the squared scaled radius ``s``.
Working in ``s`` instead of ``r`` gives the Hessian

    d_k d_l Phi(z) = alpha2 * (4 kappa^4 psi''(s) z_k z_l + 2 kappa^2 psi'(s) delta_kl)

without the ``phi'(r)/r`` removable singularity at the origin.

From the Hessian ``H`` and Laplacian ``L = tr H`` the matrix kernels are

    divergence_free:  (-L) I + H
    curl_free:        -H
    diagonal:         Phi I
"""
import math
import warnings
from dataclasses import dataclass, asdict
from typing import Callable, Optional

import numpy as np

from .calculus import fd_curl, fd_divergence

FAMILIES = ("matern", "wendland", "gaussian")
MODES = ("divergence_free", "curl_free", "diagonal")
MATERN_NUS = (1.5, 2.5, 3.5)
WENDLAND_KS = (1, 2, 3)


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class ScalarKernelSpec:
    """Isotropic base kernel with its smoothness metadata.

    Parameters
    ----------
    family : {"matern", "wendland", "gaussian"}
    dim : int
        Spatial dimension, 2 or 3.
    nu : float, optional
        Matern smoothness, one of 1.5, 2.5, 3.5.
    k : int, optional
        Wendland smoothness index for the d=3 family psi_{3,k}, k in 1..3.
    kappa : float
        Inverse length scale.
    alpha2 : float
        Variance (field magnitude squared).
    """

    family: str
    dim: int = 2
    nu: Optional[float] = None
    k: Optional[int] = None
    kappa: float = 1.0
    alpha2: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        if self.dim not in (1, 2, 3):
            raise KernelError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if self.family == "matern":
            if self.nu is None or float(self.nu) not in MATERN_NUS:
                raise KernelError(f"matern nu must be one of {MATERN_NUS}, got {self.nu}")
            object.__setattr__(self, "nu", float(self.nu))
        if self.family == "wendland":
            if self.k is None or int(self.k) not in WENDLAND_KS:
                raise KernelError(f"wendland k must be one of {WENDLAND_KS}, got {self.k}")
            object.__setattr__(self, "k", int(self.k))
        if not (self.kappa > 0 and self.alpha2 > 0):
            raise KernelError("kappa and alpha2 must be positive")
        tau = sobolev_order(self)
        if not tau > self.dim / 2:
            raise KernelError(
                f"derived Sobolev order tau={tau} does not exceed d/2={self.dim / 2}"
            )

    @property
    def tau(self):
        return sobolev_order(self)

    @property
    def support_radius(self):
        """Radius of the support in unscaled units (inf unless Wendland)."""
        return 1.0 / self.kappa if self.family == "wendland" else math.inf

    def smoothness(self):
        """Number of classical derivatives of Phi (inf for the Gaussian)."""
        if self.family == "gaussian":
            return math.inf
        if self.family == "matern":
            return int(2 * math.ceil(self.nu - 1))
        return 2 * self.k

    def to_config(self):
        return {key: val for key, val in asdict(self).items() if val is not None}


def sobolev_order(spec):
    """Order tau of the Sobolev space reproduced by the derived matrix kernel.

    The base kernel reproduces ``H^{tau+1}(R^d)``. For Matern that is
    ``nu + d/2``; for Wendland ``psi_{3,k}`` used in dimension ``d <= 3`` it
    is ``d/2 + k + 1/2``. The Gaussian has no finite order and returns
    ``math.inf``.
    """
    if spec.family == "gaussian":
        return math.inf
    if spec.family == "matern":
        return spec.nu + spec.dim / 2 - 1.0
    return spec.dim / 2 + spec.k + 0.5 - 1.0


@dataclass(frozen=True)
class RadialProfile:
    """psi and its first two derivatives with respect to ``s = r**2``.

    ``support`` is the scaled radius beyond which psi vanishes. When
    ``psi2_singular`` is set, psi'' blows up like ``1/r`` at the origin
    (Phi is still C^2 because psi'' only ever multiplies ``z z^T``).
    """

    psi: Callable
    psi1: Callable
    psi2: Callable
    support: float = math.inf
    psi2_singular: bool = False


def _matern_profile(nu):
    a = math.sqrt(2.0 * nu)
    a2, a4 = a * a, a ** 4

    def u_of(s):
        return a * np.sqrt(np.maximum(s, 0.0))

    if nu == 1.5:
        def psi(s):
            u = u_of(s)
            return (1.0 + u) * np.exp(-u)

        def psi1(s):
            return -0.5 * a2 * np.exp(-u_of(s))

        def psi2(s):
            u = u_of(s)
            with np.errstate(divide="ignore"):
                return np.where(u > 0, a4 * np.exp(-u) / (4.0 * np.where(u > 0, u, 1.0)), np.inf)

        return RadialProfile(psi, psi1, psi2, psi2_singular=True)

    if nu == 2.5:
        def psi(s):
            u = u_of(s)
            return (1.0 + u + u * u / 3.0) * np.exp(-u)

        def psi1(s):
            u = u_of(s)
            return -a2 * (1.0 + u) * np.exp(-u) / 6.0

        def psi2(s):
            return a4 * np.exp(-u_of(s)) / 12.0

        return RadialProfile(psi, psi1, psi2)

    def psi(s):
        u = u_of(s)
        return (1.0 + u + 0.4 * u * u + u ** 3 / 15.0) * np.exp(-u)

    def psi1(s):
        u = u_of(s)
        return -a2 * (3.0 + 3.0 * u + u * u) * np.exp(-u) / 30.0

    def psi2(s):
        u = u_of(s)
        return a4 * (1.0 + u) * np.exp(-u) / 60.0

    return RadialProfile(psi, psi1, psi2)


def _wendland_profile(k):
    def one_minus(s):
        return np.maximum(1.0 - np.sqrt(np.maximum(s, 0.0)), 0.0)

    if k == 1:
        def psi(s):
            r, t = np.sqrt(s), one_minus(s)
            return t ** 4 * (4.0 * r + 1.0)

        def psi1(s):
            return -10.0 * one_minus(s) ** 3

        def psi2(s):
            r, t = np.sqrt(s), one_minus(s)
            with np.errstate(divide="ignore"):
                return np.where(r > 0, 15.0 * t * t / np.where(r > 0, r, 1.0), np.inf)

        return RadialProfile(psi, psi1, psi2, support=1.0, psi2_singular=True)

    if k == 2:
        def psi(s):
            r, t = np.sqrt(s), one_minus(s)
            return t ** 6 * (35.0 * s + 18.0 * r + 3.0) / 3.0

        def psi1(s):
            r, t = np.sqrt(s), one_minus(s)
            return -28.0 / 3.0 * t ** 5 * (5.0 * r + 1.0)

        def psi2(s):
            return 140.0 * one_minus(s) ** 4

        return RadialProfile(psi, psi1, psi2, support=1.0)

    def psi(s):
        r, t = np.sqrt(s), one_minus(s)
        return t ** 8 * (32.0 * r * s + 25.0 * s + 8.0 * r + 1.0)

    def psi1(s):
        r, t = np.sqrt(s), one_minus(s)
        return -11.0 * t ** 7 * (16.0 * s + 7.0 * r + 1.0)

    def psi2(s):
        r, t = np.sqrt(s), one_minus(s)
        return 132.0 * t ** 6 * (6.0 * r + 1.0)

    return RadialProfile(psi, psi1, psi2, support=1.0)


def _gaussian_profile():
    def psi(s):
        return np.exp(-s)

    def psi1(s):
        return -np.exp(-s)

    return RadialProfile(psi, psi1, psi)


def radial_profile(spec):
    if spec.family == "gaussian":
        return _gaussian_profile()
    if spec.family == "matern":
        return _matern_profile(spec.nu)
    return _wendland_profile(spec.k)


def _squared_scaled_radius(spec, z):
    return spec.kappa ** 2 * np.sum(z * z, axis=-1)


def eval_scalar(spec, x, y):
    """Phi(x - y); broadcasts over leading axes of ``x`` and ``y``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape[-1] != spec.dim or y.shape[-1] != spec.dim:
        raise KernelError(f"expected {spec.dim}-vectors, got {x.shape} and {y.shape}")
    s = _squared_scaled_radius(spec, x - y)
    return spec.alpha2 * radial_profile(spec).psi(s)


def _derivative_terms(spec, z):
    """Return (psi'(s), psi''(s) with the origin guarded) for difference vectors z."""
    prof = radial_profile(spec)
    s = _squared_scaled_radius(spec, z)
    p1 = prof.psi1(s)
    if prof.psi2_singular:
        # z z^T vanishes wherever psi'' is unbounded
        p2 = np.where(s > 0, prof.psi2(np.where(s > 0, s, 1.0)), 0.0)
    else:
        p2 = prof.psi2(s)
    return s, p1, p2


def hessian(spec, z):
    """Matrix of second partials of Phi at ``z``; shape ``(..., d, d)``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != spec.dim:
        raise KernelError(f"expected {spec.dim}-vectors, got shape {z.shape}")
    _, p1, p2 = _derivative_terms(spec, z)
    k2, k4 = spec.kappa ** 2, spec.kappa ** 4
    outer = z[..., :, None] * z[..., None, :]
    eye = np.eye(spec.dim)
    return spec.alpha2 * (4.0 * k4 * p2[..., None, None] * outer + 2.0 * k2 * p1[..., None, None] * eye)


def laplacian(spec, z):
    z = np.asarray(z, dtype=float)
    _, p1, p2 = _derivative_terms(spec, z)
    k2, k4 = spec.kappa ** 2, spec.kappa ** 4
    return spec.alpha2 * (4.0 * k4 * p2 * np.sum(z * z, axis=-1) + 2.0 * spec.dim * k2 * p1)


@dataclass(frozen=True)
class MatrixKernel:
    """A d x d matrix-valued kernel ``K(x, y) = Phi_mode(x - y)``."""

    base: ScalarKernelSpec
    mode: str = "divergence_free"

    def __post_init__(self):
        if self.mode not in MODES:
            raise KernelError(f"unknown kernel mode {self.mode!r}")
        if self.mode != "diagonal" and self.base.dim not in (2, 3):
            raise KernelError(f"{self.mode} kernels need d in (2, 3), got {self.base.dim}")
        if (
            self.mode != "diagonal"
            and self.base.family == "wendland"
            and self.base.k == 1
            and self.base.dim == 3
        ):
            warnings.warn(
                "wendland k=1 in d=3: Phi is only C^2, so the "
                f"{self.mode} kernel has no classical derivatives",
                stacklevel=2,
            )

    @property
    def dim(self):
        return self.base.dim

    @property
    def tau(self):
        return self.base.tau

    def _phi(self, z):
        if self.mode == "diagonal":
            s = _squared_scaled_radius(self.base, z)
            val = self.base.alpha2 * radial_profile(self.base).psi(s)
            return val[..., None, None] * np.eye(self.dim)
        H = hessian(self.base, z)
        if self.mode == "curl_free":
            return -H
        lap = np.trace(H, axis1=-2, axis2=-1)
        return -lap[..., None, None] * np.eye(self.dim) + H

    def __call__(self, x, y):
        """Blocks ``K(x, y)``; broadcasts over leading axes."""
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        if x.shape[-1] != self.dim or y.shape[-1] != self.dim:
            raise KernelError(f"expected {self.dim}-vectors, got {x.shape} and {y.shape}")
        return self._phi(x - y)

    def blocks(self, X, Y):
        """All blocks ``K(X_i, Y_j)`` as an array of shape ``(N, M, d, d)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return self(X[:, None, :], Y[None, :, :])

    def matrix(self, X, Y):
        """Flattened cross-covariance of shape ``(N d, M d)``.

        Row ``i*d + a`` and column ``j*d + b`` hold ``K(X_i, Y_j)[a, b]``.
        """
        B = self.blocks(X, Y)
        n, m, d, _ = B.shape
        return B.transpose(0, 2, 1, 3).reshape(n * d, m * d)

    def to_config(self):
        cfg = self.base.to_config()
        cfg["mode"] = self.mode
        return cfg

    @classmethod
    def from_config(cls, cfg):
        cfg = dict(cfg)
        mode = cfg.pop("mode", "divergence_free")
        return cls(ScalarKernelSpec(**cfg), mode)


def eval_matrix(kernel, x, y):
    return kernel(x, y)


def divergence_of_column(kernel, x, y, column, step=None):
    """Finite-difference divergence in ``x`` of column ``column`` of K(x, y).

    Only meaningful for divergence-free kernels whose base is at least three
    times differentiable.
    """
    if kernel.mode != "divergence_free":
        raise KernelError(f"divergence check needs a divergence_free kernel, got {kernel.mode}")
    _require_c3(kernel.base)
    step = 1e-4 / kernel.base.kappa if step is None else step
    y = np.asarray(y, dtype=float)
    col = lambda pts: kernel(pts, y)[..., :, column]
    return fd_divergence(col, np.atleast_2d(x), step)


def curl_of_column(kernel, x, y, column, step=None):
    if kernel.mode != "curl_free":
        raise KernelError(f"curl check needs a curl_free kernel, got {kernel.mode}")
    _require_c3(kernel.base)
    step = 1e-4 / kernel.base.kappa if step is None else step
    y = np.asarray(y, dtype=float)
    col = lambda pts: kernel(pts, y)[..., :, column]
    return fd_curl(col, np.atleast_2d(x), step)


def _require_c3(spec):
    if spec.smoothness() < 3:
        raise KernelError(
            "column divergence/curl needs a three times differentiable base kernel "
            "(matern nu >= 2.5, wendland k >= 2, or gaussian); "
            f"got {spec.family} with nu={spec.nu}, k={spec.k}"
        )


def structure_scale(kernel):
    """Magnitude of first derivatives of kernel entries, alpha2 * kappa^3."""
    return kernel.base.alpha2 * kernel.base.kappa ** 3
