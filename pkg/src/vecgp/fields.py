"""Ground-truth vector fields with known structure, and noisy sampling.

Trigonometric fields are built from potentials that are sums of plane
waves ``c * sin(w . x + phase)``, whose derivatives are closed form:

* stream2d           v = (d2 psi, -d1 psi)        divergence-free, d = 2
* vectorpotential3d  v = curl Psi                 divergence-free, d = 3
* gradient           v = grad phi                 curl-free, d = 2 or 3

Kernel combinations ``sum_j K(., z_j) beta_j`` live in the native space of
``K`` and carry their native norm.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .calculus import curl_magnitude, fd_divergence
from .geometry import Domain, PointSet
from .gp import Observations

CERTIFY_POINTS = 100
CERTIFY_TOL = 1e-6


class FieldStructureError(ValueError):
    pass


@dataclass(frozen=True)
class PlaneWaves:
    """Scalar potential ``sum_i amp_i * sin(freq_i . x + phase_i)``."""

    amplitudes: tuple
    frequencies: tuple
    phases: tuple

    @classmethod
    def of(cls, terms):
        """From an iterable of ``(amplitude, frequency-vector, phase)``."""
        amps, freqs, phases = zip(*terms) if terms else ((), (), ())
        return cls(tuple(float(a) for a in amps),
                   tuple(tuple(float(v) for v in w) for w in freqs),
                   tuple(float(p) for p in phases))

    def _arg(self, x):
        W = np.asarray(self.frequencies, dtype=float)
        return x @ W.T + np.asarray(self.phases)

    def value(self, x):
        if not self.amplitudes:
            return np.zeros(len(x))
        return np.sin(self._arg(x)) @ np.asarray(self.amplitudes)

    def gradient(self, x):
        if not self.amplitudes:
            return np.zeros_like(x)
        W = np.asarray(self.frequencies, dtype=float)
        return (np.cos(self._arg(x)) * np.asarray(self.amplitudes)) @ W


def sin_sin(a=1.0, b=1.0, amplitude=1.0):
    """``amplitude * sin(a x1) sin(b x2)`` as plane waves (product-to-sum)."""
    h = 0.5 * amplitude
    return PlaneWaves.of([(h, (a, -b), math.pi / 2), (-h, (a, b), math.pi / 2)])


def sin_cos(a=1.0, b=1.0, amplitude=1.0):
    """``amplitude * sin(a x1) cos(b x2)`` as plane waves."""
    h = 0.5 * amplitude
    return PlaneWaves.of([(h, (a, b), 0.0), (h, (a, -b), 0.0)])


@dataclass
class AnalyticField:
    kind: str
    structure: str
    dim: int
    evaluator: Callable
    params: dict = field(default_factory=dict)
    native_norm: Optional[float] = None

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.evaluator(x)

    def certify(self, domain=None, n_points=CERTIFY_POINTS, tol=CERTIFY_TOL, seed=0):
        """Finite-difference check of the declared structure at random points.

        Returns the largest scaled defect; raises if it exceeds ``tol``.
        """
        domain = domain or Domain.unit(self.dim)
        rng = np.random.default_rng(seed)
        lo, hi = np.array(domain.lower), np.array(domain.upper)
        pts = lo + (hi - lo) * rng.random((n_points, self.dim))
        scale = max(float(np.abs(self(pts)).max()), 1.0)
        step = 1e-4 * self.params.get("length_scale", 1.0)
        if self.structure == "divergence_free":
            defect = np.abs(fd_divergence(self, pts, step)).max() / scale
        else:
            defect = curl_magnitude(self, pts, step).max() / scale
        if defect > tol:
            raise FieldStructureError(f"{self.kind} field is not {self.structure}: defect {defect:.3e}")
        return float(defect)


def make_stream_field_2d(psi=None, certify=True):
    """v = (d psi/dx2, -d psi/dx1); ``psi`` defaults to sin(x1) sin(x2)."""
    psi = psi if psi is not None else sin_sin()

    def evaluate(x):
        g = psi.gradient(x)
        return np.stack([g[:, 1], -g[:, 0]], axis=1)

    f = AnalyticField("stream2d", "divergence_free", 2, evaluate, {"potential": psi})
    if certify:
        f.certify()
    return f


def make_gradient_field(phi=None, dim=2, certify=True):
    """v = grad phi; ``phi`` defaults to sin(x1) cos(x2)."""
    phi = phi if phi is not None else sin_cos()
    if len(phi.frequencies[0]) != dim:
        raise ValueError(f"potential frequencies are {len(phi.frequencies[0])}-dimensional, need {dim}")

    f = AnalyticField("gradient", "curl_free", dim, phi.gradient, {"potential": phi})
    if certify:
        f.certify()
    return f


def make_vectorpotential_field_3d(potentials=None, certify=True):
    """v = curl Psi for ``Psi = (P1, P2, P3)``; default ``(0, 0, sin x1 sin x2)``."""
    if potentials is None:
        s = sin_sin()
        lifted = PlaneWaves.of([(a, w + (0.0,), p) for a, w, p in zip(s.amplitudes, s.frequencies, s.phases)])
        potentials = (PlaneWaves.of([]), PlaneWaves.of([]), lifted)
    P = tuple(potentials)

    def evaluate(x):
        g = [p.gradient(x) for p in P]
        return np.stack(
            [g[2][:, 1] - g[1][:, 2], g[0][:, 2] - g[2][:, 0], g[1][:, 0] - g[0][:, 1]], axis=1
        )

    f = AnalyticField("vectorpotential3d", "divergence_free", 3, evaluate, {"potential": P})
    if certify:
        f.certify()
    return f


def make_kernel_combo(kernel, centers, betas, certify=True):
    """``x -> sum_j K(x, z_j) beta_j`` with its native norm attached."""
    Z = centers.points if isinstance(centers, PointSet) else np.atleast_2d(np.asarray(centers, dtype=float))
    B = np.asarray(betas, dtype=float).reshape(len(Z), kernel.dim)
    flat = B.reshape(-1)

    def evaluate(x):
        return (kernel.matrix(x, Z) @ flat).reshape(len(x), kernel.dim)

    G = kernel.matrix(Z, Z)
    norm = math.sqrt(max(float(flat @ G @ flat), 0.0))
    structure = {"divergence_free": "divergence_free", "curl_free": "curl_free"}.get(kernel.mode, "generic")
    f = AnalyticField(
        "kernel_combo", structure, kernel.dim, evaluate,
        {"kernel": kernel, "centers": Z, "betas": B, "length_scale": 1.0 / kernel.base.kappa},
        native_norm=norm,
    )
    if certify and structure != "generic" and kernel.base.smoothness() >= 3:
        f.certify()
    return f


def random_kernel_combo(kernel, n_centers, domain, seed=0, certify=True):
    """Kernel combination with centres uniform in ``domain`` and standard-normal
    coefficients, rescaled so the field has unit native norm."""
    rng = np.random.default_rng(seed)
    lo, hi = np.array(domain.lower), np.array(domain.upper)
    Z = lo + (hi - lo) * rng.random((n_centers, domain.dim))
    B = rng.standard_normal((n_centers, domain.dim))
    raw = make_kernel_combo(kernel, Z, B, certify=False)
    return make_kernel_combo(kernel, Z, B / raw.native_norm, certify=certify)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("noise sigma must be non-negative")


def site_noise(noise, n_sites, dim):
    """Noise vectors; site j draws from its own stream keyed by (seed, j)."""
    if noise.sigma == 0.0:
        return np.zeros((n_sites, dim))
    return np.stack([
        noise.sigma * np.random.default_rng([noise.seed, j]).standard_normal(dim)
        for j in range(n_sites)
    ]) if n_sites else np.zeros((0, dim))


def sample_observations(field, X, noise=NoiseSpec()):
    """Observations ``v(x_j) + sigma * xi_j`` at the sites ``X``."""
    sites = X if isinstance(X, PointSet) else PointSet(X)
    values = field(sites.points) + site_noise(noise, len(sites), sites.dim)
    return Observations(sites, values, noise.sigma ** 2 if noise.sigma > 0 else None)
