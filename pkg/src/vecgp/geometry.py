"""Point sets on axis-aligned boxes and their fill distance, separation
radius and mesh ratio."""
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

DUPLICATE_TOL = 1e-12
HALTON_BASES = (2, 3, 5)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise GeometryError("lower and upper bounds differ in length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise GeometryError(f"need lower < upper componentwise, got {lo} and {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim):
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, points, tol=0.0):
        p = np.atleast_2d(points)
        return np.all((p >= np.array(self.lower) - tol) & (p <= np.array(self.upper) + tol), axis=1)

    def shrink(self, margin):
        lo = np.array(self.lower) + margin
        hi = np.array(self.upper) - margin
        return Domain(tuple(lo), tuple(hi))

    def grid(self, per_axis):
        """Tensor-product lattice including the boundary, ``per_axis**d`` points."""
        axes = [np.linspace(a, b, per_axis) if per_axis > 1 else np.array([(a + b) / 2])
                for a, b in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


class PointSet:
    """Pairwise distinct sites in R^d.

    Construction rejects points closer than ``DUPLICATE_TOL``; passing a
    ``domain`` additionally checks containment.
    """

    def __init__(self, points, domain=None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            pts = pts.reshape(0, domain.dim if domain is not None else pts.shape[-1])
        if pts.ndim != 2:
            raise GeometryError(f"points must be an (N, d) array, got shape {pts.shape}")
        if domain is not None:
            if domain.dim != pts.shape[1]:
                raise GeometryError(f"domain is {domain.dim}-dimensional, points are {pts.shape[1]}")
            if not np.all(domain.contains(pts, tol=1e-12)):
                raise GeometryError("point set leaves its domain")
        if len(pts) > 1:
            dist, _ = cKDTree(pts).query(pts, k=2)
            if dist[:, 1].min() < DUPLICATE_TOL:
                raise GeometryError("point set contains duplicate points")
        pts.setflags(write=False)
        self.points = pts
        self.domain = domain

    def __len__(self):
        return len(self.points)

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    @property
    def dim(self):
        return self.points.shape[1]

    def __repr__(self):
        return f"PointSet(N={len(self)}, d={self.dim})"


def _as_points(X):
    return X.points if isinstance(X, PointSet) else np.atleast_2d(np.asarray(X, dtype=float))


@dataclass(frozen=True)
class GeometryStats:
    fill_distance: float
    separation_radius: float
    mesh_ratio: float
    probe_slack: float = 0.0


def probe_slack(dom, probe_resolution):
    """Half-diagonal of one probe-grid cell: the fill-distance approximation error bound."""
    widths = (np.subtract(dom.upper, dom.lower)) / (probe_resolution - 1)
    return 0.5 * float(np.linalg.norm(widths))


def fill_distance(X, dom, probe_resolution=101):
    """Largest distance from a probe-grid point of ``dom`` to its nearest site.

    Underestimates the true supremum by at most ``probe_slack(dom, probe_resolution)``.
    """
    pts = _as_points(X)
    if len(pts) == 0:
        raise GeometryError("empty point set")
    if probe_resolution < 2:
        raise GeometryError("probe_resolution must be at least 2")
    probes = dom.grid(probe_resolution)
    dist, _ = cKDTree(pts).query(probes)
    return float(dist.max())


def separation_radius(X):
    pts = _as_points(X)
    if len(pts) < 2:
        raise GeometryError("separation radius undefined for fewer than two points")
    return 0.5 * float(pdist(pts).min())


def mesh_ratio(X, dom, probe_resolution=101):
    h = fill_distance(X, dom, probe_resolution)
    q = separation_radius(X)
    return GeometryStats(h, q, h / q, probe_slack(dom, probe_resolution))


def radical_inverse(index, base):
    """Van der Corput radical inverse of a non-negative integer."""
    inv, f = 0.0, 1.0 / base
    i = index
    while i > 0:
        i, digit = divmod(i, base)
        inv += digit * f
        f /= base
    return inv


def halton(count, dim, skip=1):
    """First ``count`` Halton points in [0,1)^dim, starting at index ``skip``.

    The default skip drops the origin, so the sequence opens with (1/2, 1/3).
    """
    bases = HALTON_BASES[:dim]
    return np.array([[radical_inverse(i, b) for b in bases] for i in range(skip, skip + count)])


def generate_points(kind, count, dom, seed=0):
    """Deterministic point sets on a box.

    ``grid`` treats ``count`` as points per axis; ``halton`` and
    ``uniform_random`` treat it as the total number of points.
    """
    if count < 1:
        raise GeometryError("count must be at least 1")
    lo, hi = np.array(dom.lower), np.array(dom.upper)
    if kind == "grid":
        pts = dom.grid(count)
    elif kind == "halton":
        if dom.dim > len(HALTON_BASES):
            raise GeometryError(f"halton supports d <= {len(HALTON_BASES)}")
        pts = lo + (hi - lo) * halton(count, dom.dim)
    elif kind == "uniform_random":
        rng = np.random.default_rng(seed)
        pts = lo + (hi - lo) * rng.random((count, dom.dim))
        while len(pts) > 1 and cKDTree(pts).query(pts, k=2)[0][:, 1].min() < DUPLICATE_TOL:
            pts = lo + (hi - lo) * rng.random((count, dom.dim))
    else:
        raise GeometryError(f"unknown point kind {kind!r}")
    return PointSet(pts, dom)

