"""Discrete norms of vector-valued errors and log-log rate estimation."""
import math
import warnings
from dataclasses import dataclass

import numpy as np


def _check_exponent(p):
    if p not in (1, 2, math.inf):
        raise ValueError(f"norm exponent must be 1, 2 or inf, got {p}")


def discrete_site_norm(values, p):
    """``(sum_components sum_sites |v|^p)^(1/p)``, the maximum for p = inf."""
    _check_exponent(p)
    v = np.atleast_2d(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("empty input")
    if p == math.inf:
        return float(np.abs(v).max())
    return float(np.sum(np.abs(v) ** p) ** (1.0 / p))


def _lq(values, weights, q):
    # values: (M, d) on the grid, weights: (M,)
    if q == math.inf:
        return float(np.abs(values).max())
    return float(np.sum(weights[:, None] * np.abs(values) ** q) ** (1.0 / q))


def grid_gradient(values, grid_shape, spacing):
    """Partial derivatives of a gridded vector field, shape (d_space, M, d).

    Central differences inside, one-sided at the boundary.
    """
    v = np.asarray(values, dtype=float)
    ncomp = v.shape[1]
    cube = v.reshape(*grid_shape, ncomp)
    parts = []
    for axis, hx in enumerate(spacing):
        parts.append(np.gradient(cube, hx, axis=axis, edge_order=1).reshape(-1, ncomp))
    return np.stack(parts)


def grid_Lq_norm(values, weights, q, s=0, grid_shape=None, spacing=None, seminorm=False):
    """Quadrature approximation of ``|| e ||_{W_q^s(D)^d}`` for s in {0, 1}.

    ``values`` are error vectors at the grid points (row-major over
    ``grid_shape``) and ``weights`` their cell volumes. The first-order
    seminorm is ``(sum_j || d_j e ||_{L_q}^2)^(1/2)``; the full norm
    combines orders 0..s in the ``l_q`` sense (maximum for q = inf).
    """
    _check_exponent(q)
    if s not in (0, 1):
        raise ValueError(f"derivative order must be 0 or 1, got {s}")
    v = np.atleast_2d(np.asarray(values, dtype=float))
    w = np.asarray(weights, dtype=float)
    if s == 0:
        return _lq(v, w, q)
    if grid_shape is None or spacing is None:
        raise ValueError("s=1 needs the grid shape and spacing")
    grads = grid_gradient(v, grid_shape, spacing)
    semi = math.sqrt(sum(_lq(g, w, q) ** 2 for g in grads))
    if seminorm:
        return semi
    base = _lq(v, w, q)
    if q == math.inf:
        return max(base, semi)
    return (base ** q + semi ** q) ** (1.0 / q)


@dataclass(frozen=True)
class RateEstimate:
    slope: float
    pairwise: tuple
    used: int


def estimate_rate(pairs):
    """Least-squares slope of log(error) against log(h).

    Non-positive errors are dropped with a warning. Pairwise slopes are
    between consecutive retained entries in the given order.
    """
    pairs = [(float(h), float(e)) for h, e in pairs]
    kept = [(h, e) for h, e in pairs if h > 0 and e > 0 and math.isfinite(e)]
    if len(kept) < len(pairs):
        warnings.warn(f"dropped {len(pairs) - len(kept)} non-positive error values", stacklevel=2)
    if len(kept) < 2:
        raise ValueError("need at least two positive (h, error) pairs")
    lh = np.log([h for h, _ in kept])
    le = np.log([e for _, e in kept])
    slope = float(np.polyfit(lh, le, 1)[0])
    pairwise = tuple(float((le[i + 1] - le[i]) / (lh[i + 1] - lh[i])) for i in range(len(kept) - 1))
    return RateEstimate(slope, pairwise, len(kept))


def sampling_gamma(q, p=2):
    return max(2.0, p, q)


def predicted_rate(tau, beta, s, q, d):
    """Exponent of h in the no-noise error bounds: min(beta, tau) - s - d (1/2 - 1/q)_+."""
    smooth = min(beta, tau)
    if math.isinf(smooth):
        return math.nan
    inv_q = 0.0 if q == math.inf else 1.0 / q
    return smooth - s - d * max(0.5 - inv_q, 0.0)
