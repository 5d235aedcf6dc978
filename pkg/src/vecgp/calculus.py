"""Central finite-difference divergence and curl of vector fields.

Fields are callables mapping an ``(M, d)`` array of points to an ``(M, d)``
array of values. These are used as independent checks of the analytic
structure of kernels, posterior means and samples, so nothing here knows
about kernels.
"""
import numpy as np


def _partials(field, x, step):
    """Jacobian J[m, i, j] = d field_i / d x_j at each row of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, d = x.shape
    jac = np.empty((m, d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        fp = np.asarray(field(x + e), dtype=float).reshape(m, -1)
        fm = np.asarray(field(x - e), dtype=float).reshape(m, -1)
        jac[:, :, j] = (fp - fm) / (2.0 * step)
    return jac


def fd_jacobian(field, x, step=1e-4):
    return _partials(field, x, step)


def fd_divergence(field, x, step=1e-4):
    """Divergence at each point of ``x``, shape ``(M,)``."""
    jac = _partials(field, x, step)
    return np.trace(jac, axis1=1, axis2=2)


def fd_curl(field, x, step=1e-4):
    """Curl at each point of ``x``.

    Returns shape ``(M,)`` in two dimensions (the scalar rotation
    ``d v2/dx1 - d v1/dx2``) and ``(M, 3)`` in three dimensions.
    """
    jac = _partials(field, x, step)
    d = jac.shape[1]
    if d == 2:
        return jac[:, 1, 0] - jac[:, 0, 1]
    if d == 3:
        return np.stack(
            [
                jac[:, 2, 1] - jac[:, 1, 2],
                jac[:, 0, 2] - jac[:, 2, 0],
                jac[:, 1, 0] - jac[:, 0, 1],
            ],
            axis=1,
        )
    raise ValueError(f"curl is defined for d=2 or d=3, got d={d}")


def curl_magnitude(field, x, step=1e-4):
    c = fd_curl(field, x, step)
    return np.abs(c) if c.ndim == 1 else np.linalg.norm(c, axis=1)
