import numpy as np


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Works on the last axis, so a ``(H, K)`` matrix is projected row by row.
    Sort-and-threshold method: with ``u`` sorted descending and ``s`` its
    cumulative sum, ``rho`` is the largest ``j`` with ``u_j - (s_j - 1)/j > 0``
    and the output is ``max(v - theta, 0)`` for ``theta = (s_rho - 1)/rho``.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        raise ValueError("project_simplex needs at least one axis")
    n = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    j = np.arange(1, n + 1)
    cond = u - css / j > 0
    # cond is true on a prefix, so the last true index is count - 1
    rho = np.count_nonzero(cond, axis=-1)
    theta = np.take_along_axis(css, (rho - 1)[..., None], axis=-1) / rho[..., None]
    return np.maximum(v - theta, 0.0)
