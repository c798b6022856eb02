"""Dense linear algebra kernels: SVD, matrix norms, proximal operators.

Everything operates on plain 2-D float64 numpy arrays and returns new arrays;
inputs are never mutated.
"""

import numpy as np

NORM_KINDS = ("frobenius", "nuclear", "l1", "linf", "spectral")

_POWER_TOL = 1e-12
_POWER_MAXITER = 10_000


class SvdFactors:
    """Reduced SVD with singular values below a cutoff dropped.

    Attributes
    ----------
    U : (m, r) array with orthonormal columns
    sigma : (r,) nonincreasing, nonnegative singular values
    V : (n, r) array with orthonormal columns, so that A ~= U @ diag(sigma) @ V.T
    """

    def __init__(self, U, sigma, V):
        self.U = np.asarray(U, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)
        self.V = np.asarray(V, dtype=float)

    @property
    def rank(self):
        return self.sigma.size

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.T


def as_matrix(a, name="matrix"):
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    out = np.asarray(a, dtype=float)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def svd(a, rank_cutoff=None):
    """Reduced SVD of `a`, keeping singular values strictly above `rank_cutoff`.

    The default cutoff is 1e-10 times the largest singular value, which makes
    rank detection scale invariant.
    """
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"SVD failed to converge: {exc}") from exc
    if rank_cutoff is None:
        rank_cutoff = 1e-10 * (s[0] if s.size else 0.0)
    if rank_cutoff < 0:
        raise ValueError("rank_cutoff must be nonnegative")
    r = int(np.sum(s > rank_cutoff))
    return SvdFactors(u[:, :r], s[:r], vt[:r, :].T)


def spectral_norm(a):
    """Largest singular value, by power iteration with a full-SVD fallback.

    Power iteration starts from a fixed-seed random vector so repeated calls
    are reproducible; it stops on relative change below 1e-12 and falls back
    to a full SVD if it has not converged after 10,000 iterations.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m == 0 or n == 0:
        return 0.0
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    nv = np.linalg.norm(v)
    if nv == 0.0:  # pragma: no cover - measure zero
        return float(np.linalg.svd(a, compute_uv=False)[0])
    v /= nv
    sigma_prev = -1.0
    for _ in range(_POWER_MAXITER):
        u = a @ v
        sigma = np.linalg.norm(u)
        if sigma == 0.0:
            return 0.0
        w = a.T @ (u / sigma)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return float(sigma)
        v = w / nw
        if abs(sigma - sigma_prev) <= _POWER_TOL * max(sigma, 1e-300):
            return float(sigma)
        sigma_prev = sigma
    # stagnation: clustered leading singular values, do it exactly
    return float(np.linalg.svd(a, compute_uv=False)[0])


def norm(a, kind):
    """Matrix norm of the requested kind.

    kind is one of "frobenius", "nuclear" (sum of singular values), "l1"
    (sum of absolute entries), "linf" (max absolute entry), "spectral".
    """
    a = as_matrix(a)
    if kind == "frobenius":
        return float(np.linalg.norm(a, "fro"))
    if kind == "nuclear":
        return float(np.sum(np.linalg.svd(a, compute_uv=False)))
    if kind == "l1":
        return float(np.abs(a).sum())
    if kind == "linf":
        return float(np.abs(a).max())
    if kind == "spectral":
        return spectral_norm(a)
    raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


def svt(a, tau):
    """Singular value thresholding: shrink every singular value by tau.

    Proximal operator of tau * nuclear norm. Values exactly at the threshold
    map to zero.
    """
    a = as_matrix(a)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0.0
    if not np.any(keep):
        return np.zeros_like(a)
    return (u[:, keep] * s[keep]) @ vt[keep, :]


def soft_threshold(a, tau):
    """Entrywise shrinkage sign(a) * max(|a| - tau, 0).

    Proximal operator of tau * l1 norm. Values exactly at the threshold map
    to zero.
    """
    a = as_matrix(a)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)


def inner(x, y):
    """Trace inner product sum_ij x_ij * y_ij."""
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.vdot(x, y))
