"""Projector algebra for the structured matrix subspaces of low-rank plus
sparse recovery: tangent spaces of a rank factorization, entry supports,
explicit orthonormal span bases, complements and direct sums, together with
the coherence diagnostics defined on them.

All subspaces are of R^{m x n} with the trace inner product. Handles are
immutable after construction and their projections are pure functions.
"""

import warnings

import numpy as np

from .linalg import as_matrix, spectral_norm

_ORTHO_TOL = 1e-10
_DEGENERATE_MARGIN = 1e-6
_NEUMANN_RTOL = 1e-12
_NEUMANN_CAP = 10_000


class DegenerateSum(Exception):
    """Two subspaces overlap too much for a stable direct sum."""


class Subspace:
    """Base class: a subspace of m x n matrices with an orthogonal projector."""

    shape = None

    def project(self, x):
        raise NotImplementedError

    def dim(self):
        raise NotImplementedError

    def complement(self):
        return Complement(self)

    def _check_shape(self, x):
        x = as_matrix(x)
        if x.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {x.shape}")
        return x


class SupportSet(Subspace):
    """Matrices supported on a fixed set of entries.

    Stored as a boolean mask; the (i, j) pair view is available through
    `pairs()` and `from_pairs`.
    """

    def __init__(self, rows, cols, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (rows, cols):
            raise ValueError(f"mask shape {mask.shape} != ({rows}, {cols})")
        self.shape = (rows, cols)
        self.mask = mask.copy()
        self.mask.setflags(write=False)

    @classmethod
    def from_pairs(cls, rows, cols, pairs):
        mask = np.zeros((rows, cols), dtype=bool)
        for i, j in pairs:
            if not (0 <= i < rows and 0 <= j < cols):
                raise ValueError(f"index ({i}, {j}) out of range for ({rows}, {cols})")
            mask[i, j] = True
        return cls(rows, cols, mask)

    @classmethod
    def empty(cls, rows, cols):
        return cls(rows, cols, np.zeros((rows, cols), dtype=bool))

    @classmethod
    def full(cls, rows, cols):
        return cls(rows, cols, np.ones((rows, cols), dtype=bool))

    def pairs(self):
        return [tuple(ij) for ij in np.argwhere(self.mask)]

    @property
    def count(self):
        return int(self.mask.sum())

    def dim(self):
        return self.count

    def complement(self):
        return SupportSet(*self.shape, ~self.mask)

    def union(self, other):
        if other.shape != self.shape:
            raise ValueError("shape mismatch")
        return SupportSet(*self.shape, self.mask | other.mask)

    def intersects(self, other):
        return bool(np.any(self.mask & other.mask))

    def project(self, x):
        x = self._check_shape(x)
        return np.where(self.mask, x, 0.0)


class TangentSpace(Subspace):
    """Matrices sharing the column space of U or the row space of V.

    U is m x r and V is n x r, both with orthonormal columns. The projector
    uses the closed form U U^T X + X V V^T - U U^T X V V^T, which costs
    O(mnr) per application instead of materializing an (m+n-r)r basis.
    """

    def __init__(self, U, V):
        U = np.asarray(U, dtype=float)
        V = np.asarray(V, dtype=float)
        if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[1]:
            raise ValueError("U and V must be 2-D with the same column count")
        r = U.shape[1]
        if r > 0:
            for name, B in (("U", U), ("V", V)):
                err = np.abs(B.T @ B - np.eye(r)).max()
                if err > _ORTHO_TOL:
                    raise ValueError(f"{name} is not column-orthonormal (err={err:.2e})")
        self.U = U.copy()
        self.V = V.copy()
        self.U.setflags(write=False)
        self.V.setflags(write=False)
        self.shape = (U.shape[0], V.shape[0])

    @classmethod
    def empty(cls, rows, cols):
        return cls(np.zeros((rows, 0)), np.zeros((cols, 0)))

    @property
    def r(self):
        return self.U.shape[1]

    def dim(self):
        m, n = self.shape
        return (m + n - self.r) * self.r

    def uv(self):
        """The product U V^T, the nuclear norm subgradient anchor."""
        return self.U @ self.V.T

    def project(self, x):
        x = self._check_shape(x)
        if self.r == 0:
            return np.zeros_like(x)
        utx = self.U.T @ x
        xv = x @ self.V
        return self.U @ utx + xv @ self.V.T - self.U @ ((utx @ self.V) @ self.V.T)


class SpanBasis(Subspace):
    """Span of an explicit orthonormal family G_1..G_p of m x n matrices."""

    def __init__(self, elements, shape=None):
        elements = [np.asarray(g, dtype=float) for g in elements]
        if elements:
            shape = elements[0].shape
            stack = np.stack(elements)
        else:
            if shape is None:
                raise ValueError("shape is required for an empty basis")
            stack = np.zeros((0,) + tuple(shape))
        p = stack.shape[0]
        if p > 0:
            flat = stack.reshape(p, -1)
            gram = flat @ flat.T
            err = np.abs(gram - np.eye(p)).max()
            if err > _ORTHO_TOL:
                raise ValueError(f"basis is not orthonormal (err={err:.2e})")
        self.shape = tuple(shape)
        self._stack = stack
        self._stack.setflags(write=False)

    @classmethod
    def empty(cls, rows, cols):
        return cls([], shape=(rows, cols))

    def __len__(self):
        return self._stack.shape[0]

    def __iter__(self):
        return iter(self._stack)

    def __getitem__(self, k):
        return self._stack[k]

    @property
    def elements(self):
        return list(self._stack)

    @property
    def stack(self):
        return self._stack

    def dim(self):
        return len(self)

    def coefficients(self, x):
        x = self._check_shape(x)
        return np.tensordot(self._stack, x, axes=([1, 2], [0, 1]))

    def project(self, x):
        x = self._check_shape(x)
        if len(self) == 0:
            return np.zeros_like(x)
        c = np.tensordot(self._stack, x, axes=([1, 2], [0, 1]))
        return np.tensordot(c, self._stack, axes=(0, 0))


class Complement(Subspace):
    """Orthogonal complement of another subspace."""

    def __init__(self, base):
        self.base = base
        self.shape = base.shape

    def dim(self):
        m, n = self.shape
        return m * n - self.base.dim()

    def complement(self):
        return self.base

    def project(self, x):
        x = self._check_shape(x)
        return x - self.base.project(x)


class DirectSum(Subspace):
    """Direct sum A + B of two subspaces with ||P_A P_B|| < 1.

    The projector is evaluated through the convergent expansion
        P_{A+B} = (I - P_A P_B)^{-1} P_A P_{B-perp}
                + (I - P_B P_A)^{-1} P_B P_{A-perp},
    with each resolvent applied as a truncated Neumann series (relative
    increment below 1e-12, at most 10,000 terms). Construction measures
    ||P_A P_B|| and refuses nearly intersecting pairs.
    """

    def __init__(self, a, b, iters=1000):
        if a.shape != b.shape:
            raise ValueError("summands must share a shape")
        alpha = op_norm_product(a, b, iters=iters)
        if alpha >= 1.0 - _DEGENERATE_MARGIN:
            raise DegenerateSum(
                f"||P_A P_B|| = {alpha:.9f} >= {1.0 - _DEGENERATE_MARGIN}; "
                "subspaces nearly intersect"
            )
        self.a = a
        self.b = b
        self.alpha = alpha
        self.shape = a.shape

    def dim(self):
        return self.a.dim() + self.b.dim()

    @staticmethod
    def _resolvent(first, second, rhs):
        # y = sum_k (P_first P_second)^k rhs
        y = rhs.copy()
        term = rhs
        for _ in range(_NEUMANN_CAP):
            term = first.project(second.project(term))
            y += term
            tn = np.linalg.norm(term)
            if tn <= _NEUMANN_RTOL * max(np.linalg.norm(y), 1e-300):
                return y
        warnings.warn("direct-sum Neumann series hit the iteration cap", RuntimeWarning)
        return y

    def project(self, x):
        x = self._check_shape(x)
        pa = self.a.project
        pb = self.b.project
        ya = self._resolvent(self.a, self.b, pa(x - pb(x)))
        yb = self._resolvent(self.b, self.a, pb(x - pa(x)))
        return ya + yb


def project_T(x, tangent):
    """Project onto a tangent space (closed form)."""
    return tangent.project(x)


def project_support(x, omega):
    """Keep the entries on the support, zero the rest."""
    return omega.project(x)


def project_span(x, basis):
    """Project onto the span of an orthonormal basis."""
    return basis.project(x)


def project_direct_sum(x, handle):
    """Project onto a direct sum handle."""
    if not isinstance(handle, DirectSum):
        raise TypeError("expected a DirectSum handle")
    return handle.project(x)


def op_norm_product(a, b, iters=1000, tol=1e-8, seed=0):
    """Estimate ||P_A P_B|| by power iteration on P_B P_A P_B.

    The start vector is drawn from a fixed-seed generator so repeated calls
    agree. The estimate never exceeds 1 + 1e-8. If the iteration budget runs
    out before the relative change drops below `tol`, the best estimate is
    returned with a warning.
    """
    if a.shape != b.shape:
        raise ValueError("subspaces must share a shape")
    rng = np.random.default_rng(seed)
    x = b.project(rng.standard_normal(a.shape))
    nx = np.linalg.norm(x)
    if nx == 0.0:
        return 0.0
    x /= nx
    val_prev = None
    val = 0.0
    for _ in range(iters):
        y = b.project(a.project(x))
        val = np.linalg.norm(y)
        if val <= 1e-300:
            return 0.0
        x = y / val
        if val_prev is not None and abs(val - val_prev) <= tol * max(val, 1e-300):
            return min(float(np.sqrt(val)), 1.0 + 1e-8)
        val_prev = val
    warnings.warn("op_norm_product power iteration did not converge", RuntimeWarning)
    return min(float(np.sqrt(val)), 1.0 + 1e-8)


def coherence_mu(tangent):
    """Smallest mu satisfying all three standard-basis incoherence bounds.

    The bounds are max_i ||U^T e_i||^2 <= mu r / m, max_j ||V^T e_j||^2 <=
    mu r / n and ||U V^T||_inf <= sqrt(mu r / (m n)); the maxima are evaluated
    exactly by looping rows and entries.
    """
    if tangent.r == 0:
        raise ValueError("coherence is undefined for a rank-0 tangent space")
    m, n = tangent.shape
    r = tangent.r
    row_u = float((tangent.U ** 2).sum(axis=1).max())
    row_v = float((tangent.V ** 2).sum(axis=1).max())
    uv_inf = float(np.abs(tangent.uv()).max())
    return max(m * row_u / r, n * row_v / r, m * n * uv_inf ** 2 / r)


def nu_coherence(basis):
    """n times the largest squared spectral norm over the basis elements.

    n is the column count, following the convention that matrices are m x n
    with n <= m.
    """
    if len(basis) == 0:
        raise ValueError("nu-coherence needs a nonempty basis")
    n = basis.shape[1]
    worst = max(spectral_norm(g) ** 2 for g in basis)
    return n * worst


def gamma_constrained(handle, mode="auto", samples=10_000, seed=0):
    """Largest squared Frobenius norm of a projected standard-basis matrix.

    Exact mode loops over all m*n standard-basis matrices; sampled mode
    checks `samples` uniformly random entries and therefore only reports a
    lower bound. "auto" is exact when m*n <= 250,000 and sampled above.
    """
    m, n = handle.shape
    if mode == "auto":
        mode = "exact" if m * n <= 250_000 else "sampled"
    if isinstance(handle, SpanBasis):
        if len(handle) == 0:
            return 0.0
        energy = (handle.stack ** 2).sum(axis=0)
        if mode == "exact":
            return float(energy.max())
        rng = np.random.default_rng(seed)
        ii = rng.integers(0, m, size=samples)
        jj = rng.integers(0, n, size=samples)
        return float(energy[ii, jj].max())
    if isinstance(handle, TangentSpace):
        # ||P_T e_i e_j^T||_F^2 = a_i + b_j - a_i b_j with leverage scores a, b
        if handle.r == 0:
            return 0.0
        a = (handle.U ** 2).sum(axis=1)
        b = (handle.V ** 2).sum(axis=1)
        grid = a[:, None] + b[None, :] - np.outer(a, b)
        if mode == "exact":
            return float(grid.max())
        rng = np.random.default_rng(seed)
        ii = rng.integers(0, m, size=samples)
        jj = rng.integers(0, n, size=samples)
        return float(grid[ii, jj].max())
    if mode == "exact":
        pairs = ((i, j) for i in range(m) for j in range(n))
    else:
        rng = np.random.default_rng(seed)
        pairs = zip(rng.integers(0, m, size=samples), rng.integers(0, n, size=samples))
    best = 0.0
    e = np.zeros((m, n))
    for i, j in pairs:
        e[i, j] = 1.0
        val = float(np.linalg.norm(handle.project(e)) ** 2)
        if val > best:
            best = val
        e[i, j] = 0.0
    return best


def check_direct_sum(a, b, iters=1000):
    """Report "independent" when ||P_A P_B|| < 1 - 1e-6, else "degenerate"."""
    alpha = op_norm_product(a, b, iters=iters)
    return "independent" if alpha < 1.0 - _DEGENERATE_MARGIN else "degenerate"
