"""Synthetic problem instances: incoherent low-rank ground truth, Bernoulli
sparse corruption with random signs, and measurement-reduction subspaces
under the random, nu-coherent, and Jacobian-span models.

All generators are pure functions of their parameters and an integer seed.
Randomness comes from numpy's PCG64 (`default_rng`); instances are therefore
bit-reproducible within one numpy/platform combination and statistically
reproducible elsewhere.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import formats
from .linalg import svd
from .subspaces import DegenerateSum, SpanBasis, SupportSet, TangentSpace, check_direct_sum

_GS_REL_TOL = 1e-12


def _subseed(seed, *tags):
    ss = np.random.SeedSequence([int(seed)] + [int(t) for t in tags])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class GenParams:
    """Grid of knobs for one synthetic instance.

    magnitude=None means "10 times the mean absolute entry of L0", resolved
    at assembly time. p=0 means no measurement reduction (plain PCP).
    """

    m: int
    n: int
    r: int
    rho: float
    p: int
    magnitude: float | None = None
    qmodel: str = "random"  # random | nu_coherent_smooth | from_jacobians

    def __post_init__(self):
        if self.m <= 0 or self.n <= 0 or self.n > self.m:
            raise ValueError("need 0 < n <= m")
        if not (0 <= self.r <= self.n):
            raise ValueError("need 0 <= r <= n")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError("need 0 <= rho < 1")
        free = self.m * self.n - (self.m + self.n - self.r) * self.r
        if not (0 <= self.p < max(free, 1)):
            raise ValueError(f"need 0 <= p < {free} to leave room for a direct sum")
        if self.magnitude is not None and self.magnitude <= 0:
            raise ValueError("magnitude must be positive")
        if self.qmodel not in ("random", "nu_coherent_smooth", "from_jacobians"):
            raise ValueError(f"unknown qmodel {self.qmodel!r}")


@dataclass
class ProblemInstance:
    """Ground truth plus observations for one synthetic problem."""

    L0: np.ndarray
    S0: np.ndarray
    omega: SupportSet
    qperp: SpanBasis
    D: np.ndarray
    seed: int
    params: GenParams
    tangent: TangentSpace
    magnitude: float
    direct_sum_checks: dict = field(default_factory=dict)


def gen_low_rank(m, n, r, seed):
    """Rank-r matrix with Gaussian-orthonormalized factors.

    U and V come from QR of standard Gaussian draws; the singular values are
    uniform in [1, 2], so the condition number never exceeds 2. Returns the
    matrix together with its tangent space.
    """
    if not (1 <= r <= n <= m):
        raise ValueError("need 1 <= r <= n <= m")
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((m, r)))
    v, _ = np.linalg.qr(rng.standard_normal((n, r)))
    sigma = np.sort(rng.uniform(1.0, 2.0, size=r))[::-1]
    low_rank = (u * sigma) @ v.T
    return low_rank, TangentSpace(u, v)


def gen_sparse(m, n, rho, magnitude, seed):
    """Bernoulli(rho) support with entries +-magnitude, signs fair coin."""
    if not (0.0 <= rho < 1.0):
        raise ValueError("need 0 <= rho < 1")
    if magnitude <= 0:
        raise ValueError("magnitude must be positive")
    rng = np.random.default_rng(seed)
    mask = rng.random((m, n)) < rho
    signs = rng.integers(0, 2, size=(m, n)) * 2 - 1
    sparse = np.where(mask, magnitude * signs, 0.0)
    return sparse, SupportSet(m, n, mask)


def _gram_schmidt(mats, rel_tol=_GS_REL_TOL):
    """Modified Gram-Schmidt in the trace inner product, with one
    re-orthogonalization pass. Raises ValueError naming the first dependent
    input."""
    basis = []
    for idx, a in enumerate(mats):
        v = np.asarray(a, dtype=float).copy()
        scale = np.linalg.norm(v)
        if scale == 0.0:
            raise ValueError(f"input {idx} is numerically dependent (zero matrix)")
        for _ in range(2):
            for g in basis:
                v -= np.vdot(g, v) * g
        nv = np.linalg.norm(v)
        if nv <= rel_tol * scale:
            raise ValueError(f"input {idx} is numerically dependent on its predecessors")
        basis.append(v / nv)
    return basis


def gen_random_qperp(m, n, p, seed):
    """Orthonormal basis of a uniformly random p-dimensional subspace.

    Draws p i.i.d. Gaussian matrices with entry variance 1/(m n) and
    orthonormalizes them by modified Gram-Schmidt. A numerically dependent
    draw is resampled with an incremented sub-seed, at most 3 retries.
    """
    if not (1 <= p < m * n):
        raise ValueError("need 1 <= p < m*n")
    last_error = None
    for attempt in range(4):
        rng = np.random.default_rng([int(seed), attempt])
        draws = [rng.standard_normal((m, n)) / np.sqrt(m * n) for _ in range(p)]
        try:
            return SpanBasis(_gram_schmidt(draws))
        except ValueError as exc:  # pragma: no cover - probability ~0
            last_error = exc
    raise ValueError(f"could not orthonormalize random draws: {last_error}")


def _dct_matrix(size):
    i = np.arange(size)
    c = np.cos(np.pi * (2 * i[:, None] + 1) * np.arange(size)[None, :] / (2 * size))
    c *= np.sqrt(2.0 / size)
    c[:, 0] = np.sqrt(1.0 / size)
    return c


def gen_nu_coherent_qperp(m, n, p, seed=0):
    """Deterministic nu-coherent basis built from discrete cosine profiles.

    Template k is C diag(d_k) / sqrt(n), where C holds the first n columns of
    the m x m orthonormal DCT-II matrix and d_k is the k-th cosine profile on
    [n]. The templates are exactly orthonormal in the trace inner product and
    each has spectral norm at most sqrt(2/n), so the measured nu-coherence is
    at most 2. Templates failing n * spectral^2 <= 4 would be dropped (none
    of these do; an all-ones template, for example, would fail with nu = n).

    The construction is deterministic; `seed` is accepted for signature
    uniformity with the random generator and ignored.
    """
    if not (1 <= p <= n <= m):
        raise ValueError("need 1 <= p <= n <= m")
    c = _dct_matrix(m)[:, :n]
    j = np.arange(n)
    templates = []
    k = 0
    while len(templates) < p and k < n:
        if k == 0:
            d = np.ones(n)
        else:
            d = np.sqrt(2.0) * np.cos(np.pi * k * (j + 0.5) / n)
        g = (c * d) / np.sqrt(n)
        if n * np.linalg.norm(g, 2) ** 2 <= 4.0:
            templates.append(g)
        k += 1
    if len(templates) < p:
        raise ValueError("not enough nu-coherent templates available")
    return SpanBasis(_gram_schmidt(templates))


def basis_from_jacobians(jacobians):
    """Orthonormalize a list of Jacobian matrices, preserving their span."""
    mats = [np.asarray(j, dtype=float) for j in jacobians]
    if not mats:
        raise ValueError("need at least one Jacobian")
    shape = mats[0].shape
    if any(a.shape != shape for a in mats):
        raise ValueError("Jacobians must share a shape")
    return SpanBasis(_gram_schmidt(mats))


def synthetic_image_jacobians(m, n, count, seed):
    """Translation and rotation Jacobians of a smooth synthetic image.

    Returns up to three matrices: the image gradients under x-translation,
    y-translation, and in-plane rotation about the image center.
    """
    if not (1 <= count <= 3):
        raise ValueError("count must be 1, 2 or 3")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:m, 0:n].astype(float)
    img = np.zeros((m, n))
    for _ in range(4):
        cy, cx = rng.uniform(0.2, 0.8) * m, rng.uniform(0.2, 0.8) * n
        w = rng.uniform(0.15, 0.35) * min(m, n)
        img += rng.uniform(0.5, 1.5) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * w**2))
    img += 0.3 * np.cos(np.pi * xx / n) * np.cos(np.pi * yy / m)
    gy, gx = np.gradient(img)
    xc = xx - (n - 1) / 2.0
    yc = yy - (m - 1) / 2.0
    jacobians = [gx, gy, yc * gx - xc * gy]
    return jacobians[:count]


def _make_qperp(params, seed):
    if params.p == 0:
        return SpanBasis.empty(params.m, params.n)
    if params.qmodel == "random":
        return gen_random_qperp(params.m, params.n, params.p, seed)
    if params.qmodel == "nu_coherent_smooth":
        return gen_nu_coherent_qperp(params.m, params.n, params.p, seed)
    if params.p > 3:
        raise ValueError("the from_jacobians model synthesizes at most 3 Jacobians")
    return basis_from_jacobians(
        synthetic_image_jacobians(params.m, params.n, params.p, seed)
    )


def assemble(params, seed):
    """Compose the generators into a full instance, D = L0 + S0.

    Verifies pairwise independence of (Q-perp, T), (Q-perp, Omega) and
    (T, Omega); a degenerate draw is regenerated with an incremented sub-seed
    at most 3 times before giving up.
    """
    if not isinstance(params, GenParams):
        params = GenParams(**params)
    last = None
    for attempt in range(4):
        if params.r >= 1:
            low_rank, tangent = gen_low_rank(
                params.m, params.n, params.r, _subseed(seed, 0, attempt)
            )
        else:
            low_rank = np.zeros((params.m, params.n))
            tangent = TangentSpace.empty(params.m, params.n)
        if params.magnitude is not None:
            magnitude = params.magnitude
        else:
            mean_abs = float(np.abs(low_rank).mean())
            magnitude = 10.0 * mean_abs if mean_abs > 0 else 1.0
        sparse, omega = gen_sparse(
            params.m, params.n, params.rho, magnitude, _subseed(seed, 1, attempt)
        )
        qperp = _make_qperp(params, _subseed(seed, 2, attempt))
        checks = {
            "qperp_tangent": check_direct_sum(qperp, tangent),
            "qperp_omega": check_direct_sum(qperp, omega),
            "tangent_omega": check_direct_sum(tangent, omega),
        }
        if all(v == "independent" for v in checks.values()):
            return ProblemInstance(
                L0=low_rank,
                S0=sparse,
                omega=omega,
                qperp=qperp,
                D=low_rank + sparse,
                seed=seed,
                params=params,
                tangent=tangent,
                magnitude=magnitude,
                direct_sum_checks=checks,
            )
        last = checks
    raise DegenerateSum(f"no independent draw after 3 retries: {last}")


def save_bundle(instance, path):
    """Write an instance as a bundle directory."""
    os.makedirs(path, exist_ok=True)
    p = instance.params
    formats.write_json(
        os.path.join(path, "params.json"),
        {
            "format": "CPCP-BUNDLE1",
            "m": p.m,
            "n": p.n,
            "r": p.r,
            "rho": p.rho,
            "p": p.p,
            "magnitude": instance.magnitude,
            "qmodel": p.qmodel,
            "seed": instance.seed,
            "direct_sum_checks": instance.direct_sum_checks,
        },
    )
    formats.write_dmat(os.path.join(path, "L0.dmat"), instance.L0)
    formats.write_dmat(os.path.join(path, "S0.dmat"), instance.S0)
    formats.write_dmat(os.path.join(path, "D.dmat"), instance.D)
    formats.write_support(os.path.join(path, "omega.supp"), instance.omega)
    formats.write_basis(os.path.join(path, "qperp.basis"), instance.qperp)


def load_bundle(path):
    """Read a bundle directory back into a ProblemInstance.

    The tangent space is recomputed from the stored L0 by SVD.
    """
    import json

    with open(os.path.join(path, "params.json"), "r", encoding="ascii") as f:
        meta = json.load(f)
    if meta.get("format") != "CPCP-BUNDLE1":
        raise ValueError(f"not a CPCP bundle: {path}")
    params = GenParams(
        m=meta["m"],
        n=meta["n"],
        r=meta["r"],
        rho=meta["rho"],
        p=meta["p"],
        magnitude=meta["magnitude"],
        qmodel=meta["qmodel"],
    )
    low_rank = formats.read_dmat(os.path.join(path, "L0.dmat"))
    sparse = formats.read_dmat(os.path.join(path, "S0.dmat"))
    observed = formats.read_dmat(os.path.join(path, "D.dmat"))
    omega = formats.read_support(os.path.join(path, "omega.supp"))
    qperp_path = os.path.join(path, "qperp.basis")
    if os.path.exists(qperp_path) and params.p > 0:
        qperp = formats.read_basis(qperp_path)
    else:
        qperp = SpanBasis.empty(params.m, params.n)
    factors = svd(low_rank)
    tangent = TangentSpace(factors.U, factors.V)
    return ProblemInstance(
        L0=low_rank,
        S0=sparse,
        omega=omega,
        qperp=qperp,
        D=observed,
        seed=meta["seed"],
        params=params,
        tangent=tangent,
        magnitude=meta["magnitude"],
        direct_sum_checks=dict(meta.get("direct_sum_checks", {})),
    )
