"""Convex recovery of a low-rank plus sparse decomposition from observations
projected onto a measurement subspace Q:

    minimize  ||L||_* + lam * ||S||_1   subject to  P_Q(D) = P_Q(L + S).

The main solver is an inexact augmented Lagrangian with alternating proximal
steps (singular value thresholding for L, entrywise shrinkage for S) and a
multiplier restricted to Q. Q is never materialized: with Q-perp given by an
orthonormal basis, P_Q X = X - P_{Q-perp} X, and the empty basis recovers
plain principal component pursuit. A slow, independent penalized
proximal-gradient oracle is provided for desk-scale cross-checks.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, norm, soft_threshold, spectral_norm, svt
from .subspaces import SpanBasis

# With a high penalty cap the prox steps freeze before the dual settles and
# the iterates stall at feasible but suboptimal points (measured: relative
# objective gaps of 1e-3 at cap 1e4 on unstructured data, 1e-9 at cap <= 1e2,
# with identical recovery behavior in the exact-recovery regime).
_MU_CAP_FACTOR = 50.0
_DIVERGE_FACTOR = 10.0
_DIVERGE_PATIENCE = 50


@dataclass
class SolverOptions:
    """Knobs for solve_cpcp / solve_pcp.

    lam=None defaults to 1/sqrt(max(m, n)). penalty_mu0=None defaults to
    1.25 / ||P_Q D||; the penalty grows by penalty_growth each iteration and
    is capped at 50 times its initial value, after which the fixed-penalty
    phase contracts to the optimum. Convergence requires both the relative
    projected residual and the relative iterate change to drop below
    tol_primal.
    """

    lam: float | None = None
    penalty_mu0: float | None = None
    penalty_growth: float = 1.5
    tol_primal: float = 1e-7
    max_iters: int = 1000
    record_trace: bool = False

    def __post_init__(self):
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.penalty_mu0 is not None and self.penalty_mu0 <= 0:
            raise ValueError("penalty_mu0 must be positive")
        if self.penalty_growth < 1.0:
            raise ValueError("penalty_growth must be >= 1")
        if self.tol_primal <= 0:
            raise ValueError("tol_primal must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class SolverResult:
    L_hat: np.ndarray
    S_hat: np.ndarray
    status: str  # converged | max_iters | diverged
    iters: int
    objective: float
    lam: float
    primal_residual: float
    trace: list = field(default_factory=list)  # (iter, primal_residual, objective)


def default_lambda(shape):
    return 1.0 / np.sqrt(max(shape))


def solve_cpcp(d, qperp=None, opts=None):
    """Solve the subspace-constrained program for observations d.

    Only P_Q d enters the iteration; any component of d inside Q-perp is
    discarded up front, so adding an element of Q-perp to d cannot change
    the result.
    """
    d = as_matrix(d, "D")
    if opts is None:
        opts = SolverOptions()
    if qperp is None:
        qperp = SpanBasis.empty(*d.shape)
    if qperp.shape != d.shape:
        raise ValueError(f"basis shape {qperp.shape} != data shape {d.shape}")
    lam = opts.lam if opts.lam is not None else default_lambda(d.shape)

    reduced = len(qperp) > 0
    pqp = qperp.project if reduced else (lambda x: np.zeros_like(x))
    dq = d - pqp(d)  # the solver sees only this
    dq_fro = np.linalg.norm(dq)
    dq_spec = spectral_norm(dq)
    mu = opts.penalty_mu0 if opts.penalty_mu0 is not None else 1.25 / max(dq_spec, 1e-12)
    mu_cap = _MU_CAP_FACTOR * mu

    L = np.zeros_like(d)
    S = np.zeros_like(d)
    Y = np.zeros_like(d)
    trace = []
    status = "max_iters"
    res = np.inf
    init_res = None
    grow_streak = 0
    best = (np.inf, L, S, 0)
    it = 0
    for it in range(1, opts.max_iters + 1):
        # fill the unobserved component of D with the current estimate
        d_fill = dq + pqp(L + S)
        L_new = svt(d_fill - S + Y / mu, 1.0 / mu)
        if reduced:
            d_fill = dq + pqp(L_new + S)
        S_new = soft_threshold(d_fill - L_new + Y / mu, lam / mu)

        rq = d - L_new - S_new
        if reduced:
            rq = rq - pqp(rq)
        Y = Y + mu * rq

        res = np.linalg.norm(rq) / max(1.0, dq_fro)
        change = (
            np.linalg.norm(L_new - L) + np.linalg.norm(S_new - S)
        ) / max(1.0, np.linalg.norm(L) + np.linalg.norm(S))
        L, S = L_new, S_new

        if opts.record_trace:
            trace.append((it, res, norm(L, "nuclear") + lam * norm(S, "l1")))
        if res < best[0]:
            best = (res, L, S, it)
        if res <= opts.tol_primal and change <= opts.tol_primal:
            status = "converged"
            break
        if init_res is None:
            init_res = max(res, 1e-300)
        elif res > _DIVERGE_FACTOR * init_res:
            grow_streak += 1
            if grow_streak >= _DIVERGE_PATIENCE:
                status = "diverged"
                res, L, S, it = best
                break
        else:
            grow_streak = 0
        mu = min(mu * opts.penalty_growth, mu_cap)

    objective = norm(L, "nuclear") + lam * norm(S, "l1")
    return SolverResult(
        L_hat=L,
        S_hat=S,
        status=status,
        iters=it,
        objective=objective,
        lam=lam,
        primal_residual=res,
        trace=trace,
    )


def solve_pcp(d, opts=None):
    """Principal component pursuit: the p = 0 special case, same code path."""
    d = as_matrix(d, "D")
    return solve_cpcp(d, SpanBasis.empty(*d.shape), opts)


def oracle_solve(d, qperp=None, lam=None, tol=1e-7):
    """Independent desk-scale solver for cross-checking solve_cpcp.

    Minimizes the penalized objective
        ||L||_* + lam ||S||_1 + (beta/2) ||P_Q(D - L - S)||_F^2
    by accelerated proximal gradient, sweeping beta upward until the
    projected residual is within tolerance and the objective has stabilized.
    Deliberately shares no iteration logic with solve_cpcp. Sizes are capped
    at m*n <= 400.

    Returns (L, S, objective).
    """
    d = as_matrix(d, "D")
    m, n = d.shape
    if m * n > 400:
        raise ValueError("oracle_solve is desk-scale only (m*n <= 400)")
    if qperp is None:
        qperp = SpanBasis.empty(m, n)
    if lam is None:
        lam = default_lambda(d.shape)
    if lam <= 0 or tol <= 0:
        raise ValueError("lam and tol must be positive")

    reduced = len(qperp) > 0
    pqp = qperp.project if reduced else (lambda x: np.zeros_like(x))
    dq = d - pqp(d)
    dq_fro = max(np.linalg.norm(dq), 1e-12)

    def feasibility(L, S):
        r = d - L - S
        if reduced:
            r = r - pqp(r)
        return np.linalg.norm(r) / max(1.0, dq_fro)

    def objective(L, S):
        return norm(L, "nuclear") + lam * norm(S, "l1")

    L = np.zeros_like(d)
    S = np.zeros_like(d)
    beta = 1.0 / max(spectral_norm(dq), 1e-12)
    prev_obj = None
    for _stage in range(20):
        step = 1.0 / (2.0 * beta)  # gradient of the coupling has Lipschitz 2*beta
        tL, tS, t = L, S, 1.0
        pen_prev = np.inf
        for _k in range(8000):
            g = d - tL - tS
            if reduced:
                g = g - pqp(g)
            L_new = svt(tL + 0.5 * g, step)
            S_new = soft_threshold(tS + 0.5 * g, step * lam)
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            w = (t - 1.0) / t_new
            tL = L_new + w * (L_new - L)
            tS = S_new + w * (S_new - S)
            change = (
                np.linalg.norm(L_new - L) + np.linalg.norm(S_new - S)
            ) / max(1.0, np.linalg.norm(L) + np.linalg.norm(S))
            L, S, t = L_new, S_new, t_new
            r = d - L - S
            if reduced:
                r = r - pqp(r)
            pen = objective(L, S) + 0.5 * beta * np.linalg.norm(r) ** 2
            if pen > pen_prev:  # restart the momentum on any increase
                tL, tS, t = L, S, 1.0
            pen_prev = pen
            if change <= 1e-13:
                break
        obj = objective(L, S)
        if (
            feasibility(L, S) <= tol
            and prev_obj is not None
            and abs(obj - prev_obj) <= 1e-8 * max(1.0, abs(obj))
        ):
            break
        prev_obj = obj
        beta *= 10.0
    return L, S, objective(L, S)
