"""Dual certificate machinery for the subspace-constrained recovery program.

A certificate W = W_L + W_S + W_Q witnesses optimality of the ground truth:
W_L comes from a golfing scheme over independent support batches, W_S is the
least-norm matrix matching lam * sgn(S0) on the support while staying inside
Gamma = Q intersect T-perp, and W_Q is the least-norm correction cancelling
the Q-perp component of U V^T while staying orthogonal to Pi = Omega + T.
The verifier measures every optimality condition numerically and reports
pass/fail per condition.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .linalg import norm
from .subspaces import (
    DegenerateSum,
    DirectSum,
    SpanBasis,
    SupportSet,
    TangentSpace,
    check_direct_sum,
    op_norm_product,
)

_SERIES_CAP = 10_000
_PREMISE_MARGIN = 1e-6


class PremiseViolation(Exception):
    """A projector-product norm is too large for a construction to converge."""

    def __init__(self, description, measured, limit):
        super().__init__(f"{description}: measured {measured:.9f} >= limit {limit}")
        self.description = description
        self.measured = measured
        self.limit = limit


@dataclass
class GolfingSchedule:
    """Batches Omega_1..Omega_j0 of Bernoulli(q) supports inside Omega^c.

    j0 = ceil(2 log m) and q solves rho = (1 - q)^j0. In "cogenerate" mode
    the batches are drawn first and Omega is the complement of their union,
    which reproduces the intended coupling exactly; "retrofit" samples
    batches inside the complement of a given Omega and is only approximate
    in distribution.
    """

    j0: int
    q: float
    batches: list
    omega: SupportSet
    mode: str


def golfing_depth(m):
    return int(math.ceil(2.0 * math.log(m)))


def build_schedule(omega, rho, m, seed, mode="retrofit"):
    """Build a golfing schedule for sparsity rate rho on omega's grid.

    `m` sets the depth j0 = ceil(2 log m) (use the larger matrix dimension).
    In cogenerate mode the passed omega only fixes the grid shape and the
    returned schedule carries a freshly drawn coupled support.
    """
    if not (0.0 < rho < 1.0):
        raise ValueError("need 0 < rho < 1")
    if mode not in ("retrofit", "cogenerate"):
        raise ValueError(f"unknown mode {mode!r}")
    rows, cols = omega.shape
    j0 = golfing_depth(m)
    q = 1.0 - rho ** (1.0 / j0)
    rng = np.random.default_rng(seed)
    if mode == "cogenerate":
        draws = rng.random((j0, rows, cols)) < q
        batches = [SupportSet(rows, cols, draws[j]) for j in range(j0)]
        union = np.any(draws, axis=0)
        omega_out = SupportSet(rows, cols, ~union)
    else:
        comp = ~omega.mask
        batches = [
            SupportSet(rows, cols, (rng.random((rows, cols)) < q) & comp)
            for _ in range(j0)
        ]
        omega_out = omega
    return GolfingSchedule(j0=j0, q=q, batches=batches, omega=omega_out, mode=mode)


def _gamma_perp(tangent, qperp):
    return DirectSum(qperp, tangent)


def construct_WL(tangent, omega, schedule, qperp):
    """Golfing construction of the low-rank certificate component.

    Starting from Y_0 = 0, each step adds q^{-1} P_{Omega_j} Z_{j-1} where
    Z_j = U V^T - P_{Gamma-perp} Y_j, and the result is the Gamma component
    of Y_j0. Returns (W_L, trace) where trace lists (||Z_j||_F, ||Z_j||_inf)
    for j = 0..j0.
    """
    for batch in schedule.batches:
        if batch.intersects(omega):
            raise ValueError("schedule batches must avoid the support")
    gperp = _gamma_perp(tangent, qperp)
    uv = tangent.uv()
    y = np.zeros(tangent.shape)
    z = uv.copy()
    trace = [(float(np.linalg.norm(z)), float(np.abs(z).max() if z.size else 0.0))]
    for batch in schedule.batches:
        y = y + batch.project(z) / schedule.q
        z = uv - gperp.project(y)
        trace.append((float(np.linalg.norm(z)), float(np.abs(z).max())))
    wl = y - gperp.project(y)
    return wl, trace


def _neumann_sum(apply_op, rhs, stop_norm):
    """sum_k M^k rhs, truncated when a term drops below stop_norm."""
    acc = rhs.copy()
    term = rhs
    for _ in range(_SERIES_CAP):
        term = apply_op(term)
        acc += term
        if np.linalg.norm(term) <= stop_norm:
            return acc, True
    return acc, False


def _cg_solve(apply_op, rhs, x0, rtol):
    """Solve (I - M) x = rhs with M = apply_op, via conjugate gradients."""
    shape = rhs.shape

    def matvec(v):
        x = v.reshape(shape)
        return (x - apply_op(x)).ravel()

    op = scipy.sparse.linalg.LinearOperator(
        (rhs.size, rhs.size), matvec=matvec, dtype=float
    )
    x, info = scipy.sparse.linalg.cg(op, rhs.ravel(), x0=x0.ravel(), rtol=rtol, atol=0.0)
    if info != 0:
        warnings.warn(f"certificate CG refinement stopped with info={info}", RuntimeWarning)
    return x.reshape(shape)


def construct_WS(s0_sign, omega, tangent, qperp, lam, tol=1e-9):
    """Least-norm component matching lam * sgn(S0) on the support.

    Evaluates the convergent series
        W_S = lam (I - P_{Gamma-perp}) P_Omega
              sum_k (P_Omega P_{Gamma-perp} P_Omega)^k [sgn(S0)],
    truncated once a term drops below tol * lam; if the series has not
    converged after the term cap, a matrix-free conjugate-gradient pass
    finishes the solve.
    """
    gperp = _gamma_perp(tangent, qperp)
    alpha = op_norm_product(omega, gperp)
    if alpha >= 1.0 - _PREMISE_MARGIN:
        raise PremiseViolation("||P_Omega P_GammaPerp||", alpha, 1.0 - _PREMISE_MARGIN)
    signs = omega.project(np.sign(s0_sign))
    rhs = lam * signs

    def step(x):
        return omega.project(gperp.project(x))

    acc, converged = _neumann_sum(step, rhs, stop_norm=tol * lam)
    if not converged:
        acc = omega.project(_cg_solve(step, rhs, acc, rtol=0.1 * tol))
    return acc - gperp.project(acc)


def construct_WQ(tangent, omega, qperp, tol=1e-9):
    """Least-norm component cancelling the Q-perp part of U V^T.

    Evaluates
        W_Q = P_{Pi-perp} sum_k (P_QPerp P_Pi P_QPerp)^k (P_QPerp(-U V^T)),
    with Pi = Omega + T, truncated like construct_WS.
    """
    uv = tangent.uv()
    shape = tangent.shape
    if len(qperp) == 0 or tangent.r == 0:
        return np.zeros(shape)
    pi = DirectSum(omega, tangent)
    alpha = op_norm_product(qperp, pi)
    if alpha >= 1.0 - _PREMISE_MARGIN:
        raise PremiseViolation("||P_QPerp P_Pi||", alpha, 1.0 - _PREMISE_MARGIN)
    rhs = -qperp.project(uv)

    def step(x):
        return qperp.project(pi.project(x))

    stop = 0.5 * tol * max(np.linalg.norm(uv), 1e-300)
    acc, converged = _neumann_sum(step, rhs, stop_norm=stop)
    if not converged:
        acc = qperp.project(_cg_solve(step, rhs, acc, rtol=0.1 * tol))
    return acc - pi.project(acc)


@dataclass
class CertificateReport:
    """Measured optimality conditions for a candidate certificate.

    The verdict is true iff the dual-feasibility equalities hold to eq_tol,
    ||W|| < 1/2, the support residual is within lam/4, the off-support
    infinity norm is below lam/2, ||P_Omega P_GammaPerp|| < 1/2 and lam < 1.
    Per-component spectral and infinity norms are recorded against their
    individual targets for diagnostics but do not enter the verdict.
    """

    lam: float
    eq_tol: float
    cond_T: float
    cond_Qperp: float
    cond_spectral: float
    cond_omega: float
    cond_inf: float
    premise_PO_Gperp: float
    verdict: bool
    wl_spectral: float
    ws_spectral: float
    ws_inf_off_support: float
    wq_spectral: float
    wq_inf_off_support: float
    WL: np.ndarray = field(repr=False, default=None)
    WS: np.ndarray = field(repr=False, default=None)
    WQ: np.ndarray = field(repr=False, default=None)
    W: np.ndarray = field(repr=False, default=None)

    def thresholds(self):
        return {
            "cond_T": self.eq_tol,
            "cond_Qperp": self.eq_tol,
            "cond_spectral": 0.5,
            "cond_omega": self.lam / 4.0,
            "cond_inf": self.lam / 2.0,
            "premise_PO_Gperp": 0.5,
            "wl_spectral": 0.25,
            "ws_spectral": 0.125,
            "ws_inf_off_support": self.lam / 8.0,
            "wq_spectral": 0.125,
            "wq_inf_off_support": self.lam / 8.0,
        }

    def to_dict(self):
        thr = self.thresholds()
        measured = {
            "cond_T": self.cond_T,
            "cond_Qperp": self.cond_Qperp,
            "cond_spectral": self.cond_spectral,
            "cond_omega": self.cond_omega,
            "cond_inf": self.cond_inf,
            "premise_PO_Gperp": self.premise_PO_Gperp,
            "wl_spectral": self.wl_spectral,
            "ws_spectral": self.ws_spectral,
            "ws_inf_off_support": self.ws_inf_off_support,
            "wq_spectral": self.wq_spectral,
            "wq_inf_off_support": self.wq_inf_off_support,
        }
        return {
            "lam": self.lam,
            "eq_tol": self.eq_tol,
            "verdict": self.verdict,
            "measured": measured,
            "thresholds": thr,
        }


def verify(wl, ws, wq, tangent, omega, s0_sign, qperp, lam, eq_tol=1e-6):
    """Measure every certificate condition; always returns a report."""
    w = wl + ws + wq
    uv = tangent.uv()
    signs = omega.project(np.sign(s0_sign))
    comp = omega.complement()

    cond_t = float(np.linalg.norm(tangent.project(w)))
    cond_qp = float(np.linalg.norm(qperp.project(w) + qperp.project(uv)))
    cond_spec = norm(w, "spectral")
    cond_omega = float(np.linalg.norm(omega.project(uv - lam * signs + w)))
    cond_inf = float(np.abs(comp.project(uv + w)).max())
    try:
        gperp = _gamma_perp(tangent, qperp)
        premise = op_norm_product(omega, gperp)
    except DegenerateSum:
        premise = 1.0

    verdict = (
        cond_t <= eq_tol * max(1.0, float(np.linalg.norm(w)))
        and cond_qp <= eq_tol * max(1.0, float(np.linalg.norm(uv)))
        and cond_spec < 0.5
        and cond_omega <= lam / 4.0
        and cond_inf < lam / 2.0
        and premise < 0.5
        and lam < 1.0
    )
    return CertificateReport(
        lam=lam,
        eq_tol=eq_tol,
        cond_T=cond_t,
        cond_Qperp=cond_qp,
        cond_spectral=cond_spec,
        cond_omega=cond_omega,
        cond_inf=cond_inf,
        premise_PO_Gperp=premise,
        verdict=bool(verdict),
        wl_spectral=norm(wl, "spectral"),
        ws_spectral=norm(ws, "spectral"),
        ws_inf_off_support=float(np.abs(comp.project(ws)).max()),
        wq_spectral=norm(wq, "spectral"),
        wq_inf_off_support=float(np.abs(comp.project(wq)).max()),
        WL=wl,
        WS=ws,
        WQ=wq,
        W=w,
    )


@dataclass
class PremiseReport:
    """Projector-product norms and independence verdicts for an instance."""

    norm_omega_gperp: float
    norm_qperp_tangent: float
    norm_qperp_omega: float
    norm_omega_tangent: float
    indep_qperp_tangent: str
    indep_qperp_omega: str
    indep_tangent_omega: str

    def to_dict(self):
        return {
            "norm_omega_gperp": self.norm_omega_gperp,
            "norm_qperp_tangent": self.norm_qperp_tangent,
            "norm_qperp_omega": self.norm_qperp_omega,
            "norm_omega_tangent": self.norm_omega_tangent,
            "indep_qperp_tangent": self.indep_qperp_tangent,
            "indep_qperp_omega": self.indep_qperp_omega,
            "indep_tangent_omega": self.indep_tangent_omega,
        }


def check_premises(tangent, omega, qperp):
    """Report the projector-product norms behind the certificate premises."""
    try:
        gperp = _gamma_perp(tangent, qperp)
        n_og = op_norm_product(omega, gperp)
    except DegenerateSum:
        n_og = 1.0
    return PremiseReport(
        norm_omega_gperp=n_og,
        norm_qperp_tangent=op_norm_product(qperp, tangent),
        norm_qperp_omega=op_norm_product(qperp, omega),
        norm_omega_tangent=op_norm_product(omega, tangent),
        indep_qperp_tangent=check_direct_sum(qperp, tangent),
        indep_qperp_omega=check_direct_sum(qperp, omega),
        indep_tangent_omega=check_direct_sum(tangent, omega),
    )


def certify_instance(instance, lam=None, mode="retrofit", seed=0, tol=1e-9):
    """Build and verify a full certificate for a generated instance.

    Uses the instance's own support (retrofit) by default; cogenerate mode
    redraws a coupled support and sign pattern, which matches the schedule's
    intended distribution but certifies a resampled S0.
    """
    if lam is None:
        lam = 1.0 / math.sqrt(max(instance.params.m, instance.params.n))
    schedule = build_schedule(
        instance.omega, max(instance.params.rho, 1e-9), instance.params.m, seed, mode=mode
    )
    omega = schedule.omega
    if mode == "cogenerate":
        rng = np.random.default_rng([int(seed), 1])
        signs = np.where(rng.random(omega.shape) < 0.5, -1.0, 1.0)
        s0_sign = omega.project(signs)
    else:
        s0_sign = omega.project(np.sign(instance.S0))
    wl, trace = construct_WL(instance.tangent, omega, schedule, instance.qperp)
    ws = construct_WS(s0_sign, omega, instance.tangent, instance.qperp, lam, tol=tol)
    wq = construct_WQ(instance.tangent, omega, instance.qperp, tol=tol)
    report = verify(wl, ws, wq, instance.tangent, omega, s0_sign, instance.qperp, lam)
    return report, schedule, trace
