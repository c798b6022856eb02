"""Experiment harness: phase-transition grids over (m, n, r, rho, p) and
empirical validation of the subspace inequality lemmas.

Grids dispatch independent deterministic work items to a bounded thread
pool; per-cell trial seeds are base XOR cell-index XOR trial-index, so
scheduling order cannot change any result. Lemma checks with explicit
constants are tested as written; checks whose constants are unnamed in the
analysis are tested in qualitative form (contraction factor below one, or a
bounded implied constant).
"""

import concurrent.futures
import csv
import itertools
import math
import os
import time
import warnings
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.linalg

from .generate import (
    GenParams,
    assemble,
    gen_low_rank,
    gen_nu_coherent_qperp,
    gen_random_qperp,
    gen_sparse,
)
from .solver import SolverOptions, solve_cpcp
from .subspaces import (
    Complement,
    DirectSum,
    SpanBasis,
    SupportSet,
    TangentSpace,
    coherence_mu,
    nu_coherence,
    op_norm_product,
)

ALL_LEMMAS = (
    "lemma4", "lemma5", "lemma6", "lemma7", "lemma8",
    "lemma9", "lemma10", "lemma11", "cor1", "lemma12",
)

MAJORITY_THRESHOLD = 0.8
_SLACK = 1e-9  # relative slack absorbing rounding in deterministic inequalities


@dataclass
class ExperimentConfig:
    """Flat configuration for grids and lemma validation.

    List-valued axes define the grid as their cartesian product in the
    order (m, n, r, rho, p). See parse_config for the file format.
    """

    m: list = field(default_factory=lambda: [60])
    n: list = field(default_factory=lambda: [60])
    r: list = field(default_factory=lambda: [2])
    rho: list = field(default_factory=lambda: [0.05])
    p: list = field(default_factory=lambda: [3])
    trials: int = 1
    seed: int = 0
    success_threshold: float = 1e-3
    qmodel: str = "random"
    magnitude: float | None = None
    lam: float | None = None
    tol_primal: float = 1e-7
    max_iters: int = 1000
    lemmas: list = field(default_factory=lambda: list(ALL_LEMMAS))
    lemma_seeds: int = 20
    det_trials: int = 200
    rate_high: float = 0.75  # sampling rate for the contraction-form checks

    def __post_init__(self):
        for axis in ("m", "n", "r", "rho", "p"):
            if not getattr(self, axis):
                raise ValueError(f"grid axis {axis} is empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.success_threshold <= 0:
            raise ValueError("success_threshold must be positive")
        unknown = set(self.lemmas) - set(ALL_LEMMAS)
        if unknown:
            raise ValueError(f"unknown lemma selection: {sorted(unknown)}")

    def solver_options(self, record_trace=False):
        return SolverOptions(
            lam=self.lam,
            tol_primal=self.tol_primal,
            max_iters=self.max_iters,
            record_trace=record_trace,
        )

    def cells(self):
        return [
            {"m": m, "n": n, "r": r, "rho": rho, "p": p}
            for m, n, r, rho, p in itertools.product(
                self.m, self.n, self.r, self.rho, self.p
            )
        ]

    def to_flat(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                out[f.name] = ",".join(str(x) for x in v)
            elif v is None:
                out[f.name] = "auto"
            else:
                out[f.name] = str(v)
        return out


_INT_LIST = ("m", "n", "r", "p")
_FLOAT_LIST = ("rho",)
_INT_KEYS = ("trials", "seed", "max_iters", "lemma_seeds", "det_trials")
_FLOAT_KEYS = ("success_threshold", "tol_primal", "rate_high")
_OPT_FLOAT_KEYS = ("magnitude", "lam")
_STR_KEYS = ("qmodel",)
_STR_LIST = ("lemmas",)


def config_from_mapping(mapping):
    """Build an ExperimentConfig from string key/value pairs."""
    kwargs = {}
    for key, raw in mapping.items():
        raw = raw.strip()
        if key in _INT_LIST:
            kwargs[key] = [int(x) for x in raw.split(",") if x.strip()]
        elif key in _FLOAT_LIST:
            kwargs[key] = [float(x) for x in raw.split(",") if x.strip()]
        elif key in _INT_KEYS:
            kwargs[key] = int(raw)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(raw)
        elif key in _OPT_FLOAT_KEYS:
            kwargs[key] = None if raw in ("auto", "none", "") else float(raw)
        elif key in _STR_KEYS:
            kwargs[key] = raw
        elif key in _STR_LIST:
            kwargs[key] = [x.strip() for x in raw.split(",") if x.strip()]
        else:
            raise ValueError(f"unknown config key {key!r}")
    return ExperimentConfig(**kwargs)


def parse_config(path):
    """Read a flat `key = value` config file; '#' starts a comment."""
    mapping = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            mapping[key.strip()] = value.strip()
    return config_from_mapping(mapping)


def write_resolved_config(path, cfg):
    with open(path, "w", encoding="utf-8") as f:
        for key, value in cfg.to_flat().items():
            f.write(f"{key} = {value}\n")


def trial_seed(base, cell_index, trial_index):
    return int(base) ^ int(cell_index) ^ int(trial_index)


def relative_error(estimate, truth):
    denom = np.linalg.norm(truth)
    if denom == 0.0:
        return float(np.linalg.norm(estimate))
    return float(np.linalg.norm(estimate - truth) / denom)


@dataclass
class GridCellResult:
    m: int
    n: int
    r: int
    rho: float
    p: int
    trials: int
    successes: int
    med_rel_err_L: float
    med_rel_err_S: float
    med_iters: float
    wall_ms: float
    errors: int = 0


def run_cell(cfg, cell, cell_index):
    """Run all trials of one grid cell; failures are counted, not raised."""
    t0 = time.perf_counter()
    errs_l, errs_s, iters = [], [], []
    successes = 0
    failures = 0
    opts = cfg.solver_options()
    for trial in range(cfg.trials):
        seed = trial_seed(cfg.seed, cell_index, trial)
        try:
            params = GenParams(
                m=cell["m"], n=cell["n"], r=cell["r"], rho=cell["rho"], p=cell["p"],
                magnitude=cfg.magnitude, qmodel=cfg.qmodel,
            )
            inst = assemble(params, seed)
            result = solve_cpcp(inst.D, inst.qperp, opts)
            rel_l = relative_error(result.L_hat, inst.L0)
            rel_s = relative_error(result.S_hat, inst.S0)
            errs_l.append(rel_l)
            errs_s.append(rel_s)
            iters.append(result.iters)
            if rel_l <= cfg.success_threshold:
                successes += 1
        except Exception as exc:  # recorded, grid continues
            failures += 1
            warnings.warn(f"cell {cell_index} trial {trial} failed: {exc}", RuntimeWarning)
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return GridCellResult(
        m=cell["m"], n=cell["n"], r=cell["r"], rho=cell["rho"], p=cell["p"],
        trials=cfg.trials, successes=successes,
        med_rel_err_L=float(np.median(errs_l)) if errs_l else float("nan"),
        med_rel_err_S=float(np.median(errs_s)) if errs_s else float("nan"),
        med_iters=float(np.median(iters)) if iters else float("nan"),
        wall_ms=wall_ms, errors=failures,
    )


def run_phase_grid(cfg, threads=None):
    """Run every cell concurrently; results come back in cell order."""
    cells = cfg.cells()
    workers = threads or os.cpu_count() or 1
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_cell, cfg, cell, i) for i, cell in enumerate(cells)]
        return [f.result() for f in futures]


GRID_CSV_COLUMNS = (
    "m", "n", "r", "rho", "p", "trials", "successes",
    "med_rel_err_L", "med_rel_err_S", "med_iters", "wall_ms",
)


def write_grid_csv(path, results):
    with open(path, "w", newline="", encoding="ascii") as f:
        writer = csv.writer(f)
        writer.writerow(GRID_CSV_COLUMNS)
        for res in results:
            writer.writerow([getattr(res, c) for c in GRID_CSV_COLUMNS])


# --- lemma validation -------------------------------------------------------

def orthonormal_basis_matrix(handle):
    """Dense mn x dim orthonormal basis of a subspace handle (small sizes)."""
    m, n = handle.shape
    if isinstance(handle, SupportSet):
        idx = np.flatnonzero(handle.mask.ravel())
        basis = np.zeros((m * n, idx.size))
        basis[idx, np.arange(idx.size)] = 1.0
        return basis
    if isinstance(handle, SpanBasis):
        return handle.stack.reshape(len(handle), -1).T.copy()
    if isinstance(handle, TangentSpace):
        if handle.r == 0:
            return np.zeros((m * n, 0))
        span = []
        for k in range(handle.r):
            for j in range(n):
                g = np.zeros((m, n))
                g[:, j] = handle.U[:, k]
                span.append(g.ravel())
            for i in range(m):
                g = np.zeros((m, n))
                g[i, :] = handle.V[:, k]
                span.append(g.ravel())
        return scipy.linalg.orth(np.array(span).T, rcond=1e-10)
    if isinstance(handle, DirectSum):
        ba = orthonormal_basis_matrix(handle.a)
        bb = orthonormal_basis_matrix(handle.b)
        return scipy.linalg.orth(np.hstack([ba, bb]), rcond=1e-10)
    if isinstance(handle, Complement):
        bb = orthonormal_basis_matrix(handle.base)
        q, _ = np.linalg.qr(np.hstack([bb, np.eye(m * n)]))
        return q[:, bb.shape[1]:m * n]
    raise TypeError(f"no dense basis for {type(handle)!r}")


def exact_product_norm(a, b):
    """||P_A P_B|| via the SVD of the cross-Gram of dense bases."""
    ba = orthonormal_basis_matrix(a)
    bb = orthonormal_basis_matrix(b)
    if ba.shape[1] == 0 or bb.shape[1] == 0:
        return 0.0
    return float(np.linalg.svd(ba.T @ bb, compute_uv=False)[0])


def _symmetric_op_norm(apply_op, shape, iters=300, tol=1e-9, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    prev = None
    val = 0.0
    for _ in range(iters):
        y = apply_op(x)
        val = np.linalg.norm(y)
        if val <= 1e-300:
            return 0.0
        x = y / val
        if prev is not None and abs(val - prev) <= tol * max(val, 1e-300):
            break
        prev = val
    return float(val)


def _random_subspace(kind, m, n, rng):
    if kind == "support":
        rho = rng.uniform(0.05, 0.25)
        mask = rng.random((m, n)) < rho
        if not mask.any():
            mask[rng.integers(m), rng.integers(n)] = True
        return SupportSet(m, n, mask)
    if kind == "tangent":
        r = int(rng.integers(1, 4))
        _, tangent = gen_low_rank(m, n, r, int(rng.integers(0, 2**32)))
        return tangent
    return gen_random_qperp(m, n, int(rng.integers(1, 5)), int(rng.integers(0, 2**32)))


_KINDS = ("support", "tangent", "span")


def check_lemma7_trial(seed):
    """Energy bound for a direct sum of two subspaces, exact alpha."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(15, 31))
    n = int(rng.integers(10, m + 1))
    for _ in range(20):
        s1 = _random_subspace(_KINDS[rng.integers(3)], m, n, rng)
        s2 = _random_subspace(_KINDS[rng.integers(3)], m, n, rng)
        alpha = exact_product_norm(s1, s2)
        if alpha < 1.0 - 1e-6:
            break
    else:
        raise RuntimeError("could not draw an independent pair")
    x = rng.standard_normal((m, n))
    lhs = np.linalg.norm(DirectSum(s1, s2).project(x)) ** 2
    rhs = (np.linalg.norm(s1.project(x)) ** 2 + np.linalg.norm(s2.project(x)) ** 2) / (
        1.0 - alpha
    )
    return {"lhs": float(lhs), "rhs": float(rhs),
            "passed": bool(lhs <= rhs * (1 + _SLACK) + 1e-12)}


def check_lemma8_trial(seed):
    """Product-norm bound for a direct sum against a third subspace."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(15, 31))
    n = int(rng.integers(10, m + 1))
    for _ in range(50):
        subs = [_random_subspace(_KINDS[rng.integers(3)], m, n, rng) for _ in range(3)]
        a12 = exact_product_norm(subs[0], subs[1])
        a23 = exact_product_norm(subs[1], subs[2])
        a31 = exact_product_norm(subs[2], subs[0])
        if max(a12, a23, a31) < 1.0 - 1e-6:
            break
    else:
        raise RuntimeError("could not draw an independent triple")
    lhs = op_norm_product(DirectSum(subs[0], subs[1]), subs[2])
    rhs = math.sqrt((a23 ** 2 + a31 ** 2) / (1.0 - a12))
    return {"lhs": float(lhs), "rhs": float(rhs),
            "passed": bool(lhs <= rhs * (1 + _SLACK) + 1e-12)}


def check_lemma4(m, n, p, seed):
    """Random model: every projected standard-basis matrix is small."""
    qperp = gen_random_qperp(m, n, p, seed)
    energy = (qperp.stack ** 2).sum(axis=0)
    lhs = float(np.sqrt(energy.max()))
    rhs = 4.0 * math.sqrt(p * math.log(m * n * p) / (m * n))
    return {"lhs": lhs, "rhs": rhs, "passed": bool(lhs <= rhs)}


def check_lemma5(m, n, r, p, seed):
    """Random model: ||P_QPerp P_T|| against the explicit constant-8 bound."""
    qperp = gen_random_qperp(m, n, p, seed)
    _, tangent = gen_low_rank(m, n, r, seed + 1)
    lhs = op_norm_product(qperp, tangent)
    rhs = 8.0 * (math.sqrt(p) + math.sqrt((m + n) * r)) / math.sqrt(m * n)
    return {"lhs": float(lhs), "rhs": rhs, "passed": bool(lhs <= rhs)}


def check_lemma6(m, n, r, rho, seed):
    """||P_Omega P_T||^2 <= rho + eps with eps = rho."""
    _, tangent = gen_low_rank(m, n, r, seed)
    _, omega = gen_sparse(m, n, rho, 1.0, seed + 1)
    lhs = op_norm_product(omega, tangent) ** 2
    rhs = 2.0 * rho
    return {"lhs": float(lhs), "rhs": rhs, "passed": bool(lhs <= rhs)}


def check_lemma9(m, n, r, p, rate, seed):
    """Contraction form of the sampled projector identity on Gamma-perp."""
    _, tangent = gen_low_rank(m, n, r, seed)
    qperp = gen_random_qperp(m, n, p, seed + 1)
    _, omega = gen_sparse(m, n, rate, 1.0, seed + 2)
    gperp = DirectSum(qperp, tangent)

    def apply_op(x):
        y = gperp.project(x)
        return y - gperp.project(omega.project(y)) / rate

    lhs = _symmetric_op_norm(apply_op, (m, n), seed=seed)
    return {"lhs": float(lhs), "rhs": 1.0, "passed": bool(lhs < 1.0)}


def check_lemma10(m, n, r, p, rate, seed):
    """Entrywise contraction of the sampled identity on a fixed Z."""
    _, tangent = gen_low_rank(m, n, r, seed)
    qperp = gen_random_qperp(m, n, p, seed + 1)
    _, omega = gen_sparse(m, n, rate, 1.0, seed + 2)
    gperp = DirectSum(qperp, tangent)
    z = tangent.uv()
    lhs = float(
        np.abs(z - gperp.project(omega.project(z)) / rate).max() / np.abs(z).max()
    )
    return {"lhs": lhs, "rhs": 1.0, "passed": bool(lhs < 1.0)}


def check_lemma11(m, n, rate, seed, constant_bar=4.0):
    """Spectral deviation of sampled-and-rescaled matrices.

    The analysis constant is unnamed, so the implied constant is measured
    and compared against a fixed desk-scale bar.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((m, n))
    mask = rng.random((m, n)) < rate
    dev = z - np.where(mask, z, 0.0) / rate
    lhs = float(np.linalg.norm(dev, 2))
    scale = math.sqrt(m * math.log(m) / rate) * float(np.abs(z).max())
    implied = lhs / scale
    return {"lhs": lhs, "rhs": constant_bar * scale, "implied_constant": implied,
            "passed": bool(implied <= constant_bar)}


def check_cor1(m, n, r, p, seed):
    """Three incoherence consequences for a nu-coherent subspace."""
    qperp = gen_nu_coherent_qperp(m, n, p)
    nu = nu_coherence(qperp)
    _, tangent = gen_low_rank(m, n, r, seed)
    energy = (qperp.stack ** 2).sum(axis=0)
    checks = [
        (float(energy.max()), nu * p / n),
        (float(op_norm_product(qperp, tangent) ** 2), 2.0 * nu * p * r / n),
        (float(np.linalg.norm(qperp.project(tangent.uv())) ** 2), 2.0 * nu * p * r * r / n),
    ]
    passed = all(lhs <= rhs * (1 + _SLACK) for lhs, rhs in checks)
    return {"lhs": checks[1][0], "rhs": checks[1][1], "nu": nu,
            "sub_checks": [{"lhs": a, "rhs": b} for a, b in checks],
            "passed": bool(passed)}


def check_lemma12(m, n, p, rho, seed):
    """Deterministic model: ||P_QPerp P_Omega|| < 1/2."""
    qperp = gen_nu_coherent_qperp(m, n, p)
    _, omega = gen_sparse(m, n, rho, 1.0, seed)
    lhs = op_norm_product(qperp, omega)
    return {"lhs": float(lhs), "rhs": 0.5, "passed": bool(lhs < 0.5)}


def validate_lemmas(cfg, threads=None):
    """Run the selected lemma checks; returns a JSON-ready report."""
    cell = cfg.cells()[0]
    m, n, r, rho, p = cell["m"], cell["n"], cell["r"], cell["rho"], cell["p"]
    p = max(p, 1)
    r = max(r, 1)
    seeds = [cfg.seed + k for k in range(cfg.lemma_seeds)]

    def majority(trials):
        rate = sum(t["passed"] for t in trials) / len(trials)
        return rate, rate >= MAJORITY_THRESHOLD

    report = {}
    for name in cfg.lemmas:
        if name == "lemma7":
            trials = [check_lemma7_trial(cfg.seed + k) for k in range(cfg.det_trials)]
            failures = sum(not t["passed"] for t in trials)
            report[name] = {
                "kind": "deterministic", "trials": len(trials),
                "failures": failures, "verdict": failures == 0,
            }
            continue
        if name == "lemma8":
            trials = [check_lemma8_trial(cfg.seed + k) for k in range(cfg.det_trials)]
            failures = sum(not t["passed"] for t in trials)
            report[name] = {
                "kind": "deterministic", "trials": len(trials),
                "failures": failures, "verdict": failures == 0,
            }
            continue
        if name == "lemma4":
            trials = [check_lemma4(m, n, p, s) for s in seeds]
        elif name == "lemma5":
            trials = [check_lemma5(m, n, r, p, s) for s in seeds]
        elif name == "lemma6":
            trials = [check_lemma6(m, n, r, rho, s) for s in seeds]
        elif name == "lemma9":
            trials = [check_lemma9(m, n, r, p, cfg.rate_high, s) for s in seeds]
        elif name == "lemma10":
            trials = [check_lemma10(m, n, r, p, cfg.rate_high, s) for s in seeds]
        elif name == "lemma11":
            trials = [check_lemma11(m, n, cfg.rate_high, s) for s in seeds]
        elif name == "cor1":
            trials = [check_cor1(m, n, r, p, s) for s in seeds]
        elif name == "lemma12":
            trials = [check_lemma12(m, n, p, rho, s) for s in seeds]
        else:  # pragma: no cover - guarded by config validation
            continue
        rate, verdict = majority(trials)
        report[name] = {
            "kind": "probabilistic", "trials": trials,
            "pass_rate": rate, "threshold": MAJORITY_THRESHOLD, "verdict": verdict,
        }
    report_verdict = all(entry["verdict"] for entry in report.values())
    return {
        "params": {"m": m, "n": n, "r": r, "rho": rho, "p": p,
                   "rate_high": cfg.rate_high, "seeds": cfg.lemma_seeds},
        "lemmas": report,
        "verdict": report_verdict,
    }
