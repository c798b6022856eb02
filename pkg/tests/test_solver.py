import numpy as np
import pytest

from cpcp.generate import GenParams, assemble, gen_low_rank, gen_random_qperp, gen_sparse
from cpcp.solver import SolverOptions, oracle_solve, solve_cpcp, solve_pcp
from cpcp.subspaces import SpanBasis


def rel_err(estimate, truth):
    return np.linalg.norm(estimate - truth) / max(1.0, np.linalg.norm(truth))


def test_clean_low_rank_input():
    low_rank, _ = gen_low_rank(15, 15, 2, seed=0)
    res = solve_pcp(low_rank, SolverOptions(tol_primal=1e-8))
    assert res.status == "converged"
    assert rel_err(res.L_hat, low_rank) <= 1e-5
    assert np.linalg.norm(res.S_hat) <= 1e-5 * np.linalg.norm(low_rank)


def test_clean_sparse_input():
    sparse, _ = gen_sparse(15, 15, 0.05, 2.0, seed=1)
    res = solve_pcp(sparse, SolverOptions(tol_primal=1e-8))
    assert res.status == "converged"
    assert rel_err(res.S_hat, sparse) <= 1e-5
    assert np.linalg.norm(res.L_hat) <= 1e-5 * max(1.0, np.linalg.norm(sparse))


def test_zero_input():
    res = solve_pcp(np.zeros((6, 6)))
    assert np.abs(res.L_hat).max() == 0.0
    assert np.abs(res.S_hat).max() == 0.0
    assert res.objective == 0.0


def test_pcp_is_same_code_path_as_empty_basis():
    rng = np.random.default_rng(2)
    d = rng.standard_normal((12, 12))
    opts = SolverOptions(record_trace=True, max_iters=50)
    a = solve_pcp(d, opts)
    b = solve_cpcp(d, SpanBasis.empty(12, 12), opts)
    assert np.array_equal(a.L_hat, b.L_hat)
    assert np.array_equal(a.S_hat, b.S_hat)
    assert a.trace == b.trace


def test_small_pcp_recovery_rank1_plus_spike():
    low_rank, _ = gen_low_rank(10, 10, 1, seed=3)
    sparse = np.zeros((10, 10))
    sparse[4, 7] = 3.0
    res = solve_pcp(low_rank + sparse, SolverOptions(tol_primal=1e-10, max_iters=3000))
    assert res.status == "converged"
    assert rel_err(res.L_hat, low_rank) <= 1e-6
    assert rel_err(res.S_hat, sparse) <= 1e-6


def test_feasibility_at_convergence():
    inst = assemble(GenParams(m=30, n=30, r=2, rho=0.05, p=3), seed=4)
    opts = SolverOptions(tol_primal=1e-8)
    res = solve_cpcp(inst.D, inst.qperp, opts)
    assert res.status == "converged"
    r = inst.D - res.L_hat - res.S_hat
    r -= inst.qperp.project(r)
    pqd = inst.D - inst.qperp.project(inst.D)
    assert np.linalg.norm(r) / max(1.0, np.linalg.norm(pqd)) <= opts.tol_primal


def test_max_iters_status():
    rng = np.random.default_rng(5)
    res = solve_pcp(rng.standard_normal((8, 8)), SolverOptions(max_iters=2))
    assert res.status == "max_iters"
    assert res.iters == 2


def test_trace_recording():
    rng = np.random.default_rng(6)
    res = solve_pcp(rng.standard_normal((8, 8)), SolverOptions(record_trace=True, max_iters=30))
    assert len(res.trace) == res.iters
    its, residuals, objectives = zip(*res.trace)
    assert its == tuple(range(1, res.iters + 1))
    assert all(r >= 0 for r in residuals)
    assert all(o >= 0 for o in objectives)


def test_solver_never_beats_optimal_ground_truth():
    # when recovery succeeds, the returned objective cannot undercut the
    # ground truth's objective by more than tolerance
    from cpcp.linalg import norm

    inst = assemble(GenParams(m=40, n=40, r=2, rho=0.05, p=2), seed=7)
    res = solve_cpcp(inst.D, inst.qperp, SolverOptions(tol_primal=1e-9, max_iters=2000))
    assert rel_err(res.L_hat, inst.L0) <= 1e-4
    truth_obj = norm(inst.L0, "nuclear") + res.lam * norm(inst.S0, "l1")
    assert res.objective <= truth_obj * (1 + 1e-6)


def test_scale_equivariance():
    inst = assemble(GenParams(m=20, n=20, r=1, rho=0.1, p=2), seed=8)
    opts = SolverOptions(tol_primal=1e-9, max_iters=2000)
    base = solve_cpcp(inst.D, inst.qperp, opts)
    scaled = solve_cpcp(3.5 * inst.D, inst.qperp, opts)
    assert rel_err(scaled.L_hat, 3.5 * base.L_hat) <= 1e-6
    assert rel_err(scaled.S_hat, 3.5 * base.S_hat) <= 1e-6


def test_lambda_extremes():
    low_rank, _ = gen_low_rank(12, 12, 1, seed=9)
    sparse, _ = gen_sparse(12, 12, 0.1, 3.0, seed=10)
    d = low_rank + sparse
    huge = solve_pcp(d, SolverOptions(lam=1e4, tol_primal=1e-8))
    assert np.linalg.norm(huge.S_hat) <= 1e-8
    tiny = solve_pcp(d, SolverOptions(lam=1e-6, tol_primal=1e-8))
    assert np.linalg.norm(tiny.L_hat) <= 1e-6 * np.linalg.norm(d)


def test_qperp_component_of_data_is_ignored():
    inst = assemble(GenParams(m=25, n=25, r=1, rho=0.05, p=3), seed=11)
    opts = SolverOptions(tol_primal=1e-8)
    base = solve_cpcp(inst.D, inst.qperp, opts)
    rng = np.random.default_rng(12)
    g = np.tensordot(rng.standard_normal(3), inst.qperp.stack, axes=(0, 0))
    g /= np.linalg.norm(g)
    shifted = solve_cpcp(inst.D + 5.0 * g, inst.qperp, opts)
    assert rel_err(shifted.L_hat, base.L_hat) <= 1e-4
    assert rel_err(shifted.S_hat, base.S_hat) <= 1e-4


def test_oracle_zero_input():
    L, S, obj = oracle_solve(np.zeros((5, 5)))
    assert np.abs(L).max() == 0.0
    assert np.abs(S).max() == 0.0
    assert obj == 0.0


def test_oracle_matches_pcp_objective():
    low_rank, _ = gen_low_rank(10, 10, 1, seed=13)
    sparse = np.zeros((10, 10))
    sparse[2, 3] = 1.5
    sparse[8, 1] = -2.0
    d = low_rank + sparse
    lam = 1.0 / np.sqrt(10)
    res = solve_pcp(d, SolverOptions(lam=lam, tol_primal=1e-9, max_iters=3000))
    _, _, obj = oracle_solve(d, None, lam, tol=1e-9)
    assert abs(res.objective - obj) <= 1e-6 * abs(obj)


def test_oracle_matches_cpcp_objective():
    rng = np.random.default_rng(14)
    d = rng.standard_normal((10, 10))
    qperp = gen_random_qperp(10, 10, 3, seed=15)
    lam = 1.0 / np.sqrt(10)
    res = solve_cpcp(d, qperp, SolverOptions(lam=lam, tol_primal=1e-9, max_iters=3000))
    L, S, obj = oracle_solve(d, qperp, lam, tol=1e-9)
    assert abs(res.objective - obj) <= 1e-6 * abs(obj)
    r = d - L - S
    r -= qperp.project(r)
    assert np.linalg.norm(r) / max(1.0, np.linalg.norm(d - qperp.project(d))) <= 1e-8


def test_oracle_size_cap():
    with pytest.raises(ValueError, match="desk-scale"):
        oracle_solve(np.zeros((21, 21)))


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(lam=0.0)
    with pytest.raises(ValueError):
        SolverOptions(tol_primal=0.0)
    with pytest.raises(ValueError):
        SolverOptions(penalty_growth=0.5)
    with pytest.raises(ValueError):
        SolverOptions(max_iters=0)


def test_solver_rejects_nonfinite_data():
    d = np.zeros((4, 4))
    d[1, 1] = np.inf
    with pytest.raises(ValueError):
        solve_pcp(d)
