import math

import numpy as np
import pytest

from cpcp.generate import gen_low_rank, gen_nu_coherent_qperp, gen_random_qperp, gen_sparse
from cpcp.linalg import inner, norm
from cpcp.subspaces import (
    Complement,
    DegenerateSum,
    DirectSum,
    SpanBasis,
    SupportSet,
    TangentSpace,
    check_direct_sum,
    coherence_mu,
    gamma_constrained,
    nu_coherence,
    op_norm_product,
)

from helpers import basis_matrix, exact_product_norm, project_via_basis


def test_project_T_fixed_point():
    rng = np.random.default_rng(0)
    _, t = gen_low_rank(7, 5, 2, seed=1)
    x = t.U @ rng.standard_normal((2, 5)) + rng.standard_normal((7, 2)) @ t.V.T
    np.testing.assert_allclose(t.project(x), x, atol=1e-10)


def test_project_T_rank_zero():
    t = TangentSpace.empty(4, 3)
    x = np.ones((4, 3))
    np.testing.assert_array_equal(t.project(x), np.zeros((4, 3)))


def test_project_T_against_basis_oracle():
    rng = np.random.default_rng(2)
    _, t = gen_low_rank(6, 5, 2, seed=3)
    cols = basis_matrix(t)
    assert cols.shape[1] == t.dim()
    for _ in range(20):
        x = rng.standard_normal((6, 5))
        expected = project_via_basis(x, cols)
        assert np.abs(t.project(x) - expected).max() <= 1e-9


def test_project_support_full_and_empty():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((4, 6))
    np.testing.assert_array_equal(SupportSet.full(4, 6).project(x), x)
    np.testing.assert_array_equal(SupportSet.empty(4, 6).project(x), np.zeros_like(x))


def test_project_support_complementary_split():
    rng = np.random.default_rng(4)
    _, omega = gen_sparse(8, 8, 0.3, 1.0, seed=5)
    x = rng.standard_normal((8, 8))
    np.testing.assert_array_equal(
        omega.project(x) + omega.complement().project(x), x
    )


def test_project_span_fixes_basis_element():
    basis = gen_random_qperp(6, 6, 3, seed=6)
    np.testing.assert_allclose(basis.project(basis[0]), basis[0], atol=1e-10)


def test_project_span_annihilates_orthogonal_input():
    basis = gen_random_qperp(6, 6, 2, seed=7)
    rng = np.random.default_rng(8)
    x = rng.standard_normal((6, 6))
    x -= basis.project(x)
    assert np.linalg.norm(basis.project(x)) <= 1e-10


def test_project_span_parseval():
    basis = gen_random_qperp(7, 5, 4, seed=9)
    rng = np.random.default_rng(10)
    x = rng.standard_normal((7, 5))
    coeffs = basis.coefficients(x)
    assert np.linalg.norm(basis.project(x)) ** 2 == pytest.approx(
        float((coeffs**2).sum()), abs=1e-10
    )


def test_direct_sum_with_trivial_summand_reduces_to_projection():
    rng = np.random.default_rng(11)
    _, t = gen_low_rank(6, 6, 1, seed=12)
    trivial = SupportSet.empty(6, 6)
    ds = DirectSum(t, trivial)
    x = rng.standard_normal((6, 6))
    np.testing.assert_allclose(ds.project(x), t.project(x), atol=1e-10)


def test_direct_sum_orthogonal_supports():
    rng = np.random.default_rng(13)
    a = SupportSet.from_pairs(5, 5, [(0, 0), (1, 2)])
    b = SupportSet.from_pairs(5, 5, [(3, 3), (4, 1)])
    ds = DirectSum(a, b)
    x = rng.standard_normal((5, 5))
    np.testing.assert_allclose(ds.project(x), a.project(x) + b.project(x), atol=1e-12)


def test_direct_sum_against_normal_equations_oracle():
    rng = np.random.default_rng(14)
    for trial in range(20):
        _, t = gen_low_rank(8, 8, 1, seed=100 + trial)
        qperp = gen_random_qperp(8, 8, 2, seed=200 + trial)
        ds = DirectSum(qperp, t)
        cols = np.hstack([basis_matrix(qperp), basis_matrix(t)])
        x = rng.standard_normal((8, 8))
        expected = project_via_basis(x, cols)
        assert np.abs(ds.project(x) - expected).max() <= 1e-8


def test_direct_sum_residual_orthogonal_to_both():
    rng = np.random.default_rng(15)
    _, t = gen_low_rank(9, 7, 2, seed=16)
    qperp = gen_random_qperp(9, 7, 3, seed=17)
    ds = DirectSum(qperp, t)
    x = rng.standard_normal((9, 7))
    resid = x - ds.project(x)
    assert np.linalg.norm(t.project(resid)) <= 1e-8 * np.linalg.norm(x)
    assert np.linalg.norm(qperp.project(resid)) <= 1e-8 * np.linalg.norm(x)


def test_direct_sum_rejects_degenerate_pair():
    _, t = gen_low_rank(6, 6, 2, seed=18)
    with pytest.raises(DegenerateSum):
        DirectSum(t, t)


def test_op_norm_same_subspace_is_one():
    _, t = gen_low_rank(8, 6, 2, seed=19)
    assert op_norm_product(t, t) == pytest.approx(1.0, abs=1e-8)


def test_op_norm_disjoint_supports_is_zero():
    a = SupportSet.from_pairs(4, 4, [(0, 0)])
    b = SupportSet.from_pairs(4, 4, [(2, 2)])
    assert op_norm_product(a, b) == 0.0


def test_op_norm_against_gram_oracle():
    for trial in range(5):
        _, t = gen_low_rank(10, 10, 1, seed=300 + trial)
        qperp = gen_random_qperp(10, 10, 2, seed=400 + trial)
        exact = exact_product_norm(qperp, t)
        est = op_norm_product(qperp, t, iters=5000, tol=1e-12)
        assert est == pytest.approx(exact, abs=1e-7)


def test_coherence_mu_identity_columns():
    # U, V = first r columns of the identity. Evaluating the three maxima
    # directly: row energies give m/r and n/r, and the joint condition gives
    # m*n*||UV^T||_inf^2 / r = m*n/r, which dominates.
    m, n, r = 6, 4, 2
    t = TangentSpace(np.eye(m)[:, :r], np.eye(n)[:, :r])
    assert coherence_mu(t) == pytest.approx(m * n / r)


def test_coherence_mu_full_identity():
    # r = n = m with U = V = I: the row conditions give 1 but the joint
    # condition gives m*n/r = n, which is the binding one.
    n = 5
    t = TangentSpace(np.eye(n), np.eye(n))
    assert coherence_mu(t) == pytest.approx(float(n))


def test_coherence_mu_rejects_rank_zero():
    with pytest.raises(ValueError):
        coherence_mu(TangentSpace.empty(3, 3))


def test_coherence_mu_random_orthobases_are_incoherent():
    # Row-energy conditions sit at O(1); the joint UV^T condition dominates
    # at O(log(mn)) (measured 27..53 over these seeds, log(mn) ~= 10.6).
    m = n = 200
    r = 5
    for seed in range(20):
        _, t = gen_low_rank(m, n, r, seed=seed)
        row_mu = max(
            m * (t.U**2).sum(axis=1).max() / r,
            n * (t.V**2).sum(axis=1).max() / r,
        )
        assert row_mu <= 20.0
        assert coherence_mu(t) <= 6.0 * math.log(m * n)


def test_nu_coherence_all_ones_element():
    g = np.full((4, 4), 0.25)  # unit Frobenius norm, spectral norm 1
    assert nu_coherence(SpanBasis([g])) == pytest.approx(4.0, rel=1e-10)


def test_nu_coherence_single_spike():
    n = 6
    g = np.zeros((n, n))
    g[0, 0] = 1.0
    assert nu_coherence(SpanBasis([g])) == pytest.approx(float(n))


def test_nu_coherence_random_element_concentrates():
    rng = np.random.default_rng(20)
    h = rng.standard_normal((100, 100))
    basis = SpanBasis([h / np.linalg.norm(h)])
    assert nu_coherence(basis) <= 10.0


def test_gamma_constrained_full_space():
    assert gamma_constrained(SupportSet.full(5, 5)) == pytest.approx(1.0)


def test_gamma_constrained_single_spike_span():
    g = np.zeros((4, 4))
    g[0, 0] = 1.0
    assert gamma_constrained(SpanBasis([g])) == pytest.approx(1.0)


def test_gamma_constrained_fast_paths_match_generic_loop():
    _, t = gen_low_rank(6, 5, 2, seed=21)
    qperp = gen_random_qperp(6, 5, 2, seed=22)

    def generic(handle):
        m, n = handle.shape
        best = 0.0
        e = np.zeros((m, n))
        for i in range(m):
            for j in range(n):
                e[i, j] = 1.0
                best = max(best, float(np.linalg.norm(handle.project(e)) ** 2))
                e[i, j] = 0.0
        return best

    assert gamma_constrained(t) == pytest.approx(generic(t), rel=1e-10)
    assert gamma_constrained(qperp) == pytest.approx(generic(qperp), rel=1e-10)


def test_gamma_constrained_sampled_is_lower_bound():
    _, t = gen_low_rank(8, 8, 2, seed=23)
    exact = gamma_constrained(t, mode="exact")
    sampled = gamma_constrained(t, mode="sampled", samples=20, seed=3)
    assert sampled <= exact + 1e-12


def test_gamma_constrained_on_gamma_perp_matches_paper_style_bound():
    # gamma(QPerp + T) <= 4 (8 p log(mnp) / (mn) + mu r / n), majority of seeds
    m = n = 30
    p, r = 2, 1
    passes = 0
    for seed in range(20):
        _, t = gen_low_rank(m, n, r, seed=seed)
        qperp = gen_random_qperp(m, n, p, seed=1000 + seed)
        gperp = DirectSum(qperp, t)
        gamma = gamma_constrained(gperp, mode="exact")
        mu = coherence_mu(t)
        bound = 4.0 * (8.0 * p * math.log(m * n * p) / (m * n) + mu * r / n)
        passes += gamma <= bound
    assert passes >= 16


def test_check_direct_sum_same_space_degenerate():
    _, t = gen_low_rank(5, 5, 1, seed=24)
    assert check_direct_sum(t, t) == "degenerate"


def test_check_direct_sum_disjoint_supports():
    a = SupportSet.from_pairs(4, 4, [(0, 1)])
    b = SupportSet.from_pairs(4, 4, [(2, 3)])
    assert check_direct_sum(a, b) == "independent"


def test_check_direct_sum_random_pairs_generic_position():
    for seed in range(20):
        qperp = gen_random_qperp(30, 30, 3, seed=seed)
        _, t = gen_low_rank(30, 30, 2, seed=500 + seed)
        assert check_direct_sum(qperp, t) == "independent"


def _random_handles(m, n, seed):
    rng = np.random.default_rng(seed)
    _, t = gen_low_rank(m, n, int(rng.integers(1, 4)), seed=seed + 1)
    _, omega = gen_sparse(m, n, 0.15, 1.0, seed=seed + 2)
    qperp = gen_random_qperp(m, n, int(rng.integers(1, 5)), seed=seed + 3)
    return [t, omega, qperp]


def test_projector_invariants():
    rng = np.random.default_rng(25)
    for seed in range(5):
        for handle in _random_handles(12, 10, 600 + 10 * seed):
            x = rng.standard_normal((12, 10))
            y = rng.standard_normal((12, 10))
            px = handle.project(x)
            nx = np.linalg.norm(x)
            assert np.linalg.norm(handle.project(px) - px) <= 1e-8 * nx
            assert inner(px, y) == pytest.approx(inner(x, handle.project(y)), abs=1e-8 * nx)
            assert np.linalg.norm(px) <= nx * (1 + 1e-12)
            assert np.linalg.norm(px) ** 2 + np.linalg.norm(x - px) ** 2 == pytest.approx(
                nx**2, rel=1e-8
            )


def test_tangent_complement_is_spectral_contraction():
    rng = np.random.default_rng(26)
    _, t = gen_low_rank(10, 8, 2, seed=27)
    for _ in range(5):
        x = rng.standard_normal((10, 8))
        assert norm(Complement(t).project(x), "spectral") <= norm(x, "spectral") + 1e-10


def test_tangent_standard_basis_bound():
    # ||P_T e_i e_j^T||_F <= sqrt(2 mu r / n) for all entries, mu as measured
    m, n, r = 12, 9, 2
    _, t = gen_low_rank(m, n, r, seed=28)
    mu = coherence_mu(t)
    bound = math.sqrt(2.0 * mu * r / n)
    e = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            e[i, j] = 1.0
            assert np.linalg.norm(t.project(e)) <= bound + 1e-12
            e[i, j] = 0.0


def test_nu_coherent_basis_consequences():
    # deterministic consequences of nu-coherence, with nu as measured
    m = n = 24
    p, r = 3, 2
    qperp = gen_nu_coherent_qperp(m, n, p)
    nu = nu_coherence(qperp)
    _, t = gen_low_rank(m, n, r, seed=29)
    energy = (qperp.stack**2).sum(axis=0)
    assert energy.max() <= nu * p / n * (1 + 1e-9)
    assert op_norm_product(qperp, t) ** 2 <= 2 * nu * p * r / n * (1 + 1e-9)
    assert np.linalg.norm(qperp.project(t.uv())) ** 2 <= 2 * nu * p * r * r / n * (1 + 1e-9)


def test_direct_sum_energy_bound_lemma_style():
    # ||P_{S1+S2} X||^2 <= (1 - alpha)^{-1} (||P_S1 X||^2 + ||P_S2 X||^2)
    rng = np.random.default_rng(30)
    for seed in range(10):
        t, omega, qperp = _random_handles(10, 9, 700 + 10 * seed)
        alpha = exact_product_norm(omega, t)
        if alpha >= 1 - 1e-6:
            continue
        ds = DirectSum(omega, t)
        x = rng.standard_normal((10, 9))
        lhs = np.linalg.norm(ds.project(x)) ** 2
        rhs = (
            np.linalg.norm(omega.project(x)) ** 2 + np.linalg.norm(t.project(x)) ** 2
        ) / (1 - alpha)
        assert lhs <= rhs * (1 + 1e-9) + 1e-12


def test_subspace_shape_mismatch_rejected():
    _, t = gen_low_rank(5, 4, 1, seed=31)
    with pytest.raises(ValueError):
        t.project(np.zeros((4, 5)))
    qperp = gen_random_qperp(5, 4, 1, seed=32)
    with pytest.raises(ValueError):
        op_norm_product(t, gen_random_qperp(6, 4, 1, seed=33))
    assert op_norm_product(t, qperp) >= 0.0


def test_span_basis_requires_orthonormal_input():
    with pytest.raises(ValueError, match="orthonormal"):
        SpanBasis([np.ones((3, 3)), np.eye(3)])


def test_tangent_requires_orthonormal_factors():
    with pytest.raises(ValueError, match="orthonormal"):
        TangentSpace(np.ones((4, 2)), np.eye(3)[:, :2])
