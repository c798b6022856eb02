"""Shared brute-force oracles for the test suite.

These deliberately avoid the library's projector implementations: tangent
spaces are expanded into explicit orthonormal bases by Gram-Schmidt, and
projections go through vectorized normal equations, so agreement with the
closed forms is meaningful.
"""

import numpy as np

from cpcp.subspaces import SpanBasis, SupportSet, TangentSpace


def gram_schmidt_vectors(vectors, tol=1e-9):
    """Orthonormalize, dropping dependent vectors."""
    basis = []
    for v in vectors:
        w = v.astype(float).copy()
        for _ in range(2):
            for b in basis:
                w -= np.dot(b, w) * b
        nw = np.linalg.norm(w)
        if nw > tol:
            basis.append(w / nw)
    return basis


def tangent_basis_matrix(tangent):
    """Explicit orthonormal basis of T from the spanning set
    {u_k e_j^T} union {e_i v_k^T}, as vectorized columns."""
    m, n = tangent.shape
    span = []
    for k in range(tangent.r):
        for j in range(n):
            g = np.zeros((m, n))
            g[:, j] = tangent.U[:, k]
            span.append(g.ravel())
        for i in range(m):
            g = np.zeros((m, n))
            g[i, :] = tangent.V[:, k]
            span.append(g.ravel())
    basis = gram_schmidt_vectors(span)
    return np.array(basis).T if basis else np.zeros((m * n, 0))


def basis_matrix(handle):
    """Vectorized orthonormal basis columns for a support/tangent/span handle."""
    m, n = handle.shape
    if isinstance(handle, SupportSet):
        idx = np.flatnonzero(handle.mask.ravel())
        out = np.zeros((m * n, idx.size))
        out[idx, np.arange(idx.size)] = 1.0
        return out
    if isinstance(handle, TangentSpace):
        return tangent_basis_matrix(handle)
    if isinstance(handle, SpanBasis):
        return handle.stack.reshape(len(handle), -1).T.copy()
    raise TypeError(f"no oracle basis for {type(handle)!r}")


def project_via_basis(x, cols):
    """Least-squares projection onto the column span of `cols`."""
    if cols.shape[1] == 0:
        return np.zeros_like(x)
    coef, *_ = np.linalg.lstsq(cols, x.ravel(), rcond=None)
    return (cols @ coef).reshape(x.shape)


def exact_product_norm(a, b):
    """||P_A P_B|| from the SVD of the cross-Gram of explicit bases."""
    ba = basis_matrix(a)
    bb = basis_matrix(b)
    if ba.shape[1] == 0 or bb.shape[1] == 0:
        return 0.0
    return float(np.linalg.svd(ba.T @ bb, compute_uv=False)[0])


def least_norm_solution(constraint_rows, rhs, shape):
    """Minimum Frobenius norm matrix X with A vec(X) = rhs."""
    sol, *_ = np.linalg.lstsq(constraint_rows, rhs, rcond=None)
    return sol.reshape(shape)
