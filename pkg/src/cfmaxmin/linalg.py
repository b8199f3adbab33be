"""Dense complex linear algebra used throughout the simulator.

All routines accept stacked inputs: a matrix argument of shape ``(..., n, n)``
is treated as a batch of independent matrices, which lets the per-AP and
per-realization solves run as a handful of vectorized numpy operations.
"""

import numpy as np

from .exceptions import DimensionMismatch, NotPositiveDefinite, ZeroVector

PIVOT_RTOL = 1e-14
HERMITIAN_RTOL = 1e-12


def is_hermitian(M, rtol=HERMITIAN_RTOL):
    M = np.asarray(M)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        return False
    scale = np.max(np.abs(M)) if M.size else 0.0
    return bool(np.all(np.abs(M - np.swapaxes(M, -1, -2).conj()) <= rtol * max(scale, 1e-300)))


def hermitian_part(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2).conj())


def cholesky(A, pivot_rtol=PIVOT_RTOL):
    """Lower-triangular factor ``Lc`` with ``A = Lc Lc^H`` for a stack of matrices.

    Only the lower triangle of ``A`` is read. Raises NotPositiveDefinite when
    a pivot is at or below ``pivot_rtol`` times the largest diagonal entry of
    its matrix.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DimensionMismatch(f"expected square matrices, got shape {A.shape}")
    n = A.shape[-1]
    Lc = np.zeros_like(A)
    diag = np.diagonal(A, axis1=-2, axis2=-1).real
    tol = pivot_rtol * np.max(np.abs(diag), axis=-1)
    for j in range(n):
        row = Lc[..., j, :j]
        d = A[..., j, j].real - np.sum(np.abs(row) ** 2, axis=-1)
        bad = ~(d > tol)
        if np.any(bad):
            where = np.argwhere(np.atleast_1d(bad))
            raise NotPositiveDefinite(
                f"pivot {j} not above {pivot_rtol:g} x max diagonal",
                index=tuple(where[0]) if where.size else None,
            )
        djj = np.sqrt(d)
        Lc[..., j, j] = djj
        if j + 1 < n:
            below = A[..., j + 1:, j] - np.einsum("...ik,...k->...i", Lc[..., j + 1:, :j], row.conj())
            Lc[..., j + 1:, j] = below / djj[..., None]
    return Lc


def _forward(Lc, B):
    n = Lc.shape[-1]
    Y = np.zeros(np.broadcast_shapes(Lc.shape[:-2], B.shape[:-2]) + B.shape[-2:], dtype=complex)
    for i in range(n):
        acc = B[..., i, :] - np.einsum("...k,...km->...m", Lc[..., i, :i], Y[..., :i, :])
        Y[..., i, :] = acc / Lc[..., i, i][..., None]
    return Y


def _backward(Lc, Y):
    # solves Lc^H X = Y
    n = Lc.shape[-1]
    X = np.zeros_like(Y)
    for i in range(n - 1, -1, -1):
        acc = Y[..., i, :] - np.einsum("...k,...km->...m", Lc[..., i + 1:, i].conj(), X[..., i + 1:, :])
        X[..., i, :] = acc / Lc[..., i, i][..., None]
    return X


def cho_solve_factor(Lc, b):
    """Solve ``(Lc Lc^H) x = b`` given a precomputed Cholesky factor.

    ``b`` may be a stack of vectors ``(..., n)`` or of matrices ``(..., n, m)``;
    the trailing layout of the result follows ``b``.
    """
    b = np.asarray(b, dtype=complex)
    vector = b.ndim == Lc.ndim - 1
    B = b[..., None] if vector else b
    X = _backward(Lc, _forward(Lc, B))
    return X[..., 0] if vector else X


def cholesky_solve(A, b, check=True):
    """Solve the Hermitian positive-definite system ``A x = b`` via Cholesky.

    With ``check`` (the default) ``A`` must be Hermitian to 1e-12 relative
    tolerance. Batched inputs follow numpy broadcasting over leading axes.
    """
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DimensionMismatch(f"expected square matrix, got shape {A.shape}")
    n = A.shape[-1]
    if b.ndim == 0 or (b.shape[-1] != n and (b.ndim < 2 or b.shape[-2] != n)):
        raise DimensionMismatch(f"rhs shape {b.shape} incompatible with {A.shape}")
    if check and not is_hermitian(A):
        raise NotPositiveDefinite("matrix is not Hermitian")
    return cho_solve_factor(cholesky(A), b)


def equilibrated_solve(A, b):
    """Cholesky solve after symmetric diagonal scaling ``S A S``, ``S = diag(A)^-1/2``.

    The pivot test then applies to a unit-diagonal matrix, which matters for
    statistics matrices whose diagonal spans many orders of magnitude.
    """
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    d = np.diagonal(A, axis1=-2, axis2=-1).real
    bad = np.any(~(d > 0), axis=-1)
    if np.any(bad):
        where = np.argwhere(np.atleast_1d(bad))
        raise NotPositiveDefinite("non-positive diagonal entry", index=tuple(where[0]))
    s = 1.0 / np.sqrt(d)
    scaled = A * s[..., :, None] * s[..., None, :]
    vector = b.ndim == A.ndim - 1
    sb = s if vector else s[..., :, None]
    return sb * cho_solve_factor(cholesky(scaled), sb * b)


def quadratic_form(x, M):
    """``x^H M x`` for a vector ``x`` (or a stack of them)."""
    x = np.asarray(x)
    M = np.asarray(M)
    if M.shape[-1] != M.shape[-2] or x.shape[-1] != M.shape[-1]:
        raise DimensionMismatch(f"x {x.shape} vs M {M.shape}")
    return np.einsum("...i,...ij,...j->...", x.conj(), M, x)


def fix_phase(a):
    """Rotate each vector so its largest-magnitude entry is real and positive."""
    a = np.asarray(a, dtype=complex)
    idx = np.argmax(np.abs(a), axis=-1)
    pivot = np.take_along_axis(a, idx[..., None], axis=-1)
    mag = np.abs(pivot)
    phase = np.where(mag > 0, pivot / np.where(mag > 0, mag, 1.0), 1.0)
    return a * phase.conj()


def rank1_rayleigh_maximizer(g, B):
    """Unit vector maximizing ``|a^H g|^2 / (a^H B a)``.

    The maximizer is ``B^{-1} g`` up to scale; it is normalized and its global
    phase fixed with :func:`fix_phase`. Works on stacks of ``(g, B)`` pairs.
    """
    g = np.asarray(g, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if g.shape[-1] != B.shape[-1]:
        raise DimensionMismatch(f"g {g.shape} vs B {B.shape}")
    if np.any(np.linalg.norm(g, axis=-1) <= 1e-300):
        raise ZeroVector("signal vector has zero norm")
    a = equilibrated_solve(B, g)
    a = a / np.linalg.norm(a, axis=-1, keepdims=True)
    return fix_phase(a)
