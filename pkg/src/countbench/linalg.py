"""Dense real linear-algebra kernel shared by the whole workbench.

Matrices are plain 2-D float64 numpy arrays in row-major order.  The
routines are thin wrappers around LAPACK (via numpy) that pin down the
conventions everything downstream relies on: spectral norms computed
through the smaller Gram matrix, descending eigenvalue order, and a
relative singular-value cutoff for rank decisions.
"""

from __future__ import annotations

import numpy as np

# Relative cutoff below which a singular value does not count toward rank.
# The scheme matrices built downstream have integer-combinatorial entries
# with well separated singular values, so the exact value is uncritical.
DEFAULT_RANK_TOL = 1e-10

# Maximal entrywise asymmetry accepted by symmetric_eig.
SYMMETRY_TOL = 1e-12


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce ``values`` to a nonempty 2-D float64 array with finite entries."""
    m = np.asarray(values, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def spectral_norm(values) -> float:
    """Largest singular value of a matrix.

    Computed from the symmetric eigendecomposition of m m^T or m^T m,
    whichever is smaller; accurate to about 1e-10 relative for the top
    singular value.
    """
    m = as_matrix(values)
    if m.shape[0] <= m.shape[1]:
        gram = m @ m.T
    else:
        gram = m.T @ m
    top = float(np.linalg.eigvalsh(gram)[-1])
    return float(np.sqrt(max(top, 0.0)))


def symmetric_eig(values) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns ``(w, V)`` with eigenvalues ``w`` sorted descending and
    eigenvectors in the columns of ``V``, so ``m = V diag(w) V^T``.
    Input must be square and symmetric within ``SYMMETRY_TOL``.
    """
    m = as_matrix(values)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if float(np.max(np.abs(m - m.T))) > SYMMETRY_TOL:
        raise ValueError("matrix is not symmetric within tolerance")
    w, v = np.linalg.eigh(m)
    return np.ascontiguousarray(w[::-1]), np.ascontiguousarray(v[:, ::-1])


def orthonormal_column_basis(values, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column space of a matrix.

    A singular value counts toward the rank iff it exceeds
    ``rank_tol`` times the largest one.  A zero matrix yields a
    0-column result rather than an error.
    """
    m = as_matrix(values)
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m.shape[0], 0))
    rank = int(np.count_nonzero(s > rank_tol * s[0]))
    return np.ascontiguousarray(u[:, :rank])
