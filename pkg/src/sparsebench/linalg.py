"""Dense linear-algebra primitives shared by every solver module.

Everything operates on plain numpy arrays (vectors are 1-D, matrices 2-D,
columns are samples/atoms). Inputs are validated to be finite; iterative
code elsewhere relies on never seeing NaN/Inf out of this module.
"""

from dataclasses import dataclass

import numpy as np

# Singular values below SVD_RCOND * largest are treated as zero rank.
SVD_RCOND = 1e-12


class SingularSystemError(ValueError):
    """Raised when an exact linear solve meets a rank-deficient system."""


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        v = v.reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("expected a 2-D array")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError("matrix must have at least one row and column")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def norm_lp(v, p: float) -> float:
    """lp norm for p >= 1; for 0 < p < 1 the penalty sum |v_i|^p (not a norm)."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    v = as_vector(v)
    if v.size == 0:
        return 0.0
    a = np.abs(v)
    if p < 1.0:
        return float(np.sum(a**p))
    if p == 1.0:
        return float(np.sum(a))
    if p == 2.0:
        return float(np.linalg.norm(v))
    return float(np.sum(a**p) ** (1.0 / p))


def norm_l0(v, tol="auto") -> int:
    """Count entries with magnitude above tol.

    tol="auto" uses 1e-8 * max|v_i|, absorbing the floating-point dust that
    iterative solvers leave on entries that are zero in exact arithmetic.
    """
    v = as_vector(v)
    if v.size == 0:
        return 0
    if tol == "auto":
        tol = 1e-8 * float(np.max(np.abs(v)))
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return int(np.count_nonzero(np.abs(v) > tol))


def norm_l21(m) -> float:
    """Sum of column-wise l2 norms (the rotation-invariant l1 norm)."""
    m = as_matrix(m)
    return float(np.sum(np.sqrt(np.sum(m * m, axis=0))))


@dataclass(frozen=True)
class SvdResult:
    """Rank-truncated SVD: M = U @ diag(singular_values) @ V.T."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.T


def svd(m) -> SvdResult:
    """Thin SVD with strictly positive singular values (rank-truncated)."""
    m = as_matrix(m)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.size and s[0] > 0:
        r = int(np.count_nonzero(s > SVD_RCOND * s[0]))
    else:
        r = 0  # zero matrix: empty factors still reconstruct to zeros
    return SvdResult(u=u[:, :r].copy(), singular_values=s[:r].copy(), v=vt[:r].T.copy())


def ridge_least_squares(a, b, mu: float = 0.0) -> np.ndarray:
    """Solve min ||b - A x||^2 + mu ||x||^2 via the normal equations."""
    a = as_matrix(a)
    b = as_vector(b)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if b.size != a.shape[0]:
        raise ValueError("b length must match the row count of A")
    gram = a.T @ a
    if mu > 0:
        gram = gram + mu * np.eye(a.shape[1])
    rhs = a.T @ b
    try:
        x = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        raise SingularSystemError("A^T A is singular and mu == 0")
    # np.linalg.solve does not always raise on near-singular systems
    if mu == 0.0 and not np.allclose(gram @ x, rhs, rtol=1e-6, atol=1e-8 * (1 + np.abs(rhs).max())):
        raise SingularSystemError("A^T A is numerically rank-deficient and mu == 0")
    return x


def pca_reduce(data, energy: float):
    """Principal directions of mean-centered data keeping >= energy eigenmass.

    data has one sample per column. Returns (projection, projected) where
    projection rows are the top principal directions (orthonormal) and
    projected = projection @ centered_data. The smallest dimension whose
    retained eigenvalue mass reaches the requested fraction is used.
    """
    data = as_matrix(data)
    if not 0.0 < energy <= 1.0:
        raise ValueError("energy must be in (0, 1]")
    if data.shape[1] < 2:
        raise ValueError("need at least 2 samples for PCA")
    mean = data.mean(axis=1, keepdims=True)
    centered = data - mean
    # eigen-spectrum of the covariance via SVD of the centered data
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    lam = s**2
    total = float(lam.sum())
    if total == 0.0:
        # degenerate all-identical data: keep one direction
        proj = u[:, :1].T
        return proj, proj @ centered
    # drop numerically-zero directions, then take the smallest prefix
    rank = int(np.count_nonzero(s > SVD_RCOND * s[0]))
    cum = np.cumsum(lam[:rank]) / total
    k = int(np.searchsorted(cum, energy - 1e-12) + 1)
    k = min(k, rank)
    proj = u[:, :k].T
    return proj, proj @ centered


def pca_mean(data) -> np.ndarray:
    """Column mean used by pca_reduce's centering, for projecting new data."""
    return as_matrix(data).mean(axis=1, keepdims=True)


def spectral_norm_sq(m) -> float:
    """lambda_max(M^T M) = squared spectral norm, used for solver step sizes."""
    m = as_matrix(m)
    s = np.linalg.svd(m, compute_uv=False)
    return float(s[0] ** 2)
