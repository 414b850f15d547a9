"""Dense linear algebra used by the traditional SVD recommender.

All functions are pure: inputs are never modified and results are fresh
arrays.
"""

import logging
from typing import Sequence

import numpy as np
import numpy.typing as npt

from app.config import settings
from app.exceptions import (
    ConvergenceError,
    DegenerateSpectrumError,
    InputError,
    RangeError,
    ShapeError,
    UndefinedSimilarityError,
)
from app.models.linalg_model import DenseMatrix, SvdResult, TruncatedSvd

logger = logging.getLogger(__name__)

Vector = npt.ArrayLike


def as_matrix(a: npt.ArrayLike) -> DenseMatrix:
    matrix = np.asarray(a, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {matrix.shape}")
    return matrix


def _as_vectors(u: Vector, v: Vector) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ShapeError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    return u, v


def hadamard(a: npt.ArrayLike, b: npt.ArrayLike) -> np.ndarray:
    """Element-wise product of two same-shape arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a * b


def dot(u: Vector, v: Vector) -> float:
    u, v = _as_vectors(u, v)
    return float(np.dot(u, v))


def cosine(u: Vector, v: Vector) -> float:
    u, v = _as_vectors(u, v)
    norm_u = float(np.linalg.norm(u))
    norm_v = float(np.linalg.norm(v))
    if norm_u == 0.0 or norm_v == 0.0:
        raise UndefinedSimilarityError("cosine similarity of a zero-norm vector")
    value = float(np.dot(u, v)) / (norm_u * norm_v)
    return min(1.0, max(-1.0, value))


def svd(a: npt.ArrayLike) -> SvdResult:
    """Thin SVD by one-sided Jacobi rotations on the columns.

    Columns of a working copy are rotated pairwise until every pair is
    orthogonal to ``SVD_TOLERANCE`` relative to the column norms. Column
    norms are then the singular values. Wide inputs are decomposed through
    their transpose.
    """
    matrix = as_matrix(a)
    if not np.all(np.isfinite(matrix)):
        raise InputError("SVD input contains non-finite entries")

    m, n = matrix.shape
    if m < n:
        result = _jacobi_svd(matrix.T)
        U, s, V = result.V, result.singular_values, result.U
        sweeps = result.sweeps
    else:
        result = _jacobi_svd(matrix)
        U, s, V = result.U, result.singular_values, result.V
        sweeps = result.sweeps

    U, V = np.array(U), np.array(V)
    # Largest-magnitude entry of each U column is made nonnegative.
    for k in range(U.shape[1]):
        pivot = int(np.argmax(np.abs(U[:, k])))
        if U[pivot, k] < 0:
            U[:, k] = -U[:, k]
            V[:, k] = -V[:, k]
    return SvdResult(U=U, singular_values=np.array(s), V=V, sweeps=sweeps)


def _jacobi_svd(matrix: DenseMatrix) -> SvdResult:
    m, n = matrix.shape
    # Rows of W are the working columns.
    W = np.array(matrix.T, dtype=np.float64)
    Vt = np.eye(n)
    tol = settings.SVD_TOLERANCE
    off_norm = 0.0
    sweeps = 0
    for sweeps in range(1, settings.SVD_MAX_SWEEPS + 1):
        off_norm = 0.0
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                wi, wj = W[i], W[j]
                alpha = float(np.dot(wi, wi))
                beta = float(np.dot(wj, wj))
                gamma = float(np.dot(wi, wj))
                if gamma == 0.0 or alpha == 0.0 or beta == 0.0:
                    continue
                relative = abs(gamma) / np.sqrt(alpha * beta)
                off_norm = max(off_norm, relative)
                if relative <= tol:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                W[i], W[j] = c * wi - s * wj, s * wi + c * wj
                Vi, Vj = Vt[i].copy(), Vt[j]
                Vt[i], Vt[j] = c * Vi - s * Vj, s * Vi + c * Vj
                rotated = True
        logger.debug("jacobi sweep %d: max relative off-diagonal %.3e", sweeps, off_norm)
        if not rotated:
            break
    else:
        raise ConvergenceError(off_norm, settings.SVD_MAX_SWEEPS)

    sigma = np.sqrt(np.sum(W * W, axis=1))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    W = W[order]
    Vt = Vt[order]

    U = np.zeros((m, n))
    cutoff = np.finfo(np.float64).eps * max(m, n) * (sigma[0] if n else 0.0)
    null_columns = []
    for k in range(n):
        if sigma[k] > cutoff and sigma[k] > 0:
            U[:, k] = W[k] / sigma[k]
        else:
            sigma[k] = 0.0
            null_columns.append(k)
    if null_columns:
        _complete_basis(U, null_columns)
    return SvdResult(U=U, singular_values=sigma, V=Vt.T, sweeps=sweeps)


def _complete_basis(U: np.ndarray, columns: list[int]) -> None:
    """Fills the given columns of U with unit vectors orthogonal to the rest."""
    m = U.shape[0]
    filled = [k for k in range(U.shape[1]) if k not in columns]
    candidate = 0
    for k in columns:
        while candidate < m:
            v = np.zeros(m)
            v[candidate] = 1.0
            candidate += 1
            for _ in range(2):
                for other in filled:
                    v -= np.dot(U[:, other], v) * U[:, other]
            norm = np.linalg.norm(v)
            if norm > 0.5:
                U[:, k] = v / norm
                filled.append(k)
                break


def _check_spectrum(singular_values: Sequence[float]) -> np.ndarray:
    values = np.asarray(singular_values, dtype=np.float64).ravel()
    if values.size == 0 or not np.any(values > 0):
        raise DegenerateSpectrumError("all singular values are zero")
    if np.any(values < 0) or np.any(np.diff(values) > 0):
        raise InputError("singular values must be nonnegative and sorted descending")
    return values


def energy(singular_values: Sequence[float], f: int) -> float:
    """Fraction of squared singular mass held by the first f values."""
    values = _check_spectrum(singular_values)
    squares = values * values
    return float(np.sum(squares[:f]) / np.sum(squares))


def rank_by_energy(singular_values: Sequence[float], threshold: float = 0.95) -> int:
    """Smallest f whose cumulative energy reaches the threshold."""
    if not 0 < threshold <= 1:
        raise RangeError(f"threshold must be in (0, 1], got {threshold}")
    values = _check_spectrum(singular_values)
    squares = values * values
    cumulative = np.cumsum(squares) / np.sum(squares)
    for f, achieved in enumerate(cumulative, start=1):
        if achieved >= threshold:
            return f
    return int(values.size)


def rank_by_ratio(singular_values: Sequence[float], c: float = 10.0) -> int:
    """Smallest f whose leading sum is at least c times the trailing sum."""
    if c <= 0:
        raise RangeError(f"c must be positive, got {c}")
    values = _check_spectrum(singular_values)
    total = float(np.sum(values))
    head = 0.0
    for f in range(1, values.size):
        head += float(values[f - 1])
        if head >= c * (total - head):
            return f
    return int(values.size)


def truncate(result: SvdResult, f: int) -> TruncatedSvd:
    if not 1 <= f <= result.rank:
        raise RangeError(f"rank {f} outside [1, {result.rank}]")
    return TruncatedSvd(
        U_f=np.array(result.U[:, :f]),
        S_f=np.diag(result.singular_values[:f]),
        V_f=np.array(result.V[:, :f]),
    )


def reconstruct(U_f: DenseMatrix, S_f: DenseMatrix, V_f: DenseMatrix) -> DenseMatrix:
    return np.asarray(U_f) @ np.asarray(S_f) @ np.asarray(V_f).T
