"""Vote correlation matrix, its spectral decomposition, and component scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DecompositionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """``U`` holds eigenvectors as columns, ``D`` eigenvalues in descending order."""

    U: np.ndarray
    D: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.D) @ self.U.T


def correlation_matrix(votes: np.ndarray) -> np.ndarray:
    """Pearson correlation between agent columns of a rounds x agents matrix.

    An agent whose votes never vary has correlation 0 with everyone else and
    1 with itself.
    """
    votes = np.asarray(votes, dtype=np.float64)
    if votes.ndim != 2 or votes.shape[0] < 2:
        raise ValueError(f"need a 2-D matrix with at least 2 rounds, got shape {votes.shape}")
    centered = votes - votes.mean(axis=0)
    scale = np.sqrt((centered**2).sum(axis=0))
    constant = scale <= 1e-12 * np.sqrt(votes.shape[0])
    scale[constant] = 1.0
    z = centered / scale
    z[:, constant] = 0.0
    corr = z.T @ z
    np.clip(corr, -1.0, 1.0, out=corr)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return corr


def decompose(c: np.ndarray) -> SpectralDecomposition:
    """Symmetric eigendecomposition, eigenvalues descending and clamped at 0.

    Each eigenvector is signed so its largest-magnitude entry is positive.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {c.shape}")
    if not np.allclose(c, c.T, atol=1e-10):
        raise ValueError("matrix is not symmetric")
    try:
        w, v = np.linalg.eigh(c)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(c) if np.all(np.isfinite(c)) else float("nan")
        raise DecompositionError(
            f"eigensolver failed to converge (n={c.shape[0]}, condition number {cond:.3g})"
        ) from exc
    order = np.argsort(w)[::-1]
    w = np.maximum(w[order], 0.0)
    v = v[:, order]
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return SpectralDecomposition(v * signs, w)


def component_scores(d: SpectralDecomposition, q: int = 2) -> np.ndarray:
    """First ``q`` eigenvectors, each scaled by its eigenvalue (n x q)."""
    n = d.U.shape[0]
    if q < 1 or q > n:
        raise ValueError(f"q must be in [1, {n}], got {q}")
    return d.U[:, :q] * d.D[:q]
