"""Decompositions with explicit tolerances."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from metafair.errors import InvalidArgument, NumericError

ORTHONORMAL_TOL = 1e-8
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class Spectrum:
    """Values sorted descending with matching orthonormal columns in `vectors`.

    For an SVD `vectors` holds the right singular vectors and `left` the left
    ones; for a symmetric eigendecomposition `left` is None.
    """

    values: np.ndarray
    vectors: np.ndarray
    left: np.ndarray | None = None

    def orthonormality_error(self) -> float:
        k = self.vectors.shape[1]
        return float(np.max(np.abs(self.vectors.T @ self.vectors - np.eye(k)), initial=0.0))

    def smallest(self, n: int, skip: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """The `n` smallest values (ascending) after skipping the `skip` smallest."""
        order = np.arange(len(self.values))[::-1]
        chosen = order[skip : skip + n]
        return self.values[chosen], self.vectors[:, chosen]


def _require_finite(M: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(M)):
        raise NumericError(f"{what} contains non-finite values")


def svd(M, k: int | None = None) -> Spectrum:
    """Top-k singular triplets of M (thin SVD, LAPACK gesdd)."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise InvalidArgument(f"svd expects a matrix, got shape {M.shape}")
    _require_finite(M, "svd input")
    r = min(M.shape)
    k = r if k is None else k
    if not 1 <= k <= r:
        raise InvalidArgument(f"svd rank k={k} must lie in [1, {r}]")
    U, s, Vt = scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesdd")
    return Spectrum(values=s[:k], vectors=Vt[:k].T.copy(), left=U[:, :k].copy())


def sym_eigen(S) -> Spectrum:
    """Eigendecomposition of a symmetric matrix, values descending."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidArgument(f"sym_eigen expects a square matrix, got shape {S.shape}")
    _require_finite(S, "sym_eigen input")
    asym = float(np.max(np.abs(S - S.T), initial=0.0))
    if asym > SYMMETRY_TOL:
        raise InvalidArgument(f"Matrix is not symmetric (max |S - S^T| = {asym:.3e})")
    values, vectors = scipy.linalg.eigh(S)
    return Spectrum(values=values[::-1].copy(), vectors=vectors[:, ::-1].copy())


def principal_components(M, n: int = 1) -> np.ndarray:
    """First `n` right singular directions of M (uncentred), as rows."""
    return svd(M, n).vectors.T


def remove_principal_components(M, n: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the projection of every row of M onto its first `n` components."""
    M = np.asarray(M, dtype=np.float64)
    components = principal_components(M, n)
    return M - (M @ components.T) @ components, components


def project_out(M, basis) -> np.ndarray:
    """Remove from each row of M its component in span(basis rows); basis orthonormal."""
    M = np.asarray(M, dtype=np.float64)
    B = np.atleast_2d(np.asarray(basis, dtype=np.float64))
    return M - (M @ B.T) @ B
