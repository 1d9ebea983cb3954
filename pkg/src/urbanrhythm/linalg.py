"""Dense PCA/KLT kernel shared by the feature and reduction stages.

Everything here is a pure function of its inputs. Fitting goes through a
symmetric eigendecomposition of a covariance (or Gram) matrix with a fixed
sign convention and deterministic tie-breaking, so identical inputs always
produce bitwise-identical bases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, NonFiniteInput

# Relative eigenvalue threshold below which a direction counts as rank-deficient.
_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class PCABasis:
    """A fitted orthonormal basis.

    components has shape (k, d), one component per row, each sign-normalized
    so its largest-magnitude entry is non-negative.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray
    eigenvalues: np.ndarray = field(default=None)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PCABasis":
        return cls(
            mean=np.asarray(doc["mean"], dtype=float),
            components=np.asarray(doc["components"], dtype=float),
            explained_variance_ratio=np.asarray(
                doc["explained_variance_ratio"], dtype=float
            ),
            eigenvalues=np.asarray(doc["eigenvalues"], dtype=float),
        )


def _validate(samples) -> np.ndarray:
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D sample matrix, got ndim={X.ndim}")
    if X.shape[0] < 2:
        raise DegenerateInput(f"need at least 2 samples, got {X.shape[0]}")
    if X.shape[1] < 1:
        raise DimensionMismatch("need at least 1 feature column")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("sample matrix contains NaN or Inf")
    return X


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry (first on ties) is >= 0."""
    idx = np.argmax(np.abs(vecs), axis=1)
    signs = np.where(vecs[np.arange(len(vecs)), idx] < 0.0, -1.0, 1.0)
    return vecs * signs[:, None]


def _order_eigenpairs(evals: np.ndarray, vecs: np.ndarray):
    """Sort descending by eigenvalue; break exact ties lexicographically on the
    sign-normalized eigenvectors for run-to-run determinism."""
    vecs = _fix_signs(vecs)
    order = sorted(range(len(evals)), key=lambda i: (-evals[i], tuple(vecs[i])))
    return evals[order], vecs[order]


def _degenerate_basis(mean: np.ndarray) -> PCABasis:
    # Zero total variance: single standard basis vector, ratio 1 by convention.
    d = mean.shape[0]
    comp = np.zeros((1, d))
    comp[0, 0] = 1.0
    return PCABasis(
        mean=mean,
        components=comp,
        explained_variance_ratio=np.array([1.0]),
        eigenvalues=np.array([0.0]),
    )


def _eig_covariance(X: np.ndarray):
    """Eigenpairs of the feature covariance, ordered and sign-fixed.

    Uses the d x d covariance when d <= n, otherwise the n x n Gram matrix
    (same nonzero spectrum; components recovered by back-projection).
    """
    n, d = X.shape
    if d <= n:
        cov = (X.T @ X) / (n - 1)
        evals, vecs = np.linalg.eigh(cov)
        return _order_eigenpairs(evals, vecs.T)
    gram = (X @ X.T) / (n - 1)
    evals, u = np.linalg.eigh(gram)
    total = float(np.trace(gram))
    keep = evals > max(total, 0.0) * _RANK_RTOL
    evals, u = evals[keep], u[:, keep]
    # v = X^T u / ||X^T u|| is the matching covariance eigenvector.
    vecs = X.T @ u
    norms = np.linalg.norm(vecs, axis=0)
    vecs = (vecs / norms).T
    return _order_eigenpairs(evals, vecs)


def fit_pca(samples, *, min_ratio: float = None, fixed_k: int = None) -> PCABasis:
    """Fit a PCA basis with one of two retention rules.

    min_ratio keeps every component whose explained-variance ratio is strictly
    greater than the threshold (at least one); fixed_k keeps min(fixed_k, rank)
    components.
    """
    if (min_ratio is None) == (fixed_k is None):
        raise ValueError("specify exactly one of min_ratio or fixed_k")
    X = _validate(samples)
    n = X.shape[0]
    mean = X.mean(axis=0)
    Xc = X - mean

    total = float(np.sum(Xc * Xc)) / (n - 1)
    if total <= 0.0:
        return _degenerate_basis(mean)

    evals, vecs = _eig_covariance(Xc)
    evals = np.clip(evals, 0.0, None)
    ratios = evals / total

    if min_ratio is not None:
        if not 0.0 < min_ratio < 1.0:
            raise ValueError("min_ratio must lie in (0, 1)")
        k = max(1, int(np.sum(ratios > min_ratio)))
    else:
        if fixed_k < 1:
            raise ValueError("fixed_k must be >= 1")
        rank = max(1, int(np.sum(evals > total * _RANK_RTOL)))
        k = min(fixed_k, rank)

    return PCABasis(
        mean=mean,
        components=vecs[:k],
        explained_variance_ratio=ratios[:k],
        eigenvalues=evals[:k],
    )


def fit_klt(samples) -> PCABasis:
    """Full-rank decorrelating basis over the sample columns (no pruning)."""
    X = _validate(samples)
    n, c = X.shape
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / (n - 1)
    evals, vecs = np.linalg.eigh(cov)
    evals, vecs = _order_eigenpairs(evals, vecs.T)
    evals = np.clip(evals, 0.0, None)
    total = float(evals.sum())
    if total <= 0.0:
        ratios = np.zeros(c)
        ratios[0] = 1.0
    else:
        ratios = evals / total
    return PCABasis(
        mean=mean,
        components=vecs,
        explained_variance_ratio=ratios,
        eigenvalues=evals,
    )


def project(basis: PCABasis, samples) -> np.ndarray:
    """Map rows into the basis: (samples - mean) @ components^T."""
    X = np.asarray(samples, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != basis.dim:
        raise DimensionMismatch(
            f"sample width {X.shape[1]} != basis dimension {basis.dim}"
        )
    out = (X - basis.mean) @ basis.components.T
    return out[0] if single else out


def reconstruct(basis: PCABasis, projected) -> np.ndarray:
    """Inverse of project on the retained subspace."""
    P = np.asarray(projected, dtype=float)
    single = P.ndim == 1
    if single:
        P = P[None, :]
    if P.shape[1] != basis.n_components:
        raise DimensionMismatch(
            f"projection width {P.shape[1]} != component count {basis.n_components}"
        )
    out = basis.mean + P @ basis.components
    return out[0] if single else out
