"""Snapshot POD over the collocation ensemble.

Snapshots (one per collocation node) are centered by subtracting the
ensemble mean, stacked as columns, and decomposed. Two routes produce the
same thin SVD: direct bidiagonalization, and the Gram route (eigenvalues of
S^T S), which is much cheaper when the spatial dimension dominates; the one
not used in production doubles as the test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, ShapeError

__all__ = [
    "SnapshotMatrix",
    "PodResult",
    "center_snapshots",
    "pod_svd",
    "gram_singular_values",
    "cef",
    "k_at",
]

# Below this ratio of spatial size to snapshot count the direct route wins.
_GRAM_CROSSOVER = 8


@dataclass
class SnapshotMatrix:
    """Centered snapshots as columns; provenance records what was stacked."""

    data: np.ndarray  # (n_space, L)
    provenance: str = ""

    @property
    def L(self) -> int:
        return self.data.shape[1]


@dataclass
class PodResult:
    """Singular values (descending), orthonormal spatial modes, provenance."""

    singular_values: np.ndarray
    modes: np.ndarray  # (n_space, rank)
    provenance: str = ""

    @property
    def energies(self) -> np.ndarray:
        return self.singular_values**2


def center_snapshots(snapshots, provenance: str = "") -> SnapshotMatrix:
    """Stack equal-shape fields as columns and subtract the ensemble mean."""
    arrays = [np.asarray(s, dtype=np.float64).ravel() for s in snapshots]
    if len(arrays) < 2:
        raise ShapeError("need at least two snapshots")
    size = arrays[0].size
    if any(a.size != size for a in arrays):
        raise ShapeError("snapshots differ in shape")
    data = np.column_stack(arrays)
    data -= data.mean(axis=1, keepdims=True)
    return SnapshotMatrix(data=data, provenance=provenance)


def pod_svd(snap: SnapshotMatrix, method: str = "auto") -> PodResult:
    """Thin SVD of the centered matrix; route picked by shape unless forced."""
    S = snap.data
    n_space, L = S.shape
    if method == "auto":
        method = "gram" if n_space > _GRAM_CROSSOVER * L else "direct"

    if method == "direct":
        try:
            W, s, _ = np.linalg.svd(S, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(f"SVD did not converge: {exc}") from exc
        return PodResult(singular_values=s, modes=W, provenance=snap.provenance)

    if method != "gram":
        raise ValueError(f"unknown method {method!r}")
    try:
        evals, evecs = np.linalg.eigh(S.T @ S)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"Gram eigendecomposition failed: {exc}") from exc
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    s = np.sqrt(np.maximum(evals, 0.0))
    # Modes are recoverable only for nonzero singular values.
    nz = s > (s[0] * 1e-14 if s.size and s[0] > 0 else 0.0)
    modes = (S @ evecs[:, nz]) / s[nz]
    return PodResult(singular_values=s, modes=modes, provenance=snap.provenance)


def gram_singular_values(snap: SnapshotMatrix) -> np.ndarray:
    """Independent oracle: singular values via the Gram eigenvalues."""
    evals = np.linalg.eigvalsh(snap.data.T @ snap.data)
    return np.sqrt(np.maximum(evals[::-1], 0.0))


def cef(result: PodResult, k: int) -> float:
    """Cumulative energy fraction of the leading k modes (0 if no energy)."""
    s2 = result.energies
    if k < 0 or k > s2.size:
        raise IndexError(f"k must lie in 0..{s2.size}")
    total = float(s2.sum())
    if total <= 0.0:
        return 0.0
    return float(s2[:k].sum() / total)


def k_at(result: PodResult, threshold: float = 0.95, noise_floor: float | None = None) -> int:
    """Minimal k with CEF(k) >= threshold; 0 for zero-energy data.

    noise_floor, if given, zeroes singular values below noise_floor * s_1
    before accounting (for exact-rank synthetic cases; never used on real
    data).
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    s2 = result.energies.copy()
    if noise_floor is not None and s2.size and s2[0] > 0:
        s2[result.singular_values < noise_floor * result.singular_values[0]] = 0.0
    total = s2.sum()
    if total <= 0.0:
        return 0
    frac = np.cumsum(s2) / total
    return int(np.searchsorted(frac, threshold - 1e-15) + 1)
