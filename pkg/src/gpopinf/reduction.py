"""Centered POD bases and compression to reduced coordinates."""

__all__ = [
    "RankDeficient",
    "ReducedBasis",
    "pod_basis",
    "compress",
    "reconstruct",
    "projection_error",
]

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la


class RankDeficient(ValueError):
    """Fewer nonzero singular values than the requested basis size."""


@dataclass
class ReducedBasis:
    """Rank-r affine approximation q ~ V q_hat + q_bar.

    Attributes
    ----------
    V : (N, r) ndarray
        Orthonormal basis columns.
    q_bar : (N,) ndarray
        Mean snapshot used for centering.
    singular_values : (min(N, k),) ndarray
        All singular values of the centered snapshot matrix.
    """

    V: np.ndarray
    q_bar: np.ndarray
    singular_values: np.ndarray

    @property
    def r(self):
        return self.V.shape[1]

    @property
    def N(self):
        return self.V.shape[0]


def pod_basis(snapshots, r):
    """Compute a centered POD basis of dimension ``r``.

    Parameters
    ----------
    snapshots : (N, k) array_like
        Snapshot matrix, one state per column. For several trajectories pass
        the column-concatenation of all of them.
    r : int
        Number of basis vectors.

    Returns
    -------
    ReducedBasis
    """
    Q = np.asarray(snapshots, dtype=float)
    if Q.ndim != 2:
        raise ValueError("snapshots must be a 2D array")
    if not np.all(np.isfinite(Q)):
        raise ValueError("snapshots must be finite")
    r = int(r)
    if not 1 <= r <= min(Q.shape):
        raise ValueError(f"r={r} outside [1, {min(Q.shape)}]")

    q_bar = Q.mean(axis=1)
    U, svals, _ = la.svd(Q - q_bar[:, None], full_matrices=False,
                         lapack_driver="gesdd")
    tol = 1e-12 * (svals[0] if svals.size else 0.0)
    if svals[r - 1] <= tol:
        rank = int(np.sum(svals > tol))
        raise RankDeficient(
            f"centered snapshots have rank {rank} < r={r}")

    V = U[:, :r].copy()
    # Fix the sign so that each column's largest-magnitude entry is positive.
    pivots = np.argmax(np.abs(V), axis=0)
    V *= np.sign(V[pivots, np.arange(r)])
    return ReducedBasis(V=V, q_bar=q_bar, singular_values=svals)


def _check_rows(array, nrows, what):
    array = np.asarray(array, dtype=float)
    if array.shape[0] != nrows:
        raise ValueError(
            f"{what} has {array.shape[0]} rows, expected {nrows}")
    return array


def compress(basis, snapshots):
    """Return V^T (snapshots - q_bar) for (N,) or (N, k) input."""
    Q = _check_rows(snapshots, basis.N, "snapshots")
    if Q.ndim == 1:
        return basis.V.T @ (Q - basis.q_bar)
    return basis.V.T @ (Q - basis.q_bar[:, None])


def reconstruct(basis, reduced):
    """Return V reduced + q_bar for (r,) or (r, k) input."""
    X = _check_rows(reduced, basis.r, "reduced states")
    if X.ndim == 1:
        return basis.V @ X + basis.q_bar
    return basis.V @ X + basis.q_bar[:, None]


def projection_error(basis, snapshots):
    """Frobenius norm of the part of ``snapshots - q_bar`` outside span(V)."""
    Q = _check_rows(snapshots, basis.N, "snapshots")
    return la.norm(Q - reconstruct(basis, compress(basis, Q)))
