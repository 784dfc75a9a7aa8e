"""Gaussian posteriors for operator rows and ODE parameter vectors.

Each row o_i of the operator matrix has posterior N(mu_i, Sigma_i) with

    mu_i    = argmin ||W^{1/2} (D eta - z_i)||^2 + ||Gamma eta||^2
    Sigma_i = (D^T W D + Gamma^T Gamma)^{-1}

The mean is computed from the stacked 2-norm problem by a pivoted QR
factorization (never the normal equations); the covariance reuses the
triangular factor.
"""

__all__ = [
    "SingularSystem",
    "RegressionBundle",
    "OperatorPosterior",
    "expand_gamma",
    "op_post",
    "op_post_all",
    "stack_trajectories",
    "stack_modes_for_ode",
    "standard_draws",
    "sample_operator_matrix",
    "operator_matrices_from_draws",
]

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la


class SingularSystem(np.linalg.LinAlgError):
    """The regularized least-squares system is rank deficient."""


@dataclass
class RegressionBundle:
    """Arguments of one generalized least-squares regression.

    Attributes
    ----------
    data_matrix : (n, d) ndarray
        Rows of the (possibly stacked) data matrix.
    z_tilde : (n,) ndarray
        Stacked derivative estimates.
    w_blocks : list of square ndarrays
        Diagonal blocks of the block-diagonal W^{1/2}; sizes sum to n.
    """

    data_matrix: np.ndarray
    z_tilde: np.ndarray
    w_blocks: list

    def __post_init__(self):
        self.data_matrix = np.atleast_2d(np.asarray(self.data_matrix,
                                                    dtype=float))
        self.z_tilde = np.asarray(self.z_tilde, dtype=float).ravel()
        if isinstance(self.w_blocks, np.ndarray):
            self.w_blocks = [self.w_blocks]
        self.w_blocks = [np.atleast_2d(np.asarray(W, dtype=float))
                         for W in self.w_blocks]
        n = self.data_matrix.shape[0]
        sizes = [W.shape[0] for W in self.w_blocks]
        if any(W.shape[0] != W.shape[1] for W in self.w_blocks):
            raise ValueError("weight blocks must be square")
        if self.z_tilde.size != n or sum(sizes) != n:
            raise ValueError(
                f"inconsistent rows: data matrix {n}, z_tilde "
                f"{self.z_tilde.size}, weight blocks {sum(sizes)}")

    @property
    def d(self):
        return self.data_matrix.shape[1]

    @property
    def w_sqrt(self):
        """Dense block-diagonal W^{1/2}."""
        return la.block_diag(*self.w_blocks)

    def weighted(self):
        """Return (W^{1/2} D, W^{1/2} z), applied block by block."""
        WD, Wz, start = [], [], 0
        for W in self.w_blocks:
            rows = slice(start, start + W.shape[0])
            WD.append(W @ self.data_matrix[rows])
            Wz.append(W @ self.z_tilde[rows])
            start += W.shape[0]
        return np.vstack(WD), np.concatenate(Wz)

    def objective(self, eta, gamma):
        """Value of the regularized generalized least-squares objective."""
        WD, Wz = self.weighted()
        g = expand_gamma(gamma, self.d)
        return float(np.sum((WD @ eta - Wz)**2) + np.sum((g * eta)**2))


@dataclass
class OperatorPosterior:
    """Gaussian N(mean, covariance) over one operator row."""

    mean: np.ndarray
    covariance: np.ndarray

    @property
    def d(self):
        return self.mean.size

    def cholesky(self):
        """Lower-triangular factor L with L L^T = covariance."""
        try:
            return np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError as ex:
            raise np.linalg.LinAlgError(
                "posterior covariance is not positive definite") from ex

    @property
    def std(self):
        return np.sqrt(np.diag(self.covariance))


def expand_gamma(gamma, d):
    """Broadcast a scalar or length-d prior parameter to a length-d vector."""
    g = np.asarray(gamma, dtype=float)
    if g.ndim == 0:
        g = np.full(d, float(g))
    if g.shape != (d,):
        raise ValueError(f"gamma has shape {g.shape}, expected ({d},)")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("gamma entries must be finite and nonnegative")
    return g


def op_post(bundle, gamma):
    """Posterior moments for one operator row.

    Parameters
    ----------
    bundle : RegressionBundle
    gamma : float or (d,) array_like
        Diagonal of Gamma (a scalar is replicated).

    Returns
    -------
    OperatorPosterior
    """
    d = bundle.d
    g = expand_gamma(gamma, d)
    WD, Wz = bundle.weighted()
    A = np.vstack([WD, np.diag(g)])
    b = np.concatenate([Wz, np.zeros(d)])
    if A.shape[0] < d:
        raise SingularSystem(f"{A.shape[0]} rows for {d} unknowns")

    Qf, R, perm = la.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0 or diag[-1] <= max(A.shape) * np.finfo(float).eps \
            * diag[0]:
        raise SingularSystem(
            "stacked regression matrix is rank deficient "
            f"(|R| ratio {diag[-1] / diag[0] if diag[0] else 0:.2e})")

    eta = np.empty(d)
    eta[perm] = la.solve_triangular(R, Qf.T @ b)
    Rinv = la.solve_triangular(R, np.eye(d))
    cov_p = Rinv @ Rinv.T
    inv = np.argsort(perm)
    cov = cov_p[np.ix_(inv, inv)]
    cov = 0.5 * (cov + cov.T)
    return OperatorPosterior(mean=eta, covariance=cov)


def op_post_all(bundles, gammas):
    """Independent posteriors for every row; errors carry the row index."""
    if len(bundles) != len(gammas):
        raise ValueError(f"{len(bundles)} bundles but {len(gammas)} gammas")
    out = []
    for i, (bundle, gamma) in enumerate(zip(bundles, gammas)):
        try:
            out.append(op_post(bundle, gamma))
        except SingularSystem as ex:
            raise SingularSystem(f"row {i}: {ex}") from ex
    return out


def _parts(item):
    if isinstance(item, RegressionBundle):
        return item.data_matrix, item.z_tilde, item.w_blocks
    D, z, W = item
    return D, z, [W] if isinstance(W, np.ndarray) else list(W)


def stack_trajectories(per_traj):
    """Row-stack several trajectories' regressions for the same row.

    Parameters
    ----------
    per_traj : list of RegressionBundle or (D, z_tilde, w_sqrt) tuples

    Returns
    -------
    RegressionBundle with concatenated D and z and block-diagonal weights.
    """
    parts = [_parts(item) for item in per_traj]
    if not parts:
        raise ValueError("no trajectories to stack")
    widths = {np.atleast_2d(D).shape[1] for D, _, _ in parts}
    if len(widths) != 1:
        raise ValueError(f"inconsistent data matrix widths {sorted(widths)}")
    return RegressionBundle(
        data_matrix=np.vstack([D for D, _, _ in parts]),
        z_tilde=np.concatenate([np.ravel(z) for _, z, _ in parts]),
        w_blocks=[W for _, _, blocks in parts for W in blocks],
    )


def stack_modes_for_ode(per_mode, structure_rows):
    """Bundle for a parameter vector shared by all state equations.

    Parameters
    ----------
    per_mode : list of r (z_tilde, w_sqrt) pairs
        Derivative estimates and weight roots for each state component.
    structure_rows : (r m', d) array_like
        Structure-matrix rows ordered mode-major (all estimation times of
        component 1, then component 2, ...).
    """
    D = np.atleast_2d(np.asarray(structure_rows, dtype=float))
    z = np.concatenate([np.ravel(zi) for zi, _ in per_mode])
    if z.size != D.shape[0]:
        raise ValueError(f"{z.size} derivative rows but {D.shape[0]} "
                         "structure rows")
    return RegressionBundle(D, z, [W for _, W in per_mode])


def standard_draws(n_samples, r, d, rng_seed):
    """Standard normal draws of shape (n_samples, r, d) from a fixed seed."""
    rng = np.random.default_rng(rng_seed)
    return rng.standard_normal((n_samples, r, d))


def operator_matrices_from_draws(posteriors, draws):
    """Map standard normal draws (n, r, d) to operator samples mu + L xi."""
    draws = np.asarray(draws, dtype=float)
    out = np.empty_like(draws)
    for i, post in enumerate(posteriors):
        L = post.cholesky()
        out[:, i, :] = post.mean + draws[:, i, :] @ L.T
    return out


def sample_operator_matrix(posteriors, rng_seed, n_samples=None):
    """Draw operator matrices with rows independent N(mu_i, Sigma_i).

    Returns an (r, d) matrix, or (n_samples, r, d) if ``n_samples`` is
    given. Deterministic for a given seed.
    """
    ds = {post.d for post in posteriors}
    if len(ds) != 1:
        raise ValueError("posterior rows must share the same dimension")
    n = 1 if n_samples is None else int(n_samples)
    draws = standard_draws(n, len(posteriors), ds.pop(), rng_seed)
    samples = operator_matrices_from_draws(posteriors, draws)
    return samples[0] if n_samples is None else samples
