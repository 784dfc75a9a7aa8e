"""Independent reference implementations used by the tests."""

import mpmath
import numpy as np
import scipy.linalg as la


def random_spd_sqrt(n, rng, cond=10.0):
    """Symmetric square root of a random SPD matrix with bounded condition."""
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    evals = np.exp(rng.uniform(0, np.log(cond), n))
    return (U * np.sqrt(evals)) @ U.T


def random_regression(rng, m=None, d=None):
    """Well-conditioned instance (D, z, W_sqrt, gamma) with m' <= 50, d <= 12."""
    d = d or int(rng.integers(1, 13))
    m = m or int(rng.integers(d, 51))
    D = rng.standard_normal((m, d))
    z = rng.standard_normal(m)
    Ws = random_spd_sqrt(m, rng)
    gamma = rng.uniform(0.05, 2.0, d)
    return D, z, Ws, gamma


def normal_equations(D, z, W_sqrt, gamma, dps=40):
    """Posterior mean and covariance by explicit inversion in high precision.

    Sigma = (D^T W D + Gamma^T Gamma)^{-1}, mu = Sigma D^T W z with
    W = W_sqrt W_sqrt and Gamma = diag(gamma).
    """
    with mpmath.workdps(dps):
        Dm = mpmath.matrix(D.tolist())
        Wh = mpmath.matrix(W_sqrt.tolist())
        W = Wh * Wh
        g = np.broadcast_to(np.asarray(gamma, dtype=float), (D.shape[1],))
        G = Dm.T * W * Dm
        for i, gi in enumerate(g):
            G[i, i] += mpmath.mpf(float(gi))**2
        S = G**-1
        mu = S * Dm.T * W * mpmath.matrix(z.tolist())
        return (np.array(mu.tolist(), dtype=float).ravel(),
                np.array(S.tolist(), dtype=float),
                np.array(G.tolist(), dtype=float))


def gram(D, W_sqrt, gamma):
    WD = W_sqrt @ D
    return WD.T @ WD + np.diag(np.broadcast_to(gamma, (D.shape[1],))**2)


def block_diag(*blocks):
    return la.block_diag(*blocks)
