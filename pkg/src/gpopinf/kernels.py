"""Squared-exponential kernel, its time derivatives, and GP block assembly."""

__all__ = [
    "KernelHyperparams",
    "KernelBlocks",
    "kernel_eval",
    "kernel_d1",
    "kernel_d1d2",
    "assemble_blocks",
]

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelHyperparams:
    """Hyperparameters of a one-dimensional squared-exponential GP.

    Parameters
    ----------
    signal_variance : float
        Kernel amplitude sigma^2 > 0.
    lengthscale : float
        Correlation length ell > 0 (time units).
    noise_variance : float
        Variance chi >= 0 of the additive white observation noise.
    """

    signal_variance: float
    lengthscale: float
    noise_variance: float = 0.0

    def __post_init__(self):
        if not self.signal_variance > 0:
            raise ValueError(
                f"signal_variance must be positive, got {self.signal_variance}")
        if not self.lengthscale > 0:
            raise ValueError(
                f"lengthscale must be positive, got {self.lengthscale}")
        if not self.noise_variance >= 0:
            raise ValueError(
                f"noise_variance must be nonnegative, got {self.noise_variance}")

    def to_dict(self):
        return {
            "signal_variance": float(self.signal_variance),
            "lengthscale": float(self.lengthscale),
            "noise_variance": float(self.noise_variance),
        }


@dataclass(frozen=True)
class KernelBlocks:
    """Covariance blocks of the joint (state, derivative) process.

    Kyy : (m, m) state covariance at observation times, noise included.
    Kzy : (m', m) cross covariance, derivative at estimation times vs. state
        at observation times.
    Kzz : (m', m') derivative covariance at estimation times.
    """

    Kyy: np.ndarray
    Kzy: np.ndarray
    Kzz: np.ndarray


def _diff(t1, t2):
    return np.subtract.outer(np.asarray(t1, dtype=float),
                             np.asarray(t2, dtype=float))


def kernel_eval(t1, t2, hp):
    """Evaluate sigma^2 exp(-(t1 - t2)^2 / (2 ell^2)).

    Scalars give a scalar; arrays give the outer-product matrix
    ``K[a, b] = kappa(t1[a], t2[b])``.
    """
    delta = _diff(t1, t2)
    return hp.signal_variance * np.exp(-0.5 * (delta / hp.lengthscale)**2)


def kernel_d1(t1, t2, hp):
    """Partial derivative of the kernel with respect to its first argument."""
    delta = _diff(t1, t2)
    ell2 = hp.lengthscale**2
    return -hp.signal_variance * delta / ell2 * np.exp(-0.5 * delta**2 / ell2)


def kernel_d1d2(t1, t2, hp):
    """Mixed second derivative d^2 kappa / (dt1 dt2)."""
    delta = _diff(t1, t2)
    ell2 = hp.lengthscale**2
    return (hp.signal_variance * (1.0 / ell2 - delta**2 / ell2**2)
            * np.exp(-0.5 * delta**2 / ell2))


def assemble_blocks(t_obs, t_est, hp):
    """Build the Kyy, Kzy, Kzz blocks for observation and estimation grids.

    Parameters
    ----------
    t_obs : (m,) array_like
        Observation times.
    t_est : (m',) array_like
        Estimation times.
    hp : KernelHyperparams

    Returns
    -------
    KernelBlocks
    """
    t_obs = np.atleast_1d(np.asarray(t_obs, dtype=float))
    t_est = np.atleast_1d(np.asarray(t_est, dtype=float))
    if t_obs.size == 0 or t_est.size == 0:
        raise ValueError("time vectors must be nonempty")
    Kyy = kernel_eval(t_obs, t_obs, hp)
    Kyy[np.diag_indices_from(Kyy)] += hp.noise_variance
    return KernelBlocks(
        Kyy=Kyy,
        Kzy=kernel_d1(t_est, t_obs, hp),
        Kzz=kernel_d1d2(t_est, t_est, hp),
    )
