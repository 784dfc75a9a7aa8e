"""One-dimensional GP regression with analytic time-derivative estimates.

Each reduced mode (or ODE state component) gets its own zero-mean GP with a
squared-exponential kernel. After maximizing the marginal likelihood, the GP
supplies smoothed states and derivative estimates on a uniform estimation
grid, plus the square root of the weight matrix W^zz, the inverse posterior
covariance of the derivative estimate.
"""

__all__ = [
    "FitConfig",
    "EstimationGrid",
    "GPEstimate",
    "NonPositiveEigenvalue",
    "neg_log_marginal_likelihood",
    "fit_hyperparameters",
    "gp_fit",
]

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.optimize
import scipy.stats.qmc

from .kernels import KernelHyperparams, assemble_blocks, kernel_eval

_LOG2PI = np.log(2 * np.pi)
_BAD_OBJECTIVE = 1e25


class NonPositiveEigenvalue(np.linalg.LinAlgError):
    """The regularized derivative covariance is not positive definite."""


@dataclass(frozen=True)
class FitConfig:
    """Settings for marginal-likelihood maximization.

    Bounds are in natural-log space. The signal and noise variance bounds
    are offsets relative to the data's second moment; the lengthscale is
    bounded above by ``lengthscale_span_factor`` times the observation
    window and below by the mean observation spacing
    (``lengthscale_floor="mean_spacing"``) or the smallest one
    (``"min_spacing"``). With irregular times the smallest spacing admits a
    near-white-noise fit whose derivative estimates are meaningless between
    samples.
    """

    n_starts: int = 8
    seed: int = 0
    log_signal_bounds: tuple = (-12.0, 12.0)
    log_noise_bounds: tuple = (-16.0, 4.0)
    lengthscale_span_factor: float = 10.0
    maxiter: int = 200
    lengthscale_floor: str = "mean_spacing"

    def __post_init__(self):
        if self.lengthscale_floor not in ("mean_spacing", "min_spacing"):
            raise ValueError("lengthscale_floor must be 'mean_spacing' or "
                             "'min_spacing'")


@dataclass(frozen=True)
class EstimationGrid:
    """Observation times and the uniform estimation grid spanning them."""

    t_obs: np.ndarray
    t_est: np.ndarray

    @classmethod
    def uniform(cls, t_obs, m_est):
        t_obs = np.sort(np.asarray(t_obs, dtype=float))
        if m_est < 2:
            raise ValueError("estimation grid needs at least 2 points")
        return cls(t_obs, np.linspace(t_obs[0], t_obs[-1], int(m_est)))


@dataclass
class GPEstimate:
    """GP output on the estimation grid for one scalar signal.

    Attributes
    ----------
    t_est : (m',) ndarray
        Estimation times.
    y_tilde : (m',) ndarray
        Posterior mean of the state.
    z_tilde : (m',) ndarray
        Posterior mean of the time derivative.
    w_sqrt : (m', m') ndarray
        Symmetric square root of the derivative weight matrix.
    hp : KernelHyperparams
        Hyperparameters used for the fit.
    tau : float
        Diagonal regularization actually applied (after any escalation).
    """

    t_est: np.ndarray
    y_tilde: np.ndarray
    z_tilde: np.ndarray
    w_sqrt: np.ndarray
    hp: KernelHyperparams
    tau: float = field(default=1e-8)


def _as_obs(t_obs, y):
    t_obs = np.atleast_1d(np.asarray(t_obs, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if t_obs.shape != y.shape or t_obs.ndim != 1:
        raise ValueError(
            f"t_obs {t_obs.shape} and y {y.shape} must be equal-length vectors")
    if not (np.all(np.isfinite(t_obs)) and np.all(np.isfinite(y))):
        raise ValueError("observations must be finite")
    return t_obs, y


def _cholesky(K):
    try:
        cho = la.cho_factor(K, lower=True, check_finite=False)
    except la.LinAlgError as ex:
        raise np.linalg.LinAlgError(
            "state covariance Kyy is numerically singular") from ex
    pivots = np.diag(cho[0])**2
    if pivots.min() <= K.shape[0] * np.finfo(float).eps * np.max(np.diag(K)):
        raise np.linalg.LinAlgError(
            "state covariance Kyy is numerically singular")
    return cho


def neg_log_marginal_likelihood(hp, t_obs, y):
    """Negative log marginal likelihood of ``y`` under the GP prior.

    Returns ``0.5 y^T Kyy^{-1} y + 0.5 log|Kyy| + (m/2) log(2 pi)``.
    Raises ``numpy.linalg.LinAlgError`` if Kyy is numerically singular.
    """
    t_obs, y = _as_obs(t_obs, y)
    Kyy = kernel_eval(t_obs, t_obs, hp)
    Kyy[np.diag_indices_from(Kyy)] += hp.noise_variance
    cho = _cholesky(Kyy)
    alpha = la.cho_solve(cho, y, check_finite=False)
    logdet = 2 * np.sum(np.log(np.diag(cho[0])))
    return 0.5 * y @ alpha + 0.5 * logdet + 0.5 * y.size * _LOG2PI


def _objective(theta, t_obs, y, sqdist):
    """NLL and its gradient with respect to (log sigma^2, log ell, log chi)."""
    s2, ell, chi = np.exp(theta)
    E = np.exp(-0.5 * sqdist / ell**2)
    K = s2 * E
    K[np.diag_indices_from(K)] += chi
    try:
        cho = la.cho_factor(K, lower=True, check_finite=False)
    except la.LinAlgError:
        return _BAD_OBJECTIVE, np.zeros(3)
    alpha = la.cho_solve(cho, y, check_finite=False)
    logdet = 2 * np.sum(np.log(np.diag(cho[0])))
    value = 0.5 * y @ alpha + 0.5 * logdet + 0.5 * y.size * _LOG2PI
    if not np.isfinite(value):
        return _BAD_OBJECTIVE, np.zeros(3)

    # dNLL/dtheta = 0.5 tr((K^{-1} - alpha alpha^T) dK/dtheta)
    Kinv, info = la.lapack.dpotri(cho[0], lower=1)
    if info != 0:
        return _BAD_OBJECTIVE, np.zeros(3)
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    inner = Kinv - np.outer(alpha, alpha)
    dK_s2 = s2 * E
    dK_ell = dK_s2 * sqdist / ell**2
    grad = 0.5 * np.array([
        np.sum(inner * dK_s2),
        np.sum(inner * dK_ell),
        chi * np.trace(inner),
    ])
    return value, grad


def _bounds(t_obs, y, config):
    scale = float(np.mean(y**2))
    if not scale > 0:
        scale = 1.0
    ts = np.unique(t_obs)
    span = ts[-1] - ts[0] if ts.size > 1 else 1.0
    if ts.size < 2:
        dt_min = span
    elif config.lengthscale_floor == "mean_spacing":
        dt_min = span / (ts.size - 1)
    else:
        dt_min = np.min(np.diff(ts))
    log_scale = np.log(scale)
    lo_s, hi_s = config.log_signal_bounds
    lo_n, hi_n = config.log_noise_bounds
    return np.array([
        (log_scale + lo_s, log_scale + hi_s),
        (np.log(dt_min), np.log(config.lengthscale_span_factor * span)),
        (log_scale + lo_n, log_scale + hi_n),
    ])


def fit_hyperparameters(t_obs, y, config=None):
    """Maximize the marginal likelihood by multi-start L-BFGS-B.

    Starts are a scrambled Sobol sample of the log-parameter box, seeded by
    ``config.seed``. The best point among all starts and all local optima is
    returned.

    Parameters
    ----------
    t_obs : (m,) array_like
    y : (m,) array_like
    config : FitConfig or None

    Returns
    -------
    KernelHyperparams
    """
    config = config or FitConfig()
    t_obs, y = _as_obs(t_obs, y)
    bounds = _bounds(t_obs, y, config)
    sqdist = np.subtract.outer(t_obs, t_obs)**2

    sobol = scipy.stats.qmc.Sobol(d=3, scramble=True, seed=config.seed)
    # draw a power of two (balanced Sobol set) and keep the first n_starts
    n_pow2 = 1 << max(int(config.n_starts) - 1, 0).bit_length()
    unit = sobol.random(n_pow2)[:config.n_starts]
    starts = bounds[:, 0] + unit * (bounds[:, 1] - bounds[:, 0])

    best_theta, best_value = None, np.inf
    for theta0 in starts:
        value0, _ = _objective(theta0, t_obs, y, sqdist)
        if value0 < best_value:
            best_theta, best_value = theta0, value0
        res = scipy.optimize.minimize(
            _objective, theta0, args=(t_obs, y, sqdist), jac=True,
            method="L-BFGS-B", bounds=bounds,
            options={"maxiter": config.maxiter},
        )
        if np.isfinite(res.fun) and res.fun < best_value:
            best_theta, best_value = res.x, res.fun

    if best_theta is None or best_value >= _BAD_OBJECTIVE:
        raise RuntimeError("marginal likelihood is non-finite at every start")
    s2, ell, chi = np.exp(best_theta)
    return KernelHyperparams(float(s2), float(ell), float(chi))


def gp_fit(t_obs, y, t_est, tau=1e-8, config=None, hp=None, tau_max=1e-2):
    """Fit a GP to ``(t_obs, y)`` and estimate state and derivative at
    ``t_est``.

    Parameters
    ----------
    t_obs : (m,) array_like
        Observation times.
    y : (m,) array_like
        Observed values.
    t_est : (m',) array_like
        Estimation times.
    tau : float
        Initial diagonal regularization of the derivative covariance.
        Multiplied by 10 until all eigenvalues are positive, up to
        ``tau_max``.
    config : FitConfig or None
        Hyperparameter search settings (ignored if ``hp`` is given).
    hp : KernelHyperparams or None
        Fixed hyperparameters; skips the likelihood maximization.

    Returns
    -------
    GPEstimate
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    t_obs, y = _as_obs(t_obs, y)
    t_est = np.atleast_1d(np.asarray(t_est, dtype=float))
    if hp is None:
        hp = fit_hyperparameters(t_obs, y, config)

    blocks = assemble_blocks(t_obs, t_est, hp)
    cho = _cholesky(blocks.Kyy)
    alpha = la.cho_solve(cho, y, check_finite=False)
    y_tilde = kernel_eval(t_est, t_obs, hp) @ alpha
    z_tilde = blocks.Kzy @ alpha
    C = blocks.Kzy @ la.cho_solve(cho, blocks.Kzy.T, check_finite=False)
    base = blocks.Kzz - 0.5 * (C + C.T)

    eye = np.eye(t_est.size)
    while True:
        evals, evecs = la.eigh(base + tau * eye)
        if evals[0] > 0:
            break
        if tau * 10 > tau_max * (1 + 1e-12):
            raise NonPositiveEigenvalue(
                f"smallest eigenvalue {evals[0]:.3e} <= 0 with tau={tau:.0e}")
        tau *= 10

    w_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    w_sqrt = 0.5 * (w_sqrt + w_sqrt.T)
    return GPEstimate(t_est, y_tilde, z_tilde, w_sqrt, hp, tau)
