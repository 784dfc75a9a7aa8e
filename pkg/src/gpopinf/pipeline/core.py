"""GP-smoothed Bayesian operator inference, end to end.

Three entry points share the same stages (GP smoothing, regression
assembly, prior selection, posterior):

* :func:`gp_bayes_opinf`: one trajectory, POD-reduced polynomial ROM.
* :func:`gp_bayes_opinf_multi`: several trajectories sharing one operator.
* :func:`gp_bayes_odes`: parameters of a structured ODE observed directly.

:func:`predict` samples the posterior and summarizes the sampled solutions.
"""

__all__ = [
    "PipelineError",
    "FitResult",
    "PredictionSummary",
    "fit_modes",
    "gp_bayes_opinf",
    "gp_bayes_opinf_multi",
    "gp_bayes_odes",
    "sample_draws",
    "predict",
]

from dataclasses import dataclass, field

import numpy as np

from ..gp import EstimationGrid, FitConfig, gp_fit
from ..inference import (RegressionBundle, op_post_all,
                         operator_matrices_from_draws, stack_modes_for_ode,
                         stack_trajectories)
from ..reduction import compress, pod_basis
from ..rom import IntegratorConfig, PolynomialROM, StructuredODE, \
    simulate_each
from ..selection import (SelectionConfig, SelectionTarget,
                         select_prior_variance)
from ..structure import build_data_matrix


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError) \
                and isinstance(exc, Exception):
            raise PipelineError(self.name, f"{type(exc).__name__}: {exc}") \
                from exc
        return False


@dataclass
class FitResult:
    """Everything produced by a fit.

    Attributes
    ----------
    model : PolynomialROM or StructuredODE
    posteriors : list of OperatorPosterior
    gamma : float or ndarray
        Prior parameter used for the final posterior.
    estimates : list of list of GPEstimate
        ``estimates[l][i]`` is mode i of trajectory l.
    targets : list of SelectionTarget
        GP state estimates (r, m') per trajectory.
    bundles : list of RegressionBundle
    basis : ReducedBasis or None
    selection : SelectionResult or None
        None if ``gamma`` was supplied.
    """

    model: object
    posteriors: list
    gamma: object
    estimates: list
    targets: list
    bundles: list
    basis: object = None
    selection: object = None

    @property
    def q0_hat(self):
        """Initial conditions (GP estimates at the first estimation time)."""
        return [t.gp_states[:, 0] for t in self.targets]


@dataclass
class PredictionSummary:
    """Pointwise statistics of sampled solutions.

    Attributes
    ----------
    times : (n_t,) ndarray
    mean : (n_var, n_t) ndarray
    q025, q975 : (n_var, n_t) ndarray
        Type-7 (linear interpolation) quantiles.
    n_samples : int
        Samples requested.
    n_failed : int
        Samples whose integration failed (excluded).
    samples : (n_ok, n_var, n_t) ndarray or None
        Retained only on request.
    """

    times: np.ndarray
    mean: np.ndarray
    q025: np.ndarray
    q975: np.ndarray
    n_samples: int
    n_failed: int = 0
    samples: np.ndarray = field(default=None, repr=False)

    @property
    def failure_fraction(self):
        return self.n_failed / self.n_samples


def fit_modes(t_obs, Y, m_est, fit_config=None, tau=1e-8, t_est=None):
    """Independent GP fits for each row of ``Y``.

    Parameters
    ----------
    t_obs : (m,) array_like or list of arrays (one per row)
    Y : (r, m) array_like or list of arrays (one per row)
    m_est : int
        Size of the uniform estimation grid (ignored if ``t_est`` given).
    fit_config : FitConfig or None
    tau : float
    t_est : (m',) array_like or None

    Returns
    -------
    list of GPEstimate
    """
    rows = list(Y)
    if isinstance(t_obs, (list, tuple)) and len(t_obs) \
            and np.ndim(t_obs[0]) == 1:
        times = [np.asarray(t, dtype=float) for t in t_obs]
    else:
        times = [np.asarray(t_obs, dtype=float)] * len(rows)
    if t_est is None:
        lo = min(t.min() for t in times)
        hi = max(t.max() for t in times)
        t_est = EstimationGrid.uniform([lo, hi], m_est).t_est
    out = []
    for i, (t, y) in enumerate(zip(times, rows)):
        try:
            out.append(gp_fit(t, y, t_est, tau=tau, config=fit_config))
        except Exception as ex:
            raise PipelineError(f"gp mode {i}",
                                f"{type(ex).__name__}: {ex}") from ex
    return out


def _mode_bundles(estimates, structure, input_fn):
    t_est = estimates[0].t_est
    Q_tilde = np.array([e.y_tilde for e in estimates])
    inputs = None
    if structure.needs_inputs:
        inputs = np.column_stack([np.atleast_1d(input_fn(t))
                                  for t in t_est])
    D = build_data_matrix(Q_tilde, inputs, structure)
    bundles = [RegressionBundle(D, e.z_tilde, [e.w_sqrt]) for e in estimates]
    return bundles, SelectionTarget(Q_tilde, t_est, input_fn)


def _select_and_post(bundles, model, targets, selection, gamma, structure):
    result = None
    if gamma is None:
        with _stage("selection"):
            result = select_prior_variance(bundles, model, targets,
                                           selection, structure)
        gamma = result.gamma
    with _stage("posterior"):
        posteriors = op_post_all(bundles, [gamma] * len(bundles))
    return gamma, posteriors, result


def gp_bayes_opinf(snapshots, t_obs, structure, m_est=None, input_fn=None,
                   selection=None, fit_config=None, tau=1e-8, gamma=None):
    """Fit a Bayesian polynomial ROM to one observed trajectory.

    Parameters
    ----------
    snapshots : (N, m) array_like
        Observed (lifted, scaled) states at ``t_obs``.
    t_obs : (m,) array_like
    structure : ModelStructure
        ``structure.r`` sets the basis size.
    m_est : int or None
        Estimation grid size; defaults to 4 m.
    input_fn : callable or None
        ``input_fn(t) -> (p,)`` for structures with inputs.
    selection : SelectionConfig or None
    fit_config : FitConfig or None
    tau : float
        Initial weight-matrix regularization.
    gamma : float, array or None
        If given, skip the selection stage and use this prior parameter.

    Returns
    -------
    FitResult
    """
    selection = selection or SelectionConfig()
    fit_config = fit_config or FitConfig()
    t_obs = np.asarray(t_obs, dtype=float)
    m_est = int(m_est or 4 * t_obs.size)
    with _stage("basis"):
        basis = pod_basis(snapshots, structure.r)
    with _stage("compression"):
        Q_hat = compress(basis, snapshots)
    with _stage("gp"):
        estimates = fit_modes(t_obs, Q_hat, m_est, fit_config, tau)
    with _stage("regression"):
        bundles, target = _mode_bundles(estimates, structure, input_fn)
    model = PolynomialROM(structure)
    gamma, posteriors, result = _select_and_post(
        bundles, model, [target], selection, gamma, structure)
    return FitResult(model, posteriors, gamma, [estimates], [target],
                     bundles, basis, result)


def gp_bayes_opinf_multi(snapshots_list, t_obs_list, structure, m_est=None,
                         input_fns=None, selection=None, fit_config=None,
                         tau=1e-8, gamma=None):
    """Fit one Bayesian ROM to several trajectories.

    The basis is the POD of all snapshots side by side; each trajectory gets
    its own GP fits and estimation grid; regressions are row-stacked with
    block-diagonal weights; selection averages the error over trajectories.

    Parameters are as in :func:`gp_bayes_opinf` but per trajectory:
    ``snapshots_list``, ``t_obs_list`` and ``input_fns`` are lists of equal
    length. ``m_est`` defaults to 4 times each trajectory's m.
    """
    selection = selection or SelectionConfig()
    fit_config = fit_config or FitConfig()
    n_traj = len(snapshots_list)
    if n_traj < 1 or len(t_obs_list) != n_traj:
        raise ValueError("need one time vector per trajectory")
    input_fns = list(input_fns) if input_fns is not None \
        else [None] * n_traj
    if len(input_fns) != n_traj:
        raise ValueError("need one input function per trajectory")
    with _stage("basis"):
        basis = pod_basis(np.hstack(snapshots_list), structure.r)

    estimates, targets, per_traj = [], [], []
    for l, (Q, t_obs, u) in enumerate(zip(snapshots_list, t_obs_list,
                                          input_fns)):
        t_obs = np.asarray(t_obs, dtype=float)
        with _stage("compression"):
            Q_hat = compress(basis, Q)
        with _stage(f"gp trajectory {l}"):
            est = fit_modes(t_obs, Q_hat, int(m_est or 4 * t_obs.size),
                            fit_config, tau)
        with _stage("regression"):
            bundles_l, target = _mode_bundles(est, structure, u)
        estimates.append(est)
        targets.append(target)
        per_traj.append(bundles_l)

    with _stage("regression"):
        bundles = [stack_trajectories([b[i] for b in per_traj])
                   for i in range(structure.r)]
    model = PolynomialROM(structure)
    gamma, posteriors, result = _select_and_post(
        bundles, model, targets, selection, gamma, structure)
    return FitResult(model, posteriors, gamma, estimates, targets, bundles,
                     basis, result)


def gp_bayes_odes(t_obs_list, y_list, structure_fn, d, m_est=None,
                  selection=None, fit_config=None, tau=1e-8, gamma=None):
    """Posterior over the shared parameter vector of dq/dt = S(q) o.

    Parameters
    ----------
    t_obs_list : list of r arrays
        Observation times of each state component (may differ).
    y_list : list of r arrays
        Observed values of each state component.
    structure_fn : callable ``S(q) -> (..., r, d)``
    d : int
        Number of parameters.
    m_est : int or None
        Size of the common estimation grid (defaults to 4 times the largest
        per-state m). The grid spans all observation times.

    Returns
    -------
    FitResult
        With a single posterior (``posteriors[0]``).
    """
    selection = selection or SelectionConfig()
    fit_config = fit_config or FitConfig()
    r = len(y_list)
    if len(t_obs_list) != r:
        raise ValueError("need one time vector per state component")
    m_est = int(m_est or 4 * max(np.size(t) for t in t_obs_list))
    with _stage("gp"):
        estimates = fit_modes(list(t_obs_list), y_list, m_est, fit_config,
                              tau)
    with _stage("regression"):
        t_est = estimates[0].t_est
        Q_tilde = np.array([e.y_tilde for e in estimates])
        S = np.asarray(structure_fn(Q_tilde.T))  # (m', r, d)
        rows = np.transpose(S, (1, 0, 2)).reshape(r * t_est.size, d)
        bundle = stack_modes_for_ode(
            [(e.z_tilde, e.w_sqrt) for e in estimates], rows)
        target = SelectionTarget(Q_tilde, t_est, None)
    model = StructuredODE(structure_fn, r, d)
    gamma, posteriors, result = _select_and_post(
        [bundle], model, [target], selection, gamma, None)
    return FitResult(model, posteriors, gamma, [estimates], [target],
                     [bundle], None, result)


def sample_draws(n_samples, n_rows, d, seed):
    """Standard normal draws with a per-sample seed (seed, k).

    Sample k depends only on (seed, k), so the first n samples do not
    change when more are requested.
    """
    out = np.empty((int(n_samples), n_rows, d))
    for k in range(out.shape[0]):
        out[k] = np.random.default_rng([int(seed), k]).standard_normal(
            (n_rows, d))
    return out


def predict(fit, q0, t_grid, n_samples=500, seed=0, input_fn=None,
            integrator=None, retain_samples=False, transform=None):
    """Monte Carlo prediction from the operator posterior.

    Parameters
    ----------
    fit : FitResult
    q0 : (r,) array_like
        Initial reduced state at ``t_grid[0]``.
    t_grid : (n_t,) array_like
        Output times (increasing).
    n_samples : int
    seed : int
    input_fn : callable or None
    integrator : IntegratorConfig or None
    retain_samples : bool
        Keep the per-sample solutions in the summary.
    transform : callable or None
        Map applied to each sample's (r, n_t) solution before summarizing
        (e.g. reconstruction of selected physical variables).

    Returns
    -------
    PredictionSummary

    Notes
    -----
    Samples are integrated as one batch, split recursively around any that
    fail; failed samples are excluded and counted. More than half failing
    is an error.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    integrator = integrator or IntegratorConfig()
    t_grid = np.asarray(t_grid, dtype=float)
    model = fit.model
    draws = sample_draws(n_samples, model.n_rows, model.d, seed)
    samples = operator_matrices_from_draws(fit.posteriors, draws)
    span = (t_grid[0], t_grid[-1])
    states, failed = simulate_each(model, samples, q0, span, t_grid,
                                   input_fn, config=integrator)
    n_failed = int(failed.sum())
    if n_failed > n_samples / 2:
        raise PipelineError("prediction", f"{n_failed} of {n_samples} "
                            "posterior samples failed to integrate")
    states = states[~failed]
    if transform is not None:
        states = np.array([transform(s) for s in states])
    mean = states.mean(axis=0)
    q025, q975 = np.quantile(states, [0.025, 0.975], axis=0,
                             method="linear")
    return PredictionSummary(t_grid, mean, q025, q975, n_samples, n_failed,
                             states if retain_samples else None)
