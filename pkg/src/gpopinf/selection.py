"""Selection of the prior (regularization) parameter.

A candidate gamma is scored by sampling the operator posterior it induces,
integrating every sample from the GP state estimate at the first
estimation time to the final prediction time, and comparing the sample mean
with the GP state estimates. Candidates whose samples leave the box
``phi * max|Q_tilde|`` score +inf. The search is a log-spaced grid followed
by a bounded scalar minimization in log10(gamma) around the best grid point.

Standard normal draws are fixed once per search (common random numbers), so
the score is a deterministic function of gamma.
"""

__all__ = [
    "AllUnstable",
    "SelectionConfig",
    "SelectionTarget",
    "SelectionResult",
    "candidate_error",
    "opinf_error",
    "opinf_error_multi",
    "opinf_error_odes",
    "select_prior_variance",
    "block_gamma",
]

from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.optimize

from .dynamics.integrators import IntegrationError
from .inference import (op_post_all, operator_matrices_from_draws,
                        standard_draws)
from .rom import IntegratorConfig, simulate_samples

# Stand-in for +inf inside the scalar optimizers.
_PENALTY = 1e300


class AllUnstable(RuntimeError):
    """Every candidate prior parameter produced an unstable model."""


@dataclass(frozen=True)
class SelectionConfig:
    """Settings for the prior-parameter search.

    Parameters
    ----------
    phi : float
        Stability margin multiplying max|Q_tilde|.
    n_samples : int
        Posterior draws per candidate.
    t_final : float or None
        End of the stability-check horizon. None means the last
        estimation time.
    gamma_grid : tuple of float
        Stage-one candidates.
    scalar_opt_tolerance : float
        Absolute tolerance on log10(gamma) for the refinement.
    error_norm : {"fro", "max"}
        Matrix norm for the training error.
    seed : int
        Seed of the common standard normal draws.
    search : {"scalar", "blocks"}
        ``scalar`` ties all entries; ``blocks`` refines two values (one for
        constant/linear/input columns, one for quadratic/bilinear columns)
        with Nelder-Mead, starting from the scalar optimum.
    integrator : IntegratorConfig
    """

    phi: float = 5.0
    n_samples: int = 20
    t_final: float = None
    gamma_grid: tuple = tuple(np.logspace(-6, 4, 25))
    scalar_opt_tolerance: float = 1e-2
    error_norm: str = "fro"
    seed: int = 0
    search: str = "scalar"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError("phi must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if len(self.gamma_grid) < 1 or min(self.gamma_grid) <= 0:
            raise ValueError("gamma_grid must hold positive values")
        if self.error_norm not in ("fro", "max"):
            raise ValueError(f"unknown error norm {self.error_norm!r}")
        if self.search not in ("scalar", "blocks"):
            raise ValueError(f"unknown search {self.search!r}")
        object.__setattr__(self, "gamma_grid",
                           tuple(float(g) for g in self.gamma_grid))
        if isinstance(self.integrator, dict):
            object.__setattr__(self, "integrator",
                               IntegratorConfig(**self.integrator))

    def to_dict(self):
        out = asdict(self)
        out["gamma_grid"] = list(self.gamma_grid)
        return out


@dataclass
class SelectionTarget:
    """One trajectory's GP state estimates and input function.

    Attributes
    ----------
    gp_states : (r, m') ndarray
    t_est : (m',) ndarray
    input_fn : callable or None
    """

    gp_states: np.ndarray
    t_est: np.ndarray
    input_fn: object = None

    def __post_init__(self):
        self.gp_states = np.atleast_2d(np.asarray(self.gp_states,
                                                  dtype=float))
        self.t_est = np.asarray(self.t_est, dtype=float)
        if self.gp_states.shape[1] != self.t_est.size:
            raise ValueError("gp_states columns must match t_est")


@dataclass
class SelectionResult:
    """Outcome of :func:`select_prior_variance`."""

    gamma: object
    error: float
    grid: np.ndarray
    grid_errors: np.ndarray
    n_evaluations: int

    def to_dict(self):
        g = np.asarray(self.gamma, dtype=float)
        return {
            "gamma": g.tolist(),
            "error": float(self.error),
            "grid": self.grid.tolist(),
            "grid_errors": [None if not np.isfinite(e) else float(e)
                            for e in self.grid_errors],
            "n_evaluations": int(self.n_evaluations),
        }


def _norm(X, kind):
    return float(np.linalg.norm(X) if kind == "fro" else np.max(np.abs(X)))


def candidate_error(gamma, bundles, model, targets, cfg, draws=None):
    """Mean training error of the sampled models, or +inf if unstable.

    Parameters
    ----------
    gamma : float or (d,) array_like
        Prior parameter shared by every posterior row.
    bundles : list of RegressionBundle
        One per posterior row (r for a ROM, 1 for a structured ODE).
    model : PolynomialROM or StructuredODE
    targets : list of SelectionTarget
    cfg : SelectionConfig
    draws : (n_samples, n_rows, d) ndarray or None
        Standard normal draws; generated from ``cfg.seed`` if None.

    Returns
    -------
    float
        Average over targets of ``||Q_tilde - mean_k Q_k||``; +inf if any
        sample of any target leaves the stability box or fails to integrate.
    """
    if draws is None:
        draws = standard_draws(cfg.n_samples, model.n_rows, model.d,
                               cfg.seed)
    try:
        posteriors = op_post_all(bundles, [gamma] * len(bundles))
        samples = operator_matrices_from_draws(posteriors, draws)
    except np.linalg.LinAlgError:
        return np.inf

    total = 0.0
    for target in targets:
        t_est = target.t_est
        t_final = t_est[-1] if cfg.t_final is None \
            else max(float(cfg.t_final), t_est[-1])
        bound = cfg.phi * np.max(np.abs(target.gp_states))
        try:
            states = simulate_samples(
                model, samples, target.gp_states[:, 0], (t_est[0], t_final),
                t_est, target.input_fn, bound=bound, config=cfg.integrator)
        except (IntegrationError, FloatingPointError):
            return np.inf
        total += _norm(target.gp_states - states.mean(axis=0),
                       cfg.error_norm)
    return total / len(targets)


def opinf_error(gamma, bundles, gp_states, input_fn, t_est, cfg, model,
                draws=None):
    """Stability-gated training error for a single trajectory."""
    return candidate_error(gamma, bundles, model,
                           [SelectionTarget(gp_states, t_est, input_fn)],
                           cfg, draws)


def opinf_error_multi(gamma, bundles, targets, cfg, model, draws=None):
    """Stability-gated error averaged over trajectories (1/l weighting)."""
    return candidate_error(gamma, bundles, model, targets, cfg, draws)


def opinf_error_odes(gamma, bundle, gp_states, input_fn, t_est, cfg, model,
                     draws=None):
    """Stability-gated error for a structured ODE with shared parameters."""
    return candidate_error(gamma, [bundle], model,
                           [SelectionTarget(gp_states, t_est, input_fn)],
                           cfg, draws)


def block_gamma(structure, gamma_a, gamma_b):
    """Per-column prior parameters from two group values.

    Group A covers Constant, Linear and Input columns; group B covers
    Quadratic and Bilinear columns.
    """
    g = np.empty(structure.d)
    for term, sl in structure.slices().items():
        g[sl] = gamma_b if term in ("Quadratic", "Bilinear") else gamma_a
    return g


def select_prior_variance(bundles, model, targets, cfg, structure=None):
    """Grid search plus bounded refinement of the prior parameter.

    Parameters
    ----------
    bundles : list of RegressionBundle
    model : PolynomialROM or StructuredODE
    targets : list of SelectionTarget
    cfg : SelectionConfig
    structure : ModelStructure or None
        Needed only for ``cfg.search == "blocks"``.

    Returns
    -------
    SelectionResult
        ``gamma`` is a float for the scalar search or a (d,) array for the
        block search. Its error never exceeds the best grid error.

    Raises
    ------
    AllUnstable
    """
    draws = standard_draws(cfg.n_samples, model.n_rows, model.d, cfg.seed)
    cache = {}

    def score(gamma):
        key = np.asarray(gamma, dtype=float).tobytes()
        if key not in cache:
            cache[key] = candidate_error(gamma, bundles, model, targets, cfg,
                                         draws)
        return cache[key]

    grid = np.asarray(cfg.gamma_grid, dtype=float)
    grid_errors = np.array([score(g) for g in grid])
    if not np.any(np.isfinite(grid_errors)):
        raise AllUnstable(
            f"all {grid.size} prior candidates produced unstable models")

    k = int(np.argmin(grid_errors))
    best_gamma, best_error = float(grid[k]), float(grid_errors[k])
    log_grid = np.log10(grid)
    if grid.size > 1:
        order = np.argsort(log_grid)
        pos = int(np.where(order == k)[0][0])
        lo = log_grid[order[max(pos - 1, 0)]]
        hi = log_grid[order[min(pos + 1, grid.size - 1)]]
        res = scipy.optimize.minimize_scalar(
            lambda s: min(score(10.0**s), _PENALTY), bounds=(lo, hi),
            method="bounded",
            options={"xatol": cfg.scalar_opt_tolerance})
        if res.fun < best_error:
            best_gamma, best_error = float(10.0**res.x), float(res.fun)

    gamma = best_gamma
    if cfg.search == "blocks":
        if structure is None:
            raise ValueError("block search needs the model structure")

        def block_score(s):
            return min(score(block_gamma(structure, 10.0**s[0],
                                         10.0**s[1])), _PENALTY)
        s0 = np.full(2, np.log10(best_gamma))
        simplex = np.array([s0, s0 + [1.0, 0.0], s0 + [0.0, 1.0]])
        res = scipy.optimize.minimize(
            block_score, s0, method="Nelder-Mead",
            options={"initial_simplex": simplex, "maxfev": 60,
                     "xatol": cfg.scalar_opt_tolerance, "fatol": 0.0})
        gamma = block_gamma(structure, best_gamma, best_gamma)
        if res.fun < best_error:
            gamma = block_gamma(structure, 10.0**res.x[0], 10.0**res.x[1])
            best_error = float(res.fun)

    return SelectionResult(gamma, best_error, grid, grid_errors, len(cache))
