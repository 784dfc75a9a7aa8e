"""Experiment configuration: a versioned JSON document with strict fields."""

__all__ = [
    "SCHEMA_VERSION",
    "BENCHMARKS",
    "ConfigError",
    "NoiseConfig",
    "GPConfig",
    "SelectionSettings",
    "ExperimentConfig",
    "derive_seed",
    "named_config",
    "EXPERIMENT_NAMES",
]

import json
from dataclasses import dataclass, field, fields, asdict, replace

import numpy as np

from ..gp import FitConfig
from ..rom import IntegratorConfig
from ..selection import SelectionConfig

SCHEMA_VERSION = 1
BENCHMARKS = ("Euler", "DiffusionReaction", "SEIRD", "Synthetic")
_SEED_STREAMS = ("times", "noise", "gp", "selection", "prediction")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def _strict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown field(s) in {where}: {unknown}")
    return data


@dataclass
class NoiseConfig:
    """Noise model; the seed is derived from the experiment seed."""

    kind: str = "RangeScaledGaussian"
    level: float = 0.0
    protect_initial: bool = True
    protect_boundaries: bool = False

    @classmethod
    def from_dict(cls, data):
        return cls(**_strict(cls, data, "noise"))


@dataclass
class GPConfig:
    """GP fitting settings (see :class:`gpopinf.gp.FitConfig`)."""

    n_starts: int = 8
    tau: float = 1e-8
    log_signal_bounds: tuple = (-12.0, 12.0)
    log_noise_bounds: tuple = (-16.0, 4.0)
    lengthscale_span_factor: float = 10.0
    maxiter: int = 200
    lengthscale_floor: str = "mean_spacing"

    @classmethod
    def from_dict(cls, data):
        data = dict(_strict(cls, data, "gp"))
        for key in ("log_signal_bounds", "log_noise_bounds"):
            if key in data:
                data[key] = tuple(float(v) for v in data[key])
        return cls(**data)

    def fit_config(self, seed):
        return FitConfig(n_starts=self.n_starts, seed=seed,
                         log_signal_bounds=tuple(self.log_signal_bounds),
                         log_noise_bounds=tuple(self.log_noise_bounds),
                         lengthscale_span_factor=self.lengthscale_span_factor,
                         maxiter=self.maxiter,
                         lengthscale_floor=self.lengthscale_floor)


@dataclass
class SelectionSettings:
    """Prior-selection settings as they appear in the config file."""

    phi: float = 5.0
    n_samples: int = 20
    grid_min: float = 1e-6
    grid_max: float = 1e4
    grid_points: int = 25
    scalar_opt_tolerance: float = 1e-2
    error_norm: str = "fro"
    search: str = "scalar"
    rtol: float = 1e-6
    atol: float = 1e-9
    max_steps: int = 20000

    @classmethod
    def from_dict(cls, data):
        return cls(**_strict(cls, data, "selection"))

    def integrator(self):
        return IntegratorConfig(self.rtol, self.atol, self.max_steps)

    def selection_config(self, t_final, seed):
        grid = np.logspace(np.log10(self.grid_min), np.log10(self.grid_max),
                           self.grid_points)
        return SelectionConfig(
            phi=self.phi, n_samples=self.n_samples, t_final=t_final,
            gamma_grid=tuple(grid),
            scalar_opt_tolerance=self.scalar_opt_tolerance,
            error_norm=self.error_norm, seed=seed, search=self.search,
            integrator=self.integrator())


@dataclass
class ExperimentConfig:
    """All settings of one run.

    Attributes
    ----------
    schema : int
        Must equal ``SCHEMA_VERSION``.
    name : str
    benchmark : {"Euler", "DiffusionReaction", "SEIRD", "Synthetic"}
    structure : list of str
        ROM terms (ignored for SEIRD, whose structure is fixed).
    r : int
        Reduced dimension (state dimension for SEIRD).
    m : int
        Observations per trajectory (per state for SEIRD).
    m_est : int or None
        Estimation grid size; None uses the benchmark default.
    t_last_obs, t_final : float
        End of the observation window and of the prediction horizon.
    n_x : int or None
        Spatial grid size for the PDE benchmarks.
    noise : NoiseConfig
    seed : int
        Master seed; every random stream is derived from it.
    selection : SelectionSettings
    gp : GPConfig
    n_samples : int
        Posterior samples for prediction.
    n_pred_times : int
        Output times on [0, t_final] (SEIRD always uses whole days).
    retain_samples : bool
        Write samples.csv.
    inputs : list of [a, b]
        Training input parameters (DiffusionReaction).
    holdout_inputs : list of [a, b]
        Inputs predicted without retraining (DiffusionReaction).
    gamma : float or None
        Manual prior parameter; skips selection when set.
    """

    benchmark: str = "Synthetic"
    name: str = "custom"
    schema: int = SCHEMA_VERSION
    structure: list = field(default_factory=lambda: ["Constant", "Linear",
                                                     "Quadratic"])
    r: int = 3
    m: int = 200
    m_est: int = None
    t_last_obs: float = 10.0
    t_final: float = 12.0
    n_x: int = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0
    selection: SelectionSettings = field(default_factory=SelectionSettings)
    gp: GPConfig = field(default_factory=GPConfig)
    n_samples: int = 500
    n_pred_times: int = 301
    retain_samples: bool = False
    inputs: list = field(default_factory=list)
    holdout_inputs: list = field(default_factory=list)
    gamma: float = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema {self.schema}; "
                              f"expected {SCHEMA_VERSION}")
        if self.benchmark not in BENCHMARKS:
            raise ConfigError(f"unknown benchmark {self.benchmark!r}; "
                              f"expected one of {BENCHMARKS}")
        if self.r < 1:
            raise ConfigError("r must be at least 1")
        if self.m < 2:
            raise ConfigError("m must be at least 2")
        if self.t_final < self.t_last_obs:
            raise ConfigError("t_final must be >= t_last_obs")
        if self.n_samples < 2:
            raise ConfigError("n_samples must be at least 2")
        if self.benchmark == "DiffusionReaction" and not self.inputs:
            raise ConfigError("DiffusionReaction needs training inputs")

    @classmethod
    def from_dict(cls, data):
        data = dict(_strict(cls, data, "config"))
        if "schema" not in data:
            raise ConfigError("missing 'schema' field")
        if "benchmark" not in data:
            raise ConfigError("missing 'benchmark' field")
        if "noise" in data:
            data["noise"] = NoiseConfig.from_dict(data["noise"])
        if "selection" in data:
            data["selection"] = SelectionSettings.from_dict(data["selection"])
        if "gp" in data:
            data["gp"] = GPConfig.from_dict(data["gp"])
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        out = asdict(self)
        out["gp"]["log_signal_bounds"] = list(self.gp.log_signal_bounds)
        out["gp"]["log_noise_bounds"] = list(self.gp.log_noise_bounds)
        out["inputs"] = [list(p) for p in self.inputs]
        out["holdout_inputs"] = [list(p) for p in self.holdout_inputs]
        return out

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def with_overrides(self, seed=None, n_samples=None):
        """Copy with the CLI overrides applied."""
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if n_samples is not None:
            cfg = replace(cfg, n_samples=int(n_samples))
        return cfg

    def stream_seed(self, stream, index=0):
        return derive_seed(self.seed, stream, index)


def derive_seed(seed, stream, index=0):
    """Independent 32-bit seed for a named random stream of a run."""
    if stream not in _SEED_STREAMS:
        raise ValueError(f"unknown seed stream {stream!r}")
    ss = np.random.SeedSequence([int(seed), _SEED_STREAMS.index(stream),
                                 int(index)])
    return int(ss.generate_state(1)[0])


_NAMED = {
    "euler-noisy": dict(
        benchmark="Euler", structure=["Constant", "Linear", "Quadratic"],
        r=6, m=200, t_last_obs=0.06, t_final=0.15, n_x=100,
        noise=NoiseConfig("RangeScaledGaussian", 0.03, True, False)),
    "euler-desk": dict(
        benchmark="Euler", structure=["Constant", "Linear", "Quadratic"],
        r=6, m=200, t_last_obs=0.06, t_final=0.15, n_x=100,
        noise=NoiseConfig("RangeScaledGaussian", 0.01, True, False)),
    "euler-sparse": dict(
        benchmark="Euler", structure=["Constant", "Linear", "Quadratic"],
        r=6, m=50, t_last_obs=0.06, t_final=0.15, n_x=100,
        noise=NoiseConfig("RangeScaledGaussian", 0.01, True, False)),
    "heat-multi": dict(
        benchmark="DiffusionReaction",
        structure=["Constant", "Linear", "Quadratic", "Input", "Bilinear"],
        r=5, m=20, m_est=80, t_last_obs=1.0, t_final=2.0, n_x=200,
        noise=NoiseConfig("MagnitudeScaledGaussian", 0.05, True, True),
        selection=SelectionSettings(search="blocks"),
        n_pred_times=201,
        inputs=[[-2, 0], [-1, -2], [0, 1], [1, -1], [2, 2]],
        holdout_inputs=[[1.5, 0.5]]),
    "seird-noisy": dict(
        benchmark="SEIRD", structure=[], r=5, m=120, t_last_obs=119,
        t_final=199,
        noise=NoiseConfig("TruncatedNormalMagnitude", 0.10, False, False)),
    "seird-sparse": dict(
        benchmark="SEIRD", structure=[], r=5, m=10, t_last_obs=119,
        t_final=199,
        noise=NoiseConfig("TruncatedNormalMagnitude", 0.05, False, False)),
    "synthetic": dict(
        benchmark="Synthetic", structure=["Constant", "Linear", "Quadratic"],
        r=3, m=300, m_est=300, t_last_obs=20.0, t_final=24.0,
        noise=NoiseConfig("RangeScaledGaussian", 0.0, True, False),
        gp=GPConfig(n_starts=4), n_samples=100, n_pred_times=241),
}
EXPERIMENT_NAMES = tuple(_NAMED)


def named_config(name, **overrides):
    """Configuration of a named benchmark experiment."""
    if name not in _NAMED:
        raise ConfigError(f"unknown experiment {name!r}; expected one of "
                          f"{EXPERIMENT_NAMES}")
    settings = dict(_NAMED[name], name=name)
    settings.update(overrides)
    return ExperimentConfig(**settings)
