"""Benchmark experiments: data generation, fitting, prediction, metrics and
run-directory I/O.

A run directory holds::

    config.json     the configuration as run
    clean_<label>.csv, observed_<label>.csv, grid_<label>.csv   data
    posterior.json  prior parameter, per-row means and covariances
    model.npz       basis, scaling and prediction targets
    summary.csv     pointwise mean and 2.5% / 97.5% quantiles (model
                    coordinates: POD coefficients, or SEIRD states)
    summary_physical.csv   the same statistics of reconstructed physical
                    variables (ROM benchmarks)
    samples.csv     per-sample solutions (optional)
    metrics.json    accuracy and uncertainty diagnostics
    manifest.json   seeds, versions and timings
"""

__all__ = [
    "TrajectoryData",
    "ExperimentRun",
    "simulate",
    "make_observations",
    "fit_experiment",
    "predict_experiment",
    "compute_metrics",
    "run_experiment",
    "write_data",
    "read_data",
    "write_fit",
    "write_predictions",
    "load_fit",
    "write_report",
    "expected_synthetic_operator",
    "physical_transform",
    "physical_summary",
    "write_run",
    "fit_and_predict",
]

import csv
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..dynamics import (EulerScaling, NoiseSpec, SEIRD_LABELS, SEIRD_Q0,
                        SEIRD_TRUTH, SYNTHETIC_Q0,
                        Trajectory, add_noise, euler_fom_rhs,
                        euler_initial_condition, format_float,
                        heat_fom_rhs, heat_grid, heat_initial_condition,
                        heat_input, heat_jacobian, heat_with_boundaries,
                        integrate_implicit, integrate_rk45, lift_euler,
                        lift_heat, read_trajectory, sample_observation_times,
                        seird_rhs, seird_structure, synthetic_rhs,
                        write_trajectory)
from ..inference import OperatorPosterior
from ..reduction import ReducedBasis, compress, reconstruct
from ..rom import PolynomialROM, StructuredODE
from ..structure import ModelStructure, build_data_matrix
from .config import ExperimentConfig, _SEED_STREAMS
from .core import (FitResult, gp_bayes_odes, gp_bayes_opinf,
                   gp_bayes_opinf_multi, predict)

_FOM_RTOL = 1e-8
_FOM_ATOL = 1e-10
_HEAT_STEP = 2e-3


@dataclass
class TrajectoryData:
    """Clean and observed data of one trajectory.

    Attributes
    ----------
    label : str
        ``train_<l>`` for training data, ``holdout_<k>`` for held-out inputs.
    inputs : tuple or None
        (a, b) for the diffusion-reaction benchmark.
    clean : Trajectory or None
        Clean states at the observation times (NaN where unobserved).
    grid : Trajectory
        Clean states on the prediction grid.
    observed : Trajectory or None
        Noisy observations.
    """

    label: str
    inputs: tuple = None
    clean: Trajectory = None
    grid: Trajectory = None
    observed: Trajectory = None

    @property
    def training(self):
        return self.label.startswith("train")


@dataclass
class ExperimentRun:
    """Result of :func:`run_experiment`."""

    config: ExperimentConfig
    data: list
    fit: FitResult
    scaling: object = None
    predictions: dict = field(default_factory=dict)
    physical: dict = field(default_factory=dict)
    physical_labels: list = None
    targets: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


# Data generation -------------------------------------------------------------

def _prediction_grid(cfg):
    if cfg.benchmark == "SEIRD":
        return np.arange(0.0, np.floor(cfg.t_final) + 1)
    return np.linspace(0.0, cfg.t_final, cfg.n_pred_times)


def _labels(prefix, n):
    return [f"{prefix}{i}" for i in range(n)]


def _heat_solve(n_x, a, b, times):
    s0 = heat_initial_condition(heat_grid(n_x))
    traj = integrate_implicit(
        lambda t, s: heat_fom_rhs(s, t, a, b), s0, (0.0, times[-1]), times,
        fixed_step=_HEAT_STEP, jacobian=lambda t, s: heat_jacobian(s))
    return Trajectory(times, heat_with_boundaries(traj.states),
                      _labels("q", n_x + 2), traj.nsteps)


def simulate(cfg):
    """Clean trajectories for the configured benchmark.

    Returns
    -------
    list of TrajectoryData
        With ``clean`` and ``grid`` filled in (``clean`` is None for
        held-out inputs).
    """
    t_grid = _prediction_grid(cfg)
    if cfg.benchmark == "Euler":
        n_x = cfg.n_x or 100
        q0 = euler_initial_condition(n_x)
        labels = (_labels("rho_", n_x) + _labels("rhov_", n_x)
                  + _labels("rhoe_", n_x))
        t_obs = sample_observation_times(cfg.m, cfg.t_last_obs, "Uniform",
                                         cfg.stream_seed("times"))

        def rhs(t, q):
            return euler_fom_rhs(q)

        def run(times):
            tr = integrate_rk45(rhs, q0, (0.0, times[-1]), times,
                                rtol=_FOM_RTOL, atol=_FOM_ATOL,
                                labels=labels)
            return Trajectory(times, tr.states, labels, tr.nsteps)
        return [TrajectoryData("train_0", None, run(t_obs), run(t_grid))]

    if cfg.benchmark == "DiffusionReaction":
        n_x = cfg.n_x or 200
        out = []
        for l, (a, b) in enumerate(cfg.inputs):
            t_obs = sample_observation_times(
                cfg.m, cfg.t_last_obs, "Uniform", cfg.stream_seed("times", l))
            out.append(TrajectoryData(f"train_{l}", (float(a), float(b)),
                                      _heat_solve(n_x, a, b, t_obs),
                                      _heat_solve(n_x, a, b, t_grid)))
        for k, (a, b) in enumerate(cfg.holdout_inputs):
            out.append(TrajectoryData(f"holdout_{k}", (float(a), float(b)),
                                      None, _heat_solve(n_x, a, b, t_grid)))
        return out

    if cfg.benchmark == "SEIRD":
        full = integrate_rk45(lambda t, q: seird_rhs(q, SEIRD_TRUTH),
                              SEIRD_Q0, (0.0, t_grid[-1]), t_grid,
                              rtol=1e-10, atol=1e-13,
                              labels=list(SEIRD_LABELS))
        grid = Trajectory(t_grid, full.states, list(SEIRD_LABELS),
                          full.nsteps)
        per_state = [sample_observation_times(
            cfg.m, cfg.t_last_obs, "IntegerDays", cfg.stream_seed("times", i))
            for i in range(5)]
        times = np.unique(np.concatenate(per_state))
        states = np.full((5, times.size), np.nan)
        for i, t_i in enumerate(per_state):
            cols = np.searchsorted(times, t_i)
            states[i, cols] = full.states[i, t_i.astype(int)]
        clean = Trajectory(times, states, list(SEIRD_LABELS))
        return [TrajectoryData("train_0", None, clean, grid)]

    # Synthetic
    labels = _labels("q", 3)
    t_obs = sample_observation_times(cfg.m, cfg.t_last_obs, "Uniform",
                                     cfg.stream_seed("times"))

    def run(times):
        tr = integrate_rk45(lambda t, q: synthetic_rhs(q), SYNTHETIC_Q0,
                            (0.0, times[-1]), times, rtol=1e-12, atol=1e-14,
                            labels=labels)
        return Trajectory(times, tr.states, labels, tr.nsteps)
    return [TrajectoryData("train_0", None, run(t_obs), run(t_grid))]


def make_observations(cfg, data):
    """Fill in ``observed`` for every training trajectory (in place)."""
    for l, item in enumerate(d for d in data if d.training):
        spec = NoiseSpec(cfg.noise.kind, cfg.noise.level,
                         cfg.stream_seed("noise", l),
                         cfg.noise.protect_initial,
                         cfg.noise.protect_boundaries)
        blocks = 3 if cfg.benchmark == "Euler" else None
        item.observed = add_noise(item.clean, spec, blocks)
    return data


# Fitting ---------------------------------------------------------------------

def _structure(cfg):
    p = 2 if cfg.benchmark == "DiffusionReaction" else 0
    terms = cfg.structure
    if p == 0:
        terms = [t for t in terms if t not in ("Input", "Bilinear")]
    return ModelStructure(tuple(terms), cfg.r, p)


def _input_fn(item):
    if item.inputs is None:
        return None
    a, b = item.inputs
    return lambda t: heat_input(t, a, b)


def _to_model_space(cfg, states, scaling=None):
    if cfg.benchmark == "Euler":
        return scaling.apply(lift_euler(states))
    if cfg.benchmark == "DiffusionReaction":
        return lift_heat(states)
    return np.asarray(states, dtype=float)


def _seird_m_est(cfg):
    if cfg.m_est:
        return cfg.m_est
    daily = cfg.m == int(round(cfg.t_last_obs)) + 1
    return 4 * cfg.m if daily else 4 * (int(round(cfg.t_last_obs)) + 1)


def fit_experiment(cfg, data):
    """Run the fitting algorithm matching the benchmark.

    Returns
    -------
    (FitResult, EulerScaling or None)
    """
    train = [d for d in data if d.training]
    selection = cfg.selection.selection_config(
        cfg.t_final, cfg.stream_seed("selection"))
    fit_config = cfg.gp.fit_config(cfg.stream_seed("gp"))
    kw = dict(selection=selection, fit_config=fit_config, tau=cfg.gp.tau,
              gamma=cfg.gamma)

    if cfg.benchmark == "SEIRD":
        obs = train[0].observed
        ts, ys = [], []
        for i in range(obs.states.shape[0]):
            keep = ~np.isnan(obs.states[i])
            ts.append(obs.times[keep])
            ys.append(obs.states[i, keep])
        fit = gp_bayes_odes(ts, ys, seird_structure, SEIRD_TRUTH.size,
                            m_est=_seird_m_est(cfg), **kw)
        return fit, None

    scaling = None
    if cfg.benchmark == "Euler":
        ref = train[0].clean if train[0].clean is not None \
            else train[0].observed
        scaling = EulerScaling.from_snapshots(lift_euler(ref.states))
    structure = _structure(cfg)
    snaps = [_to_model_space(cfg, d.observed.states, scaling) for d in train]
    times = [d.observed.times for d in train]
    if cfg.benchmark == "DiffusionReaction":
        fit = gp_bayes_opinf_multi(snaps, times, structure, cfg.m_est,
                                   [_input_fn(d) for d in train], **kw)
    else:
        fit = gp_bayes_opinf(snaps[0], times[0], structure, cfg.m_est,
                             None, **kw)
    return fit, scaling


def _targets(cfg, data, fit):
    """Prediction targets: label, initial reduced state, inputs."""
    out, l = [], 0
    for item in data:
        if item.training:
            q0 = fit.q0_hat[l]
            l += 1
        elif cfg.benchmark == "DiffusionReaction":
            s0 = heat_initial_condition(heat_grid(cfg.n_x or 200))
            q0 = compress(fit.basis, lift_heat(heat_with_boundaries(s0)))
        else:
            continue
        out.append({"label": item.label, "q0": np.asarray(q0, dtype=float),
                    "inputs": item.inputs})
    return out


def predict_experiment(cfg, fit, targets, n_samples=None, seed=None):
    """Posterior predictions for every target (samples retained).

    Returns
    -------
    dict label -> PredictionSummary
    """
    n_samples = int(n_samples or cfg.n_samples)
    base = cfg.seed if seed is None else int(seed)
    t_grid = _prediction_grid(cfg)
    # samples are kept for the physical summary and conservation checks
    retain = True
    out = {}
    for k, target in enumerate(targets):
        inputs = target["inputs"]
        input_fn = None if inputs is None else \
            (lambda t, a=inputs[0], b=inputs[1]: heat_input(t, a, b))
        seed_k = int(np.random.SeedSequence(
            [base, _SEED_STREAMS.index("prediction"), k]).generate_state(1)[0])
        out[target["label"]] = predict(
            fit, target["q0"], t_grid, n_samples, seed_k, input_fn,
            cfg.selection.integrator(), retain_samples=retain)
    return out


def physical_transform(cfg, basis, scaling=None):
    """Columnwise map from model coordinates to physical variables.

    Returns ``(fn, labels)`` or ``(None, None)`` when the model coordinates
    are already physical (SEIRD). Euler states map to (rho, v, p) with the
    scaling undone; diffusion-reaction states map to q on the grid including
    the boundary nodes.
    """
    if basis is None:
        return None, None
    if cfg.benchmark == "Euler":
        n_x = basis.N // 3

        def fn(Qh):
            v, p, zeta = np.split(scaling.invert(reconstruct(basis, Qh)), 3)
            return np.concatenate([1 / zeta, v, p])
        return fn, (_labels("rho_", n_x) + _labels("v_", n_x)
                    + _labels("p_", n_x))
    if cfg.benchmark == "DiffusionReaction":
        n = basis.N // 2
        return (lambda Qh: reconstruct(basis, Qh)[:n]), _labels("q", n)
    return (lambda Qh: reconstruct(basis, Qh)), _labels("q", basis.N)


def physical_summary(pred, fn, chunk=25):
    """Mean and type-7 quantiles of ``fn`` applied to retained samples.

    Processed in blocks of ``chunk`` output times to bound memory.
    """
    if pred.samples is None:
        raise ValueError("prediction samples were not retained")
    parts = []
    for start in range(0, pred.times.size, chunk):
        sl = slice(start, start + chunk)
        X = np.stack([fn(s[:, sl]) for s in pred.samples])
        parts.append((X.mean(axis=0),) + tuple(
            np.quantile(X, [0.025, 0.975], axis=0, method="linear")))
    mean, lo, hi = (np.concatenate([p[i] for p in parts], axis=1)
                    for i in range(3))
    return type(pred)(pred.times, mean, lo, hi, pred.n_samples,
                      pred.n_failed)


# Metrics ---------------------------------------------------------------------

def _truth_model_space(cfg, item, fit, scaling):
    X = _to_model_space(cfg, item.grid.states, scaling)
    if fit.basis is None:
        return X, None
    return compress(fit.basis, X), X


def compute_metrics(cfg, data, fit, scaling, predictions):
    """Accuracy and uncertainty diagnostics (JSON-serializable)."""
    metrics = {"gamma": np.asarray(fit.gamma, dtype=float).tolist()}
    by_label = {d.label: d for d in data}
    t_grid = _prediction_grid(cfg)
    train_win = t_grid <= cfg.t_last_obs + 1e-12

    if cfg.benchmark == "SEIRD":
        post = fit.posteriors[0]
        metrics["parameters"] = {
            "names": ["beta", "delta", "(1-alpha)gamma", "alpha*rho"],
            "truth": SEIRD_TRUTH.tolist(),
            "mean": post.mean.tolist(),
            "std": post.std.tolist(),
        }
        pred = predictions["train_0"]
        totals = pred.samples.sum(axis=1)
        truth_tot = by_label["train_0"].grid.states.sum(axis=0)
        metrics["conservation"] = {
            "samples_max_deviation": float(np.max(np.abs(
                totals - totals[:, :1]))),
            "truth_max_deviation": float(np.max(np.abs(
                truth_tot - truth_tot[0]))),
        }
        metrics["n_failed"] = pred.n_failed
        return metrics

    per = {}
    for label, pred in predictions.items():
        reduced, full = _truth_model_space(cfg, by_label[label], fit,
                                           scaling)
        width = (pred.q975 - pred.q025).mean(axis=0)
        entry = {
            "n_failed": pred.n_failed,
            "relative_error": float(np.linalg.norm(reduced - pred.mean)
                                    / np.linalg.norm(reduced)),
            "band_width_train": float(width[train_win].mean()),
            "band_width_predict": float(width[~train_win].mean())
            if np.any(~train_win) else None,
        }
        if by_label[label].training:
            e_red = np.linalg.norm(reduced[:, train_win]
                                   - pred.mean[:, train_win])
            e_proj = np.linalg.norm(
                full[:, train_win]
                - reconstruct(fit.basis, reduced[:, train_win]))
            entry.update(training_error=float(e_red),
                         projection_error=float(e_proj),
                         error_ratio=float(e_red / e_proj))
        per[label] = entry
    metrics["trajectories"] = per
    return metrics


def expected_synthetic_operator(basis, n_points=200, seed=0):
    """Reduced operator induced by the synthetic generator on a full basis.

    With q = V q_hat + q_bar, dq_hat/dt = V^T f(V q_hat + q_bar) is again
    quadratic in q_hat; its coefficients are recovered exactly by a
    least-squares fit at random points (the fit is exact because the
    function lies in the model class).
    """
    structure = ModelStructure(("Constant", "Linear", "Quadratic"),
                               basis.r)
    rng = np.random.default_rng(seed)
    Qh = rng.standard_normal((basis.r, n_points))
    F = basis.V.T @ synthetic_rhs(reconstruct(basis, Qh))
    D = build_data_matrix(Qh, None, structure)
    O, *_ = np.linalg.lstsq(D, F.T, rcond=None)
    return O.T


# Orchestration ---------------------------------------------------------------

def run_experiment(cfg, n_samples=None):
    """Simulate, observe, fit and predict; returns an ExperimentRun."""
    timings = {}
    t0 = time.perf_counter()
    data = make_observations(cfg, simulate(cfg))
    timings["simulate"] = time.perf_counter() - t0
    return fit_and_predict(cfg, data, n_samples, timings)


def fit_and_predict(cfg, data, n_samples=None, timings=None):
    timings = dict(timings or {})
    t0 = time.perf_counter()
    fit, scaling = fit_experiment(cfg, data)
    timings["fit"] = time.perf_counter() - t0
    targets = _targets(cfg, data, fit)
    t0 = time.perf_counter()
    predictions = predict_experiment(cfg, fit, targets, n_samples)
    timings["predict"] = time.perf_counter() - t0
    metrics = compute_metrics(cfg, data, fit, scaling, predictions) \
        if all(d.grid is not None for d in data) else {}
    physical, labels = physical_predictions(cfg, fit, scaling, predictions)
    return ExperimentRun(cfg, data, fit, scaling, predictions, physical,
                         labels, targets, metrics, timings)


def physical_predictions(cfg, fit, scaling, predictions):
    fn, labels = physical_transform(cfg, fit.basis, scaling)
    if fn is None:
        return {}, None
    return {k: physical_summary(p, fn) for k, p in predictions.items()}, \
        labels


# I/O -------------------------------------------------------------------------

def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_data(out_dir, data):
    """Write clean, observed and grid trajectories as CSV files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for item in data:
        meta = {"label": item.label,
                "inputs": None if item.inputs is None else list(item.inputs)}
        for kind in ("clean", "observed", "grid"):
            traj = getattr(item, kind)
            if traj is not None:
                write_trajectory(out_dir / f"{kind}_{item.label}.csv", traj,
                                 dict(meta, kind=kind))


def read_data(data_dir, kinds=("clean", "observed", "grid")):
    """Read trajectories written by :func:`write_data`."""
    data_dir = Path(data_dir)
    items = {}
    for kind in kinds:
        for path in sorted(data_dir.glob(f"{kind}_*.csv")):
            traj, meta = read_trajectory(path)
            label = meta.get("label", path.stem[len(kind) + 1:])
            inputs = meta.get("inputs")
            item = items.setdefault(label, TrajectoryData(
                label, None if inputs is None else tuple(inputs)))
            setattr(item, kind, traj)
    order = sorted(items, key=lambda s: (not s.startswith("train"),
                                         int(s.split("_")[-1])))
    return [items[k] for k in order]


def write_fit(out_dir, cfg, fit, scaling, targets):
    """Write config.json, posterior.json and model.npz."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w") as fh:
        fh.write(cfg.dumps())
    posterior = {
        "benchmark": cfg.benchmark,
        "gamma": np.asarray(fit.gamma, dtype=float).tolist(),
        "rows": [{"mean": p.mean.tolist(),
                  "covariance": p.covariance.tolist()}
                 for p in fit.posteriors],
    }
    if fit.selection is not None:
        posterior["selection"] = fit.selection.to_dict()
    _dump_json(out_dir / "posterior.json", posterior)
    arrays = {
        "target_labels": np.array([t["label"] for t in targets]),
        "target_q0": np.array([t["q0"] for t in targets]),
        "target_inputs": np.array([t["inputs"] if t["inputs"] is not None
                                   else (np.nan, np.nan) for t in targets]),
    }
    if fit.basis is not None:
        arrays.update(V=fit.basis.V, q_bar=fit.basis.q_bar,
                      singular_values=fit.basis.singular_values)
    if scaling is not None:
        arrays["scales"] = scaling.scales
    np.savez(out_dir / "model.npz", **arrays)


def load_fit(run_dir):
    """Reload (config, FitResult, scaling, targets) from a run directory.

    The FitResult carries only what prediction needs (model, posteriors,
    gamma, basis).
    """
    run_dir = Path(run_dir)
    cfg = ExperimentConfig.load(run_dir / "config.json")
    with open(run_dir / "posterior.json") as fh:
        post = json.load(fh)
    posteriors = [OperatorPosterior(np.array(r["mean"]),
                                    np.array(r["covariance"]))
                  for r in post["rows"]]
    z = np.load(run_dir / "model.npz")
    basis = ReducedBasis(z["V"], z["q_bar"], z["singular_values"]) \
        if "V" in z else None
    scaling = EulerScaling(z["scales"]) if "scales" in z else None
    if cfg.benchmark == "SEIRD":
        model = StructuredODE(seird_structure, 5, SEIRD_TRUTH.size)
    else:
        model = PolynomialROM(_structure(cfg))
    targets = []
    for label, q0, inputs in zip(z["target_labels"], z["target_q0"],
                                 z["target_inputs"]):
        targets.append({"label": str(label), "q0": q0,
                        "inputs": None if np.isnan(inputs[0])
                        else (float(inputs[0]), float(inputs[1]))})
    fit = FitResult(model, posteriors, post["gamma"], [], [], [], basis)
    return cfg, fit, scaling, targets


def write_predictions(out_dir, predictions, retain=False, names=None,
                      filename="summary.csv"):
    """Write ``filename`` (and samples.csv if ``retain``).

    Columns are trajectory, t, then mean, q025, q975 for each variable,
    suffixed with the variable name (default: its index).
    """
    out_dir = Path(out_dir)
    first = next(iter(predictions.values()))
    n_var = first.mean.shape[0]
    names = list(names) if names is not None else [str(i)
                                                    for i in range(n_var)]
    header = ["trajectory", "t"]
    for name in names:
        header += [f"mean_{name}", f"q025_{name}", f"q975_{name}"]
    with open(out_dir / filename, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for label, pred in predictions.items():
            for j, t in enumerate(pred.times):
                row = [label, format_float(t)]
                for i in range(n_var):
                    row += [format_float(pred.mean[i, j]),
                            format_float(pred.q025[i, j]),
                            format_float(pred.q975[i, j])]
                writer.writerow(row)
    if retain:
        with open(out_dir / "samples.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["trajectory", "sample", "t"]
                            + [f"q_{name}" for name in names])
            for label, pred in predictions.items():
                for k, sample in enumerate(pred.samples):
                    for j, t in enumerate(pred.times):
                        writer.writerow([label, k, format_float(t)]
                                        + [format_float(v)
                                           for v in sample[:, j]])


def write_manifest(out_dir, cfg, run_info):
    seeds = {"master": cfg.seed}
    for stream in _SEED_STREAMS:
        seeds[stream] = cfg.stream_seed(stream)
    manifest = {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seeds": seeds,
    }
    manifest.update(run_info)
    _dump_json(Path(out_dir) / "manifest.json", manifest)


def write_run(out_dir, run):
    """Write every output of an ExperimentRun."""
    out_dir = Path(out_dir)
    write_data(out_dir, run.data)
    write_fit(out_dir, run.config, run.fit, run.scaling, run.targets)
    write_predictions(out_dir, run.predictions, run.config.retain_samples)
    if run.physical:
        write_predictions(out_dir, run.physical, names=run.physical_labels,
                          filename="summary_physical.csv")
    if run.metrics:
        _dump_json(out_dir / "metrics.json", run.metrics)
    write_manifest(out_dir, run.config, {
        "timings_seconds": run.timings,
        "n_failed": {k: p.n_failed for k, p in run.predictions.items()},
    })


def write_report(run_dir):
    """Plot-ready CSV of truth versus prediction statistics.

    ``report.csv`` has columns trajectory, t, and per variable truth_i,
    mean_i, q025_i, q975_i, where truth is the clean solution in the model
    coordinates (POD coordinates for ROM benchmarks). For SEIRD,
    ``report_parameters.csv`` lists the posterior mean and standard
    deviation of each parameter next to its true value.
    """
    run_dir = Path(run_dir)
    cfg, fit, scaling, _ = load_fit(run_dir)
    data = {d.label: d for d in read_data(run_dir, kinds=("grid",))}
    with open(run_dir / "summary.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n_var = (len(header) - 2) // 3
    out = [["trajectory", "t"] + [f"{k}_{i}" for i in range(n_var)
                                  for k in ("truth", "mean", "q025", "q975")]]
    truths = {}
    for label, item in data.items():
        X = _to_model_space(cfg, item.grid.states, scaling)
        truths[label] = compress(fit.basis, X) if fit.basis is not None \
            else X
    counters = {}
    for row in body:
        label = row[0]
        j = counters.get(label, 0)
        counters[label] = j + 1
        truth = truths.get(label)
        line = [label, row[1]]
        for i in range(n_var):
            tv = format_float(truth[i, j]) if truth is not None else ""
            line += [tv] + row[2 + 3 * i: 5 + 3 * i]
        out.append(line)
    with open(run_dir / "report.csv", "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(out)
    written = [run_dir / "report.csv"]
    if cfg.benchmark == "SEIRD":
        post = fit.posteriors[0]
        names = ["beta", "delta", "(1-alpha)gamma", "alpha*rho"]
        with open(run_dir / "report_parameters.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["parameter", "truth", "posterior_mean",
                             "posterior_std"])
            for name, t, mu, sd in zip(names, SEIRD_TRUTH, post.mean,
                                       post.std):
                writer.writerow([name, format_float(t), format_float(mu),
                                 format_float(sd)])
        written.append(run_dir / "report_parameters.csv")
    return written
