"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the criterion lines are
printed as they are checked and repeated in the terminal summary.
"""

import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gpopinf.gp import FitConfig, gp_fit
from gpopinf.inference import RegressionBundle, op_post
from gpopinf.kernels import KernelHyperparams, kernel_d1, kernel_d1d2, \
    kernel_eval
from gpopinf.pipeline import experiments as ex
from gpopinf.pipeline.cli import main
from gpopinf.pipeline.config import SelectionSettings, named_config
from gpopinf.pipeline.core import gp_bayes_opinf, gp_bayes_opinf_multi, \
    predict
from oracles import gram, normal_equations, random_regression

SEEDS = range(20)


def check(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    assert ok, line


def seird_means(name, **overrides):
    means = []
    for seed in SEEDS:
        cfg = named_config(name, seed=seed, **overrides)
        data = ex.simulate(cfg)
        ex.make_observations(cfg, data)
        fit, _ = ex.fit_experiment(cfg, data)
        means.append(fit.posteriors[0].mean)
    return np.array(means)


@pytest.mark.slow
def test_criterion_1_seird_daily_noisy():
    t0 = time.perf_counter()
    med = np.median(seird_means("seird-noisy"), axis=0)
    elapsed = time.perf_counter() - t0
    tol = np.array([0.03, 0.02, 0.01, 0.001])
    truth = np.array([0.25, 0.10, 0.095, 0.0025])
    ok = bool(np.all(np.abs(med - truth) <= tol)) and elapsed <= 300
    check(1, ok, "median posterior means "
          f"{np.array2string(med, precision=5)} vs truth {truth} "
          f"(tol {tol}), {elapsed:.0f} s of 300 s")


@pytest.mark.slow
def test_criterion_2_seird_sparse():
    beta_120 = np.median(seird_means("seird-sparse")[:, 0])
    beta_60 = np.median(seird_means("seird-sparse", t_last_obs=59.0)[:, 0])
    ok = abs(beta_120 - 0.25) <= 0.05 and \
        abs(beta_60 - 0.25) > abs(beta_120 - 0.25)
    check(2, ok, f"median beta {beta_120:.4f} over 120 days (tol 0.05), "
          f"{beta_60:.4f} over 60 days (must be further from 0.25)")


@pytest.mark.slow
def test_criterion_3_seird_conservation():
    run = ex.run_experiment(named_config("seird-noisy"))
    cons = run.metrics["conservation"]
    pred = run.predictions["train_0"]
    worst = max(cons["samples_max_deviation"], cons["truth_max_deviation"])
    ok = worst <= 1e-8 and pred.samples.shape[0] == \
        pred.n_samples - pred.n_failed
    check(3, ok, f"max |sum of states - initial sum| = {worst:.2e} over "
          f"truth and {pred.samples.shape[0]} samples (tol 1e-8)")


@pytest.mark.slow
def test_criterion_4_noise_free_self_consistency():
    t0 = time.perf_counter()
    cfg = named_config("synthetic")
    data = ex.simulate(cfg)
    ex.make_observations(cfg, data)
    fit, _ = ex.fit_experiment(cfg, data)
    elapsed = time.perf_counter() - t0
    expected = ex.expected_synthetic_operator(fit.basis)
    mean = np.array([p.mean for p in fit.posteriors])
    std = np.array([p.std for p in fit.posteriors])
    scale = np.max(np.abs(expected))
    err = np.max(np.abs(mean - expected)) / scale
    spread = np.max(std) / scale
    ok = err <= 1e-2 and spread <= 1e-2 and elapsed <= 30
    check(4, ok, f"coefficient error {err:.2e}, largest std {spread:.2e} "
          f"(both relative to the coefficient scale, tol 1e-2), "
          f"{elapsed:.1f} s of 30 s")


def test_criterion_5_oracle_equivalence():
    rng = np.random.default_rng(20240)
    worst_mean = worst_inv = 0.0
    for _ in range(50):
        D, z, Ws, gamma = random_regression(rng)
        post = op_post(RegressionBundle(D, z, Ws), gamma)
        mu, _, _ = normal_equations(D, z, Ws, gamma)
        worst_mean = max(worst_mean, np.linalg.norm(post.mean - mu)
                         / np.linalg.norm(mu))
        eye = np.eye(D.shape[1])
        worst_inv = max(worst_inv, np.max(np.abs(
            post.covariance @ gram(D, Ws, gamma) - eye)))
    ok = worst_mean <= 1e-8 and worst_inv <= 1e-8
    check(5, ok, f"50 instances: mean rel. error {worst_mean:.2e}, "
          f"max |Sigma G - I| {worst_inv:.2e} (tol 1e-8)")


SIGNALS = {
    "sin": (lambda t: np.sin(2 * np.pi * t),
            lambda t: 2 * np.pi * np.cos(2 * np.pi * t)),
    "exp": (np.exp, np.exp),
}


def test_criterion_6_gp_derivative_fidelity():
    worst_deriv = worst_fd = 0.0
    for name, (f, df) in SIGNALS.items():
        for m in (50, 100):
            for seed in range(3):
                rng = np.random.default_rng([seed, m])
                t = np.linspace(0, 1, m)
                y = f(t)
                y = y + 0.01 * np.ptp(y) * rng.standard_normal(m)
                est = gp_fit(t, y, t, config=FitConfig(seed=seed))
                interior = (t >= 0.1) & (t <= 0.9)
                worst_deriv = max(worst_deriv, np.max(np.abs(
                    est.z_tilde - df(t))[interior]) / np.max(np.abs(df(t))))
                dense = np.linspace(0, 1, 401)
                de = gp_fit(t, y, dense, hp=est.hp)
                fd = np.gradient(de.y_tilde, dense)
                worst_fd = max(worst_fd, np.max(np.abs(
                    fd - de.z_tilde)[1:-1]) / np.max(np.abs(de.z_tilde)))
    ok = worst_deriv <= 0.05 and worst_fd <= 1e-3
    check(6, ok, f"interior derivative error {worst_deriv:.3f} of max "
          f"|f'| (tol 0.05), central differences {worst_fd:.1e} (tol 1e-3)")


def test_criterion_7_kernel_derivatives():
    rng = np.random.default_rng(7)
    worst1 = worst2 = 0.0
    h = 1e-5
    for _ in range(100):
        hp = KernelHyperparams(float(np.exp(rng.uniform(-3, 3))),
                               float(np.exp(rng.uniform(-2, 2))), 1e-6)
        a, b = rng.uniform(-3, 3, 2) * hp.lengthscale
        fd1 = (kernel_eval(a + h, b, hp) - kernel_eval(a - h, b, hp)) / (2 * h)
        fd2 = (kernel_d1(a, b + h, hp) - kernel_d1(a, b - h, hp)) / (2 * h)
        s, ell = hp.signal_variance, hp.lengthscale
        worst1 = max(worst1, float(abs(kernel_d1(a, b, hp) - fd1))
                     / (s / ell))
        worst2 = max(worst2, float(abs(kernel_d1d2(a, b, hp) - fd2))
                     / (s / ell**2))
    ok = worst1 <= 1e-6 and worst2 <= 1e-4
    check(7, ok, f"100 evaluations: d1 error {worst1:.1e} sigma^2/ell "
          f"(tol 1e-6), d1d2 error {worst2:.1e} sigma^2/ell^2 (tol 1e-4)")


@pytest.mark.slow
def test_criterion_8_euler_desk_scale():
    t0 = time.perf_counter()
    run = ex.run_experiment(named_config("euler-desk"))
    elapsed = time.perf_counter() - t0
    m = run.metrics["trajectories"]["train_0"]
    ok = m["error_ratio"] <= 2.0 and \
        m["band_width_predict"] > m["band_width_train"] and elapsed <= 600
    check(8, ok, f"training error / projection error = "
          f"{m['error_ratio']:.3f} (tol 2), band width "
          f"{m['band_width_train']:.3g} -> {m['band_width_predict']:.3g}, "
          f"{m['n_failed']} failed samples, {elapsed:.0f} s of 600 s")


def single_heat_trajectory():
    cfg = named_config("heat-multi", inputs=[[-2, 0]], holdout_inputs=[],
                       selection=SelectionSettings(grid_points=9,
                                                   n_samples=8))
    data = ex.simulate(cfg)
    ex.make_observations(cfg, data)
    item = data[0]
    snaps = ex._to_model_space(cfg, item.observed.states)
    sel = cfg.selection.selection_config(cfg.t_final,
                                         cfg.stream_seed("selection"))
    kw = dict(selection=sel, fit_config=cfg.gp.fit_config(
        cfg.stream_seed("gp")), tau=cfg.gp.tau)
    return cfg, item, snaps, kw


@pytest.mark.slow
def test_criterion_9_multi_trajectory():
    cfg, item, snaps, kw = single_heat_trajectory()
    structure = ex._structure(cfg)
    u = ex._input_fn(item)
    one = gp_bayes_opinf(snaps, item.observed.times, structure, cfg.m_est,
                         u, **kw)
    multi = gp_bayes_opinf_multi([snaps], [item.observed.times], structure,
                                 cfg.m_est, [u], **kw)
    identical = np.array_equal(one.gamma, multi.gamma) and all(
        np.array_equal(a.mean, b.mean)
        and np.array_equal(a.covariance, b.covariance)
        for a, b in zip(one.posteriors, multi.posteriors))
    q0 = np.array([e.y_tilde[0] for e in one.estimates[0]])
    t = np.linspace(0, cfg.t_final, 21)
    pa = predict(one, q0, t, 20, seed=5, input_fn=u)
    pb = predict(multi, q0, t, 20, seed=5, input_fn=u)
    identical = identical and np.array_equal(pa.mean, pb.mean)

    run = ex.run_experiment(named_config("heat-multi"))
    traj = run.metrics["trajectories"]
    ratios = {k: v["error_ratio"] for k, v in traj.items()
              if k.startswith("train_")}
    hold = run.predictions.get("holdout_0")
    held_ok = hold is not None and bool(np.all(np.isfinite(hold.mean)))
    ok = identical and max(ratios.values()) <= 2.0 and len(ratios) == 5 \
        and held_ok
    check(9, ok, f"single-trajectory bit identity {identical}; training/"
          f"projection error ratios {max(ratios.values()):.3f} max over "
          f"{len(ratios)} trajectories (tol 2); held-out (1.5, 0.5) "
          f"prediction {'finite' if held_ok else 'missing'}")


@pytest.mark.slow
def test_criterion_10_determinism(tmp_path):
    same = {}
    for args in (["synthetic"], ["seird-noisy", "--samples", "100"]):
        outs = [tmp_path / f"{args[0]}_{k}" for k in range(2)]
        codes = [main(["experiment", *args, "--out", str(o)]) for o in outs]
        for name in ("posterior.json", "summary.csv"):
            same[f"{args[0]}/{name}"] = codes == [0, 0] and \
                (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        json.loads((outs[0] / "posterior.json").read_text())
    ok = all(same.values())
    check(10, ok, "byte-identical reruns: " + ", ".join(
        f"{k} {'yes' if v else 'NO'}" for k, v in same.items()))
