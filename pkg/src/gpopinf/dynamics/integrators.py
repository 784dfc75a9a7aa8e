"""Time integrators: Dormand-Prince 5(4) with dense output, and an implicit
trapezoidal scheme for stiff problems.

Both take ``rhs(t, q)`` and return a :class:`Trajectory` sampled at the
requested output times. The explicit integrator accepts a state of shape
(n,) or (k, n); in the batched case the k systems share one step-size
sequence and the error norm is the worst per-system RMS norm.
"""

__all__ = [
    "Trajectory",
    "IntegrationError",
    "StepSizeUnderflow",
    "BoundExceeded",
    "TooManySteps",
    "NewtonDivergence",
    "integrate_rk45",
    "integrate_implicit",
]

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la


class IntegrationError(RuntimeError):
    """Base class for integration failures."""


class StepSizeUnderflow(IntegrationError):
    """Step size fell below the resolvable limit (stiffness or blow-up)."""


class TooManySteps(IntegrationError):
    """The step budget ran out before the end of the interval."""


class BoundExceeded(IntegrationError):
    """The solution magnitude passed the caller's bound."""


class NewtonDivergence(IntegrationError):
    """The implicit stage equation could not be solved."""


@dataclass
class Trajectory:
    """States sampled at increasing times.

    Attributes
    ----------
    times : (n_t,) ndarray
    states : (..., n_t) ndarray
        Last axis indexes time; for a single system this is (n_state, n_t).
    labels : list of str
        Optional variable names (one per state row).
    nsteps : int
        Number of accepted steps taken.
    max_abs : float
        Largest absolute state value seen at any step or output time.
    """

    times: np.ndarray
    states: np.ndarray
    labels: list = field(default_factory=list)
    nsteps: int = 0
    max_abs: float = np.nan

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape[-1] != self.times.size:
            raise ValueError(
                f"{self.states.shape[-1]} state columns for "
                f"{self.times.size} times")


# Dormand-Prince 5(4) tableau.
_C = np.array([0, 1/5, 3/10, 4/5, 8/9, 1, 1])
_A = [
    [],
    [1/5],
    [3/40, 9/40],
    [44/45, -56/15, 32/9],
    [19372/6561, -25360/2187, 64448/6561, -212/729],
    [9017/3168, -355/33, 46732/5247, 49/176, -5103/18656],
    [35/384, 0, 500/1113, 125/192, -2187/6784, 11/84],
]
_B = np.array([35/384, 0, 500/1113, 125/192, -2187/6784, 11/84, 0])
# Difference between the 5th and embedded 4th order weights.
_E = np.array([-71/57600, 0, 71/16695, -71/1920, 17253/339200, -22/525,
               1/40])
# Shampine's quartic continuous extension: y(t + s h) = y + h K^T (P s^k).
_P = np.array([
    [1, -8048581381/2820520608, 8663915743/2820520608,
     -12715105075/11282082432],
    [0, 0, 0, 0],
    [0, 131558114200/32700410799, -68118460800/10900136933,
     87487479700/32700410799],
    [0, -1754552775/470086768, 14199869525/1410260304,
     -10690763975/1880347072],
    [0, 127303824393/49829197408, -318862633887/49829197408,
     701980252875/199316789632],
    [0, -282668133/205662961, 2019193451/616988883, -1453857185/822651844],
    [0, 40617522/29380423, -110615467/29380423, 69997945/29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


def _error_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    ratio = (err / scale)**2
    return float(np.sqrt(np.max(np.mean(ratio, axis=-1))))


def _initial_step(rhs, t0, y0, f0, direction, rtol, atol):
    """Starting step selection (Hairer, Norsett & Wanner, Sec. II.4)."""
    scale = atol + np.abs(y0) * rtol
    d0 = np.sqrt(np.mean((y0 / scale)**2))
    d1 = np.sqrt(np.mean((f0 / scale)**2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = rhs(t0 + h0 * direction, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale)**2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2))**(1 / 5)
    return min(100 * h0, h1)


def _stages(rhs, t, y, f0, h):
    K = np.empty((7,) + y.shape)
    K[0] = f0
    for s in range(1, 7):
        dy = sum(a * K[j] for j, a in enumerate(_A[s]) if a != 0)
        K[s] = rhs(t + _C[s] * h, y + h * dy)
    return K


def integrate_rk45(rhs, q0, t_span, output_times=None, rtol=1e-6, atol=1e-9,
                   max_step=np.inf, first_step=None, fixed_step=None,
                   bound=None, min_step_factor=10.0, max_steps=None, labels=None):
    """Integrate ``dq/dt = rhs(t, q)`` with the Dormand-Prince 5(4) pair.

    Parameters
    ----------
    rhs : callable ``rhs(t, q) -> dq/dt``
        Must accept and return arrays shaped like ``q0``.
    q0 : (n,) or (k, n) array_like
        Initial state (or batch of states).
    t_span : (t0, tf)
    output_times : array_like or None
        Times in ``t_span`` at which to report the solution (dense output).
        Defaults to ``[t0, tf]``.
    rtol, atol : float
        Local error tolerances.
    max_step : float
        Largest permitted step.
    fixed_step : float or None
        If given, take uniform steps of (about) this size with no error
        control. Used for convergence studies.
    bound : float or None
        Abort with :class:`BoundExceeded` as soon as any |q| exceeds this.
    min_step_factor : float
        Steps smaller than ``min_step_factor * eps * |t|`` raise
        :class:`StepSizeUnderflow`.
    max_steps : int or None
        Raise :class:`TooManySteps` after this many attempted steps.

    Returns
    -------
    Trajectory
        ``states`` has shape ``q0.shape + (n_out,)``.
    """
    t0, tf = map(float, t_span)
    y = np.array(q0, dtype=float)
    direction = 1.0 if tf >= t0 else -1.0
    if output_times is None:
        output_times = np.array([t0, tf])
    t_out = np.asarray(output_times, dtype=float)
    lo, hi = min(t0, tf), max(t0, tf)
    span_tol = 1e-12 * max(1.0, abs(hi), abs(lo))
    if np.any(t_out < lo - span_tol) or np.any(t_out > hi + span_tol):
        raise ValueError("output_times must lie inside t_span")
    if np.any(np.diff(t_out) * direction < 0):
        raise ValueError("output_times must be monotone in the "
                         "integration direction")

    out = np.empty(y.shape + (t_out.size,))
    f = np.asarray(rhs(t0, y), dtype=float)
    if not np.all(np.isfinite(f)):
        raise IntegrationError("rhs is not finite at the initial state")

    k_out = 0
    while k_out < t_out.size and (t_out[k_out] - t0) * direction <= 0:
        out[..., k_out] = y
        k_out += 1

    max_abs = float(np.max(np.abs(y))) if y.size else 0.0
    if bound is not None and max_abs > bound:
        raise BoundExceeded(f"|q| = {max_abs:.3e} > {bound:.3e} at t={t0}")

    if fixed_step is not None:
        nfixed = max(1, int(np.ceil(abs(tf - t0) / fixed_step - 1e-9)))
        h_abs = abs(tf - t0) / nfixed
    elif first_step is not None:
        h_abs = min(float(first_step), max_step)
    else:
        h_abs = min(_initial_step(rhs, t0, y, f, direction, rtol, atol),
                    max_step)

    t = t0
    nsteps = attempts = 0
    eps = np.finfo(float).eps
    while (tf - t) * direction > 0:
        attempts += 1
        if max_steps is not None and attempts > max_steps:
            raise TooManySteps(f"{max_steps} steps reached at t={t:.6g}")
        min_step = min_step_factor * eps * max(abs(t), abs(tf - t0), 1e-300)
        if fixed_step is None and h_abs < min_step:
            raise StepSizeUnderflow(
                f"step size {h_abs:.3e} below {min_step:.3e} at t={t:.6g}")
        h_abs = min(h_abs, max_step)
        if (t + direction * h_abs - tf) * direction > 0:
            h_abs = abs(tf - t)
        h = direction * h_abs

        with np.errstate(over="ignore", invalid="ignore"):
            K = _stages(rhs, t, y, f, h)
            y_new = y + h * np.tensordot(_B, K, axes=1)
            finite = np.all(np.isfinite(K)) and np.all(np.isfinite(y_new))
            if fixed_step is None:
                err = h * np.tensordot(_E, K, axes=1)
                err_norm = (_error_norm(err, y, y_new, rtol, atol)
                            if finite else np.inf)
            else:
                err_norm = 0.0 if finite else np.inf
        if fixed_step is not None and not finite:
            raise IntegrationError(f"non-finite state at t={t:.6g}")

        if err_norm > 1 or not np.isfinite(err_norm):
            factor = _MIN_FACTOR if not np.isfinite(err_norm) else max(
                _MIN_FACTOR, _SAFETY * err_norm**-0.2)
            h_abs *= factor
            continue

        t_new = t + h
        # Dense output on (t, t_new].
        if k_out < t_out.size and (t_out[k_out] - t_new) * direction <= 0:
            Q = np.tensordot(_P.T, K, axes=([1], [0]))  # (4, ...) coeffs
            while k_out < t_out.size and \
                    (t_out[k_out] - t_new) * direction <= 0:
                s = (t_out[k_out] - t) / h
                powers = np.cumprod(np.full(4, s))
                out[..., k_out] = y + h * np.tensordot(powers, Q, axes=1)
                k_out += 1

        y, t = y_new, t_new
        f = rhs(t, y)
        nsteps += 1
        step_max = float(np.max(np.abs(y)))
        max_abs = max(max_abs, step_max)
        if bound is not None and step_max > bound:
            raise BoundExceeded(
                f"|q| = {step_max:.3e} > {bound:.3e} at t={t:.6g}")

        if fixed_step is None:
            factor = _MAX_FACTOR if err_norm == 0 else min(
                _MAX_FACTOR, _SAFETY * err_norm**-0.2)
            h_abs *= factor

    while k_out < t_out.size:
        out[..., k_out] = y
        k_out += 1
    if out.size:
        max_abs = max(max_abs, float(np.max(np.abs(out))))
    return Trajectory(t_out, out, list(labels or []), nsteps, max_abs)


def _fd_jacobian(fun, t, y, f0):
    n = y.size
    J = np.empty((n, n))
    h = np.sqrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(y))
    for j in range(n):
        yj = y.copy()
        yj[j] += h[j]
        J[:, j] = (fun(t, yj) - f0) / h[j]
    return J


def integrate_implicit(rhs, q0, t_span, output_times=None, fixed_step=1e-3,
                       jacobian=None, newton_tol=1e-10, max_newton=20,
                       labels=None):
    """Trapezoidal-rule integration with damped Newton stage solves.

    Parameters
    ----------
    rhs : callable ``rhs(t, q) -> dq/dt`` for q of shape (n,)
    q0 : (n,) array_like
    t_span : (t0, tf)
    output_times : array_like or None
        Reporting times; values between steps use cubic Hermite
        interpolation of the step endpoints.
    fixed_step : float
        Nominal step; the interval is split into equal steps no larger.
    jacobian : callable ``jacobian(t, q) -> (n, n)`` or None
        If None, a forward-difference Jacobian is formed once per step.
    newton_tol : float
        Convergence tolerance on the scaled Newton update.

    Returns
    -------
    Trajectory
    """
    t0, tf = map(float, t_span)
    y = np.array(q0, dtype=float)
    if y.ndim != 1:
        raise ValueError("implicit integrator expects a 1D state")
    nsteps = max(1, int(np.ceil(abs(tf - t0) / fixed_step - 1e-9)))
    h = (tf - t0) / nsteps
    if output_times is None:
        output_times = np.array([t0, tf])
    t_out = np.asarray(output_times, dtype=float)
    out = np.empty((y.size, t_out.size))
    eye = np.eye(y.size)

    f = np.asarray(rhs(t0, y), dtype=float)
    k_out = 0
    while k_out < t_out.size and (t_out[k_out] - t0) * np.sign(h) <= 0:
        out[:, k_out] = y
        k_out += 1
    max_abs = float(np.max(np.abs(y)))

    t = t0
    for step in range(nsteps):
        t_new = t0 + (step + 1) * h
        J = jacobian(t_new, y) if jacobian is not None \
            else _fd_jacobian(rhs, t_new, y, rhs(t_new, y))
        lu = la.lu_factor(eye - 0.5 * h * J)
        # Predictor: explicit Euler.
        z = y + h * f
        fz = rhs(t_new, z)
        resid = z - y - 0.5 * h * (f + fz)
        rnorm = np.linalg.norm(resid)
        converged = False
        for _ in range(max_newton):
            dz = -la.lu_solve(lu, resid)
            lam = 1.0
            while True:
                trial = z + lam * dz
                with np.errstate(over="ignore", invalid="ignore"):
                    ftrial = rhs(t_new, trial)
                    rtrial = trial - y - 0.5 * h * (f + ftrial)
                    tnorm = np.linalg.norm(rtrial)
                if np.isfinite(tnorm) and (tnorm <= (1 - 1e-4 * lam) * rnorm
                                           or tnorm < 1e-14):
                    break
                lam *= 0.5
                if lam < 1e-4:
                    raise NewtonDivergence(
                        f"line search failed at t={t_new:.6g}")
            z, fz, resid, rnorm = trial, ftrial, rtrial, tnorm
            scale = 1.0 + np.linalg.norm(z)
            if np.linalg.norm(lam * dz) <= newton_tol * scale \
                    or rnorm <= newton_tol * scale:
                converged = True
                break
        if not converged:
            raise NewtonDivergence(f"no convergence at t={t_new:.6g}")

        while k_out < t_out.size and (t_out[k_out] - t_new) * np.sign(h) <= 0:
            s = (t_out[k_out] - t) / h
            h00 = 2 * s**3 - 3 * s**2 + 1
            h10 = s**3 - 2 * s**2 + s
            h01 = -2 * s**3 + 3 * s**2
            h11 = s**3 - s**2
            out[:, k_out] = h00 * y + h10 * h * f + h01 * z + h11 * h * fz
            k_out += 1
        y, f, t = z, fz, t_new
        max_abs = max(max_abs, float(np.max(np.abs(y))))

    while k_out < t_out.size:
        out[:, k_out] = y
        k_out += 1
    return Trajectory(t_out, out, list(labels or []), nsteps, max_abs)
