"""Batched simulation of sampled reduced models.

Two model families share one interface:

* :class:`PolynomialROM`: dq/dt = O d(q, u) with an (r, d) operator matrix
  per sample and r independent posterior rows.
* :class:`StructuredODE`: dq/dt = S(q, u) o with one shared parameter vector
  per sample (a single posterior "row").

Samples are stored as (n_samples, n_rows, d) arrays in both cases.
"""

__all__ = [
    "IntegratorConfig",
    "PolynomialROM",
    "StructuredODE",
    "simulate_samples",
    "simulate_each",
]

from dataclasses import dataclass, asdict

import numpy as np

from .dynamics.integrators import (BoundExceeded, IntegrationError,
                                  integrate_rk45)
from .structure import MissingInputs, ModelStructure, rom_rhs


@dataclass(frozen=True)
class IntegratorConfig:
    """Explicit Runge-Kutta settings used for every ROM solve."""

    rtol: float = 1e-6
    atol: float = 1e-9
    max_steps: int = 20000

    def to_dict(self):
        return asdict(self)


class PolynomialROM:
    """Reduced model dq/dt = O d(q, u) for a polynomial structure."""

    def __init__(self, structure):
        if not isinstance(structure, ModelStructure):
            raise TypeError("structure must be a ModelStructure")
        self.structure = structure

    @property
    def r(self):
        return self.structure.r

    @property
    def n_rows(self):
        return self.structure.r

    @property
    def d(self):
        return self.structure.d

    def rhs(self, samples, input_fn=None):
        """Batched right-hand side f(t, Q) for Q of shape (k, r)."""
        samples = np.asarray(samples, dtype=float)
        structure = self.structure
        if structure.needs_inputs and input_fn is None:
            raise MissingInputs(f"structure {structure.terms} needs an "
                                "input function")

        def f(t, Q):
            u = input_fn(t) if structure.needs_inputs else None
            return rom_rhs(samples, Q, u, structure)
        return f


class StructuredODE:
    """ODE dq/dt = S(q, u) o with a known structure-matrix function.

    Parameters
    ----------
    structure_fn : callable ``structure_fn(q) -> (..., r, d)``
        Batched structure matrix (inputs, if any, are bound by the caller).
    r : int
        State dimension.
    d : int
        Parameter dimension.
    """

    n_rows = 1

    def __init__(self, structure_fn, r, d):
        self.structure_fn = structure_fn
        self.r = int(r)
        self.d = int(d)

    def rhs(self, samples, input_fn=None):
        params = np.asarray(samples, dtype=float)[:, 0, :]
        fn = self.structure_fn

        def f(t, Q):
            return np.einsum("kij,kj->ki", fn(Q), params)
        return f


def simulate_samples(model, samples, q0, t_span, output_times, input_fn=None,
                     bound=None, config=None):
    """Integrate all samples as one batched system.

    Parameters
    ----------
    model : PolynomialROM or StructuredODE
    samples : (k, n_rows, d) ndarray
    q0 : (r,) ndarray
        Common initial condition.
    t_span : (t0, tf)
    output_times : array_like
    bound : float or None
        Abort as soon as any entry of any sample exceeds this magnitude.
    config : IntegratorConfig or None

    Returns
    -------
    (k, r, n_out) ndarray

    Raises
    ------
    IntegrationError
        Including BoundExceeded, StepSizeUnderflow and TooManySteps.
    """
    config = config or IntegratorConfig()
    samples = np.asarray(samples, dtype=float)
    Q0 = np.tile(np.asarray(q0, dtype=float), (samples.shape[0], 1))
    with np.errstate(over="ignore", invalid="ignore"):
        traj = integrate_rk45(model.rhs(samples, input_fn), Q0, t_span,
                              output_times, rtol=config.rtol,
                              atol=config.atol, bound=bound,
                              max_steps=config.max_steps)
    if bound is not None and traj.max_abs > bound:
        raise BoundExceeded(f"|q| = {traj.max_abs:.3e} > {bound:.3e}")
    if not np.all(np.isfinite(traj.states)):
        raise IntegrationError("non-finite ROM solution")
    return traj.states


def simulate_each(model, samples, q0, t_span, output_times, input_fn=None,
                  config=None):
    """Integrate samples, isolating the ones that fail.

    The batch is integrated as a whole; if that fails it is split in half
    and each half retried, down to single samples. Failed samples are
    reported, not raised.

    Returns
    -------
    states : (k, r, n_out) ndarray
        NaN for failed samples.
    failed : (k,) bool ndarray
    """
    samples = np.asarray(samples, dtype=float)
    n_out = np.asarray(output_times).size
    out = np.full((samples.shape[0], model.r, n_out), np.nan)
    failed = np.zeros(samples.shape[0], dtype=bool)
    pending = [(0, samples.shape[0])]
    while pending:
        lo, hi = pending.pop()
        try:
            out[lo:hi] = simulate_samples(model, samples[lo:hi], q0, t_span,
                                          output_times, input_fn,
                                          config=config)
        except IntegrationError:
            if hi - lo == 1:
                failed[lo] = True
            else:
                mid = (lo + hi) // 2
                pending.extend([(mid, hi), (lo, mid)])
    return out, failed
