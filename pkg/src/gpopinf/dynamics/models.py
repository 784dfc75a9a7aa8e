"""Benchmark full-order models and their lifting transformations.

* 1D compressible Euler equations on the periodic domain [0, 2), first-order
  upwind differences, lifted to specific-volume variables (v, p, 1/rho).
* 1D diffusion-reaction equation with a cubic sink and a two-bump source,
  lifted with the auxiliary variable w = q^2.
* SEIRD compartmental epidemic model written as S(q) o for a parameter
  vector o.
"""

__all__ = [
    "NonphysicalState",
    "GAMMA_HEAT",
    "euler_grid",
    "euler_fom_rhs",
    "euler_initial_condition",
    "lift_euler",
    "unlift_euler",
    "EulerScaling",
    "HEAT_MU",
    "heat_grid",
    "heat_source",
    "heat_input",
    "heat_source_shapes",
    "heat_initial_condition",
    "heat_fom_rhs",
    "heat_jacobian",
    "heat_with_boundaries",
    "lift_heat",
    "SEIRD_LABELS",
    "SEIRD_Q0",
    "SEIRD_TRUTH",
    "seird_structure",
    "seird_rhs",
    "SYNTHETIC_OPERATOR",
    "SYNTHETIC_Q0",
    "synthetic_rhs",
]

from dataclasses import dataclass

import numpy as np
import scipy.interpolate

GAMMA_HEAT = 1.4


class NonphysicalState(ValueError):
    """Density (or another strictly positive quantity) is not positive."""


# Euler ---------------------------------------------------------------------

def euler_grid(n_x):
    """Uniform periodic grid x_i = 2 i / n_x on [0, 2)."""
    if n_x < 3:
        raise ValueError("n_x must be at least 3")
    return np.arange(n_x) * (2.0 / n_x)


def _split3(q):
    q = np.asarray(q, dtype=float)
    if q.shape[0] % 3:
        raise ValueError(f"state length {q.shape[0]} is not a multiple of 3")
    n = q.shape[0] // 3
    return q[:n], q[n:2 * n], q[2 * n:]


def euler_fom_rhs(q, gamma_heat=GAMMA_HEAT):
    """Time derivative of the conservative Euler state (rho, rho v, rho e).

    Parameters
    ----------
    q : (3 n_x,) or (3 n_x, k) ndarray
        Stacked conservative variables on the periodic grid.
    gamma_heat : float
        Heat capacity ratio.

    Notes
    -----
    The flux divergence uses first-order upwind (backward, left-to-right)
    differences (F_i - F_{i-1}) / dx with periodic wrap. The benchmark flow
    is supersonic and moves in +x, so every characteristic travels right.
    """
    rho, mom, ener = _split3(q)
    if np.any(rho <= 0):
        raise NonphysicalState("density must be positive")
    n_x = rho.shape[0]
    dx = 2.0 / n_x
    v = mom / rho
    p = (gamma_heat - 1) * (ener - 0.5 * mom * v)
    fluxes = (mom, mom * v + p, (ener + p) * v)
    return -np.concatenate(
        [(F - np.roll(F, 1, axis=0)) / dx for F in fluxes], axis=0)


def euler_initial_condition(n_x, gamma_heat=GAMMA_HEAT, pressure=1e5):
    """Conservative initial state from periodic splines of rho and v.

    rho passes through (0, 22), (2/3, 20), (4/3, 24); v through (0, 95),
    (2/3, 105), (4/3, 100); the pressure is uniform.
    """
    x = euler_grid(n_x)
    knots = np.array([0, 2 / 3, 4 / 3, 2])
    rho_s = scipy.interpolate.CubicSpline(knots, [22, 20, 24, 22],
                                          bc_type="periodic")
    v_s = scipy.interpolate.CubicSpline(knots, [95, 105, 100, 95],
                                        bc_type="periodic")
    rho, v = rho_s(x), v_s(x)
    p = np.full(n_x, float(pressure))
    ener = p / (gamma_heat - 1) + 0.5 * rho * v**2
    return np.concatenate([rho, rho * v, ener])


def lift_euler(q, gamma_heat=GAMMA_HEAT):
    """Conservative (rho, rho v, rho e) to specific-volume (v, p, 1/rho).

    Works columnwise on (3 n_x, k) arrays. No scaling is applied; see
    :class:`EulerScaling`.
    """
    rho, mom, ener = _split3(q)
    if np.any(rho <= 0):
        raise NonphysicalState("density must be positive")
    v = mom / rho
    p = (gamma_heat - 1) * (ener - 0.5 * mom * v)
    return np.concatenate([v, p, 1 / rho], axis=0)


def unlift_euler(w, gamma_heat=GAMMA_HEAT):
    """Inverse of :func:`lift_euler`."""
    v, p, zeta = _split3(w)
    if np.any(zeta <= 0):
        raise NonphysicalState("specific volume must be positive")
    rho = 1 / zeta
    return np.concatenate([rho, rho * v, p / (gamma_heat - 1)
                           + 0.5 * rho * v**2], axis=0)


@dataclass
class EulerScaling:
    """Per-variable scale factors for the lifted Euler state.

    Each of the three variable blocks (v, p, zeta) is divided by its own
    positive scale.
    """

    scales: np.ndarray

    @classmethod
    def from_snapshots(cls, lifted):
        """Scales equal to the max-abs of each block of ``lifted``."""
        blocks = _split3(lifted)
        scales = np.array([np.max(np.abs(b)) for b in blocks])
        if np.any(scales <= 0):
            raise ValueError("cannot scale an identically zero block")
        return cls(scales)

    def _factor(self, n3, ndim):
        f = np.repeat(self.scales, n3 // 3)
        return f if ndim == 1 else f[:, None]

    def apply(self, lifted):
        lifted = np.asarray(lifted, dtype=float)
        return lifted / self._factor(lifted.shape[0], lifted.ndim)

    def invert(self, scaled):
        scaled = np.asarray(scaled, dtype=float)
        return scaled * self._factor(scaled.shape[0], scaled.ndim)


# Diffusion-reaction ----------------------------------------------------------

HEAT_MU = 0.005


def heat_grid(n_x):
    """Interior nodes x_i = i / (n_x + 1), i = 1..n_x, of [0, 1]."""
    if n_x < 3:
        raise ValueError("n_x must be at least 3")
    return np.arange(1, n_x + 1) / (n_x + 1)


def heat_source_shapes(x):
    """The two spatial bump profiles multiplying a sin(2 pi t), b sin(4 pi t)."""
    x = np.asarray(x, dtype=float)
    return (1 / (1 + 100 * (x - 0.25)**2), 1 / (1 + 100 * (x - 0.75)**2))


def heat_source(x, t, a, b):
    """Source term u(x, t; a, b)."""
    g1, g2 = heat_source_shapes(x)
    return a * np.sin(2 * np.pi * t) * g1 + b * np.sin(4 * np.pi * t) * g2


def heat_input(t, a, b):
    """ROM input vector (a sin 2 pi t, b sin 4 pi t) at time ``t``."""
    return np.array([a * np.sin(2 * np.pi * t), b * np.sin(4 * np.pi * t)])


def heat_initial_condition(x):
    """Initial profile q0(x); satisfies q0(0) = 0 and q0(1) = 1."""
    x = np.asarray(x, dtype=float)
    return x * (1 - x) * (6 * (1 - x)**2 * np.exp(-x)
                          - 10 * np.exp(x) * np.sin(x / 6)) + x


def heat_fom_rhs(s, t, a, b, mu=HEAT_MU):
    """Semi-discrete diffusion-reaction right-hand side on interior nodes.

    Second-order central differences with Dirichlet values q(0) = 0 and
    q(1) = 1 folded into the end stencils, cubic sink -q^3 and source
    u(x, t; a, b).
    """
    s = np.asarray(s, dtype=float)
    n_x = s.shape[0]
    dx = 1.0 / (n_x + 1)
    padded = np.concatenate([[0.0], s, [1.0]])
    lap = (padded[:-2] - 2 * s + padded[2:]) / dx**2
    return mu * lap - s**3 + heat_source(heat_grid(n_x), t, a, b)


def heat_jacobian(s, mu=HEAT_MU):
    """Dense Jacobian of :func:`heat_fom_rhs` with respect to ``s``."""
    s = np.asarray(s, dtype=float)
    n_x = s.size
    c = mu * (n_x + 1)**2
    J = np.diag(np.full(n_x - 1, c), 1) + np.diag(np.full(n_x - 1, c), -1)
    J[np.diag_indices(n_x)] = -2 * c - 3 * s**2
    return J


def heat_with_boundaries(s):
    """Append the boundary values 0 and 1 to interior states (n_x[, k])."""
    s = np.asarray(s, dtype=float)
    tail = s.shape[1:]
    return np.concatenate([np.zeros((1,) + tail), s, np.ones((1,) + tail)])


def lift_heat(s):
    """Lifted state (s, s*s) for (n,) or (n, k) input."""
    s = np.asarray(s, dtype=float)
    return np.concatenate([s, s * s], axis=0)


# SEIRD ---------------------------------------------------------------------

SEIRD_LABELS = ("S", "E", "I", "R", "D")
SEIRD_Q0 = np.array([0.994, 0.005, 0.001, 0.0, 0.0])
# (beta, delta, (1 - alpha) gamma, alpha rho)
SEIRD_TRUTH = np.array([0.25, 0.1, 0.095, 0.0025])


def seird_structure(q):
    """Structure matrix S(q) (5 x 4) with dq/dt = S(q) o.

    Accepts a batch (..., 5) and returns (..., 5, 4).
    """
    q = np.asarray(q, dtype=float)
    S, E, I = q[..., 0], q[..., 1], q[..., 2]
    out = np.zeros(q.shape[:-1] + (5, 4))
    out[..., 0, 0] = -S * I
    out[..., 1, 0] = S * I
    out[..., 1, 1] = -E
    out[..., 2, 1] = E
    out[..., 2, 2] = -I
    out[..., 2, 3] = -I
    out[..., 3, 2] = I
    out[..., 4, 3] = I
    return out


def seird_rhs(q, params):
    """SEIRD derivative S(q) o; ``params`` may be batched (..., 4)."""
    return np.einsum("...ij,...j->...i", seird_structure(q),
                     np.asarray(params, dtype=float))


# Synthetic quadratic system -------------------------------------------------

# Columns: constant, linear (3), compressed quadratic
# (q0q0, q0q1, q0q2, q1q1, q1q2, q2q2).
SYNTHETIC_OPERATOR = np.array([
    [0.0, -0.1, -2.0, 0.0, 0.0, 0.0, -0.3, 0.0, 0.0, 0.0],
    [0.0, 2.0, -0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0],
    [0.0, 0.0, 0.0, -0.5, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
])
SYNTHETIC_Q0 = np.array([2.0, 0.0, 0.0])


def synthetic_rhs(q):
    """Slowly decaying spiral in (q0, q1) driving q2 through q0 q1.

    Every linear and quadratic monomial keeps varying over [0, 20], so the
    generator is identifiable from a single trajectory.

    Accepts (3,) or (3, k) states.
    """
    q = np.asarray(q, dtype=float)
    i, j = np.triu_indices(3)
    d = np.concatenate([np.ones((1,) + q.shape[1:]), q, q[i] * q[j]])
    return SYNTHETIC_OPERATOR @ d
