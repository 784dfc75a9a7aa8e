"""Observation noise models and random observation-time schedules."""

__all__ = [
    "NOISE_KINDS",
    "NoiseSpec",
    "add_noise",
    "sample_observation_times",
]

from dataclasses import dataclass, asdict, replace

import numpy as np
import scipy.stats

NOISE_KINDS = ("RangeScaledGaussian", "MagnitudeScaledGaussian",
               "TruncatedNormalMagnitude")


@dataclass(frozen=True)
class NoiseSpec:
    """Description of additive observation noise.

    Parameters
    ----------
    kind : str
        ``RangeScaledGaussian``: i.i.d. Gaussian per variable block with
        std ``level * (max - min)`` of that block's clean data.
        ``MagnitudeScaledGaussian``: entrywise std ``level * |value|``.
        ``TruncatedNormalMagnitude``: entrywise normal with std
        ``level * value`` truncated to [0, 1].
    level : float
        Relative noise level (e.g. 0.01 for 1%).
    seed : int
    protect_initial : bool
        Leave the first time column untouched.
    protect_boundaries : bool
        Leave the first and last state rows untouched.
    """

    kind: str = "RangeScaledGaussian"
    level: float = 0.0
    seed: int = 0
    protect_initial: bool = True
    protect_boundaries: bool = False

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; "
                             f"expected one of {NOISE_KINDS}")
        if not (np.isfinite(self.level) and self.level >= 0):
            raise ValueError("noise level must be finite and nonnegative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def _row_blocks(n_rows, blocks):
    if blocks is None:
        return [slice(0, n_rows)]
    if isinstance(blocks, int):
        if n_rows % blocks:
            raise ValueError(f"{n_rows} rows do not split into {blocks} "
                             "equal blocks")
        size = n_rows // blocks
        return [slice(k * size, (k + 1) * size) for k in range(blocks)]
    return list(blocks)


def _truncated_normal(center, std, rng):
    out = center.copy()
    live = std > 0
    if np.any(live):
        c, s = center[live], std[live]
        lo, hi = (0 - c) / s, (1 - c) / s
        out[live] = scipy.stats.truncnorm.rvs(lo, hi, loc=c, scale=s,
                                              random_state=rng)
    return out


def add_noise(traj, spec, blocks=None):
    """Return a noisy copy of ``traj``.

    Parameters
    ----------
    traj : Trajectory
        Clean states (n_state, n_t).
    spec : NoiseSpec
    blocks : None, int, or list of slices
        Variable blocks (rows) for ``RangeScaledGaussian``. An int splits the
        rows into that many equal blocks; None treats all rows as one block.

    Returns
    -------
    Trajectory
        Same times and labels; deterministic given ``spec.seed``.
    """
    clean = np.asarray(traj.states, dtype=float)
    if clean.ndim != 2:
        raise ValueError("noise expects a 2D state matrix")
    noisy = clean.copy()
    if spec.level == 0:
        return replace(traj, states=noisy)

    rng = np.random.default_rng(spec.seed)
    n_rows, n_t = clean.shape
    if spec.kind == "RangeScaledGaussian":
        std = np.empty_like(clean)
        for sl in _row_blocks(n_rows, blocks):
            block = clean[sl]
            std[sl] = spec.level * (block.max() - block.min())
        noisy = clean + std * rng.standard_normal(clean.shape)
    elif spec.kind == "MagnitudeScaledGaussian":
        noisy = clean + spec.level * np.abs(clean) \
            * rng.standard_normal(clean.shape)
    else:
        noisy = _truncated_normal(clean.ravel(),
                                  spec.level * np.abs(clean).ravel(),
                                  rng).reshape(clean.shape)

    if spec.protect_initial:
        noisy[:, 0] = clean[:, 0]
    if spec.protect_boundaries:
        noisy[[0, -1], :] = clean[[0, -1], :]
    return replace(traj, states=noisy)


def sample_observation_times(m, t_last, scheme="Uniform", seed=0):
    """Random observation times on [0, t_last] including both endpoints.

    Parameters
    ----------
    m : int
        Number of times (>= 2).
    t_last : float
        Final observation time.
    scheme : {"Uniform", "IntegerDays"}
        ``Uniform``: interior times i.i.d. uniform on (0, t_last), sorted,
        duplicates redrawn. ``IntegerDays``: m distinct integers from
        {0, ..., t_last} chosen without replacement, endpoints included.
    seed : int or numpy.random.Generator

    Returns
    -------
    (m,) ndarray, strictly increasing.
    """
    m = int(m)
    if m < 2:
        raise ValueError("m must be at least 2")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    if scheme == "Uniform":
        if not t_last > 0:
            raise ValueError("t_last must be positive")
        interior = np.empty(0)
        while interior.size < m - 2:
            draw = rng.uniform(0, t_last, size=m - 2 - interior.size)
            draw = draw[(draw > 0) & (draw < t_last)]
            interior = np.unique(np.concatenate([interior, draw]))
        return np.concatenate([[0.0], interior, [float(t_last)]])
    if scheme == "IntegerDays":
        last = int(round(t_last))
        if last != t_last or last < 1:
            raise ValueError("IntegerDays needs a positive integer t_last")
        if m > last + 1:
            raise ValueError(f"m={m} exceeds the {last + 1} available days")
        interior = rng.choice(np.arange(1, last), size=m - 2, replace=False)
        return np.concatenate([[0.0], np.sort(interior).astype(float),
                               [float(last)]])
    raise ValueError(f"unknown sampling scheme {scheme!r}")
