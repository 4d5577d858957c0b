"""Gradient-deviation difficulty scores for sampled time series.

MGD measures how far one function's derivative strays from its mean
slope, MPGD how much derivatives differ between functions at the same
time, and JGD = MPGD * E[MGD] combines both.  All estimators work on
divided differences over a shared regular grid and use the population
standard deviation (divisor K, no Bessel correction).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "TOP_CHANNELS",
    "DegenerateChannel",
    "GriddedSample",
    "DifficultyReport",
    "numstd",
    "mgd_estimate",
    "mpgd_estimate",
    "aggregate_top",
    "jgd_estimate",
    "mgd_convergence_probe",
    "empirical_order",
]

TOP_CHANNELS = 10
# a std this small relative to the values is rounding noise of a constant
FLAT_RTOL = 1e-12


class DegenerateChannel(ValueError):
    """A channel cannot be standardized or carries no temporal variation."""

    def __init__(self, channel: int, reason: str = "zero standard deviation"):
        self.channel = channel
        self.reason = reason
        super().__init__(f"channel {channel}: {reason}")


def numstd(values, axis=None) -> np.ndarray:
    """Population standard deviation ``sqrt(mean((x - mean(x))**2))``."""
    values = np.asarray(values, dtype=np.float64)
    centered = values - values.mean(axis=axis, keepdims=True)
    return np.sqrt((centered * centered).mean(axis=axis))


@dataclass(frozen=True)
class GriddedSample:
    """N series of M steps and C channels on one regular grid.

    ``duration`` is the time between the first and last step.  ``None``
    means index time: unit spacing, so ``duration == M - 1``.
    """

    values: np.ndarray
    duration: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3:
            raise ValueError(f"expected an N x M x C array, got shape {values.shape}")
        n, m, _ = values.shape
        if n < 1 or m < 2:
            raise ValueError(f"need N >= 1 series and M >= 2 steps, got N={n}, M={m}")
        if not np.isfinite(values).all():
            raise ValueError("sample contains non-finite values")
        if self.duration is not None and not self.duration > 0:
            raise ValueError("duration must be positive")
        object.__setattr__(self, "values", values)

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def n_channels(self) -> int:
        return self.values.shape[2]

    @property
    def total_time(self) -> float:
        return float(self.n_steps - 1) if self.duration is None else float(self.duration)

    @property
    def step(self) -> float:
        return self.total_time / (self.n_steps - 1)


@dataclass(frozen=True)
class DifficultyReport:
    per_channel_mgd_mean: tuple[float, ...]
    per_channel_mpgd: tuple[float, ...]
    per_channel_jgd: tuple[float, ...]
    aggregated_jgd: float
    normalization: tuple[tuple[float, float], ...]  # (mean, std) per channel

    def to_dict(self) -> dict:
        return {
            "aggregated_jgd": self.aggregated_jgd,
            "per_channel_jgd": list(self.per_channel_jgd),
            "per_channel_mpgd": list(self.per_channel_mpgd),
            "per_channel_mgd_mean": list(self.per_channel_mgd_mean),
            "normalization": [list(p) for p in self.normalization],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DifficultyReport":
        return cls(
            per_channel_mgd_mean=tuple(d["per_channel_mgd_mean"]),
            per_channel_mpgd=tuple(d["per_channel_mpgd"]),
            per_channel_jgd=tuple(d["per_channel_jgd"]),
            aggregated_jgd=d["aggregated_jgd"],
            normalization=tuple(tuple(p) for p in d["normalization"]),
        )


def mgd_estimate(series: Sequence[float], step: float = 1.0) -> float:
    """MGD of one series: ``numstd`` of its M-1 divided differences."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-d series with at least 2 values")
    return float(numstd(np.diff(x) / step))


def _mgd_per_series(values: np.ndarray, step: float) -> np.ndarray:
    # values: N x M -> N MGD estimates
    return numstd(np.diff(values, axis=1) / step, axis=1)


def _mpgd(values: np.ndarray, step: float, total_time: float) -> float:
    # values: N x M; point-wise std over series, then (eps / T) * sum over steps
    pointwise = numstd(np.diff(values, axis=1) / step, axis=0)
    return float(step / total_time * pointwise.sum())


def mpgd_estimate(sample: GriddedSample, channel: int = 0) -> float:
    """Time average of the across-series std of divided differences."""
    return _mpgd(sample.values[:, :, channel], sample.step, sample.total_time)


def aggregate_top(per_channel: Sequence[float], top: int = TOP_CHANNELS) -> float:
    """Mean of the ``top`` largest values (all of them when there are fewer).

    Ties are ordered by channel index, which only matters for reporting
    which channels were picked; the mean is the same.
    """
    vals = list(per_channel)
    if not vals:
        raise ValueError("no channels to aggregate")
    order = sorted(range(len(vals)), key=lambda c: (-vals[c], c))
    chosen = order[: min(top, len(vals))]
    return float(sum(vals[c] for c in chosen) / len(chosen))


def jgd_estimate(sample: GriddedSample, top: int = TOP_CHANNELS) -> DifficultyReport:
    """Standardize each channel, then score MPGD * mean MGD per channel.

    Raises:
        DegenerateChannel: a channel has zero spread over all series and
            steps, or every series is flat in time on that channel.
    """
    values = sample.values
    step, total = sample.step, sample.total_time
    mgd_means, mpgds, jgds, norm = [], [], [], []
    for c in range(sample.n_channels):
        ch = values[:, :, c]
        mean = float(ch.mean())
        std = float(numstd(ch))
        if not std > FLAT_RTOL * float(np.abs(ch).max()):
            raise DegenerateChannel(c)
        if not np.any(np.diff(ch, axis=1)):
            raise DegenerateChannel(c, "every series is constant in time")
        z = (ch - mean) / std
        mgd_mean = float(_mgd_per_series(z, step).mean())
        mpgd = _mpgd(z, step, total)
        mgd_means.append(mgd_mean)
        mpgds.append(mpgd)
        jgds.append(mpgd * mgd_mean)
        norm.append((mean, std))
    return DifficultyReport(
        per_channel_mgd_mean=tuple(mgd_means),
        per_channel_mpgd=tuple(mpgds),
        per_channel_jgd=tuple(jgds),
        aggregated_jgd=aggregate_top(jgds, top),
        normalization=tuple(norm),
    )


def mgd_convergence_probe(
    fn: Callable[[np.ndarray], np.ndarray],
    exact: float,
    duration: float,
    epsilons: Iterable[float],
) -> list[tuple[float, float]]:
    """Absolute MGD estimation error of ``fn`` on [0, duration] per step size.

    Each step size must divide ``duration`` into a whole number of steps.
    """
    rows = []
    for eps in epsilons:
        steps = round(duration / eps)
        if steps < 1 or abs(steps * eps - duration) > 1e-9 * duration:
            raise ValueError(f"step {eps} does not divide duration {duration}")
        t = np.linspace(0.0, duration, steps + 1)
        est = mgd_estimate(fn(t), duration / steps)
        rows.append((float(eps), abs(est - exact)))
    return rows


def empirical_order(rows: Sequence[tuple[float, float]]) -> list[float]:
    """Observed convergence orders ``log(e_i / e_j) / log(eps_i / eps_j)``."""
    out = []
    for (e0, err0), (e1, err1) in zip(rows, rows[1:]):
        out.append(float(np.log(err0 / err1) / np.log(e0 / e1)))
    return out
