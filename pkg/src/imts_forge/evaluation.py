"""Forecast tasks, time-constant baselines and fold-based MSE evaluation.

A task splits one instance at ``t_split = split_fraction * window span``:
observations up to and including ``t_split`` form the history, retained
observation slots after it become queries.  Answers are the noiseless
ground truth at those slots unless noisy targets are requested.  All
values are standardized with the dataset's per-channel statistics.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .generator import Dataset, ImtsInstance
from .gradscore import FLAT_RTOL
from .rng import CounterRng

__all__ = [
    "BASELINES",
    "EmptyHorizon",
    "ForecastTask",
    "SplitPlan",
    "EvalReport",
    "make_task",
    "make_tasks",
    "predict_constant",
    "mse",
    "split_plan",
    "evaluate",
    "jgd_vs_mse_correlation",
]

BASELINES = ("history_mean", "last_observation", "global_train_mean")


class EmptyHorizon(ValueError):
    def __init__(self, instance_id: int):
        self.instance_id = instance_id
        super().__init__(f"instance {instance_id} has no observations after the split")


@dataclass
class ForecastTask:
    instance_id: int
    t_split: float
    n_channels: int
    hist_time: np.ndarray
    hist_channel: np.ndarray
    hist_value: np.ndarray
    query_time: np.ndarray
    query_channel: np.ndarray
    answers: np.ndarray

    def __len__(self) -> int:
        return self.answers.size


def _scale(stats_: tuple[np.ndarray, np.ndarray] | None, n_channels: int):
    if stats_ is None:
        return np.zeros(n_channels), np.ones(n_channels)
    mean, std = (np.asarray(s, dtype=np.float64) for s in stats_)
    # constant channels are left in raw units
    return mean, np.where(std > FLAT_RTOL * np.abs(mean), std, 1.0)


def make_task(
    inst: ImtsInstance,
    split_fraction: float = 0.5,
    normalization: tuple[np.ndarray, np.ndarray] | None = None,
    noisy_targets: bool = False,
) -> ForecastTask:
    """Split one instance into history and queries.

    Raises:
        EmptyHorizon: no retained observation lies after the split.
    """
    if not 0 < split_fraction < 1:
        raise ValueError("split_fraction must lie in (0, 1)")
    mean, std = _scale(normalization, inst.n_channels)
    t_split = split_fraction * inst.window_span
    times = inst.obs_time
    hist = times <= t_split
    fut = ~hist
    if not fut.any():
        raise EmptyHorizon(inst.instance_id)
    ch = inst.obs_channel
    z = (inst.obs_value - mean[ch]) / std[ch]
    if noisy_targets:
        answers = z[fut]
    else:
        truth = inst.ground_truth[inst.obs_step[fut], ch[fut]]
        answers = (truth - mean[ch[fut]]) / std[ch[fut]]
    return ForecastTask(
        instance_id=inst.instance_id,
        t_split=t_split,
        n_channels=inst.n_channels,
        hist_time=times[hist],
        hist_channel=ch[hist],
        hist_value=z[hist],
        query_time=times[fut],
        query_channel=ch[fut],
        answers=answers,
    )


def make_tasks(
    dataset: Dataset,
    split_fraction: float | None = None,
    noisy_targets: bool = False,
) -> tuple[list[ForecastTask], list[int]]:
    """Tasks for every instance plus the ids skipped for an empty horizon."""
    frac = dataset.split_fraction if split_fraction is None else split_fraction
    norm = dataset.normalization
    tasks, skipped = [], []
    for inst in dataset.instances:
        try:
            tasks.append(make_task(inst, frac, norm, noisy_targets))
        except EmptyHorizon:
            skipped.append(inst.instance_id)
    return tasks, skipped


def _history_means(task: ForecastTask, fallback: np.ndarray) -> np.ndarray:
    sums = np.bincount(task.hist_channel, task.hist_value, minlength=task.n_channels)
    counts = np.bincount(task.hist_channel, minlength=task.n_channels)
    out = fallback.copy()
    seen = counts > 0
    out[seen] = sums[seen] / counts[seen]
    return out


def predict_constant(
    task: ForecastTask,
    mode: str = "history_mean",
    train_means: Sequence[float] | None = None,
) -> np.ndarray:
    """One value per channel, repeated for every query in that channel.

    Channels without history fall back to the train mean (or 0 when none
    is given); ``last_observation`` falls back like ``history_mean``.
    """
    fallback = (
        np.zeros(task.n_channels)
        if train_means is None
        else np.asarray(train_means, dtype=np.float64)
    )
    if mode == "global_train_mean":
        per_channel = fallback
    elif mode == "history_mean":
        per_channel = _history_means(task, fallback)
    elif mode == "last_observation":
        per_channel = _history_means(task, fallback)
        # history is time-sorted; first hit in reverse is the latest value
        chans, first = np.unique(task.hist_channel[::-1], return_index=True)
        per_channel[chans] = task.hist_value[::-1][first]
    else:
        raise ValueError(f"unknown baseline {mode!r}; choose from {BASELINES}")
    return per_channel[task.query_channel]


def mse(y: Sequence[float], y_hat: Sequence[float]) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise ValueError("mse of zero points")
    d = y - y_hat
    return float(np.mean(d * d))


@dataclass(frozen=True)
class SplitPlan:
    fold: int
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]


def split_plan(ids: Iterable[int], fold: int, seed: int = 0, folds: int = 5) -> SplitPlan:
    """70:20:10 partition of ``ids`` for one fold.

    Ids are sorted, shuffled once with ``seed``, then rotated by
    ``fold * n // folds`` positions.  Train gets ``floor(0.7 n)``, val
    ``floor(0.2 n)``, test the remainder, so test sets of different folds
    are disjoint.
    """
    if not 0 <= fold < folds:
        raise ValueError(f"fold must lie in [0, {folds})")
    ordered = np.array(sorted(set(int(i) for i in ids)), dtype=np.int64)
    n = ordered.size
    keys = CounterRng(seed).raw(n)
    shuffled = ordered[np.argsort(keys, kind="stable")]
    rotated = np.roll(shuffled, -(fold * n // folds))
    n_train, n_val = (7 * n) // 10, (2 * n) // 10
    return SplitPlan(
        fold,
        tuple(rotated[:n_train].tolist()),
        tuple(rotated[n_train : n_train + n_val].tolist()),
        tuple(rotated[n_train + n_val :].tolist()),
    )


@dataclass
class EvalReport:
    rows: list[tuple[str, int, float, int]] = field(default_factory=list)  # baseline, fold, mse, n
    skipped: list[int] = field(default_factory=list)
    split_fraction: float = 0.5
    noisy_targets: bool = False

    def summary(self) -> dict[str, tuple[float, float]]:
        out: dict[str, list[float]] = {}
        for name, _, value, _ in self.rows:
            out.setdefault(name, []).append(value)
        result = {}
        for k, v in out.items():
            # deviations from the first fold keep identical folds at exactly zero std
            d = np.asarray(v) - v[0]
            result[k] = (float(v[0] + d.mean()), float(np.std(d)))
        return result

    @property
    def best(self) -> tuple[str, float]:
        summ = self.summary()
        name = min(summ, key=lambda k: (summ[k][0], k))
        return name, summ[name][0]

    def to_csv(self, dataset_name: str = "") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "baseline", "fold", "mse", "queries"])
        for name, fold, value, n in self.rows:
            w.writerow([dataset_name, name, fold, repr(value), n])
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'baseline':<20} {'mse mean':>12} {'mse std':>12}"]
        for name, (m, s) in self.summary().items():
            lines.append(f"{name:<20} {m:>12.6f} {s:>12.6f}")
        lines.append(f"skipped (empty horizon): {len(self.skipped)}")
        return "\n".join(lines)


def _train_means(tasks: Iterable[ForecastTask], n_channels: int) -> np.ndarray:
    sums = np.zeros(n_channels)
    counts = np.zeros(n_channels)
    for task in tasks:
        sums += np.bincount(task.hist_channel, task.hist_value, minlength=n_channels)
        counts += np.bincount(task.hist_channel, minlength=n_channels)
        sums += np.bincount(task.query_channel, task.answers, minlength=n_channels)
        counts += np.bincount(task.query_channel, minlength=n_channels)
    return np.divide(sums, counts, out=np.zeros(n_channels), where=counts > 0)


def evaluate(
    dataset: Dataset,
    baselines: Sequence[str] = BASELINES,
    folds: int = 5,
    split_fraction: float | None = None,
    seed: int = 0,
    noisy_targets: bool = False,
) -> EvalReport:
    """Micro-averaged test MSE of each baseline on every fold."""
    for name in baselines:
        if name not in BASELINES:
            raise ValueError(f"unknown baseline {name!r}; choose from {BASELINES}")
    frac = dataset.split_fraction if split_fraction is None else split_fraction
    tasks, skipped = make_tasks(dataset, frac, noisy_targets)
    by_id = {t.instance_id: t for t in tasks}
    ids = [inst.instance_id for inst in dataset.instances]
    C = dataset.n_channels
    report = EvalReport(skipped=skipped, split_fraction=frac, noisy_targets=noisy_targets)
    for fold in range(folds):
        plan = split_plan(ids, fold, seed, folds)
        train = [by_id[i] for i in plan.train if i in by_id]
        test = [by_id[i] for i in plan.test if i in by_id]
        if not test:
            raise ValueError(f"fold {fold} has no test tasks")
        means = _train_means(train, C)
        y = np.concatenate([t.answers for t in test])
        for name in baselines:
            y_hat = np.concatenate([predict_constant(t, name, means) for t in test])
            report.rows.append((name, fold, mse(y, y_hat), int(y.size)))
    return report


def jgd_vs_mse_correlation(pairs: Sequence[tuple[float, float]]) -> float:
    """Spearman rank correlation of (aggregated JGD, best baseline MSE) pairs."""
    if len(pairs) < 3:
        raise ValueError("need at least 3 datasets")
    jgd = np.array([p[0] for p in pairs], dtype=np.float64)
    err = np.array([p[1] for p in pairs], dtype=np.float64)
    if np.all(jgd == jgd[0]) or np.all(err == err[0]):
        raise ValueError("correlation undefined: all values are equal")
    return float(stats.spearmanr(jgd, err).statistic)
