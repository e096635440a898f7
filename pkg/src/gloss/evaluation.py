"""ROC/AUC evaluation, multi-seed trial aggregation, sweeps and event matching."""

from __future__ import annotations

import csv
import datetime
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from .graphs import build_all_mode_graphs
from .ingest import ZoneIndex
from .scoring import ScoreTensor, score_tensor, top_k_labels
from .solver import default_hyperparameters, solve
from .synth import SyntheticSpec, generate
from .tensors import project


@dataclass(frozen=True)
class RocResult:
    """ROC points (false-positive rate, true-positive rate) and the area under them."""

    points: np.ndarray
    auc: float


def roc_auc(scores: Union[ScoreTensor, np.ndarray], labels: np.ndarray) -> RocResult:
    """ROC curve and AUC for a threshold sweep over all distinct score values.

    Tied scores are grouped into a single threshold step, so the trapezoidal
    area equals the probability that a random positive outranks a random
    negative with half credit for ties.
    """
    s = scores.scores if isinstance(scores, ScoreTensor) else scores
    s = np.asarray(s, dtype=np.float64).ravel()
    y = np.asarray(labels)
    if y.dtype != np.bool_:
        raise ValueError("labels must be boolean")
    y = y.ravel()
    if y.shape != s.shape:
        raise ValueError(f"scores ({s.shape}) and labels ({y.shape}) differ in size")
    pos = int(y.sum())
    neg = y.size - pos
    if pos == 0 or neg == 0:
        raise ValueError("labels must contain at least one positive and one negative")

    order = np.argsort(-s, kind="stable")
    sorted_scores = s[order]
    sorted_labels = y[order]
    # last position of each tied group of scores
    boundary = np.nonzero(np.diff(sorted_scores))[0]
    ends = np.concatenate([boundary, [s.size - 1]])
    cum_tp = np.cumsum(sorted_labels)[ends]
    cum_fp = (ends + 1) - cum_tp
    tpr = np.concatenate([[0.0], cum_tp / pos])
    fpr = np.concatenate([[0.0], cum_fp / neg])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocResult(points=np.column_stack([fpr, tpr]), auc=auc)


@dataclass(frozen=True)
class PipelineSpec:
    """One end-to-end experiment cell: generate, decompose, score, evaluate."""

    variant: str
    scorer: str
    synth: SyntheticSpec
    knn: int = 10
    lof_neighbors: int = 10
    config_overrides: Optional[dict] = None


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    auc: float
    iterations: int
    converged: bool
    feasibility: float
    wall_s: float


@dataclass
class TrialStats:
    records: list
    mean_auc: float
    std_auc: float


def run_single_trial(pipeline: PipelineSpec, seed: int) -> TrialRecord:
    """Generate one instance, decompose, score, and compute AUC."""
    tic = time.perf_counter()
    spec = replace(pipeline.synth, seed=seed)
    instance = generate(spec)
    observed = project(instance.y, instance.omega)

    cfg = default_hyperparameters(instance.y, instance.omega, pipeline.variant)
    if pipeline.config_overrides:
        cfg = cfg.with_overrides(**pipeline.config_overrides)

    graphs = None
    if cfg.variant == "gloss":
        graphs = build_all_mode_graphs(observed, k=pipeline.knn)

    result = solve(instance.y, instance.omega, cfg, graphs=graphs)
    st = score_tensor(result.sparse, pipeline.scorer, k=pipeline.lof_neighbors)
    roc = roc_auc(st, instance.labels)

    return TrialRecord(
        seed=seed,
        auc=roc.auc,
        iterations=result.iterations,
        converged=result.converged,
        feasibility=result.diagnostics[-1].feasibility,
        wall_s=time.perf_counter() - tic,
    )


def run_trials(pipeline: PipelineSpec, seeds: Sequence[int], workers: int = 1) -> TrialStats:
    """Independent trials over ``seeds``; reports mean and sample std of AUC."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_single_trial, [pipeline] * len(seeds), seeds))
    else:
        records = [run_single_trial(pipeline, seed) for seed in seeds]
    aucs = np.array([r.auc for r in records])
    std = float(np.std(aucs, ddof=1)) if len(aucs) > 1 else 0.0
    return TrialStats(records=records, mean_auc=float(np.mean(aucs)), std_auc=std)


def trials_to_csv(stats: TrialStats, pipeline: PipelineSpec, f=None) -> Optional[str]:
    """Per-trial records as CSV (one row per seed)."""
    out = f if f is not None else io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["trial", "seed", "variant", "scorer", "c", "missing_percent", "auc", "iterations", "converged", "feasibility", "wall_s"])
    for i, r in enumerate(stats.records):
        writer.writerow([
            i, r.seed, pipeline.variant, pipeline.scorer, pipeline.synth.c,
            pipeline.synth.missing_percent, r.auc, r.iterations, r.converged,
            r.feasibility, r.wall_s,
        ])
    if f is None:
        return out.getvalue()
    return None


@dataclass
class SweepResult:
    param_x: str
    values_x: list
    param_y: str
    values_y: list
    mean_auc: np.ndarray
    std_auc: np.ndarray

    def to_csv(self, f=None) -> Optional[str]:
        out = f if f is not None else io.StringIO()
        writer = csv.writer(out)
        writer.writerow([self.param_y + "\\" + self.param_x] + list(self.values_x))
        for i, vy in enumerate(self.values_y):
            writer.writerow([vy] + list(self.mean_auc[i]))
        if f is None:
            return out.getvalue()
        return None


def sweep(
    pipeline: PipelineSpec,
    param_x: str,
    values_x: Sequence[float],
    param_y: str,
    values_y: Sequence[float],
    seeds: Sequence[int],
    workers: int = 1,
) -> SweepResult:
    """Mean AUC over a 2-D grid of solver hyperparameter overrides."""
    values_x = list(values_x)
    values_y = list(values_y)
    if not values_x or not values_y:
        raise ValueError("sweep grid must be non-empty on both axes")
    mean = np.zeros((len(values_y), len(values_x)))
    std = np.zeros_like(mean)
    for i, vy in enumerate(values_y):
        for j, vx in enumerate(values_x):
            overrides = dict(pipeline.config_overrides or {})
            overrides[param_x] = vx
            overrides[param_y] = vy
            cell = replace(pipeline, config_overrides=overrides)
            stats = run_trials(cell, seeds, workers=workers)
            mean[i, j] = stats.mean_auc
            std[i, j] = stats.std_auc
    return SweepResult(
        param_x=param_x, values_x=values_x,
        param_y=param_y, values_y=values_y,
        mean_auc=mean, std_auc=std,
    )


@dataclass(frozen=True)
class Event:
    """One real-world event: where and when it happened."""

    zone_id: str
    date: datetime.date
    start_hour: int
    end_hour: int
    name: str

    def validate(self) -> None:
        if not 0 <= self.start_hour < 24 or not 0 <= self.end_hour < 24:
            raise ValueError(f"event {self.name!r}: hours must lie in [0, 24)")
        if self.end_hour < self.start_hour:
            raise ValueError(f"event {self.name!r}: end hour before start hour")


def read_events_csv(f) -> list:
    """Parse an events CSV with columns zone_id, date, start_hour, end_hour, name."""
    events = []
    for row in csv.DictReader(f):
        ev = Event(
            zone_id=row["zone_id"].strip(),
            date=datetime.date.fromisoformat(row["date"].strip()),
            start_hour=int(row["start_hour"]),
            end_hour=int(row["end_hour"]),
            name=row["name"].strip(),
        )
        ev.validate()
        events.append(ev)
    return events


@dataclass
class EventDetectionTable:
    k_percents: list
    detected: list
    total_events: int

    def to_csv(self, f=None) -> Optional[str]:
        out = f if f is not None else io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["k_percent", "detected", "total"])
        for k, d in zip(self.k_percents, self.detected):
            writer.writerow([k, d, self.total_events])
        if f is None:
            return out.getvalue()
        return None


def event_detection(
    scores: ScoreTensor,
    events: Sequence[Event],
    k_grid: Sequence[float],
    epoch: datetime.date,
    zones: ZoneIndex,
) -> EventDetectionTable:
    """Count events touched by the top-K percent scores, for each K.

    The calendar maps a date to (week, day) indices as whole 7-day blocks
    since ``epoch``.  An event is detected at level K when any flagged cell
    lies inside its zone, date, and inclusive hour range.
    """
    n_hours, n_days, n_weeks, n_zones = scores.scores.shape
    cells = []
    for ev in events:
        ev.validate()
        days_since = (ev.date - epoch).days
        week, day = days_since // 7, days_since % 7
        if days_since < 0 or week >= n_weeks:
            raise ValueError(f"event {ev.name!r} date {ev.date} outside the tensor's {n_weeks}-week range")
        if ev.zone_id not in zones:
            raise ValueError(f"event {ev.name!r} references unknown zone {ev.zone_id!r}")
        zone = zones.index_of(ev.zone_id)
        cells.append((slice(ev.start_hour, ev.end_hour + 1), day, week, zone))

    detected = []
    for k in k_grid:
        flags = top_k_labels(scores, k)
        detected.append(sum(1 for cell in cells if flags[cell].any()))
    return EventDetectionTable(k_percents=list(k_grid), detected=detected, total_events=len(events))
