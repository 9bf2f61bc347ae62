"""
Campaign measurements: distinct faults over time, behaviour and faulty
behaviour coverage on a result grid, k-NN sparseness of final and failure
states, cross-seed aggregation and the metric tables written per environment.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from archives import Cell, bin_index
from campaign import CampaignLog
from errors import InsufficientDataError, ParameterError
from mdp import BehaviorSpace
from utils import format_number

logger = logging.getLogger(__name__)

FAULTS = "faults"
BEHAVIOR_COVERAGE = "behavior_coverage"
FAULTY_BEHAVIOR_COVERAGE = "faulty_behavior_coverage"
FINAL_STATE_SPARSENESS = "final_state_sparseness"
FAILURE_STATE_SPARSENESS = "failure_state_sparseness"
METRIC_NAMES = (FAULTS, BEHAVIOR_COVERAGE, FAULTY_BEHAVIOR_COVERAGE, FINAL_STATE_SPARSENESS, FAILURE_STATE_SPARSENESS)

METRIC_COLUMNS = ["index", "method", "median", "q1", "q3", "rel_median", "rel_q1", "rel_q3"]


@dataclass
class MetricSeries:
    """Metric values at evaluation indices (1-based) of one campaign."""
    name: str
    method: str
    seed: int
    values: np.ndarray
    indices: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.indices is None:
            self.indices = np.arange(1, len(self.values) + 1)
        self.indices = np.asarray(self.indices, dtype=int)
        if len(self.indices) != len(self.values):
            raise ParameterError(f"{len(self.values)} values for {len(self.indices)} indices")

    def __len__(self) -> int:
        return len(self.values)


class ResultGrid:
    """
    Occupancy grid used for measuring, never for search: a cell is occupied
    once any record lands in it and fault-occupied once a fault does.
    """

    def __init__(self, bspace: BehaviorSpace, resolution: int = 50):
        self.bspace = bspace
        self.resolution = (int(resolution), int(resolution))
        self.lower = np.asarray(bspace.lower, dtype=float)
        self.upper = np.asarray(bspace.upper, dtype=float)
        self.occupied: Set[Cell] = set()
        self.fault_occupied: Set[Cell] = set()

    def add(self, behavior: Sequence[float], oracle: bool) -> Cell:
        cell = bin_index(self, behavior)
        self.occupied.add(cell)
        if oracle:
            self.fault_occupied.add(cell)
        return cell

    @property
    def behavior_coverage(self) -> int:
        return len(self.occupied)

    @property
    def faulty_behavior_coverage(self) -> int:
        return len(self.fault_occupied)

    @classmethod
    def from_log(cls, log: CampaignLog, bspace: BehaviorSpace, resolution: int = 50) -> "ResultGrid":
        grid = cls(bspace, resolution)
        for record in log:
            grid.add(record.behavior, record.oracle)
        return grid


def fault_count_series(log: CampaignLog) -> MetricSeries:
    """Number of distinct fault-triggering inputs among the first i records."""
    seen = set()
    values = np.zeros(len(log))
    for i, record in enumerate(log):
        if record.oracle:
            seen.add(record.input.values)
        values[i] = len(seen)
    return MetricSeries(FAULTS, log.method, log.seed, values)


def coverage_series(log: CampaignLog, bspace: BehaviorSpace,
                    resolution: int = 50) -> Tuple[MetricSeries, MetricSeries]:
    """
    Occupied and fault-occupied cell counts after each record.

    Returns:
        (behaviour coverage series, faulty behaviour coverage series)
    """
    grid = ResultGrid(bspace, resolution)
    covered = np.zeros(len(log))
    faulty = np.zeros(len(log))
    for i, record in enumerate(log):
        grid.add(record.behavior, record.oracle)
        covered[i] = grid.behavior_coverage
        faulty[i] = grid.faulty_behavior_coverage
    return (
        MetricSeries(BEHAVIOR_COVERAGE, log.method, log.seed, covered),
        MetricSeries(FAULTY_BEHAVIOR_COVERAGE, log.method, log.seed, faulty),
    )


def knn_sparseness(points: Iterable[Sequence[float]], k: int = 3) -> float:
    """
    Mean over points of the average Euclidean distance to their k nearest
    other points; k shrinks to ``len(points) - 1`` for small sets.

    Raises:
        InsufficientDataError: fewer than 2 points
        ParameterError: k < 1
    """
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")
    points = np.asarray(list(points), dtype=float)
    if len(points) < 2:
        raise InsufficientDataError(f"Sparseness needs at least 2 points, got {len(points)}")
    points = points.reshape(len(points), -1)
    neighbours = min(k, len(points) - 1)
    distances, _ = cKDTree(points).query(points, k=neighbours + 1)
    # column 0 is a zero distance: the point itself or an exact duplicate of it
    return float(np.mean(np.mean(distances[:, 1:], axis=1)))


def _checkpoints(n: int, every: int) -> List[int]:
    if every <= 0:
        raise ParameterError(f"Checkpoint period must be positive, got {every}")
    marks = list(range(every, n + 1, every))
    if n > 0 and (not marks or marks[-1] != n):
        marks.append(n)
    return marks


def _sparseness_or_nan(points: List[np.ndarray], k: int) -> float:
    try:
        return knn_sparseness(points, k)
    except InsufficientDataError:
        return float("nan")


def sparseness_series(log: CampaignLog, checkpoint: int = 100, k: int = 3) -> Tuple[MetricSeries, MetricSeries]:
    """
    Sparseness of the final states of all distinct inputs, and of the distinct
    faults only, evaluated every ``checkpoint`` records and at the last one.
    Values are NaN where fewer than two points exist.
    """
    marks = _checkpoints(len(log), checkpoint)
    seen, seen_faults = set(), set()
    finals: List[np.ndarray] = []
    failures: List[np.ndarray] = []
    final_values, failure_values = [], []
    mark_iter = iter(marks)
    next_mark = next(mark_iter, None)
    for i, record in enumerate(log, start=1):
        key = record.input.values
        if key not in seen:
            seen.add(key)
            finals.append(record.final_state)
        if record.oracle and key not in seen_faults:
            seen_faults.add(key)
            failures.append(record.final_state)
        if i == next_mark:
            final_values.append(_sparseness_or_nan(finals, k))
            failure_values.append(_sparseness_or_nan(failures, k))
            next_mark = next(mark_iter, None)
    return (
        MetricSeries(FINAL_STATE_SPARSENESS, log.method, log.seed, final_values, marks),
        MetricSeries(FAILURE_STATE_SPARSENESS, log.method, log.seed, failure_values, marks),
    )


def campaign_metrics(log: CampaignLog, bspace: BehaviorSpace, resolution: int = 50,
                     checkpoint: int = 100) -> Dict[str, MetricSeries]:
    """All five metric series of one campaign, keyed by metric name."""
    covered, faulty = coverage_series(log, bspace, resolution)
    final, failure = sparseness_series(log, checkpoint)
    series = [fault_count_series(log), covered, faulty, final, failure]
    return {s.name: s for s in series}


def relative_to_baseline(series: Sequence[float], baseline: Sequence[float]) -> np.ndarray:
    """
    Pointwise ratio to a baseline: 0/0 is 1.0, x/0 with x > 0 is missing (NaN)
    and never infinite.
    """
    a = np.asarray(getattr(series, "values", series), dtype=float)
    b = np.asarray(getattr(baseline, "values", baseline), dtype=float)
    if a.shape != b.shape:
        raise ParameterError(f"Series lengths differ: {a.shape} vs {b.shape}")
    ratio = np.full(a.shape, np.nan)
    nonzero = b != 0
    ratio[nonzero] = a[nonzero] / b[nonzero]
    ratio[(b == 0) & (a == 0)] = 1.0
    return ratio


def aggregate_across_seeds(per_seed: Sequence[Sequence[float]]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Pointwise median, first and third quartile across seeds, with linear
    interpolation between order statistics. Missing values are ignored; an
    index where every seed is missing stays missing.
    """
    if len(per_seed) == 0:
        raise ParameterError("Need at least one series to aggregate")
    stacked = np.vstack([np.asarray(getattr(s, "values", s), dtype=float) for s in per_seed])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        q1, median, q3 = np.nanpercentile(stacked, [25, 50, 75], axis=0, method="linear")
    return median, q1, q3


def metric_table(metric: str, series_by_method: Dict[str, List[MetricSeries]],
                 baseline_method: Optional[str] = "random") -> pd.DataFrame:
    """
    One metric file: aggregated series of every method, with ratios to the
    baseline method's campaign of the same seed index when that method ran.
    """
    baseline = {s.seed: s for s in series_by_method.get(baseline_method, [])} if baseline_method else {}
    rows = []
    for method, series_list in series_by_method.items():
        if not series_list:
            continue
        series_list = sorted(series_list, key=lambda s: s.seed)
        median, q1, q3 = aggregate_across_seeds(series_list)
        if baseline and all(s.seed in baseline for s in series_list):
            ratios = [relative_to_baseline(s, baseline[s.seed]) for s in series_list]
            rel_median, rel_q1, rel_q3 = aggregate_across_seeds(ratios)
        else:
            rel_median = rel_q1 = rel_q3 = np.full(len(median), np.nan)
        for j, index in enumerate(series_list[0].indices):
            rows.append([
                str(int(index)), method,
                format_number(median[j]), format_number(q1[j]), format_number(q3[j]),
                format_number(rel_median[j]), format_number(rel_q1[j]), format_number(rel_q3[j]),
            ])
    logger.debug(f"Metric table {metric}: {len(rows)} rows")
    return pd.DataFrame(rows, columns=METRIC_COLUMNS, dtype=str)


def final_summary(series_by_method: Dict[str, List[MetricSeries]]) -> Dict[str, Tuple[float, float, float]]:
    """(median, q1, q3) of the last value of each method's series."""
    summary = {}
    for method, series_list in series_by_method.items():
        if series_list:
            median, q1, q3 = aggregate_across_seeds([[s.values[-1]] for s in series_list])
            summary[method] = (float(median[0]), float(q1[0]), float(q3[0]))
    return summary
