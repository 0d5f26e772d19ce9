"""Survival data containers and the nonparametric estimators built on them.

A cumulative hazard or survival curve is stored as a :class:`StepFunction`
on a :class:`TimeGrid`.  The grid knots are the distinct observed event
times ``t_0 < ... < t_m``; value ``j`` holds the function on
``[t_j, t_{j+1})`` and the last value holds it on ``[t_m, horizon]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    GridMismatch,
    InvalidCHF,
    NoComparablePairs,
    NoEvents,
)

#: Floor applied to Kaplan-Meier values so their logarithm stays finite.
SF_EPS = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Right-censored survival data: features, observed times, event flags.

    Parameters
    ----------
    features : array-like, shape (n, d)
    times : array-like, shape (n,)
        Event or censoring times, all nonnegative.
    events : array-like, shape (n,)
        1 when the event was observed, 0 when censored.
    feature_names : sequence of str, optional
        Defaults to ``x1, ..., xd``.
    """

    features: np.ndarray
    times: np.ndarray
    events: np.ndarray
    feature_names: tuple = field(default=())

    def __post_init__(self):
        x = np.array(self.features, dtype=float, copy=True)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        t = np.array(self.times, dtype=float, copy=True).ravel()
        e = np.array(self.events, copy=True).ravel()
        if x.ndim != 2 or x.shape[0] != t.shape[0] or e.shape[0] != t.shape[0]:
            raise DimensionMismatch(
                f"features {x.shape}, times {t.shape}, events {e.shape} disagree"
            )
        if t.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if not np.all(np.isfinite(x)):
            raise ValueError("features must be finite")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValueError("times must be finite and nonnegative")
        if not np.all((e == 0) | (e == 1)):
            raise ValueError("events must be 0 or 1")
        names = tuple(self.feature_names) or tuple(
            f"x{j + 1}" for j in range(x.shape[1])
        )
        if len(names) != x.shape[1]:
            raise DimensionMismatch(
                f"{len(names)} feature names for {x.shape[1]} columns"
            )
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "events", _frozen(e, dtype=np.int8))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.times.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.events.sum())

    def subset(self, index) -> "SurvivalDataset":
        """Rows selected by an integer or boolean index, in index order."""
        index = np.asarray(index)
        return SurvivalDataset(
            self.features[index],
            self.times[index],
            self.events[index],
            self.feature_names,
        )

    def with_features(self, features, feature_names=None) -> "SurvivalDataset":
        return SurvivalDataset(
            features,
            self.times,
            self.events,
            self.feature_names if feature_names is None else feature_names,
        )


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing knots plus a horizon ``>= knots[-1]``."""

    knots: np.ndarray
    horizon: float

    def __post_init__(self):
        k = np.array(self.knots, dtype=float, copy=True).ravel()
        if k.size == 0:
            raise ValueError("a time grid needs at least one knot")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        h = float(self.horizon)
        if not h >= k[-1]:
            raise ValueError(f"horizon {h} precedes last knot {k[-1]}")
        object.__setattr__(self, "knots", _frozen(k))
        object.__setattr__(self, "horizon", h)

    @property
    def size(self) -> int:
        """Number of intervals, ``m + 1``."""
        return self.knots.shape[0]

    def lengths(self) -> np.ndarray:
        """Interval lengths; the last one is ``horizon - t_m`` (may be 0)."""
        return np.diff(np.append(self.knots, self.horizon))

    def interval_index(self, t) -> np.ndarray:
        """Index of the interval holding ``t``; -1 before the first knot."""
        return np.searchsorted(self.knots, np.asarray(t, dtype=float), side="right") - 1

    def same_as(self, other: "TimeGrid") -> bool:
        return (
            self.horizon == other.horizon
            and self.knots.shape == other.knots.shape
            and bool(np.all(self.knots == other.knots))
        )

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and self.same_as(other)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Piecewise-constant function on the intervals of ``grid``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        if v.shape[0] != self.grid.size:
            raise DimensionMismatch(
                f"{v.shape[0]} values for a grid with {self.grid.size} intervals"
            )
        object.__setattr__(self, "values", _frozen(v))

    def __call__(self, t, before: float = 0.0):
        """Evaluate at time(s) ``t``; ``before`` is returned for ``t < t_0``."""
        idx = self.grid.interval_index(t)
        out = np.where(idx >= 0, self.values[np.clip(idx, 0, None)], before)
        return out if np.ndim(t) else float(out)

    def is_chf(self) -> bool:
        v = self.values
        return bool(np.all(v >= 0) and np.all(np.diff(v) >= 0))

    def is_sf(self) -> bool:
        v = self.values
        return bool(np.all(v > 0) and np.all(v <= 1) and np.all(np.diff(v) <= 0))


def build_time_grid(dataset: SurvivalDataset, horizon_factor: float = 1.0) -> TimeGrid:
    """Grid of distinct event times; horizon is ``horizon_factor`` times the last."""
    if horizon_factor < 1:
        raise ValueError("horizon_factor must be >= 1")
    event_times = dataset.times[dataset.events == 1]
    if event_times.size == 0:
        raise NoEvents("every observation is censored")
    knots = np.unique(event_times)
    return TimeGrid(knots, horizon_factor * knots[-1])


def _risk_table(dataset: SurvivalDataset, grid: TimeGrid):
    """Events ``d_j`` and risk-set sizes ``n_j`` at every knot."""
    if dataset.n_events == 0:
        raise NoEvents("every observation is censored")
    event_times = dataset.times[dataset.events == 1]
    pos = np.searchsorted(grid.knots, event_times)
    on_grid = (pos < grid.size) & (grid.knots[np.minimum(pos, grid.size - 1)] == event_times)
    if not np.all(on_grid):
        raise GridMismatch("dataset has event times that are not grid knots")
    deaths = np.bincount(pos, minlength=grid.size).astype(float)
    sorted_times = np.sort(dataset.times)
    at_risk = (dataset.n - np.searchsorted(sorted_times, grid.knots, side="left")).astype(float)
    return deaths, at_risk


def nelson_aalen(dataset: SurvivalDataset, grid: TimeGrid) -> StepFunction:
    """Nelson-Aalen cumulative hazard evaluated on ``grid``.

    The grid must contain every event time of ``dataset``; knots at which
    nobody from ``dataset`` is at risk contribute a zero jump.
    """
    deaths, at_risk = _risk_table(dataset, grid)
    jumps = np.divide(deaths, at_risk, out=np.zeros_like(deaths), where=at_risk > 0)
    return StepFunction(grid, np.cumsum(jumps))


def kaplan_meier(dataset: SurvivalDataset, grid: TimeGrid) -> StepFunction:
    """Product-limit survival estimate; zero survival is floored at ``SF_EPS``."""
    deaths, at_risk = _risk_table(dataset, grid)
    factors = np.ones_like(deaths)
    np.divide(at_risk - deaths, at_risk, out=factors, where=at_risk > 0)
    return StepFunction(grid, np.maximum(np.cumprod(factors), SF_EPS))


def chf_to_sf(chf: StepFunction) -> StepFunction:
    if not chf.is_chf():
        raise InvalidCHF("cumulative hazard must be nonnegative and non-decreasing")
    return StepFunction(chf.grid, np.exp(-chf.values))


def concordance_index(risk_scores: Sequence[float], dataset: SurvivalDataset) -> float:
    """Harrell's C-index; higher risk score means an earlier expected event.

    A pair (i, j) is comparable when ``events[i] == 1`` and
    ``times[i] < times[j]``.  It is concordant when ``score_i > score_j``;
    tied scores count one half.
    """
    scores = np.asarray(risk_scores, dtype=float).ravel()
    if scores.shape[0] != dataset.n:
        raise DimensionMismatch(f"{scores.shape[0]} scores for {dataset.n} rows")
    order = np.argsort(dataset.times, kind="stable")
    t = dataset.times[order]
    s = scores[order]
    e = dataset.events[order]
    concordant = 0.0
    comparable = 0
    for i in np.flatnonzero(e == 1):
        # strictly later times only
        later = np.searchsorted(t, t[i], side="right")
        other = s[later:]
        comparable += other.size
        concordant += np.count_nonzero(s[i] > other) + 0.5 * np.count_nonzero(s[i] == other)
    if comparable == 0:
        raise NoComparablePairs("no pair has an observed earlier event")
    return concordant / comparable
