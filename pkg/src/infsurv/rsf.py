"""Random survival forest with log-rank splitting.

Trees are stored as flat node arrays so routing runs in the compiled kernel.
Each tree draws from its own seed stream, ``derive_seed(seed, tree_index)``,
so a forest does not depend on the order in which trees are grown.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _backend
from ._seeding import derive_seed
from .core import StepFunction, SurvivalDataset, TimeGrid, build_time_grid, concordance_index, nelson_aalen
from .errors import DatasetTooSmall, DimensionMismatch, NoEvents

LEAF = -1
#: Bootstrap redraws allowed when a sample happens to contain no events.
MAX_BOOTSTRAP_REDRAWS = 100


@dataclass(frozen=True)
class RSFParams:
    n_trees: int = 100
    mtry: int | None = None  # None means ceil(sqrt(d))
    min_leaf_size: int = 5
    max_depth: int | None = None
    max_thresholds: int = 64
    bootstrap: bool = True
    horizon_factor: float = 1.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_leaf_size < 1:
            raise ValueError("min_leaf_size must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.max_thresholds < 1:
            raise ValueError("max_thresholds must be >= 1")

    def resolved_mtry(self, d: int) -> int:
        return min(d, self.mtry if self.mtry is not None else math.ceil(math.sqrt(d)))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SurvivalTree:
    """Flat binary tree; ``feature[i] == -1`` marks leaf ``leaf_index[i]``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_index: np.ndarray
    leaf_values: np.ndarray  # (n_leaves, m + 1) CHF rows
    node_size: np.ndarray  # in-bag rows reaching each node
    node_events: np.ndarray
    oob: np.ndarray  # row indices never drawn for this tree

    def __post_init__(self):
        for name, dtype in (("feature", np.int64), ("threshold", float), ("left", np.int64),
                            ("right", np.int64), ("leaf_index", np.int64), ("leaf_values", float),
                            ("node_size", np.int64), ("node_events", np.int64), ("oob", np.int64)):
            a = np.array(getattr(self, name), dtype=dtype, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.leaf_values.ndim != 2:
            raise ValueError("leaf_values must be a matrix")

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return self.leaf_values.shape[0]

    def apply(self, X) -> np.ndarray:
        """Leaf node id reached by each row."""
        return _backend.route_tree(self.feature, self.threshold, self.left, self.right, X)

    def predict_chf(self, X) -> np.ndarray:
        return self.leaf_values[self.leaf_index[self.apply(X)]]

    def split_records(self) -> list:
        return [(int(f), float(t)) for f, t in zip(self.feature, self.threshold) if f >= 0]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf_index": self.leaf_index.tolist(),
            "leaf_values": self.leaf_values.tolist(),
            "node_size": self.node_size.tolist(),
            "node_events": self.node_events.tolist(),
            "oob": self.oob.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, grid_size: int) -> "SurvivalTree":
        values = np.asarray(data["leaf_values"], dtype=float).reshape(-1, grid_size)
        return cls(**{**data, "leaf_values": values})


@dataclass(frozen=True, eq=False)
class RandomSurvivalForest:
    trees: tuple
    grid: TimeGrid
    params: RSFParams
    seed: int
    n_features: int
    feature_names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise ValueError("a forest needs at least one tree")
        for tree in self.trees:
            if tree.leaf_values.shape[1] != self.grid.size:
                raise ValueError("tree leaves are not on the forest grid")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(self.n_features))
        object.__setattr__(self, "feature_names", names)

    @property
    def d(self) -> int:
        return self.n_features

    def _check(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        return X

    def tree_predictions(self, X) -> np.ndarray:
        """Per-tree CHFs, shape ``(n_trees, N, m + 1)``."""
        X = self._check(X)
        return np.stack([t.predict_chf(X) for t in self.trees])

    def predict_chf(self, X) -> np.ndarray:
        """Ensemble CHF for every row of ``X``, shape ``(N, m + 1)``."""
        X = self._check(X)
        total = np.zeros((X.shape[0], self.grid.size))
        for tree in self.trees:
            total += tree.predict_chf(X)
        return total / len(self.trees)

    def risk_scores(self, X) -> np.ndarray:
        """Ensemble mortality: CHF summed over the grid."""
        return self.predict_chf(X).sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "seed": int(self.seed),
            "n_features": int(self.n_features),
            "feature_names": list(self.feature_names),
            "grid": {"knots": self.grid.knots.tolist(), "horizon": self.grid.horizon},
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RandomSurvivalForest":
        grid = TimeGrid(np.asarray(data["grid"]["knots"], dtype=float), data["grid"]["horizon"])
        return cls(
            trees=tuple(SurvivalTree.from_dict(t, grid.size) for t in data["trees"]),
            grid=grid,
            params=RSFParams(**data["params"]),
            seed=int(data["seed"]),
            n_features=int(data["n_features"]),
            feature_names=tuple(data.get("feature_names", ())),
        )


def log_rank_statistic(group_a: SurvivalDataset, group_b: SurvivalDataset) -> float:
    """Absolute standardised two-sample log-rank statistic."""
    times = np.concatenate([group_a.times, group_b.times])
    events = np.concatenate([group_a.events, group_b.events])
    if not np.any(events):
        raise NoEvents("pooled groups contain no events")
    distinct, rank = np.unique(times, return_inverse=True)
    stat = _backend.logrank_scan(rank, events, distinct.size, np.array([group_a.n]))
    return float(stat[0])


def _candidate_cuts(values, event_cum, min_leaf: int, max_thresholds: int):
    """Admissible split positions of a sorted column."""
    n = values.shape[0]
    p = np.flatnonzero(values[1:] > values[:-1]) + 1
    total_events = event_cum[-1]
    ok = (p >= min_leaf) & (n - p >= min_leaf)
    left_events = event_cum[p - 1]
    ok &= (left_events >= 1) & (total_events - left_events >= 1)
    p = p[ok]
    if p.size > max_thresholds:
        pick = np.unique(np.round(np.linspace(0, p.size - 1, max_thresholds)).astype(np.int64))
        p = p[pick]
    return p


def _threshold(lo: float, hi: float) -> float:
    mid = 0.5 * (lo + hi)
    # rounding can push the midpoint onto ``hi``, which would route it left
    return mid if lo <= mid < hi else lo


def _grow_tree(dataset: SurvivalDataset, grid: TimeGrid, params: RSFParams, seed: int) -> SurvivalTree:
    rng = np.random.default_rng(seed)
    n, d = dataset.n, dataset.d
    mtry = params.resolved_mtry(d)
    if params.bootstrap:
        for _ in range(MAX_BOOTSTRAP_REDRAWS):
            inbag = rng.integers(0, n, size=n)
            if dataset.events[inbag].any():
                break
        else:
            raise NoEvents("bootstrap samples keep missing every event")
        oob = np.setdiff1d(np.arange(n), inbag)
    else:
        inbag = np.arange(n)
        oob = np.empty(0, dtype=np.int64)

    X, times, events = dataset.features, dataset.times, dataset.events
    feature, threshold, left, right, leaf_index, size, n_ev = [], [], [], [], [], [], []
    leaves = []
    stack = [(inbag, 0, None)]  # rows, depth, (parent, is_left)
    while stack:
        rows, depth, link = stack.pop()
        node = len(feature)
        if link is not None:
            (left if link[1] else right)[link[0]] = node
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_index.append(-1)
        size.append(rows.size)
        n_ev.append(int(events[rows].sum()))

        best = (0.0, -1, 0.0, None, None)
        can_split = (
            (params.max_depth is None or depth < params.max_depth)
            and rows.size >= 2 * params.min_leaf_size
            and n_ev[-1] >= 2
        )
        if can_split:
            distinct, rank = np.unique(times[rows], return_inverse=True)
            for j in rng.choice(d, size=mtry, replace=False):
                order = np.argsort(X[rows, j], kind="stable")
                col = X[rows[order], j]
                ev = events[rows[order]]
                cuts = _candidate_cuts(col, np.cumsum(ev), params.min_leaf_size, params.max_thresholds)
                if cuts.size == 0:
                    continue
                stats = _backend.logrank_scan(rank[order], ev, distinct.size, cuts)
                k = int(np.argmax(stats))
                if stats[k] > best[0]:
                    p = cuts[k]
                    ordered = rows[order]
                    best = (float(stats[k]), int(j), _threshold(col[p - 1], col[p]),
                            np.sort(ordered[:p]), np.sort(ordered[p:]))
        if best[1] < 0:
            leaf_index[node] = len(leaves)
            leaves.append(nelson_aalen(dataset.subset(rows), grid).values)
            continue
        _, j, thr, rows_left, rows_right = best
        feature[node] = j
        threshold[node] = thr
        # right pushed first so the left subtree is numbered first
        stack.append((rows_right, depth + 1, (node, False)))
        stack.append((rows_left, depth + 1, (node, True)))

    return SurvivalTree(feature, threshold, left, right, leaf_index,
                        np.array(leaves), size, n_ev, oob)


def fit_rsf(dataset: SurvivalDataset, params: RSFParams = None, seed: int = 0) -> RandomSurvivalForest:
    params = params or RSFParams()
    if dataset.n < 2 * params.min_leaf_size:
        raise DatasetTooSmall(
            f"{dataset.n} rows; at least {2 * params.min_leaf_size} required"
        )
    if dataset.n_events == 0:
        raise NoEvents("every observation is censored")
    grid = build_time_grid(dataset, params.horizon_factor)
    trees = [_grow_tree(dataset, grid, params, derive_seed(seed, i)) for i in range(params.n_trees)]
    return RandomSurvivalForest(tuple(trees), grid, params, int(seed), dataset.d, dataset.feature_names)


def rsf_predict_chf(forest: RandomSurvivalForest, x) -> StepFunction:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("x must be a vector")
    return StepFunction(forest.grid, forest.predict_chf(x[None, :])[0])


def oob_concordance(forest: RandomSurvivalForest, dataset: SurvivalDataset) -> float:
    """C-index of out-of-bag ensemble mortality on the training data."""
    total = np.zeros((dataset.n, forest.grid.size))
    count = np.zeros(dataset.n)
    for tree in forest.trees:
        if tree.oob.size:
            total[tree.oob] += tree.predict_chf(dataset.features[tree.oob])
            count[tree.oob] += 1
    covered = np.flatnonzero(count > 0)
    scores = total[covered].sum(axis=1) / count[covered]
    return concordance_index(scores, dataset.subset(covered))
