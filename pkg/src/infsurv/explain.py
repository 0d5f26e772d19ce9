"""Local Cox surrogates for black-box survival models.

The black box maps a feature vector to a cumulative hazard on a fixed time
grid.  Around the point being explained we sample neighbours, ask the black
box for their CHFs and fit Cox coefficients ``b`` so that
``ln H_0j + b . x_k`` tracks ``ln H_j(x_k)``.

``explain_inf`` minimises the weighted sum over neighbours of the sup-norm
(over intervals) of the log-CHF gap.  Because ``b . x_k`` does not depend on
the interval, each neighbour only contributes the largest and smallest gap
``Q_k``/``R_k`` and the fit is the linear program::

    min  sum_k w_k z_k
    s.t. z_k >= Q_k - b . x_k
         z_k >= b . x_k - R_k          (z, b free)

``explain_l2`` is the least-squares comparator: it minimises the weighted,
interval-length weighted squared log-CHF gap and has a closed form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from ._seeding import derive_seed
from .core import StepFunction, TimeGrid
from .errors import (
    DimensionMismatch,
    GridMismatch,
    InvalidQR,
    NumericalFailure,
    PointOutsideBall,
)
from .lp import LpProblem, solve_lp


class DegenerateNeighborhood(UserWarning):
    """The sampled neighbours do not span the feature space."""


@dataclass(frozen=True)
class ExplainConfig:
    """Neighbourhood and solver settings for one explanation.

    ``lp_form`` chooses between solving the fitting LP through its dual
    (``"dual"``: ``d`` equality rows, one bounded variable per neighbour) or
    directly (``"primal"``: ``2N`` rows); both give the same optimum.
    """

    n_neighbors: int = 1000
    radius: float = 0.5
    epsilon_chf: float = 1e-8
    seed: int = 0
    lp_form: str = "dual"

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be positive")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.epsilon_chf > 0:
            raise ValueError("epsilon_chf must be positive")
        if self.lp_form not in ("dual", "primal"):
            raise ValueError(f"unknown lp_form {self.lp_form!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Neighborhood:
    points: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class ExplanationResult:
    x: np.ndarray
    coefficients: np.ndarray
    objective_value: float
    per_neighbor_residuals: np.ndarray
    surrogate_chf: StepFunction
    blackbox_chf: StepFunction
    method: str
    config: ExplainConfig
    neighborhood: Neighborhood = None
    degenerate: bool = False
    info: dict = field(default_factory=dict)

    def residual_stats(self) -> dict:
        r = self.per_neighbor_residuals
        return {
            "min": float(r.min()),
            "mean": float(r.mean()),
            "max": float(r.max()),
            "test_point": float(r[-1]),
        }


def sample_ball(center, radius: float, count: int, seed=0) -> np.ndarray:
    """``count`` points uniform in the closed ball of ``radius`` around ``center``.

    Directions are normalised standard normals; radii are ``radius * U**(1/d)``
    with ``U`` uniform on (0, 1].  ``seed`` may also be a numpy Generator.
    """
    center = np.asarray(center, dtype=float).ravel()
    d = center.shape[0]
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = rng.standard_normal((count, d))
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms == 0):  # measure zero, but keep the division safe
        bad = norms == 0
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1)
    u = 1.0 - rng.random(count)
    r = radius * u ** (1.0 / d)
    return center + g * (r / norms)[:, None]


def default_kernel(distances, radius: float) -> np.ndarray:
    return np.maximum(1.0 - np.sqrt(distances / radius), 0.0)


def neighbor_weights(center, points, radius: float,
                     kernel: Optional[Callable] = None) -> np.ndarray:
    """Weights ``1 - sqrt(||x - x_k|| / r)``, or ``kernel(distances, radius)``."""
    center = np.asarray(center, dtype=float).ravel()
    dist = np.linalg.norm(np.atleast_2d(points) - center, axis=1)
    if np.any(dist > radius + 1e-12):
        raise PointOutsideBall(f"point at distance {dist.max()} exceeds radius {radius}")
    return (kernel or default_kernel)(dist, radius)


def log_chf_intervals(chf, epsilon_chf: float = 1e-8) -> np.ndarray:
    """``ln(max(H_j, eps))`` per interval; accepts a StepFunction or an array."""
    values = chf.values if isinstance(chf, StepFunction) else np.asarray(chf, dtype=float)
    return np.log(np.maximum(values, epsilon_chf))


def compute_qr(log_h, log_h0):
    """Largest and smallest log-CHF gap over the intervals.

    ``log_h`` may be a single curve or a matrix with one curve per row; the
    result is then a pair of vectors.
    """
    log_h = np.asarray(log_h, dtype=float)
    log_h0 = np.asarray(log_h0, dtype=float).ravel()
    if log_h.shape[-1] != log_h0.shape[0]:
        raise DimensionMismatch(f"{log_h.shape[-1]} intervals against {log_h0.shape[0]}")
    gap = log_h - log_h0
    Q, R = gap.max(axis=-1), gap.min(axis=-1)
    if np.ndim(Q) == 0:
        return float(Q), float(R)
    return Q, R


def _check_qr(Q, R, weights, points):
    Q = np.asarray(Q, dtype=float).ravel()
    R = np.asarray(R, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if not (Q.shape == R.shape == w.shape and X.shape[0] == Q.shape[0]):
        raise DimensionMismatch("Q, R, weights and points must share their length")
    if np.any(Q < R):
        raise InvalidQR("Q_k < R_k for some neighbour")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return Q, R, w, X


def assemble_lp(Q, R, weights, points) -> LpProblem:
    """Fitting LP over ``(z_1..z_N, b_1..b_d)``: ``2N`` rows, all variables free."""
    Q, R, w, X = _check_qr(Q, R, weights, points)
    N, d = X.shape
    eye = np.eye(N)
    A = np.block([[-eye, -X], [-eye, X]])
    rhs = np.concatenate([-Q, R])
    c = np.concatenate([w, np.zeros(d)])
    free = np.full(N + d, -np.inf)
    return LpProblem(c, A, rhs, lower=free)


def assemble_dual_lp(Q, R, weights, points) -> LpProblem:
    """Dual of :func:`assemble_lp` in minimisation form.

    Variables ``a_k in [0, w_k]`` (the multiplier of ``z_k >= Q_k - b.x_k``)::

        min  -sum_k a_k (Q_k + R_k)
        s.t. 2 X^T a = X^T w

    Its optimum is minus the primal optimum minus ``sum_k w_k R_k``, and the
    primal ``b`` is minus the multipliers of the equality rows.
    """
    Q, R, w, X = _check_qr(Q, R, weights, points)
    return LpProblem(
        -(Q + R),
        lower=np.zeros_like(w),
        upper=w,
        eq_matrix=2.0 * X.T,
        eq_rhs=X.T @ w,
    )


def chebyshev_objective(b, Q, R, weights, points) -> float:
    """``sum_k w_k max(Q_k - b.x_k, b.x_k - R_k)`` evaluated directly."""
    s = np.atleast_2d(points) @ np.asarray(b, dtype=float)
    return float(np.sum(np.asarray(weights) * np.maximum(Q - s, s - R)))


def solve_inf(Q, R, weights, points, form: str = "dual"):
    """Optimal ``(b, z, objective, lp_solution)`` of the fitting LP."""
    Q, R, w, X = _check_qr(Q, R, weights, points)
    N, d = X.shape
    if form == "primal":
        sol = solve_lp(assemble_lp(Q, R, w, X))
        if not sol.optimal:
            raise NumericalFailure(f"fitting LP reported {sol.status.value}")
        b = sol.variables[N:]
    else:
        sol = solve_lp(assemble_dual_lp(Q, R, w, X))
        if not sol.optimal:
            raise NumericalFailure(f"dual fitting LP reported {sol.status.value}")
        b = -sol.eq_duals
    s = X @ b
    z = np.maximum(Q - s, s - R)
    objective = float(w @ z)
    if form == "dual":
        # strong duality certifies the recovered b
        dual_value = -sol.objective_value - float(w @ R)
        gap = abs(objective - dual_value)
        if gap > 1e-7 * (1.0 + abs(objective)):
            raise NumericalFailure(f"duality gap {gap:.3g} after recovering b")
    return b, z, objective, sol


def solve_l2(log_gap, interval_lengths, weights, points):
    """Weighted least squares fit of ``b . x_k`` to the log-CHF gaps.

    Minimises ``sum_k w_k sum_j D_j (gap_kj - b . x_k)^2``.  Returns
    ``(b, residuals, singular)`` where ``residuals[k]`` is the inner sum.
    A rank-deficient normal matrix falls back to the minimum-norm solution
    and sets ``singular``.
    """
    G = np.atleast_2d(np.asarray(log_gap, dtype=float))
    D = np.asarray(interval_lengths, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if G.shape != (X.shape[0], D.shape[0]) or w.shape[0] != X.shape[0]:
        raise DimensionMismatch("gap matrix, interval lengths and points disagree")
    total = D.sum()
    target = G @ D
    normal = (X * (w * total)[:, None]).T @ X
    moment = X.T @ (w * target)
    singular = np.linalg.matrix_rank(normal) < X.shape[1]
    if singular:
        b = np.linalg.lstsq(normal, moment, rcond=None)[0]
    else:
        b = np.linalg.solve(normal, moment)
    resid = ((G - (X @ b)[:, None]) ** 2) @ D
    return b, resid, bool(singular)


def surrogate_chf(b, baseline_chf: StepFunction, x) -> StepFunction:
    b = np.asarray(b, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if b.shape != x.shape:
        raise DimensionMismatch(f"{b.shape[0]} coefficients for {x.shape[0]} features")
    return StepFunction(baseline_chf.grid, baseline_chf.values * np.exp(b @ x))


class ProportionalHazardsOracle:
    """Black box that is exactly ``baseline * exp(b . x)``; handy for checks."""

    def __init__(self, baseline_chf: StepFunction, coefficients):
        self.baseline_chf = baseline_chf
        self.coefficients = np.asarray(coefficients, dtype=float)

    @property
    def grid(self) -> TimeGrid:
        return self.baseline_chf.grid

    def predict_chf(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.exp(X @ self.coefficients)[:, None] * self.baseline_chf.values[None, :]


def _query(blackbox, points, grid: TimeGrid) -> np.ndarray:
    if hasattr(blackbox, "grid") and not blackbox.grid.same_as(grid):
        raise GridMismatch("black box and baseline use different time grids")
    predict = blackbox.predict_chf if hasattr(blackbox, "predict_chf") else blackbox
    H = np.asarray(predict(points), dtype=float)
    if H.shape != (points.shape[0], grid.size):
        raise DimensionMismatch(f"black box returned shape {H.shape}")
    return H


def make_neighborhood(x, config: ExplainConfig, kernel=None) -> Neighborhood:
    """``N - 1`` sampled neighbours followed by ``x`` itself."""
    x = np.asarray(x, dtype=float).ravel()
    pts = sample_ball(x, config.radius, config.n_neighbors - 1, config.seed)
    pts = np.vstack([pts, x[None, :]])
    return Neighborhood(pts, neighbor_weights(x, pts, config.radius, kernel))


def _prepare(blackbox, baseline_chf, x, config, kernel):
    x = np.asarray(x, dtype=float).ravel()
    hood = make_neighborhood(x, config, kernel)
    N, d = hood.points.shape
    degenerate = np.linalg.matrix_rank(hood.points) < min(d, N)
    if degenerate:
        warnings.warn("neighbourhood matrix is rank deficient", DegenerateNeighborhood)
    H = _query(blackbox, hood.points, baseline_chf.grid)
    log_gap = log_chf_intervals(H, config.epsilon_chf) - log_chf_intervals(
        baseline_chf, config.epsilon_chf)
    return x, hood, H, log_gap, bool(degenerate)


def explain_inf(blackbox, baseline_chf: StepFunction, x, config: ExplainConfig = None,
                kernel=None) -> ExplanationResult:
    """Explain the black-box CHF at ``x`` with the sup-norm Cox fit.

    ``blackbox`` needs ``predict_chf(X) -> (N, m + 1)`` on the same grid as
    ``baseline_chf`` (the Nelson-Aalen estimate of the training data), or is
    a plain callable with that signature.
    """
    config = config or ExplainConfig()
    x, hood, H, log_gap, degenerate = _prepare(blackbox, baseline_chf, x, config, kernel)
    Q, R = log_gap.max(axis=1), log_gap.min(axis=1)
    b, z, objective, sol = solve_inf(Q, R, hood.weights, hood.points, config.lp_form)
    return ExplanationResult(
        x=x,
        coefficients=b,
        objective_value=objective,
        per_neighbor_residuals=z,
        surrogate_chf=surrogate_chf(b, baseline_chf, x),
        blackbox_chf=StepFunction(baseline_chf.grid, H[-1]),
        method="inf",
        config=config,
        neighborhood=hood,
        degenerate=degenerate,
        info={"lp_iterations": sol.iterations, "Q": Q, "R": R},
    )


def explain_l2(blackbox, baseline_chf: StepFunction, x, config: ExplainConfig = None,
               kernel=None) -> ExplanationResult:
    """Least-squares counterpart of :func:`explain_inf` (comparison baseline)."""
    config = config or ExplainConfig()
    x, hood, H, log_gap, degenerate = _prepare(blackbox, baseline_chf, x, config, kernel)
    b, resid, singular = solve_l2(log_gap, baseline_chf.grid.lengths(), hood.weights, hood.points)
    if singular:
        warnings.warn("normal matrix is singular; using the minimum-norm solution",
                      DegenerateNeighborhood)
    return ExplanationResult(
        x=x,
        coefficients=b,
        objective_value=float(hood.weights @ resid),
        per_neighbor_residuals=resid,
        surrogate_chf=surrogate_chf(b, baseline_chf, x),
        blackbox_chf=StepFunction(baseline_chf.grid, H[-1]),
        method="l2",
        config=config,
        neighborhood=hood,
        degenerate=degenerate,
        info={"singular": singular},
    )


def explain_batch(blackbox, baseline_chf, X, config: ExplainConfig = None,
                  method: str = "inf", kernel=None):
    """Explain every row of ``X``; row ``i`` uses ``derive_seed(config.seed, i)``."""
    config = config or ExplainConfig()
    fn = {"inf": explain_inf, "l2": explain_l2}[method]
    out = []
    for i, x in enumerate(np.atleast_2d(X)):
        cfg = ExplainConfig(config.n_neighbors, config.radius, config.epsilon_chf,
                            derive_seed(config.seed, i), config.lp_form)
        out.append(fn(blackbox, baseline_chf, x, cfg, kernel))
    return out
