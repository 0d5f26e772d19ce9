"""Cox proportional hazards model with Breslow handling of ties."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import StepFunction, SurvivalDataset, TimeGrid, build_time_grid
from .errors import DimensionMismatch, Diverged, InvalidCHF, NoEvents

#: Newton aborts once any coefficient exceeds this magnitude.
SEPARATION_LIMIT = 50.0
MAX_HALVINGS = 20


@dataclass(frozen=True, eq=False)
class CoxModel:
    coefficients: np.ndarray
    baseline_chf: StepFunction
    feature_names: tuple = ()

    def __post_init__(self):
        b = np.array(self.coefficients, dtype=float, copy=True).ravel()
        if not np.all(np.isfinite(b)):
            raise ValueError("coefficients must be finite")
        if not self.baseline_chf.is_chf():
            raise InvalidCHF("baseline is not a cumulative hazard")
        b.setflags(write=False)
        object.__setattr__(self, "coefficients", b)
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(b.size))
        object.__setattr__(self, "feature_names", names)

    @property
    def grid(self) -> TimeGrid:
        return self.baseline_chf.grid

    @property
    def d(self) -> int:
        return self.coefficients.shape[0]

    def predict_chf(self, X) -> np.ndarray:
        """CHF values for every row of ``X``, shape ``(N, m + 1)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"expected {self.d} features, got {X.shape[1]}")
        return np.exp(X @ self.coefficients)[:, None] * self.baseline_chf.values[None, :]

    def risk_scores(self, X) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, dtype=float)) @ self.coefficients


class _RiskSets:
    """Precomputed bookkeeping for Breslow partial-likelihood sums."""

    def __init__(self, dataset: SurvivalDataset):
        if dataset.n_events == 0:
            raise NoEvents("every observation is censored")
        order = np.argsort(dataset.times, kind="stable")
        self.x = dataset.features[order]
        self.t = dataset.times[order]
        e = dataset.events[order].astype(bool)
        self.knots, self.deaths = np.unique(self.t[e], return_counts=True)
        # risk set of knot j = sorted rows start[j]:
        self.start = np.searchsorted(self.t, self.knots, side="left")
        self.death_x_sum = self.x[e].sum(axis=0)

    def _suffix(self, a):
        # sum over rows start[j]: for every knot
        c = np.cumsum(a[::-1], axis=0)[::-1]
        return c[self.start]

    def evaluate(self, b, order: int = 0):
        eta = self.x @ b
        shift = eta.max()
        w = np.exp(eta - shift)
        s0 = self._suffix(w)
        loglik = float(self.death_x_sum @ b - np.sum(self.deaths * (np.log(s0) + shift)))
        if order == 0:
            return loglik
        xw = self.x * w[:, None]
        s1 = self._suffix(xw)
        mean = s1 / s0[:, None]
        grad = self.death_x_sum - (self.deaths[:, None] * mean).sum(axis=0)
        if order == 1:
            return loglik, grad
        s2 = self._suffix(xw[:, :, None] * self.x[:, None, :])
        cov = s2 / s0[:, None, None] - mean[:, :, None] * mean[:, None, :]
        hess = -(self.deaths[:, None, None] * cov).sum(axis=0)
        return loglik, grad, hess

    def breslow(self, b) -> np.ndarray:
        eta = self.x @ b
        return np.cumsum(self.deaths / self._suffix(np.exp(eta)))


def cox_partial_loglik(dataset: SurvivalDataset, b) -> float:
    """Breslow log partial likelihood at coefficient vector ``b``."""
    b = np.asarray(b, dtype=float).ravel()
    if b.shape[0] != dataset.d:
        raise DimensionMismatch(f"expected {dataset.d} coefficients, got {b.shape[0]}")
    return _RiskSets(dataset).evaluate(b)


def cox_gradient(dataset: SurvivalDataset, b) -> np.ndarray:
    return _RiskSets(dataset).evaluate(np.asarray(b, dtype=float), order=1)[1]


def fit_cox(
    dataset: SurvivalDataset,
    tol: float = 1e-8,
    max_iter: int = 100,
    horizon_factor: float = 1.0,
) -> CoxModel:
    """Maximise the Breslow partial likelihood by damped Newton steps.

    Starts at ``b = 0``.  A step is halved (at most 20 times) until the
    likelihood does not decrease.  Converged when the gradient sup-norm or
    the relative likelihood change drops to ``tol``.  The baseline is the
    Breslow estimator on the grid of distinct event times.

    Raises
    ------
    NoEvents
    Diverged
        If ``max_iter`` is exhausted or a coefficient leaves [-50, 50].
    """
    rs = _RiskSets(dataset)
    b = np.zeros(dataset.d)
    loglik, grad, hess = rs.evaluate(b, order=2)
    converged = np.max(np.abs(grad), initial=0.0) <= tol
    it = 0
    while not converged:
        if it >= max_iter:
            raise Diverged(f"no convergence after {max_iter} Newton iterations")
        it += 1
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(-hess, grad, rcond=None)[0]
        for _ in range(MAX_HALVINGS + 1):
            candidate = b + step
            new_loglik = rs.evaluate(candidate)
            if np.isfinite(new_loglik) and new_loglik >= loglik:
                break
            step = step / 2
        else:
            # no ascent possible along the Newton direction
            converged = True
            break
        if np.max(np.abs(candidate)) > SEPARATION_LIMIT:
            raise Diverged("coefficient magnitude exceeded the separation guard")
        change = abs(new_loglik - loglik) / max(abs(loglik), 1e-300)
        b = candidate
        loglik, grad, hess = rs.evaluate(b, order=2)
        converged = np.max(np.abs(grad)) <= tol or change <= tol
    grid = build_time_grid(dataset, horizon_factor)
    baseline = StepFunction(grid, rs.breslow(b))
    return CoxModel(b, baseline, dataset.feature_names)


def cox_predict_chf(model: CoxModel, x) -> StepFunction:
    x = np.asarray(x, dtype=float).ravel()
    return StepFunction(model.grid, model.predict_chf(x[None, :])[0])
