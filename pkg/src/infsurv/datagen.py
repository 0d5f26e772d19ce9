"""Synthetic Cox-Weibull survival data.

Covariates are uniform in a ball; survival times follow a Weibull baseline
with proportional hazards, so the true Cox coefficients are known::

    T = (-ln U / (lambda * exp(b . x))) ** (1 / v),   U ~ Uniform(0, 1)

Times above ``time_cap`` are set to the cap.  Event indicators are drawn
independently of the times with ``P(event) = censor_event_prob``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ._seeding import derive_seed
from .core import SurvivalDataset
from .explain import sample_ball

DEFAULT_COEFFICIENTS = (-0.25, 1e-6, -0.1, 0.35, 1e-6)


@dataclass(frozen=True)
class GenConfig:
    n: int = 1000
    d: int = 5
    b_true: tuple = DEFAULT_COEFFICIENTS
    lam: float = 1e-5
    v: float = 2.0
    sphere_radius: float = 8.0
    sphere_center: tuple = field(default=None)
    censor_event_prob: float = 0.9
    time_cap: float = 2000.0
    seed: int = 0

    def __post_init__(self):
        b = tuple(float(x) for x in self.b_true)
        object.__setattr__(self, "b_true", b)
        center = self.sphere_center
        center = (0.0,) * self.d if center is None else tuple(float(c) for c in center)
        object.__setattr__(self, "sphere_center", center)
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if len(b) != self.d or len(center) != self.d:
            raise ValueError("b_true and sphere_center need d entries")
        if not (self.lam > 0 and self.v > 0 and self.sphere_radius > 0 and self.time_cap > 0):
            raise ValueError("lam, v, sphere_radius and time_cap must be positive")
        if not 0 <= self.censor_event_prob <= 1:
            raise ValueError("censor_event_prob must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def weibull_cox_times(linear_predictor, u, lam: float, v: float) -> np.ndarray:
    """Inverse-CDF draw of Cox-Weibull survival times for uniforms ``u``."""
    return (-np.log(u) / (lam * np.exp(linear_predictor))) ** (1.0 / v)


def generate_cox_weibull(config: GenConfig = None, u=None) -> SurvivalDataset:
    """Draw a dataset; ``u`` (test hook) replaces the uniform draws."""
    config = config or GenConfig()
    x = sample_ball(config.sphere_center, config.sphere_radius, config.n,
                    derive_seed(config.seed, 0))
    rng = np.random.default_rng(derive_seed(config.seed, 1))
    if u is None:
        # open interval (0, 1): ln U stays finite and T stays positive
        u = rng.uniform(np.nextafter(0.0, 1.0), 1.0, size=config.n)
    else:
        u = np.broadcast_to(np.asarray(u, dtype=float), (config.n,))
    times = weibull_cox_times(x @ np.asarray(config.b_true), u, config.lam, config.v)
    times = np.minimum(times, config.time_cap)
    events = (rng.random(config.n) < config.censor_event_prob).astype(np.int8)
    return SurvivalDataset(x, times, events, tuple(f"x{j + 1}" for j in range(config.d)))


def train_test_split(n: int, n_test: int, seed: int = 0):
    """Seeded permutation split into ``(train_index, test_index)``."""
    if not 0 <= n_test < n:
        raise ValueError(f"cannot hold out {n_test} of {n} rows")
    perm = np.random.default_rng(derive_seed(seed, 7)).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])
