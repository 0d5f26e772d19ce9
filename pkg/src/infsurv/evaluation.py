"""Metrics and experiment harness for comparing explanations."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._seeding import derive_seed
from .core import StepFunction, chf_to_sf, nelson_aalen
from .cox import fit_cox
from .datagen import GenConfig, generate_cox_weibull, train_test_split
from .errors import DimensionMismatch, Diverged, EmptyInput, GridMismatch, NoEvents
from .explain import ExplainConfig, explain_batch

#: Fresh data draws allowed per study cell when the Cox fit fails.
MAX_REDRAWS = 100


def rmse(reference, explained, conventional: bool = False) -> float:
    """``sqrt(mean_i ||ref_i - expl_i||_2)``.

    The norms are averaged unsquared.  ``conventional=True`` squares them
    first (the usual RMSE), for diagnostics only.
    """
    a = np.atleast_2d(np.asarray(reference, dtype=float))
    b = np.atleast_2d(np.asarray(explained, dtype=float))
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    if a.shape[0] == 0:
        raise EmptyInput("no coefficient vectors")
    norms = np.linalg.norm(a - b, axis=1)
    return float(np.sqrt(np.mean(norms**2 if conventional else norms)))


def sf_l2_distance(a: StepFunction, b: StepFunction) -> float:
    """Integral L2 distance between two step functions on one grid."""
    if not a.grid.same_as(b.grid):
        raise GridMismatch("step functions live on different grids")
    diff = a.values - b.values
    return float(np.sqrt(np.sum(a.grid.lengths() * diff * diff)))


def select_best_mean_worst(distances):
    """Indices of the smallest, closest-to-average and largest distances."""
    d = np.asarray(distances, dtype=float).ravel()
    if d.size == 0:
        raise EmptyInput("no distances to select from")
    mean = d.mean()
    # argmin/argmax return the first index on ties
    return int(np.argmin(d)), int(np.argmin(np.abs(d - mean))), int(np.argmax(d))


def experiment_report(results, b_model=None, b_true=None, select_by: str = None) -> dict:
    """Per-point distances, aggregates and best/mean/worst selections.

    ``select_by`` defaults to ``distance_to_model`` when ``b_model`` is
    given, else to ``chf_l2_distance``.
    """
    if not results:
        raise EmptyInput("no explanations")
    rows = []
    for r in results:
        row = {
            "b_expl": r.coefficients.tolist(),
            "sf_l2_distance": sf_l2_distance(chf_to_sf(r.blackbox_chf), chf_to_sf(r.surrogate_chf)),
            "chf_l2_distance": sf_l2_distance(r.blackbox_chf, r.surrogate_chf),
        }
        if b_model is not None:
            row["distance_to_model"] = float(np.linalg.norm(r.coefficients - b_model))
        if b_true is not None:
            row["distance_to_true"] = float(np.linalg.norm(r.coefficients - b_true))
        rows.append(row)
    expl = [r.coefficients for r in results]
    aggregates = {}
    if b_model is not None:
        aggregates["rmse_model"] = rmse([b_model] * len(expl), expl)
    if b_true is not None:
        aggregates["rmse_true"] = rmse([b_true] * len(expl), expl)
    key = select_by or ("distance_to_model" if b_model is not None else "chf_l2_distance")
    best, mean, worst = select_best_mean_worst([row[key] for row in rows])
    return {
        "per_testpoint": rows,
        "aggregates": aggregates,
        "selections": {"by": key, "best": best, "mean": mean, "worst": worst},
    }


# --------------------------------------------------------------------------
# small-sample study

STUDY_COLUMNS = ("rmse_model_inf", "rmse_model_l2", "rmse_true_inf", "rmse_true_l2")


@dataclass
class StudyResult:
    sizes: tuple
    repetitions: list = field(default_factory=list)  # one dict per (n, rep)
    config: dict = field(default_factory=dict)

    def cells(self, n: int) -> list:
        return [r for r in self.repetitions if r["n"] == n]

    def table(self) -> list:
        """One row per size with mean and standard deviation of each metric."""
        out = []
        for n in self.sizes:
            cells = self.cells(n)
            row = {"n": n, "repetitions": len(cells)}
            for col in STUDY_COLUMNS:
                v = np.array([c[col] for c in cells])
                row[col] = float(v.mean())
                row[col + "_sd"] = float(v.std(ddof=1)) if v.size > 1 else 0.0
            row["inf_wins"] = sum(c["rmse_model_inf"] < c["rmse_model_l2"] for c in cells)
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = ["n", "repetitions"]
        for col in STUDY_COLUMNS:
            fields += [col, col + "_sd"]
        fields.append("inf_wins")
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in self.table():
            writer.writerow({k: (format(v, ".17g") if isinstance(v, float) else v)
                             for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"config": self.config, "table": self.table(), "repetitions": self.repetitions}


def _study_cell(n, n_test, rep_seed, gen, explain_config):
    for attempt in range(MAX_REDRAWS):
        data_seed = derive_seed(rep_seed, attempt)
        cfg = GenConfig(**{**gen.to_dict(), "n": n + n_test, "seed": data_seed})
        data = generate_cox_weibull(cfg)
        train_idx, test_idx = train_test_split(data.n, n_test, data_seed)
        train = data.subset(train_idx)
        try:
            model = fit_cox(train)
        except (Diverged, NoEvents):
            continue
        baseline = nelson_aalen(train, model.grid)
        X = data.features[test_idx]
        ecfg = ExplainConfig(explain_config.n_neighbors, explain_config.radius,
                             explain_config.epsilon_chf, rep_seed, explain_config.lp_form)
        b_inf = [r.coefficients for r in explain_batch(model, baseline, X, ecfg, "inf")]
        b_l2 = [r.coefficients for r in explain_batch(model, baseline, X, ecfg, "l2")]
        b_model = [model.coefficients] * n_test
        b_true = [np.asarray(gen.b_true)] * n_test
        return {
            "redraws": attempt,
            "data_seed": data_seed,
            "b_model": model.coefficients.tolist(),
            "rmse_model_inf": rmse(b_model, b_inf),
            "rmse_model_l2": rmse(b_model, b_l2),
            "rmse_true_inf": rmse(b_true, b_inf),
            "rmse_true_l2": rmse(b_true, b_l2),
        }
    raise Diverged(f"no convergent Cox fit for n={n} after {MAX_REDRAWS} draws")


def run_small_n_study(sizes=(10, 20, 30, 40), n_test: int = 10, repetitions: int = 10,
                      seed: int = 0, gen_config: GenConfig = None,
                      explain_config: ExplainConfig = None) -> StudyResult:
    """Cox black box trained on ``n`` rows, explained by both fits.

    Repetition ``k`` of size ``n`` draws data from
    ``derive_seed(derive_seed(seed, n), k)``; a failed Cox fit triggers a
    fresh draw and is counted in ``redraws``.
    """
    if not sizes or repetitions < 1 or n_test < 1:
        raise EmptyInput("need sizes, repetitions >= 1 and n_test >= 1")
    gen = gen_config or GenConfig()
    explain_config = explain_config or ExplainConfig()
    result = StudyResult(
        sizes=tuple(int(n) for n in sizes),
        config={
            "sizes": [int(n) for n in sizes],
            "n_test": n_test,
            "repetitions": repetitions,
            "seed": seed,
            "gen": gen.to_dict(),
            "explain": explain_config.to_dict(),
        },
    )
    for n in result.sizes:
        for k in range(repetitions):
            cell = _study_cell(n, n_test, derive_seed(derive_seed(seed, n), k), gen, explain_config)
            result.repetitions.append({"n": n, "repetition": k, **cell})
    for cell in result.repetitions:
        for col in STUDY_COLUMNS:
            if not math.isfinite(cell[col]):
                raise Diverged(f"non-finite {col} at n={cell['n']}")
    return result
