import json

import numpy as np
import pytest

from infsurv import (
    CoxModel, DatasetSchema, ExplainConfig, FeatureColumn, ProportionalHazardsOracle, RSFParams,
    StepFunction, SurvivalDataset, TimeGrid, explain_inf, fit_rsf, generate_cox_weibull, GenConfig, load_csv,
    load_model, read_dataset_csv, read_report, save_model, write_dataset_csv, write_report,
    write_step_svg,
)
from infsurv.dataio import load_csv_report, render_step_svg, report_from_result
from infsurv.errors import EmptyAfterFiltering, IoError, MalformedReport, SchemaMismatch

BASE = StepFunction(TimeGrid([1.0, 2.0, 4.0], 6.0), [0.1, 0.4, 0.9])

RAW = """id,age,grade,time,event
1,50,a,5,dead
2,,b,7,alive
3,70,2.0,3,dead
4,60,a,,dead
5,40,2,9,alive
"""


def schema(missing):
    return DatasetSchema((FeatureColumn("age"), FeatureColumn("grade", "categorical")),
                         event_truthy={"dead"}, missing=missing)


def test_drop_policy(tmp_path):
    p = tmp_path / "raw.csv"
    p.write_text(RAW)
    d, rep = load_csv_report(p, schema("drop"))
    assert d.n == 3 and rep.rows_read == 5
    assert rep.dropped == {"time_or_event": 1, "missing_feature": 1}
    assert d.feature_names == ("age", "grade=a", "grade=2")
    assert d.events.tolist() == [1, 1, 0]


def test_impute_policy(tmp_path):
    p = tmp_path / "raw.csv"
    p.write_text(RAW)
    d, rep = load_csv_report(p, schema("impute"))
    assert d.n == 4 and rep.imputed == {"age": 1}
    assert d.features[1, 0] == pytest.approx((50 + 70 + 40) / 3)


def test_schema_errors(tmp_path):
    p = tmp_path / "raw.csv"
    p.write_text("age,time\n1,2\n")
    with pytest.raises(SchemaMismatch):
        load_csv(p, schema("drop"))
    p.write_text("age,grade,time,event\n,a,,\n")
    with pytest.raises(EmptyAfterFiltering):
        load_csv(p, schema("drop"))
    assert DatasetSchema.from_dict(schema("drop").to_dict()) == schema("drop")


def test_dataset_csv_round_trip(tmp_path):
    d = generate_cox_weibull(GenConfig(n=30, seed=1))
    write_dataset_csv(d, tmp_path / "d.csv")
    e = read_dataset_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(d.features, e.features)
    np.testing.assert_array_equal(d.times, e.times)
    np.testing.assert_array_equal(d.events, e.events)


def test_model_round_trip(tmp_path):
    cox = CoxModel(np.array([0.1, -0.3]), BASE)
    save_model(cox, tmp_path / "c.json", {"note": "x"})
    again, meta = load_model(tmp_path / "c.json")
    assert meta["note"] == "x"
    np.testing.assert_array_equal(again.coefficients, cox.coefficients)
    np.testing.assert_array_equal(again.baseline_chf.values, BASE.values)

    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 2))
    forest = fit_rsf(SurvivalDataset(x, rng.exponential(size=40), np.ones(40)), RSFParams(n_trees=3))
    save_model(forest, tmp_path / "f.json")
    f2, _ = load_model(tmp_path / "f.json")
    np.testing.assert_array_equal(forest.predict_chf(x), f2.predict_chf(x))


def test_report_round_trip_and_errors(tmp_path):
    res = explain_inf(ProportionalHazardsOracle(BASE, [0.2, 0.1]), BASE, [1.0, 2.0],
                      ExplainConfig(n_neighbors=30))
    report = report_from_result(res, {"row": 3})
    write_report(tmp_path / "r.json", report)
    assert read_report(tmp_path / "r.json") == json.loads(json.dumps(report))
    with pytest.raises(IoError):
        read_report(tmp_path / "absent.json")
    text = (tmp_path / "r.json").read_text()
    (tmp_path / "t.json").write_text(text[: len(text) // 2])
    with pytest.raises(MalformedReport):
        read_report(tmp_path / "t.json")


def test_svg_paths_and_determinism(tmp_path):
    flat = StepFunction(BASE.grid, [0.5, 0.5, 0.5])
    one = render_step_svg([("flat", flat)])
    assert one.count('class="curve"') == 1
    path = one.split('class="curve"')[1].split('d="')[1].split('"')[0]
    assert path.count("V") == 0 and path.count("H") == 1
    two = render_step_svg([("a", flat), ("b", BASE)])
    assert two.count('class="curve"') == 2 and two.count("legend-entry") == 2
    write_step_svg([("a", flat)], tmp_path / "a.svg")
    write_step_svg([("a", flat)], tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
