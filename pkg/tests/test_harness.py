import csv
import json
import math

import numpy as np
import pytest

from finsurrogate.harness import (
    GEN_TESTS, ComparisonTable, EvalReport, GenTestSpec, HarnessError, Workspace, assemble_reduced,
    compare_variants, evaluate_model, evaluate_settings, run_gen_test,
)
from finsurrogate.surrogate import SurrogateModel


@pytest.fixture(scope="module")
def ws(small_dataset):
    return Workspace.build(small_dataset, seed=5)


# -- reduced data --------------------------------------------------------------------------


def test_default_grid_reduces_to_384_cycles_split_308_76(default_dataset):
    red = assemble_reduced(default_dataset, seed=0)
    assert (len(red.train), len(red.val)) == (308, 76)
    picked = red.cycles
    assert len({(c.key, c.run) for c in picked}) == 384
    ids = [id(c) for c in red.train]
    assert not set(ids) & {id(c) for c in red.val}


def test_reduction_is_seeded(small_dataset):
    a, b = assemble_reduced(small_dataset, 3), assemble_reduced(small_dataset, 3)
    c = assemble_reduced(small_dataset, 4)
    ident = lambda r: [(x.key, x.run, x.cycle) for x in r.train]
    assert ident(a) == ident(b)
    assert ident(a) != ident(c)


# -- specs ---------------------------------------------------------------------------------


def settings_of(spec, ds):
    keys = ds.settings()
    universe = [k for k in keys if spec.in_universe(k[0], k[1], k[3])]
    return universe, [k for k in universe if spec.is_excluded(k[0], k[1], k[3])]


def test_shipped_specs_encode_the_test_table(small_dataset):
    expect = {
        "GT1": {("rect", 2.0, 25.0, 40.0), ("bio", 1.0, 60.0, 15.0)},
        "GT2": {k for k in small_dataset.settings() if k[0] != "pt4" and k[3] == 15.0},
        "GT3": {k for k in small_dataset.settings() if k[0] != "pt4" and k[3] == 25.0},
        "GT4": {k for k in small_dataset.settings() if k[0] != "pt4" and k[3] == 40.0},
        "GT5": {k for k in small_dataset.settings() if k[0] == "rect" and k[1] == 1.0},
        "GT6": {k for k in small_dataset.settings() if k[0] == "bio" and k[1] == 1.0},
    }
    for name, excluded in expect.items():
        universe, got = settings_of(GEN_TESTS[name], small_dataset)
        assert set(got) == excluded, name
    assert len(settings_of(GEN_TESTS["GT5"], small_dataset)[1]) == 5
    # the 2 Hz data never enters the geometry tests
    assert all(k[1] == 1.0 for k in settings_of(GEN_TESTS["GT6"], small_dataset)[0])


def test_spec_serializes():
    d = GEN_TESTS["GT5"].to_dict()
    assert d["frequencies"] == [1.0] and d["exclude"] == [{"shape": "rect"}]
    assert json.loads(json.dumps(d)) == d


# -- gen tests -------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def gt5_report(ws, tiny):
    return run_gen_test(GEN_TESTS["GT5"], "FP", "dense", configs=tiny, workspace=ws)


def test_excluded_settings_never_reach_training(ws, gt5_report):
    spec = GEN_TESTS["GT5"]
    n_train = sum(1 for c in ws.reduced.train if spec.in_universe(c.shape, c.key[1], c.key[3])
                  and not spec.is_excluded(c.shape, c.key[1], c.key[3]))
    assert gt5_report.n_train == n_train
    assert set(gt5_report.per_setting_mse) == {f"rect/1Hz/60deg/{p}deg" for p in (0, 15, 25, 40, 55)}


def test_report_arithmetic(gt5_report):
    vals = list(gt5_report.per_setting_mse.values())
    assert gt5_report.excluded_mse == pytest.approx(np.mean(vals), rel=1e-12)
    assert gt5_report.best_cycle["mse"] <= gt5_report.worst_cycle["mse"]
    assert [p["which"] for p in gt5_report.profiles] == ["best", "worst"]
    assert gt5_report.flags == []


def test_report_files(tmp_path, gt5_report):
    gt5_report.save(tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["spec"]["name"] == "GT5" and d["variant"] == "FP"
    gt5_report.save_profiles(tmp_path / "p.csv")
    rows = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert {r["which"] for r in rows} == {"best", "worst"}
    assert len(rows) == sum(len(p["t"]) for p in gt5_report.profiles)


def test_gen_test_is_deterministic(ws, gt5_report, tiny):
    again = run_gen_test(GEN_TESTS["GT5"], "FP", "dense", configs=tiny, workspace=ws)
    assert again.to_dict() == gt5_report.to_dict()


def test_spec_without_exclusions_is_flagged(ws, tiny):
    spec = GenTestSpec("none", ("rect",), ({"pitch": 99.0},))
    rep = run_gen_test(spec, "FP", "dense", configs=tiny, workspace=ws)
    assert "no excluded settings" in rep.flags
    assert math.isnan(rep.excluded_mse)
    assert rep.to_dict()["excluded_mse"] is None


def test_excluding_everything_is_an_error(ws, tiny):
    spec = GenTestSpec("all", ("rect",), ({"shape": "rect"},))
    with pytest.raises(HarnessError, match="remove all training data"):
        run_gen_test(spec, "FP", "dense", configs=tiny, workspace=ws)


def test_reference_scope_validation(ws, tiny):
    with pytest.raises(HarnessError):
        run_gen_test(GEN_TESTS["GT5"], "FP", "dense", configs=tiny, workspace=ws, reference_scope="nearby")


# -- evaluation --------------------------------------------------------------------------------


class ConstantModel:
    """Predicts zero; per-cycle MSE is then the mean squared target."""

    def __init__(self, values):
        self.values = values

    def cycle_mse(self, cycles):
        return np.array([self.values[(c.key, c.run, c.cycle)] for c in cycles])


def test_setting_and_cycle_weighting(small_dataset):
    groups = {k: v for k, v in list(small_dataset.groups().items())[:2]}
    (k1, c1), (k2, c2) = groups.items()
    vals = {(c.key, c.run, c.cycle): 1.0 for c in c1}
    vals.update({(c.key, c.run, c.cycle): 4.0 for c in c2[:2]})
    groups[k2] = c2[:2]
    m = ConstantModel(vals)
    _, by_setting, _ = evaluate_settings(m, groups, "setting")
    _, by_cycle, _ = evaluate_settings(m, groups, "cycle")
    assert by_setting == 2.5
    assert by_cycle == pytest.approx((len(c1) * 1 + 2 * 4) / (len(c1) + 2))
    with pytest.raises(HarnessError):
        evaluate_settings(m, groups, "median")


def test_evaluate_model_counts_cycles(ws, tiny):
    m = ws.model("FP", "dense", tiny["dense"], 0).fit(ws.reduced.train[:20])
    out = evaluate_model(m, ws.dataset)
    assert out["n_cycles"] == len(ws.dataset)
    assert isinstance(m, SurrogateModel)


# -- comparison --------------------------------------------------------------------------------


def test_comparison_table_serial_equals_parallel(tmp_path, ws, tiny):
    kw = dict(specs=["GT5", "GT6"], configs=tiny, variants=["FP", "BASELINE"], architectures=["dense"], workspace=ws)
    a = compare_variants(None, **kw)
    b = compare_variants(None, n_jobs=2, **kw)
    assert a.to_dict() == b.to_dict()
    assert len(a.rows) == 4
    avg = a.averages("FP", "dense")
    fp = [r["excluded_mse"] for r in a.rows if r["variant"] == "FP"]
    assert avg["Gen Test 5-6 Avg"] == pytest.approx(np.mean(fp))
    assert "Gen Test 1-4 Avg" not in avg
    a.save(tmp_path / "c.json", tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "variant,architecture,test,excluded_mse,reference_mse"
    assert any("Gen Test 5-6 Avg" in line for line in lines)
    assert isinstance(ComparisonTable(**{"rows": [], "references": {}}).to_dict(), dict)
    # GT5 and GT6 share one universe, hence one reference per variant
    assert len(a.references) == 2


def test_eval_report_to_dict_round_trips_through_json():
    rep = EvalReport({"name": "x"}, "FP", "dense", {}, float("nan"), 0.1, float("inf"))
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["excluded_mse"] is None and d["reference_excluded_mse"] is None
