import json

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from fdtlra.bench import manifest
from fdtlra.bench.cli import build_parser, main
from fdtlra.bench.config import ExperimentConfig, load_config, load_preset
from fdtlra.bench.data import episode_seed, generate_dataset, load_dataset, split_of, write_dataset
from fdtlra.bench.experiments import eval_prediction, grid_cells, grid_orderings, run_grid
from fdtlra.bench.metrics import REPORT_COLUMNS, MetricsReport, delta_percent, median_iqr, r2_score, rmse
from fdtlra.bench.plots import FIGURE_COLUMNS, InvariantError, check_report, write_report
from fdtlra.bench.scenarios import build_scenario, phase_crossings
from fdtlra.fdt import FdtModel

TINY_OVERRIDES = {
    "seeds": [0],
    "data": {"episodes_per_payload": 3, "episode_duration": 1.5, "split": [1, 1, 1], "pre_roll": 0.3},
    "fdt": {"d_model": 8, "n_heads": 2, "d_ff": 16, "n_layers": 1, "T_s": 3, "T_l": 20, "k": 2},
    "train": {"epochs": 1, "stride": 4},
    "eval": {"duration": 1.0},
    "scenarios": {"duration": 1.0},
    "ablation": {"duration": 1.0},
}


@pytest.fixture
def tiny_cfg():
    return load_config(overrides=TINY_OVERRIDES)


# ------------------------------------------------------------ metrics

def test_perfect_prediction():
    y = np.random.default_rng(0).normal(size=(3, 50, 2))
    np.testing.assert_array_equal(rmse(y, y, axis=(1, 2)), 0.0)
    np.testing.assert_allclose(r2_score(y, y), 1.0)


def test_constant_mean_predictor_scores_zero():
    y = np.random.default_rng(1).normal(size=(40, 3))
    pred = np.broadcast_to(y.mean(0), y.shape)
    assert r2_score(pred, y) == pytest.approx(0.0, abs=1e-12)


def test_r2_rejects_constant_target_and_shape_mismatch():
    with pytest.raises(ValueError):
        r2_score(np.zeros((5, 1)), np.ones((5, 1)))
    with pytest.raises(ValueError):
        r2_score(np.zeros((5, 2)), np.zeros((4, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 10.0))
def test_metric_ranges(seed, scale):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=(30, 2))
    p = y + scale * rng.normal(size=y.shape)
    assert rmse(p, y) >= 0
    assert r2_score(p, y) <= 1.0


def test_rmse_by_hand():
    assert rmse([3.0, 4.0], [0.0, 0.0]) == pytest.approx(np.sqrt(12.5))


def test_seed_statistics():
    assert median_iqr([1, 2, 3, 4, 5]) == (3.0, 2.0, 4.0)
    with pytest.raises(ValueError):
        median_iqr([])
    assert delta_percent(0.5, 0.5) == 0.0
    assert delta_percent(1.5, 1.0) == pytest.approx(50.0)
    with pytest.raises(ValueError):
        delta_percent(1.0, 0.0)


def test_report_roundtrip(tmp_path):
    rep = MetricsReport()
    rep.add("tracking", "fdt", "rmse", [0.1, 0.3, 0.2], scenario="A", payload=0.3, speed=0.5)
    rep.add_value("ablation", "full", "delta_rmse_pct", 0.0)
    rep.write_csv(tmp_path / "m.csv")
    back = MetricsReport.read_csv(tmp_path / "m.csv")
    assert back.rows == rep.rows
    assert back.value(method="fdt", metric="rmse") == 0.2
    with pytest.raises(KeyError):
        back.value(metric="nonexistent")


def test_empty_report_is_header_only(tmp_path):
    MetricsReport().write_csv(tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text() == ",".join(REPORT_COLUMNS) + "\n"
    with pytest.raises(ValueError):
        (tmp_path / "x.csv").write_text("a,b\n1,2\n")
        MetricsReport.read_csv(tmp_path / "x.csv")


def test_report_invariants():
    rep = MetricsReport()
    rep.add("prediction", "fdt", "r2", [1.2])
    with pytest.raises(InvariantError):
        check_report(rep)


def test_metrics_agree_with_raw_log_recomputation(tiny_cfg, tmp_path):
    model = FdtModel(tiny_cfg.fdt_config(), seed=0)
    rep = eval_prediction(tiny_cfg, model, tmp_path)
    raw = np.loadtxt(tmp_path / "predictions_seed0.csv", delimiter=",", skiprows=1)
    n = 5
    r, base, adapted = raw[:, 1:1 + n], raw[:, 1 + n:1 + 2 * n], raw[:, 1 + 2 * n:1 + 3 * n]
    for method, pred in (("fdt", base), ("fdt_lra", adapted)):
        rm = np.sqrt(np.mean((pred - r) ** 2))
        sst = ((r - r.mean(0)) ** 2).sum(0)
        r2 = np.mean(1 - ((pred - r) ** 2).sum(0) / sst)
        assert abs(rep.value(method=method, metric="rmse") - rm) < 1e-10
        assert abs(rep.value(method=method, metric="r2") - r2) < 1e-10
    alpha = np.loadtxt(tmp_path / "alpha_weights.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(alpha[:, 1:].sum(1), 1.0, atol=1e-12)


# ------------------------------------------------------------ config

def test_presets_scale():
    for name, samples in (("desk", 18_000), ("paper", 90_000)):
        cfg = ExperimentConfig.from_dict(load_preset(name))
        d = cfg.data
        assert len(d.payloads) * d.episodes_per_payload * d.episode_duration * 100 == samples
        assert len(cfg.seeds) >= 20
    paper = ExperimentConfig.from_dict(load_preset("paper"))
    assert (paper.fdt_config().d_model, paper.train_config().epochs) == (512, 100)


def test_config_rejects_bad_input(tmp_path):
    with pytest.raises(ValueError):
        load_config(overrides={"seeds": []})
    with pytest.raises(ValueError):
        load_config(overrides={"bogus": 1})
    with pytest.raises(ValueError):
        load_config(overrides={"data": {"bogus": 1}})
    with pytest.raises(FileNotFoundError):
        load_config(overrides={"plant_file": str(tmp_path / "none.yaml")})
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "none.yaml")
    with pytest.raises(ValueError):
        load_config(preset="huge")
    with pytest.raises(ValueError):
        load_config(overrides={"fdt": {"T_s": 200}})
    with pytest.raises(ValueError):
        load_config(overrides={"gains": {"phi": [1, 1, 1, 1, 1]}})


def test_config_file_merges_and_roundtrips(tmp_path):
    (tmp_path / "c.yaml").write_text(yaml.safe_dump({"seed": 7, "fdt": {"T_l": 60}}))
    cfg = load_config(tmp_path / "c.yaml")
    assert cfg.seed == 7 and cfg.fdt_config().T_l == 60 and cfg.fdt_config().d_model == 64
    assert cfg.train_config().seed == 7
    cfg.save(tmp_path / "out.yaml")
    again = ExperimentConfig.from_dict(yaml.safe_load((tmp_path / "out.yaml").read_text()))
    assert again.to_dict() == cfg.to_dict()


# ------------------------------------------------------------ scenarios

def test_grid_has_eight_cells():
    cfg = load_config()
    cells = list(grid_cells(cfg))
    assert len(cells) == 8 and len(set(cells)) == 8


def test_pick_and_place_alternates_payload():
    plant, traj = build_scenario("A", load_config().plant_model(), 0.5, 1.0, 10.0)
    events = plant.payload.events
    assert plant.payload.initial == 0.5 and len(events) >= 4
    assert [m for _, m in events[:4]] == [0.0, 0.5, 0.0, 0.5]
    assert [t for t, _ in events] == [t for t, _ in phase_crossings(traj, 10.0)]
    plant_b, _ = build_scenario("B", load_config().plant_model(), 0.5, 1.0, 10.0)
    assert plant_b.payload.events == () and plant_b.payload.initial == 0.5
    with pytest.raises(ValueError):
        build_scenario("C", plant, 0.5, 1.0, 10.0)


def test_grid_orderings():
    per_seed = {}
    for v, scale in ((0.5, 1.0), (1.0, 2.0)):
        for meth, base in (("none", 3.0), ("fdt", 2.0), ("fdt_lra", 1.0)):
            per_seed[("B", 0.3, v, meth)] = np.full(3, base * scale)
    assert all(r["ok"] for r in grid_orderings(per_seed))
    per_seed[("B", 0.3, 1.0, "fdt")] = np.full(3, 0.5)
    bad = [r for r in grid_orderings(per_seed) if not r["ok"]]
    assert {r["check"] for r in bad} == {"method_order", "speed_monotone"}


def test_grid_writes_one_log_per_method(tiny_cfg, tmp_path):
    model = FdtModel(tiny_cfg.fdt_config(), seed=0)
    report, per_seed = run_grid(tiny_cfg, model, tmp_path, [("B", 0.3, 0.5)])
    names = sorted(p.name for p in (tmp_path / "logs").iterdir())
    assert names == ["B_m0.30_v0.50_fdt.csv", "B_m0.30_v0.50_fdt_alpha.csv", "B_m0.30_v0.50_fdt_lra.csv",
                     "B_m0.30_v0.50_fdt_lra_alpha.csv", "B_m0.30_v0.50_none.csv"]
    assert len(report.select(metric="rmse")) == 3 and len(per_seed) == 3


# ------------------------------------------------------------ data

def test_contiguous_split():
    assert [split_of(i, (3, 1, 1)) for i in range(5)] == ["train"] * 3 + ["val", "test"]
    assert len({episode_seed(0, c, i) for c in range(3) for i in range(10)}) == 30


def test_dataset_is_byte_identical(tiny_cfg, tmp_path):
    files = write_dataset(tmp_path / "a", generate_dataset(tiny_cfg), tiny_cfg)
    write_dataset(tmp_path / "b", generate_dataset(tiny_cfg), tiny_cfg)
    assert len(files) == 3 * 3 + 1
    for f in files:
        rel = f.relative_to(tmp_path / "a")
        assert f.read_bytes() == (tmp_path / "b" / rel).read_bytes()
    groups, meta = load_dataset(tmp_path / "a")
    assert {k: len(v) for k, v in groups.items()} == {"train": 3, "val": 3, "test": 3}
    assert meta["rate_hz"] == 100.0
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "missing")


# ------------------------------------------------------------ manifest / report

def test_manifest_checksums_skip_volatile(tmp_path):
    (tmp_path / "cfg.yaml").write_text("a: 1\n")
    (tmp_path / "x.csv").write_text("1\n")
    (tmp_path / "timing.csv").write_text("9\n")
    entry = manifest.record(tmp_path, "cmd", tmp_path / "cfg.yaml", 0, [0, 1],
                            [tmp_path / "cfg.yaml", tmp_path / "x.csv", tmp_path / "timing.csv"])
    assert set(entry["files"]) == {"cfg.yaml", "x.csv"} and entry["volatile"] == ["timing.csv"]
    assert manifest.verify(tmp_path) == []
    (tmp_path / "x.csv").write_text("2\n")
    assert manifest.verify(tmp_path) == ["x.csv"]
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["commands"]["cmd"]["seeds"] == [0, 1]


def test_report_of_nothing_is_header_only(tmp_path):
    write_report([], tmp_path)
    assert (tmp_path / "metrics.csv").read_text() == ",".join(REPORT_COLUMNS) + "\n"
    for name, cols in FIGURE_COLUMNS.items():
        assert (tmp_path / f"figure_{name}.csv").read_text() == ",".join(cols) + "\n"


def test_figure_columns_are_stable():
    assert FIGURE_COLUMNS == {
        "tracking_error": ("source", "seed", "t", "e_norm"),
        "sigma_hat": ("source", "seed", "t", "sigma_hat"),
        "resets": ("source", "seed", "t"),
        "alpha": ("source", "t", "channel", "weight"),
    }


def test_report_rejects_bad_attention_rows(tmp_path):
    run = tmp_path / "run"
    run.mkdir()
    (run / "alpha_weights.csv").write_text("t,alpha_0,alpha_1\n0.0,0.5,0.6\n")
    with pytest.raises(InvariantError):
        write_report([run], tmp_path / "rep", plots=False)


# ------------------------------------------------------------ cli

def test_parser_knows_all_commands():
    ap = build_parser()
    for cmd in ("generate-data", "train", "eval-prediction", "run-scenario", "ablate"):
        args = ap.parse_args([cmd, "--out", "x", "--preset", "paper", "--seed", "3"])
        assert args.seed == 3 and args.preset == "paper"
    assert ap.parse_args(["report", "a", "b", "--out", "r"]).runs


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["eval-prediction", "--out", str(tmp_path)]) == 1
    assert "checkpoint not found" in capsys.readouterr().err
    (tmp_path / "bad.yaml").write_text("seeds: []\n")
    assert main(["generate-data", "--out", str(tmp_path), "--config", str(tmp_path / "bad.yaml")]) == 1
    assert main(["train", "--out", str(tmp_path / "nodata")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["generate-data"])
    assert exc.value.code == 2
    assert main(["report", "--out", str(tmp_path / "rep")]) == 0
