"""Experiment drivers: curves, Monte Carlo aggregation, file outputs."""
import json
import math

import numpy as np
import pytest

import oracles
from treeprep.engine import IDEAL_PROJECTIVE, TreeGround, analytic_bounds
from treeprep.experiments import (
    EngineConfig,
    ExperimentConfig,
    ModelConfig,
    OutputConfig,
    fmt17,
    gap_interaction_curve,
    layer_overlap_curve,
    naive_overlap_curve,
    run,
    run_protocol,
    write_figure_gaps_csv,
    write_figure_overlaps_csv,
    write_prepare_csv,
)
from treeprep.tfim import tfim_tree


def test_fmt17_is_shortest_exact_form():
    assert fmt17(0.1) == "0.10000000000000001"
    assert fmt17(1.0) == "1"
    assert float(fmt17(math.pi)) == math.pi


def test_naive_curve_matches_dense_oracle():
    rows = naive_overlap_curve(3)
    assert [r.p for r in rows] == [0, 1, 2, 3]
    assert rows[0].naive_overlap == pytest.approx(1.0, abs=1e-12)
    for p in (1, 2, 3):
        assert rows[p].naive_overlap == pytest.approx(
            oracles.naive_overlap(p), abs=1e-9
        )
    assert not any(r.degenerate for r in rows)


def test_layer_curve_matches_dense_oracle():
    rows = layer_overlap_curve(2)
    assert rows[0].min_overlap == 1.0  # leaf rows need no merge
    assert rows[1].min_overlap == pytest.approx(oracles.merge_overlap(1), abs=1e-10)
    assert rows[2].min_overlap == pytest.approx(oracles.merge_overlap(2), abs=1e-10)
    # level 1 has two symmetric merges; their overlaps agree to the bit
    level1 = dict(rows[1].node_overlaps)
    assert level1["0"] == level1["1"]


def test_gap_curve_goldens():
    rows = gap_interaction_curve(2)
    assert rows[0].interaction_norm_root == 0.0
    assert rows[1].interaction_norm_root == 1.0
    assert rows[2].interaction_norm_root == 1.0
    assert rows[1].gamma_root == pytest.approx(1.2360679774997898, abs=1e-10)
    assert rows[2].gamma_root == pytest.approx(0.6945927106677221, abs=1e-8)


def test_decoupled_chain_is_exactly_product():
    # J = 0 leaves nothing to entangle: both curves sit at exactly one
    ground = TreeGround(tfim_tree(2, 1.0, 0.0))
    for row in naive_overlap_curve(2, 1.0, 0.0, ground=ground):
        assert row.naive_overlap == 1.0
    for row in layer_overlap_curve(2, 1.0, 0.0, ground=ground)[1:]:
        assert row.min_overlap == 1.0


def test_curve_p_max_guard():
    with pytest.raises(ValueError):
        naive_overlap_curve(5)
    with pytest.raises(ValueError):
        gap_interaction_curve(-1)


def test_overlap_csv_layout(tmp_path):
    ground = TreeGround(tfim_tree(1))
    naive = naive_overlap_curve(1, ground=ground)
    layer = layer_overlap_curve(1, ground=ground)
    path = tmp_path / "overlaps.csv"
    write_figure_overlaps_csv(naive, layer, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "p,overlap_naive,overlap_layer_min"
    assert lines[1] == "0,1,1"
    p1 = lines[2].split(",")
    assert p1[0] == "1"
    assert float(p1[1]) == pytest.approx(oracles.naive_overlap(1), abs=1e-10)
    assert p1[1] == fmt17(naive[1].naive_overlap)  # full 17-digit rendering


def test_gap_csv_layout(tmp_path):
    path = tmp_path / "gaps.csv"
    write_figure_gaps_csv(gap_interaction_curve(1), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "p,gamma_root,interaction_norm_root"
    assert lines[1] == "0,2,0"
    assert lines[2].startswith("1,") and lines[2].endswith(",1")


def test_run_protocol_deterministic_and_bounded(tmp_path):
    g = TreeGround(tfim_tree(1))
    a = run_protocol(g, 0.1, n_runs=200, master_seed=7)
    b = run_protocol(g, 0.1, n_runs=200, master_seed=7)
    assert a.n_v_samples == b.n_v_samples
    assert a.n_u_samples == b.n_u_samples
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_prepare_csv(a, pa)
    write_prepare_csv(b, pb)
    assert pa.read_bytes() == pb.read_bytes()
    want = analytic_bounds(1, a.r_lb, 0.1, a.h_max, a.gamma_min, 1.0, 1.0)
    assert a.bound_n_v == want.n_v_bound
    assert a.bound_n_u == want.n_u_bound
    assert all(v <= a.bound_n_v for v in a.n_v_samples)
    assert all(c for c in a.checks().values())


def test_run_protocol_fixed_r_lb():
    g = TreeGround(tfim_tree(1))
    stats = run_protocol(g, 0.1, n_runs=50, master_seed=1, r_lb_mode="fixed", r_lb_value=0.5)
    assert stats.r_lb == 0.5
    assert stats.r_lb_mode == "fixed"
    with pytest.raises(ValueError):
        run_protocol(g, 0.1, n_runs=5, r_lb_mode="fixed")
    with pytest.raises(ValueError):
        run_protocol(g, 0.1, n_runs=5, r_lb_mode="guessed")


def test_prepare_csv_schema(tmp_path):
    stats = run_protocol(TreeGround(tfim_tree(1)), 0.1, n_runs=20, master_seed=3)
    path = tmp_path / "prepare.csv"
    write_prepare_csv(stats, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "model,p,delta,failure_rate,mean_N_V,mean_N_U,bound_N_V,bound_N_U,seed"
    cells = lines[1].split(",")
    assert cells[0] == IDEAL_PROJECTIVE
    assert cells[1] == "1"
    assert cells[2] == "0.10000000000000001"
    assert cells[8] == "3"


def test_config_from_dict_round_trip():
    cfg = ExperimentConfig.from_dict(
        {
            "model": {"type": "tfim", "p": 2, "h": 0.5, "J": 2.0},
            "engine": {"delta": 0.2, "n_runs": 10, "master_seed": 42},
            "output": {"csv_path": "out.csv"},
        }
    )
    assert cfg.model.p == 2 and cfg.model.h == 0.5
    assert cfg.engine.delta == 0.2 and cfg.engine.master_seed == 42
    assert cfg.output.csv_path == "out.csv"
    cfg.validate()


def test_config_validation_errors():
    with pytest.raises(ValueError):
        ModelConfig(type="heisenberg").validate()
    with pytest.raises(ValueError):
        ModelConfig(type="operator-file", path=None, spans=((0, 1),)).validate()
    with pytest.raises(ValueError):
        ModelConfig(type="operator-file", path="x.json", spans=((0, 1),) * 3).validate()
    with pytest.raises(ValueError):
        EngineConfig(delta=0.0).validate()
    with pytest.raises(ValueError):
        EngineConfig(r_lb_mode="fixed").validate()
    with pytest.raises(ValueError):
        EngineConfig(qpe_model="magic").validate()
    with pytest.raises(ValueError):
        EngineConfig(n_runs=0).validate()


def test_run_writes_all_outputs(tmp_path):
    csv_path = tmp_path / "out.csv"
    report_path = tmp_path / "report.json"
    figure_path = tmp_path / "out.png"
    cfg = ExperimentConfig(
        ModelConfig(p=1),
        EngineConfig(delta=0.1, n_runs=40, master_seed=9),
        OutputConfig(str(csv_path), str(report_path), str(figure_path)),
    )
    stats = run(cfg)
    assert csv_path.exists() and report_path.exists() and figure_path.exists()
    assert figure_path.stat().st_size > 0
    report = json.loads(report_path.read_text())
    assert report["seed"] == 9
    assert report["mean_N_V"] == stats.mean_n_v
    assert report["config"]["engine"]["n_runs"] == 40
    assert set(report["checks"]) == {
        "failure_rate_within_budget",
        "n_v_within_bound",
        "n_u_within_bound",
    }


def test_run_invalid_config_writes_nothing(tmp_path):
    csv_path = tmp_path / "never.csv"
    cfg = ExperimentConfig(
        ModelConfig(p=1),
        EngineConfig(delta=2.0),
        OutputConfig(str(csv_path), None, None),
    )
    with pytest.raises(ValueError):
        run(cfg)
    assert not csv_path.exists()


def test_mean_queries_track_closed_form():
    g = TreeGround(tfim_tree(2))
    stats = run_protocol(g, 0.2, n_runs=2000, master_seed=13)
    cf = oracles.closed_form_counts(g, 0.2, stats_model(stats))
    se = np.std(stats.n_v_samples, ddof=1) / math.sqrt(stats.n_runs)
    assert abs(stats.mean_n_v - cf[""][1]) <= 3.0 * se


def stats_model(stats):
    from treeprep.engine import QpeModel

    return QpeModel(stats.model_kind, stats.c_qpe)
