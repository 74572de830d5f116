"""Protocol engine: repetition counts, merging, traces, Monte Carlo, bounds."""
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from treeprep.engine import (
    DegenerateNodeError,
    QpeModel,
    TreeGround,
    analytic_bounds,
    compound_success_lower_bound,
    merge,
    prepare,
    repetitions,
)
from treeprep.pauli import OperatorSum, PauliTerm, StateVector
from treeprep.tfim import tfim_tree
from treeprep.tree import decompose


def test_repetition_goldens():
    # frozen: ceil(-ln(1/3) * pi^2 / 4) = 3, ceil(same / 0.25) = 11
    assert repetitions(1.0, 1.0 / 3.0) == 3
    assert repetitions(0.5, 1.0 / 3.0) == 11
    assert repetitions(1.0, 0.9) == 1  # floor at one round


def test_repetition_domain():
    for bad in (0.0, -0.1, 1.1):
        with pytest.raises(ValueError):
            repetitions(bad, 0.1)
    for bad in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(ValueError):
            repetitions(0.5, bad)


@given(
    r=st.floats(min_value=0.05, max_value=1.0),
    delta=st.floats(min_value=1e-6, max_value=0.99),
)
def test_repetitions_guarantee_failure_budget(r, delta):
    # the round count must push the miss probability below the budget for
    # the worst per-round success consistent with the overlap floor
    k = repetitions(r, delta)
    q = 4.0 * r**2 / math.pi**2
    assert (1.0 - q) ** k <= delta + 1e-12


@given(
    # below ~1e-6 the true margin delta^2/2 sinks under float rounding
    delta=st.floats(min_value=1e-6, max_value=0.999999),
    n=st.integers(min_value=1, max_value=10**6),
)
def test_compound_success_floor(delta, n):
    assert compound_success_lower_bound(delta, n) >= 1.0 - delta - 1e-15


def test_qpe_model_validation():
    with pytest.raises(ValueError):
        QpeModel("optimistic")
    with pytest.raises(ValueError):
        QpeModel(c_qpe=0.0)
    m = QpeModel("pessimistic-cleve")
    assert m.success_probability(0.9) == pytest.approx(0.9 * 4.0 / math.pi**2)


def test_merge_overlaps_match_dense_oracle():
    g = TreeGround(tfim_tree(2))
    assert g.merge_overlap("") == pytest.approx(oracles.merge_overlap(2), abs=1e-10)
    assert g.merge_overlap("0") == pytest.approx(oracles.merge_overlap(1), abs=1e-10)
    # left and right halves are mirror images with identical spectra
    assert g.merge_overlap("0") == pytest.approx(g.merge_overlap("1"), abs=1e-12)
    assert g.min_merge_overlap() == pytest.approx(
        min(oracles.merge_overlap(1), oracles.merge_overlap(2)), abs=1e-10
    )


def test_merge_counts_u_applications():
    g = TreeGround(tfim_tree(1))
    rng = np.random.default_rng(0)
    child = g.node("0").ground
    out = merge(g, "", child, g.node("1").ground, QpeModel(), rng)
    # ceil(||H|| / gap) = ceil(sqrt5 / (sqrt5 - 1)) = 2
    assert out.u_applications == 2
    out3 = merge(g, "", child, g.node("1").ground, QpeModel(c_qpe=2.0), rng)
    assert out3.u_applications == 4


def test_merge_rejects_non_ground_children():
    g = TreeGround(tfim_tree(1))
    rng = np.random.default_rng(1)
    bad = StateVector(1, np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        merge(g, "", bad, g.node("1").ground, QpeModel(), rng)


def test_prepare_deterministic_trace():
    g = TreeGround(tfim_tree(2))
    a = prepare(g, delta=0.1, rng=np.random.default_rng([9, 4]))
    b = prepare(g, delta=0.1, rng=np.random.default_rng([9, 4]))
    assert a.succeeded == b.succeeded
    assert a.trace.to_json() == b.trace.to_json()


def test_prepare_leaf_only_tree():
    g = TreeGround(tfim_tree(0))
    res = prepare(g, delta=0.5, rng=np.random.default_rng(0))
    assert res.succeeded
    assert res.trace.n_v == 1
    assert res.trace.n_u == 0


def test_prepare_refuses_degenerate_nodes():
    op = OperatorSum(2, (PauliTerm(1.0, ((0, "X"), (1, "X"))),))
    tree = decompose(op, ((0, 1), (1, 2)), 1)
    g = TreeGround(tree)
    with pytest.raises(DegenerateNodeError):
        prepare(g, delta=0.1, rng=np.random.default_rng(0))


def test_prepare_unbounded_mode_flagged():
    g = TreeGround(tfim_tree(1))
    res = prepare(
        g, delta=0.1, model=QpeModel("pessimistic-cleve"),
        rng=np.random.default_rng(2), unbounded=True,
    )
    assert res.succeeded
    assert res.trace.unbounded


def test_failure_rate_within_budget():
    from treeprep.experiments import run_protocol

    g = TreeGround(tfim_tree(1))
    stats = run_protocol(g, 0.5, QpeModel("pessimistic-cleve"), n_runs=600, master_seed=21)
    sigma = math.sqrt(0.5 * 0.5 / 600)
    assert stats.failure_rate <= 0.5 + 3 * sigma
    assert stats.failure_count > 0  # the pessimistic model does fail sometimes


def test_monte_carlo_mean_matches_closed_form():
    from treeprep.experiments import run_protocol

    g = TreeGround(tfim_tree(2))
    model = QpeModel()
    stats = run_protocol(g, 0.1, model, n_runs=3000, master_seed=5)
    cf = oracles.closed_form_counts(g, 0.1, model)
    se = np.std(stats.n_v_samples, ddof=1) / math.sqrt(len(stats.n_v_samples))
    assert abs(stats.mean_n_v - cf[""][1]) <= 3.0 * se
    se_u = np.std(stats.n_u_samples, ddof=1) / math.sqrt(len(stats.n_u_samples))
    assert abs(stats.mean_n_u - cf[""][2]) <= 3.0 * se_u


def test_trace_json_uses_star_for_root():
    g = TreeGround(tfim_tree(1))
    res = prepare(g, delta=0.1, rng=np.random.default_rng(3))
    data = json.loads(res.trace.to_json())
    assert "*" in data["node_attempts"]
    assert res.trace.n_v == sum(data["node_attempts"][k] for k in ("0", "1"))


def test_analytic_bounds_goldens():
    # frozen: exponent 2(1 + log2(pi^2/4) + log2(log2(3)) + 1) at p = 1
    b = analytic_bounds(1, 1.0, 1.0 / 3.0)
    assert b.n_v_bound == pytest.approx(15.642952872679118, rel=1e-12)
    b0 = analytic_bounds(0, 0.5, 0.1)
    assert (b0.n_v_bound, b0.n_u_bound) == (1.0, 0.0)


def test_analytic_bounds_monotone_in_depth():
    vals = [analytic_bounds(p, 0.9, 0.1).n_v_bound for p in range(5)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_analytic_bounds_domain():
    with pytest.raises(ValueError):
        analytic_bounds(1, 0.0, 0.1)
    with pytest.raises(ValueError):
        analytic_bounds(1, 0.5, 0.0)
    with pytest.raises(ValueError):
        analytic_bounds(-1, 0.5, 0.1)


def test_per_run_rng_streams_are_independent():
    from treeprep.experiments import run_protocol

    g = TreeGround(tfim_tree(1))
    a = run_protocol(g, 0.1, QpeModel(), n_runs=50, master_seed=0)
    b = run_protocol(g, 0.1, QpeModel(), n_runs=50, master_seed=0)
    assert a.n_v_samples == b.n_v_samples
    assert a.n_u_samples == b.n_u_samples
    c = run_protocol(g, 0.1, QpeModel(), n_runs=50, master_seed=1)
    assert a.n_u_samples != c.n_u_samples
