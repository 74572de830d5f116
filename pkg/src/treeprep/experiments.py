"""Experiment orchestration: overlap/gap curves, Monte Carlo runs, CSV/report files.

Curves reproduce the desk-scale comparison between the naive product ansatz
and level-by-level merging for the critical transverse-field Ising chain.
The Monte Carlo driver runs seeded repeat-until-success trials and aggregates
failure rates, query counts, and the analytic bounds they must respect.

All CSV cells use 17 significant digits; identical master seeds give
byte-identical files.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .engine import ROOT, QpeModel, TreeGround, analytic_bounds, prepare
from .pauli import load_operator
from .tree import HamiltonianTree, decompose, node_term_operator
from .tfim import tfim_tree

IDEAL_KIND = "ideal-projective"


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class ModelConfig:
    """Either a TFIM chain ("tfim": p, h, J) or an operator file with leaf spans."""

    type: str = "tfim"
    p: int = 1
    h: float = 1.0
    J: float = 1.0
    path: str | None = None
    spans: tuple[tuple[int, int], ...] | None = None

    def validate(self) -> None:
        if self.type not in ("tfim", "operator-file"):
            raise ValueError(f"unknown model type {self.type!r}")
        if self.type == "tfim":
            if self.p < 0:
                raise ValueError("p must be >= 0")
            for name, v in (("h", self.h), ("J", self.J)):
                if not math.isfinite(v):
                    raise ValueError(f"{name} must be a finite real")
        else:
            if not self.path:
                raise ValueError("operator-file model needs a path")
            if not self.spans:
                raise ValueError("operator-file model needs leaf spans")
            count = len(self.spans)
            if count & (count - 1):
                raise ValueError("leaf span count must be a power of two")

    def build_tree(self) -> HamiltonianTree:
        self.validate()
        if self.type == "tfim":
            return tfim_tree(self.p, self.h, self.J)
        op = load_operator(self.path)
        p = len(self.spans).bit_length() - 1
        return decompose(op, self.spans, p)


@dataclass(frozen=True)
class EngineConfig:
    delta: float = 0.1
    qpe_model: str = IDEAL_KIND
    c_qpe: float = 1.0
    r_lb_mode: str = "measured"
    r_lb_value: float | None = None
    master_seed: int = 0
    n_runs: int = 1000

    def validate(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.r_lb_mode not in ("measured", "fixed"):
            raise ValueError(f"unknown r_lb_mode {self.r_lb_mode!r}")
        if self.r_lb_mode == "fixed":
            if self.r_lb_value is None or not 0.0 < self.r_lb_value <= 1.0:
                raise ValueError("fixed r_lb_mode needs r_lb_value in (0, 1]")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        QpeModel(self.qpe_model, self.c_qpe)  # validates kind and c_qpe

    def qpe(self) -> QpeModel:
        return QpeModel(self.qpe_model, self.c_qpe)


@dataclass(frozen=True)
class OutputConfig:
    csv_path: str | None = None
    report_path: str | None = None
    figure_path: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> None:
        self.model.validate()
        self.engine.validate()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        model = data.get("model", {})
        spans = model.get("spans")
        mc = ModelConfig(
            type=model.get("type", "tfim"),
            p=int(model.get("p", 1)),
            h=float(model.get("h", 1.0)),
            J=float(model.get("J", 1.0)),
            path=model.get("path"),
            spans=tuple((int(a), int(b)) for a, b in spans) if spans else None,
        )
        eng = data.get("engine", {})
        r_lb_value = eng.get("r_lb_value")
        ec = EngineConfig(
            delta=float(eng.get("delta", 0.1)),
            qpe_model=eng.get("qpe_model", IDEAL_KIND),
            c_qpe=float(eng.get("c_qpe", 1.0)),
            r_lb_mode=eng.get("r_lb_mode", "measured"),
            r_lb_value=float(r_lb_value) if r_lb_value is not None else None,
            master_seed=int(eng.get("master_seed", 0)),
            n_runs=int(eng.get("n_runs", 1000)),
        )
        out = data.get("output", {})
        oc = OutputConfig(
            csv_path=out.get("csv_path"),
            report_path=out.get("report_path"),
            figure_path=out.get("figure_path"),
        )
        return cls(mc, ec, oc)


# -- curves -------------------------------------------------------------------


@dataclass(frozen=True)
class OverlapRow:
    p: int
    naive_overlap: float
    degenerate: bool


@dataclass(frozen=True)
class LayerRow:
    p: int
    min_overlap: float
    node_overlaps: tuple[tuple[str, float], ...]
    degenerate: bool


@dataclass(frozen=True)
class GapRow:
    p: int
    gamma_root: float
    interaction_norm_root: float
    degenerate: bool


def _chain_ground(p_max: int, h: float, J: float) -> TreeGround:
    if p_max < 0 or p_max > 4:
        raise ValueError("p_max must lie in 0..4 (exact-diagonalization scale)")
    return TreeGround(tfim_tree(p_max, h, J))


def naive_overlap_curve(
    p_max: int, h: float = 1.0, J: float = 1.0, ground: TreeGround | None = None
) -> list[OverlapRow]:
    """|<full ground | (single-spin ground)^(x 2^p)>| for p = 0..p_max.

    Subsystem sizes are read off one spine of the depth-p_max tree: the node
    at depth p_max - p is itself a 2^p-spin chain with the same couplings.
    """
    g = ground if ground is not None else _chain_ground(p_max, h, J)
    leaf = g.node("0" * g.tree.p)
    single = leaf.ground.amplitudes
    rows = []
    for p in range(p_max + 1):
        node = g.node("0" * (g.tree.p - p))
        prod = single
        for _ in range(p):
            prod = np.kron(prod, prod)
        overlap = float(abs(np.vdot(node.ground.amplitudes, prod)))
        rows.append(OverlapRow(p, overlap, node.gap.degenerate or leaf.gap.degenerate))
    return rows


def layer_overlap_curve(
    p_max: int, h: float = 1.0, J: float = 1.0, ground: TreeGround | None = None
) -> list[LayerRow]:
    """Per merge level: child-product overlaps at every node, and their minimum.

    Row p collects the nodes at depth p_max - p, each of which merges two
    2^(p-1)-spin halves into a 2^p-spin chain.  The p = 0 row is the vacuous
    convention 1.0 (a leaf needs no merge).
    """
    g = ground if ground is not None else _chain_ground(p_max, h, J)
    tree = g.tree
    rows = [LayerRow(0, 1.0, (), g.node("0" * tree.p).gap.degenerate)]
    for p in range(1, p_max + 1):
        depth = tree.p - p
        labels = [format(i, f"0{depth}b") if depth else ROOT for i in range(1 << depth)]
        overlaps = tuple((lbl or "*", g.merge_overlap(lbl)) for lbl in labels)
        degenerate = any(g.node(lbl).gap.degenerate for lbl in labels)
        rows.append(
            LayerRow(p, min(v for _, v in overlaps), overlaps, degenerate)
        )
    return rows


def gap_interaction_curve(
    p_max: int, h: float = 1.0, J: float = 1.0, ground: TreeGround | None = None
) -> list[GapRow]:
    """Spectral gap of the 2^p-spin chain and the norm of its root coupling term.

    At p = 0 there is no root cut, so the interaction norm is 0 by convention.
    """
    g = ground if ground is not None else _chain_ground(p_max, h, J)
    tree = g.tree
    rows = []
    for p in range(p_max + 1):
        label = "0" * (tree.p - p)
        node = g.node(label)
        if p == 0:
            a_norm = 0.0
        else:
            a_norm = node_term_operator(tree, label).norm_bounds().power_estimate
        rows.append(GapRow(p, node.gap.value, a_norm, node.gap.degenerate))
    return rows


def write_figure_overlaps_csv(
    naive_rows: Sequence[OverlapRow], layer_rows: Sequence[LayerRow], path
) -> None:
    by_p = {r.p: r for r in layer_rows}
    lines = ["p,overlap_naive,overlap_layer_min"]
    for row in naive_rows:
        layer = by_p[row.p]
        lines.append(f"{row.p},{fmt17(row.naive_overlap)},{fmt17(layer.min_overlap)}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_figure_gaps_csv(rows: Sequence[GapRow], path) -> None:
    lines = ["p,gamma_root,interaction_norm_root"]
    for row in rows:
        lines.append(f"{row.p},{fmt17(row.gamma_root)},{fmt17(row.interaction_norm_root)}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# -- Monte Carlo driver -------------------------------------------------------


@dataclass(frozen=True)
class PrepareStats:
    """Aggregate of n_runs seeded repeat-until-success trials on one tree."""

    model_kind: str
    c_qpe: float
    p: int
    delta: float
    n_runs: int
    master_seed: int
    r_lb_mode: str
    r_lb: float
    h_max: float
    gamma_min: float
    failure_count: int
    failure_rate: float
    mean_n_v: float
    mean_n_u: float
    bound_n_v: float
    bound_n_u: float
    n_v_samples: tuple[int, ...]
    n_u_samples: tuple[int, ...]
    node_attempt_histogram: dict[str, dict[int, int]]
    node_success_totals: dict[str, int]

    def checks(self) -> dict[str, bool]:
        """Internal invariant checks; the CLI exit status folds these together."""
        sigma = math.sqrt(self.delta * (1.0 - self.delta) / self.n_runs)
        out = {
            "failure_rate_within_budget": self.failure_rate <= self.delta + 3.0 * sigma,
            "n_v_within_bound": all(v <= self.bound_n_v for v in self.n_v_samples),
            "n_u_within_bound": all(u <= self.bound_n_u for u in self.n_u_samples)
            if self.p > 0
            else True,
        }
        return out


def run_protocol(
    tree_or_ground,
    delta: float = 0.1,
    model: QpeModel = QpeModel(),
    n_runs: int = 1000,
    master_seed: int = 0,
    r_lb_mode: str = "measured",
    r_lb_value: float | None = None,
) -> PrepareStats:
    """Run ``n_runs`` independent seeded trials and aggregate their traces.

    Run i draws from numpy's Generator seeded with [master_seed, i]; repeated
    invocations with the same master seed reproduce every trace exactly.
    """
    ground = tree_or_ground if isinstance(tree_or_ground, TreeGround) else TreeGround(tree_or_ground)
    if r_lb_mode == "measured":
        r_lb = ground.min_merge_overlap()
    elif r_lb_mode == "fixed":
        if r_lb_value is None:
            raise ValueError("fixed r_lb_mode needs r_lb_value")
        r_lb = float(r_lb_value)
    else:
        raise ValueError(f"unknown r_lb_mode {r_lb_mode!r}")

    tree = ground.tree
    failures = 0
    n_v_samples = []
    n_u_samples = []
    attempt_hist: dict[str, Counter] = {}
    success_totals: dict[str, int] = {}
    for i in range(n_runs):
        rng = np.random.default_rng([master_seed, i])
        result = prepare(ground, ROOT, delta, r_lb, model, rng)
        result.trace.master_seed = master_seed
        if not result.succeeded:
            failures += 1
        n_v_samples.append(result.trace.n_v)
        n_u_samples.append(result.trace.n_u)
        for label, count in result.trace.node_attempts.items():
            attempt_hist.setdefault(label or "*", Counter())[count] += 1
        for label, count in result.trace.node_successes.items():
            key = label or "*"
            success_totals[key] = success_totals.get(key, 0) + count

    h_max = ground.max_node_norm()
    gamma_min = ground.min_node_gap()
    bounds = analytic_bounds(tree.p, r_lb, delta, h_max, gamma_min, 1.0, model.c_qpe)
    return PrepareStats(
        model_kind=model.kind,
        c_qpe=model.c_qpe,
        p=tree.p,
        delta=delta,
        n_runs=n_runs,
        master_seed=master_seed,
        r_lb_mode=r_lb_mode,
        r_lb=r_lb,
        h_max=h_max,
        gamma_min=gamma_min,
        failure_count=failures,
        failure_rate=failures / n_runs,
        mean_n_v=float(np.mean(n_v_samples)),
        mean_n_u=float(np.mean(n_u_samples)),
        bound_n_v=bounds.n_v_bound,
        bound_n_u=bounds.n_u_bound,
        n_v_samples=tuple(n_v_samples),
        n_u_samples=tuple(n_u_samples),
        node_attempt_histogram={k: dict(sorted(c.items())) for k, c in sorted(attempt_hist.items())},
        node_success_totals=dict(sorted(success_totals.items())),
    )


def write_prepare_csv(stats: PrepareStats, path) -> None:
    lines = [
        "model,p,delta,failure_rate,mean_N_V,mean_N_U,bound_N_V,bound_N_U,seed",
        ",".join(
            [
                stats.model_kind,
                str(stats.p),
                fmt17(stats.delta),
                fmt17(stats.failure_rate),
                fmt17(stats.mean_n_v),
                fmt17(stats.mean_n_u),
                fmt17(stats.bound_n_v),
                fmt17(stats.bound_n_u),
                str(stats.master_seed),
            ]
        ),
    ]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def prepare_report_dict(stats: PrepareStats, config: ExperimentConfig | None = None) -> dict:
    report = {
        "model": stats.model_kind,
        "c_qpe": stats.c_qpe,
        "p": stats.p,
        "delta": stats.delta,
        "n_runs": stats.n_runs,
        "seed": stats.master_seed,
        "r_lb_mode": stats.r_lb_mode,
        "r_lb": stats.r_lb,
        "h_max": stats.h_max,
        "gamma_min": stats.gamma_min,
        "failure_count": stats.failure_count,
        "failure_rate": stats.failure_rate,
        "mean_N_V": stats.mean_n_v,
        "mean_N_U": stats.mean_n_u,
        "bound_N_V": stats.bound_n_v,
        "bound_N_U": stats.bound_n_u,
        "max_N_V": max(stats.n_v_samples),
        "max_N_U": max(stats.n_u_samples),
        "node_attempt_histogram": {
            k: {str(n): c for n, c in v.items()} for k, v in stats.node_attempt_histogram.items()
        },
        "node_success_totals": stats.node_success_totals,
        "checks": stats.checks(),
    }
    if config is not None:
        report["config"] = {
            "model": {
                "type": config.model.type,
                "p": config.model.p,
                "h": config.model.h,
                "J": config.model.J,
                "path": config.model.path,
                "spans": [list(s) for s in config.model.spans] if config.model.spans else None,
            },
            "engine": {
                "delta": config.engine.delta,
                "qpe_model": config.engine.qpe_model,
                "c_qpe": config.engine.c_qpe,
                "r_lb_mode": config.engine.r_lb_mode,
                "r_lb_value": config.engine.r_lb_value,
                "master_seed": config.engine.master_seed,
                "n_runs": config.engine.n_runs,
            },
        }
    return report


def write_prepare_report(stats: PrepareStats, path, config: ExperimentConfig | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(prepare_report_dict(stats, config), fh, indent=1, sort_keys=True)
        fh.write("\n")


def run(config: ExperimentConfig) -> PrepareStats:
    """Execute the prepare experiment described by ``config`` and write its files.

    Validation happens before anything touches the filesystem, so an invalid
    config produces no partial artifacts.  Figure rendering (when a figure
    path is set) happens after the delimited output, alongside it.
    """
    config.validate()
    tree = config.model.build_tree()
    stats = run_protocol(
        tree,
        delta=config.engine.delta,
        model=config.engine.qpe(),
        n_runs=config.engine.n_runs,
        master_seed=config.engine.master_seed,
        r_lb_mode=config.engine.r_lb_mode,
        r_lb_value=config.engine.r_lb_value,
    )
    if config.output.csv_path:
        write_prepare_csv(stats, config.output.csv_path)
    if config.output.report_path:
        write_prepare_report(stats, config.output.report_path, config)
    if config.output.figure_path:
        from .plotting import render_attempts_figure

        render_attempts_figure(stats, config.output.figure_path)
    return stats
