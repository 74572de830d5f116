"""Command-line interface.

Every subcommand validates its full configuration before anything is written,
emits delimited output (to stdout, or to --csv), and when a CSV path is given
renders a matplotlib figure next to it unless --no-figure is passed.  Errors
leave a machine-readable JSON record on stderr and exit nonzero; subcommands
that evaluate invariants exit 0 only when every check passes.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .engine import (
    IDEAL_PROJECTIVE,
    PESSIMISTIC_CLEVE,
    ROOT,
    TreeGround,
)
from .experiments import (
    EngineConfig,
    ExperimentConfig,
    ModelConfig,
    OutputConfig,
    fmt17,
    gap_interaction_curve,
    layer_overlap_curve,
    naive_overlap_curve,
    prepare_report_dict,
    run_protocol,
    write_figure_gaps_csv,
    write_figure_overlaps_csv,
    write_prepare_csv,
    write_prepare_report,
)
from .pauli import ConvergenceError, save_operator
from .tfim import tfim_tree
from .tree import save_tree, validate


def _fail(exc: BaseException, code: int = 2):
    record = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(record, sort_keys=True), err=True)
    sys.exit(code)


def _guarded(fn):
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (
            ValueError,
            KeyError,
            OSError,
            ConvergenceError,
            json.JSONDecodeError,
        ) as exc:
            _fail(exc)

    return wrapper


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _parse_spans(text: str) -> tuple[tuple[int, int], ...]:
    spans = []
    for chunk in text.split(","):
        lo, _, hi = chunk.strip().partition(":")
        spans.append((int(lo), int(hi)))
    return tuple(spans)


def _pick(flag, cfg: dict, key: str, default):
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    return default


def _model_config(cfg: dict, p, field_h, coupling_j, operator, spans) -> ModelConfig:
    mc = cfg.get("model", {})
    path = operator if operator is not None else mc.get("path")
    wants_file = (operator is not None) or (mc.get("type") == "operator-file")
    if wants_file:
        span_text = spans if spans is not None else None
        if span_text is not None:
            parsed = _parse_spans(span_text)
        elif mc.get("spans"):
            parsed = tuple((int(a), int(b)) for a, b in mc["spans"])
        else:
            parsed = None
        return ModelConfig(type="operator-file", path=path, spans=parsed)
    return ModelConfig(
        type="tfim",
        p=int(_pick(p, mc, "p", 1)),
        h=float(_pick(field_h, mc, "h", 1.0)),
        J=float(_pick(coupling_j, mc, "J", 1.0)),
    )


def _engine_config(cfg: dict, delta, qpe_model, c_qpe, r_lb_mode, r_lb_value, seed, runs) -> EngineConfig:
    ec = cfg.get("engine", {})
    raw_r_lb = _pick(r_lb_value, ec, "r_lb_value", None)
    return EngineConfig(
        delta=float(_pick(delta, ec, "delta", 0.1)),
        qpe_model=str(_pick(qpe_model, ec, "qpe_model", IDEAL_PROJECTIVE)),
        c_qpe=float(_pick(c_qpe, ec, "c_qpe", 1.0)),
        r_lb_mode=str(_pick(r_lb_mode, ec, "r_lb_mode", "measured")),
        r_lb_value=float(raw_r_lb) if raw_r_lb is not None else None,
        master_seed=int(_pick(seed, ec, "master_seed", 0)),
        n_runs=int(_pick(runs, ec, "n_runs", 1000)),
    )


def _emit(text: str, csv_path: str | None) -> None:
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _figure_target(figure, no_figure, csv_path) -> str | None:
    if no_figure:
        return None
    if figure:
        return figure
    if csv_path:
        return str(Path(csv_path).with_suffix(".png"))
    return None


_model_options = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="JSON config; explicit flags override its fields."),
    click.option("--p", type=int, default=None, help="Tree depth (chain of 2^p spins)."),
    click.option("--h", "field_h", type=float, default=None, help="Transverse field strength."),
    click.option("--J", "coupling_j", type=float, default=None, help="Nearest-neighbor coupling."),
    click.option("--operator", type=click.Path(exists=True), default=None,
                 help="Operator JSON file instead of the built-in chain."),
    click.option("--spans", type=str, default=None,
                 help="Leaf spans lo:hi,lo:hi,... for an operator file."),
]


def _add_options(options):
    def deco(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn

    return deco


@click.group()
@click.version_option(version=__version__, prog_name="treeprep")
def main():
    """Divide-and-conquer ground-state preparation: simulator and bounds."""


@main.command("tree-info")
@_add_options(_model_options)
@click.option("--save-tree", "save_tree_path", type=click.Path(), default=None)
@click.option("--save-operator", "save_operator_path", type=click.Path(), default=None)
@_guarded
def tree_info(config_path, p, field_h, coupling_j, operator, spans, save_tree_path, save_operator_path):
    """Build the operator tree, validate it, and print its layout."""
    cfg = _load_config(config_path)
    model = _model_config(cfg, p, field_h, coupling_j, operator, spans)
    tree = model.build_tree()
    report = validate(tree)
    lines = [
        f"qubits: {tree.n_qubits}",
        f"depth: {tree.p}",
        f"terms: {len(tree.source.terms)}",
    ]
    for label in tree.labels():
        span = tree.node_span(label)
        n_terms = len(tree.node_terms[label])
        lines.append(f"node {label or '*'}: span [{span[0]}, {span[1]}), {n_terms} terms")
    for check in report.checks:
        detail = "" if check.passed else " " + "; ".join(check.details)
        lines.append(f"check {check.name}: {'PASS' if check.passed else 'FAIL' + detail}")
    click.echo("\n".join(lines))
    if save_tree_path:
        save_tree(tree, save_tree_path)
    if save_operator_path:
        save_operator(tree.source, save_operator_path)
    if not report.ok:
        sys.exit(1)


@main.command("prepare")
@_add_options(_model_options)
@click.option("--delta", type=float, default=None, help="Overall failure budget in (0, 1).")
@click.option("--qpe-model", type=click.Choice([IDEAL_PROJECTIVE, PESSIMISTIC_CLEVE]), default=None)
@click.option("--c-qpe", type=float, default=None, help="Cost constant per merge attempt.")
@click.option("--r-lb-mode", type=click.Choice(["measured", "fixed"]), default=None)
@click.option("--r-lb-value", type=float, default=None)
@click.option("--seed", type=int, default=None, help="Master seed; run i draws from [seed, i].")
@click.option("--runs", type=int, default=None, help="Number of Monte Carlo repetitions.")
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--figure", type=click.Path(), default=None)
@click.option("--no-figure", is_flag=True, default=False)
@_guarded
def prepare_cmd(config_path, p, field_h, coupling_j, operator, spans, delta, qpe_model,
                c_qpe, r_lb_mode, r_lb_value, seed, runs, csv_path, report_path, figure, no_figure):
    """Monte Carlo repeat-until-success runs with bound checks."""
    cfg = _load_config(config_path)
    model = _model_config(cfg, p, field_h, coupling_j, operator, spans)
    engine = _engine_config(cfg, delta, qpe_model, c_qpe, r_lb_mode, r_lb_value, seed, runs)
    out_cfg = cfg.get("output", {})
    csv_path = csv_path or out_cfg.get("csv_path")
    report_path = report_path or out_cfg.get("report_path")
    config = ExperimentConfig(model, engine, OutputConfig(csv_path, report_path))
    config.validate()
    tree = model.build_tree()
    stats = run_protocol(
        tree,
        delta=engine.delta,
        model=engine.qpe(),
        n_runs=engine.n_runs,
        master_seed=engine.master_seed,
        r_lb_mode=engine.r_lb_mode,
        r_lb_value=engine.r_lb_value,
    )
    header = "model,p,delta,failure_rate,mean_N_V,mean_N_U,bound_N_V,bound_N_U,seed"
    row = ",".join(
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
    )
    if csv_path:
        write_prepare_csv(stats, csv_path)
        click.echo(f"wrote {csv_path}")
    else:
        click.echo(header)
        click.echo(row)
    if report_path:
        write_prepare_report(stats, report_path, config)
        click.echo(f"wrote {report_path}")
    fig_path = _figure_target(figure, no_figure, csv_path)
    if fig_path:
        from .plotting import render_attempts_figure

        render_attempts_figure(stats, fig_path)
        click.echo(f"wrote {fig_path}")
    checks = stats.checks()
    for name, ok in sorted(checks.items()):
        click.echo(f"check {name}: {'PASS' if ok else 'FAIL'}")
    if not all(checks.values()):
        sys.exit(1)


@main.command("figure-overlaps")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--p-max", type=int, default=None)
@click.option("--h", "field_h", type=float, default=None)
@click.option("--J", "coupling_j", type=float, default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--figure", type=click.Path(), default=None)
@click.option("--no-figure", is_flag=True, default=False)
@_guarded
def figure_overlaps(config_path, p_max, field_h, coupling_j, csv_path, figure, no_figure):
    """Naive-product vs level-minimum overlap decay data."""
    cfg = _load_config(config_path)
    mc = cfg.get("model", {})
    p_max = int(_pick(p_max, mc, "p", 4))
    h = float(_pick(field_h, mc, "h", 1.0))
    J = float(_pick(coupling_j, mc, "J", 1.0))
    csv_path = csv_path or cfg.get("output", {}).get("csv_path")
    if not 0 <= p_max <= 4:
        raise ValueError("p-max must lie in 0..4")
    ground = TreeGround(tfim_tree(p_max, h, J))
    naive = naive_overlap_curve(p_max, h, J, ground)
    layer = layer_overlap_curve(p_max, h, J, ground)
    by_p = {r.p: r for r in layer}
    lines = ["p,overlap_naive,overlap_layer_min"]
    for row in naive:
        lines.append(f"{row.p},{fmt17(row.naive_overlap)},{fmt17(by_p[row.p].min_overlap)}")
    text = "\n".join(lines) + "\n"
    if csv_path:
        write_figure_overlaps_csv(naive, layer, csv_path)
        click.echo(f"wrote {csv_path}")
    else:
        click.echo(text, nl=False)
    fig_path = _figure_target(figure, no_figure, csv_path)
    if fig_path:
        from .plotting import render_overlap_figure

        render_overlap_figure(naive, layer, fig_path)
        click.echo(f"wrote {fig_path}")
    degenerate = [r.p for r in naive if r.degenerate] + [r.p for r in layer if r.degenerate]
    if degenerate:
        click.echo(f"degenerate rows flagged at p = {sorted(set(degenerate))}", err=True)
        sys.exit(1)


@main.command("figure-gaps")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--p-max", type=int, default=None)
@click.option("--h", "field_h", type=float, default=None)
@click.option("--J", "coupling_j", type=float, default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--figure", type=click.Path(), default=None)
@click.option("--no-figure", is_flag=True, default=False)
@_guarded
def figure_gaps(config_path, p_max, field_h, coupling_j, csv_path, figure, no_figure):
    """Spectral gap vs root-coupling norm as the chain grows."""
    cfg = _load_config(config_path)
    mc = cfg.get("model", {})
    p_max = int(_pick(p_max, mc, "p", 4))
    h = float(_pick(field_h, mc, "h", 1.0))
    J = float(_pick(coupling_j, mc, "J", 1.0))
    csv_path = csv_path or cfg.get("output", {}).get("csv_path")
    if not 0 <= p_max <= 4:
        raise ValueError("p-max must lie in 0..4")
    rows = gap_interaction_curve(p_max, h, J)
    lines = ["p,gamma_root,interaction_norm_root"]
    for row in rows:
        lines.append(f"{row.p},{fmt17(row.gamma_root)},{fmt17(row.interaction_norm_root)}")
    text = "\n".join(lines) + "\n"
    if csv_path:
        write_figure_gaps_csv(rows, csv_path)
        click.echo(f"wrote {csv_path}")
    else:
        click.echo(text, nl=False)
    fig_path = _figure_target(figure, no_figure, csv_path)
    if fig_path:
        from .plotting import render_gap_figure

        render_gap_figure(rows, fig_path)
        click.echo(f"wrote {fig_path}")
    if any(r.degenerate for r in rows):
        click.echo("degenerate gaps flagged", err=True)
        sys.exit(1)


@main.command("entropy")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--p", type=int, default=None, help="Chain depth; entropy of the left half.")
@click.option("--h", "field_h", type=float, default=None)
@click.option("--J", "coupling_j", type=float, default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--figure", type=click.Path(), default=None)
@click.option("--no-figure", is_flag=True, default=False)
@_guarded
def entropy_cmd(config_path, p, field_h, coupling_j, csv_path, figure, no_figure):
    """Half-chain entanglement entropy and the overlap cap it implies."""
    from .entangle import (
        entropy,
        entropy_bits,
        max_overlap_for_entropy,
        reduced_density,
        success_cap,
    )

    cfg = _load_config(config_path)
    mc = cfg.get("model", {})
    p = int(_pick(p, mc, "p", 1))
    h = float(_pick(field_h, mc, "h", 1.0))
    J = float(_pick(coupling_j, mc, "J", 1.0))
    csv_path = csv_path or cfg.get("output", {}).get("csv_path")
    if not 1 <= p <= 4:
        raise ValueError("p must lie in 1..4 (need a proper bipartition)")
    ground = TreeGround(tfim_tree(p, h, J))
    full = ground.node(ROOT).ground
    half = ground.node("0").ground
    keep = range(ground.tree.n_qubits // 2)
    rho = reduced_density(full, keep)
    s_nats = entropy(rho)
    s_bits = entropy_bits(rho)
    dim_a = rho.dim
    cap = success_cap(full, half, keep)
    frontier = max_overlap_for_entropy(min(s_nats, float(np.log(dim_a))), dim_a)
    measured = ground.merge_overlap(ROOT) ** 2
    rows = [
        ("entropy_nats", s_nats),
        ("entropy_bits", s_bits),
        ("dim_A", float(dim_a)),
        ("success_cap_half_ground", cap),
        ("max_overlap_at_entropy", frontier),
        ("measured_product_overlap_sq", measured),
    ]
    lines = ["quantity,value"] + [f"{k},{fmt17(v)}" for k, v in rows]
    text = "\n".join(lines) + "\n"
    if csv_path:
        _emit(text, csv_path)
        click.echo(f"wrote {csv_path}")
    else:
        click.echo(text, nl=False)
    fig_path = _figure_target(figure, no_figure, csv_path)
    if fig_path:
        from .plotting import render_entropy_figure

        grid = np.linspace(0.0, float(np.log(dim_a)), 200)
        samples = [(float(e), max_overlap_for_entropy(float(e), dim_a)) for e in grid]
        render_entropy_figure(dim_a, samples, (s_nats, measured), fig_path)
        click.echo(f"wrote {fig_path}")
    ok = measured <= cap + 1e-10 and cap <= 1.0 + 1e-10
    click.echo(f"check overlap_below_cap: {'PASS' if ok else 'FAIL'}")
    if not ok:
        sys.exit(1)


@main.command("bounds-sweep")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--suites", type=str, default=None, help="Comma-separated suite names; default all.")
@click.option("--instances", type=int, default=None, help="Override per-suite instance count.")
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--figure", type=click.Path(), default=None)
@click.option("--no-figure", is_flag=True, default=False)
@_guarded
def bounds_sweep(config_path, suites, instances, csv_path, figure, no_figure):
    """Randomized verification sweeps for every implemented inequality."""
    from .bounds import run_sweeps, sweep_rows, write_sweep_csv

    cfg = _load_config(config_path)
    suites = suites if suites is not None else cfg.get("suites")
    instances = instances if instances is not None else cfg.get("instances")
    csv_path = csv_path or cfg.get("output", {}).get("csv_path")
    names = [s.strip() for s in suites.split(",")] if isinstance(suites, str) else suites
    results = run_sweeps(names, instances)
    rows = sweep_rows(results)
    if csv_path:
        write_sweep_csv(results, csv_path)
        click.echo(f"wrote {csv_path}")
    violations = 0
    for name in sorted(results):
        suite_rows = [r for r in rows if r[0] == name]
        bad = sum(1 for r in suite_rows if not r[4])
        violations += bad
        click.echo(f"suite {name}: {len(suite_rows)} instances, {bad} violations")
    fig_path = _figure_target(figure, no_figure, csv_path)
    if fig_path:
        from .plotting import render_sweep_figure

        render_sweep_figure(rows, fig_path)
        click.echo(f"wrote {fig_path}")
    if violations:
        sys.exit(1)


@main.command("jw-check")
@click.option("--n-modes", type=int, default=4)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@_guarded
def jw_check(n_modes, csv_path):
    """Canonical anticommutation and locality checks for the fermion mapping."""
    from .fermion import FermionProduct, hermitian_pair, jw_map, support_interval

    if not 1 <= n_modes <= 6:
        raise ValueError("n-modes must lie in 1..6 for the exhaustive check")
    results = []

    def op_terms(prod_pairs):
        total = None
        for factors, coeff in prod_pairs:
            mapped = jw_map(FermionProduct(factors, coeff), n_modes)
            total = mapped if total is None else total + mapped
        return total.canonical()

    car_ok = True
    for a in range(n_modes):
        for b in range(n_modes):
            anti = op_terms([(((a, False), (b, True)), 1.0), (((b, True), (a, False)), 1.0)])
            want_identity = 1.0 if a == b else 0.0
            terms = {t.factors: t.coeff for t in anti.terms}
            extra = [f for f in terms if f != ()]
            ident = terms.get((), 0.0)
            if extra or abs(ident - want_identity) > 1e-12:
                car_ok = False
            ann = op_terms([(((a, False), (b, False)), 1.0), (((b, False), (a, False)), 1.0)])
            cre = op_terms([(((a, True), (b, True)), 1.0), (((b, True), (a, True)), 1.0)])
            if ann.terms or cre.terms:
                car_ok = False
    results.append(("anticommutation", f"all pairs over {n_modes} modes", car_ok))

    loc_ok = True
    for a in range(n_modes):
        for b in range(n_modes):
            interval = support_interval(hermitian_pair(a, b, 1.0, n_modes))
            if interval != (min(a, b), max(a, b)):
                loc_ok = False
    results.append(("one-body-support", "interval = [min(p,q), max(p,q)]", loc_ok))

    num_ok = True
    for a in range(n_modes):
        num = jw_map(FermionProduct(((a, True), (a, False)), 1.0), n_modes)
        terms = {t.factors: t.coeff for t in num.terms}
        expect = {(): 0.5, ((a, "Z"),): 0.5}
        if set(terms) != set(expect) or any(abs(terms[k] - expect[k]) > 1e-12 for k in expect):
            num_ok = False
    results.append(("number-operator", "maps to (1 + Z)/2", num_ok))

    lines = ["check,detail,ok"] + [f"{n},{d},{int(ok)}" for n, d, ok in results]
    if csv_path:
        _emit("\n".join(lines) + "\n", csv_path)
        click.echo(f"wrote {csv_path}")
    for name, detail, ok in results:
        click.echo(f"check {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    if not all(ok for _, _, ok in results):
        sys.exit(1)


if __name__ == "__main__":
    main()
