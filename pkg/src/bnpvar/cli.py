"""Command-line entry point: simulate | fit | diagnose | network | forecast.

Exit codes: 0 on success, 1 for usage or input errors, 2 for numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, network, plotting, store
from .config import RunConfig, parse_hyper_value, parse_pairs
from .evaluation import (
    ForecastConfig,
    relative_table,
    rolling_forecast,
    write_metric_csv,
    write_relative_csv,
)
from .sampler import NumericalError, blasso_baseline, run_chain
from .var import CoefficientLayout, DgpConfig, read_csv, simulate_var, write_csv, write_matrix

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_text(path: Path, text: str) -> None:
    with store.atomic_path(path) as tmp, open(tmp, "w") as fh:
        fh.write(text)


# --- simulate -------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = DgpConfig(
        kind=args.kind,
        dimension=args.m,
        block_size=args.block_size,
        nonzero_count=args.nonzeros,
        coefficient_range=(-args.range, args.range),
        horizon=args.t,
        burn_in=args.burn,
    )
    rng = np.random.default_rng(args.seed)
    data, coef = simulate_var(cfg, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with store.atomic_path(out / "data.csv") as tmp:
        write_csv(tmp, data)
    with store.atomic_path(out / "true_coef.csv") as tmp:
        write_matrix(tmp, coef)
    meta = {
        "kind": cfg.kind,
        "m": cfg.dimension,
        "t": cfg.horizon,
        "seed": args.seed,
        "block_size": cfg.block_size if cfg.kind == "block" else "",
        "nonzeros": int(np.count_nonzero(coef)),
        "coefficient_range": f"{-args.range!r},{args.range!r}",
        "burn_in": cfg.burn_in,
    }
    _write_text(out / "true_meta.txt", "".join(f"{k} = {v}\n" for k, v in meta.items()))
    print(f"wrote {out / 'data.csv'} ({cfg.horizon} x {cfg.dimension}), {meta['nonzeros']} nonzero coefficients")
    return EXIT_OK


# --- fit ------------------------------------------------------------------


def _overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        out[k] = v
    return out


def build_fit_config(args) -> RunConfig:
    mapping = parse_pairs(Path(args.config).read_text()) if args.config else {}
    if args.data:
        mapping["data"] = args.data
    if mapping.get("data") in (None, "none"):
        raise UsageError("fit needs --data or a config with a data key")
    flag_keys = {
        "units": args.units,
        "vars_per_unit": args.vars,
        "lags": args.lags,
        "blocks": args.blocks,
        "iterations": args.iterations,
        "burn_in": args.burnin,
        "thin": args.thin,
        "seed": args.seed,
    }
    for k, v in flag_keys.items():
        if v is not None:
            mapping[k] = str(v)
    for k, v in _overrides(args.set).items():
        parse_hyper_value(k, v)
        mapping[k] = v
    mapping["output"] = args.out
    if args.model != "bnp" or "opt.model" in mapping:
        mapping["opt.model"] = args.model
    if "vars_per_unit" not in mapping:
        data = read_csv(mapping["data"])
        units = int(mapping.get("units", "1"))
        if data.values.shape[1] % units:
            raise UsageError("number of columns is not a multiple of --units")
        mapping["vars_per_unit"] = str(data.values.shape[1] // units)
    return RunConfig.from_mapping(mapping)


def _fit_one(task):
    values, spec, hyper, blocks, model, seed, out_dir = task
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    run = run_chain if model == "bnp" else blasso_baseline
    res = run(values, spec, hyper, rng, blocks=blocks)
    elapsed = time.perf_counter() - start
    store.write_draws(out_dir, res, CoefficientLayout(spec, blocks))
    return elapsed, res.acceptance


def cmd_fit(args) -> int:
    cfg = build_fit_config(args)
    data = read_csv(cfg.data)
    spec = cfg.spec
    if data.values.shape[1] != spec.n_series:
        raise UsageError(
            f"data has {data.values.shape[1]} columns but the panel spec implies {spec.n_series}"
        )
    if data.length <= spec.lags + 1:
        raise UsageError("not enough observations for the lag order")
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    model = cfg.options.get("model", "bnp")
    children = np.random.SeedSequence(cfg.hyper.seed).spawn(args.chains)
    dirs = [out] if args.chains == 1 else [out / f"chain{c + 1}" for c in range(args.chains)]
    tasks = [(data.values, spec, cfg.hyper, cfg.block_partition(), model, s, d) for s, d in zip(children, dirs)]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_fit_one, tasks))
    else:
        results = [_fit_one(t) for t in tasks]
    labels = ",".join(data.labels)
    for d, (elapsed, acc) in zip(dirs, results):
        extra = {"labels": labels, "wall_time_seconds": f"{elapsed:.3f}", "retained_draws": cfg.hyper.retained}
        extra.update({(k if k.startswith("step_") else f"acceptance_{k}"): f"{v:.4g}" for k, v in acc.items()})
        _write_text(d / store.MANIFEST, cfg.to_text(extra))
        print(f"{d / store.DRAWS}: {cfg.hyper.retained} draws in {elapsed:.1f}s")
    return EXIT_OK


def _load_run(path) -> tuple[RunConfig, list[str], Path]:
    run = store.resolve_run(path)
    manifest = run / store.MANIFEST
    if not manifest.exists():
        raise UsageError(f"{run}: no {store.MANIFEST}; cannot recover the panel layout")
    text = manifest.read_text()
    cfg = RunConfig.from_text(text)
    labels = []
    for line in text.splitlines():
        if line.startswith("# labels = "):
            labels = line[len("# labels = ") :].split(",")
    if len(labels) != cfg.spec.n_series:
        labels = [f"y{k + 1}" for k in range(cfg.spec.n_series)]
    return cfg, labels, run


# --- diagnose ---------------------------------------------------------------


def cmd_diagnose(args) -> int:
    path = Path(args.draws)
    if path.is_file():
        with open(path, newline="") as fh:
            if sum(1 for row in csv.reader(fh) if row) < 2:
                raise UsageError(f"{path}: empty draws file")
    series = store.read_trace(path)
    if series.size < 200:
        raise UsageError(f"{path}: {series.size} post-burn-in values; diagnostics need at least 200")
    rep = diagnostics.report(series, thin_by=args.thin, acf_lag=args.acf_lag)
    out = Path(args.out) if args.out else store.resolve_run(path)
    out.mkdir(parents=True, exist_ok=True)
    with store.atomic_path(out / "diagnostics.txt") as tmp:
        diagnostics.write_report(tmp, rep)
    with store.atomic_path(out / "diagnostics.csv") as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "before_thinning", "after_thinning"])
        w.writerow(["n", rep["n"], rep["n_thinned"]])
        w.writerow(["geweke_cd", f"{rep['geweke_cd']:.6g}", ""])
        w.writerow(["ks_pvalue", f"{rep['ks_pvalue']:.6g}", ""])
        w.writerow(["ineff", f"{rep['ineff_before']:.6g}", f"{rep['ineff_after']:.6g}"])
        w.writerow([f"acf{args.acf_lag}", f"{rep['acf10_before']:.6g}", f"{rep['acf10_after']:.6g}"])
    plotting.trace_figure(out / "trace.png", series, thin_by=args.thin)
    print(
        f"CD={rep['geweke_cd']:.3f} KS p={rep['ks_pvalue']:.3f} "
        f"INEFF {rep['ineff_before']:.2f} -> {rep['ineff_after']:.2f} "
        f"ACF({args.acf_lag}) {rep['acf10_before']:.3f} -> {rep['acf10_after']:.3f}"
    )
    return EXIT_OK


# --- network ----------------------------------------------------------------


def cmd_network(args) -> int:
    cfg, labels, run = _load_run(args.draws)
    layout = CoefficientLayout(cfg.spec, cfg.block_partition())
    records = store.read_draws(Path(args.draws), layout)
    archive = network.DrawArchive.from_records(records, layout)
    lags = [args.lag] if args.lag else list(range(1, cfg.spec.lags + 1))
    if any(not 1 <= l <= cfg.spec.lags for l in lags):
        raise UsageError(f"lag must lie in 1..{cfg.spec.lags}")
    out = Path(args.out) if args.out else run / "network"
    out.mkdir(parents=True, exist_ok=True)
    prob = network.inclusion_probability(archive.xi)
    nets = []
    stats_rows = []
    adjacency = {lag: network.map_adjacency(archive, layout, lag, args.threshold) for lag in lags}
    shared = network.pooled_clustering(archive, layout, adjacency) if args.pooled else {}
    for lag in lags:
        adj = adjacency[lag]
        chosen, weights = shared.get(lag, (None, None))
        if chosen is not None and chosen.size == 0:
            chosen = weights = None
        net = network.color_network(archive, layout, lag, adj, labels, chosen, weights)
        nets.append(net)
        with store.atomic_path(out / f"lag{lag}.dot") as tmp:
            network.write_dot(tmp, net)
        with store.atomic_path(out / f"lag{lag}.graphml") as tmp:
            network.write_graphml(tmp, net)
        stats_rows.append((net, [("all", network.network_stats(net.adjacency))] + [
            (f"cluster{k}", network.network_stats(net.adjacency, net.labels, k))
            for k in range(1, net.cluster_count + 1)
        ]))
        cent = network.eigenvector_centrality(net.adjacency) if net.adjacency.any() else np.zeros(len(labels))
        plotting.network_figure(out / f"lag{lag}_network.png", net, cent)
        plotting.degree_figure(out / f"lag{lag}_degrees.png", net)
        plotting.inclusion_figure(out / f"lag{lag}_inclusion.png", prob[layout.lag_index(lag)], labels, lag)
    with store.atomic_path(out / "edges.csv") as tmp:
        network.write_edge_csv(tmp, nets)
    with store.atomic_path(out / "stats.csv") as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lag", "layer", "weight", "links", "avg_degree", "density", "avg_path_length"])
        for net, rows in stats_rows:
            for k, (name, st) in enumerate(rows):
                weight = "" if k == 0 else repr(float(net.cluster_weights[k - 1]))
                w.writerow([net.lag, name, weight, st.links, repr(st.avg_degree), repr(st.density),
                            repr(st.avg_path_length)])
    with store.atomic_path(out / "degrees.csv") as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lag", "node", "direction", "total", "cluster", "count"])
        for net in nets:
            for node, name in enumerate(net.node_labels):
                (o, ok), (i, ik) = network.degree_decomposition(net, node)
                for direction, tot, parts in (("out", o, ok), ("in", i, ik)):
                    w.writerow([net.lag, name, direction, tot, "all", tot])
                    for k, c in enumerate(parts, 1):
                        w.writerow([net.lag, name, direction, tot, k, int(c)])
    with store.atomic_path(out / "centrality.csv") as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lag", "layer", "node", "centrality"])
        for net in nets:
            layers = [("all", None)] + [(f"cluster{k}", k) for k in range(1, net.cluster_count + 1)]
            for name, k in layers:
                a = network._layer(net.adjacency, net.labels, k)
                c = network.eigenvector_centrality(a) if a.any() else np.zeros(len(labels))
                for node, v in zip(net.node_labels, c):
                    w.writerow([net.lag, name, node, repr(float(v))])
    total = sum(int(n.adjacency.sum()) for n in nets)
    loops = sum(int(np.trace(n.adjacency)) for n in nets)
    print(f"{out}: {total} edges ({loops} self-loops) over {len(nets)} lag(s) at threshold {args.threshold}")
    return EXIT_OK


# --- forecast ---------------------------------------------------------------


def cmd_forecast(args) -> int:
    data = read_csv(args.data)
    units = args.units
    if data.values.shape[1] % units:
        raise UsageError("number of columns is not a multiple of --units")
    mapping = {
        "units": str(units),
        "vars_per_unit": str(args.vars or data.values.shape[1] // units),
        "lags": str(args.lags),
        "seed": str(args.seed),
        "iterations": str(args.iterations),
        "burn_in": str(args.burnin),
        "thin": str(args.thin),
    }
    mapping.update(_overrides(args.set))
    cfg = RunConfig.from_mapping(mapping)
    if data.values.shape[1] != cfg.spec.n_series:
        raise UsageError("data columns do not match the panel spec")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    names = [args.model] + ([args.baseline] if args.baseline not in ("none", args.model) else [])
    for name in names:
        fc = ForecastConfig(
            window=args.window, span=args.span, step=args.step, iterations=args.iterations,
            burn_in=args.burnin, thin=args.thin, draws=args.draws, model=name, jobs=args.jobs,
        )
        reports[name] = rolling_forecast(data.values, cfg.spec, cfg.hyper, fc, args.seed, labels=data.labels)
        with store.atomic_path(out / f"metrics_{name}.csv") as tmp:
            write_metric_csv(tmp, reports[name])
    main = reports[args.model]
    base = None
    if args.baseline != "none":
        base = reports.get(args.baseline, main)
        with store.atomic_path(out / "relative.csv") as tmp:
            write_relative_csv(tmp, relative_table(main, base), args.model, args.baseline)
    plotting.forecast_figure(
        out / "forecast.png", main.labels, main.rmse, main.lps,
        None if base is None or base is main else base.rmse,
        None if base is None or base is main else base.lps,
        (args.model, args.baseline),
    )
    print(f"{main.n_origins} origins: RMSE {main.rmse_all:.4f}, joint LPS {main.lps_joint:.4f}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bnpvar", description="Sparse Dirichlet-process Lasso VAR toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a stationary VAR(1)")
    s.add_argument("--kind", choices=("block", "random"), default="block")
    s.add_argument("--m", type=int, default=20)
    s.add_argument("--t", type=int, default=100)
    s.add_argument("--block-size", type=int, default=4)
    s.add_argument("--nonzeros", type=int, default=150)
    s.add_argument("--range", type=float, default=1.4, help="coefficients ~ U(-range, range)")
    s.add_argument("--burn", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="run the Gibbs sampler")
    f.add_argument("--data")
    f.add_argument("--config", help="key = value file; flags override it")
    f.add_argument("--units", type=int)
    f.add_argument("--vars", type=int, help="variables per unit (default: columns / units)")
    f.add_argument("--lags", type=int)
    f.add_argument("--blocks", choices=("lag", "single"))
    f.add_argument("--iterations", type=int)
    f.add_argument("--burnin", type=int)
    f.add_argument("--thin", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--model", choices=("bnp", "blasso"), default="bnp")
    f.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a hyperparameter")
    f.add_argument("--chains", type=int, default=1)
    f.add_argument("--jobs", type=int, default=1)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("diagnose", help="convergence report for the lambda L2-norm series")
    d.add_argument("draws", help="run directory or its draws.csv")
    d.add_argument("--thin", type=int, default=5)
    d.add_argument("--acf-lag", type=int, default=10)
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    n = sub.add_parser("network", help="coloured Granger networks from a fitted run")
    n.add_argument("draws", help="run directory or its draws.csv")
    n.add_argument("--threshold", type=float, default=0.5)
    n.add_argument("--lag", type=int)
    n.add_argument("--pooled", action="store_true", help="one clustering shared by all lags")
    n.add_argument("--out")
    n.set_defaults(func=cmd_network)

    r = sub.add_parser("forecast", help="rolling one-step forecast evaluation")
    r.add_argument("--data", required=True)
    r.add_argument("--units", type=int, default=1)
    r.add_argument("--vars", type=int)
    r.add_argument("--lags", type=int, default=1)
    r.add_argument("--window", type=int, required=True)
    r.add_argument("--span", type=int)
    r.add_argument("--step", type=int, default=1)
    r.add_argument("--iterations", type=int, default=1500)
    r.add_argument("--burnin", type=int, default=300)
    r.add_argument("--thin", type=int, default=1)
    r.add_argument("--draws", type=int, default=1200, help="retained draws per predictive")
    r.add_argument("--model", choices=("bnp", "blasso"), default="bnp")
    r.add_argument("--baseline", choices=("bnp", "blasso", "none"), default="blasso")
    r.add_argument("--set", action="append", metavar="KEY=VALUE")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_forecast)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("chains", "jobs"):
        if getattr(args, name, 1) < 1:
            parser.error(f"--{name} must be >= 1")
    try:
        return args.func(args)
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"bnpvar: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"bnpvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
