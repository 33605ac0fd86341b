"""Command-line experiment runner.

Each subcommand is a pure function of its configuration (defaults, then an
optional JSON config file, then explicit flags) and writes plot-ready CSV or
JSON. The first line of every CSV file echoes the resolved configuration.

    bitovernet degree-dist --n 1000 --seeds 100 --out fig3.csv
    bitovernet diameter-sweep --ns 100,1000,10000 --seeds 100
    bitovernet propagate --n 1000 --out fig5.csv
    bitovernet fork --n 1000 --trials 10000
    bitovernet calibrate --thresholds 0.01,0.05,0.1
    bitovernet equilibrium --profits 0,1e5,1e6 --roundtrip-n 1000
    bitovernet ingest --input arrivals.csv
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from bitovernet import __version__
from bitovernet.analytic import (
    ModelParams,
    degree_pmf,
    diameter_analytic,
    diameter_simplified,
    diameter_simplified_m,
)
from bitovernet.equilibrium import EconParams, equilibrium_size, lhs_eq13, max_miners_bound
from bitovernet.errors import BitOverNetError, DegenerateModelError, DomainError, ParameterError
from bitovernet.fitting import fit_power_law, loglik, total_variation
from bitovernet.forking import (
    ForkParams,
    fork_probability_bounds,
    lambda_mine,
    min_difficulty,
    simulate_forking,
)
from bitovernet.graph import (
    EXACT_DIAMETER_LIMIT,
    DegreeHistogram,
    eccentricities,
    gen_evolutionary_random,
    in_degree_histogram,
    measure_diameter,
)
from bitovernet.ingest import (
    classify_centrality,
    compare_to_model,
    estimate_shd,
    parse_arrival_log,
)
from bitovernet.propagation import (
    convergence_diameter,
    convergence_radius,
    cumulative_arrivals,
    simulate_propagation,
)

COMMON_DEFAULTS = {
    "m": 8,
    "seed": 1,
    "seeds": 1,
    "shd_ms": 2000.0,
    "out": "-",
    "format": "csv",
    "workers": 1,
    "variant": "fixed-m",
}

DEFAULTS = {
    "degree-dist": {"n": 1000, "seeds": 100},
    "diameter-sweep": {"n": None, "ns": [100, 1000, 10000], "ms": None, "seeds": 100,
                       "diameter_mode": "auto", "sources": 64},
    "propagate": {"n": 1000},
    "fork": {"n": 1000, "lambdas": None, "lambda_shd": [1e-5, 1e-4, 1e-3, 1e-2], "trials": 10_000},
    "calibrate": {"n": 1000, "speed": 1.0, "thresholds": [0.01, 0.05, 0.1], "hops": "ceil"},
    "equilibrium": {"n": 1000, "profits": [0.0, 1e5, 1e6, 1e7, 1e8], "c": 1.0, "threshold": 0.05,
                    "speed": 1.0, "roundtrip_n": None},
    "ingest": {"n": 10_000, "input": None, "input_format": "canonical", "cutoff": 0.10},
}

# keys that do not change what gets computed, so they stay out of the echo
NOT_ECHOED = ("out", "workers", "config")


def derive_seeds(master: int, count: int) -> list[int]:
    """Independent per-replicate seeds spawned from the master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master).spawn(count)]


def _pmap(fn, items, workers: int) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- output -------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return None if math.isnan(v) or math.isinf(v) else float(v)
    return v


def _echo(command: str, cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in NOT_ECHOED}


def render_csv(command: str, cfg: dict, columns, rows, summary: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# bitovernet {__version__} {command} {json.dumps(_jsonable(_echo(command, cfg)), sort_keys=True)}\n")
    if summary:
        buf.write(f"# summary {json.dumps(_jsonable(summary), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def render_json(command: str, cfg: dict, payload: dict) -> str:
    doc = {"meta": {"tool": "bitovernet", "version": __version__, "command": command,
                    "config": _echo(command, cfg)}}
    doc.update(payload)
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def emit(command: str, cfg: dict, columns, rows, summary=None, extra: dict | None = None) -> None:
    if cfg["format"] == "json":
        payload = {"columns": list(columns), "rows": rows}
        if summary:
            payload["summary"] = summary
        if extra:
            payload.update(extra)
        _write(cfg["out"], render_json(command, cfg, payload))
    else:
        _write(cfg["out"], render_csv(command, cfg, columns, rows, summary))


def _sibling(out: str, tag: str) -> str | None:
    if out == "-":
        return None
    p = Path(out)
    return str(p.with_name(f"{p.stem}.{tag}{p.suffix or '.csv'}"))


# --- workers (module level so they pickle) ----------------------------------------

def _histogram_job(args):
    n, m, seed, variant = args
    return in_degree_histogram(gen_evolutionary_random(n, m, seed, variant))


def _diameter_job(args):
    n, m, seed, variant, mode, sources = args
    g = gen_evolutionary_random(n, m, seed, variant)
    return measure_diameter(g, mode=mode, sources=sources, seed=seed)


# --- commands -----------------------------------------------------------------------

def cmd_degree_dist(cfg: dict) -> None:
    n, m = cfg["n"], cfg["m"]
    seeds = derive_seeds(cfg["seed"], cfg["seeds"])
    hists = _pmap(_histogram_job, [(n, m, s, cfg["variant"]) for s in seeds], cfg["workers"])
    pooled = DegreeHistogram.pooled(hists)
    pmf = degree_pmf(ModelParams(n, m)).probabilities
    samples = np.repeat(list(pooled.counts), list(pooled.counts.values()))
    pl = fit_power_law(samples)
    emp = pooled.fractions()
    k_top = max(pooled.k_max, int(np.flatnonzero(pmf >= 1e-12).max()))
    ks = np.arange(k_top + 1)
    pl_pmf = pl.pmf(ks)
    rows = [{"k": int(k), "empirical": float(emp[k]) if k < emp.size else 0.0,
             "model": float(pmf[k]) if k < pmf.size else 0.0, "powerlaw": float(pl_pmf[k])}
            for k in ks.tolist()]
    summary = {
        "graphs": len(seeds),
        "tv_distance": total_variation(emp, pmf),
        "loglik_model": loglik(samples, pmf),
        "loglik_powerlaw": pl.loglik,
        "powerlaw_alpha": pl.alpha,
    }
    emit("degree-dist", cfg, ["k", "empirical", "model", "powerlaw"], rows, summary)


def _safe(fn, *args):
    try:
        return fn(*args)
    except (DomainError, DegenerateModelError):
        return math.nan


def cmd_diameter_sweep(cfg: dict) -> None:
    ns = [cfg["n"]] if cfg.get("n") else cfg["ns"]
    ms = cfg["ms"] or [cfg["m"]]
    mode = cfg["diameter_mode"]
    seeds = derive_seeds(cfg["seed"], cfg["seeds"])
    rows = []
    for n in ns:
        if mode == "exact" and n > EXACT_DIAMETER_LIMIT:
            print(f"warning: exact diameter at n={n} runs one BFS per node; expect a long run",
                  file=sys.stderr)
        for m in ms:
            jobs = [(n, m, s, cfg["variant"], mode, cfg["sources"]) for s in seeds]
            found = _pmap(_diameter_job, jobs, cfg["workers"])
            d = np.array([f.value for f in found], dtype=np.float64)
            rows.append({
                "n": n, "m": m, "seeds": len(seeds),
                "mean_diameter": float(d.mean()), "std_diameter": float(d.std()),
                "min_diameter": int(d.min()), "max_diameter": int(d.max()),
                "exact": all(f.exact for f in found),
                "eq2_analytic": _safe(diameter_analytic, ModelParams(n, m)) if n > 2 * m else math.nan,
                "eq3_simplified": diameter_simplified(n),
                "eq4_simplified_m": diameter_simplified_m(n, m),
            })
    columns = ["n", "m", "seeds", "mean_diameter", "std_diameter", "min_diameter", "max_diameter",
               "exact", "eq2_analytic", "eq3_simplified", "eq4_simplified_m"]
    emit("diameter-sweep", cfg, columns, rows)


def pick_sources(g, seed) -> dict[str, int]:
    """Minimum- and maximum-eccentricity miners (ties: highest degree, then lowest id) and a random one."""
    ecc = eccentricities(g)
    deg = g.degree()
    order_center = np.lexsort((np.arange(g.n), -deg, ecc))
    order_edge = np.lexsort((np.arange(g.n), deg, -ecc))
    rng = np.random.default_rng(seed)
    return {"center": int(order_center[0]), "periphery": int(order_edge[0]),
            "random": int(rng.integers(g.n))}


def cmd_propagate(cfg: dict) -> None:
    n, m, shd = cfg["n"], cfg["m"], float(cfg["shd_ms"])
    seed = derive_seeds(cfg["seed"], 1)[0]
    g = gen_evolutionary_random(n, m, seed, cfg["variant"])
    params = ModelParams(n, m)
    sources = pick_sources(g, seed)
    rows, traces = [], {}
    for kind, src in sources.items():
        trace = simulate_propagation(g, src, shd)
        traces[kind] = trace
        for t, reached in cumulative_arrivals(trace):
            rows.append({
                "source_kind": kind, "source": src, "eccentricity": trace.max_hop,
                "time_ms": t, "nodes_reached": reached,
                "conver_radius_ms": _safe(convergence_radius, reached, params, shd),
                "conver_diameter_ms": _safe(convergence_diameter, reached, params, shd)
                if reached > 2 * m else math.nan,
            })
    columns = ["source_kind", "source", "eccentricity", "time_ms", "nodes_reached",
               "conver_radius_ms", "conver_diameter_ms"]
    if cfg["format"] == "json":
        extra = {"traces": {k: {"source": t.source, "hops": t.hops.tolist()} for k, t in traces.items()}}
        emit("propagate", cfg, columns, rows, extra=extra)
        return
    emit("propagate", cfg, columns, rows)
    for kind, trace in traces.items():
        path = _sibling(cfg["out"], f"trace-{kind}")
        if path is None:
            continue
        buf = io.StringIO()
        trace.to_csv(buf)
        header = f"# bitovernet {__version__} propagate {json.dumps(_jsonable(_echo('propagate', cfg)), sort_keys=True)}\n"
        _write(path, header + buf.getvalue())


def cmd_fork(cfg: dict) -> None:
    n, m, shd = cfg["n"], cfg["m"], float(cfg["shd_ms"])
    graph_seed, mc_seed = derive_seeds(cfg["seed"], 2)
    g = gen_evolutionary_random(n, m, graph_seed, cfg["variant"])
    params = ModelParams(n, m)
    lambdas = cfg["lambdas"] or [x / shd for x in cfg["lambda_shd"]]
    rows, inside = [], 0
    for lam in lambdas:
        est = fork_probability_bounds(ForkParams(params, shd, lam))
        mc = simulate_forking(g, shd, lam, cfg["trials"], mc_seed)
        ok = est.lower - 3 * mc.standard_error <= mc.probability <= est.upper + 3 * mc.standard_error
        inside += ok
        rows.append({"lambda_mine": lam, "shd_ms": shd, "lower": est.lower, "upper": est.upper,
                     "mc_estimate": mc.probability, "mc_se": mc.standard_error, "trials": mc.trials})
    columns = ["lambda_mine", "shd_ms", "lower", "upper", "mc_estimate", "mc_se", "trials"]
    emit("fork", cfg, columns, rows, summary={"mc_within_bounds_3se": inside, "points": len(rows)})


def cmd_calibrate(cfg: dict) -> None:
    n, m, shd, speed = cfg["n"], cfg["m"], float(cfg["shd_ms"]), float(cfg["speed"])
    params = ModelParams(n, m)
    rows = []
    for t in cfg["thresholds"]:
        fp = ForkParams(params, shd, 0.0, t)
        diff = min_difficulty(speed, fp, hops=cfg["hops"])
        lam = lambda_mine(speed, diff)
        est = fork_probability_bounds(ForkParams(params, shd, lam, t))
        rows.append({"threshold": t, "min_difficulty": diff, "lambda_mine": lam,
                     "lower": est.lower, "upper": est.upper, "upper_within_threshold": est.upper <= t + 1e-9})
    columns = ["threshold", "min_difficulty", "lambda_mine", "lower", "upper", "upper_within_threshold"]
    emit("calibrate", cfg, columns, rows)


def cmd_equilibrium(cfg: dict) -> None:
    m, c, t = cfg["m"], float(cfg["c"]), float(cfg["threshold"])
    profits = [float(p) for p in cfg["profits"]]
    if cfg.get("roundtrip_n"):
        profits.append(lhs_eq13(float(cfg["roundtrip_n"]), m) * c / -math.log1p(-t))
    params = ModelParams(cfg["n"], m)
    rows, reports = [], []
    for profit in profits:
        ec = EconParams(profit, c, t, m, float(cfg["shd_ms"]), float(cfg["speed"]))
        bound = max_miners_bound(ec, params)
        row = {"profit_mining": profit, "target": ec.target, "eq11_rhs": bound.rhs,
               "eq11_feasible": bound.feasible}
        try:
            res = equilibrium_size(ec)
        except DomainError as exc:
            row.update(n_star=math.nan, n_floor=None, residual=math.nan, iterations=0, status="no equilibrium")
            reports.append({"inputs": {"profit_mining": profit, "c": c, "threshold": t, "m": m},
                            "status": "no equilibrium", "reason": str(exc)})
        else:
            row.update(n_star=res.n_star, n_floor=res.n_floor, residual=res.residual,
                       iterations=res.iterations, status="ok")
            reports.append({**res.report(), "status": "ok"})
        rows.append(row)
    columns = ["profit_mining", "target", "n_star", "n_floor", "residual", "iterations", "status",
               "eq11_rhs", "eq11_feasible"]
    emit("equilibrium", cfg, columns, rows, extra={"reports": reports})


def cmd_ingest(cfg: dict) -> None:
    if not cfg.get("input"):
        raise ParameterError("ingest needs --input")
    with open(cfg["input"], encoding="utf-8", newline="") as fh:
        logs = parse_arrival_log(fh, cfg["input_format"])
    params = ModelParams(cfg["n"], cfg["m"])
    rows = []
    for log in logs:
        try:
            est = estimate_shd(log)
            shd, conf, how = est.shd_ms, est.confidence, "estimated"
        except ParameterError:
            shd, conf, how = float(cfg["shd_ms"]), math.nan, "default"
        cen = classify_centrality(log, shd, cfg["cutoff"])
        fit = compare_to_model(log, params, shd)
        rows.append({
            "block_hash": log.block_hash, "arrivals": len(log), "epoch_based": log.epoch_based,
            "shd_ms": shd, "shd_confidence": conf, "shd_source": how,
            "centrality": cen.label, "first_hop_fraction": cen.first_hop_fraction,
            "fraction_below_diameter": fit.fraction_below_diameter, "fraction_in_band": fit.fraction_in_band,
        })
    columns = ["block_hash", "arrivals", "epoch_based", "shd_ms", "shd_confidence", "shd_source",
               "centrality", "first_hop_fraction", "fraction_below_diameter", "fraction_in_band"]
    emit("ingest", cfg, columns, rows)


COMMANDS = {
    "degree-dist": cmd_degree_dist,
    "diameter-sweep": cmd_diameter_sweep,
    "propagate": cmd_propagate,
    "fork": cmd_fork,
    "calibrate": cmd_calibrate,
    "equilibrium": cmd_equilibrium,
    "ingest": cmd_ingest,
}


# --- argument handling ----------------------------------------------------------------

def _ints(text: str) -> list[int]:
    return [int(float(x)) for x in text.split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file mirroring the flags; flags win")
    common.add_argument("--n", type=int, help="network size (miners)")
    common.add_argument("--m", type=int, help="outgoing connections per miner (default 8)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--seeds", type=int, help="number of simulated graphs")
    common.add_argument("--shd-ms", type=float, help="single-hop delay in ms (default 2000)")
    common.add_argument("--out", help="output file, '-' for stdout")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--workers", type=int, help="worker processes for independent replicates")
    common.add_argument("--variant", choices=("fixed-m", "bernoulli"))

    parser = argparse.ArgumentParser(prog="bitovernet", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"bitovernet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("degree-dist", parents=[common], argument_default=argparse.SUPPRESS,
                   help="in-degree histogram vs model pmf and fitted power law")

    p = sub.add_parser("diameter-sweep", parents=[common], argument_default=argparse.SUPPRESS,
                       help="measured vs predicted diameter over n and m")
    p.add_argument("--ns", type=_ints, help="comma-separated sizes")
    p.add_argument("--ms", type=_ints, help="comma-separated m values")
    p.add_argument("--diameter-mode", choices=("auto", "exact", "sampled"))
    p.add_argument("--sources", type=int, help="BFS sources in sampled mode")

    sub.add_parser("propagate", parents=[common], argument_default=argparse.SUPPRESS,
                   help="block propagation traces and convergence envelopes")

    p = sub.add_parser("fork", parents=[common], argument_default=argparse.SUPPRESS,
                       help="fork probability bounds vs Monte Carlo")
    p.add_argument("--lambdas", type=_floats, help="per-miner block rates per ms")
    p.add_argument("--lambda-shd", type=_floats, help="grid of lambda*shd products (used without --lambdas)")
    p.add_argument("--trials", type=int)

    p = sub.add_parser("calibrate", parents=[common], argument_default=argparse.SUPPRESS,
                       help="minimum mining difficulty for fork thresholds")
    p.add_argument("--speed", type=float, help="computational speed per miner")
    p.add_argument("--thresholds", type=_floats)
    p.add_argument("--hops", choices=("ceil", "floor"))

    p = sub.add_parser("equilibrium", parents=[common], argument_default=argparse.SUPPRESS,
                       help="equilibrium network size over a profit grid")
    p.add_argument("--profits", type=_floats)
    p.add_argument("--c", type=float, help="cost constant")
    p.add_argument("--threshold", type=float)
    p.add_argument("--speed", type=float)
    p.add_argument("--roundtrip-n", type=float, help="append the profit whose equilibrium is this n")

    p = sub.add_parser("ingest", parents=[common], argument_default=argparse.SUPPRESS,
                       help="analyse block arrival logs")
    p.add_argument("--input")
    p.add_argument("--input-format")
    p.add_argument("--cutoff", type=float, help="first-hop fraction separating high/low centrality")
    return parser


def resolve_config(command: str, flags: dict) -> dict:
    cfg = dict(COMMON_DEFAULTS)
    cfg.update(DEFAULTS[command])
    if flags.get("config"):
        with open(flags["config"], encoding="utf-8") as fh:
            loaded = json.load(fh)
        cfg.update({k.replace("-", "_"): v for k, v in loaded.items()})
    cfg.update({k: v for k, v in flags.items() if k != "config"})
    unknown = set(cfg) - set(COMMON_DEFAULTS) - set(DEFAULTS[command])
    if unknown:
        raise ParameterError(f"unknown config keys for {command}: {sorted(unknown)}")
    return cfg


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")

    def _show(message, category, filename, lineno, file=None, line=None):
        print(f"bitovernet {command}: warning: {message}", file=sys.stderr)

    previous = warnings.showwarning
    warnings.showwarning = _show
    try:
        cfg = resolve_config(command, args)
        COMMANDS[command](cfg)
    except BitOverNetError as exc:
        print(f"bitovernet {command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"bitovernet {command}: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"bitovernet {command}: bad config file: {exc}", file=sys.stderr)
        return 2
    finally:
        warnings.showwarning = previous
    return 0


if __name__ == "__main__":
    sys.exit(main())
