"""Acceptance criteria at their stated sizes and tolerances.

Each test tags itself with its criterion number; the terminal summary prints
one PASS/FAIL line per criterion. Run alone with ``pytest -m acceptance``.
"""

import io
import math
import time

import numpy as np
import pytest

from bitovernet.analytic import ModelParams, degree_pmf, diameter_analytic, diameter_simplified, diameter_simplified_m
from bitovernet.cli import derive_seeds, main
from bitovernet.equilibrium import EconParams, equilibrium_size, lhs_eq13
from bitovernet.fitting import fit_power_law, loglik, total_variation
from bitovernet.forking import ForkParams, fork_probability_bounds, lambda_mine, min_difficulty, simulate_forking
from bitovernet.graph import DegreeHistogram, diameter, eccentricities, gen_evolutionary_random, in_degree_histogram
from bitovernet.ingest import ArrivalLog, estimate_shd
from bitovernet.propagation import convergence_diameter, simulate_propagation

pytestmark = pytest.mark.acceptance

MASTER_SEED = 1
SEEDS = 100
SHD = 2000.0


def criterion(record_property, label):
    record_property("criterion", label)


def report(label, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}")


@pytest.fixture(scope="module")
def measured_diameters():
    """Exact diameters of 100 fixed-m graphs per (n, m), with wall time per cell."""
    cache = {}

    def get(n, m):
        if (n, m) not in cache:
            start = time.perf_counter()
            d = [diameter(gen_evolutionary_random(n, m, s)) for s in derive_seeds(MASTER_SEED, SEEDS)]
            cache[n, m] = (np.array(d, dtype=float), time.perf_counter() - start)
        return cache[n, m]

    return get


def test_criterion_1_degree_distribution(record_property):
    criterion(record_property, "1 degree distribution")
    start = time.perf_counter()
    hist = DegreeHistogram.pooled(in_degree_histogram(gen_evolutionary_random(1000, 8, s))
                                  for s in derive_seeds(MASTER_SEED, SEEDS))
    pmf = degree_pmf(ModelParams(1000, 8)).probabilities
    tv = total_variation(hist.fractions(), pmf)
    samples = np.repeat(list(hist.counts), list(hist.counts.values()))
    ll_model, ll_power = loglik(samples, pmf), fit_power_law(samples).loglik
    elapsed = time.perf_counter() - start
    ok = tv <= 0.05 and ll_model > ll_power and elapsed <= 60
    report("1", ok, f"TV={tv:.4f} (<=0.05), loglik model {ll_model:.0f} vs power law {ll_power:.0f}, {elapsed:.1f}s")
    assert tv <= 0.05
    assert ll_model > ll_power
    assert elapsed <= 60


def test_criterion_2_factor_of_ten(record_property, measured_diameters):
    criterion(record_property, "2 diameter factor-of-10 scaling")
    total, lines, ok = 0.0, [], True
    for n in (100, 1000, 10_000):
        d, spent = measured_diameters(n, 8)
        total += spent
        gap = abs(d.mean() - diameter_simplified(n))
        ok &= gap <= 1.0
        lines.append(f"n={n}: mean {d.mean():.2f} vs {diameter_simplified(n):.2f}")
    report("2", ok and total <= 600, "; ".join(lines) + f"; {total:.0f}s")
    assert ok and total <= 600


def test_criterion_3_m_plus_two_scaling(record_property, measured_diameters):
    criterion(record_property, "3 m+2 scaling")
    total, lines, gaps = 0.0, [], {}
    for m in (3, 8, 18):
        d, spent = measured_diameters(10_000, m)
        total += spent
        gaps[m] = abs(d.mean() - diameter_simplified_m(10_000, m))
        lines.append(f"m={m}: mean {d.mean():.2f} vs {diameter_simplified_m(10_000, m):.2f}")
    ok = all(g <= 1.0 for g in gaps.values()) and total <= 900
    report("3", ok, "; ".join(lines) + f"; {total:.0f}s")
    assert total <= 900
    assert all(g <= 1.0 for g in gaps.values()), f"hop gaps {gaps}"


def test_criterion_4_analytic_diameter(record_property, measured_diameters):
    criterion(record_property, "4 analytic diameter consistency")
    gaps = {}
    for n in (100, 1000, 10_000):
        d, _ = measured_diameters(n, 8)
        gaps[n] = abs(diameter_analytic(ModelParams(n, 8)) - d.mean())
    ok = all(g <= 1.0 for g in gaps.values())
    report("4", ok, ", ".join(f"n={n}: |gap|={g:.2f}" for n, g in gaps.items()))
    assert ok


def test_criterion_5_propagation_envelopes(record_property):
    criterion(record_property, "5 propagation envelopes")
    params = ModelParams(1000, 8)
    worst_margin, coverage_ok = -math.inf, True
    for s in derive_seeds(MASTER_SEED, 20):
        g = gen_evolutionary_random(1000, 8, s)
        ecc = eccentricities(g)
        trace = simulate_propagation(g, int(np.argmin(ecc)), SHD)
        by_rank = np.sort(trace.arrival_ms)
        for rank in range(2 * 8 + 1, g.n + 1):
            margin = by_rank[rank - 1] - (convergence_diameter(rank, params, SHD) + SHD)
            worst_margin = max(worst_margin, margin)
        far = simulate_propagation(g, int(np.argmax(ecc)), SHD)
        coverage_ok &= far.arrival_ms.max() == diameter(g) * SHD
    ok = worst_margin <= 0 and coverage_ok
    report("5", ok, f"max(observed - envelope - 1 hop) = {worst_margin:.0f} ms; periphery coverage = diameter*shd: {coverage_ok}")
    assert worst_margin <= 0
    assert coverage_ok


def test_criterion_6_fork_bounds(record_property):
    criterion(record_property, "6 forking bounds vs Monte Carlo")
    start = time.perf_counter()
    cells = []
    grid = [(n, x / SHD) for n in (100, 1000) for x in (1e-5, 1e-4, 1e-3, 1e-2)]
    grid.append((1000, 1e-7))  # the single-point example at lambda = 1e-7 per ms
    for n, rate in grid:
        graph_seed, mc_seed = derive_seeds(MASTER_SEED + n, 2)
        g = gen_evolutionary_random(n, 8, graph_seed)
        est = fork_probability_bounds(ForkParams(ModelParams(n, 8), SHD, rate))
        mc = simulate_forking(g, SHD, rate, 10_000, mc_seed)
        inside = est.lower - 3 * mc.standard_error <= mc.probability <= est.upper + 3 * mc.standard_error
        cells.append((n, rate * SHD, est.lower, est.upper, mc.probability, mc.standard_error, inside))
    elapsed = time.perf_counter() - start
    bad = [c for c in cells if not c[-1]]
    detail = "; ".join(f"n={c[0]} lambda*shd={c[1]:.0e}: MC {c[4]:.4f} not in [{c[2]:.4f}, {c[3]:.4f}]"
                       for c in bad) or "all cells inside"
    report("6", not bad and elapsed <= 600, f"{len(cells) - len(bad)}/{len(cells)} cells inside; {detail}; {elapsed:.0f}s")
    assert elapsed <= 600
    assert not bad, detail


def test_criterion_7_calibration_round_trip(record_property):
    criterion(record_property, "7 calibration round trip")
    uppers = {}
    for n in (100, 1000, 10_000):
        params = ModelParams(n, 8)
        for t in (0.01, 0.05, 0.1):
            diff = min_difficulty(1.0, ForkParams(params, SHD, 0.0, t))
            uppers[n, t] = fork_probability_bounds(ForkParams(params, SHD, lambda_mine(1.0, diff), t)).upper
    ok = all(u <= t + 1e-9 for (_, t), u in uppers.items())
    report("7", ok, ", ".join(f"n={n} t={t}: upper={u:.6g}" for (n, t), u in uppers.items()))
    assert ok


def test_criterion_8_equilibrium_solver(record_property):
    criterion(record_property, "8 equilibrium solver")
    start = time.perf_counter()
    worst_rel, worst_res = 0.0, 0.0
    for m in (3, 8, 18):
        for planted in (100.0, 1000.0, 1e4, 1e5):
            profit = lhs_eq13(planted, m) / -math.log1p(-0.05)
            res = equilibrium_size(EconParams(profit, m=m))
            worst_rel = max(worst_rel, abs(res.n_star - planted) / planted)
            worst_res = max(worst_res, res.residual / res.target)
    stars = [equilibrium_size(EconParams(p)).n_star for p in np.geomspace(1e4, 1e9, 10)]
    monotone = all(b >= a for a, b in zip(stars, stars[1:]))
    elapsed = time.perf_counter() - start
    ok = worst_rel <= 1e-6 and worst_res <= 1e-9 and monotone and elapsed <= 1.0
    report("8", ok, f"worst relative error {worst_rel:.1e}, worst residual {worst_res:.1e}, monotone {monotone}, {elapsed * 1000:.0f} ms")
    assert worst_rel <= 1e-6 and worst_res <= 1e-9 and monotone
    assert elapsed <= 1.0


def test_criterion_9_ingest_shd_recovery(record_property):
    criterion(record_property, "9 ingest single-hop delay recovery")
    rng = np.random.default_rng(20240909)
    misses = []
    for i in range(100):
        spacing = rng.uniform(500, 5000)
        size = int(rng.integers(10, 1001))
        hops = rng.integers(0, 8, size=size)
        hops[0] = 0
        jitter = rng.uniform(-0.1, 0.1, size=size) * spacing * (hops > 0)
        log = ArrivalLog.from_offsets(f"fixture{i}", np.maximum(hops * spacing + jitter, 0.0))
        est = estimate_shd(log)
        if abs(est.shd_ms - spacing) > 0.05 * spacing:
            misses.append((spacing, est.shd_ms))
    report("9", not misses, f"{100 - len(misses)}/100 fixtures within 5%")
    assert not misses


COMMANDS = [
    ["degree-dist", "--n", "1000", "--seeds", "10"],
    ["diameter-sweep", "--ns", "100,1000", "--seeds", "5"],
    ["propagate", "--n", "1000"],
    ["fork", "--n", "100", "--trials", "2000"],
    ["calibrate"],
    ["equilibrium", "--roundtrip-n", "1000"],
]


def test_criterion_10_determinism(record_property, tmp_path):
    criterion(record_property, "10 determinism")
    fixture = tmp_path / "arrivals.csv"
    rng = np.random.default_rng(4)
    fixture.write_text("block_hash,node_id,arrival_ms\n" + "".join(
        f"b{b},{i},{int(2000 * rng.integers(0, 6) + rng.integers(-90, 90))}\n" for b in range(3) for i in range(40)))
    differing = []
    for args in COMMANDS + [["ingest", "--input", str(fixture)]]:
        for fmt in ("csv", "json"):
            outs = []
            for run in range(2):
                path = tmp_path / f"{args[0]}-{fmt}-{run}.out"
                assert main([*args, "--format", fmt, "--workers", str(1 + run), "--out", str(path)]) == 0
                siblings = sorted(tmp_path.glob(f"{path.stem}.trace-*"))
                outs.append([path.read_bytes()] + [p.read_bytes() for p in siblings])
            if outs[0] != outs[1]:
                differing.append(f"{args[0]}/{fmt}")
    report("10", not differing, "byte-identical reruns for every command" if not differing else f"differ: {differing}")
    assert not differing
