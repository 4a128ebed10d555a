"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is echoed in the pytest terminal
summary.  Run on its own with ``pytest tests/test_acceptance.py -v``.
"""
import time

import numpy as np
import pytest

from conftest import EXAMPLE_RBS, EXAMPLE_BUDGETS, VERDICTS, random_catalog, two_bs_instance
from hdmimo.config import from_dict
from hdmimo.mc_oracle import ProxyScenario, verify_proxy
from hdmimo.num import kkt_residuals, lattice_oracle, solve_cellular, solve_ucs
from hdmimo.num.association import fractional_user_count, supported_clusters
from hdmimo.num.problems import Allocation
from hdmimo.pipeline import build_network, run_pipeline
from hdmimo.rates import MRT, ZF
from hdmimo.scheduler import MCS, UCS, pilot_dimensions, run_schedule, validate_rb, validate_schedule
from hdmimo.topology import MACRO


def verdict(n, name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:>2} ({name}): {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def desk():
    cfg = from_dict({"seed": 0})
    return cfg, build_network(cfg)[2]


def representative_cell(gains):
    """Median path gain among users whose strongest BS is the macro."""
    rx = gains.received_power()
    j = gains.tiers.index(MACRO)
    own = np.flatnonzero(np.argmax(rx, axis=1) == j)
    k = own[np.argsort(gains.beta[own, j])[len(own) // 2]]
    return k, j


def representative_pair(gains):
    """Median user's two strongest BSs."""
    rx = gains.received_power()
    top = np.argsort(-rx, axis=1)[:, :2]
    second = rx[np.arange(gains.n_users), top[:, 1]]
    k = int(np.argsort(second)[gains.n_users // 2])
    return k, tuple(sorted(top[k].tolist()))


def scenario_for(gains, k, cluster, precoder, M=None, S=None):
    J = gains.n_bs
    L = len(cluster)
    ids = sorted(set(cluster))
    ants = tuple(int(M or gains.antennas[j]) for j in ids)
    loads = tuple(int(S or gains.budgets[j, L - 1]) for j in ids)
    assert J >= len(ids)
    return ProxyScenario(precoder, ants, loads,
                         tuple(float(gains.beta[k, j]) for j in ids),
                         tuple(float(gains.tx_power[j]) for j in ids),
                         float(gains.noise_power), tuple(range(L)))


def test_c01_proxy_fidelity_zf_cellular(desk):
    _, gains = desk
    k, j = representative_cell(gains)
    scn = scenario_for(gains, k, (j,), ZF, M=100, S=10)
    t = time.perf_counter()
    rep = verify_proxy(scn, 1000, seed=1)
    dt = time.perf_counter() - t
    verdict(1, "ZF cellular proxy", rep.rel_error <= 0.05 and dt <= 60,
            f"rel_error={rep.rel_error:.4f} (<= 0.05), proxy={rep.proxy_rate:.4f}, "
            f"MC={rep.empirical_rate:.4f}+-{rep.ci_halfwidth:.4f}, {dt:.1f}s")


def test_c02_proxy_fidelity_mrt_and_cluster(desk):
    _, gains = desk
    k, j = representative_cell(gains)
    kp, pair = representative_pair(gains)
    mrt = verify_proxy(scenario_for(gains, k, (j,), MRT, M=100, S=10), 1000, seed=2)
    zf2 = verify_proxy(scenario_for(gains, kp, pair, ZF), 1000, seed=3)
    trends = {}
    for name, (kk, C, prec) in {"mrt": (k, (j,), MRT), "zf-pair": (kp, pair, ZF)}.items():
        trends[name] = [verify_proxy(scenario_for(gains, kk, C, prec, M=M, S=M // 8), 1000,
                                     seed=4).rel_error for M in (64, 128, 256)]
    monotone = all(all(b <= a for a, b in zip(e, e[1:])) for e in trends.values())
    ok = mrt.rel_error <= 0.07 and zf2.rel_error <= 0.07 and monotone
    trend_txt = "; ".join(f"{n} " + "/".join(f"{e:.4f}" for e in v) for n, v in trends.items())
    verdict(2, "MRT and 2-BS ZF proxy", ok,
            f"mrt={mrt.rel_error:.4f}, zf-pair={zf2.rel_error:.4f} (<= 0.07); "
            f"M=64/128/256: {trend_txt}")


def test_c03_num_correctness():
    cat, B = two_bs_instance()
    a = solve_ucs(cat, B)
    o = lattice_oracle(cat, B, step=0.02)
    kkt = kkt_residuals(a, cat, B)
    gap = abs(a.objective - o.utility)
    ok = gap <= 1e-3 and a.feasibility_residual <= 1e-8 and kkt.max_residual <= 1e-4
    verdict(3, "NUM vs lattice oracle", ok,
            f"|solver-oracle|={gap:.2e}, feasibility={a.feasibility_residual:.1e}, "
            f"KKT={kkt.max_residual:.1e}")


def test_c04_cellular_specialization():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(400 + seed)
        cat = random_catalog(rng, n_bs=4, n_users=15, l_max=1, n_strongest=3)
        B = rng.integers(1, 4, size=(4, 1))
        worst = max(worst, abs(solve_ucs(cat, B).objective - solve_cellular(cat, B).objective))
    verdict(4, "L_max=1 equals cellular NUM", worst <= 1e-6, f"max |diff| over 20 = {worst:.2e}")


def test_c05_fractional_user_bound():
    checked, worst, bad = 0, -np.inf, 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        cat = random_catalog(rng, n_bs=3, n_users=24, l_max=2, rich=True)
        a = solve_ucs(cat, np.tile([1, 2], (3, 1)))
        counts, n = fractional_user_count(a), supported_clusters(a)
        for L, c in counts.items():
            if c is None:
                continue
            checked += 1
            worst = max(worst, c - (n[L] - 1))
            bad += c > n[L] - 1
    verdict(5, "fractional users <= N_L - 1", checked > 0 and bad == 0,
            f"{checked} applicable (instance, L) pairs, {bad} violations, "
            f"max count-(N_L-1)={worst}")


def test_c06_example_rbs_pilots():
    got = [pilot_dimensions(EXAMPLE_RBS[i]) for i in (1, 2, 3, 4)]
    verdict(6, "example RB pilot dimensions", got == [8, 6, 6, 7], f"{got} (want [8, 6, 6, 7])")


def test_c07_example_rbs_validator():
    rb3 = validate_rb(EXAMPLE_RBS[3], EXAMPLE_BUDGETS, UCS)
    rb4u = validate_rb(EXAMPLE_RBS[4], EXAMPLE_BUDGETS, UCS)
    rb4m = validate_rb(EXAMPLE_RBS[4], EXAMPLE_BUDGETS, MCS)
    ok = rb3 == [] and rb4u != [] and rb4m == []
    verdict(7, "example RB validator", ok,
            f"RB3/UCS violations={len(rb3)}, RB4/UCS={len(rb4u)}, RB4/MCS={len(rb4m)}")


def test_c08_scheduler_convergence():
    targets = {
        (0, (0,), 1): 0.5, (1, (0,), 1): 0.4, (2, (0,), 1): 0.3,
        (3, (1,), 1): 0.6, (4, (1,), 1): 0.2,
        (5, (0, 1), 2): 0.7, (6, (0, 1), 2): 0.6,
    }
    lam = {1: 0.6, 2: 0.4}
    x = {key: a * lam[key[2]] for key, a in targets.items()}
    alloc = Allocation(x=x, lam=lam, rates={key: 1.0 for key in x}, n_users=7)
    B = np.array([[2, 2], [2, 2]])
    s = run_schedule(alloc, B, 10_000)
    rel = max(abs(s.realized_fractions[key] / lam[key[2]] - a) / a for key, a in targets.items())
    viol = validate_schedule(s, B)
    verdict(8, "scheduler convergence", rel <= 0.01 and viol == [],
            f"max relative error={rel:.4f} (<= 0.01), violations={len(viol)}")


def test_c09_three_bs_example():
    targets = {}
    for i, C in enumerate([(0, 1), (0, 2), (1, 2)]):
        for k in range(3 * i, 3 * i + 3):
            targets[(k, C, 2)] = 0.5
    x = dict(targets)
    alloc = Allocation(x=x, lam={2: 1.0}, rates={key: 1.0 for key in x}, n_users=9)
    B = np.array([[3, 3]] * 3)
    s = run_schedule(alloc, B, 10_000)
    full = 0
    for rb in s.sets:
        load = [len({k for C, us in rb.items() if j in C for k in us}) for j in range(3)]
        full = max(full, sum(v == 3 for v in load))
    per_bs = [sum(v for (k, C, p), v in s.realized_fractions.items() if j in C) for j in range(3)]
    slack = [3.0 - v for v in per_bs]
    ok = full <= 2 and max(slack) > 1e-9 and validate_schedule(s, B) == []
    verdict(9, "3-BS pair-cluster example", ok,
            f"max BSs at load 3 on one RB={full} (<= 2), per-BS slack={np.round(slack, 4).tolist()}")


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk_a")
    t = time.perf_counter()
    report, _ = run_pipeline(from_dict({"seed": 0}), out)
    return report, out, time.perf_counter() - t


def test_c10_desk_trends(desk_run):
    report, _, dt = desk_run
    parts, ok = [], dt <= 600
    for sc in ("shared", "split"):
        full = report.get("num_distributed", sc).geomean_rate
        uniq = report.get("num_unique", sc).geomean_rate / full
        vq = report.get("num_vq", sc).geomean_rate / full
        p5 = report.get("num_vq", sc).percentiles[5] / report.get("num_cellular", sc).percentiles[5]
        ok &= uniq >= 0.98 and vq >= 0.85 and p5 >= 1.5
        parts.append(f"{sc}: unique/NUM={uniq:.4f} (>= 0.98), VQ/NUM={vq:.4f} (>= 0.85), "
                     f"p5 VQ/cellular={p5:.3f} (>= 1.5)")
    verdict(10, "desk-scale trends", ok, "; ".join(parts) + f"; runtime {dt:.0f}s")


def test_c11_determinism(desk_run, tmp_path):
    _, first, _ = desk_run
    run_pipeline(from_dict({"seed": 0}), tmp_path)
    same = all((first / f).read_bytes() == (tmp_path / f).read_bytes()
               for f in ("rates.csv", "report.json"))
    verdict(11, "determinism", same, f"rates.csv and report.json byte-identical: {same}")
