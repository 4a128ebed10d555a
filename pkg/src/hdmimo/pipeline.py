"""End-to-end runs: topology -> rates -> NUM -> schedule -> metrics."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from .config import SCHEMES, stage_seed
from .metrics import MetricsReport, SchemeMetrics, write_rates_csv
from .num import solve_cellular, solve_mcs, solve_orthogonal_split, solve_ucs, unique_association
from .rates import ClusterCatalog, build_catalog
from .scheduler import max_sinr_baseline, run_schedule, validate_schedule
from .topology import MACRO, PICO, build_checkerboard, compute_link_gains, dbm_to_watts

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)

    def __exit__(self, kind, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, f"{type(exc).__name__}: {exc}") from exc
        return False


def build_network(cfg):
    board = cfg.checkerboard()
    with _stage("topo"):
        bss, users = build_checkerboard(board, stage_seed(cfg.seed, "topology"))
        gains = compute_link_gains(
            bss, users, board.extent,
            noise_power=float(dbm_to_watts(cfg.topology.noise_dbm)),
            shadowing_std_db=cfg.topology.shadowing_std_db,
            seed=stage_seed(cfg.seed, "shadowing"),
            d_min=cfg.topology.d_min_m)
    return bss, users, gains


def tier_ids(gains, tier):
    return [j for j, t in enumerate(gains.tiers) if t == tier]


def build_catalogs(cfg, gains, scenario):
    r = cfg.rates
    l_max = cfg.l_max()
    with _stage("rates"):
        if scenario == "shared":
            return {"shared": build_catalog(gains, r.precoder, l_max, r.candidate_mode, r.n_strongest)}
        macros, picos = tier_ids(gains, MACRO), tier_ids(gains, PICO)
        if not macros or not picos:
            raise ValueError("the split scenario needs both macro and pico BSs")
        return {
            "macro": build_catalog(gains, r.precoder, 1, r.candidate_mode, r.n_strongest, macros),
            "pico": build_catalog(gains, r.precoder, l_max, r.candidate_mode, r.n_strongest, picos),
        }


def _band_weighted_cellular(cat_macro, cat_pico, rho):
    """Size-1 candidates of both bands with rates scaled by the band's RB share."""
    table = {}
    for cat, share in ((cat_macro, rho), (cat_pico, 1.0 - rho)):
        for (k, C), rate in cat.entries.items():
            if len(C) == 1:
                table[(k, C)] = rate * share
    cat = ClusterCatalog.from_rates(table, l_max=1)
    cat.n_users = max(cat_macro.n_users, cat_pico.n_users)
    return cat


@dataclass
class ScenarioResult:
    scenario: str
    rates: dict
    extras: dict = field(default_factory=dict)


def run_scenario(cfg, gains, scenario, schemes=SCHEMES):
    """Per-user throughput for each requested scheme in one scenario."""
    B = gains.budgets
    cats = build_catalogs(cfg, gains, scenario)
    tol, rho = cfg.num.tol, cfg.num.rho
    T = cfg.scheduler.horizon
    out, extras = {}, {}
    need_num = any(s in schemes for s in ("num_distributed", "num_unique", "num_vq"))

    if "max_sinr" in schemes:
        with _stage("schedule"):
            if scenario == "shared":
                base = cats["shared"]
            else:
                base = _band_weighted_cellular(cats["macro"], cats["pico"], rho)
            out["max_sinr"] = max_sinr_baseline(base, B, T).throughput
    if "num_cellular" in schemes:
        with _stage("solve"):
            if scenario == "shared":
                cell = solve_cellular(cats["shared"], B, tol)
            else:
                cell = solve_orthogonal_split(cats["macro"], cats["pico"].restrict(1), B, rho, tol)
            out["num_cellular"] = cell.throughput()
    if need_num:
        with _stage("solve"):
            if scenario == "split":
                full = solve_orthogonal_split(cats["macro"], cats["pico"], B, rho, tol)
            elif cfg.num.architecture == "mcs":
                full = solve_mcs(cats["shared"], B, tol)
            else:
                full = solve_ucs(cats["shared"], B, tol=tol)
            extras["lambda"] = {str(p): v for p, v in sorted(full.lam.items(), key=lambda kv: str(kv[0]))}
            extras["num_objective"] = full.objective
            extras["duality_gap"] = full.duality_gap
            extras["feasibility_residual"] = full.feasibility_residual
            extras["orphans"] = list(full.orphans)
        if "num_distributed" in schemes:
            out["num_distributed"] = full.throughput()
        if "num_unique" in schemes or "num_vq" in schemes:
            uniq = unique_association(full)
            if "num_unique" in schemes:
                out["num_unique"] = uniq.throughput()
            if "num_vq" in schemes:
                with _stage("schedule"):
                    sched = run_schedule(uniq, B, T, cfg.scheduler.a_max, cfg.scheduler.v)
                    violations = validate_schedule(sched, B)
                    if violations:
                        raise ValueError(f"{len(violations)} per-RB violations, first: {violations[0]}")
                out["num_vq"] = sched.throughput
    rates = {s: np.asarray(out[s], dtype=float) for s in SCHEMES if s in out}
    return ScenarioResult(scenario, rates, extras)


def run_pipeline(cfg, out_dir=None, schemes=None, scenarios=None):
    """Run every requested scenario and scheme; write CSV and JSON if ``out_dir``."""
    schemes = list(schemes or cfg.schemes)
    scenarios = list(scenarios or cfg.scenarios)
    _, _, gains = build_network(cfg)
    results = [run_scenario(cfg, gains, sc, schemes) for sc in scenarios]
    with _stage("report"):
        metrics = [SchemeMetrics.from_rates(s, r.scenario, r.rates[s])
                   for r in results for s in r.rates]
        report = MetricsReport(metrics, {
            "seed": cfg.seed,
            "n_users": gains.n_users,
            "n_bs": gains.n_bs,
            "scenarios": {r.scenario: r.extras for r in results},
        })
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            rows = [(k, s, r.scenario, v) for r in results for s in r.rates
                    for k, v in enumerate(r.rates[s])]
            write_rates_csv(os.path.join(out_dir, "rates.csv"), rows)
            with open(os.path.join(out_dir, "report.json"), "w") as fh:
                json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    return report, results


def default_config(**overrides):
    return cfgmod.from_dict(overrides)
