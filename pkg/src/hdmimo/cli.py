"""Command-line entry point: ``hdmimo <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import config as cfgmod
from .config import SCENARIOS, SCHEMES, ConfigError, stage_seed
from .mc_oracle import ProxyScenario, verify_proxy
from .metrics import read_rates_csv, report_from_rates
from .num import solve_cellular, solve_mcs, solve_orthogonal_split, solve_ucs, unique_association
from .pipeline import StageError, _stage, build_catalogs, build_network, run_pipeline
from .scheduler import run_schedule, validate_schedule
from .topology import dbm_to_watts, write_gains_csv

EXIT_CONFIG = 2
EXIT_STAGE = 3


def _config(args):
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.from_dict({})
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "scenario", None):
        cfg.scenarios = [args.scenario]
    if getattr(args, "scheme", None):
        cfg.schemes = [args.scheme]
    return cfg.validate()


def _out(args, cfg):
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    return out


def cmd_topo(args):
    cfg = _config(args)
    out = _out(args, cfg)
    bss, users, gains = build_network(cfg)
    with open(os.path.join(out, "bs.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bs_id", "tier", "x_m", "y_m", "tx_power_w", "antennas", "budgets"])
        for b in bss:
            w.writerow([b.id, b.tier, repr(b.position[0]), repr(b.position[1]), repr(b.tx_power),
                        b.antennas, ";".join(map(str, b.budgets))])
    with open(os.path.join(out, "users.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "x_m", "y_m"])
        for u in users:
            w.writerow([u.id, repr(u.position[0]), repr(u.position[1])])
    write_gains_csv(gains, os.path.join(out, "gains.csv"))
    print(f"{len(bss)} BSs, {len(users)} users -> {out}")


def cmd_rates(args):
    cfg = _config(args)
    out = _out(args, cfg)
    _, _, gains = build_network(cfg)
    for sc in cfg.scenarios:
        for name, cat in build_catalogs(cfg, gains, sc).items():
            path = os.path.join(out, f"catalog_{sc}_{name}.csv" if sc == "split" else "catalog_shared.csv")
            cat.to_csv(path)
            print(f"{sc}/{name}: {len(cat.entries)} (user, cluster) rates -> {path}")


def _solve(cfg, gains, scenario, scheme):
    cats = build_catalogs(cfg, gains, scenario)
    B, tol, rho = gains.budgets, cfg.num.tol, cfg.num.rho
    with _stage("solve"):
        if scheme == "num_cellular":
            if scenario == "shared":
                return solve_cellular(cats["shared"], B, tol)
            return solve_orthogonal_split(cats["macro"], cats["pico"].restrict(1), B, rho, tol)
        if scenario == "shared":
            full = (solve_mcs(cats["shared"], B, tol) if cfg.num.architecture == "mcs"
                    else solve_ucs(cats["shared"], B, tol=tol))
        else:
            full = solve_orthogonal_split(cats["macro"], cats["pico"], B, rho, tol)
        return unique_association(full) if scheme in ("num_unique", "num_vq") else full


def cmd_solve(args):
    cfg = _config(args)
    out = _out(args, cfg)
    _, _, gains = build_network(cfg)
    scheme = args.scheme or "num_distributed"
    if scheme == "max_sinr":
        raise ConfigError("max_sinr has no NUM program; use 'pipeline'")
    for sc in cfg.scenarios:
        alloc = _solve(cfg, gains, sc, scheme)
        path = os.path.join(out, f"allocation_{sc}.json")
        alloc.to_json(path)
        print(f"{sc}: utility={alloc.objective:.6f} gap={alloc.duality_gap:.2e} -> {path}")


def cmd_schedule(args):
    cfg = _config(args)
    out = _out(args, cfg)
    _, _, gains = build_network(cfg)
    for sc in cfg.scenarios:
        alloc = _solve(cfg, gains, sc, "num_unique")
        with _stage("schedule"):
            sched = run_schedule(alloc, gains.budgets, cfg.scheduler.horizon,
                                 cfg.scheduler.a_max, cfg.scheduler.v,
                                 record_queues=args.queues)
            bad = validate_schedule(sched, gains.budgets)
            if bad:
                raise ValueError(f"{len(bad)} per-RB violations, first: {bad[0]}")
            sched.to_csv(os.path.join(out, f"schedule_{sc}.csv"))
            sched.to_json(os.path.join(out, f"schedule_{sc}.json"), include_queues=args.queues)
        served = sched.throughput[sched.throughput > 0]
        print(f"{sc}: T={sched.horizon} served={served.size}/{sched.throughput.size} "
              f"geomean={np.exp(np.mean(np.log(served))):.4f}")


def cmd_oracle(args):
    cfg = _config(args)
    o = cfg.oracle
    precoder = args.precoder or o.precoder
    antennas = tuple(args.M or o.antennas)
    loads = tuple(args.S or o.loads)
    beta_db = args.beta_db or o.beta_db
    cluster = tuple(args.cluster or o.cluster)
    power = o.tx_power_dbm if len(o.tx_power_dbm) == len(antennas) else [o.tx_power_dbm[0]] * len(antennas)
    noise = args.noise_dbm if args.noise_dbm is not None else o.noise_dbm
    with _stage("oracle"):
        scn = ProxyScenario(precoder, antennas, loads,
                            tuple(10.0 ** (b / 10.0) for b in beta_db),
                            tuple(float(dbm_to_watts(p)) for p in power),
                            float(dbm_to_watts(noise)), cluster)
        rep = verify_proxy(scn, args.trials or o.trials, stage_seed(cfg.seed, "oracle"))
    text = json.dumps(rep.to_dict(), indent=2)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "oracle.json"), "w") as fh:
            fh.write(text)
    print(text)


def cmd_pipeline(args):
    cfg = _config(args)
    base = _out(args, cfg)
    first = cfg.seed
    for i in range(args.repeat):
        cfg.seed = first + i
        out = os.path.join(base, f"seed_{cfg.seed}") if args.repeat > 1 else base
        report, _ = run_pipeline(cfg, out)
        print(f"seed {cfg.seed} -> {out}")
        print(report.table())


def cmd_report(args):
    path = args.rates or os.path.join(args.out or "out", "rates.csv")
    with _stage("report"):
        table = read_rates_csv(path)
        order = [(s, sc) for sc in SCENARIOS for s in SCHEMES]
        report = report_from_rates(table, order)
    print(report.table())
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)


def build_parser():
    p = argparse.ArgumentParser(prog="hdmimo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scoped=True):
        sp.add_argument("--config", help="YAML experiment config")
        sp.add_argument("--seed", type=int, help="master seed (u64)")
        sp.add_argument("--out", help="output directory")
        if scoped:
            sp.add_argument("--scheme", choices=SCHEMES)
            sp.add_argument("--scenario", choices=SCENARIOS)

    for name, fn, help_ in [("topo", cmd_topo, "drop BSs/users and write gains"),
                            ("rates", cmd_rates, "build peak-rate catalogs"),
                            ("solve", cmd_solve, "solve the NUM program"),
                            ("schedule", cmd_schedule, "run the VQ greedy scheduler")]:
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.set_defaults(func=fn)
        if name == "schedule":
            sp.add_argument("--queues", action="store_true", help="include queue trace in JSON")

    sp = sub.add_parser("oracle", help="Monte Carlo check of a peak-rate proxy")
    common(sp, scoped=False)
    sp.add_argument("--precoder", choices=("zf", "mrt"))
    sp.add_argument("--M", type=int, nargs="+", help="antennas per BS")
    sp.add_argument("--S", type=int, nargs="+", help="users served per BS")
    sp.add_argument("--cluster", type=int, nargs="+", help="serving BS indices")
    sp.add_argument("--beta-db", type=float, nargs="+", dest="beta_db", help="path gains in dB")
    sp.add_argument("--noise-dbm", type=float, dest="noise_dbm")
    sp.add_argument("--trials", type=int)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("pipeline", help="end-to-end run of every scheme")
    common(sp)
    sp.add_argument("--repeat", type=int, default=1, help="consecutive seeds to run")
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("report", help="summarize a rates CSV")
    sp.add_argument("--out", help="directory holding rates.csv")
    sp.add_argument("--rates", help="explicit rates CSV path")
    sp.add_argument("--json", help="write the metrics report here")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_STAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
