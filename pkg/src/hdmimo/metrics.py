"""User-rate summaries: geometric means, percentiles and empirical CDFs."""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

PERCENTILES = (5, 25, 50, 75, 95)


def geometric_mean(rates):
    r = np.asarray(rates, dtype=float)
    if r.size == 0:
        raise ValueError("geometric mean of no rates")
    if np.any(r <= 0):
        raise ValueError("geometric mean needs strictly positive rates")
    return float(np.exp(np.mean(np.log(r))))


def percentile(rates, q):
    """Percentile of the empirical distribution.

    Sample ``i`` (sorted, zero-based) sits at probability ``(i + 0.5) / n``;
    values in between are linearly interpolated and values outside the
    first/last position clamp to the extreme samples.
    """
    r = np.asarray(rates, dtype=float)
    if r.size == 0:
        raise ValueError("percentile of no rates")
    return float(np.percentile(r, q, method="hazen"))


def rate_cdf(rates, grid):
    """``[(g, fraction of rates <= g)]`` for every ``g`` in ``grid``."""
    r = np.sort(np.asarray(rates, dtype=float))
    if r.size == 0:
        raise ValueError("CDF of no rates")
    return [(float(g), float(np.searchsorted(r, g, side="right") / r.size)) for g in grid]


@dataclass
class SchemeMetrics:
    scheme: str
    scenario: str
    geomean_rate: float
    percentiles: dict
    utility: float
    n_users: int
    n_unserved: int

    @classmethod
    def from_rates(cls, scheme, scenario, rates):
        r = np.asarray(rates, dtype=float)
        served = r[r > 0]
        gm = geometric_mean(served) if served.size else 0.0
        pct = {q: percentile(r, q) for q in PERCENTILES}
        util = float(np.sum(np.log(served)))
        return cls(scheme, scenario, gm, pct, util, int(r.size), int(r.size - served.size))

    def to_dict(self):
        return {"scheme": self.scheme, "scenario": self.scenario,
                "geomean_rate": self.geomean_rate,
                "percentiles": {str(q): v for q, v in self.percentiles.items()},
                "utility": self.utility, "n_users": self.n_users,
                "n_unserved": self.n_unserved}


@dataclass
class MetricsReport:
    schemes: list
    extras: dict = field(default_factory=dict)

    def get(self, scheme, scenario):
        for m in self.schemes:
            if m.scheme == scheme and m.scenario == scenario:
                return m
        raise KeyError((scheme, scenario))

    def to_dict(self):
        return {"schemes": [m.to_dict() for m in self.schemes], **self.extras}

    def table(self):
        head = f"{'scenario':<8} {'scheme':<16} {'geomean':>9} {'p5':>9} {'p50':>9} {'unserved':>8}"
        lines = [head]
        for m in self.schemes:
            lines.append(f"{m.scenario:<8} {m.scheme:<16} {m.geomean_rate:9.4f} "
                         f"{m.percentiles[5]:9.4f} {m.percentiles[50]:9.4f} {m.n_unserved:8d}")
        return "\n".join(lines)


RATE_COLUMNS = ["user_id", "scheme", "scenario", "rate_bps_hz"]


def write_rates_csv(path, rows):
    """``rows``: iterable of ``(user_id, scheme, scenario, rate)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATE_COLUMNS)
        for k, scheme, scenario, r in rows:
            w.writerow([k, scheme, scenario, repr(float(r))])


def read_rates_csv(path):
    """``{(scheme, scenario): rates array ordered by user id}``."""
    acc = defaultdict(dict)
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != RATE_COLUMNS:
            raise ValueError(f"expected columns {RATE_COLUMNS}, got {rd.fieldnames}")
        for rec in rd:
            acc[(rec["scheme"], rec["scenario"])][int(rec["user_id"])] = float(rec["rate_bps_hz"])
    return {key: np.array([d[k] for k in sorted(d)]) for key, d in acc.items()}


def report_from_rates(table, order=None):
    keys = list(table) if order is None else [k for k in order if k in table]
    return MetricsReport([SchemeMetrics.from_rates(s, sc, table[(s, sc)]) for s, sc in keys])
