"""Candidate BS clusters and deterministic peak-rate proxies.

Rates are spectral efficiencies in bits/s/Hz.  A cluster is a sorted tuple
of zero-based BS ids.  Every in-cluster BS ``j`` is assumed loaded with
``S_j(L)`` users at power ``P_j / S_j(L)``; if it serves fewer the proxy is a
lower bound, so it is used unchanged.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

ZF = "zf"
MRT = "mrt"
PRECODERS = (ZF, MRT)

STRONGEST = "strongest"
RICH = "rich"


def beam_gain(M, S):
    """ZF beamforming gain factor ``(M - S + 1) / S``."""
    if S < 1 or S > M:
        raise ValueError(f"need 1 <= S <= M, got S={S}, M={M}")
    return (M - S + 1) / S


def _split(k, C, gains, budgets, active):
    C = tuple(C)
    if not C:
        raise ValueError("empty cluster")
    if budgets is None:
        budgets = gains.budgets
    L = len(C)
    if L > budgets.shape[1]:
        raise ValueError(f"no budget configured for cluster size {L}")
    idx = np.asarray(C, dtype=int)
    rx = gains.tx_power * gains.beta[k]
    if active is None:
        out = rx.sum() - rx[idx].sum()
    else:
        mask = np.zeros(gains.n_bs, dtype=bool)
        mask[np.asarray(active, dtype=int)] = True
        mask[idx] = False
        out = rx[mask].sum()
    S = budgets[idx, L - 1]
    return idx, S, rx, max(out, 0.0)


def zf_peak_rate(k, C, gains, budgets=None, active=None):
    """Peak rate of user ``k`` served by cluster ``C`` with local ZF beams.

    ``active`` restricts which BSs transmit on the band (all by default);
    the interference sum runs over active BSs outside ``C``.
    """
    idx, S, rx, out = _split(k, C, gains, budgets, active)
    b = np.array([beam_gain(gains.antennas[j], s) for j, s in zip(idx, S)])
    amp = np.sqrt(rx[idx] * b).sum()
    return float(np.log2(1.0 + amp ** 2 / (gains.noise_power + out)))


def mrt_peak_rate(k, C, gains, budgets=None, active=None):
    """Peak rate of user ``k`` served by cluster ``C`` with local MRT beams."""
    idx, S, rx, out = _split(k, C, gains, budgets, active)
    if np.any(S > gains.antennas[idx]) or np.any(S < 1):
        raise ValueError("need 1 <= S <= M on every cluster BS")
    amp = np.sqrt(rx[idx] * gains.antennas[idx] / S).sum()
    intra = ((S - 1) / S * rx[idx]).sum()
    return float(np.log2(1.0 + amp ** 2 / (gains.noise_power + intra + out)))


def peak_rate(k, C, gains, precoder=ZF, budgets=None, active=None):
    if precoder == ZF:
        return zf_peak_rate(k, C, gains, budgets, active)
    if precoder == MRT:
        return mrt_peak_rate(k, C, gains, budgets, active)
    raise ValueError(f"unknown precoder {precoder!r}")


def enumerate_candidates(k, gains, l_max, n_strongest=None, mode=STRONGEST, bs_subset=None):
    """Candidate clusters of user ``k`` keyed by size.

    ``strongest`` gives one cluster per size: the ``L`` BSs with the largest
    received power ``P_j * beta[k, j]``.  ``rich`` gives every size-``L``
    subset of the ``n_strongest`` strongest BSs.  Sizes with too few BSs get
    an empty list.
    """
    pool = np.arange(gains.n_bs) if bs_subset is None else np.asarray(bs_subset, dtype=int)
    rx = gains.tx_power[pool] * gains.beta[k, pool]
    # stable sort on -rx keeps the lower id first on ties
    order = [int(j) for j in pool[np.argsort(-rx, kind="stable")]]
    if n_strongest is None:
        n_strongest = l_max
    if n_strongest < l_max:
        raise ValueError("n_strongest must be >= l_max")
    out = {}
    for L in range(1, l_max + 1):
        if L > len(order):
            out[L] = []
        elif mode == STRONGEST:
            out[L] = [tuple(sorted(order[:L]))]
        elif mode == RICH:
            top = sorted(order[:n_strongest])
            out[L] = [tuple(c) for c in combinations(top, L)]
        else:
            raise ValueError(f"unknown candidate mode {mode!r}")
    return out


@dataclass
class ClusterCatalog:
    l_max: int
    precoder: str = ZF
    entries: dict = field(default_factory=dict)
    candidates: dict = field(default_factory=dict)
    n_users: int = 0

    def rate(self, k, C):
        return self.entries[(k, tuple(C))]

    def clusters(self, k, L):
        return self.candidates.get((k, L), [])

    def sizes(self):
        return range(1, self.l_max + 1)

    def cluster_set(self, L):
        """All distinct size-``L`` clusters appearing in the catalog."""
        return sorted({C for (k, LL), cs in self.candidates.items() if LL == L for C in cs})

    def restrict(self, l_max):
        """Drop candidates with more than ``l_max`` members."""
        cat = ClusterCatalog(l_max, self.precoder, n_users=self.n_users)
        for (k, L), cs in self.candidates.items():
            if L <= l_max:
                cat.candidates[(k, L)] = list(cs)
                for C in cs:
                    cat.entries[(k, C)] = self.entries[(k, C)]
        return cat

    def add(self, k, C, rate):
        C = tuple(sorted(C))
        L = len(C)
        lst = self.candidates.setdefault((k, L), [])
        if C not in lst:
            lst.append(C)
        self.entries[(k, C)] = float(rate)
        self.l_max = max(self.l_max, L)
        self.n_users = max(self.n_users, k + 1)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["user_id", "cluster_members", "L", "rate_bps_hz"])
            for (k, C), r in sorted(self.entries.items()):
                w.writerow([k, ";".join(str(j) for j in C), len(C), repr(r)])

    @classmethod
    def from_csv(cls, path, precoder=ZF):
        cat = cls(l_max=0, precoder=precoder)
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                C = tuple(int(j) for j in rec["cluster_members"].split(";"))
                cat.add(int(rec["user_id"]), C, float(rec["rate_bps_hz"]))
        return cat

    @classmethod
    def from_rates(cls, table, l_max=None, precoder=ZF):
        """Build from ``{(k, C): rate}``; convenient for hand-made instances."""
        cat = cls(l_max=0, precoder=precoder)
        for (k, C), r in sorted(table.items(), key=lambda kv: (kv[0][0], len(kv[0][1]), kv[0][1])):
            cat.add(k, C, r)
        if l_max is not None:
            cat.l_max = l_max
        return cat


def build_catalog(gains, precoder=ZF, l_max=None, mode=STRONGEST, n_strongest=None,
                  bs_subset=None):
    """Peak rates for every (user, candidate cluster) pair.

    With ``bs_subset`` only those BSs are candidates or interferers, which
    models a band the other BSs do not transmit on.
    """
    if l_max is None:
        l_max = gains.l_max
    cat = ClusterCatalog(l_max=l_max, precoder=precoder, n_users=gains.n_users)
    for k in range(gains.n_users):
        cands = enumerate_candidates(k, gains, l_max, n_strongest, mode, bs_subset)
        for L, clusters in cands.items():
            cat.candidates[(k, L)] = list(clusters)
            for C in clusters:
                cat.entries[(k, C)] = peak_rate(k, C, gains, precoder, active=bs_subset)
    return cat
