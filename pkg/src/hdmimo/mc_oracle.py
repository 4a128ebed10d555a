"""Link-level Monte Carlo check of the closed-form peak rates.

Channels are ``g_kj = sqrt(beta_kj) * h_kj`` with ``h_kj`` i.i.d. CN(0, 1).
Every BS precodes locally over the users it serves on the RB and splits its
power evenly among them; all BSs of a cluster send the same stream, so
interference from another user's stream adds coherently over that user's
cluster.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rates import MRT, ZF, peak_rate
from .topology import make_gains

MAX_REDRAWS = 10
Z95 = 1.959963984540054


class RankDeficientError(RuntimeError):
    pass


def channel_vector(seed, key, M, beta=1.0):
    """One CN(0, beta I_M) draw from the stream keyed by ``key``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))
    z = rng.standard_normal((2, M))
    return np.sqrt(beta / 2.0) * (z[0] + 1j * z[1])


@dataclass
class FadingDraw:
    h: dict
    seed: int
    trial: int


def draw_fading(pairs, antennas, seed, trial):
    """Unit-variance fading vectors for every (user, BS) in ``pairs``."""
    return FadingDraw({(k, j): channel_vector(seed, (trial, k, j), int(antennas[j]))
                       for k, j in pairs}, seed, trial)


def zf_precoder(G):
    """Unit-norm ZF beams for the columns of ``G`` (one column per user)."""
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    if G.shape[0] < G.shape[1] or np.linalg.matrix_rank(G) < G.shape[1]:
        raise RankDeficientError("channel matrix is not full column rank")
    F = G @ np.linalg.inv(G.conj().T @ G)
    return F / np.linalg.norm(F, axis=0)


def mrt_precoder(g):
    g = np.asarray(g, dtype=complex)
    n = np.linalg.norm(g)
    if n == 0:
        raise ValueError("MRT beam undefined for a zero channel")
    return g / n


def beams(G, precoder):
    if precoder == ZF:
        return zf_precoder(G)
    if precoder == MRT:
        return G / np.linalg.norm(G, axis=0)
    raise ValueError(f"unknown precoder {precoder!r}")


def rb_sinr(k, rb, channels, powers, noise, precoder=ZF):
    """SINR of user ``k`` on one RB.

    ``rb`` maps cluster -> served users, ``channels[(u, j)]`` is the channel
    (path loss included) from BS ``j`` to user ``u``.  Channels from every
    transmitting BS to ``k`` are required.
    """
    stream_of = {u: tuple(C) for C, us in rb.items() for u in us}
    if k not in stream_of:
        raise ValueError(f"user {k} is not scheduled on this RB")
    served = {}
    for C, us in rb.items():
        for j in C:
            served.setdefault(j, []).extend(us)
    contrib = {}
    for j, us in served.items():
        us = sorted(us)
        F = beams(np.column_stack([channels[(u, j)] for u in us]), precoder)
        amp = np.sqrt(powers[j] / len(us))
        proj = channels[(k, j)].conj() @ F
        for u, c in zip(us, proj):
            contrib[u] = contrib.get(u, 0.0) + amp * c
    desired = abs(contrib.pop(k)) ** 2
    interference = sum(abs(c) ** 2 for c in contrib.values())
    return desired / (noise + interference)


@dataclass
class ProxyScenario:
    """Target user 0 served by ``cluster``; every BS carries ``loads[j]`` users.

    Co-scheduled users are independent single-BS dummies with unit path
    gain (ZF and MRT beams are invariant to a user's channel scale).
    """
    precoder: str
    antennas: tuple
    loads: tuple
    beta: tuple
    tx_power: tuple
    noise: float
    cluster: tuple

    def __post_init__(self):
        J = len(self.antennas)
        if not (len(self.loads) == len(self.beta) == len(self.tx_power) == J):
            raise ValueError("per-BS fields must have equal length")
        if any(s < 1 or s > m for s, m in zip(self.loads, self.antennas)):
            raise ValueError("need 1 <= load <= M on every BS")
        if not self.cluster or any(j < 0 or j >= J for j in self.cluster):
            raise ValueError("cluster must name existing BSs")

    def proxy(self):
        L = len(self.cluster)
        budgets = np.tile(np.asarray(self.loads, dtype=int)[:, None], (1, L))
        gains = make_gains([self.beta], self.tx_power, self.antennas, budgets, self.noise)
        return peak_rate(0, tuple(sorted(self.cluster)), gains, self.precoder)

    def rb(self):
        C = tuple(sorted(self.cluster))
        out = {C: [0]}
        uid = 1
        for j, s in enumerate(self.loads):
            n = s - 1 if j in C else s
            for _ in range(n):
                out[(j,)] = out.get((j,), []) + [uid]
                uid += 1
        return out


@dataclass
class OracleReport:
    empirical_rate: float
    proxy_rate: float
    rel_error: float
    n_trials: int
    ci_halfwidth: float
    redraws: int = 0
    samples: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {"empirical_rate": self.empirical_rate, "proxy_rate": self.proxy_rate,
                "rel_error": self.rel_error, "n_trials": self.n_trials,
                "ci_halfwidth": self.ci_halfwidth, "redraws": self.redraws}


def _trial_channels(scn, rb, seed, trial, attempt):
    chans = {}
    J = len(scn.antennas)
    for j in range(J):
        M = scn.antennas[j]
        chans[(0, j)] = channel_vector(seed, (trial, 0, j, attempt), M, scn.beta[j])
    for C, us in rb.items():
        for j in C:
            for u in us:
                if u != 0:
                    chans[(u, j)] = channel_vector(seed, (trial, u, j, attempt), scn.antennas[j])
    return chans


def verify_proxy(scenario, n_trials=1000, seed=0):
    """Empirical ergodic rate of the scenario's target user vs its proxy."""
    rb = scenario.rb()
    samples = np.empty(n_trials)
    redraws = 0
    for trial in range(n_trials):
        for attempt in range(MAX_REDRAWS + 1):
            try:
                chans = _trial_channels(scenario, rb, seed, trial, attempt)
                sinr = rb_sinr(0, rb, chans, scenario.tx_power, scenario.noise, scenario.precoder)
                break
            except RankDeficientError:
                redraws += 1
        else:
            raise RankDeficientError(f"trial {trial}: {MAX_REDRAWS} redraws failed")
        samples[trial] = np.log2(1.0 + sinr)
    emp = float(np.sum(samples) / n_trials)
    ci = float(Z95 * samples.std(ddof=1) / np.sqrt(n_trials)) if n_trials > 1 else float("inf")
    proxy = scenario.proxy()
    return OracleReport(emp, proxy, abs(emp - proxy) / emp, n_trials, ci, redraws, samples)
