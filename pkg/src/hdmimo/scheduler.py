"""Resource-block schedulers that realize NUM activity fractions.

RBs are split among partitions (cluster sizes, or the macro band of the
orthogonal split) in proportion to ``lam``.  Each partition runs its own
max-min virtual-queue scheduler: user ``k`` is credited ``1 / alpha_k`` per
scheduled RB, where ``alpha_k`` is its target share of the partition's RBs,
and a greedy pass approximates the per-RB weighted-sum-rate problem.

A user becomes a scheduling candidate only once its virtual backlog covers
a full service (``Q_k >= 1 / alpha_k``).  Virtual arrivals of ``a_max``
units per RB then pace user ``k`` at ``a_max * alpha_k`` of the RBs when its
BSs have room; with the default ``a_max = 1`` that is exactly the target.
"""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .num.association import assignment
from .num.problems import MCS, Allocation, partition_order, partition_size

UCS = "ucs"


def apportion_partitions(lam, T):
    """Label each of ``T`` RBs with a partition, proportionally to ``lam``.

    Largest-remainder apportionment; RBs left over when ``sum(lam) < 1`` go
    to the partition with the largest ``lam``.  Labels are interleaved so
    every partition is spread evenly over the horizon.
    """
    parts = sorted((p for p, v in lam.items() if v > 0), key=partition_order)
    if not parts:
        raise ValueError("no partition has a positive RB fraction")
    total = sum(lam[p] for p in parts)
    if total > 1.0 + 1e-9:
        raise ValueError(f"partition fractions sum to {total} > 1")
    quota = {p: lam[p] * T for p in parts}
    counts = {p: int(np.floor(quota[p] + 1e-9)) for p in parts}
    short = int(round(min(total, 1.0) * T)) - sum(counts.values())
    by_rem = sorted(parts, key=lambda p: (-(quota[p] - counts[p]), partition_order(p)))
    for p in by_rem[:max(short, 0)]:
        counts[p] += 1
    leftover = T - sum(counts.values())
    if leftover > 0:
        biggest = min(parts, key=lambda p: (-lam[p], partition_order(p)))
        counts[biggest] += leftover
    slots = []
    for rank, p in enumerate(parts):
        n = counts[p]
        slots.extend(((i + 0.5) / n, rank, p) for i in range(n))
    slots.sort(key=lambda s: (s[0], s[1]))
    return [p for _, _, p in slots]


@dataclass
class VirtualQueueState:
    users: np.ndarray
    q: np.ndarray
    target_rate: np.ndarray
    a_max: float
    v: float

    def __post_init__(self):
        if np.any(self.q < 0):
            raise ValueError("negative virtual queue")
        if np.any(self.target_rate <= 0):
            raise ValueError("target rates must be positive")

    def queue(self, k):
        return float(self.q[np.flatnonzero(self.users == k)[0]])


def _vq_update(q, served, target_rate, a_max, v):
    arrive = a_max if v > q.sum() else 0.0
    return np.maximum(0.0, q - target_rate * served) + arrive


def vq_step(state, scheduled):
    """Advance every virtual queue by one RB.

    ``Q_k <- max(0, Q_k - R_k * [k scheduled]) + A_max * [V > sum Q]``; the
    arrival gate looks at the queue sum before the update.
    """
    served = np.isin(state.users, list(scheduled)).astype(float)
    q = _vq_update(state.q, served, state.target_rate, state.a_max, state.v)
    return VirtualQueueState(state.users, q, state.target_rate, state.a_max, state.v)


def greedy_wsrm(weights, clusters, budgets):
    """Greedy weighted-sum-rate user selection for one RB.

    ``weights`` maps user -> ``Q_k * R_k``, ``clusters`` maps user -> its
    serving cluster, ``budgets`` gives each BS's per-RB user budget.  Users
    are visited by decreasing weight (ties by id) and admitted when every BS
    of their cluster still has room.
    """
    order = sorted(weights, key=lambda k: (-weights[k], k))
    load = defaultdict(int)
    chosen = []
    for k in order:
        C = clusters[k]
        if all(load[j] < budgets[j] for j in C):
            for j in C:
                load[j] += 1
            chosen.append(k)
    return chosen


@dataclass
class Schedule:
    horizon: int
    rb_partition: list
    rb_size: list
    sets: list
    realized_fractions: dict
    throughput: np.ndarray
    architecture: str = UCS
    queue_trace: list | None = field(default=None, repr=False)
    bs_mode: list | None = field(default=None, repr=False)

    def rb(self, t):
        return self.sets[t]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "L", "cluster_members", "user_id"])
            for t, rb in enumerate(self.sets):
                for C in sorted(rb):
                    for k in sorted(rb[C]):
                        w.writerow([t, self.rb_size[t], ";".join(map(str, C)), k])

    def summary(self, include_queues=False):
        out = {
            "horizon": self.horizon,
            "architecture": self.architecture,
            "realized_fractions": [
                {"user": k, "cluster": list(C), "partition": str(p), "value": v}
                for (k, C, p), v in sorted(self.realized_fractions.items(),
                                           key=lambda kv: (kv[0][0], partition_order(kv[0][2])))
            ],
            "throughput": [float(r) for r in self.throughput],
        }
        if include_queues and self.queue_trace is not None:
            out["queue_trace"] = self.queue_trace
        return out

    def to_json(self, path, include_queues=False):
        with open(path, "w") as fh:
            json.dump(self.summary(include_queues), fh, indent=2)


def _targets(alloc, p):
    lam = alloc.lam[p]
    users, clusters, alpha = [], [], []
    for (k, pp), C in sorted((kp, C) for kp, C in assignment(alloc).items() if kp[1] == p):
        a = alloc.x[(k, C, p)] / lam
        if a <= 0:
            continue
        users.append(k)
        clusters.append(C)
        alpha.append(min(a, 1.0))
    return np.array(users, dtype=int), clusters, np.array(alpha)


def _vq_params(target_rate, a_max, v):
    if a_max is None:
        a_max = 1.0
    if v is None:
        v = len(target_rate) * float(target_rate.max()) * 10.0
    return a_max, v


def _finalize(alloc, T, labels, sizes, sets, counts, architecture, trace, modes=None):
    realized = {key: n / T for key, n in counts.items()}
    R = np.zeros(alloc.n_users)
    for (k, C, p), f in realized.items():
        R[k] += f * alloc.rates[(k, C, p)]
    return Schedule(T, labels, sizes, sets, realized, R, architecture, trace, modes)


def run_schedule(alloc, budgets, T, a_max=None, v=None, record_queues=False):
    """Run the per-partition VQ + greedy schedulers over ``T`` RBs.

    ``alloc`` should be uniquely associated; if a user still has several
    clusters in one partition, only the largest is scheduled.
    """
    if alloc.architecture == MCS:
        return run_schedule_mcs(alloc, budgets, T, a_max, v, record_queues)
    budgets = np.asarray(budgets)
    labels = apportion_partitions(alloc.lam, T)
    sizes = [partition_size(p) for p in labels]
    sets = [dict() for _ in range(T)]
    counts = defaultdict(int)
    trace = [] if record_queues else None
    for p in sorted(set(labels), key=partition_order):
        users, clusters, alpha = _targets(alloc, p)
        if len(users) == 0:
            continue
        L = partition_size(p)
        rb_budget = budgets[:, L - 1]
        target = 1.0 / alpha
        amax, vv = _vq_params(target, a_max, v)
        q = np.full(len(users), amax)
        weights_of = dict(zip(users.tolist(), range(len(users))))
        cl = dict(zip(users.tolist(), clusters))
        for t in (t for t, lab in enumerate(labels) if lab == p):
            ready = np.flatnonzero(q >= target - 1e-12)
            weights = {int(users[i]): float(q[i] * target[i]) for i in ready}
            chosen = greedy_wsrm(weights, cl, rb_budget)
            served = np.zeros(len(users))
            for k in chosen:
                i = weights_of[k]
                served[i] = 1.0
                sets[t].setdefault(cl[k], []).append(k)
                counts[(k, cl[k], p)] += 1
            q = _vq_update(q, served, target, amax, vv)
            if record_queues:
                trace.append((t, str(p), float(q.max())))
    return _finalize(alloc, T, labels, sizes, sets, counts, UCS, trace)


def _spread(count, n):
    """Boolean mask of length ``n`` with ``count`` evenly spread True entries."""
    i = np.arange(n)
    return np.floor((i + 1) * count / n) > np.floor(i * count / n)


def run_schedule_mcs(alloc, budgets, T, a_max=None, v=None, record_queues=False):
    """Scheduler for mixed cluster-size allocations.

    Within partition ``L`` each BS is in cellular mode on
    ``round(y[j, L] / lam[L] * n_L)`` of the partition's ``n_L`` RBs (evenly
    spread) and serves size-``L`` clusters on the rest.  A user is eligible
    on an RB only if every BS of its cluster is in the matching mode.
    """
    budgets = np.asarray(budgets)
    labels = apportion_partitions(alloc.lam, T)
    sizes = [partition_size(p) for p in labels]
    sets = [dict() for _ in range(T)]
    modes = [dict() for _ in range(T)]
    counts = defaultdict(int)
    trace = [] if record_queues else None
    y = alloc.extra.get("y", {})
    force = alloc.extra.get("force_mode")
    J = budgets.shape[0]
    for p in sorted(set(labels), key=partition_order):
        users, clusters, alpha = _targets(alloc, p)
        rbs = [t for t, lab in enumerate(labels) if lab == p]
        n = len(rbs)
        cell_mask = np.zeros((J, n), dtype=bool)
        for j in range(J):
            if force == "cellular":
                share = 1.0
            elif force == "clustered":
                share = 0.0
            else:
                share = y.get((j, p), 0.0) / alloc.lam[p]
            cell_mask[j] = _spread(int(round(share * n)), n)
        if len(users) == 0:
            continue
        target = 1.0 / alpha
        amax, vv = _vq_params(target, a_max, v)
        q = np.full(len(users), amax)
        idx = dict(zip(users.tolist(), range(len(users))))
        cl = dict(zip(users.tolist(), clusters))
        for r, t in enumerate(rbs):
            cellular = cell_mask[:, r]
            modes[t] = {j: ("cellular" if cellular[j] else "clustered") for j in range(J)}
            rb_budget = np.where(cellular, budgets[:, 0], budgets[:, p - 1])
            ready = np.flatnonzero(q >= target - 1e-12)
            weights = {}
            for i in ready:
                C = clusters[i]
                want_cell = len(C) == 1
                if all(cellular[j] == want_cell for j in C):
                    weights[int(users[i])] = float(q[i] * target[i])
            chosen = greedy_wsrm(weights, cl, rb_budget)
            served = np.zeros(len(users))
            for k in chosen:
                served[idx[k]] = 1.0
                sets[t].setdefault(cl[k], []).append(k)
                counts[(k, cl[k], p)] += 1
            q = _vq_update(q, served, target, amax, vv)
            if record_queues:
                trace.append((t, str(p), float(q.max())))
    return _finalize(alloc, T, labels, sizes, sets, counts, MCS, trace, modes)


def validate_rb(rb, budgets, architecture=UCS, L=None):
    """Violations of the per-RB feasibility rules for one RB.

    ``rb`` maps cluster -> served users.  UCS: one cluster size per RB, each
    user in at most one cluster, and BS ``j`` serving at most ``S_j(L)``.
    MCS: clustered users share one size ``L >= 2`` and each BS serves either
    only cellular users (at most ``S_j(1)``) or only size-``L`` clusters (at
    most ``S_j(L)``).
    """
    budgets = np.asarray(budgets)
    out = []
    live = {C: us for C, us in rb.items() if len(us)}
    seen = defaultdict(int)
    for C, us in live.items():
        for k in us:
            seen[k] += 1
    for k, n in sorted(seen.items()):
        if n > 1:
            out.append(f"user {k} served by {n} clusters")
    per_bs = defaultdict(list)
    for C, us in live.items():
        for j in C:
            per_bs[j].extend((len(C), k) for k in us)
    if architecture == UCS:
        found = {len(C) for C in live}
        if L is not None and found - {L}:
            out.append(f"cluster sizes {sorted(found)} on an RB labelled L={L}")
        elif L is None and len(found) > 1:
            out.append(f"mixed cluster sizes {sorted(found)} on one RB")
        size = L if L is not None else (found.pop() if len(found) == 1 else None)
        for j, served in sorted(per_bs.items()):
            users = {k for _, k in served}
            if size is not None and len(users) > budgets[j, size - 1]:
                out.append(f"BS {j} serves {len(users)} > S_j({size})={budgets[j, size - 1]}")
    elif architecture == MCS:
        clustered = {len(C) for C in live if len(C) >= 2}
        if len(clustered) > 1:
            out.append(f"mixed clustered sizes {sorted(clustered)} on one RB")
        if L is not None and clustered - {L}:
            out.append(f"clustered size {sorted(clustered)} on an RB labelled L={L}")
        for j, served in sorted(per_bs.items()):
            kinds = {s for s, _ in served}
            users = {k for _, k in served}
            if len(kinds) > 1:
                out.append(f"BS {j} mixes cellular and clustered users")
                continue
            s = kinds.pop()
            if len(users) > budgets[j, s - 1]:
                out.append(f"BS {j} serves {len(users)} > S_j({s})={budgets[j, s - 1]}")
    else:
        raise ValueError(f"unknown architecture {architecture!r}")
    return out


def validate_schedule(schedule, budgets, architecture=None):
    """All per-RB violations, each prefixed with its RB index."""
    arch = architecture or schedule.architecture
    out = []
    for t, rb in enumerate(schedule.sets):
        L = schedule.rb_size[t]
        if arch == MCS and L == 1:
            L = None
        for msg in validate_rb(rb, budgets, arch, L):
            out.append(f"RB {t}: {msg}")
    return out


def pilot_dimensions(rb):
    """Uplink pilots needed on an RB: one per distinct scheduled user."""
    return len({k for us in rb.values() for k in us})


def realized_allocation(schedule, alloc):
    """The schedule's empirical fractions as an :class:`Allocation`.

    ``lam`` becomes the fraction of RBs each partition actually received.
    """
    T = schedule.horizon
    lam = defaultdict(float)
    for p in schedule.rb_partition:
        lam[p] += 1.0 / T
    x = {key: 0.0 for key in alloc.x}
    x.update(schedule.realized_fractions)
    out = Allocation(x=x, lam=dict(lam), rates=alloc.rates, n_users=alloc.n_users,
                     architecture=alloc.architecture, orphans=alloc.orphans,
                     extra=dict(alloc.extra), problem=alloc.problem)
    out.objective = out.utility()
    return out


def max_sinr_baseline(catalog, budgets, T):
    """Max-SINR association with per-BS round robin over ``S_j(1)`` slots.

    Each user attaches to its best size-1 candidate; BS ``j`` serves its
    users in id order, ``S_j(1)`` per RB, cycling.
    """
    budgets = np.asarray(budgets)
    attach = defaultdict(list)
    rates = {}
    for k in range(catalog.n_users):
        cands = [(catalog.rate(k, C), C) for C in catalog.clusters(k, 1) if catalog.rate(k, C) > 0]
        if not cands:
            continue
        r, C = max(cands, key=lambda rc: (rc[0], [-j for j in rc[1]]))
        attach[C[0]].append(k)
        rates[(k, C, 1)] = r
    sets = [dict() for _ in range(T)]
    counts = defaultdict(int)
    for j, users in sorted(attach.items()):
        n, S = len(users), int(budgets[j, 0])
        for t in range(T):
            for i in range(min(S, n)):
                k = users[(t * S + i) % n]
                sets[t].setdefault((j,), []).append(k)
                counts[(k, (j,), 1)] += 1
    alloc = Allocation(x={key: 0.0 for key in rates}, lam={1: 1.0}, rates=rates,
                       n_users=catalog.n_users, architecture="max_sinr")
    return _finalize(alloc, T, [1] * T, [1] * T, sets, counts, UCS, None)
