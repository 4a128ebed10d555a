"""Exhaustive lattice search for small UCS instances.

Every ``x[k, C]`` and ``lam[L]`` is restricted to multiples of ``step`` and
the best lattice point is found exactly.  The search loops over all
partition vectors ``lam`` on the lattice with ``sum(lam) == 1`` (enlarging a
``lam[L]`` only relaxes constraints, so nothing better lies strictly inside
the simplex) and, for each, runs a dynamic program over users whose state
is the integer load on every per-BS budget row.  The objective is separable
over users, so the DP max equals brute-force enumeration of the lattice.

Independent of the interior-point solver by construction; intended only for
instances with a handful of variables.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import product

import numpy as np


@dataclass
class OracleResult:
    utility: float
    lam: dict
    step: float
    n_partitions_searched: int


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def lattice_oracle(catalog, budgets, step=0.02, max_states=4_000_000, max_choices=50_000):
    budgets = np.asarray(budgets)
    N = int(round(1.0 / step))
    if abs(N * step - 1.0) > 1e-9:
        raise ValueError("1/step must be an integer")
    sizes = [L for L in catalog.sizes() if catalog.cluster_set(L)]

    users = []
    for k in range(catalog.n_users):
        vs = [(C, L, catalog.rate(k, C)) for L in sizes for C in catalog.clusters(k, L)
              if catalog.rate(k, C) > 0]
        if vs:
            users.append((k, vs))

    incidence = defaultdict(set)
    for k, vs in users:
        for C, L, _ in vs:
            for j in C:
                incidence[(j, L)].add((k, C))
    # rows with identical incidence always carry identical loads
    merged = {}
    rows = []
    for (j, L), members in sorted(incidence.items()):
        key = (frozenset(members), L)
        S = int(budgets[j, L - 1])
        if key in merged:
            rows[merged[key]][1] = min(rows[merged[key]][1], S)
        else:
            merged[key] = len(rows)
            rows.append([L, S, key[0]])
    var_rows = {}
    for r, (L, S, members) in enumerate(rows):
        for kc in members:
            var_rows.setdefault(kc, []).append(r)

    def touched(user):
        k, vs = user
        return sorted({r for C, _, _ in vs for r in var_rows[(k, C)]})

    users.sort(key=lambda u: touched(u))
    user_rows = [touched(u) for u in users]
    last_use = {}
    for i, rs in enumerate(user_rows):
        for r in rs:
            last_use[r] = i

    best, best_lam, searched = -np.inf, None, 0
    for comp in _compositions(N, len(sizes)):
        units = dict(zip(sizes, comp))
        cap = [S * units[L] for L, S, _ in rows]
        val = _dp(users, user_rows, last_use, var_rows, cap, units, step,
                  max_states, max_choices)
        searched += 1
        if val > best:
            best, best_lam = val, {L: units[L] * step for L in sizes}
    return OracleResult(float(best), best_lam or {}, step, searched)


def _choices(k, vs, units, var_rows, step):
    ranges = [range(units[L] + 1) for _, L, _ in vs]
    for pick in product(*ranges):
        per_L = defaultdict(int)
        for (C, L, r), u in zip(vs, pick):
            per_L[L] += u
        if any(per_L[L] > units[L] for L in per_L):
            continue
        R = step * sum(u * r for (C, L, r), u in zip(vs, pick))
        load = defaultdict(int)
        for (C, L, r), u in zip(vs, pick):
            for row in var_rows[(k, C)]:
                load[row] += u
        yield (np.log(R) if R > 0 else -np.inf), load


def _dp(users, user_rows, last_use, var_rows, cap, units, step, max_states, max_choices):
    V = np.zeros(())
    open_rows = []
    for i, ((k, vs), rs) in enumerate(zip(users, user_rows)):
        for r in rs:
            if r not in open_rows:
                open_rows.append(r)
                grown = np.full(V.shape + (cap[r] + 1,), -np.inf)
                grown[..., 0] = V
                V = grown
        if V.size > max_states:
            raise ValueError(f"lattice oracle state space too large ({V.size} states)")
        NV = np.full(V.shape, -np.inf)
        n_choices = 0
        for util, load in _choices(k, vs, units, var_rows, step):
            n_choices += 1
            if n_choices > max_choices:
                raise ValueError("lattice oracle: too many per-user choices")
            if any(load[r] > cap[r] for r in load):
                continue
            src, dst = [], []
            for r in open_rows:
                l = load.get(r, 0)
                src.append(slice(0, cap[r] + 1 - l))
                dst.append(slice(l, cap[r] + 1))
            src, dst = tuple(src), tuple(dst)
            np.maximum(NV[dst], V[src] + util, out=NV[dst])
        V = NV
        closing = [a for a, r in enumerate(open_rows) if last_use[r] == i]
        if closing:
            V = V.max(axis=tuple(closing))
            open_rows = [r for a, r in enumerate(open_rows) if a not in closing]
    return float(V)
