"""Unique association and fractional-user accounting on NUM solutions."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import replace

from .problems import partition_order

TOL_SUPPORT = 1e-6


def _groups(alloc):
    groups = defaultdict(list)
    for (k, C, p), v in alloc.x.items():
        groups[(k, p)].append((C, v))
    return groups


def unique_association(alloc):
    """Keep, per user and partition, only the cluster with the largest activity.

    Ties go to the lexicographically smallest member tuple.  Users left with
    no activity anywhere are listed in ``extra["unserved"]``.
    """
    x = {}
    for (k, p), items in _groups(alloc).items():
        items.sort()
        best = max(items, key=lambda cv: cv[1])[0]
        for C, v in items:
            x[(k, C, p)] = v if C == best else 0.0
    out = replace(alloc, x=x, extra=dict(alloc.extra))
    out.objective = out.utility()
    served = {k for (k, C, p), v in x.items() if v > 0}
    out.extra["unserved"] = [k for k in range(alloc.n_users)
                             if k not in served and k not in alloc.orphans]
    out.extra["unique"] = True
    if alloc.problem is not None:
        out.feasibility_residual = alloc.problem.violation(out.vector())
    return out


def assignment(alloc, tol=0.0):
    """``{(k, p): C}`` for every user with activity above ``tol`` on ``p``.

    Meant for uniquely associated allocations; with several clusters the
    largest one wins (same tie rule as :func:`unique_association`).
    """
    out = {}
    for (k, p), items in _groups(alloc).items():
        items.sort()
        C, v = max(items, key=lambda cv: cv[1])
        if v > tol:
            out[(k, p)] = C
    return out


def user_constraint_slack(alloc):
    """``lam[p] - sum_C x[k, C, p]`` for every (user, partition) with entries."""
    tot = defaultdict(float)
    for (k, C, p), v in alloc.x.items():
        tot[(k, p)] += v
    return {key: alloc.lam.get(key[1], 0.0) - v for key, v in tot.items()}


def fractional_user_count(alloc, tol_support=TOL_SUPPORT, tol_active=TOL_SUPPORT):
    """Users with two or more supported clusters, per partition.

    The count is only meaningful when every per-user partition constraint
    is strictly slack; partitions where one is active (or the partition is
    empty) map to ``None``.
    """
    slack = user_constraint_slack(alloc)
    out = {}
    for p in alloc.partitions():
        if alloc.lam[p] <= tol_active or any(
                s <= tol_active for (k, pp), s in slack.items() if pp == p):
            out[p] = None
            continue
        support = defaultdict(int)
        for (k, C, pp), v in alloc.x.items():
            if pp == p and v > tol_support:
                support[k] += 1
        out[p] = sum(1 for n in support.values() if n >= 2)
    return out


def supported_clusters(alloc, tol_support=TOL_SUPPORT):
    """Number of distinct clusters carrying any activity, per partition."""
    seen = defaultdict(set)
    for (k, C, p), v in alloc.x.items():
        if v > tol_support:
            seen[p].add(C)
    return {p: len(seen[p]) for p in sorted(alloc.lam, key=partition_order)}
