"""Network utility maximization over activity fractions.

Decision variables are activity fractions ``x[k, C, p]`` (user ``k`` served
by cluster ``C`` on RB partition ``p``) and RB-partition fractions
``lam[p]``.  Partition keys are cluster sizes ``L`` (ints), plus the string
``"macro"`` for the macro-only band of the orthogonal split.

The utility is proportional fairness, ``sum_k log R_k`` with
``R_k = sum x[k, C, p] * r[k, C]``.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import barrier

log = logging.getLogger(__name__)

UCS = "ucs"
MCS = "mcs"
SPLIT = "split"
CELLULAR = "cellular"
MACRO_BAND = "macro"


class OrphanUserError(ValueError):
    """Raised when some users have no candidate with a positive rate."""

    def __init__(self, users):
        self.users = tuple(users)
        super().__init__(f"users with no positive-rate candidate: {list(self.users)}")


def partition_size(p):
    """Cluster size used for BS budgets on partition ``p``."""
    return 1 if p == MACRO_BAND else int(p)


def partition_order(p):
    return (isinstance(p, str), str(p) if isinstance(p, str) else p)


@dataclass
class Allocation:
    x: dict
    lam: dict
    rates: dict
    n_users: int
    objective: float = float("nan")
    feasibility_residual: float = 0.0
    duality_gap: float = float("nan")
    architecture: str = UCS
    orphans: tuple = ()
    extra: dict = field(default_factory=dict)
    problem: barrier.LogUtilityProblem | None = field(default=None, repr=False)

    def throughput(self):
        R = np.zeros(self.n_users)
        for key, v in self.x.items():
            R[key[0]] += v * self.rates[key]
        return R

    def utility(self):
        R = self.throughput()
        served = np.setdiff1d(np.arange(self.n_users), self.orphans)
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(R[served])))

    def partitions(self):
        return sorted(self.lam, key=partition_order)

    def entries(self, k=None, p=None):
        return {key: v for key, v in self.x.items()
                if (k is None or key[0] == k) and (p is None or key[2] == p)}

    def vector(self):
        """Map ``x``/``lam``/``y`` back onto the problem's variable vector."""
        prob = self.problem
        z = np.zeros(prob.n)
        for lab, i in prob.var_index.items():
            if lab[0] == "x":
                z[i] = self.x.get(lab[1:], 0.0)
            elif lab[0] == "lam":
                z[i] = self.lam.get(lab[1], 0.0)
            elif lab[0] == "y":
                z[i] = self.extra.get("y", {}).get(lab[1:], 0.0)
        return z

    def scaled(self, factor):
        """A copy with every activity fraction multiplied by ``factor``."""
        x = {key: v * factor for key, v in self.x.items()}
        out = replace(self, x=x)
        out.objective = out.utility()
        if self.problem is not None:
            out.feasibility_residual = self.problem.violation(out.vector())
        return out

    def to_dict(self):
        return {
            "architecture": self.architecture,
            "lambda": {str(p): self.lam[p] for p in self.partitions()},
            "x": [
                {"user": k, "cluster": list(C), "partition": str(p), "value": v}
                for (k, C, p), v in sorted(self.x.items(), key=lambda kv: (
                    kv[0][0], partition_order(kv[0][2]), kv[0][1]))
            ],
            "objective": self.objective,
            "residuals": {
                "feasibility": self.feasibility_residual,
                "duality_gap": self.duality_gap,
            },
            "orphans": list(self.orphans),
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


class _Builder:
    """Accumulates labelled variables and ``G z <= h`` rows."""

    def __init__(self):
        self.var_labels = []
        self.index = {}
        self.rows = {}
        self.row_h = {}
        self.x_rates = {}
        self.start = {}

    def var(self, label, start=0.0):
        if label not in self.index:
            self.index[label] = len(self.var_labels)
            self.var_labels.append(label)
            self.start[label] = start
        return self.index[label]

    def add(self, row, label, coef):
        terms = self.rows.setdefault(row, {})
        i = self.var(label)
        terms[i] = terms.get(i, 0.0) + coef

    def rhs(self, row, value):
        self.row_h[row] = value
        self.rows.setdefault(row, {})

    def x(self, k, C, p, r):
        label = ("x", k, C, p)
        self.var(label)
        self.x_rates[(k, C, p)] = r
        return label

    def build(self, n_users, orphans):
        n = len(self.var_labels)
        users = [k for k in range(n_users) if k not in set(orphans)]
        urow = {k: i for i, k in enumerate(users)}
        ai, aj, av = [], [], []
        for (k, C, p), r in self.x_rates.items():
            if k in urow:
                ai.append(urow[k])
                aj.append(self.index[("x", k, C, p)])
                av.append(r)
        A = sp.csr_matrix((av, (ai, aj)), shape=(len(users), n))
        row_labels = [r for r, terms in self.rows.items() if terms]
        gi, gj, gv = [], [], []
        for i, r in enumerate(row_labels):
            for j, c in self.rows[r].items():
                gi.append(i)
                gj.append(j)
                gv.append(c)
        G = sp.csr_matrix((gv, (gi, gj)), shape=(len(row_labels), n))
        h = np.array([self.row_h.get(r, 0.0) for r in row_labels])
        z0 = self._interior(G, h)
        return barrier.LogUtilityProblem(A, G, h, z0, list(self.var_labels), row_labels, users)

    def _interior(self, G, h):
        # structural variables carry their start value; x variables start at
        # theta * (their partition's start value) with theta small enough
        z_fixed = np.zeros(len(self.var_labels))
        x_dir = np.zeros(len(self.var_labels))
        for lab, i in self.index.items():
            if lab[0] == "x":
                x_dir[i] = self.start[("lam", lab[3])] if ("lam", lab[3]) in self.start else self._band(lab[3])
            else:
                z_fixed[i] = self.start[lab]
        slack = h - G @ z_fixed
        load = G @ x_dir
        pos = load > 0
        theta = 1.0
        if np.any(pos):
            theta = min(1.0, 0.5 * float(np.min(slack[pos] / load[pos])))
        z0 = z_fixed + theta * x_dir
        if np.any(z0 <= 0) or np.any(h - G @ z0 <= 0):
            raise ValueError("could not construct a strictly feasible start")
        return z0

    def _band(self, p):
        return self.start.get(("band", p), 0.0)


def _orphans(users_entries, n_users, on_orphan):
    orphans = [k for k in range(n_users) if not any(r > 0 for r in users_entries.get(k, []))]
    if orphans:
        if on_orphan == "raise":
            raise OrphanUserError(orphans)
        warnings.warn(f"dropping {len(orphans)} users with no positive-rate candidate: "
                      f"{orphans[:10]}", RuntimeWarning, stacklevel=3)
    return orphans


def _user_rates(*catalogs):
    out = {}
    for cat in catalogs:
        for (k, C), r in cat.entries.items():
            out.setdefault(k, []).append(r)
    return out


def _budget(budgets, j, L):
    return float(budgets[j, L - 1])


def _add_ucs(b, catalog, budgets, sizes, lam_start):
    """UCS rows for the size partitions in ``sizes`` (without the sum row)."""
    for L in sizes:
        b.var(("lam", L), start=lam_start)
        for k in range(catalog.n_users):
            for C in catalog.clusters(k, L):
                r = catalog.rate(k, C)
                if r <= 0:
                    continue
                lab = b.x(k, C, L, r)
                b.add(("user", k, L), lab, 1.0)
                for j in C:
                    b.add(("bs", j, L), lab, 1.0)
        for row in [r for r in b.rows if r[0] == "bs" and r[2] == L]:
            b.add(row, ("lam", L), -_budget(budgets, row[1], L))
        for row in [r for r in b.rows if r[0] == "user" and r[2] == L]:
            b.add(row, ("lam", L), -1.0)


def _finish(prob, res, b, n_users, orphans, architecture, extra=None):
    x, lam, y = {}, {}, {}
    for lab, i in prob.var_index.items():
        if lab[0] == "x":
            x[lab[1:]] = float(res.z[i])
        elif lab[0] == "lam":
            lam[lab[1]] = float(res.z[i])
        elif lab[0] == "y":
            y[lab[1:]] = float(res.z[i])
    extra = dict(extra or {})
    if y:
        extra["y"] = y
    alloc = Allocation(
        x=x, lam=lam, rates=dict(b.x_rates), n_users=n_users,
        objective=res.objective, feasibility_residual=prob.violation(res.z),
        duality_gap=res.gap, architecture=architecture, orphans=tuple(orphans),
        extra=extra, problem=prob,
    )
    log.info("%s NUM: utility=%.6f gap=%.2e newton=%d", architecture, res.objective,
             res.gap, res.newton_steps)
    return alloc


def build_ucs(catalog, budgets, sizes=None, on_orphan="warn"):
    budgets = np.asarray(budgets)
    sizes = list(catalog.sizes()) if sizes is None else list(sizes)
    orphans = _orphans(_user_rates(catalog.restrict(max(sizes))), catalog.n_users, on_orphan)
    b = _Builder()
    _add_ucs(b, catalog, budgets, sizes, lam_start=1.0 / (len(sizes) + 1))
    for L in sizes:
        b.add(("sum",), ("lam", L), 1.0)
    b.rhs(("sum",), 1.0)
    return b, b.build(catalog.n_users, orphans), orphans


def solve_ucs(catalog, budgets, utility="log", tol=1e-8, sizes=None, on_orphan="warn"):
    """Uniform cluster-size NUM.

    ``sizes`` restricts which cluster-size partitions exist (all sizes up to
    ``catalog.l_max`` by default).
    """
    if utility != "log":
        raise ValueError("only the proportional-fair log utility is supported")
    b, prob, orphans = build_ucs(catalog, budgets, sizes, on_orphan)
    res = barrier.solve(prob, tol=tol)
    return _finish(prob, res, b, catalog.n_users, orphans, UCS)


def solve_cellular(catalog, budgets, tol=1e-8, on_orphan="warn"):
    """Cellular-only NUM: ``sum_k x_kj <= S_j(1)``, ``sum_j x_kj <= 1``.

    Written directly over the size-1 candidates, without partition
    variables; it is the reference the ``L_max = 1`` UCS problem reduces to.
    """
    budgets = np.asarray(budgets)
    cell = catalog.restrict(1)
    orphans = _orphans(_user_rates(cell), catalog.n_users, on_orphan)
    b = _Builder()
    b.start[("band", 1)] = 1.0
    for k in range(catalog.n_users):
        for C in cell.clusters(k, 1):
            r = cell.rate(k, C)
            if r <= 0:
                continue
            lab = b.x(k, C, 1, r)
            b.add(("user", k, 1), lab, 1.0)
            b.add(("bs", C[0], 1), lab, 1.0)
    for row in list(b.rows):
        b.rhs(row, 1.0 if row[0] == "user" else _budget(budgets, row[1], 1))
    prob = b.build(catalog.n_users, orphans)
    res = barrier.solve(prob, tol=tol)
    alloc = _finish(prob, res, b, catalog.n_users, orphans, CELLULAR)
    alloc.lam = {1: 1.0}
    return alloc


def solve_orthogonal_split(catalog_macro, catalog_pico, budgets, rho, tol=1e-8,
                           on_orphan="warn"):
    """Macros run cellular NUM on ``rho`` of the RBs; picos run UCS on the rest.

    Both catalogs must already exclude the other tier's interference.  One
    joint program: a user's throughput adds its macro-band and pico-band
    shares.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    budgets = np.asarray(budgets)
    n_users = max(catalog_macro.n_users, catalog_pico.n_users)
    use_macro = rho > 0
    use_pico = rho < 1
    cats = ([catalog_macro.restrict(1)] if use_macro else []) + ([catalog_pico] if use_pico else [])
    orphans = _orphans(_user_rates(*cats), n_users, on_orphan)
    b = _Builder()
    sizes = list(catalog_pico.sizes()) if use_pico else []
    if use_pico:
        _add_ucs(b, catalog_pico, budgets, sizes,
                 lam_start=(1.0 - rho) / (len(sizes) + 1))
        for L in sizes:
            b.add(("sum",), ("lam", L), 1.0)
        b.rhs(("sum",), 1.0 - rho)
    if use_macro:
        b.start[("band", MACRO_BAND)] = rho
        for k in range(catalog_macro.n_users):
            for C in catalog_macro.clusters(k, 1):
                r = catalog_macro.rate(k, C)
                if r <= 0:
                    continue
                lab = b.x(k, C, MACRO_BAND, r)
                b.add(("user", k, MACRO_BAND), lab, 1.0)
                b.add(("bs", C[0], MACRO_BAND), lab, 1.0)
        for row in [r for r in b.rows if r[2:] == (MACRO_BAND,)]:
            b.rhs(row, rho if row[0] == "user" else rho * _budget(budgets, row[1], 1))
    prob = b.build(n_users, orphans)
    res = barrier.solve(prob, tol=tol)
    alloc = _finish(prob, res, b, n_users, orphans, SPLIT, extra={"rho": rho})
    if use_macro:
        alloc.lam[MACRO_BAND] = rho
    return alloc


def solve_mcs(catalog, budgets, tol=1e-8, force_mode=None, on_orphan="warn"):
    """Mixed cluster-size NUM with per-BS mode-split fractions ``y[j, L]``.

    Within partition ``L >= 2`` BS ``j`` spends ``y[j, L]`` of the RBs in
    cellular mode (budget ``S_j(1)``) and ``lam[L] - y[j, L]`` serving
    size-``L`` clusters (budget ``S_j(L)``).  Cellular entries appear in
    ``x`` as singleton clusters tagged with partition ``L``.

    ``force_mode="clustered"`` pins every ``y`` to 0 and ``"cellular"`` pins
    it to ``lam[L]``; both remove the corresponding variables.
    """
    if catalog.l_max < 2:
        raise ValueError("MCS needs l_max >= 2")
    if force_mode not in (None, "clustered", "cellular"):
        raise ValueError(f"bad force_mode {force_mode!r}")
    budgets = np.asarray(budgets)
    sizes = list(range(2, catalog.l_max + 1))
    rates_by_user = {}
    for (k, C), r in catalog.entries.items():
        if (len(C) == 1 and force_mode != "clustered") or (len(C) >= 2 and force_mode != "cellular"):
            rates_by_user.setdefault(k, []).append(r)
    orphans = _orphans(rates_by_user, catalog.n_users, on_orphan)
    b = _Builder()
    lam0 = 1.0 / (len(sizes) + 1)
    for L in sizes:
        b.var(("lam", L), start=lam0)
        b.add(("sum",), ("lam", L), 1.0)
        cell_bs, clu_bs = set(), set()
        for k in range(catalog.n_users):
            if force_mode != "clustered":
                for C in catalog.clusters(k, 1):
                    r = catalog.rate(k, C)
                    if r <= 0:
                        continue
                    lab = b.x(k, C, L, r)
                    b.add(("user", k, L), lab, 1.0)
                    b.add(("cell", C[0], L), lab, 1.0)
                    cell_bs.add(C[0])
            if force_mode != "cellular":
                for C in catalog.clusters(k, L):
                    r = catalog.rate(k, C)
                    if r <= 0:
                        continue
                    lab = b.x(k, C, L, r)
                    b.add(("user", k, L), lab, 1.0)
                    for j in C:
                        b.add(("bs", j, L), lab, 1.0)
                        clu_bs.add(j)
        for k in range(catalog.n_users):
            if ("user", k, L) in b.rows:
                b.add(("user", k, L), ("lam", L), -1.0)
        for j in sorted(cell_bs | clu_bs):
            S1, SL = _budget(budgets, j, 1), _budget(budgets, j, L)
            if force_mode is None:
                b.var(("y", j, L), start=lam0 / 2)
                b.add(("ymax", j, L), ("y", j, L), 1.0)
                b.add(("ymax", j, L), ("lam", L), -1.0)
                if j in cell_bs:
                    b.add(("cell", j, L), ("y", j, L), -S1)
                if j in clu_bs:
                    b.add(("bs", j, L), ("lam", L), -SL)
                    b.add(("bs", j, L), ("y", j, L), SL)
            elif force_mode == "cellular":
                b.add(("cell", j, L), ("lam", L), -S1)
            else:
                b.add(("bs", j, L), ("lam", L), -SL)
    b.rhs(("sum",), 1.0)
    prob = b.build(catalog.n_users, orphans)
    res = barrier.solve(prob, tol=tol)
    return _finish(prob, res, b, catalog.n_users, orphans, MCS,
                   extra={"force_mode": force_mode})


def num_constraint_violation(alloc):
    """Largest constraint violation of ``alloc`` in its own problem."""
    return alloc.problem.violation(alloc.vector())
