"""KKT diagnostics for a candidate NUM solution.

Multipliers are not taken from the solver.  They are re-fit by nonnegative
least squares on the stationarity system restricted to the active
constraints and the supported variables, so a suboptimal point shows up as
a residual that no nonnegative multiplier can absorb.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .problems import build_ucs

TOL_SUPPORT = 1e-6
TOL_ACTIVE = 1e-6


@dataclass
class KktReport:
    nu: dict
    mu: dict
    other: dict
    stationarity_residual: float
    complementarity_residual: float
    dual_feasibility_residual: float
    n_support: int = 0
    n_active: int = 0
    details: dict = field(default_factory=dict, repr=False)

    @property
    def max_residual(self):
        return max(self.stationarity_residual, self.complementarity_residual,
                   self.dual_feasibility_residual)


def kkt_residuals(alloc, catalog=None, budgets=None, tol_support=TOL_SUPPORT,
                  tol_active=TOL_ACTIVE):
    """Fit multipliers at ``alloc`` and report how far KKT is from holding.

    ``stationarity_residual`` is the misfit of ``r_kC / R_k = sum_j nu_jL +
    mu_kL`` (and the partition-fraction equations) on the support;
    ``dual_feasibility_residual`` is the largest violation of
    ``r_kC / R_k <= sum_j nu_jL + mu_kL`` off the support.
    """
    prob = alloc.problem
    if prob is None:
        _, prob, _ = build_ucs(catalog, budgets)
    z = alloc.vector() if alloc.problem is not None else _vector(prob, alloc)
    R = prob.A @ z
    if np.any(R <= 0):
        inf = float("inf")
        return KktReport({}, {}, {}, inf, inf, inf)
    grad = prob.A.T @ (1.0 / R)
    slack = prob.slack(z)
    active = np.flatnonzero(slack <= tol_active)
    support = np.flatnonzero(z > tol_support)
    off = np.flatnonzero(z <= tol_support)

    Ga = prob.G[active].toarray() if len(active) else np.zeros((0, prob.n))
    if len(active) and len(support):
        u_act, _ = nnls(Ga[:, support].T, grad[support], maxiter=50 * max(1, len(active)))
    else:
        u_act = np.zeros(len(active))
    GTu = Ga.T @ u_act
    stat = np.abs(GTu[support] - grad[support])
    dual = np.maximum(grad[off] - GTu[off], 0.0)
    comp = [u_act * np.maximum(slack[active], 0.0)]
    if len(off):
        comp.append(np.maximum(GTu[off] - grad[off], 0.0) * z[off])
    comp = np.concatenate(comp) if comp else np.zeros(0)

    nu, mu, other = {}, {}, {}
    for i, u in zip(active, u_act):
        lab = prob.row_labels[i]
        if lab[0] == "bs":
            nu[lab[1:]] = float(u)
        elif lab[0] == "user":
            mu[lab[1:]] = float(u)
        else:
            other[lab] = float(u)
    return KktReport(
        nu=nu, mu=mu, other=other,
        stationarity_residual=float(stat.max(initial=0.0)),
        complementarity_residual=float(comp.max(initial=0.0)),
        dual_feasibility_residual=float(dual.max(initial=0.0)),
        n_support=len(support), n_active=len(active),
    )


def _vector(prob, alloc):
    z = np.zeros(prob.n)
    for lab, i in prob.var_index.items():
        if lab[0] == "x":
            z[i] = alloc.x.get(lab[1:], 0.0)
        elif lab[0] == "lam":
            z[i] = alloc.lam.get(lab[1], 0.0)
    return z
