"""Log-barrier interior-point method for sum-log-utility programs.

Solves::

    maximize    sum_k log((A z)_k)
    subject to  G z <= h,  z >= 0

where every row of ``A`` is nonnegative.  The iterate stays strictly
feasible, so the returned point satisfies every constraint exactly; the
duality gap is bounded by ``m / t`` with ``m`` the number of inequalities.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


@dataclass
class LogUtilityProblem:
    A: sp.csr_matrix
    G: sp.csr_matrix
    h: np.ndarray
    z0: np.ndarray
    var_labels: list = field(default_factory=list)
    row_labels: list = field(default_factory=list)
    user_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A)
        self.G = sp.csr_matrix(self.G)
        self.h = np.asarray(self.h, dtype=float)
        self.z0 = np.asarray(self.z0, dtype=float)
        self.var_index = {lab: i for i, lab in enumerate(self.var_labels)}

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.G.shape[0] + self.n

    def utility(self, z):
        R = self.A @ z
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(R)))

    def violation(self, z):
        """Largest violation of ``G z <= h`` and ``z >= 0`` (0 when feasible)."""
        v = max(0.0, float(np.max(-z, initial=0.0)))
        if self.G.shape[0]:
            v = max(v, float(np.max(self.G @ z - self.h, initial=0.0)))
        return v

    def slack(self, z):
        return self.h - self.G @ z


@dataclass
class BarrierResult:
    z: np.ndarray
    objective: float
    gap: float
    row_dual: np.ndarray
    bound_dual: np.ndarray
    newton_steps: int
    t: float


def _newton_step(A, G, z, Az, s, t, g):
    """Newton direction of the barrier function at ``z``.

    Solves the augmented quasi-definite system::

        [ Z^-2   A^T        G^T  ] [dz]   [-g]
        [ A     -Az^2 / t   0    ] [u ] = [ 0]
        [ G      0         -s^2  ] [v ]   [ 0]

    whose Schur complement is the barrier Hessian.  Forming the Hessian
    directly squares ``1 / s`` and loses all precision once constraints are
    nearly active; the augmented form keeps every entry at its natural
    scale.  Variables are scaled by ``z`` and rows to unit norm first.
    """
    n = len(z)
    Az_ = A @ sp.diags(z)
    Gz_ = G @ sp.diags(z)
    ra = 1.0 / np.maximum(np.sqrt(np.asarray(Az_.multiply(Az_).sum(axis=1)).ravel()), 1e-300)
    rg = np.sqrt(np.asarray(Gz_.multiply(Gz_).sum(axis=1)).ravel())
    rg = np.where(rg > 0, 1.0 / np.where(rg > 0, rg, 1.0), 1.0)
    Ah = sp.diags(ra) @ Az_
    Gh = sp.diags(rg) @ Gz_
    K = sp.bmat([
        [sp.identity(n), Ah.T, Gh.T],
        [Ah, sp.diags(-(ra * Az) ** 2 / t), None],
        [Gh, None, sp.diags(-(rg * s) ** 2)],
    ], format="csc")
    rhs = np.zeros(K.shape[0])
    rhs[:n] = -z * g
    # quasi-definite, so a symmetric fill-reducing ordering is safe
    lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.01,
                   options=dict(SymmetricMode=True))
    return z * lu.solve(rhs)[:n]


def _max_step(v, dv):
    """Largest s in (0, 1] keeping ``v + s dv > 0`` (with a 0.99 margin)."""
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, 0.99 * float(np.min(-v[neg] / dv[neg])))


def solve(prob, tol=1e-8, mu=20.0, t0=1.0, inner_tol=1e-10, max_newton=100):
    A, G, h = prob.A, prob.G, prob.h
    AT, GT = A.T.tocsr(), G.T.tocsr()
    z = prob.z0.copy()
    if np.any(z <= 0) or np.any(A @ z <= 0) or np.any(prob.slack(z) <= 0):
        raise ValueError("starting point is not strictly feasible")
    m = prob.m
    t = t0
    steps = 0

    def phi(z, t):
        Az = A @ z
        s = h - G @ z
        if np.any(Az <= 0) or np.any(s <= 0) or np.any(z <= 0):
            return np.inf
        return -t * np.sum(np.log(Az)) - np.sum(np.log(s)) - np.sum(np.log(z))

    while True:
        stalls = 0
        prev = np.inf
        for _ in range(max_newton):
            Az = A @ z
            s = h - G @ z
            g = -t * (AT @ (1.0 / Az)) + GT @ (1.0 / s) - 1.0 / z
            dz = _newton_step(A, G, z, Az, s, t, g)
            dec = -float(g @ dz)
            if dec / 2.0 <= inner_tol:
                break
            if dec < 0.25:
                # quadratic region: a decrement that stops shrinking means
                # round-off has taken over
                stalls = stalls + 1 if dec > 0.25 * prev else 0
                if stalls >= 3:
                    break
            prev = dec
            steps += 1
            step = min(_max_step(z, dz), _max_step(s, -(G @ dz)), _max_step(Az, A @ dz))
            if dec >= 0.25:
                # damped phase; inside the quadratic region phi is too flat
                # for an Armijo test to resolve in floating point
                f0 = phi(z, t)
                while step > 1e-16:
                    if phi(z + step * dz, t) <= f0 - 0.01 * step * dec:
                        break
                    step *= 0.5
                else:
                    log.debug("line search stalled at t=%g", t)
                    break
            z = z + step * dz
        else:
            log.warning("centering hit max_newton=%d at t=%g", max_newton, t)
        if m / t <= tol:
            break
        t *= mu

    s = h - G @ z
    return BarrierResult(
        z=z,
        objective=prob.utility(z),
        gap=m / t,
        row_dual=1.0 / (t * s),
        bound_dual=1.0 / (t * z),
        newton_steps=steps,
        t=t,
    )
