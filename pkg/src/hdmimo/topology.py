"""Network layouts and slow-fading link gains on a wrap-around plane.

Base stations and users live on a square torus of side ``extent`` meters.
The checkerboard layout splits the square into ``grid_n x grid_n`` tiles;
tile ``(i, j)`` is shaded when ``i + j`` is even.  Macros sit at the centers
of the shaded tiles whose row and column indices are both multiples of
``macro_stride``; every white tile gets a pico at its center, and every
shaded tile gets ``n_pico_rand`` picos dropped uniformly inside it.

All ids are zero-based.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MACRO = "macro"
PICO = "pico"
TIERS = (MACRO, PICO)

# (intercept dB, slope dB/decade), distance in km
PATHLOSS_MODELS = {
    MACRO: (128.1, 37.6),
    PICO: (140.7, 36.7),
}

D_MIN_M = 10.0
DEFAULT_NOISE_DBM = -104.0


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


def pathloss_db(tier, d_km, d_min_km=D_MIN_M / 1000.0):
    """Distance-based path loss in dB for a ``tier`` link at ``d_km`` km.

    Distances below ``d_min_km`` are clamped so the loss stays finite.
    """
    try:
        intercept, slope = PATHLOSS_MODELS[tier]
    except KeyError:
        raise ValueError(f"unknown tier {tier!r}") from None
    d = np.maximum(np.asarray(d_km, dtype=float), d_min_km)
    return intercept + slope * np.log10(d)


def budget_table(budget, l_max):
    """Expand a budget spec into ``(S(1), ..., S(l_max))``.

    An int ``c`` means the linear rule ``S(L) = c * L``; a sequence is taken
    as an explicit table and must cover ``l_max`` sizes.
    """
    if isinstance(budget, (int, np.integer)):
        return tuple(int(budget) * L for L in range(1, l_max + 1))
    table = tuple(int(s) for s in budget)
    if len(table) < l_max:
        raise ValueError(f"budget table {table} shorter than l_max={l_max}")
    return table[:l_max]


@dataclass(frozen=True)
class TierParams:
    power_dbm: float
    antennas: int
    budget: int | tuple[int, ...]


@dataclass(frozen=True)
class BaseStation:
    id: int
    position: tuple[float, float]
    tier: str
    tx_power: float
    antennas: int
    budgets: tuple[int, ...]

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        if not self.tx_power > 0:
            raise ValueError(f"BS {self.id}: tx_power must be positive")
        if not self.budgets:
            raise ValueError(f"BS {self.id}: empty budget table")
        s1 = self.budgets[0]
        for L, s in enumerate(self.budgets, start=1):
            if s < 1:
                raise ValueError(f"BS {self.id}: S({L})={s} < 1")
            if s > self.antennas:
                raise ValueError(f"BS {self.id}: S({L})={s} exceeds M={self.antennas}")
            if not s1 <= s <= L * s1:
                raise ValueError(f"BS {self.id}: S({L})={s} outside [S(1), L*S(1)]")

    def budget(self, L):
        return self.budgets[L - 1]


@dataclass(frozen=True)
class User:
    id: int
    position: tuple[float, float]


@dataclass(frozen=True)
class CheckerboardConfig:
    extent: float = 2000.0
    grid_n: int = 4
    macro_stride: int = 2
    n_pico_rand: int = 3
    n_users_white: int = 15
    n_users_shaded: int = 90
    l_max: int = 4
    macro: TierParams = field(default_factory=lambda: TierParams(46.0, 100, 10))
    pico: TierParams = field(default_factory=lambda: TierParams(35.0, 40, 4))

    def __post_init__(self):
        if not self.extent > 0 or self.grid_n < 1:
            raise ValueError("checkerboard tiles must have positive area")
        if self.macro_stride < 1:
            raise ValueError("macro_stride must be >= 1")
        counts = (self.n_pico_rand, self.n_users_white, self.n_users_shaded)
        if min(counts) < 0:
            raise ValueError("negative per-tile counts")
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")

    @property
    def tile(self):
        return self.extent / self.grid_n


def full_config(**overrides):
    """The 2000 m layout: 4 macros, 32 picos, 840 users."""
    return CheckerboardConfig(**overrides)


def desk_config(**overrides):
    """A 1000 m cut of the same layout: 1 macro, 8 picos, same tile density."""
    params = dict(extent=1000.0, grid_n=2)
    params.update(overrides)
    return CheckerboardConfig(**params)


def _tiles(grid_n):
    for i in range(grid_n):
        for j in range(grid_n):
            yield i, j, (i + j) % 2 == 0


def build_checkerboard(config, seed):
    """Drop base stations and users on the checkerboard.

    Returns ``(bss, users)``.  Identical ``(config, seed)`` gives identical
    coordinates.
    """
    rng = np.random.default_rng(seed)
    a = config.tile
    macro_budget = budget_table(config.macro.budget, config.l_max)
    pico_budget = budget_table(config.pico.budget, config.l_max)
    macro_power = float(dbm_to_watts(config.macro.power_dbm))
    pico_power = float(dbm_to_watts(config.pico.power_dbm))

    def station(pos, tier):
        if tier == MACRO:
            return BaseStation(len(bss), pos, MACRO, macro_power,
                               config.macro.antennas, macro_budget)
        return BaseStation(len(bss), pos, PICO, pico_power,
                           config.pico.antennas, pico_budget)

    bss = []
    for i, j, shaded in _tiles(config.grid_n):
        if shaded and i % config.macro_stride == 0 and j % config.macro_stride == 0:
            bss.append(station(((i + 0.5) * a, (j + 0.5) * a), MACRO))
    for i, j, shaded in _tiles(config.grid_n):
        if shaded:
            for _ in range(config.n_pico_rand):
                xy = rng.uniform(0.0, a, size=2) + (i * a, j * a)
                bss.append(station((float(xy[0]), float(xy[1])), PICO))
        else:
            bss.append(station(((i + 0.5) * a, (j + 0.5) * a), PICO))

    users = []
    for i, j, shaded in _tiles(config.grid_n):
        n = config.n_users_shaded if shaded else config.n_users_white
        xy = rng.uniform(0.0, a, size=(n, 2)) + (i * a, j * a)
        for x, y in xy:
            users.append(User(len(users), (float(x), float(y))))
    return bss, users


def wrap_distance(p, q, extent):
    """Toroidal distance between point arrays ``p`` (..., 2) and ``q`` (..., 2)."""
    d = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)) % extent
    d = np.minimum(d, extent - d)
    return np.hypot(d[..., 0], d[..., 1])


@dataclass(frozen=True, eq=False)
class LinkGainMap:
    """Slow-fading gains ``beta[k, j]`` plus the per-BS radio parameters."""

    beta: np.ndarray
    tx_power: np.ndarray
    antennas: np.ndarray
    budgets: np.ndarray
    noise_power: float
    extent: float = 0.0
    seed: int | None = None
    tiers: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("beta", "tx_power", "antennas", "budgets"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        K, J = self.beta.shape
        if self.tx_power.shape != (J,) or self.antennas.shape != (J,):
            raise ValueError("per-BS arrays must have length J")
        if self.budgets.ndim != 2 or self.budgets.shape[0] != J:
            raise ValueError("budgets must be shaped (J, l_max)")
        if not self.noise_power > 0:
            raise ValueError("noise power must be positive")
        if np.any(self.beta < 0):
            raise ValueError("negative link gain")

    @property
    def n_users(self):
        return self.beta.shape[0]

    @property
    def n_bs(self):
        return self.beta.shape[1]

    @property
    def l_max(self):
        return self.budgets.shape[1]

    def received_power(self):
        """``P_j * beta[k, j]`` for every pair."""
        return self.beta * self.tx_power

    def with_beta(self, beta):
        return LinkGainMap(beta, self.tx_power, self.antennas, self.budgets,
                           self.noise_power, self.extent, self.seed, self.tiers)

    def subset_bs(self, bs_ids):
        """Restrict to a subset of BSs (other BSs vanish from the network)."""
        idx = np.asarray(bs_ids, dtype=int)
        tiers = tuple(self.tiers[i] for i in idx) if self.tiers else ()
        return LinkGainMap(self.beta[:, idx], self.tx_power[idx], self.antennas[idx],
                           self.budgets[idx], self.noise_power, self.extent,
                           self.seed, tiers)


def compute_link_gains(bss, users, extent, noise_power=None, shadowing_std_db=0.0,
                       seed=None, d_min=D_MIN_M):
    """Path loss (plus optional i.i.d. log-normal shadowing) for all pairs."""
    if noise_power is None:
        noise_power = float(dbm_to_watts(DEFAULT_NOISE_DBM))
    bs_pos = np.array([b.position for b in bss], dtype=float).reshape(-1, 2)
    ue_pos = np.array([u.position for u in users], dtype=float).reshape(-1, 2)
    d_km = wrap_distance(ue_pos[:, None, :], bs_pos[None, :, :], extent) / 1000.0
    pl = np.empty_like(d_km)
    for col, b in enumerate(bss):
        pl[:, col] = pathloss_db(b.tier, d_km[:, col], d_min / 1000.0)
    if shadowing_std_db > 0:
        shadow_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
        pl = pl + shadow_rng.normal(0.0, shadowing_std_db, size=pl.shape)
    beta = 10.0 ** (-pl / 10.0)
    l_max = min(len(b.budgets) for b in bss)
    return LinkGainMap(
        beta=beta,
        tx_power=np.array([b.tx_power for b in bss]),
        antennas=np.array([b.antennas for b in bss], dtype=int),
        budgets=np.array([b.budgets[:l_max] for b in bss], dtype=int),
        noise_power=float(noise_power),
        extent=float(extent),
        seed=seed,
        tiers=tuple(b.tier for b in bss),
    )


def write_gains_csv(gains, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "bs_id", "beta_linear"])
        K, J = gains.beta.shape
        for k in range(K):
            for j in range(J):
                w.writerow([k, j, repr(float(gains.beta[k, j]))])


def read_gains_csv(path, template=None):
    """Load a beta matrix written by :func:`write_gains_csv`.

    With a ``template`` map, returns a copy of it carrying the loaded gains;
    otherwise returns the bare ``(K, J)`` array.
    """
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append((int(rec["user_id"]), int(rec["bs_id"]), float(rec["beta_linear"])))
    K = 1 + max(r[0] for r in rows)
    J = 1 + max(r[1] for r in rows)
    beta = np.zeros((K, J))
    for k, j, b in rows:
        beta[k, j] = b
    return beta if template is None else template.with_beta(beta)


def make_gains(beta, tx_power, antennas, budgets, noise_power=1.0):
    """Hand-built gain map, mostly for small worked instances."""
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    J = beta.shape[1]
    tx_power = np.broadcast_to(np.asarray(tx_power, dtype=float), (J,))
    antennas = np.broadcast_to(np.asarray(antennas, dtype=int), (J,))
    budgets = np.asarray(budgets, dtype=int)
    if budgets.ndim == 1:
        budgets = np.broadcast_to(budgets, (J, budgets.shape[0]))
    return LinkGainMap(beta, tx_power, antennas, budgets, float(noise_power))


def budgets_of(bss: Sequence[BaseStation], l_max):
    return np.array([b.budgets[:l_max] for b in bss], dtype=int)
