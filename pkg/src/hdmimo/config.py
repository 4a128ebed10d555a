"""Experiment configuration loaded from YAML, with strict key checking."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field

import yaml

from .rates import MRT, RICH, STRONGEST, ZF
from .topology import DEFAULT_NOISE_DBM, D_MIN_M, CheckerboardConfig, TierParams, desk_config, full_config

SCHEMES = ("max_sinr", "num_cellular", "num_distributed", "num_unique", "num_vq")
SCENARIOS = ("shared", "split")
PRESETS = {"desk": desk_config, "full": full_config}


class ConfigError(ValueError):
    pass


@dataclass
class TierSection:
    power_dbm: float | None = None
    antennas: int | None = None
    budget: int | list | None = None


@dataclass
class TopologySection:
    preset: str = "desk"
    extent: float | None = None
    grid_n: int | None = None
    macro_stride: int | None = None
    n_pico_rand: int | None = None
    n_users_white: int | None = None
    n_users_shaded: int | None = None
    l_max: int | None = None
    macro: TierSection = field(default_factory=TierSection)
    pico: TierSection = field(default_factory=TierSection)
    noise_dbm: float = DEFAULT_NOISE_DBM
    shadowing_std_db: float = 0.0
    d_min_m: float = D_MIN_M

    def checkerboard(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"topology.preset must be one of {sorted(PRESETS)}")
        base = PRESETS[self.preset]()
        over = {}
        for name in ("extent", "grid_n", "macro_stride", "n_pico_rand",
                     "n_users_white", "n_users_shaded", "l_max"):
            v = getattr(self, name)
            if v is not None:
                over[name] = v
        for tier in ("macro", "pico"):
            sec, old = getattr(self, tier), getattr(base, tier)
            budget = sec.budget if sec.budget is not None else old.budget
            over[tier] = TierParams(
                sec.power_dbm if sec.power_dbm is not None else old.power_dbm,
                sec.antennas if sec.antennas is not None else old.antennas,
                tuple(budget) if isinstance(budget, list) else budget)
        return dataclasses.replace(base, **over)


@dataclass
class RatesSection:
    precoder: str = ZF
    l_max: int | None = None
    candidate_mode: str = STRONGEST
    n_strongest: int | None = None


@dataclass
class NumSection:
    architecture: str = "ucs"
    rho: float = 0.2
    tol: float = 1e-8


@dataclass
class SchedulerSection:
    horizon: int = 10_000
    a_max: float | None = None
    v: float | None = None


@dataclass
class OracleSection:
    precoder: str = ZF
    antennas: list = field(default_factory=lambda: [100])
    loads: list = field(default_factory=lambda: [10])
    beta_db: list = field(default_factory=lambda: [-108.4])
    tx_power_dbm: list = field(default_factory=lambda: [46.0])
    noise_dbm: float = DEFAULT_NOISE_DBM
    cluster: list = field(default_factory=lambda: [0])
    trials: int = 1000


@dataclass
class ExperimentConfig:
    seed: int = 0
    out: str = "out"
    scenarios: list = field(default_factory=lambda: list(SCENARIOS))
    schemes: list = field(default_factory=lambda: list(SCHEMES))
    topology: TopologySection = field(default_factory=TopologySection)
    rates: RatesSection = field(default_factory=RatesSection)
    num: NumSection = field(default_factory=NumSection)
    scheduler: SchedulerSection = field(default_factory=SchedulerSection)
    oracle: OracleSection = field(default_factory=OracleSection)

    def validate(self):
        bad = [s for s in self.scenarios if s not in SCENARIOS]
        if bad:
            raise ConfigError(f"unknown scenarios {bad}; choose from {SCENARIOS}")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown schemes {bad}; choose from {SCHEMES}")
        if self.rates.precoder not in (ZF, MRT):
            raise ConfigError("rates.precoder must be 'zf' or 'mrt'")
        if self.oracle.precoder not in (ZF, MRT):
            raise ConfigError("oracle.precoder must be 'zf' or 'mrt'")
        if self.rates.candidate_mode not in (STRONGEST, RICH):
            raise ConfigError("rates.candidate_mode must be 'strongest' or 'rich'")
        if self.num.architecture not in ("ucs", "mcs"):
            raise ConfigError("num.architecture must be 'ucs' or 'mcs'")
        if not 0.0 < self.num.rho < 1.0:
            raise ConfigError("num.rho must lie strictly between 0 and 1")
        if self.scheduler.horizon < 1:
            raise ConfigError("scheduler.horizon must be positive")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        try:
            self.topology.checkerboard()
        except ValueError as exc:
            raise ConfigError(f"topology: {exc}") from exc
        return self

    def checkerboard(self) -> CheckerboardConfig:
        return self.topology.checkerboard()

    def l_max(self):
        return self.rates.l_max or self.checkerboard().l_max

    def to_dict(self):
        return dataclasses.asdict(self)


def _build(cls, data, path):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if known[name].default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{path}.{name}".lstrip("."))
        else:
            kwargs[name] = value
    return cls(**kwargs)


def from_dict(data) -> ExperimentConfig:
    return _build(ExperimentConfig, data or {}, "").validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return from_dict(data)


def stage_seed(master, stage):
    """Sub-seed for one pipeline stage: first 8 bytes of SHA-256("master:stage")."""
    digest = hashlib.sha256(f"{int(master)}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
