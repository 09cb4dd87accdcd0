"""Scenario configuration, validation and seed plumbing."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised when a scenario violates one of its invariants."""


@dataclass(frozen=True)
class PathlossParams:
    epsilon_db: float = 61.4
    exponent: float = 2.0
    shadow_sigma_db: float = 5.8


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and algorithmic parameters of one experiment.

    Angles are in degrees and powers in dB/dBm at this boundary; the
    ``*_rad`` / ``*_lin`` properties give the internal representation.
    """

    n_tx: int = 64
    n_rf: int = 6
    n_cu: int = 3
    n_beams: int = 3
    cu_angles_deg: tuple = (-60.0, -40.0, -20.0)
    cu_distances_m: tuple = (20.0, 20.0, 20.0)
    object_sector_deg: tuple = (30.0, 50.0)
    p_tx_dbm: float = 10.0
    noise_power_dbm: float = -91.0
    sinr_thresholds_db: tuple = (0.0, 0.0, 0.0)
    n_paths: int = 10
    angular_spread_rad: float = math.pi / 128
    pathloss: PathlossParams = field(default_factory=PathlossParams)
    penalty_init: float = 1e-3
    penalty_shrink: float = 0.5
    tol_inner: float = 1e-3
    tol_outer: float = 1e-4
    tol_linesearch: float = 1e-6
    max_outer: int = 30
    max_inner: int = 20
    max_rcg_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        # lists from JSON/CLI become tuples so the config stays hashable
        for name in ("cu_angles_deg", "cu_distances_m", "object_sector_deg",
                     "sinr_thresholds_db"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if isinstance(self.pathloss, dict):
            object.__setattr__(self, "pathloss", PathlossParams(**self.pathloss))

    @property
    def cu_angles_rad(self) -> np.ndarray:
        return np.deg2rad(self.cu_angles_deg)

    @property
    def p_tx_lin(self) -> float:
        """Total transmit power in mW."""
        return 10.0 ** (self.p_tx_dbm / 10.0)

    @property
    def noise_power_lin(self) -> float:
        return 10.0 ** (self.noise_power_dbm / 10.0)

    @property
    def sinr_thresholds_lin(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.sinr_thresholds_db) / 10.0)

    @property
    def beam_angles_rad(self) -> np.ndarray:
        return np.deg2rad(beam_angles_deg(self.object_sector_deg, self.n_beams))

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def beam_angles_deg(sector, n_beams: int) -> np.ndarray:
    """Centres of ``n_beams`` equal sub-sectors of ``sector``."""
    lo, hi = sector
    span = hi - lo
    return lo + (np.arange(1, n_beams + 1) - 0.5) * span / n_beams


def validate(config: ScenarioConfig) -> ScenarioConfig:
    """Return ``config`` unchanged if it is consistent, else raise ConfigError."""
    c = config
    for name in ("n_tx", "n_rf", "n_cu", "n_beams", "n_paths",
                 "max_outer", "max_inner", "max_rcg_iters"):
        v = getattr(c, name)
        if not isinstance(v, (int, np.integer)) or v < 1:
            raise ConfigError(f"{name} must be a positive integer, got {v!r}")
    if c.n_rf != c.n_cu + c.n_beams:
        raise ConfigError(
            f"n_rf ({c.n_rf}) must equal n_cu + n_beams ({c.n_cu} + {c.n_beams})")
    if c.n_rf > c.n_tx:
        raise ConfigError(f"n_rf ({c.n_rf}) exceeds n_tx ({c.n_tx})")
    for name in ("cu_angles_deg", "cu_distances_m", "sinr_thresholds_db"):
        if len(getattr(c, name)) != c.n_cu:
            raise ConfigError(f"len({name}) = {len(getattr(c, name))} != n_cu = {c.n_cu}")
    if any(d <= 0 for d in c.cu_distances_m):
        raise ConfigError("cu_distances_m must be positive")
    if len(c.object_sector_deg) != 2 or not c.object_sector_deg[0] < c.object_sector_deg[1]:
        raise ConfigError(f"object_sector_deg must be (lower, upper) with lower < upper, "
                          f"got {c.object_sector_deg}")
    if not 0.0 < c.penalty_shrink < 1.0:
        raise ConfigError(f"penalty_shrink must lie in (0, 1), got {c.penalty_shrink}")
    for name in ("angular_spread_rad", "penalty_init", "tol_inner", "tol_outer",
                 "tol_linesearch"):
        if not getattr(c, name) > 0:
            raise ConfigError(f"{name} must be positive, got {getattr(c, name)}")
    if not (isinstance(c.seed, (int, np.integer)) and c.seed >= 0):
        raise ConfigError(f"seed must be an unsigned integer, got {c.seed!r}")
    return c


def default_paper_scenario() -> ScenarioConfig:
    """The published simulation setup (64 antennas, 6 RF chains, 3 CUs, 3 beams)."""
    return ScenarioConfig(angular_spread_rad=math.pi / (2 * 64))


def desk_scenario(**overrides) -> ScenarioConfig:
    """Reduced-size scenario used by the harness defaults (16 antennas, 2 CUs, 3 beams)."""
    base = dict(
        n_tx=16, n_rf=5, n_cu=2, n_beams=3,
        cu_angles_deg=(-60.0, -40.0), cu_distances_m=(20.0, 20.0),
        sinr_thresholds_db=(0.0, 0.0), angular_spread_rad=math.pi / (2 * 16),
    )
    base.update(overrides)
    return validate(ScenarioConfig(**base))


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return validate(ScenarioConfig.from_dict(json.load(fh)))


def save_config(config: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2)


def trial_rng(root_seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Generator for ``trial`` derived from ``root_seed`` by counter.

    ``stream`` separates independent uses within one trial (channels vs.
    optimizer initialisation).
    """
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=(int(trial), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))
