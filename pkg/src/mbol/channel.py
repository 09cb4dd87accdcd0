"""Array response vectors and geometric mmWave MISO channels."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .scenario import PathlossParams, ScenarioConfig

# truncation of the Laplacian path-angle scatter, in units of the spread
LAPLACE_TRUNCATION = 2.0


def steering_vector(n: int, angle_rad) -> np.ndarray:
    """Half-wavelength ULA response ``exp(j*pi*k*cos(theta)) / sqrt(n)``.

    ``angle_rad`` may be an array, in which case the result has shape
    ``(n, len(angle_rad))`` with one column per angle.
    """
    k = np.arange(n)
    angle = np.asarray(angle_rad, dtype=float)
    phase = np.pi * np.multiply.outer(k, np.cos(angle))
    return np.exp(1j * phase) / np.sqrt(n)


def pathloss_db(d_m: float, params: PathlossParams, shadow_db: float = 0.0) -> float:
    if d_m <= 0:
        raise ValueError(f"distance must be positive, got {d_m}")
    return params.epsilon_db + 10.0 * params.exponent * np.log10(d_m) + shadow_db


@dataclass(frozen=True)
class UserChannel:
    """Paths of one CU; ``h`` satisfies ``h^H = sum_i gain_i a^H(angle_i)``."""

    h: np.ndarray
    path_gains: np.ndarray
    path_angles_rad: np.ndarray
    pathloss_db: float
    shadow_db: float
    noise_power: float
    mean_angle_rad: float

    @property
    def n_paths(self) -> int:
        return len(self.path_gains)


@dataclass(frozen=True)
class ChannelSet:
    users: tuple
    n_tx: int
    seed: int | None = None

    @property
    def H(self) -> np.ndarray:
        """Channel matrix with one column ``h_m`` per CU (``n_tx x M``)."""
        if not self.users:
            return np.zeros((self.n_tx, 0), complex)
        return np.stack([u.h for u in self.users], axis=1)

    @property
    def noise_powers(self) -> np.ndarray:
        return np.array([u.noise_power for u in self.users])

    def __len__(self):
        return len(self.users)

    def to_json(self) -> str:
        users = []
        for u in self.users:
            users.append({
                "mean_angle_rad": u.mean_angle_rad,
                "path_angles_rad": u.path_angles_rad.tolist(),
                "path_gains_re": u.path_gains.real.tolist(),
                "path_gains_im": u.path_gains.imag.tolist(),
                "pathloss_db": u.pathloss_db,
                "shadow_db": u.shadow_db,
                "noise_power": u.noise_power,
            })
        return json.dumps({"n_tx": self.n_tx, "seed": self.seed, "users": users}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ChannelSet":
        d = json.loads(text)
        users = []
        for u in d["users"]:
            gains = np.asarray(u["path_gains_re"]) + 1j * np.asarray(u["path_gains_im"])
            users.append(user_channel_from_paths(
                d["n_tx"], u["path_angles_rad"], gains,
                pathloss_db=u["pathloss_db"], shadow_db=u["shadow_db"],
                noise_power=u["noise_power"], mean_angle_rad=u["mean_angle_rad"]))
        return cls(users=tuple(users), n_tx=d["n_tx"], seed=d["seed"])


def user_channel_from_paths(n_tx, angles_rad, gains, *, pathloss_db=0.0, shadow_db=0.0,
                            noise_power=1.0, mean_angle_rad=None) -> UserChannel:
    angles = np.asarray(angles_rad, dtype=float)
    gains = np.asarray(gains, dtype=complex)
    # h^H = sum_i g_i a^H(theta_i)  <=>  h = sum_i conj(g_i) a(theta_i)
    h = steering_vector(n_tx, angles) @ np.conj(gains)
    if mean_angle_rad is None:
        mean_angle_rad = float(np.mean(angles))
    return UserChannel(h=h, path_gains=gains, path_angles_rad=angles,
                       pathloss_db=float(pathloss_db), shadow_db=float(shadow_db),
                       noise_power=float(noise_power), mean_angle_rad=float(mean_angle_rad))


def truncated_laplace(rng, mean, scale, size, width=LAPLACE_TRUNCATION):
    """Inverse-CDF draw from a Laplacian truncated to ``mean +/- width*scale``."""
    dist = stats.laplace(loc=mean, scale=scale)
    lo, hi = dist.cdf(mean - width * scale), dist.cdf(mean + width * scale)
    return dist.ppf(rng.uniform(lo, hi, size=size))


def sample_channels(config: ScenarioConfig, rng: np.random.Generator,
                    shadowing: bool = True, noise_powers=None, seed=None) -> ChannelSet:
    """Draw one block-fading realisation for every CU.

    The mean departure angle of CU ``m`` is its configured angle; path
    angles scatter around it. ``noise_powers`` (linear, mW) overrides the
    common noise power per CU. ``seed`` is only recorded for replay.
    """
    n_tx, n_p = config.n_tx, config.n_paths
    gamma2 = n_tx / n_p
    if noise_powers is None:
        noise_powers = [config.noise_power_lin] * config.n_cu
    users = []
    for m in range(config.n_cu):
        shadow = rng.normal(0.0, config.pathloss.shadow_sigma_db) if shadowing else 0.0
        pl = pathloss_db(config.cu_distances_m[m], config.pathloss, shadow)
        mean = float(config.cu_angles_rad[m])
        angles = truncated_laplace(rng, mean, config.angular_spread_rad, n_p)
        var = gamma2 * 10.0 ** (-0.1 * pl)
        gains = np.sqrt(var / 2) * (rng.standard_normal(n_p) + 1j * rng.standard_normal(n_p))
        users.append(user_channel_from_paths(
            n_tx, angles, gains, pathloss_db=pl, shadow_db=shadow,
            noise_power=noise_powers[m], mean_angle_rad=mean))
    return ChannelSet(users=tuple(users), n_tx=n_tx, seed=seed)
