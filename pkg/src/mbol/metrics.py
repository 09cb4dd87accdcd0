"""Figures of merit: beampattern, SBP gain, SINR, sum rate, IMSR, beam weights."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .channel import ChannelSet, steering_vector


class DegeneratePatternError(ValueError):
    """A pattern for which a ratio metric is undefined (zero denominator)."""


@dataclass(frozen=True)
class HybridPrecoder:
    rf: np.ndarray  # N_t x M_t, unit modulus
    bb: np.ndarray  # M_t x K

    @property
    def full(self) -> np.ndarray:
        return self.rf @ self.bb

    @property
    def power(self) -> float:
        return float(np.linalg.norm(self.full) ** 2)

    @property
    def n_tx(self) -> int:
        return self.rf.shape[0]

    def normalized(self, p_tx: float) -> "HybridPrecoder":
        """Scale the BB part so that ``||F_RF F_BB||_F^2 == p_tx``."""
        scale = np.sqrt(p_tx) / np.linalg.norm(self.full)
        return HybridPrecoder(self.rf, self.bb * scale)


@dataclass(frozen=True)
class BeamWeights:
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"beam weights must lie on the simplex, got {w}")
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, n_beams: int) -> "BeamWeights":
        return cls(np.full(n_beams, 1.0 / n_beams))


def beampattern_gain(p: HybridPrecoder, angle):
    """``chi(theta) = ||a^H(theta) F_RF F_BB||^2``; vectorised over ``angle``."""
    a = steering_vector(p.n_tx, angle)
    y = a.conj().T @ p.full if a.ndim == 2 else a.conj() @ p.full
    return np.sum(np.abs(y) ** 2, axis=-1)


def sbp_gain(weights: BeamWeights, p: HybridPrecoder, beam_angles) -> float:
    """Weighted SBP gain with squared per-beam quadratic forms."""
    chi = beampattern_gain(p, np.asarray(beam_angles, dtype=float))
    w = weights.w if isinstance(weights, BeamWeights) else np.asarray(weights)
    if len(w) != len(chi):
        raise ValueError("one weight per beam angle required")
    return float(np.dot(w, chi ** 2))


def sbp_linear(p: HybridPrecoder, beam_angles, weights=None) -> float:
    """Weighted sum of ``chi`` at the beam angles (the form the optimizer maximizes).

    Uniform weights when ``weights`` is None.
    """
    chi = beampattern_gain(p, np.asarray(beam_angles, dtype=float))
    if weights is None:
        return float(np.mean(chi))
    w = weights.w if isinstance(weights, BeamWeights) else np.asarray(weights)
    return float(np.dot(w, chi))


def sinr(ch: ChannelSet, p: HybridPrecoder, m: int) -> float:
    """SINR of CU ``m`` (0-based); every other stream counts as interference."""
    g = np.abs(ch.users[m].h.conj() @ p.full) ** 2
    interference = g.sum() - g[m]
    return float(g[m] / (interference + ch.users[m].noise_power))


def sinrs(ch: ChannelSet, p: HybridPrecoder) -> np.ndarray:
    return np.array([sinr(ch, p, m) for m in range(len(ch))])


def sum_rate(ch: ChannelSet, p: HybridPrecoder) -> float:
    return float(np.sum(np.log2(1.0 + sinrs(ch, p))))


def _pattern_fn(pattern):
    if isinstance(pattern, HybridPrecoder):
        return lambda th: beampattern_gain(pattern, th)
    return pattern


def imsr(pattern, theta0_rad=np.deg2rad(40.0), delta_rad=np.deg2rad(20.0),
         grid_size: int = 2048) -> float:
    """Integrated mainlobe-to-sidelobe ratio over ``[-pi/2, pi/2]``.

    ``pattern`` is a HybridPrecoder or a vectorised callable ``theta -> gain``.
    The uniform grid is augmented with the region edges so every region is
    integrated by the trapezoid rule without edge truncation.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    lo, hi = theta0_rad - delta_rad / 2, theta0_rad + delta_rad / 2
    if not (-np.pi / 2 < lo < hi < np.pi / 2):
        raise ValueError("mainlobe must lie inside (-pi/2, pi/2)")
    fn = _pattern_fn(pattern)
    grid = np.linspace(-np.pi / 2, np.pi / 2, grid_size)
    grid = np.union1d(grid, [lo, hi])
    gain = np.asarray(fn(grid), dtype=float)

    def integrate(a, b):
        sel = (grid >= a) & (grid <= b)
        return trapezoid(gain[sel], grid[sel])

    main = integrate(lo, hi)
    side = integrate(-np.pi / 2, lo) + integrate(hi, np.pi / 2)
    if side <= 0.0:
        raise DegeneratePatternError("sidelobe integral is zero; IMSR undefined")
    return float(main / side)


def beam_weights(p: HybridPrecoder, beam_angles) -> BeamWeights:
    """Minimum-MSE beam weights computed from ``chi`` at the beam angles."""
    chi = beampattern_gain(p, np.asarray(beam_angles, dtype=float))
    return beam_weights_from_chi(chi)


def beam_weights_from_chi(chi) -> BeamWeights:
    chi = np.asarray(chi, dtype=float)
    if np.any(chi <= 0):
        raise ZeroDivisionError(f"beampattern gain vanishes at a beam angle: {chi}")
    ratios = chi[-1] ** 2 / chi[:-1] ** 2
    head = ratios / (1.0 + ratios.sum())
    w = np.append(head, 1.0 - head.sum())
    return BeamWeights(w)


def beampattern_sweep(p: HybridPrecoder, angles_deg=None):
    """``(angle_deg, gain_db)`` over a 1 degree grid by default."""
    if angles_deg is None:
        angles_deg = np.arange(-90.0, 90.0 + 0.5, 1.0)
    angles_deg = np.asarray(angles_deg, dtype=float)
    gain = beampattern_gain(p, np.deg2rad(angles_deg))
    with np.errstate(divide="ignore"):
        return angles_deg, 10.0 * np.log10(gain)


def write_beampattern_csv(path, angles_deg, gain_db, extra=None):
    """Write columns ``angle_deg, gain_db`` (plus any named ``extra`` columns)."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["angle_deg", "gain_db", *extra])
        for i, a in enumerate(angles_deg):
            wr.writerow([f"{a:.6g}", f"{gain_db[i]:.10g}", *(f"{v[i]:.10g}" for v in extra.values())])


def metric_record(ch: ChannelSet, p: HybridPrecoder, beam_angles, weights: BeamWeights,
                  theta0_rad=np.deg2rad(40.0), delta_rad=np.deg2rad(20.0)) -> dict:
    """JSON-serialisable summary of one precoder."""
    chi = beampattern_gain(p, np.asarray(beam_angles, dtype=float))
    rec = {
        "power": p.power,
        "chi": chi.tolist(),
        "weights": weights.w.tolist(),
        "sbp": sbp_gain(weights, p, beam_angles),
        "sbp_linear": sbp_linear(p, beam_angles),
        "imsr": imsr(p, theta0_rad, delta_rad),
    }
    if len(ch):
        s = sinrs(ch, p)
        rec["sinr_db"] = (10 * np.log10(s)).tolist()
        rec["sum_rate"] = float(np.sum(np.log2(1 + s)))
    return rec


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, indent=2)
