"""Auxiliary-variable update: per-CU projection onto the SINR cone.

Row ``m`` of the auxiliary matrix must satisfy

    sqrt(1 + 1/Gamma_m) |z_m| >= || [z; sigma_m] ||_2

which is ``|z_m|^2 >= Gamma_m (sum_{n != m} |z_n|^2 + sigma_m^2)``. The phase
of ``z_m`` is free, so aligning it with ``b_m`` reduces the projection to a
convex one in the plane ``(t, r) = (|z_m|, ||z_{-m}||)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

MAX_ROOT_ITERS = 200
FEAS_RTOL = 1e-12


class ProjectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class AuxMatrix:
    z: np.ndarray  # M x K
    noise: np.ndarray  # sigma_m, standard deviation per row
    thresholds: np.ndarray  # Gamma_m, linear

    def __post_init__(self):
        if np.any(np.asarray(self.thresholds) <= 0):
            raise ValueError("SINR thresholds must be positive")

    def residual(self, b) -> float:
        return float(np.sum(np.abs(b - self.z) ** 2))

    def soc_slack(self) -> np.ndarray:
        """Per-row ``sqrt(1+1/Gamma)|z_mm| - ||[z_m; sigma_m]||`` (>= 0 when feasible)."""
        return np.array([soc_slack(self.z[m], m, self.thresholds[m], self.noise[m])
                         for m in range(self.z.shape[0])])


def soc_slack(z, m, gamma, sigma) -> float:
    lhs = np.sqrt(1.0 + 1.0 / gamma) * abs(z[m])
    return float(lhs - np.sqrt(np.sum(np.abs(z) ** 2) + sigma ** 2))


def is_feasible(z, m, gamma, sigma, atol=0.0) -> bool:
    return soc_slack(z, m, gamma, sigma) >= -atol


def project_row(b, m: int, gamma: float, sigma: float) -> np.ndarray:
    """Nearest point to ``b`` satisfying the row-``m`` SINR cone."""
    if gamma <= 0 or sigma < 0:
        raise ValueError("need gamma > 0 and sigma >= 0")
    b = np.asarray(b, dtype=complex)
    scale = np.sqrt(np.sum(np.abs(b) ** 2) + sigma ** 2)
    if soc_slack(b, m, gamma, sigma) >= -FEAS_RTOL * scale:
        return b.copy()
    others = np.ones(len(b), bool)
    others[m] = False
    t0 = abs(b[m])
    r0 = float(np.linalg.norm(b[others]))
    sg = np.sqrt(gamma)

    if r0 == 0.0:
        r = 0.0
    else:
        # stationarity in r with the cone constraint active; increasing on
        # [r_min, r0] where the multiplier is non-negative
        def h(r):
            return r * (1.0 + gamma) - r0 - t0 * sg * r / np.sqrt(r * r + sigma ** 2) \
                if sigma > 0 or r > 0 else -r0

        r_min = np.sqrt(max(0.0, t0 ** 2 / gamma - sigma ** 2))
        r_min = min(r_min, r0)
        if h(r_min) >= 0:
            r = r_min
        else:
            try:
                r, res = optimize.brentq(h, r_min, r0, xtol=1e-15 * max(r0, 1.0), rtol=1e-15,
                                         maxiter=MAX_ROOT_ITERS, full_output=True)
            except RuntimeError as exc:
                raise ProjectionError(f"root finding did not converge: {exc}") from exc
            if not res.converged:
                raise ProjectionError(f"root finding did not converge, residual {h(r):.3e}")
    t = sg * np.sqrt(r * r + sigma ** 2)
    phase = b[m] / t0 if t0 > 0 else 1.0
    z = np.zeros_like(b)
    if r0 > 0:
        z[others] = b[others] * (r / r0)
    z[m] = t * phase
    return z


def project_rows(b: np.ndarray, thresholds, noise) -> AuxMatrix:
    """Project every CU row of ``b`` (``b[m, n] = h_m^H F_RF f_n``) independently."""
    b = np.asarray(b, dtype=complex)
    thresholds = np.asarray(thresholds, dtype=float)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (b.shape[0],)).copy()
    z = np.empty_like(b)
    for m in range(b.shape[0]):
        try:
            z[m] = project_row(b[m], m, thresholds[m], noise[m])
        except ProjectionError as exc:
            raise ProjectionError(f"row {m}: {exc}") from exc
    return AuxMatrix(z=z, noise=noise, thresholds=thresholds)


def precoder_products(H, rf, bb) -> np.ndarray:
    """``b[m, n] = h_m^H F_RF f_n`` for every CU ``m`` and stream ``n``."""
    return H.conj().T @ (rf @ bb)


def update_aux(p, ch, thresholds, prev: AuxMatrix | None = None) -> AuxMatrix:
    """Auxiliary update from a precoder and raw channels (noise std per CU).

    ``prev`` is accepted for symmetry with the alternating loop; the
    projection does not depend on it.
    """
    b = precoder_products(ch.H, p.rf, p.bb)
    return project_rows(b, thresholds, np.sqrt(ch.noise_powers))
