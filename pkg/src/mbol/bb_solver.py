"""Baseband-precoder update.

For fixed ``F_RF`` and ``zeta`` the BB objective is, column by column,

    U(F) = -sum_l w_l ||a~_l^H F||^2 + alpha/2 ||H~^H F - Z||_F^2

with ``H~ = F_RF^H H`` and ``a~_l = F_RF^H a(theta_l)``. Its stationarity
system is ``A f_m = r_m`` where ``A = alpha H~ H~^H - 2 sum_l w_l a~_l a~_l^H``
and ``r_m = alpha H~ z_m``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

RIDGE_REL = 1e-6
GRAM_RTOL = 1e-10


class SingularSystemError(np.linalg.LinAlgError):
    def __init__(self, msg, min_eig):
        super().__init__(f"{msg} (min eigenvalue {min_eig:.3e})")
        self.min_eig = min_eig


@dataclass(frozen=True)
class BbSystem:
    """Effective channels ``h_eff`` (``M_t x M``), beams ``a_eff`` (``M_t x L``)."""

    h_eff: np.ndarray
    a_eff: np.ndarray
    weights: np.ndarray
    alpha: float
    zeta: np.ndarray  # M x K

    @classmethod
    def from_rf(cls, rf, H, beams, weights, alpha, zeta):
        return cls(rf.conj().T @ H, rf.conj().T @ beams, np.asarray(weights, float),
                   float(alpha), np.asarray(zeta))

    def stationarity_matrix(self, literal: bool = False) -> np.ndarray:
        """``A`` as derived from the objective, or the identity-shift variant if ``literal``."""
        m_t = self.h_eff.shape[0]
        hh = self.alpha * self.h_eff @ self.h_eff.conj().T
        if literal:
            return hh - 2.0 * np.eye(m_t)
        return hh - 2.0 * (self.a_eff * self.weights) @ self.a_eff.conj().T

    def rhs(self) -> np.ndarray:
        return self.alpha * self.h_eff @ self.zeta

    def objective(self, bb) -> float:
        sbp = np.sum(self.weights * np.sum(np.abs(self.a_eff.conj().T @ bb) ** 2, axis=1))
        pen = np.sum(np.abs(self.h_eff.conj().T @ bb - self.zeta) ** 2)
        return float(-sbp + 0.5 * self.alpha * pen)

    def gradient(self, bb) -> np.ndarray:
        """``2 dU/dF*``; zero exactly at stationary points."""
        return self.stationarity_matrix() @ bb - self.rhs()


@dataclass
class BbInfo:
    ridge: float = 0.0
    min_eig: float = np.nan
    multiplier: float = 0.0
    hard_case: bool = False
    notes: list = field(default_factory=list)


def _hermitize(a):
    return 0.5 * (a + a.conj().T)


def update_bb(sys: BbSystem, literal: bool = False, info: BbInfo | None = None) -> np.ndarray:
    """Solve the stationarity system ``A F = R`` for all streams at once.

    If ``A`` is not comfortably positive definite (min eigenvalue below
    ``1e-6 ||A||``), a ridge lifting it to that level is added and recorded
    in ``info``. ``literal`` uses ``alpha H~ H~^H - 2 I`` for ``A``.
    """
    info = info if info is not None else BbInfo()
    a = _hermitize(sys.stationarity_matrix(literal))
    lam = np.linalg.eigvalsh(a)
    info.min_eig = float(lam[0])
    delta = RIDGE_REL * max(np.abs(lam).max(), np.finfo(float).tiny)
    if lam[0] < delta:
        info.ridge = float(delta - lam[0])
        a = a + info.ridge * np.eye(a.shape[0])
    try:
        c, low = linalg.cho_factor(a)
    except linalg.LinAlgError as exc:
        raise SingularSystemError("stationarity matrix not positive definite", lam[0]) from exc
    return linalg.cho_solve((c, low), sys.rhs())


def update_bb_power(sys: BbSystem, gram: np.ndarray, p_max: float,
                    info: BbInfo | None = None, spare_column: int | None = None,
                    prev: np.ndarray | None = None) -> np.ndarray:
    """Global minimiser of the BB objective subject to ``tr(F^H G F) <= p_max``.

    ``gram`` is ``F_RF^H F_RF`` so the constraint is the true transmit power.
    This is a trust-region subproblem: the solution is
    ``(A + mu G)^{-1} R`` with ``mu >= max(0, -lambda_min(G^{-1/2} A G^{-1/2}))``
    chosen so the power constraint is met (``mu = 0`` reproduces the plain
    stationarity solve when that one is feasible). In the hard case the
    remaining power goes along the minimal generalised eigenvector, in
    ``spare_column`` (defaults to the column with the largest projection on
    that eigenvector).

    When ``F_RF`` is rank deficient the minimiser is only unique up to the
    null space of ``F_RF``; that component is copied from ``prev`` (the
    minimiser closest to it) or set to zero.
    """
    info = info if info is not None else BbInfo()
    a = _hermitize(sys.stationarity_matrix())
    r = sys.rhs()
    # whitened problem in g = S^{1/2} V^H f over the range of G = V S V^H;
    # components of f in the null space of F_RF do not change F_RF f
    s, v = np.linalg.eigh(_hermitize(gram))
    keep = s > GRAM_RTOL * s.max()
    t = v[:, keep] / np.sqrt(s[keep])  # f = t g
    a_w = _hermitize(t.conj().T @ a @ t)
    r_w = t.conj().T @ r
    lam, u = np.linalg.eigh(a_w)
    c = u.conj().T @ r_w  # coefficients per eigenvector (rows) and column
    cn2 = np.sum(np.abs(c) ** 2, axis=1)
    info.min_eig = float(lam[0])

    # the multiplier is parametrised by its offset x above the admissible
    # bound mu_lo, so that the denominators (lam - lam_min) + x keep full
    # relative precision near the pole
    mu_lo = max(0.0, -lam[0])
    base = lam + mu_lo
    base[0] = max(base[0], 0.0)

    def power(x):
        with np.errstate(divide="ignore"):
            return float(np.sum(cn2 / (base + x) ** 2))

    def solve(x):
        return u @ (c / (base + x)[:, None])

    scale = max(np.abs(lam).max(), 1e-300)
    if lam[0] > 1e-12 * scale and power(0.0) <= p_max:
        g = solve(0.0)
        info.multiplier = 0.0
    else:
        pd = lam[0] > 1e-12 * scale
        # smallest offset resolvable against the spectrum
        x_min = 0.0 if pd else 1e-13 * scale
        if not pd and power(x_min) <= p_max:
            # hard case: the constraint cannot be met by the multiplier
            # alone; the spare power goes along the minimal eigenvector
            info.hard_case = True
            info.multiplier = mu_lo
            free = base <= x_min
            coef = np.zeros_like(c)
            coef[~free] = c[~free] / base[~free][:, None]
            g = u @ coef
            v_min = u[:, 0]
            col = spare_column
            if col is None:
                col = int(np.argmax(np.abs(c[0]))) if np.any(c[0]) else c.shape[1] - 1
            spare = max(p_max - float(np.sum(np.abs(g) ** 2)), 0.0)
            b = np.real(np.vdot(v_min, g[:, col]))
            g[:, col] += (-b + np.sqrt(b * b + spare)) * v_min
        else:
            hi = np.sqrt(cn2.sum() / p_max) + 1.0
            while power(hi) > p_max:
                hi = 2.0 * hi
            # power(x) is strictly decreasing on (x_min, inf)
            x = optimize.brentq(lambda v: power(v) - p_max, x_min, hi,
                                xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)
            info.multiplier = float(mu_lo + x)
            g = solve(x)
    f = t @ g
    if prev is not None and not np.all(keep):
        null = v[:, ~keep]
        f = f + null @ (null.conj().T @ prev)
    return f
