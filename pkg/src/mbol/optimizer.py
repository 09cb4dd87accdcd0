"""Penalty-based triple alternating optimisation of the hybrid precoder.

Internally every CU channel is divided by its noise standard deviation, so
the auxiliary variables, the penalty residual and ``alpha`` live in
noise-normalised units (noise variance 1) while powers stay in mW.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bb_solver, manifold, metrics, socp
from .channel import ChannelSet, steering_vector
from .metrics import BeamWeights, HybridPrecoder
from .scenario import ScenarioConfig, validate

logger = logging.getLogger(__name__)


@dataclass
class RunDiagnostics:
    """Append-only traces of one optimisation run."""

    objective: list = field(default_factory=list)
    sbp: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    rcg_iterations: list = field(default_factory=list)
    outer_index: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    outer_residual: list = field(default_factory=list)
    bb_events: list = field(default_factory=list)
    monotonicity_violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    converged: bool = False
    final_sinr: list = field(default_factory=list)
    final_power: float = float("nan")
    final_residual: float = float("nan")
    wall_clock: float = 0.0

    def record_inner(self, outer, objective, sbp, residual, rcg_iters):
        self.outer_index.append(outer)
        self.objective.append(float(objective))
        self.sbp.append(float(sbp))
        self.residual.append(float(residual))
        self.rcg_iterations.append(int(rcg_iters))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


@dataclass
class OptimizeResult:
    precoder: HybridPrecoder
    weights: BeamWeights
    diagnostics: RunDiagnostics

    def __iter__(self):
        return iter((self.precoder, self.weights, self.diagnostics))


def random_rf(n_tx, n_rf, rng) -> np.ndarray:
    return np.exp(2j * np.pi * rng.uniform(size=(n_tx, n_rf)))


def penalized_objective(rf, bb, zeta, H, beams, weights, alpha) -> float:
    """Value of the penalised problem for the current block variables."""
    y = rf @ bb
    sbp = np.sum(weights * np.sum(np.abs(beams.conj().T @ y) ** 2, axis=1))
    pen = np.sum(np.abs(H.conj().T @ y - zeta) ** 2) if H.size else 0.0
    return float(-sbp + 0.5 * alpha * pen)


def _sbp_linear(rf, bb, beams, weights):
    return float(np.sum(weights * np.sum(np.abs(beams.conj().T @ (rf @ bb)) ** 2, axis=1)))


def _max_residual(H, rf, bb, zeta):
    if not H.size:
        return 0.0
    return float(np.max(np.abs(H.conj().T @ (rf @ bb) - zeta) ** 2))


def optimize(config: ScenarioConfig, ch: ChannelSet, rng=None, beam_angles=None,
             weights=None, callback=None) -> OptimizeResult:
    """Run the penalty-based alternating optimisation for one channel realisation.

    Parameters
    ----------
    config : validated scenario
    ch : channels of the ``config.n_cu`` CUs
    rng : generator for the random RF initialisation (seeded from ``config.seed``
        when omitted)
    beam_angles : object beam angles in radians; defaults to the sub-sector centres
    weights : beam weights used inside the optimisation (uniform by default)
    callback : optional ``callback(diagnostics)`` after every inner pass

    Returns
    -------
    OptimizeResult, unpackable as ``(precoder, weights, diagnostics)``. The
    returned weights are the MSE-optimal weights of the final precoder.
    """
    validate(config)
    if len(ch) != config.n_cu or ch.n_tx != config.n_tx:
        raise ValueError("channel set does not match the configuration")
    t_start = time.perf_counter()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n_tx, n_rf = config.n_tx, config.n_rf
    p_max = config.p_tx_lin
    angles = config.beam_angles_rad if beam_angles is None else np.asarray(beam_angles, float)
    beams = steering_vector(n_tx, angles).reshape(n_tx, -1)
    w_beam = (np.full(beams.shape[1], 1.0 / beams.shape[1]) if weights is None
              else np.asarray(getattr(weights, "w", weights), float))
    gammas = config.sinr_thresholds_lin
    sigma = np.sqrt(ch.noise_powers)
    H = ch.H / sigma  # noise-normalised channels
    diag = RunDiagnostics()

    rf = random_rf(n_tx, n_rf, rng)
    bb = np.eye(n_rf, dtype=complex)
    bb *= np.sqrt(p_max) / np.linalg.norm(rf @ bb)
    zeta = socp.project_rows(H.conj().T @ rf @ bb, gammas, 1.0).z
    alpha = config.penalty_init
    mu = 0.0  # multiplier of the power constraint from the latest BB step
    stalled = 0

    for outer in range(config.max_outer):
        diag.alpha.append(alpha)
        prev = None
        for inner in range(config.max_inner):
            start = penalized_objective(rf, bb, zeta, H, beams, w_beam, alpha)
            prev_mu = mu
            # RF precoder on the circle manifold, power priced by the last multiplier
            d = manifold.RfSubproblemData(H, bb, zeta, beams, w_beam, alpha, mu)
            res = manifold.rcg_minimize(manifold.lift(rf), d, config.max_rcg_iters,
                                        config.tol_linesearch)
            rf = manifold.unlift(res.w, n_tx)
            # BB precoder: power-constrained stationary point
            info = bb_solver.BbInfo()
            sys = bb_solver.BbSystem.from_rf(rf, H, beams, w_beam, alpha, zeta)
            bb = bb_solver.update_bb_power(sys, rf.conj().T @ rf, p_max, info,
                                           spare_column=n_rf - 1, prev=bb)
            mu = info.multiplier
            if info.multiplier > 0 or info.hard_case:
                diag.bb_events.append({"outer": outer, "inner": inner,
                                       "multiplier": info.multiplier,
                                       "min_eig": info.min_eig, "hard_case": info.hard_case})
            # auxiliary variables: projection onto the SINR cones
            zeta = socp.project_rows(H.conj().T @ rf @ bb, gammas, 1.0).z
            obj = penalized_objective(rf, bb, zeta, H, beams, w_beam, alpha)
            if obj > start + 1e-9 * max(1.0, abs(start)):
                # an active power multiplier means the RF step descended a
                # Lagrangian priced with the previous multiplier; such passes
                # are logged but not counted against monotonicity
                diag.monotonicity_violations.append(
                    {"outer": outer, "inner": inner, "start": start, "end": obj,
                     "power_event": bool(mu > 0 or prev_mu > 0 or info.hard_case)})
            diag.record_inner(outer, obj, _sbp_linear(rf, bb, beams, w_beam),
                              _max_residual(H, rf, bb, zeta), res.iterations)
            if callback is not None:
                callback(diag)
            if prev is not None and abs(obj - prev) <= config.tol_inner * max(1.0, abs(prev)):
                break
            prev = obj
        resid = _max_residual(H, rf, bb, zeta)
        diag.outer_residual.append(resid)
        if len(diag.outer_residual) >= 4 and all(
                diag.outer_residual[-i] >= diag.outer_residual[-i - 1] for i in (1, 2, 3)):
            stalled += 1
            diag.warnings.append(f"penalty residual not decreasing at outer {outer}")
        if resid < config.tol_outer:
            diag.converged = True
            break
        alpha = alpha / config.penalty_shrink
    else:
        diag.warnings.append("max_outer reached before the penalty residual met tol_outer")

    diag.final_residual = _max_residual(H, rf, bb, zeta)
    p = HybridPrecoder(rf, bb).normalized(p_max)
    w_final = _final_weights(p, angles, diag)
    s = metrics.sinrs(ch, p)
    diag.final_sinr = s.tolist()
    diag.final_power = p.power
    short = s < gammas * (1 - 1e-6)
    if np.any(short):
        idx = np.flatnonzero(short)
        diag.warnings.append(f"SINR below threshold for CUs {idx.tolist()}: "
                             f"{np.round(10 * np.log10(s[idx]), 3).tolist()} dB")
    diag.wall_clock = time.perf_counter() - t_start
    return OptimizeResult(p, w_final, diag)


def _final_weights(p, angles, diag):
    try:
        return metrics.beam_weights(p, angles)
    except ZeroDivisionError:
        diag.warnings.append("zero beampattern gain at a beam angle; uniform weights reported")
        return BeamWeights.uniform(len(angles))


def radar_only(config: ScenarioConfig, beam_angles=None, rng=None, n_rf=None,
               max_passes=None) -> tuple:
    """Sensing-only benchmark: maximise the beam gains under power and modulus only.

    Uses the same RF/BB block updates with no CU channels and no penalty.
    Returns ``(precoder, weights)``.
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n_tx = config.n_tx
    n_rf = config.n_rf if n_rf is None else n_rf
    p_max = config.p_tx_lin
    angles = config.beam_angles_rad if beam_angles is None else np.asarray(beam_angles, float)
    beams = steering_vector(n_tx, angles).reshape(n_tx, -1)
    w_beam = np.full(beams.shape[1], 1.0 / beams.shape[1])
    H = np.zeros((n_tx, 0), complex)
    rf = random_rf(n_tx, n_rf, rng)
    bb = np.eye(n_rf, dtype=complex)
    zeta = np.zeros((0, n_rf), complex)
    info = bb_solver.BbInfo()
    bb = bb_solver.update_bb_power(
        bb_solver.BbSystem.from_rf(rf, H, beams, w_beam, 0.0, zeta),
        rf.conj().T @ rf, p_max, info, spare_column=n_rf - 1)
    prev = None
    passes = max_passes or config.max_inner * 5
    for _ in range(passes):
        d = manifold.RfSubproblemData(H, bb, zeta, beams, w_beam, 0.0, info.multiplier)
        res = manifold.rcg_minimize(manifold.lift(rf), d, config.max_rcg_iters,
                                    config.tol_linesearch)
        rf = manifold.unlift(res.w, n_tx)
        info = bb_solver.BbInfo()
        bb = bb_solver.update_bb_power(
            bb_solver.BbSystem.from_rf(rf, H, beams, w_beam, 0.0, zeta),
            rf.conj().T @ rf, p_max, info, spare_column=n_rf - 1, prev=bb)
        obj = _sbp_linear(rf, bb, beams, w_beam)
        if prev is not None and abs(obj - prev) <= config.tol_inner * max(1.0, abs(prev)):
            break
        prev = obj
    p = HybridPrecoder(rf, bb).normalized(p_max)
    return p, _final_weights(p, angles, RunDiagnostics())


def comm_only(config: ScenarioConfig, ch: ChannelSet, rng=None, iters: int = 200) -> HybridPrecoder:
    """Communication-only benchmark: all power serves the CUs.

    RF columns are phase-matched to the CU channels (extra RF chains get
    random phases); the CU streams are designed by WMMSE sum-rate
    iterations started from regularised zero forcing. Sensing streams are
    left unpowered.
    """
    if config.n_cu < 1:
        raise ValueError("communication-only benchmark needs at least one CU")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n_tx, n_rf, n_cu = config.n_tx, config.n_rf, config.n_cu
    p_max = config.p_tx_lin
    H = ch.H / np.sqrt(ch.noise_powers)
    rf = random_rf(n_tx, n_rf, rng)
    rf[:, :n_cu] = np.exp(1j * np.angle(H))
    gram = rf.conj().T @ rf
    he = rf.conj().T @ H  # M_t x M effective channels

    def power(x):
        return float(np.real(np.trace(x.conj().T @ gram @ x)))

    def rate(x):
        g = np.abs(he.conj().T @ x) ** 2
        sig = np.diag(g)
        return float(np.sum(np.log2(1 + sig / (g.sum(axis=1) - sig + 1.0))))

    x = he @ np.linalg.inv(he.conj().T @ he + (n_cu / p_max) * np.eye(n_cu))
    x *= np.sqrt(p_max / power(x))
    best, best_rate = x, rate(x)
    for _ in range(iters):
        s = he.conj().T @ x  # s[m, n] = h~_m^H x_n
        tot = np.sum(np.abs(s) ** 2, axis=1) + 1.0
        u = np.diag(s) / tot
        wgt = tot / (tot - np.abs(np.diag(s)) ** 2)
        cov = (he * (wgt * np.abs(u) ** 2)) @ he.conj().T
        rhs = he * (wgt * u)
        x = _power_limited_solve(cov, gram, rhs, p_max)
        r = rate(x)
        if r > best_rate:
            best, best_rate = x, r
    bb = np.zeros((n_rf, n_rf), complex)
    bb[:, :n_cu] = best
    return HybridPrecoder(rf, bb).normalized(p_max)


def _power_limited_solve(cov, gram, rhs, p_max):
    """``(cov + mu G)^{-1} rhs`` with the smallest ``mu >= 0`` meeting the power budget."""

    def sol(mu):
        return np.linalg.solve(cov + mu * gram, rhs)

    def pw(x):
        return float(np.real(np.trace(x.conj().T @ gram @ x)))

    if np.linalg.matrix_rank(cov) == cov.shape[0]:
        x = sol(0.0)
        if pw(x) <= p_max:
            return x
    lo, hi = 0.0, 1.0
    while pw(sol(hi)) > p_max:
        lo, hi = hi, 2 * hi
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid <= 0:
            break
        if pw(sol(mid)) > p_max:
            lo = mid
        else:
            hi = mid
    return sol(hi)
