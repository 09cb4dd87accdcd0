"""RF-precoder update: Riemannian conjugate gradient on the complex circle manifold.

The RF precoder ``F_RF`` (``N_t x M_t``, unit-modulus entries) is handled as
its column-stacked phase vector ``w``. The lifted operators
``X_m = [f_m(1) I, ..., f_m(M_t) I]`` are never formed; the identities
``X_m w = F_RF f_m`` and ``X_n^H v = vec(v f_n^H)`` are used instead.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

MODULUS_TOL = 1e-9
ARMIJO_C = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 60


class ManifoldError(RuntimeError):
    def __init__(self, msg, iteration=None):
        super().__init__(msg if iteration is None else f"{msg} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class RfSubproblemData:
    """Fixed quantities of the RF subproblem.

    H       : ``N_t x M`` CU channels, one column per CU
    bb      : ``M_t x K`` baseband precoder
    zeta    : ``M x K`` auxiliary variables
    beams   : ``N_t x L`` steering vectors of the object beams
    weights : ``L`` beam weights
    alpha   : penalty factor
    power_price : multiplier ``mu >= 0`` of the transmit-power constraint; the
        term ``mu/2 ||F_RF F_BB||_F^2`` is added so the RF step descends the
        same Lagrangian as the power-constrained BB step
    """

    H: np.ndarray
    bb: np.ndarray
    zeta: np.ndarray
    beams: np.ndarray
    weights: np.ndarray
    alpha: float
    power_price: float = 0.0

    def __post_init__(self):
        n_tx, n_cu = self.H.shape
        m_t, k = self.bb.shape
        if self.zeta.shape != (n_cu, k):
            raise ValueError(f"zeta must be {(n_cu, k)}, got {self.zeta.shape}")
        if self.beams.shape[0] != n_tx or self.beams.shape[1] != len(self.weights):
            raise ValueError("beams must be N_t x L with one weight per beam")
        if self.power_price < 0:
            raise ValueError("power_price must be non-negative")

        # f(w) = <F, S F B B^H> - 2 Re<F, L> + c with the N_t x N_t matrix
        # S = alpha/2 H H^H - A W A^H + mu/2 I and L = alpha/2 H Z B^H
        quad = 0.5 * self.alpha * self.H @ self.H.conj().T \
            - (self.beams * self.weights) @ self.beams.conj().T
        if self.power_price:
            quad = quad + 0.5 * self.power_price * np.eye(n_tx)
        object.__setattr__(self, "quad", quad)
        object.__setattr__(self, "bb_gram", self.bb @ self.bb.conj().T)
        object.__setattr__(self, "lin", 0.5 * self.alpha * self.H @ self.zeta @ self.bb.conj().T)
        object.__setattr__(self, "const", 0.5 * self.alpha * float(np.sum(np.abs(self.zeta) ** 2)))

    @property
    def n_tx(self):
        return self.H.shape[0]

    def lipschitz(self) -> float:
        """Upper bound on the Lipschitz constant of the Euclidean gradient."""
        s_bb = np.linalg.norm(self.bb, 2) ** 2
        s_h = np.linalg.norm(self.H, 2) ** 2 if self.H.size else 0.0
        s_a = np.linalg.norm(self.beams * np.sqrt(self.weights), 2) ** 2 if self.beams.size else 0.0
        return (self.alpha * s_h + 2.0 * s_a + self.power_price) * s_bb


def lift(rf: np.ndarray) -> np.ndarray:
    """Column-stack ``F_RF`` into the phase vector ``w``."""
    rf = np.asarray(rf, dtype=complex)
    dev = np.max(np.abs(np.abs(rf) - 1.0)) if rf.size else 0.0
    if dev > MODULUS_TOL:
        raise ValueError(f"RF precoder violates unit modulus by {dev:.3g}")
    return rf.reshape(-1, order="F").copy()


def unlift(w: np.ndarray, n_tx: int) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    dev = np.max(np.abs(np.abs(w) - 1.0)) if w.size else 0.0
    if dev > MODULUS_TOL:
        raise ValueError(f"phase vector violates unit modulus by {dev:.3g}")
    return w.reshape(n_tx, -1, order="F").copy()


def _as_matrix(w, n_tx):
    return np.reshape(w, (n_tx, -1), order="F")


def objective(w: np.ndarray, d: RfSubproblemData) -> float:
    f = _as_matrix(w, d.n_tx)
    return float(np.real(np.vdot(f, d.quad @ f @ d.bb_gram)) - 2.0 * np.real(np.vdot(f, d.lin))
                 + d.const)


def euclidean_gradient(w: np.ndarray, d: RfSubproblemData) -> np.ndarray:
    """Gradient w.r.t. the conjugate coordinates, ``2 df/dw*``.

    With this convention the directional derivative along ``xi`` is
    ``Re(vdot(grad, xi))``.
    """
    g = 2.0 * (d.quad @ _as_matrix(w, d.n_tx) @ d.bb_gram - d.lin)
    return g.reshape(-1, order="F")


def objective_direct(w: np.ndarray, d: RfSubproblemData) -> float:
    """Term-by-term evaluation of the objective (reference for ``objective``)."""
    y = _as_matrix(w, d.n_tx) @ d.bb
    sbp = np.sum(d.weights * np.sum(np.abs(d.beams.conj().T @ y) ** 2, axis=1))
    pen = np.sum(np.abs(d.H.conj().T @ y - d.zeta) ** 2)
    price = np.sum(np.abs(y) ** 2)
    return float(-sbp + 0.5 * d.alpha * pen + 0.5 * d.power_price * price)


def riemannian_gradient(eg: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Project ``eg`` entrywise onto the tangent space of the circles at ``w``."""
    return eg - np.real(eg * np.conj(w)) * w


def retract(x: np.ndarray) -> np.ndarray:
    mag = np.abs(x)
    if np.all(mag > 0):
        return x / mag
    out = np.ones_like(x)
    nz = mag > 0
    out[nz] = x[nz] / mag[nz]
    return out


@dataclass
class RcgResult:
    w: np.ndarray
    objective: float
    grad_norm: float
    iterations: int
    history: list


def rcg_minimize(w0: np.ndarray, d: RfSubproblemData, max_iters: int = 100,
                 tol: float = 1e-6, callback=None) -> RcgResult:
    """Minimise ``objective`` over unit-modulus ``w`` by Polak-Ribiere RCG.

    Stops when ``||grad|| <= tol * (1 + |f|)``, after ``max_iters``
    iterations, or when the Armijo search cannot make progress.
    ``callback(iteration, objective, grad_norm)`` is called per iteration.
    """
    w = retract(np.asarray(w0, dtype=complex))
    f = objective(w, d)
    if not np.isfinite(f):
        raise ManifoldError("non-finite objective", 0)
    g = riemannian_gradient(euclidean_gradient(w, d), w)
    eta = -g
    lip = d.lipschitz()
    step0 = 1.0 / lip if lip > 0 else 1.0
    t_init = step0
    history = [f]
    it = 0
    gnorm = np.linalg.norm(g)
    while it < max_iters:
        if callback is not None:
            callback(it, f, gnorm)
        if gnorm <= tol * (1.0 + abs(f)):
            break
        slope = np.real(np.vdot(g, eta))
        if slope >= 0:
            eta = -g
            slope = -gnorm ** 2
        t = t_init
        for _ in range(MAX_BACKTRACKS):
            w_new = retract(w + t * eta)
            f_new = objective(w_new, d)
            if not np.isfinite(f_new):
                raise ManifoldError("non-finite objective", it + 1)
            if f_new <= f + ARMIJO_C * t * slope:
                break
            t *= BACKTRACK
        else:
            logger.debug("line search stalled at iteration %d", it)
            break
        it += 1
        g_new = riemannian_gradient(euclidean_gradient(w_new, d), w_new)
        # projection transport of the old direction and gradient
        eta_t = riemannian_gradient(eta, w_new)
        g_t = riemannian_gradient(g, w_new)
        beta = max(0.0, np.real(np.vdot(g_new, g_new - g_t)) / gnorm ** 2)
        eta = -g_new + beta * eta_t
        w, f, g = w_new, f_new, g_new
        gnorm = np.linalg.norm(g)
        history.append(f)
        t_init = min(2.0 * t, 1e6 * step0)
    return RcgResult(w=w, objective=f, grad_norm=float(gnorm), iterations=it, history=history)


def dense_lifted(bb_col: np.ndarray, n_tx: int) -> np.ndarray:
    """Materialise ``X_m`` for one BB column (test and reference use only)."""
    return np.kron(bb_col[None, :], np.eye(n_tx))
