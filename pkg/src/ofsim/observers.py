"""Observer cascade: high-gain chain/virtual-output estimator feeding a
continuous-time extended Kalman filter.

The fast half is an extended high-gain observer for the chain state xi_hat
plus one extra state sigma_hat estimating the virtual output
sigma = C1(xi, u) eta; its gains scale with inverse powers of the small
parameter epsilon.  The slow half is a deterministic extended Kalman filter
for the internal state eta_hat, with gain L = P C1^T / R where P solves the
differential Riccati equation

    P' = A1 P + P A1^T + Q - P C1^T R^-1 C1 P,    P(0) = P0 > 0,

along the estimated trajectory.  R is scalar because the virtual output is
scalar in this plant class.  Q and R are constants here; positive
definiteness of P is an assumption that the monitors below witness
empirically, not a theorem this code proves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .controller import SaturationConfig, smooth_sat, standard_sat
from .numerics import hurwitz_check
from .systems import NormalFormSystem


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = np.diag(arr)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square (got shape {arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if np.max(np.abs(arr - arr.T)) > 1e-12 * max(1.0, float(np.max(np.abs(arr)))):
        raise ValueError(f"{name} must be symmetric")
    arr = 0.5 * (arr + arr.T)
    if np.min(np.linalg.eigvalsh(arr)) <= 0.0:
        raise ValueError(f"{name} must be positive definite")
    return arr


@dataclass(frozen=True)
class EkfWeights:
    """Filter weights: Q, P0 symmetric positive definite, R a positive
    scalar.  Scalars and 1-D vectors are promoted to (diagonal) matrices.

    Stored in canonical tuple form so configs compare and hash cleanly;
    use :meth:`q_matrix` / :meth:`p0_matrix` for arrays.
    """

    Q: tuple
    R: float
    P0: tuple

    def __init__(self, Q, R, P0):
        qm = _as_matrix(Q, "Q")
        pm = _as_matrix(P0, "P0")
        r = float(R)
        if r <= 0.0:
            raise ValueError("R must be positive")
        if qm.shape != pm.shape:
            raise ValueError("Q and P0 must have the same order")
        object.__setattr__(self, "Q", tuple(map(tuple, qm.tolist())))
        object.__setattr__(self, "R", r)
        object.__setattr__(self, "P0", tuple(map(tuple, pm.tolist())))

    @property
    def order(self) -> int:
        return len(self.Q)

    def q_matrix(self) -> np.ndarray:
        return np.array(self.Q, dtype=float)

    def p0_matrix(self) -> np.ndarray:
        return np.array(self.P0, dtype=float)


@dataclass(frozen=True)
class EhgoGains:
    """High-gain observer tuning: Hurwitz coefficients alphas (length
    rho + 1) and the scale parameter epsilon > 0."""

    alphas: tuple
    epsilon: float

    def __init__(self, alphas, epsilon):
        alphas = tuple(float(a) for a in np.atleast_1d(alphas))
        if len(alphas) < 2:
            raise ValueError("need at least two coefficients (rho >= 1)")
        if not hurwitz_check(alphas):
            raise ValueError(f"alphas {alphas} do not form a Hurwitz polynomial")
        epsilon = float(epsilon)
        if epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "epsilon", epsilon)

    @property
    def rho(self) -> int:
        return len(self.alphas) - 1


@dataclass
class ObserverState:
    """Estimates held by one simulation run: eta_hat, xi_hat, sigma_hat and
    the Riccati matrix P."""

    eta_hat: np.ndarray
    xi_hat: np.ndarray
    sigma_hat: float
    P: np.ndarray

    def __post_init__(self):
        self.eta_hat = np.atleast_1d(np.asarray(self.eta_hat, dtype=float))
        self.xi_hat = np.atleast_1d(np.asarray(self.xi_hat, dtype=float))
        self.sigma_hat = float(self.sigma_hat)
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))


def riccati_rhs(P, A1val, C1val, weights: EkfWeights) -> np.ndarray:
    """Derivative of the Riccati matrix:
    A1 P + P A1^T + Q - P C1^T R^-1 C1 P.  Symmetric whenever P is."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    A1val = np.atleast_2d(np.asarray(A1val, dtype=float))
    C1val = np.atleast_1d(np.asarray(C1val, dtype=float))
    if weights.R <= 0.0:
        raise ValueError("R must be positive")
    PC = P @ C1val
    return A1val @ P + P @ A1val.T + weights.q_matrix() - np.outer(PC, PC) / weights.R


def ekf_gain(P, C1val, R: float) -> np.ndarray:
    """Filter gain L = P C1^T / R."""
    if R <= 0.0:
        raise ValueError("R must be positive")
    P = np.atleast_2d(np.asarray(P, dtype=float))
    C1val = np.atleast_1d(np.asarray(C1val, dtype=float))
    return P @ C1val / R


def _observer_xi(xi_hat, sat, y_substitute):
    """Chain argument the observer-side functions are evaluated at.

    With y-substitution, the measured output replaces the chain estimate
    (only meaningful for rho = 1) and no saturation is needed; otherwise
    the estimate is pushed through the smooth saturation unless saturation
    is disabled.
    """
    if y_substitute is not None:
        return np.array([float(y_substitute)])
    if sat is None:
        return xi_hat
    return smooth_sat(xi_hat, sat.M_xi, sat.kappa)


def ekf_rhs(
    system: NormalFormSystem,
    obs: ObserverState,
    L,
    sigma_hat: float,
    u: float,
    sat: SaturationConfig | None = None,
    y_substitute: float | None = None,
) -> np.ndarray:
    """Derivative of eta_hat:
    A1 eta_hat + phi0 + L [M_sigma sat(sigma_hat / M_sigma) - C1 eta_hat],
    the plant functions evaluated at the (saturated) observer chain state
    and the applied control ``u``.  ``sigma_hat`` is the raw estimate; the
    clamp is applied here.  With ``sat=None`` nothing is saturated.
    """
    xi_eval = _observer_xi(obs.xi_hat, sat, y_substitute)
    A1v = np.atleast_2d(np.asarray(system.A1_fn(xi_eval, u), dtype=float))
    phi0v = np.atleast_1d(np.asarray(system.phi0_fn(xi_eval, u), dtype=float))
    C1v = np.atleast_1d(np.asarray(system.C1_fn(xi_eval, u), dtype=float))
    L = np.atleast_1d(np.asarray(L, dtype=float))
    sigma_fed = standard_sat(sigma_hat, sat.M_sigma) if sat is not None else sigma_hat
    return A1v @ obs.eta_hat + phi0v + L * (sigma_fed - float(C1v @ obs.eta_hat))


def ehgo_gain(gains: EhgoGains):
    """(H, last): chain injection gains H_i = alpha_i / epsilon^i for
    i = 1..rho, and the virtual-output gain alpha_{rho+1} / epsilon^{rho+1}."""
    eps = gains.epsilon
    rho = gains.rho
    H = np.array([gains.alphas[i] / eps ** (i + 1) for i in range(rho)])
    last = gains.alphas[rho] / eps ** (rho + 1)
    return H, last


def ehgo_rhs(
    system: NormalFormSystem,
    obs: ObserverState,
    y: float,
    u: float,
    gains: EhgoGains,
    sat: SaturationConfig | None = None,
    y_substitute: float | None = None,
):
    """(xi_hat', sigma_hat') of the high-gain observer:

        xi_hat'    = A xi_hat + B [sigma_hat + a(., u)] + H (y - xi_hat_1)
        sigma_hat' = phi1(eta_hat, .) + (alpha_{rho+1}/eps^{rho+1}) (y - xi_hat_1)

    where the dot argument is the (saturated) observer chain state.  The
    raw sigma_hat drives the chain; only functions of the chain estimate
    are saturated.
    """
    if gains.rho != system.rho:
        raise ValueError("gain vector length does not match the plant's rho")
    xi_eval = _observer_xi(obs.xi_hat, sat, y_substitute)
    H, last = ehgo_gain(gains)
    av = float(system.a_fn(xi_eval, u))
    phi1v = float(system.phi1_fn(obs.eta_hat, xi_eval))
    innov = y - float(obs.xi_hat[0])
    xi_hat_dot = np.empty(system.rho)
    xi_hat_dot[:-1] = obs.xi_hat[1:]
    xi_hat_dot[-1] = obs.sigma_hat + av
    xi_hat_dot += H * innov
    sigma_hat_dot = phi1v + last * innov
    return xi_hat_dot, sigma_hat_dot


def validate_phi1(system: NormalFormSystem, probe) -> float:
    """Cross-check the registered phi1 against a finite difference.

    ``probe`` is a short exact-state feedback rollout (attributes times,
    eta, xi, u).  Along it, sigma(t) = C1(xi, u) eta must differentiate to
    phi1(eta, xi); the centered difference of the recorded sigma is compared
    with the registered phi1 at every interior grid point and the largest
    absolute discrepancy is returned.  A sign error or missing term in a
    hand-derived phi1 shows up orders of magnitude above the
    finite-difference floor.
    """
    times = np.asarray(probe.times, dtype=float)
    if times.size < 3:
        raise ValueError("probe trajectory needs at least three records")
    sigma = np.array([
        float(np.asarray(system.C1_fn(probe.xi[k], probe.u[k]), dtype=float)
              @ probe.eta[k])
        for k in range(times.size)
    ])
    worst = 0.0
    for k in range(1, times.size - 1):
        fd = (sigma[k + 1] - sigma[k - 1]) / (times[k + 1] - times[k - 1])
        predicted = float(system.phi1_fn(probe.eta[k], probe.xi[k]))
        worst = max(worst, abs(fd - predicted))
    return worst


class PdSummary(NamedTuple):
    lambda_min: float
    lambda_max: float
    symmetric_defect: float


def pd_monitor(P) -> PdSummary:
    """Eigenvalue extremes and symmetry defect of a Riccati matrix.

    Callers log the running extremes over a simulation to witness that the
    Riccati solution stayed uniformly positive definite.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    defect = float(np.max(np.abs(P - P.T)))
    eigs = np.linalg.eigvalsh(0.5 * (P + P.T))
    return PdSummary(float(eigs[0]), float(eigs[-1]), defect)
