"""State feedback law and the saturation machinery used under output feedback.

High-gain observers peak during the initial transient, so every signal they
feed into the rest of the loop must be bounded: the chain estimate through a
smooth saturation psi (identity on a ball, globally bounded), the virtual
output through the standard clamp.  Lifting a plant function f(.., xi, ..)
to its saturated version simply replaces its xi argument by psi(xi); inside
the ball the lift is exactly the original function, which is what makes the
recovery results work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import VectorField, integrate_fixed
from .systems import NormalFormSystem


@dataclass(frozen=True)
class FeedbackLaw:
    """A stabilizing state feedback u = gamma(eta, xi).

    ``gamma_fn`` takes the (n-rho,) internal state and the (rho,) chain
    state and returns the scalar control.  It must vanish at the origin and
    be continuously differentiable; the library checks the former and
    leaves the input-to-state stability obligation with the designer.
    """

    gamma_fn: Callable[[np.ndarray, np.ndarray], float]
    name: str = "custom"


@dataclass(frozen=True)
class SaturationConfig:
    """Saturation levels: M_xi for the chain estimate, M_sigma for the
    virtual output, kappa for the smooth transition width (default
    0.1 * M_xi)."""

    M_xi: float
    M_sigma: float
    kappa: float | None = None

    def __post_init__(self):
        if self.M_xi <= 0 or self.M_sigma <= 0:
            raise ValueError("saturation levels must be positive")
        if self.kappa is None:
            object.__setattr__(self, "kappa", 0.1 * self.M_xi)
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


def standard_sat(v: float, M: float) -> float:
    """Clamp ``v`` to [-M, M]."""
    if M <= 0:
        raise ValueError("saturation level M must be positive")
    if v > M:
        return M
    if v < -M:
        return -M
    return float(v)


def smooth_sat(xi, M: float, kappa: float) -> np.ndarray:
    """Smooth globally bounded map psi with psi(xi) = xi for ||xi|| <= M.

    Outside the ball the radius is compressed to
    ``r(s) = M + kappa * tanh((s - M) / kappa)``, so the output norm never
    exceeds M + kappa and the map is C1 at the junction (tanh'(0) = 1) and
    smooth elsewhere.  Inside the ball the input array is passed through
    unchanged.
    """
    if M <= 0 or kappa <= 0:
        raise ValueError("M and kappa must be positive")
    xi = np.asarray(xi, dtype=float)
    s = float(np.linalg.norm(xi))
    if s <= M:
        return xi
    r = M + kappa * math.tanh((s - M) / kappa)
    return xi * (r / s)


def lift_saturated(fn: Callable, sat: SaturationConfig, xi_index: int = 0) -> Callable:
    """Compose ``fn`` with the smooth saturation on its xi argument.

    ``xi_index`` selects which positional argument is the chain state:
    0 for the plant functions (xi, u), 1 for feedback laws and phi1
    (eta, xi).  Inside the ball ||xi|| <= M_xi the lifted function equals
    ``fn`` exactly.
    """
    M, kappa = sat.M_xi, sat.kappa

    def lifted(*args):
        args = list(args)
        args[xi_index] = smooth_sat(args[xi_index], M, kappa)
        return fn(*args)

    return lifted


def example_control(eta: float, xi: float) -> float:
    """Backstepping law stabilizing the bundled example plant globally:
    u = -4 eta - 3 xi - xi^2 - 2 eta cos(xi)."""
    return -4.0 * eta - 3.0 * xi - xi * xi - 2.0 * eta * math.cos(xi)


def example_feedback() -> FeedbackLaw:
    """The example control wrapped in the vector-argument interface."""

    def gamma(eta, xi):
        return example_control(eta[0], xi[0])

    return FeedbackLaw(gamma_fn=gamma, name="example")


@dataclass(frozen=True)
class StateFeedbackRun:
    """Exact-state closed-loop rollout: times plus eta, xi, u records."""

    times: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    u: np.ndarray


def state_feedback_rollout(
    system: NormalFormSystem,
    control: FeedbackLaw,
    eta0,
    xi0,
    t_final: float = 10.0,
    step: float = 1e-3,
    record_stride: int = 1,
) -> StateFeedbackRun:
    """Integrate the plant under u = gamma(eta, xi) with exact states.

    Used to calibrate saturation levels and as the probe trajectory for the
    phi1 cross-check; not part of the observer architecture itself.
    """
    m, r = system.n_internal, system.rho
    eta0 = np.atleast_1d(np.asarray(eta0, dtype=float))
    xi0 = np.atleast_1d(np.asarray(xi0, dtype=float))
    gamma = control.gamma_fn
    a1_fn, phi0_fn, c1_fn, a_fn = (
        system.A1_fn, system.phi0_fn, system.C1_fn, system.a_fn,
    )

    def rhs(t, z):
        eta, xi = z[:m], z[m:]
        u = float(gamma(eta, xi))
        out = np.empty(m + r)
        out[:m] = (np.asarray(a1_fn(xi, u), dtype=float) @ eta
                   + np.asarray(phi0_fn(xi, u), dtype=float))
        out[m:m + r - 1] = xi[1:]
        out[-1] = float(np.asarray(c1_fn(xi, u), dtype=float) @ eta) + float(a_fn(xi, u))
        return out

    field = VectorField(dimension=m + r, rhs=rhs)
    sol = integrate_fixed(field, 0.0, np.concatenate([eta0, xi0]),
                          step, t_final, record_stride)
    eta = sol.states[:, :m]
    xi = sol.states[:, m:]
    u = np.array([
        float(control.gamma_fn(eta[k], xi[k])) for k in range(len(sol.times))
    ])
    return StateFeedbackRun(times=sol.times, eta=eta, xi=xi, u=u)


def suggest_saturation(
    system: NormalFormSystem,
    control: FeedbackLaw,
    eta0,
    xi0,
    t_final: float = 10.0,
    step: float = 1e-3,
    margin: float = 1.5,
    M_sigma: float | None = None,
) -> SaturationConfig:
    """Derive saturation levels from an exact-state feedback rollout.

    M_xi is the peak ||xi|| over the rollout times ``margin``; M_sigma,
    unless given explicitly, is the peak |C1(xi, u) eta| times the same
    margin.  The levels must dominate the closed-loop trajectories from the
    intended initial conditions, and a prior state-feedback simulation is
    the practical way to find that scale.
    """
    run = state_feedback_rollout(system, control, eta0, xi0, t_final, step)
    xi_peak = float(np.max(np.linalg.norm(run.xi, axis=1)))
    m_xi = margin * xi_peak if xi_peak > 0 else 1.0
    if M_sigma is None:
        sigma = np.array([
            float(np.asarray(system.C1_fn(run.xi[k], run.u[k]), dtype=float)
                  @ run.eta[k])
            for k in range(len(run.times))
        ])
        sigma_peak = float(np.max(np.abs(sigma)))
        M_sigma = margin * sigma_peak if sigma_peak > 0 else 1.0
    return SaturationConfig(M_xi=m_xi, M_sigma=M_sigma)
