"""Closed-loop assembly and integration of the two loops under study.

Reduced loop (the design target): plant under u = gamma(eta_hat, xi) with
the Kalman filter driven by the exact chain state and exact virtual output,
plus the Riccati equation.  This is the epsilon -> 0 limit of the full loop.

Output-feedback loop: plant + high-gain observer + Kalman filter + Riccati
equation integrated as one coupled ODE.  The fast observer error lives on a
time scale of order epsilon, so the integration step must resolve it
(step <= epsilon / 10 enforced, epsilon / 20 by default).

Both loops are integrated with fixed-step RK4 on a shared recording grid so
trajectory deviations can be compared sample-by-sample without
interpolation.  Every run is a pure function of its configuration: same
config, bit-identical trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .controller import (
    FeedbackLaw,
    SaturationConfig,
    example_feedback,
    smooth_sat,
    suggest_saturation,
)
from .numerics import IntegrationError, companion_lambda, solve_lyapunov
from .observers import EhgoGains, EkfWeights, ObserverState
from .systems import NormalFormSystem, PlantState, example_system

#: Recording interval used when the configuration does not pin one down.
DEFAULT_RECORD_DT = 1e-3


class SimulationError(RuntimeError):
    """A closed-loop run violated a structural requirement (for example the
    Riccati matrix lost positive definiteness)."""


# ---------------------------------------------------------------------------
# System registry: plants are selected by name in configurations, so runs
# stay describable by flat text files.  Registration happens at import or
# setup time; runs never mutate the registry.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemBundle:
    """A plant together with its stabilizing state feedback."""

    system: NormalFormSystem
    control: FeedbackLaw
    default_M_sigma: float | None = None


_REGISTRY: dict[str, SystemBundle] = {}


def register_system(
    name: str,
    system: NormalFormSystem,
    control: FeedbackLaw,
    default_M_sigma: float | None = None,
    overwrite: bool = False,
) -> None:
    """Make a plant selectable by name in configurations."""
    if name in _REGISTRY and not overwrite:
        raise ValueError(f"system {name!r} is already registered")
    _REGISTRY[name] = SystemBundle(system, control, default_M_sigma)
    default_saturation.cache_clear()


def get_bundle(name: str) -> SystemBundle:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown system {name!r}; registered: {sorted(_REGISTRY)}"
        ) from None


def registered_systems() -> list[str]:
    return sorted(_REGISTRY)


@lru_cache(maxsize=None)
def default_saturation(
    name: str,
    eta0: tuple,
    xi0: tuple,
    M_sigma: float | None = None,
) -> SaturationConfig:
    """Saturation levels for a registered plant from the standard recipe
    (state-feedback rollout peak times 1.5), memoized because the rollout
    is deterministic and configurations resolve repeatedly."""
    bundle = get_bundle(name)
    if M_sigma is None:
        M_sigma = bundle.default_M_sigma
    return suggest_saturation(bundle.system, bundle.control, eta0, xi0,
                              M_sigma=M_sigma)


register_system("example", example_system(), example_feedback(),
                default_M_sigma=10.0)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """Everything one run depends on.

    ``step``, ``record_stride``, ``sat`` and ``y_substitution`` may be left
    unset (None); :func:`resolve_config` fills them with the documented
    defaults.  Defaults reproduce the bundled example study: epsilon 1e-3,
    gain polynomial coefficients (5, 1), Q = 1, R = 10, P(0) = 0.1, initial
    plant state (0.5, 0.9), initial estimates (0, 0.1, 0).
    """

    system: str = "example"
    mode: str = "output_feedback"
    gains: EhgoGains = EhgoGains((5.0, 1.0), 1e-3)
    weights: EkfWeights = EkfWeights(1.0, 10.0, 0.1)
    sat: SaturationConfig | None = None
    y_substitution: bool | None = None
    saturation_enabled: bool = True
    t_final: float = 20.0
    step: float | None = None
    record_stride: int | None = None
    eta0: tuple = (0.5,)
    xi0: tuple = (0.9,)
    eta_hat0: tuple = (0.0,)
    xi_hat0: tuple = (0.1,)
    sigma_hat0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "eta0", _as_float_tuple(self.eta0))
        object.__setattr__(self, "xi0", _as_float_tuple(self.xi0))
        object.__setattr__(self, "eta_hat0", _as_float_tuple(self.eta_hat0))
        object.__setattr__(self, "xi_hat0", _as_float_tuple(self.xi_hat0))
        object.__setattr__(self, "sigma_hat0", float(self.sigma_hat0))
        if self.mode not in ("reduced", "output_feedback"):
            raise ValueError(
                f"mode must be 'reduced' or 'output_feedback', got {self.mode!r}"
            )
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")


def _as_float_tuple(value) -> tuple:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    return tuple(float(v) for v in arr)


def resolve_config(cfg: SimConfig) -> SimConfig:
    """Fill in defaulted fields and validate against the named plant.

    Defaults: y-substitution on exactly when rho = 1; saturation levels
    from a state-feedback rollout (times 1.5) with the plant's registered
    virtual-output level if any; step = epsilon/20 under output feedback
    (1e-3 reduced), trimmed so an integer number of steps tiles the 1 ms
    recording grid.  An explicit output-feedback step must satisfy
    step <= epsilon / 10 or the fast dynamics are unresolved.
    """
    bundle = get_bundle(cfg.system)
    system = bundle.system
    m, rho = system.n_internal, system.rho

    if len(cfg.eta0) != m or len(cfg.eta_hat0) != m:
        raise ValueError(f"eta initial values must have length {m}")
    if len(cfg.xi0) != rho or len(cfg.xi_hat0) != rho:
        raise ValueError(f"xi initial values must have length {rho}")
    if cfg.gains.rho != rho:
        raise ValueError(
            f"alphas must have length rho+1 = {rho + 1} for system {cfg.system!r}"
        )
    if cfg.weights.order != m:
        raise ValueError(f"Q/P0 must have order {m} for system {cfg.system!r}")

    y_sub = cfg.y_substitution
    if y_sub is None:
        y_sub = rho == 1
    if y_sub and rho != 1:
        raise ValueError("y-substitution requires a relative degree of 1")

    sat = cfg.sat
    if sat is None:
        sat = default_saturation(cfg.system, cfg.eta0, cfg.xi0)

    eps = cfg.gains.epsilon
    of_mode = cfg.mode == "output_feedback"
    step = cfg.step
    stride = cfg.record_stride
    stride_defaulted = stride is None
    if step is None:
        base = eps / 20.0 if of_mode else DEFAULT_RECORD_DT
        record_dt = DEFAULT_RECORD_DT
        step = record_dt / math.ceil(record_dt / base)
        if stride is None:
            stride = int(round(record_dt / step))
    elif stride is None:
        stride = max(1, int(round(DEFAULT_RECORD_DT / step)))
    if of_mode and step > eps / 10.0 + 1e-15:
        raise ValueError(
            f"output-feedback step {step!r} exceeds epsilon/10 = {eps / 10.0!r}; "
            "the fast observer dynamics would be unresolved"
        )

    n_steps = int(round(cfg.t_final / step))
    if n_steps < 1 or abs(n_steps * step - cfg.t_final) > 1e-9 * max(1.0, cfg.t_final):
        raise ValueError(
            f"step {step!r} does not tile t_final {cfg.t_final!r}"
        )
    if n_steps % stride != 0:
        if stride_defaulted:
            stride = 1  # fall back to recording every step
        else:
            raise ValueError(
                f"{n_steps} steps is not divisible by record_stride={stride}"
            )

    return replace(cfg, sat=sat, y_substitution=y_sub, step=step,
                   record_stride=stride)


# ---------------------------------------------------------------------------
# Run records
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Time-indexed record of one closed-loop run.

    2-D arrays are (record, component); scalar signals are 1-D.  ``chi``
    holds the epsilon-scaled observer error (identically zero for reduced
    runs, where the observer is exact by construction), ``sigma_fed`` the
    virtual-output value actually fed to the Kalman filter after
    saturation, ``V2`` the filter-error Lyapunov value eta_tilde' P^-1
    eta_tilde and ``W`` the fast-error quadratic form chi' P0 chi.
    """

    times: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    y: np.ndarray
    u: np.ndarray
    eta_hat: np.ndarray
    xi_hat: np.ndarray
    sigma_hat: np.ndarray
    sigma_fed: np.ndarray
    P: np.ndarray
    eta_tilde: np.ndarray
    chi: np.ndarray
    V2: np.ndarray
    W: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        """Full plant state (eta, xi) per record."""
        return np.hstack([self.eta, self.xi])

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class RecoveryReport:
    """Per-epsilon sup-norm deviations between output-feedback and reduced
    trajectories on the common grid (restricted to t >= transient_cutoff)."""

    epsilons: tuple
    sup_dev_theta: tuple
    sup_dev_eta_tilde: tuple
    transient_cutoff: float = 0.0


@dataclass(frozen=True)
class PeakingReport:
    """Peak of the scaled observer error and the first time after which the
    fast error stays inside the tube W <= tube_level * epsilon^2.

    ``entry_time`` is None when the trajectory never settles into the tube.
    """

    max_abs_chi: float
    entry_time: float | None
    tube_level: float


# ---------------------------------------------------------------------------
# Pointwise diagnostic operations
# ---------------------------------------------------------------------------


def scaled_error_coords(
    system: NormalFormSystem,
    plant: PlantState,
    obs: ObserverState,
    control: FeedbackLaw,
    gains: EhgoGains,
) -> np.ndarray:
    """Fast-error coordinates: chi_i = (xi_i - xi_hat_i) / eps^(rho+1-i)
    for the chain and chi_{rho+1} = C1(xi, gamma(eta_hat, xi)) eta -
    sigma_hat for the virtual output."""
    rho = system.rho
    eps = gains.epsilon
    u = float(control.gamma_fn(obs.eta_hat, plant.xi))
    C1v = np.atleast_1d(np.asarray(system.C1_fn(plant.xi, u), dtype=float))
    chi = np.empty(rho + 1)
    for i in range(rho):
        chi[i] = (plant.xi[i] - obs.xi_hat[i]) / eps ** (rho - i)
    chi[rho] = float(C1v @ plant.eta) - obs.sigma_hat
    return chi


def lyapunov_monitors(chi, eta_tilde, P, P0):
    """(V2, W): filter-error form eta_tilde' P^-1 eta_tilde and fast-error
    form chi' P0 chi.  Both nonnegative whenever P and P0 are positive
    definite."""
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    eta_tilde = np.atleast_1d(np.asarray(eta_tilde, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    P0 = np.atleast_2d(np.asarray(P0, dtype=float))
    try:
        V2 = float(eta_tilde @ np.linalg.solve(P, eta_tilde))
    except np.linalg.LinAlgError as exc:
        raise SimulationError(f"singular Riccati matrix: {exc}") from exc
    W = float(chi @ P0 @ chi)
    return V2, W


# ---------------------------------------------------------------------------
# Integration engines.  Both integrate the same equations; the scalar engine
# specializes the ubiquitous one-internal-state, relative-degree-one case to
# plain float arithmetic (the generic small-array path is several times
# slower, which matters at 10^6 steps).  Engine choice is deterministic in
# the configuration, so determinism of runs is preserved.
# ---------------------------------------------------------------------------


def _resymmetrize(z, p_off: int, m: int) -> None:
    if m > 1:
        P = z[p_off:].reshape(m, m)
        P += P.T
        P *= 0.5


def _check_pd(P, t: float) -> None:
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise SimulationError(
            f"Riccati matrix lost positive definiteness at t={t:.9g}"
        ) from None


def _alloc_records(n_rec: int, m: int, rho: int) -> dict:
    return {
        "eta": np.empty((n_rec, m)),
        "xi": np.empty((n_rec, rho)),
        "y": np.empty(n_rec),
        "u": np.empty(n_rec),
        "eta_hat": np.empty((n_rec, m)),
        "xi_hat": np.empty((n_rec, rho)),
        "sigma_hat": np.empty(n_rec),
        "sigma_fed": np.empty(n_rec),
        "P": np.empty((n_rec, m, m)),
        "eta_tilde": np.empty((n_rec, m)),
        "chi": np.empty((n_rec, rho + 1)),
        "V2": np.empty(n_rec),
        "W": np.empty(n_rec),
    }


def simulate_reduced(cfg: SimConfig) -> Trajectory:
    """Integrate the reduced loop: plant under u = gamma(eta_hat, xi) with
    the filter driven by the exact chain state and exact virtual output,
    plus the Riccati equation.

    The returned trajectory records the exact quantities in the observer
    slots (xi_hat = xi, sigma_hat = the true virtual output), so reduced
    and output-feedback runs share one schema.
    """
    cfg = resolve_config(cfg)
    if cfg.mode != "reduced":
        raise ValueError("simulate_reduced requires mode='reduced'")
    bundle = get_bundle(cfg.system)
    system, control = bundle.system, bundle.control
    m, rho = system.n_internal, system.rho
    gamma = control.gamma_fn
    a1_fn, phi0_fn, c1_fn, a_fn = (
        system.A1_fn, system.phi0_fn, system.C1_fn, system.a_fn,
    )
    Q = cfg.weights.q_matrix()
    R = cfg.weights.R
    h = cfg.step
    stride = cfg.record_stride
    n_steps = int(round(cfg.t_final / h))
    n_rec = n_steps // stride + 1

    i_xi, i_eh, i_p = m, m + rho, 2 * m + rho

    def rhs(t, z):
        eta = z[:m]
        xi = z[i_xi:i_eh]
        eta_hat = z[i_eh:i_p]
        P = z[i_p:].reshape(m, m)
        u = float(gamma(eta_hat, xi))
        A1v = np.asarray(a1_fn(xi, u), dtype=float)
        phi0v = np.asarray(phi0_fn(xi, u), dtype=float)
        C1v = np.asarray(c1_fn(xi, u), dtype=float)
        av = float(a_fn(xi, u))
        sigma = float(C1v @ eta)
        out = np.empty(z.size)
        out[:m] = A1v @ eta + phi0v
        out[i_xi:i_eh - 1] = xi[1:]
        out[i_eh - 1] = sigma + av
        L = P @ C1v / R
        out[i_eh:i_p] = A1v @ eta_hat + phi0v + L * (sigma - float(C1v @ eta_hat))
        PC = P @ C1v
        out[i_p:] = (A1v @ P + P @ A1v.T + Q - np.outer(PC, PC) / R).ravel()
        return out

    z = np.concatenate([
        cfg.eta0, cfg.xi0, cfg.eta_hat0,
        cfg.weights.p0_matrix().ravel(),
    ])
    rec = _alloc_records(n_rec, m, rho)
    times = h * stride * np.arange(n_rec)

    def record(j, t, z):
        eta = z[:m]
        xi = z[i_xi:i_eh]
        eta_hat = z[i_eh:i_p]
        P = z[i_p:].reshape(m, m)
        _check_pd(P, t)
        u = float(gamma(eta_hat, xi))
        C1v = np.asarray(c1_fn(xi, u), dtype=float)
        sigma = float(C1v @ eta)
        eta_tilde = eta - eta_hat
        rec["eta"][j] = eta
        rec["xi"][j] = xi
        rec["y"][j] = xi[0]
        rec["u"][j] = u
        rec["eta_hat"][j] = eta_hat
        rec["xi_hat"][j] = xi
        rec["sigma_hat"][j] = sigma
        rec["sigma_fed"][j] = sigma
        rec["P"][j] = P
        rec["eta_tilde"][j] = eta_tilde
        rec["chi"][j] = 0.0
        rec["V2"][j] = float(eta_tilde @ np.linalg.solve(P, eta_tilde))
        rec["W"][j] = 0.0

    record(0, 0.0, z)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(n_steps):
            t = k * h
            k1 = rhs(t, z)
            k2 = rhs(t + 0.5 * h, z + (0.5 * h) * k1)
            k3 = rhs(t + 0.5 * h, z + (0.5 * h) * k2)
            k4 = rhs(t + h, z + h * k3)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            _resymmetrize(z, i_p, m)
            if not np.all(np.isfinite(z)):
                raise IntegrationError(
                    f"reduced run became non-finite at t={t + h:.9g}"
                )
            if (k + 1) % stride == 0:
                record((k + 1) // stride, t + h, z)

    return Trajectory(times=times, **rec)


def _peaking_error(t: float, saturation_enabled: bool, detail: str = "") -> IntegrationError:
    msg = f"output-feedback run became non-finite at t={t:.9g}"
    if detail:
        msg += f" ({detail})"
    if not saturation_enabled:
        msg += (
            "; with saturation disabled this is the expected peaking "
            "blow-up of the high-gain observer transient"
        )
    return IntegrationError(msg)


def simulate_output_feedback(cfg: SimConfig, _engine: str = "auto") -> Trajectory:
    """Integrate the full output-feedback loop as one coupled ODE.

    The control is u = gamma(eta_hat, psi(xi_hat)) in general, or
    gamma(eta_hat, y) under y-substitution; the virtual-output estimate is
    clamped before entering the Kalman filter.  With
    ``saturation_enabled=False`` all saturations are bypassed, which at
    small epsilon is expected to end in an integration failure caused by
    observer peaking.

    ``_engine`` is an internal knob ("auto", "scalar", "general") used by
    the test suite to cross-check the two integration paths.
    """
    cfg = resolve_config(cfg)
    if cfg.mode != "output_feedback":
        raise ValueError(
            "simulate_output_feedback requires mode='output_feedback'"
        )
    bundle = get_bundle(cfg.system)
    m, rho = bundle.system.n_internal, bundle.system.rho
    if _engine == "auto":
        _engine = "scalar" if (m == 1 and rho == 1) else "general"
    if _engine == "scalar":
        if not (m == 1 and rho == 1):
            raise ValueError("scalar engine requires n-rho = 1 and rho = 1")
        return _of_scalar(cfg, bundle)
    if _engine != "general":
        raise ValueError(f"unknown engine {_engine!r}")
    return _of_general(cfg, bundle)


def _of_general(cfg: SimConfig, bundle: SystemBundle) -> Trajectory:
    system, control = bundle.system, bundle.control
    m, rho = system.n_internal, system.rho
    gamma = control.gamma_fn
    a1_fn, phi0_fn, c1_fn, a_fn, phi1_fn = (
        system.A1_fn, system.phi0_fn, system.C1_fn, system.a_fn, system.phi1_fn,
    )
    Q = cfg.weights.q_matrix()
    R = cfg.weights.R
    eps = cfg.gains.epsilon
    sat_on = cfg.saturation_enabled
    y_sub = cfg.y_substitution
    M_xi, kappa, M_sig = cfg.sat.M_xi, cfg.sat.kappa, cfg.sat.M_sigma
    H = np.array([cfg.gains.alphas[i] / eps ** (i + 1) for i in range(rho)])
    alpha_last = cfg.gains.alphas[rho] / eps ** (rho + 1)
    P0_lyap = solve_lyapunov(companion_lambda(cfg.gains.alphas))
    eps_pows = eps ** np.arange(rho, 0, -1)

    h = cfg.step
    stride = cfg.record_stride
    n_steps = int(round(cfg.t_final / h))
    n_rec = n_steps // stride + 1

    i_xi, i_eh, i_xh, i_sh, i_p = m, m + rho, 2 * m + rho, 2 * m + 2 * rho, 2 * m + 2 * rho + 1

    def rhs(t, z):
        eta = z[:m]
        xi = z[i_xi:i_eh]
        eta_hat = z[i_eh:i_xh]
        xi_hat = z[i_xh:i_sh]
        sigma_hat = z[i_sh]
        P = z[i_p:].reshape(m, m)
        y = xi[0]
        if y_sub:
            xi_obs = xi  # rho = 1: the chain state is the measured output
        elif sat_on:
            xi_obs = smooth_sat(xi_hat, M_xi, kappa)
        else:
            xi_obs = xi_hat
        u = float(gamma(eta_hat, xi_obs))
        A1p = np.asarray(a1_fn(xi, u), dtype=float)
        phi0p = np.asarray(phi0_fn(xi, u), dtype=float)
        C1p = np.asarray(c1_fn(xi, u), dtype=float)
        ap = float(a_fn(xi, u))
        if y_sub:
            A1o, phi0o, C1o, ao = A1p, phi0p, C1p, ap
        else:
            A1o = np.asarray(a1_fn(xi_obs, u), dtype=float)
            phi0o = np.asarray(phi0_fn(xi_obs, u), dtype=float)
            C1o = np.asarray(c1_fn(xi_obs, u), dtype=float)
            ao = float(a_fn(xi_obs, u))
        phi1o = float(phi1_fn(eta_hat, xi_obs))
        if sat_on:
            sigma_fed = M_sig if sigma_hat > M_sig else (-M_sig if sigma_hat < -M_sig else sigma_hat)
        else:
            sigma_fed = sigma_hat
        out = np.empty(z.size)
        out[:m] = A1p @ eta + phi0p
        out[i_xi:i_eh - 1] = xi[1:]
        out[i_eh - 1] = float(C1p @ eta) + ap
        L = P @ C1o / R
        out[i_eh:i_xh] = A1o @ eta_hat + phi0o + L * (sigma_fed - float(C1o @ eta_hat))
        innov = y - xi_hat[0]
        out[i_xh:i_sh - 1] = xi_hat[1:]
        out[i_sh - 1] = sigma_hat + ao
        out[i_xh:i_sh] += H * innov
        out[i_sh] = phi1o + alpha_last * innov
        PC = P @ C1o
        out[i_p:] = (A1o @ P + P @ A1o.T + Q - np.outer(PC, PC) / R).ravel()
        return out

    z = np.concatenate([
        cfg.eta0, cfg.xi0, cfg.eta_hat0, cfg.xi_hat0, [cfg.sigma_hat0],
        cfg.weights.p0_matrix().ravel(),
    ])
    rec = _alloc_records(n_rec, m, rho)
    times = h * stride * np.arange(n_rec)

    def record(j, t, z):
        eta = z[:m]
        xi = z[i_xi:i_eh]
        eta_hat = z[i_eh:i_xh]
        xi_hat = z[i_xh:i_sh]
        sigma_hat = float(z[i_sh])
        P = z[i_p:].reshape(m, m)
        _check_pd(P, t)
        y = xi[0]
        if y_sub:
            xi_obs = xi
        elif sat_on:
            xi_obs = smooth_sat(xi_hat, M_xi, kappa)
        else:
            xi_obs = xi_hat
        u = float(gamma(eta_hat, xi_obs))
        if sat_on:
            sigma_fed = M_sig if sigma_hat > M_sig else (-M_sig if sigma_hat < -M_sig else sigma_hat)
        else:
            sigma_fed = sigma_hat
        u_raw = float(gamma(eta_hat, xi))
        C1_raw = np.asarray(c1_fn(xi, u_raw), dtype=float)
        chi = np.empty(rho + 1)
        chi[:rho] = (xi - xi_hat) / eps_pows
        chi[rho] = float(C1_raw @ eta) - sigma_hat
        eta_tilde = eta - eta_hat
        rec["eta"][j] = eta
        rec["xi"][j] = xi
        rec["y"][j] = y
        rec["u"][j] = u
        rec["eta_hat"][j] = eta_hat
        rec["xi_hat"][j] = xi_hat
        rec["sigma_hat"][j] = sigma_hat
        rec["sigma_fed"][j] = sigma_fed
        rec["P"][j] = P
        rec["eta_tilde"][j] = eta_tilde
        rec["chi"][j] = chi
        rec["V2"][j] = float(eta_tilde @ np.linalg.solve(P, eta_tilde))
        rec["W"][j] = float(chi @ P0_lyap @ chi)

    record(0, 0.0, z)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(n_steps):
            t = k * h
            try:
                k1 = rhs(t, z)
                k2 = rhs(t + 0.5 * h, z + (0.5 * h) * k1)
                k3 = rhs(t + 0.5 * h, z + (0.5 * h) * k2)
                k4 = rhs(t + h, z + h * k3)
            except (OverflowError, ValueError) as exc:
                raise _peaking_error(t, cfg.saturation_enabled, str(exc)) from None
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            _resymmetrize(z, i_p, m)
            if not np.all(np.isfinite(z)):
                raise _peaking_error(t + h, cfg.saturation_enabled)
            if (k + 1) % stride == 0:
                record((k + 1) // stride, t + h, z)

    return Trajectory(times=times, **rec)


def _of_scalar(cfg: SimConfig, bundle: SystemBundle) -> Trajectory:
    """Float-arithmetic specialization of the output-feedback loop for
    one internal state and relative degree one.  Same equations as
    :func:`_of_general`; plant callbacks receive reused one-element buffers
    (they must not retain references, which holds for ordinary function
    bundles)."""
    system, control = bundle.system, bundle.control
    gamma = control.gamma_fn
    a1_fn, phi0_fn, c1_fn, a_fn, phi1_fn = (
        system.A1_fn, system.phi0_fn, system.C1_fn, system.a_fn, system.phi1_fn,
    )
    Q = float(cfg.weights.q_matrix()[0, 0])
    R = cfg.weights.R
    eps = cfg.gains.epsilon
    sat_on = cfg.saturation_enabled
    y_sub = cfg.y_substitution
    M_xi, kappa, M_sig = cfg.sat.M_xi, cfg.sat.kappa, cfg.sat.M_sigma
    H1 = cfg.gains.alphas[0] / eps
    alpha_last = cfg.gains.alphas[1] / eps ** 2
    P0_lyap = solve_lyapunov(companion_lambda(cfg.gains.alphas))

    h = cfg.step
    stride = cfg.record_stride
    n_steps = int(round(cfg.t_final / h))
    n_rec = n_steps // stride + 1

    xi_buf = np.empty(1)
    xio_buf = np.empty(1)
    eh_buf = np.empty(1)

    def rhs(t, z):
        eta, xi, eh, xh, sh, P = z
        y = xi
        xi_buf[0] = xi
        eh_buf[0] = eh
        if y_sub:
            xi_obs = xi_buf
        else:
            if sat_on:
                axh = abs(xh)
                if axh <= M_xi:
                    xio_buf[0] = xh
                else:
                    xio_buf[0] = math.copysign(
                        M_xi + kappa * math.tanh((axh - M_xi) / kappa), xh)
            else:
                xio_buf[0] = xh
            xi_obs = xio_buf
        u = gamma(eh_buf, xi_obs)
        if y_sub:
            A1o = a1_fn(xi_buf, u)[0, 0]
            phi0o = phi0_fn(xi_buf, u)[0]
            C1o = c1_fn(xi_buf, u)[0]
            ao = a_fn(xi_buf, u)
            A1p, phi0p, C1p, ap = A1o, phi0o, C1o, ao
        else:
            A1p = a1_fn(xi_buf, u)[0, 0]
            phi0p = phi0_fn(xi_buf, u)[0]
            C1p = c1_fn(xi_buf, u)[0]
            ap = a_fn(xi_buf, u)
            A1o = a1_fn(xi_obs, u)[0, 0]
            phi0o = phi0_fn(xi_obs, u)[0]
            C1o = c1_fn(xi_obs, u)[0]
            ao = a_fn(xi_obs, u)
        phi1o = phi1_fn(eh_buf, xi_obs)
        if sat_on:
            sfed = M_sig if sh > M_sig else (-M_sig if sh < -M_sig else sh)
        else:
            sfed = sh
        innov = y - xh
        L = P * C1o / R
        return (
            A1p * eta + phi0p,
            C1p * eta + ap,
            A1o * eh + phi0o + L * (sfed - C1o * eh),
            sh + ao + H1 * innov,
            phi1o + alpha_last * innov,
            2.0 * A1o * P + Q - (C1o * P) ** 2 / R,
        )

    z = (cfg.eta0[0], cfg.xi0[0], cfg.eta_hat0[0], cfg.xi_hat0[0],
         cfg.sigma_hat0, float(cfg.weights.p0_matrix()[0, 0]))
    rec = _alloc_records(n_rec, 1, 1)
    times = h * stride * np.arange(n_rec)

    def record(j, t, z):
        eta, xi, eh, xh, sh, P = (float(v) for v in z)
        if P <= 0.0:
            raise SimulationError(
                f"Riccati matrix lost positive definiteness at t={t:.9g}"
            )
        xi_buf[0] = xi
        eh_buf[0] = eh
        if y_sub:
            xi_obs = xi_buf
        elif sat_on:
            axh = abs(xh)
            if axh <= M_xi:
                xio_buf[0] = xh
            else:
                xio_buf[0] = math.copysign(
                    M_xi + kappa * math.tanh((axh - M_xi) / kappa), xh)
            xi_obs = xio_buf
        else:
            xio_buf[0] = xh
            xi_obs = xio_buf
        u = float(gamma(eh_buf, xi_obs))
        if sat_on:
            sfed = M_sig if sh > M_sig else (-M_sig if sh < -M_sig else sh)
        else:
            sfed = sh
        u_raw = float(gamma(eh_buf, xi_buf))
        C1_raw = float(c1_fn(xi_buf, u_raw)[0])
        chi0 = (xi - xh) / eps
        chi1 = C1_raw * eta - sh
        eta_tilde = eta - eh
        rec["eta"][j, 0] = eta
        rec["xi"][j, 0] = xi
        rec["y"][j] = xi
        rec["u"][j] = u
        rec["eta_hat"][j, 0] = eh
        rec["xi_hat"][j, 0] = xh
        rec["sigma_hat"][j] = sh
        rec["sigma_fed"][j] = sfed
        rec["P"][j, 0, 0] = P
        rec["eta_tilde"][j, 0] = eta_tilde
        rec["chi"][j, 0] = chi0
        rec["chi"][j, 1] = chi1
        rec["V2"][j] = eta_tilde * eta_tilde / P
        rec["W"][j] = (P0_lyap[0, 0] * chi0 * chi0
                       + 2.0 * P0_lyap[0, 1] * chi0 * chi1
                       + P0_lyap[1, 1] * chi1 * chi1)

    record(0, 0.0, z)
    h2 = 0.5 * h
    h6 = h / 6.0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(n_steps):
            t = k * h
            try:
                a = rhs(t, z)
                zb = tuple(zi + h2 * ki for zi, ki in zip(z, a))
                b = rhs(t + h2, zb)
                zc = tuple(zi + h2 * ki for zi, ki in zip(z, b))
                c = rhs(t + h2, zc)
                zd = tuple(zi + h * ki for zi, ki in zip(z, c))
                d = rhs(t + h, zd)
                z = tuple(
                    zi + h6 * (ka + 2.0 * kb + 2.0 * kc + kd)
                    for zi, ka, kb, kc, kd in zip(z, a, b, c, d)
                )
            except (OverflowError, ValueError) as exc:
                raise _peaking_error(t, cfg.saturation_enabled, str(exc)) from None
            if not all(math.isfinite(v) for v in z):
                raise _peaking_error(t + h, cfg.saturation_enabled)
            if (k + 1) % stride == 0:
                record((k + 1) // stride, t + h, z)

    return Trajectory(times=times, **rec)


def run_simulation(cfg: SimConfig) -> Trajectory:
    """Dispatch on the configured mode."""
    cfg = resolve_config(cfg)
    if cfg.mode == "reduced":
        return simulate_reduced(cfg)
    return simulate_output_feedback(cfg)


# ---------------------------------------------------------------------------
# Trajectory comparisons
# ---------------------------------------------------------------------------


def _check_common_grid(a: Trajectory, b: Trajectory) -> None:
    if len(a.times) != len(b.times):
        raise ValueError(
            f"trajectories have {len(a.times)} and {len(b.times)} records; "
            "refusing to compare different grids"
        )
    if not np.allclose(a.times, b.times, rtol=0.0, atol=1e-9):
        raise ValueError("trajectories are not on a common recording grid")


def recovery_metric(
    traj_of: Trajectory,
    traj_red: Trajectory,
    transient_cutoff: float = 0.0,
):
    """Sup-norm deviations (theta, eta_tilde) between two runs on the same
    recording grid, restricted to t >= transient_cutoff.

    Both runs must start from the same plant state and filter error for the
    comparison to mean anything; that precondition is the caller's
    responsibility (the sweep harness guarantees it).
    """
    _check_common_grid(traj_of, traj_red)
    keep = traj_of.times >= transient_cutoff
    dev_theta = np.linalg.norm(traj_of.theta[keep] - traj_red.theta[keep], axis=1)
    dev_eta_tilde = np.linalg.norm(
        traj_of.eta_tilde[keep] - traj_red.eta_tilde[keep], axis=1)
    return float(np.max(dev_theta)), float(np.max(dev_eta_tilde))


def epsilon_sweep(
    cfg: SimConfig,
    epsilons: Sequence[float],
    transient_cutoff: float = 0.0,
) -> RecoveryReport:
    """One reduced run plus one output-feedback run per epsilon, all from
    the same initial plant state and filter error, compared on a common
    recording grid.

    ``epsilons`` must be positive and sorted in descending order.  Steps
    are re-derived per epsilon (epsilon/20, trimmed to the recording grid),
    so any explicit step in ``cfg`` applies only indirectly.
    """
    eps_list = [float(e) for e in epsilons]
    if not eps_list:
        raise ValueError("epsilons must not be empty")
    if any(e <= 0 for e in eps_list):
        raise ValueError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilons must be sorted in strictly descending order")

    red_cfg = replace(cfg, mode="reduced", step=None, record_stride=None)
    traj_red = simulate_reduced(red_cfg)

    dev_theta = []
    dev_eta_tilde = []
    for e in eps_list:
        of_cfg = replace(
            cfg,
            mode="output_feedback",
            gains=EhgoGains(cfg.gains.alphas, e),
            step=None,
            record_stride=None,
        )
        try:
            traj = simulate_output_feedback(of_cfg)
        except (IntegrationError, SimulationError) as exc:
            raise type(exc)(f"epsilon={e!r}: {exc}") from exc
        d_theta, d_eta = recovery_metric(traj, traj_red, transient_cutoff)
        dev_theta.append(d_theta)
        dev_eta_tilde.append(d_eta)

    return RecoveryReport(
        epsilons=tuple(eps_list),
        sup_dev_theta=tuple(dev_theta),
        sup_dev_eta_tilde=tuple(dev_eta_tilde),
        transient_cutoff=float(transient_cutoff),
    )


def peaking_report(
    traj: Trajectory,
    gains: EhgoGains,
    P0=None,
    tube_level: float | None = None,
) -> PeakingReport:
    """Peak scaled observer error and the entry time into the tube
    W <= tube_level * epsilon^2 (first time after which the bound holds for
    the remainder of the run; None if it never does).

    With ``P0`` given, W is recomputed as chi' P0 chi from the recorded
    chi; otherwise the recorded W is used.  The default tube level is
    calibrated from the end of the run as 4 W(t_end) / epsilon^2 -- a
    diagnostic yardstick, not a theorem constant.
    """
    if P0 is not None:
        P0 = np.atleast_2d(np.asarray(P0, dtype=float))
        W = np.einsum("ni,ij,nj->n", traj.chi, P0, traj.chi)
    else:
        W = traj.W
    eps2 = gains.epsilon ** 2
    if tube_level is None:
        tube_level = 4.0 * float(W[-1]) / eps2
    max_abs_chi = float(np.max(np.linalg.norm(traj.chi, axis=1)))
    outside = np.flatnonzero(W > tube_level * eps2)
    if outside.size == 0:
        entry = float(traj.times[0])
    elif outside[-1] == len(traj.times) - 1:
        entry = None
    else:
        entry = float(traj.times[outside[-1] + 1])
    return PeakingReport(max_abs_chi=max_abs_chi, entry_time=entry,
                         tube_level=float(tube_level))
