"""Plant family: internal dynamics linear in eta driving an integrator chain.

The systems handled here have the structure

    eta' = A1(xi, u) eta + phi0(xi, u)          (internal states, dim n-rho)
    xi'  = A xi + B [C1(xi, u) eta + a(xi, u)]  (chain of rho integrators)
    y    = xi_1                                 (scalar measured output)

with scalar input u.  The zero dynamics (eta' with xi held at 0) may be
unstable, i.e. the plant may be non-minimum phase.  A system is a stateless
bundle of the four functions A1, phi0, C1, a plus phi1, the closed-loop
derivative of the virtual output sigma = C1(xi, u) eta under the associated
state feedback; phi1 is supplied analytically per system and validated
numerically elsewhere (see observers.validate_phi1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import IntegrationError


@dataclass(frozen=True)
class NormalFormSystem:
    """Immutable bundle describing one plant.

    ``A1_fn(xi, u)`` returns an (n-rho, n-rho) matrix, ``phi0_fn(xi, u)``
    an (n-rho,) vector, ``C1_fn(xi, u)`` an (n-rho,) row vector, and
    ``a_fn(xi, u)`` a scalar; ``xi`` is always the (rho,) chain state.
    ``phi1_fn(eta_hat, xi_hat)`` returns the scalar derivative of
    ``C1 eta`` along closed-loop trajectories.

    At the origin the plant must be at rest: phi0(0, 0) = 0 and
    a(0, 0) = 0 (checked cheaply via :func:`equilibrium_defect`).
    """

    n: int
    rho: int
    A1_fn: Callable[[np.ndarray, float], np.ndarray]
    phi0_fn: Callable[[np.ndarray, float], np.ndarray]
    C1_fn: Callable[[np.ndarray, float], np.ndarray]
    a_fn: Callable[[np.ndarray, float], float]
    phi1_fn: Callable[[np.ndarray, np.ndarray], float]
    name: str = "custom"

    def __post_init__(self):
        if self.rho < 1:
            raise ValueError("relative degree rho must be at least 1")
        if self.n - self.rho < 1:
            raise ValueError(
                "need at least one internal state (n - rho >= 1); a plant "
                "with no internal dynamics does not fit this architecture"
            )

    @property
    def n_internal(self) -> int:
        return self.n - self.rho


@dataclass
class PlantState:
    """Full plant state split as (eta, xi)."""

    eta: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))


def chain_matrices(rho: int):
    """(A, B, C) of the rho-integrator chain: ones on the super-diagonal,
    input enters the last row, output is the first component."""
    if rho < 1:
        raise ValueError("rho must be at least 1")
    A = np.zeros((rho, rho))
    for i in range(rho - 1):
        A[i, i + 1] = 1.0
    B = np.zeros(rho)
    B[-1] = 1.0
    C = np.zeros(rho)
    C[0] = 1.0
    return A, B, C


def _finite_or_raise(value, fn_name: str):
    if not np.all(np.isfinite(value)):
        raise IntegrationError(f"{fn_name} produced a non-finite value")
    return value


def plant_rhs(system: NormalFormSystem, state: PlantState, u: float):
    """(eta', xi') of the plant at ``state`` under input ``u``."""
    eta, xi = state.eta, state.xi
    A1v = _finite_or_raise(np.asarray(system.A1_fn(xi, u), dtype=float), "A1")
    phi0v = _finite_or_raise(np.asarray(system.phi0_fn(xi, u), dtype=float), "phi0")
    C1v = _finite_or_raise(np.asarray(system.C1_fn(xi, u), dtype=float), "C1")
    av = _finite_or_raise(float(system.a_fn(xi, u)), "a")
    eta_dot = A1v @ eta + phi0v
    xi_dot = np.empty(system.rho)
    xi_dot[:-1] = xi[1:]
    xi_dot[-1] = float(C1v @ eta) + av
    return eta_dot, xi_dot


def plant_output(system: NormalFormSystem, state: PlantState) -> float:
    """Measured output y = first chain component."""
    return float(state.xi[0])


def virtual_output(system: NormalFormSystem, state: PlantState, u: float) -> float:
    """sigma = C1(xi, u) eta, the quantity the cascaded filter treats as its
    measurement."""
    C1v = np.asarray(system.C1_fn(state.xi, u), dtype=float)
    return float(C1v @ state.eta)


def equilibrium_defect(system: NormalFormSystem) -> float:
    """max(|phi0(0,0)|, |a(0,0)|): zero (to roundoff) for a well-posed plant."""
    zero_xi = np.zeros(system.rho)
    phi0v = np.asarray(system.phi0_fn(zero_xi, 0.0), dtype=float)
    av = float(system.a_fn(zero_xi, 0.0))
    return max(float(np.max(np.abs(phi0v))) if phi0v.size else 0.0, abs(av))


# ---------------------------------------------------------------------------
# Bundled example plant: a non-minimum-phase SISO system,
#   eta' = xi + eta cos(xi),  xi' = xi^2 + eta + u,  y = xi,
# so A1 = cos(xi), phi0 = xi, C1 = 1, a = xi^2 + u.  Its zero dynamics are
# eta' = eta (unstable).  The virtual output is sigma = eta, whose
# closed-loop derivative is phi1(eta, y) = y + eta cos(y).
# ---------------------------------------------------------------------------


def _example_a1(xi, u):
    return np.array([[math.cos(xi[0])]])


def _example_phi0(xi, u):
    return np.array([xi[0]])


def _example_c1(xi, u):
    return np.array([1.0])


def _example_a(xi, u):
    return xi[0] * xi[0] + u


def _example_phi1(eta_hat, xi):
    return xi[0] + eta_hat[0] * math.cos(xi[0])


def example_system() -> NormalFormSystem:
    """The bundled second-order non-minimum-phase example (n=2, rho=1)."""
    return NormalFormSystem(
        n=2,
        rho=1,
        A1_fn=_example_a1,
        phi0_fn=_example_phi0,
        C1_fn=_example_c1,
        a_fn=_example_a,
        phi1_fn=_example_phi1,
        name="example",
    )
