"""Fixed-step ODE integration and small dense linear-algebra helpers.

Everything here operates on small systems (a handful of states, matrices of
order <= 8 or so) where determinism and exactness matter more than speed:
classical RK4 with a fixed step, a direct Lyapunov-equation solve, and
stability checks for the observer gain polynomials.

All functions are pure; there is no shared mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Eigenvalues with real part above -HURWITZ_TOL are treated as unstable.
# Conservative: marginal polynomials are rejected for gain design.
HURWITZ_TOL = 1e-9


class IntegrationError(RuntimeError):
    """A right-hand side or state stopped being finite during integration."""


@dataclass(frozen=True)
class VectorField:
    """A first-order ODE right-hand side ``x' = rhs(t, x)``.

    ``rhs`` must return a vector of length ``dimension`` for every input.
    """

    dimension: int
    rhs: Callable[[float, np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")


@dataclass(frozen=True)
class OdeResult:
    """Recorded grid of an integration run: ``states[k]`` is the state at
    ``times[k]``."""

    times: np.ndarray
    states: np.ndarray


def _eval_rhs(field: VectorField, t: float, x: np.ndarray) -> np.ndarray:
    dx = np.asarray(field.rhs(t, x), dtype=float)
    if dx.shape != (field.dimension,):
        raise ValueError(
            f"rhs returned shape {dx.shape}, expected ({field.dimension},)"
        )
    if not np.all(np.isfinite(dx)):
        raise IntegrationError(f"non-finite derivative at t={t:.9g}")
    return dx


def rk4_step(field: VectorField, t: float, x: np.ndarray, h: float) -> np.ndarray:
    """Advance ``x`` by one classical 4th-order Runge-Kutta step of size ``h``.

    Deterministic for identical inputs.  Raises :class:`IntegrationError`
    naming the offending time if the state or any stage derivative is not
    finite.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (field.dimension,):
        raise ValueError(f"state has shape {x.shape}, expected ({field.dimension},)")
    if not np.all(np.isfinite(x)):
        raise IntegrationError(f"non-finite state at t={t:.9g}")
    k1 = _eval_rhs(field, t, x)
    k2 = _eval_rhs(field, t + 0.5 * h, x + 0.5 * h * k1)
    k3 = _eval_rhs(field, t + 0.5 * h, x + 0.5 * h * k2)
    k4 = _eval_rhs(field, t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_fixed(
    field: VectorField,
    t0: float,
    x0: np.ndarray,
    h: float,
    t_end: float,
    record_stride: int = 1,
) -> OdeResult:
    """Integrate on a fixed grid, recording every ``record_stride``-th step.

    The span ``t_end - t0`` must be an integer number of steps (within
    roundoff) and that step count must be divisible by ``record_stride`` so
    that recorded samples tile the interval exactly.  The initial state is
    always the first record.
    """
    if t_end <= t0:
        raise ValueError("t_end must be greater than t0")
    if h <= 0:
        raise ValueError("step size h must be positive")
    if record_stride < 1:
        raise ValueError("record_stride must be a positive integer")
    span = t_end - t0
    n_steps = int(round(span / h))
    if n_steps < 1 or abs(n_steps * h - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(
            f"step h={h!r} does not tile the interval [{t0!r}, {t_end!r}]"
        )
    if n_steps % record_stride != 0:
        raise ValueError(
            f"{n_steps} steps is not divisible by record_stride={record_stride}"
        )

    x = np.asarray(x0, dtype=float).copy()
    n_rec = n_steps // record_stride
    times = t0 + h * record_stride * np.arange(n_rec + 1)
    states = np.empty((n_rec + 1, field.dimension))
    states[0] = x
    for k in range(n_steps):
        x = rk4_step(field, t0 + k * h, x, h)
        if (k + 1) % record_stride == 0:
            states[(k + 1) // record_stride] = x
    return OdeResult(times=times, states=states)


def hurwitz_check(alphas) -> bool:
    """True iff ``s^m + alphas[0] s^(m-1) + ... + alphas[m-1]`` has all roots
    with real part below ``-HURWITZ_TOL``.

    Decided through the roots of the monic polynomial; marginal roots
    (|Re| < tol) count as unstable.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1:
        raise ValueError("alphas must be a 1-D coefficient vector")
    roots = np.roots(np.concatenate(([1.0], alphas)))
    if roots.size == 0:
        return True
    return bool(np.max(roots.real) < -HURWITZ_TOL)


def companion_lambda(alphas) -> np.ndarray:
    """Observable-canonical companion matrix with ``-alphas`` in the first
    column and an identity super-diagonal.

    Its characteristic polynomial is ``s^m + alphas[0] s^(m-1) + ... +
    alphas[m-1]``; it is Hurwitz exactly when :func:`hurwitz_check` accepts
    ``alphas``.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or alphas.size < 1:
        raise ValueError("alphas must be a non-empty 1-D coefficient vector")
    m = alphas.size
    lam = np.zeros((m, m))
    lam[:, 0] = -alphas
    for i in range(m - 1):
        lam[i, i + 1] = 1.0
    return lam


def solve_lyapunov(lam, residual_tol: float = 1e-10) -> np.ndarray:
    """Solve ``P @ lam + lam.T @ P = -I`` for the positive definite ``P``.

    ``lam`` must be Hurwitz (otherwise no positive definite solution exists
    and a ``ValueError`` is raised).  Solved directly as a dense linear
    system in the matrix entries; adequate for the small orders this
    library uses.  The result is symmetrized and checked: residual
    max-norm <= ``residual_tol`` and strictly positive eigenvalues.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
        raise ValueError("lam must be a square matrix")
    n = lam.shape[0]
    eigs = np.linalg.eigvals(lam)
    if np.max(eigs.real) >= -HURWITZ_TOL:
        raise ValueError(
            "matrix is not Hurwitz; the Lyapunov equation has no positive "
            "definite solution"
        )
    # Column-major vectorization: vec(P L) = (L^T (x) I) vec(P),
    # vec(L^T P) = (I (x) L^T) vec(P).
    eye = np.eye(n)
    coeff = np.kron(lam.T, eye) + np.kron(eye, lam.T)
    p = np.linalg.solve(coeff, -eye.ravel())
    P = p.reshape(n, n, order="F")
    P = 0.5 * (P + P.T)
    residual = np.max(np.abs(P @ lam + lam.T @ P + eye))
    if residual > residual_tol:
        raise ValueError(f"Lyapunov residual {residual:.3e} exceeds tolerance")
    if np.min(np.linalg.eigvalsh(P)) <= 0.0:
        raise ValueError("Lyapunov solution is not positive definite")
    return P
