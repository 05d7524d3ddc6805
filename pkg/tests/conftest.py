"""Shared fixtures: the expensive reference runs are computed once per
session and reused across unit and acceptance tests."""

import time
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

import ofsim


@pytest.fixture(scope="session")
def paper_cfg():
    """The bundled example study with its stock parameters."""
    return ofsim.SimConfig()


@pytest.fixture(scope="session")
def paper_run(paper_cfg):
    """Full 20 s output-feedback run at epsilon = 1e-3, with wall time."""
    started = time.perf_counter()
    traj = ofsim.simulate_output_feedback(paper_cfg)
    wall = time.perf_counter() - started
    return SimpleNamespace(cfg=paper_cfg, traj=traj, wall=wall)


@pytest.fixture(scope="session")
def reduced_run(paper_cfg):
    cfg = replace(paper_cfg, mode="reduced")
    traj = ofsim.simulate_reduced(cfg)
    return SimpleNamespace(cfg=cfg, traj=traj)


@pytest.fixture(scope="session")
def eps01_run(paper_cfg):
    """Output-feedback run at the coarser epsilon = 1e-2."""
    cfg = replace(paper_cfg, gains=ofsim.EhgoGains((5.0, 1.0), 0.01))
    traj = ofsim.simulate_output_feedback(cfg)
    return SimpleNamespace(cfg=cfg, traj=traj)


def _chain3_system():
    def a1(xi, u):
        return np.array([[0.5]])

    def phi0(xi, u):
        return np.array([xi[0]])

    def c1(xi, u):
        return np.array([1.0])

    def a(xi, u):
        return float(u)

    def phi1(eta_hat, xi_hat):
        return 0.5 * eta_hat[0] + xi_hat[0]

    return ofsim.NormalFormSystem(
        n=3, rho=2, A1_fn=a1, phi0_fn=phi0, C1_fn=c1, a_fn=a, phi1_fn=phi1,
        name="chain3")


def _chain3_feedback():
    # pole placement at (-1, -2, -3) for the linearized loop
    def gamma(eta, xi):
        return -14.125 * eta[0] - 14.25 * xi[0] - 6.5 * xi[1]

    return ofsim.FeedbackLaw(gamma, name="chain3")


@pytest.fixture(scope="session")
def chain3():
    """A relative-degree-two plant with unstable internal dynamics,
    registered for general-dimension coverage."""
    if "chain3" not in ofsim.registered_systems():
        ofsim.register_system("chain3", _chain3_system(), _chain3_feedback())
    return ofsim.SimConfig(
        system="chain3",
        gains=ofsim.EhgoGains((3.0, 3.0, 1.0), 0.01),
        weights=ofsim.EkfWeights(1.0, 1.0, 0.5),
        eta0=(0.3,), xi0=(0.5, -0.2),
        eta_hat0=(0.0,), xi_hat0=(0.0, 0.0),
        t_final=10.0,
    )
