import math
from dataclasses import replace

import numpy as np
import pytest

from ofsim import (
    EhgoGains,
    EkfWeights,
    ObserverState,
    SaturationConfig,
    VectorField,
    ekf_gain,
    ekf_rhs,
    ehgo_gain,
    ehgo_rhs,
    example_feedback,
    example_system,
    integrate_fixed,
    pd_monitor,
    riccati_rhs,
    state_feedback_rollout,
    validate_phi1,
)

ARE_ROOT = 10.0 + math.sqrt(110.0)  # positive root of 0.1 P^2 - 2P - 1 = 0


def _weights():
    return EkfWeights(1.0, 10.0, 0.1)


class TestEkfWeights:
    def test_scalar_promotion(self):
        w = _weights()
        assert w.Q == ((1.0,),)
        assert np.array_equal(w.q_matrix(), [[1.0]])
        assert np.array_equal(w.p0_matrix(), [[0.1]])
        assert w.order == 1

    def test_vector_becomes_diagonal(self):
        w = EkfWeights([1.0, 2.0], 1.0, [0.5, 0.5])
        assert np.array_equal(w.q_matrix(), np.diag([1.0, 2.0]))

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError, match="positive definite"):
            EkfWeights(-1.0, 1.0, 0.1)
        with pytest.raises(ValueError, match="R"):
            EkfWeights(1.0, 0.0, 0.1)
        with pytest.raises(ValueError, match="symmetric"):
            EkfWeights([[1.0, 0.5], [0.0, 1.0]], 1.0, np.eye(2))
        with pytest.raises(ValueError, match="order"):
            EkfWeights(np.eye(2), 1.0, 0.1)


class TestEhgoGains:
    def test_rejects_non_hurwitz(self):
        with pytest.raises(ValueError, match="Hurwitz"):
            EhgoGains((-1.0, 1.0), 0.001)

    def test_rejects_bad_epsilon_and_length(self):
        with pytest.raises(ValueError):
            EhgoGains((5.0, 1.0), 0.0)
        with pytest.raises(ValueError):
            EhgoGains((5.0,), 0.001)

    def test_rho(self):
        assert EhgoGains((5.0, 1.0), 0.001).rho == 1
        assert EhgoGains((3.0, 3.0, 1.0), 0.1).rho == 2


class TestRiccatiRhs:
    def test_flagship_instance(self):
        # A1 frozen at 1, C1 = 1, Q = 1, R = 10: dP/dt = 2P + 1 - 0.1 P^2
        dP = riccati_rhs([[0.1]], [[1.0]], [1.0], _weights())
        assert dP[0, 0] == pytest.approx(1.199, rel=1e-14)

    def test_vanishes_at_the_algebraic_root(self):
        dP = riccati_rhs([[ARE_ROOT]], [[1.0]], [1.0], _weights())
        assert abs(dP[0, 0]) <= 1e-9

    def test_all_state_terms_vanish_at_zero(self):
        # with P = 0 only the additive weight survives
        dP = riccati_rhs(np.zeros((1, 1)), [[123.0]], [7.0], _weights())
        assert np.array_equal(dP, _weights().q_matrix())

    def test_symmetric_output(self):
        rng = np.random.default_rng(5)
        A1 = rng.uniform(-1.0, 1.0, size=(3, 3))
        C1 = rng.uniform(-1.0, 1.0, size=3)
        S = rng.uniform(-1.0, 1.0, size=(3, 3))
        P = S @ S.T + np.eye(3)
        w = EkfWeights(np.eye(3), 2.0, np.eye(3))
        dP = riccati_rhs(P, A1, C1, w)
        assert np.max(np.abs(dP - dP.T)) < 1e-12


class TestEkfGain:
    def test_flagship_gain_is_tenth_of_p(self):
        for p in (0.1, 2.0, ARE_ROOT):
            L = ekf_gain([[p]], [1.0], 10.0)
            assert L[0] == pytest.approx(0.1 * p, rel=1e-15)

    def test_zero_row_vector(self):
        assert np.array_equal(ekf_gain(np.eye(2), np.zeros(2), 5.0), np.zeros(2))

    def test_selects_column(self):
        L = ekf_gain(np.eye(2), np.array([1.0, 0.0]), 2.0)
        assert np.array_equal(L, [0.5, 0.0])


def _obs(eta_hat, xi_hat, sigma_hat, P=0.1):
    return ObserverState(eta_hat=eta_hat, xi_hat=xi_hat, sigma_hat=sigma_hat, P=[[P]])


class TestEkfRhs:
    def test_equilibrium(self):
        sys_ = example_system()
        d = ekf_rhs(sys_, _obs([0.0], [0.0], 0.0), [2.0], 0.0, 0.0,
                    y_substitute=0.0)
        assert d[0] == 0.0

    def test_hand_evaluation(self):
        # estimate 1 with zero output and zero virtual output, gain 2:
        # cos(0) * 1 + 0 + 2 * (0 - 1) = -1
        sys_ = example_system()
        d = ekf_rhs(sys_, _obs([1.0], [0.3], 0.0), [2.0], 0.0, 0.0,
                    y_substitute=0.0)
        assert d[0] == pytest.approx(-1.0, rel=1e-15)

    def test_virtual_output_is_clamped_inside(self):
        sys_ = example_system()
        sat = SaturationConfig(M_xi=100.0, M_sigma=10.0)
        obs = _obs([0.0], [0.0], 0.0)
        clamped = ekf_rhs(sys_, obs, [1.0], 25.0, 0.0, sat=sat, y_substitute=0.0)
        explicit = ekf_rhs(sys_, obs, [1.0], 10.0, 0.0, y_substitute=0.0)
        assert clamped[0] == explicit[0]
        assert clamped[0] == pytest.approx(10.0, rel=1e-15)


class TestEhgoGain:
    def test_flagship_values(self):
        H, last = ehgo_gain(EhgoGains((5.0, 1.0), 0.001))
        assert H == pytest.approx([5000.0], rel=1e-14)
        assert last == pytest.approx(1e6, rel=1e-14)

    def test_unit_epsilon_passthrough(self):
        H, last = ehgo_gain(EhgoGains((5.0, 1.0), 1.0))
        assert np.array_equal(H, [5.0])
        assert last == 1.0

    def test_powers_of_ten(self):
        H, last = ehgo_gain(EhgoGains((3.0, 3.0, 1.0), 0.1))
        assert H == pytest.approx([30.0, 300.0], rel=1e-14)
        assert last == pytest.approx(1000.0, rel=1e-14)

    def test_scaling_law_per_component(self):
        g1 = EhgoGains((3.0, 3.0, 1.0), 0.02)
        g2 = EhgoGains((3.0, 3.0, 1.0), 0.002)
        H1, last1 = ehgo_gain(g1)
        H2, last2 = ehgo_gain(g2)
        assert H2 / H1 == pytest.approx([10.0, 100.0], rel=1e-13)
        assert last2 / last1 == pytest.approx(1000.0, rel=1e-13)


class TestEhgoRhs:
    def test_equilibrium(self):
        sys_ = example_system()
        g = EhgoGains((5.0, 1.0), 0.001)
        xi_dot, sigma_dot = ehgo_rhs(sys_, _obs([0.0], [0.0], 0.0), 0.0, 0.0, g,
                                     y_substitute=0.0)
        assert xi_dot[0] == 0.0 and sigma_dot == 0.0

    def test_peaking_magnitudes(self):
        # the 0.8 innovation is multiplied by 5/eps and 1/eps^2
        sys_ = example_system()
        g = EhgoGains((5.0, 1.0), 0.001)
        xi_dot, sigma_dot = ehgo_rhs(sys_, _obs([0.0], [0.1], 0.0), 0.9, 0.0, g,
                                     y_substitute=0.9)
        assert xi_dot[0] == pytest.approx(0.81 + 5000.0 * 0.8, rel=1e-12)
        assert sigma_dot == pytest.approx(0.9 + 1e6 * 0.8, rel=1e-12)

    def test_unit_epsilon(self):
        sys_ = example_system()
        g = EhgoGains((5.0, 1.0), 1.0)
        xi_dot, _ = ehgo_rhs(sys_, _obs([0.0], [0.1], 0.0), 0.9, 0.0, g,
                             y_substitute=0.9)
        assert xi_dot[0] == pytest.approx(0.81 + 5.0 * 0.8, rel=1e-14)

    def test_general_mode_uses_the_chain_estimate(self):
        sys_ = example_system()
        g = EhgoGains((5.0, 1.0), 0.001)
        xi_dot, _ = ehgo_rhs(sys_, _obs([0.0], [0.1], 0.0), 0.9, 0.0, g)
        assert xi_dot[0] == pytest.approx(0.1 ** 2 + 5000.0 * 0.8, rel=1e-12)

    def test_rejects_mismatched_gain_length(self):
        sys_ = example_system()
        g = EhgoGains((3.0, 3.0, 1.0), 0.1)
        with pytest.raises(ValueError, match="rho"):
            ehgo_rhs(sys_, _obs([0.0], [0.0], 0.0), 0.0, 0.0, g)


class TestValidatePhi1:
    def _probe(self):
        return state_feedback_rollout(example_system(), example_feedback(),
                                      [0.5], [0.9], t_final=1.0, step=1e-4)

    def test_registered_phi1_matches_finite_difference(self):
        assert validate_phi1(example_system(), self._probe()) < 1e-5

    def test_detects_a_wrong_phi1(self):
        broken = replace(example_system(), phi1_fn=lambda eh, xih: 0.0)
        assert validate_phi1(broken, self._probe()) > 0.1

    def test_zero_trajectory_has_zero_discrepancy(self):
        probe = state_feedback_rollout(example_system(), example_feedback(),
                                       [0.0], [0.0], t_final=0.1, step=1e-4)
        assert validate_phi1(example_system(), probe) == 0.0


class TestPdMonitor:
    def test_diagonal(self):
        assert pd_monitor(np.diag([1.0, 4.0])) == (1.0, 4.0, 0.0)

    def test_two_by_two(self):
        summary = pd_monitor([[2.0, 1.0], [1.0, 2.0]])
        assert summary.lambda_min == pytest.approx(1.0, abs=1e-12)
        assert summary.lambda_max == pytest.approx(3.0, abs=1e-12)
        assert summary.symmetric_defect == 0.0

    def test_reports_asymmetry(self):
        summary = pd_monitor([[1.0, 1e-3], [0.0, 1.0]])
        assert summary.symmetric_defect == pytest.approx(1e-3)


class TestRiccatiFlow:
    def test_scalar_algebraic_root_is_attracting(self):
        # integrate the matrix flow with the plant coefficient frozen at 1
        w = _weights()

        def rhs(t, p):
            return riccati_rhs([[p[0]]], [[1.0]], [1.0], w).ravel()

        sol = integrate_fixed(VectorField(1, rhs), 0.0, np.array([0.1]),
                              1e-3, 10.0, record_stride=1000)
        assert abs(sol.states[-1, 0] - ARE_ROOT) / ARE_ROOT < 1e-3

    def test_flagship_run_keeps_riccati_healthy(self, paper_run):
        # empirical witness that the gain matrix stayed symmetric positive
        # definite over the whole closed-loop run
        traj = paper_run.traj
        summaries = [pd_monitor(P) for P in traj.P[::50]]
        assert min(s.lambda_min for s in summaries) > 0.0
        assert max(s.symmetric_defect for s in summaries) <= 1e-9
        values = traj.P[:, 0, 0]
        assert values.min() >= 0.1 - 1e-12
        assert values.max() <= 21.0
