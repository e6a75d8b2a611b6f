import math

import numpy as np
import pytest

from pbnn.oracles import (
    GRID_DELTAS,
    GRID_SIGMAS,
    TwoStateTarget,
    averaged_detailed_balance_residual,
    expected_acceptance,
    expected_acceptance_quadrature,
    grid_checks,
    simulate_two_state,
    total_variation,
    two_state_stationary,
)

# noise-averaged acceptance, frozen from an independent implementation of
# Phi((-d-c)/s) + exp(-d-c+s^2/2) * Phi((d+c)/s - s)
FROZEN_ACCEPTANCE = [
    (1.0, 1.0, True, 0.3211820251133721),
    (1.0, 1.0, False, 0.4619205837877738),
    (0.7, 1.3, False, 0.5531199842754884),
    (0.7, 1.3, True, 0.3435674366098365),
    (-2.0, 0.5, True, 0.9999905608313651),
    (0.0, 2.0, True, 0.31731050786291415),
    (3.0, 3.0, False, 0.2606142716323606),
]


class TestExpectedAcceptance:
    @pytest.mark.parametrize("delta,sigma,penalty,expected", FROZEN_ACCEPTANCE)
    def test_frozen_values(self, delta, sigma, penalty, expected):
        assert expected_acceptance(delta, sigma, penalty) == pytest.approx(expected, rel=1e-12)

    def test_noiseless_limit_is_plain_metropolis(self):
        assert expected_acceptance(0.7, 0.0, penalty=True) == pytest.approx(math.exp(-0.7))
        assert expected_acceptance(-0.3, 0.0, penalty=True) == 1.0
        assert expected_acceptance(0.0, 0.0, penalty=False) == 1.0

    def test_closed_form_agrees_with_quadrature_on_grid(self):
        worst = 0.0
        for d in GRID_DELTAS:
            for s in GRID_SIGMAS:
                for penalty in (True, False):
                    a = expected_acceptance(d, s, penalty)
                    q = expected_acceptance_quadrature(d, s, penalty)
                    worst = max(worst, abs(a - q))
        assert worst < 1e-8

    def test_penalty_only_reduces_acceptance(self):
        for d in (-2.0, 0.0, 1.5):
            assert expected_acceptance(d, 1.2, True) <= expected_acceptance(d, 1.2, False)

    def test_rejects_negative_sigma(self):
        with pytest.raises(ValueError):
            expected_acceptance(0.0, -1.0)
        with pytest.raises(ValueError):
            TwoStateTarget(sigma=-0.5)


class TestDetailedBalance:
    def test_residual_vanishes_with_penalty(self):
        for d in GRID_DELTAS:
            for s in GRID_SIGMAS:
                assert averaged_detailed_balance_residual(d, s, penalty=True) < 1e-12

    def test_residual_without_penalty_frozen_point(self):
        r = averaged_detailed_balance_residual(0.7, 1.3, penalty=False)
        assert r == pytest.approx(0.12627473879582118, rel=1e-9)
        assert r > 0.05


class TestStationary:
    def test_penalty_recovers_boltzmann_weights(self):
        pi = two_state_stationary(TwoStateTarget(1.0, 1.0), penalty=True)
        np.testing.assert_allclose(pi, [0.7310585786300049, 0.26894142136999516], rtol=1e-12)
        assert pi[1] / pi[0] == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_ratio_holds_across_grid(self):
        for d in (-3.0, -0.5, 0.9, 2.0):
            for s in (0.0, 1.0, 2.5):
                pi = two_state_stationary(TwoStateTarget(d, s), penalty=True)
                assert pi[1] / pi[0] == pytest.approx(math.exp(-d), rel=1e-10)

    def test_no_penalty_is_visibly_biased(self):
        exact = two_state_stationary(TwoStateTarget(1.0, 1.5), penalty=True)
        biased = two_state_stationary(TwoStateTarget(1.0, 1.5), penalty=False)
        np.testing.assert_allclose(biased, [0.644706514279419, 0.3552934857205809], rtol=1e-12)
        assert total_variation(exact, biased) > 0.05


class TestSimulation:
    def test_penalised_chain_hits_the_exact_law(self):
        target = TwoStateTarget(1.0, 1.0)
        occ = simulate_two_state(target, penalty=True, n_steps=200_000, seed=0)
        assert total_variation(occ, two_state_stationary(target, penalty=True)) < 0.02

    def test_unpenalised_chain_hits_the_biased_law(self):
        target = TwoStateTarget(1.0, 1.5)
        occ = simulate_two_state(target, penalty=False, n_steps=200_000, seed=1)
        assert total_variation(occ, two_state_stationary(target, penalty=False)) < 0.02
        # and it is measurably off the exact Boltzmann occupancy
        assert total_variation(occ, two_state_stationary(target, penalty=True)) > 0.05

    def test_simulation_is_seed_deterministic(self):
        target = TwoStateTarget(0.5, 1.0)
        a = simulate_two_state(target, penalty=True, n_steps=5000, seed=42)
        b = simulate_two_state(target, penalty=True, n_steps=5000, seed=42)
        np.testing.assert_array_equal(a, b)


def test_total_variation_hand_case():
    assert total_variation([0.2, 0.8], [0.5, 0.5]) == pytest.approx(0.3)


def test_grid_checks_all_pass_and_are_well_formed():
    rows = grid_checks()
    assert rows, "grid must not be empty"
    assert all(set(r) == {"check", "delta", "sigma", "value", "threshold", "passed"} for r in rows)
    failed = [r for r in rows if not r["passed"]]
    assert failed == []
    names = {r["check"] for r in rows}
    assert "detailed_balance_broken_without_penalty" in names
