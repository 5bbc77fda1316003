import math

import numpy as np
import pytest

from lqpower import (
    ChannelParams,
    OptimizerConfig,
    SystemParams,
    baseline_policy,
    compute_tables,
    coordinate_sweep,
    expected_cost,
    optimize_policy,
    policy_to_success,
    slot_candidates,
    stationary_success,
)
from oracles import random_channel, random_system

CH = ChannelParams(gamma=1.0, sigma2=1.0, gbar=1.0, p_max=3.0)

NOMINAL = SystemParams(a=1.1, b=-1.0, k=1.0, q=1.0, r=0.5,
                       sigma_x2=1.0, sigma_d2=0.0, T=30)
CFG = OptimizerConfig(ex2_1=1.0)


class TestStationarySuccess:
    def test_analytic_construction(self):
        # theta/(pi ln^2 pi) equals e at pi = 1/e, so A = -e balances there
        root = stationary_success(-math.e, CH, 1e-12)
        assert root == pytest.approx(math.exp(-1), abs=1e-9)

    def test_bisection_root(self):
        # A = -5 places the root where pi ln^2 pi = 0.2
        root = stationary_success(-5.0, CH, 1e-12)
        assert root == pytest.approx(0.5459, abs=1e-4)
        assert root * math.log(root) ** 2 == pytest.approx(0.2, abs=1e-10)

    def test_slope_negative_on_whole_interval(self):
        # endpoint slope -13 + 9 e^(1/3) < 0: the cap is the candidate
        assert CH.theta / (CH.pi_max * math.log(CH.pi_max) ** 2) == pytest.approx(
            9 * math.exp(1 / 3), rel=1e-12)
        assert stationary_success(-13.0, CH, 1e-12) is None

    def test_slope_nonnegative_at_left_edge(self):
        # A + theta e^2/4 >= 0 leaves no interior root
        assert stationary_success(-1.0, CH, 1e-12) is None

    def test_empty_interval_when_cap_below_e_minus_2(self):
        ch = ChannelParams(gamma=1.0, sigma2=1.0, gbar=1.0, p_max=0.4)
        assert ch.pi_max < math.exp(-2)
        assert stationary_success(-50.0, ch, 1e-12) is None

    def test_invalid_tolerance(self):
        with pytest.raises(ValueError):
            stationary_success(-5.0, CH, 0.0)

    def test_residual_and_bracket_random(self):
        rng = np.random.default_rng(71)
        checked = 0
        while checked < 50:
            ch = random_channel(rng, min_pi_max=0.2)
            g_lo = ch.theta * math.e**2 / 4
            g_hi = ch.theta / (ch.pi_max * math.log(ch.pi_max) ** 2)
            if not g_lo < g_hi:
                continue
            A = -rng.uniform(g_lo, g_hi)
            root = stationary_success(A, ch, 1e-12)
            if root is None:
                continue  # A drawn at an endpoint, no strict sign change
            assert math.exp(-2) < root < ch.pi_max
            residual = A + ch.theta / (root * math.log(root) ** 2)
            assert abs(residual) <= 1e-10 * abs(A)
            checked += 1


class TestSlotCandidates:
    def _tables(self, sys, pi, ex2_1=1.0):
        return compute_tables(sys, CH, pi, ex2_1)

    def test_keep_when_slope_nonnegative(self):
        # terminal slot: A = ex2 * r k^2 >= 0 always keeps the incumbent
        s = SystemParams(a=1.1, b=-1.0, k=1.0, q=1.0, r=0.5,
                         sigma_x2=1.0, sigma_d2=0.0, T=1)
        tab = self._tables(s, np.zeros(1))
        assert slot_candidates(s, CH, tab, 0, 0.0) == (0.0,)

    def test_interior_root_candidates(self):
        # craft tables so A = -e exactly; candidates are {0, 1/e}
        s = SystemParams(a=1.1, b=-1.0, k=1.0, q=1.0, r=1.0,
                         sigma_x2=1.0, sigma_d2=0.0, T=2)
        tab = self._tables(s, np.zeros(2))
        tab.fbar[1] = (1.0 + math.e) / 1.2
        tab.ex2[0] = 1.0
        cands = slot_candidates(s, CH, tab, 0, 0.0)
        assert cands[0] == 0.0
        assert cands[1] == pytest.approx(math.exp(-1), abs=1e-9)

    def test_boundary_candidates_without_root(self):
        # A = -13 keeps the slope negative up to the cap
        s = SystemParams(a=1.1, b=-1.0, k=1.0, q=1.0, r=1.0,
                         sigma_x2=1.0, sigma_d2=0.0, T=2)
        tab = self._tables(s, np.zeros(2))
        tab.fbar[1] = 14.0 / 1.2
        tab.ex2[0] = 1.0
        cands = slot_candidates(s, CH, tab, 0, 0.0)
        assert cands == (0.0, CH.pi_max)


class TestCandidateAnalysisAgainstGridScan:
    """Dense 1-d scans of the true cost validate the two-branch case split."""

    def test_candidates_contain_the_slot_minimizer(self):
        rng = np.random.default_rng(202)
        checked_pair, checked_keep = 0, 0
        while checked_pair < 12 or checked_keep < 12:
            s = random_system(rng, t_min=2, t_max=9)
            ch = random_channel(rng)
            pi = rng.uniform(0, ch.pi_max, s.T)
            pi[rng.random(s.T) < 0.3] = 0.0
            tab = compute_tables(s, ch, pi, s.sigma_x2)
            t = int(rng.integers(0, s.T))
            cands = slot_candidates(s, ch, tab, t, pi[t])

            grid = np.linspace(0.0, ch.pi_max, 1001)
            costs = np.empty_like(grid)
            for i, v in enumerate(grid):
                trial = pi.copy()
                trial[t] = v
                costs[i] = expected_cost(s, ch, trial)

            if len(cands) == 2:
                best = min(expected_cost(s, ch,
                                         np.where(np.arange(s.T) == t, v, pi))
                           for v in cands)
                assert best <= costs.min() + 1e-11 * max(1.0, abs(costs.min()))
                checked_pair += 1
            else:
                # keep branch fires only when the cost never decreases in pi_t
                assert np.all(np.diff(costs)
                              >= -1e-11 * np.abs(costs).max())
                checked_keep += 1


class TestCoordinateSweep:
    def test_single_slot_stays_silent(self):
        s = SystemParams(a=1.1, b=-1.0, k=1.0, q=1.0, r=0.5,
                         sigma_x2=1.0, sigma_d2=0.0, T=1)
        policy, cost = coordinate_sweep(s, CH, CFG, np.zeros(1))
        assert policy[0] == 0.0
        assert cost == pytest.approx(1.0)

    def test_first_sweep_improves_nominal(self):
        zero_cost = expected_cost(NOMINAL, CH, np.zeros(30), 1.0)
        policy, cost = coordinate_sweep(NOMINAL, CH, CFG, np.zeros(30))
        assert cost < zero_cost
        assert np.count_nonzero(policy) == 1

    def test_never_increases_cost(self):
        rng = np.random.default_rng(81)
        for _ in range(20):
            s = random_system(rng, t_max=12)
            ch = random_channel(rng)
            p = rng.uniform(0, ch.p_max, s.T)
            p[rng.random(s.T) < 0.4] = 0.0
            cfg = OptimizerConfig()
            incumbent = expected_cost(s, ch, policy_to_success(p, ch))
            _, cost = coordinate_sweep(s, ch, cfg, p)
            assert cost <= incumbent + 1e-12 * abs(incumbent)

    def test_converged_policy_is_fixed_point(self):
        trace = optimize_policy(NOMINAL, CH, CFG)
        assert trace.converged
        policy, cost = coordinate_sweep(NOMINAL, CH, CFG, trace.policy)
        assert np.array_equal(policy, trace.policy)
        assert cost == trace.cost


class TestOptimizePolicy:
    def test_nominal_profile(self):
        trace = optimize_policy(NOMINAL, CH, CFG)
        nz = np.nonzero(trace.policy)[0]
        # transmissions fill a prefix of slots and stop around t = 8
        assert len(nz) > 0
        assert np.array_equal(nz, np.arange(len(nz)))
        assert 7 <= len(nz) + 1 <= 9
        # powers decrease over the transmitting prefix
        assert np.all(np.diff(trace.policy[nz]) < 0)
        # strictly beats both reference policies
        full = policy_to_success(baseline_policy("full_power", CH, 30), CH)
        assert trace.cost < expected_cost(NOMINAL, CH, full, 1.0)
        assert trace.cost < expected_cost(NOMINAL, CH, np.zeros(30), 1.0)

    def test_single_slot(self):
        s = SystemParams(a=1.1, b=-1.0, k=1.0, q=1.0, r=0.5,
                         sigma_x2=1.0, sigma_d2=0.0, T=1)
        trace = optimize_policy(s, CH, OptimizerConfig(ex2_1=2.0))
        assert np.array_equal(trace.policy, np.zeros(1))
        assert trace.cost == pytest.approx(s.q * 2.0)

    def test_descent_terminal_and_feasibility(self):
        rng = np.random.default_rng(91)
        for _ in range(25):
            s = random_system(rng, t_max=15)
            ch = random_channel(rng)
            trace = optimize_policy(s, ch, OptimizerConfig())
            assert np.all(np.diff(trace.cost_history) <= 0)
            assert trace.policy[-1] == 0.0
            assert np.all(trace.policy >= 0) and np.all(trace.policy <= ch.p_max)
            assert np.all(trace.success >= 0) and np.all(trace.success <= ch.pi_max)

    def test_candidate_dominance(self):
        rng = np.random.default_rng(92)
        for _ in range(15):
            s = random_system(rng, t_max=12)
            ch = random_channel(rng)
            trace = optimize_policy(s, ch, OptimizerConfig())
            open_cost = expected_cost(s, ch, np.zeros(s.T))
            full = policy_to_success(baseline_policy("full_power", ch, s.T), ch)
            full_cost = expected_cost(s, ch, full)
            assert trace.cost <= open_cost + 1e-12 * open_cost
            assert trace.cost <= full_cost + 1e-12 * full_cost

    def test_huge_input_weight_still_transmits_when_it_pays(self):
        # even at r = 500 an early transmission saves far more tail cost
        # than it adds, so the policy is not all-zero (verified against the
        # enumeration oracle at smaller horizons)
        s = SystemParams(a=1.1, b=-1.0, k=1.0, q=1.0, r=500.0,
                         sigma_x2=1.0, sigma_d2=0.0, T=30)
        trace = optimize_policy(s, CH, CFG)
        assert np.count_nonzero(trace.policy) > 0
        assert trace.cost < expected_cost(s, CH, np.zeros(30), 1.0)

    def test_iteration_cap_reported(self):
        trace = optimize_policy(NOMINAL, CH, OptimizerConfig(k_max=3, ex2_1=1.0))
        assert trace.iterations == 3
        assert not trace.converged

    def test_tiny_power_cap_keeps_feasible_range_below_e_minus_2(self):
        # pi_max < e^-2 leaves no interior stationary point; candidates
        # collapse to {0, pi_max} and the loop still descends
        ch = ChannelParams(gamma=1.0, sigma2=1.0, gbar=1.0, p_max=0.4)
        assert ch.pi_max < math.exp(-2)
        s = SystemParams(a=1.1, b=-1.0, k=1.0, q=1.0, r=0.5,
                         sigma_x2=1.0, sigma_d2=0.0, T=12)
        trace = optimize_policy(s, ch, OptimizerConfig(ex2_1=1.0))
        assert np.all(np.diff(trace.cost_history) <= 0)
        assert set(np.round(trace.policy, 12)) <= {0.0, 0.4}
        assert trace.cost <= expected_cost(s, ch, np.zeros(12), 1.0)

    def test_full_init_respects_terminal_rule(self):
        trace = optimize_policy(NOMINAL, CH, OptimizerConfig(ex2_1=1.0, init="full"))
        assert trace.policy[-1] == 0.0
        assert np.all(np.diff(trace.cost_history) <= 0)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="k_max"):
            OptimizerConfig(k_max=0)
        with pytest.raises(ValueError, match="eps_cost"):
            OptimizerConfig(eps_cost=0.0)
        with pytest.raises(ValueError, match="init"):
            OptimizerConfig(init="warm")
