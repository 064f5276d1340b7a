import numpy as np
import pytest

from safexp.envs import (
    ButtonNavEnv,
    ButtonNavParams,
    CmdpSpec,
    HazardNavEnv,
    HazardNavParams,
    TabularCmdp,
    exact_policy_returns,
    make_chain,
    monte_carlo_returns,
    random_tabular,
)


class TestCmdpSpec:
    def test_gamma_must_be_inside_unit_interval(self):
        with pytest.raises(ValueError):
            CmdpSpec(2, 2, False, 1.0, 10, 1, 0.0, (1.0,))
        with pytest.raises(ValueError):
            CmdpSpec(2, 2, False, 0.0, 10, 1, 0.0, (1.0,))

    def test_cost_limit_count_must_match(self):
        with pytest.raises(ValueError):
            CmdpSpec(2, 2, False, 0.9, 10, 2, 0.0, (1.0,))

    def test_limits_tuple_puts_d0_first(self):
        spec = CmdpSpec(2, 2, False, 0.9, 10, 1, 0.5, (2.5,))
        assert spec.limits == (0.5, 2.5)


class TestReset:
    def test_chain_point_mass_start(self):
        chain = make_chain()
        assert chain.reset(np.random.default_rng(0)) == 0

    def test_hazard_fixed_start(self):
        env = HazardNavEnv()
        assert np.array_equal(env.reset(np.random.default_rng(0)),
                              np.array([-2.0, 0.0]))

    def test_same_seed_same_states(self):
        tab = random_tabular(np.random.default_rng(5))
        s1 = tab.reset(np.random.default_rng(33))
        s2 = tab.reset(np.random.default_rng(33))
        assert s1 == s2


class TestHazardStep:
    def test_progress_reward(self):
        # Away from hazards/boxes: reward is exactly the drop in goal distance.
        params = HazardNavParams(hazards=(), boxes=(), action_max=0.5)
        env = HazardNavEnv(params)
        tr = env.step(np.array([0.0, 0.0]), np.array([0.5, 0.0]),
                      np.random.default_rng(0))
        assert tr.reward_a == pytest.approx(0.5, abs=1e-12)
        assert tr.costs[0] == 0.0
        assert tr.reward_u == pytest.approx(0.5, abs=1e-12)

    def test_hazard_occupancy_costs_without_touching_reward_u(self):
        params = HazardNavParams(hazards=((0.0, 0.0, 0.5),), boxes=())
        env = HazardNavEnv(params)
        tr = env.step(np.array([-0.5, 0.0]), np.array([0.25, 0.0]),
                      np.random.default_rng(0))
        assert tr.costs[0] == 1.0
        assert tr.reward_u == pytest.approx(tr.reward_a, abs=1e-12)

    def test_box_contact_hits_cost_and_reward_u(self):
        params = HazardNavParams(hazards=(), boxes=((0.0, 0.0, 0.3),))
        env = HazardNavEnv(params)
        tr = env.step(np.array([-0.4, 0.0]), np.array([0.25, 0.0]),
                      np.random.default_rng(0))
        assert tr.costs[0] == 1.0
        assert tr.reward_u == pytest.approx(tr.reward_a - 1.0, abs=1e-12)

    def test_invalid_state_dimension_rejected(self):
        env = HazardNavEnv()
        with pytest.raises(ValueError):
            env.step(np.zeros(3), np.zeros(2), np.random.default_rng(0))

    def test_actions_clipped_not_rejected(self):
        env = HazardNavEnv()
        tr = env.step(np.array([-2.0, 0.0]), np.array([5.0, -5.0]),
                      np.random.default_rng(0))
        assert np.allclose(tr.next_state, [-1.75, -0.25])

    def test_done_inside_goal_radius(self):
        env = HazardNavEnv()
        tr = env.step(np.array([1.8, 0.0]), np.array([0.2, 0.0]),
                      np.random.default_rng(0))
        assert tr.done


class TestButtonStep:
    def test_button_press_is_one_shot(self):
        env = ButtonNavEnv()
        bx, by = env.params.buttons[0]
        pos = np.array([bx - 0.3, by])
        state = env.pack_state(pos, np.zeros(2), 0,
                               float(np.linalg.norm(pos - env.goal)))
        rng = np.random.default_rng(0)
        tr = env.step(state, np.array([0.25, 0.0]), rng)
        _, pressed, _, _ = env.unpack_state(tr.next_state)
        assert pressed[0] and not pressed[1]
        tr2 = env.step(tr.next_state, np.array([0.0, 0.0]), rng)
        # Still inside the pad, but no second bonus.
        assert tr2.reward_a <= 0.0 + 1e-9

    def test_away_motion_penalized_asymmetrically(self):
        env = ButtonNavEnv()
        cost = env.params.step_cost
        state = env.reset(np.random.default_rng(0))
        fwd = env.step(state, np.array([0.25, 0.0]), np.random.default_rng(0))
        back = env.step(state, np.array([-0.25, 0.0]), np.random.default_rng(0))
        assert fwd.reward_a == pytest.approx(0.25 - cost, abs=1e-12)
        assert back.reward_a == pytest.approx(
            -0.25 * env.params.away_penalty - cost, abs=1e-12)
        assert back.reward_u == 0.0  # the expectation stream carries no negatives

    def test_gremlin_contact_costs(self):
        env = ButtonNavEnv()
        g = env.gremlin_positions(1)[0]
        state = env.pack_state(g.copy(), np.zeros(2), 0,
                               float(np.linalg.norm(g - env.goal)))
        tr = env.step(state, np.array([0.0, 0.0]), np.random.default_rng(0))
        assert tr.costs[0] >= 1.0

    def test_monotone_progress_stream_ignores_regained_ground(self):
        env = ButtonNavEnv()
        rng = np.random.default_rng(0)
        s = env.reset(rng)
        fwd = env.step(s, np.array([0.25, 0.0]), rng)
        back = env.step(fwd.next_state, np.array([-0.25, 0.0]), rng)
        fwd_again = env.step(back.next_state, np.array([0.25, 0.0]), rng)
        assert fwd.reward_u == pytest.approx(0.25, abs=1e-12)
        assert back.reward_u == 0.0
        assert fwd_again.reward_u == 0.0  # only new net progress pays

    def test_gremlin_patrol_is_periodic(self):
        env = ButtonNavEnv()
        period = int(env.params.gremlins[0][4])
        assert np.allclose(env.gremlin_positions(3)[0],
                           env.gremlin_positions(3 + period)[0])


class TestTabular:
    def test_deterministic_right_move(self):
        chain = make_chain()
        tr = chain.step(1, 1, np.random.default_rng(0))
        assert tr.next_state == 2
        assert chain.transitions[1, 1, 2] == 1.0

    def test_rows_sum_to_one(self):
        tab = random_tabular(np.random.default_rng(1))
        assert np.abs(tab.transitions.sum(axis=2) - 1.0).max() <= 1e-12

    def test_bad_rows_rejected(self):
        t = np.zeros((2, 1, 2))
        t[:, :, 0] = 0.5  # rows sum to 0.5
        z = np.zeros((2, 1, 2))
        with pytest.raises(ValueError):
            TabularCmdp(t, z, z, z, np.array([1.0, 0.0]), 0.9, 10)

    def test_out_of_range_state_rejected(self):
        chain = make_chain()
        with pytest.raises(ValueError):
            chain.step(7, 0, np.random.default_rng(0))


class TestExactReturns:
    def test_self_loop_geometric_series(self):
        t = np.ones((1, 1, 1))
        r = np.ones((1, 1, 1))
        z = np.zeros((1, 1, 1))
        env = TabularCmdp(t, r, z, z, np.array([1.0]), 0.9, 10)
        j_r, j_c1, j_u = exact_policy_returns(env, np.ones((1, 1)))
        assert j_r == pytest.approx(10.0, abs=1e-9)
        assert j_c1 == 0.0 and j_u == 0.0

    def test_zero_tables_give_zero(self):
        tab = random_tabular(np.random.default_rng(2))
        zero = np.zeros_like(tab.reward_a)
        env = TabularCmdp(tab.transitions, zero, zero, zero, tab.rho, 0.9, 10)
        assert exact_policy_returns(env, np.full((5, 2), 0.5)) == (0.0, 0.0, 0.0)

    def test_matches_monte_carlo_within_three_ses(self):
        tab = random_tabular(np.random.default_rng(3))
        policy = np.full((5, 2), 0.5)
        exact = np.array(exact_policy_returns(tab, policy))
        means, ses = monte_carlo_returns(tab, policy, episodes=100_000,
                                         horizon=220, rng=np.random.default_rng(4))
        # horizon 220 at gamma=0.9 leaves truncation bias ~1e-10, far below SE
        assert np.all(np.abs(exact - means) <= 3 * ses)


class TestDeterminism:
    @pytest.mark.parametrize("make_env", [
        lambda: make_chain(),
        lambda: HazardNavEnv(),
        lambda: ButtonNavEnv(),
    ])
    def test_identical_seeds_identical_trajectories(self, make_env):
        def run(seed):
            env = make_env()
            rng = np.random.default_rng(seed)
            arng = np.random.default_rng(seed + 1)
            s = env.reset(rng)
            out = []
            for _ in range(40):
                if env.spec.discrete_actions:
                    a = int(arng.integers(env.spec.action_dim))
                else:
                    a = arng.uniform(-0.3, 0.3, size=2)
                tr = env.step(s, a, rng)
                out.append((np.asarray(tr.next_state).tolist(), tr.reward_a,
                            tr.costs[0], tr.reward_u, tr.done))
                s = tr.next_state
            return out

        assert run(123) == run(123)

    @pytest.mark.parametrize("make_env", [
        lambda: make_chain(),
        lambda: HazardNavEnv(),
        lambda: ButtonNavEnv(),
    ])
    def test_costs_are_nonnegative(self, make_env):
        env = make_env()
        rng = np.random.default_rng(17)
        arng = np.random.default_rng(18)
        s = env.reset(rng)
        for _ in range(60):
            if env.spec.discrete_actions:
                a = int(arng.integers(env.spec.action_dim))
            else:
                a = arng.uniform(-0.5, 0.5, size=2)
            tr = env.step(s, a, rng)
            assert np.all(tr.costs >= 0.0)
            s = env.reset(rng) if tr.done else tr.next_state

    def test_cost_zero_on_clean_trajectory(self):
        env = HazardNavEnv()
        rng = np.random.default_rng(0)
        s = env.reset(rng)
        total = 0.0
        for _ in range(12):  # short march toward the wall, stops before contact
            tr = env.step(s, np.array([0.05, 0.0]), rng)
            total += tr.costs[0]
            s = tr.next_state
        assert total == 0.0
