import numpy as np
import pytest

from safexp.envs import TabularCmdp, exact_policy_returns, make_chain, random_tabular
from safexp.oracle import enumerate_constrained_optimum


class TestEnumeration:
    def test_chain_optimum_is_always_right(self):
        chain = make_chain()
        res = enumerate_constrained_optimum(chain, chain.d0, chain.d1)
        assert res.feasible_found
        assert np.array_equal(np.argmax(res.best_policy, axis=1), np.ones(5))
        assert res.j_u == pytest.approx(0.9 ** 3 / 0.1, rel=1e-12)
        assert res.policies_enumerated == 32

    def test_slack_constraints_reduce_to_unconstrained_argmax(self):
        chain = make_chain()
        tight = enumerate_constrained_optimum(chain, chain.d0, chain.d1)
        slack = enumerate_constrained_optimum(chain, -1e9, 1e9)
        assert slack.j_u == pytest.approx(tight.j_u, abs=1e-12)
        assert np.array_equal(slack.best_policy, tight.best_policy)

    def test_infeasible_report_when_every_policy_pays_cost(self):
        # Cost 1 on every transition: J_C1 = 1/(1-gamma) for all policies.
        t = np.zeros((2, 2, 2))
        t[:, 0, 0] = 1.0
        t[:, 1, 1] = 1.0
        ones = np.ones((2, 2, 2))
        env = TabularCmdp(t, ones, ones, ones, np.array([1.0, 0.0]), 0.9, 50)
        res = enumerate_constrained_optimum(env, d0=0.0, d1=0.5)
        assert not res.feasible_found
        assert res.best_policy is None

    def test_result_consistent_with_exact_evaluator(self):
        tab = random_tabular(np.random.default_rng(11))
        res = enumerate_constrained_optimum(tab, d0=0.0, d1=8.0)
        assert res.feasible_found
        j_r, j_c1, j_u = exact_policy_returns(tab, res.best_policy)
        assert j_u == pytest.approx(res.j_u, abs=1e-12)
        assert j_r == pytest.approx(res.j_r, abs=1e-12)
        assert j_c1 == pytest.approx(res.j_c1, abs=1e-12)
        assert res.satisfies_d0 and res.satisfies_d1

    def test_guard_rejects_huge_instances(self):
        tab = random_tabular(np.random.default_rng(12), n_states=30, n_actions=6)
        with pytest.raises(ValueError):
            enumerate_constrained_optimum(tab, 0.0, 1.0)


class TestOracleProperties:
    def test_relaxing_limits_never_decreases_optimum(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            tab = random_tabular(rng)
            base = enumerate_constrained_optimum(tab, d0=1.0, d1=4.0)
            relaxed = enumerate_constrained_optimum(tab, d0=0.0, d1=6.0)
            if base.feasible_found:
                assert relaxed.feasible_found
                assert relaxed.j_u >= base.j_u - 1e-12

    def test_epsilon_greedy_perturbations_decrease_chain_optimum(self):
        # The shipped fixture's deterministic optimum is globally optimal:
        # blending any epsilon of the other action strictly hurts J_u.
        chain = make_chain()
        res = enumerate_constrained_optimum(chain, chain.d0, chain.d1)
        best = res.best_policy
        for eps in (0.01, 0.05, 0.2):
            blurred = (1 - eps) * best + eps * (1 - best)
            _, _, j_u = exact_policy_returns(chain, blurred)
            assert j_u < res.j_u

    def test_tie_break_is_lexicographic(self):
        # Two states never reached from state 0: their actions are irrelevant,
        # so many tables tie; the lexicographically smallest assignment wins.
        t = np.zeros((3, 2, 3))
        t[0, :, 0] = 1.0   # state 0 absorbing under both actions
        t[1, 0, 0] = 1.0
        t[1, 1, 2] = 1.0
        t[2, :, 2] = 1.0
        r = np.zeros((3, 2, 3))
        r[0, :, 0] = 1.0
        z = np.zeros((3, 2, 3))
        env = TabularCmdp(t, r, z, r, np.array([1.0, 0.0, 0.0]), 0.9, 50)
        res = enumerate_constrained_optimum(env, d0=0.0, d1=1.0)
        assert np.array_equal(np.argmax(res.best_policy, axis=1), [0, 0, 0])
