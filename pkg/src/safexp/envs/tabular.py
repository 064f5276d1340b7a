"""Tabular CMDPs with exact policy evaluation.

States and actions are integer indices; the transition kernel and the three
reward tables are explicit arrays, which makes every policy exactly evaluable
by solving the linear Bellman system. The chain fixture built here is the
desk-scale instance used for oracle-equivalence and recovery tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import CmdpSpec, Transition

ROW_SUM_TOL = 1e-12


@dataclass
class TabularCmdp:
    """Finite CMDP with explicit tables indexed (s, a, s')."""

    transitions: np.ndarray    # (S, A, S) rows summing to 1
    reward_a: np.ndarray       # (S, A, S)
    cost_1: np.ndarray         # (S, A, S)
    reward_u: np.ndarray       # (S, A, S)
    rho: np.ndarray            # (S,) initial distribution
    gamma: float
    horizon: int
    d0: float = 0.0
    d1: float = 0.0

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        s, a, s2 = self.transitions.shape
        if s != s2:
            raise ValueError("transition tensor must be (S, A, S)")
        row_err = np.abs(self.transitions.sum(axis=2) - 1.0).max()
        if row_err > ROW_SUM_TOL:
            raise ValueError(f"transition rows deviate from 1 by {row_err:.3e}")
        if np.any(self.transitions < 0):
            raise ValueError("transition probabilities must be non-negative")
        for name in ("reward_a", "cost_1", "reward_u"):
            tab = np.asarray(getattr(self, name), dtype=np.float64)
            if tab.shape != (s, a, s):
                raise ValueError(f"{name} table must have shape {(s, a, s)}")
            setattr(self, name, tab)
        self.rho = np.asarray(self.rho, dtype=np.float64)
        if abs(self.rho.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError("initial distribution must sum to 1")
        self._rho_cum = np.cumsum(self.rho)
        self._t_cum = np.cumsum(self.transitions, axis=2)
        self.spec = CmdpSpec(
            state_dim=1,
            action_dim=a,
            discrete_actions=True,
            gamma=self.gamma,
            horizon=self.horizon,
            cost_stream_count=1,
            d0=self.d0,
            cost_limits=(self.d1,),
        )

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    # -- simulation -----------------------------------------------------------

    def reset(self, rng: np.random.Generator) -> int:
        return min(int(np.searchsorted(self._rho_cum, rng.random(), side="right")),
                   self.n_states - 1)

    def step(self, state, action, rng: np.random.Generator) -> Transition:
        s = int(state)
        a = int(action)
        if not (0 <= s < self.n_states):
            raise ValueError(f"state {s} out of range [0, {self.n_states})")
        if not (0 <= a < self.n_actions):
            raise ValueError(f"action {a} out of range [0, {self.n_actions})")
        s_next = min(int(np.searchsorted(self._t_cum[s, a], rng.random(), side="right")),
                     self.n_states - 1)
        return Transition(
            state=s,
            action=a,
            next_state=s_next,
            reward_a=float(self.reward_a[s, a, s_next]),
            costs=np.array([self.cost_1[s, a, s_next]]),
            reward_u=float(self.reward_u[s, a, s_next]),
            done=False,
        )

    # -- exact evaluation -------------------------------------------------------

    def policy_matrix(self, policy_table: np.ndarray) -> np.ndarray:
        pi = np.asarray(policy_table, dtype=np.float64)
        if pi.shape != (self.n_states, self.n_actions):
            raise ValueError("policy table shape mismatch")
        if np.abs(pi.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("stochastic policy rows must sum to 1")
        return pi

    def exact_return(self, policy_table: np.ndarray, table: np.ndarray) -> float:
        """Exact discounted return of one reward table under the policy.

        Solves (I - gamma * P_pi) v = r_pi, then takes rho . v. The system is
        nonsingular for gamma < 1.
        """
        pi = self.policy_matrix(policy_table)
        p_pi = np.einsum("sa,sap->sp", pi, self.transitions)
        r_pi = np.einsum("sa,sap,sap->s", pi, self.transitions, table)
        v = np.linalg.solve(np.eye(self.n_states) - self.gamma * p_pi, r_pi)
        return float(self.rho @ v)


def exact_policy_returns(tabular: TabularCmdp, policy_table: np.ndarray):
    """Exact (J_R, J_C1, J_u) for a stochastic policy table."""
    return (
        tabular.exact_return(policy_table, tabular.reward_a),
        tabular.exact_return(policy_table, tabular.cost_1),
        tabular.exact_return(policy_table, tabular.reward_u),
    )


def monte_carlo_returns(tabular: TabularCmdp, policy_table: np.ndarray,
                        episodes: int, horizon: int, rng: np.random.Generator):
    """Monte Carlo (mean, standard error) of (J_R, J_C1, J_u), vectorized.

    Used as the independent check of the linear-solve evaluator: with
    horizon >> 1/(1-gamma), truncation bias is negligible against 3 SEs.
    """
    pi = tabular.policy_matrix(policy_table)
    pi_cum = np.cumsum(pi, axis=1)
    t_cum = np.cumsum(tabular.transitions, axis=2)

    s = rng.choice(tabular.n_states, size=episodes, p=tabular.rho)
    totals = np.zeros((3, episodes))
    tables = (tabular.reward_a, tabular.cost_1, tabular.reward_u)
    disc = 1.0
    for _ in range(horizon):
        u = rng.random(episodes)
        a = (u[:, None] < pi_cum[s]).argmax(axis=1)
        u2 = rng.random(episodes)
        s_next = (u2[:, None] < t_cum[s, a]).argmax(axis=1)
        for i, tab in enumerate(tables):
            totals[i] += disc * tab[s, a, s_next]
        disc *= tabular.gamma
        s = s_next
    means = totals.mean(axis=1)
    ses = totals.std(axis=1, ddof=1) / np.sqrt(episodes)
    return means, ses


def make_chain(n_states: int = 5, gamma: float = 0.9, horizon: int = 60,
               d0: float = 0.0, d1: float = 1.5) -> TabularCmdp:
    """Deterministic chain with clamped left/right moves.

    Landing in the last state pays the user-expectation reward, landing in the
    right half pays the task reward, and landing in state 1 incurs the safety
    cost. A uniform-random policy keeps bouncing through state 1 and violates
    d1 = 1.5, while the always-right policy pays the cost exactly once, so the
    unconstrained optimum is feasible and the enumeration oracle's optimum is
    globally optimal over stochastic policies as well.
    """
    s_n, a_n = n_states, 2
    t = np.zeros((s_n, a_n, s_n))
    for s in range(s_n):
        t[s, 0, max(s - 1, 0)] = 1.0
        t[s, 1, min(s + 1, s_n - 1)] = 1.0
    reward_u = np.zeros((s_n, a_n, s_n))
    reward_u[:, :, s_n - 1] = 1.0
    reward_a = np.zeros((s_n, a_n, s_n))
    reward_a[:, :, s_n - 2:] = 1.0
    cost_1 = np.zeros((s_n, a_n, s_n))
    cost_1[:, :, 1] = 1.0
    rho = np.zeros(s_n)
    rho[0] = 1.0
    return TabularCmdp(t, reward_a, cost_1, reward_u, rho, gamma, horizon, d0=d0, d1=d1)


def random_tabular(rng: np.random.Generator, n_states: int = 5, n_actions: int = 2,
                   gamma: float = 0.9, horizon: int = 60) -> TabularCmdp:
    """Seeded random CMDP (Dirichlet rows, uniform reward tables)."""
    t = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    shape = (n_states, n_actions, n_states)
    return TabularCmdp(
        transitions=t,
        reward_a=rng.uniform(0.0, 1.0, size=shape),
        cost_1=rng.uniform(0.0, 1.0, size=shape),
        reward_u=rng.uniform(0.0, 1.0, size=shape),
        rho=rng.dirichlet(np.ones(n_states)),
        gamma=gamma,
        horizon=horizon,
    )


def oscillating_policy_table(n_states: int, n_actions: int = 2,
                             gap: float = 3.0) -> np.ndarray:
    """Softmax table of a policy that shuttles between states 0 and 1.

    Serves as the constraint-violating initialization for recovery tests: it
    lands in the costly state 1 every other step.
    """
    logits = np.zeros((n_states, n_actions))
    logits[0, 1] = gap    # from 0, go right into 1
    logits[1:, 0] = gap   # everywhere else, head back left
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=1, keepdims=True)
