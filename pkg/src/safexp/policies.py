"""Differentiable stochastic policies over a flat parameter vector.

Two families are shipped:

- :class:`GaussianMlpPolicy`: diagonal Gaussian whose mean comes from a small
  tanh MLP, with state-independent log standard deviations appended to the
  parameter vector. Log stds are clamped to ``[-5, 2]`` wherever they are used.
- :class:`SoftmaxTablePolicy`: one logit row per discrete state.

Both expose the same surface: sampling, log densities, exact score vectors,
mean KL between two parameter vectors, the gradient of that KL in the first
argument, and a KL curvature-vector product evaluated at the current point.

The curvature product uses the Gauss-Newton form J^T M J v. At
``theta_new = theta_old`` the KL gradient with respect to the distribution
parameters vanishes, so this equals the exact KL Hessian there (the term
carrying network second derivatives drops out).
"""

from __future__ import annotations

import numpy as np

from . import nets

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_2PI = float(np.log(2.0 * np.pi))


class GaussianMlpPolicy:
    """Diagonal Gaussian policy with an MLP mean for continuous actions."""

    kind = "gaussian_mlp"

    def __init__(self, obs_dim: int, act_dim: int, hidden: tuple[int, ...] = (32, 32),
                 init_log_std: float = -0.5):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hidden = tuple(hidden)
        self.init_log_std = float(init_log_std)
        self.net_spec = nets.MlpSpec(obs_dim, act_dim, self.hidden)
        self.param_count = self.net_spec.param_count + act_dim

    # -- parameter handling ------------------------------------------------

    def init_theta(self, rng: np.random.Generator) -> np.ndarray:
        w = nets.init_params(self.net_spec, rng)
        return np.concatenate([w, np.full(self.act_dim, self.init_log_std)])

    def _split(self, theta: np.ndarray):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.param_count,):
            raise ValueError(
                f"theta has shape {theta.shape}, expected ({self.param_count},)"
            )
        return theta[: self.net_spec.param_count], theta[self.net_spec.param_count:]

    def _log_std(self, rho_raw: np.ndarray):
        rho = np.clip(rho_raw, LOG_STD_MIN, LOG_STD_MAX)
        active = (rho_raw > LOG_STD_MIN) & (rho_raw < LOG_STD_MAX)
        return rho, active.astype(np.float64)

    # -- batching helpers ----------------------------------------------------

    def stack_states(self, states) -> np.ndarray:
        arr = np.asarray(states, dtype=np.float64)
        return arr.reshape(-1, self.obs_dim)

    def stack_actions(self, actions) -> np.ndarray:
        arr = np.asarray(actions, dtype=np.float64)
        return arr.reshape(-1, self.act_dim)

    def value_features(self, states: np.ndarray) -> np.ndarray:
        return self.stack_states(states)

    # -- densities -----------------------------------------------------------

    def mean_and_log_std(self, theta, states):
        w, rho_raw = self._split(theta)
        mu, acts = nets.forward(self.net_spec, w, self.stack_states(states))
        rho, mask = self._log_std(rho_raw)
        return mu, rho, mask, acts

    def sample(self, theta, state, rng: np.random.Generator):
        """Draw one action; returns (action, log_prob)."""
        mu, rho, _, _ = self.mean_and_log_std(theta, state)
        mu = mu[0]
        std = np.exp(rho)
        action = mu + std * rng.standard_normal(self.act_dim)
        z = (action - mu) / std
        logp = float(-0.5 * np.sum(z * z) - np.sum(rho) - 0.5 * self.act_dim * LOG_2PI)
        return action, logp

    def log_prob(self, theta, states, actions) -> np.ndarray:
        mu, rho, _, _ = self.mean_and_log_std(theta, states)
        a = self.stack_actions(actions)
        z = (a - mu) * np.exp(-rho)
        return -0.5 * np.sum(z * z, axis=1) - np.sum(rho) - 0.5 * self.act_dim * LOG_2PI

    def entropy(self, theta, state=None) -> float:
        """Differential entropy; state is accepted for interface symmetry."""
        _, rho_raw = self._split(theta)
        rho, _ = self._log_std(rho_raw)
        return float(np.sum(rho) + 0.5 * self.act_dim * (1.0 + LOG_2PI))

    def entropies(self, theta, states) -> np.ndarray:
        """Per-state entropies; constant here (state-independent covariance)."""
        n = self.stack_states(states).shape[0]
        return np.full(n, self.entropy(theta))

    # -- first-order derivatives ----------------------------------------------

    def score_sum(self, theta, states, actions, weights) -> np.ndarray:
        """sum_i w_i * d(log pi(a_i|s_i))/d(theta), exact reverse mode."""
        w_net, rho_raw = self._split(theta)
        mu, rho, mask, acts = self.mean_and_log_std(theta, states)
        a = self.stack_actions(actions)
        wts = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
        inv_var = np.exp(-2.0 * rho)
        dmu = wts * (a - mu) * inv_var
        g_net = nets.vjp(self.net_spec, w_net, acts, dmu)
        z2 = ((a - mu) ** 2) * inv_var
        g_rho = np.sum(wts * (z2 - 1.0), axis=0) * mask
        return np.concatenate([g_net, g_rho])

    def grad_log_prob(self, theta, state, action) -> np.ndarray:
        return self.score_sum(theta, state, action, np.ones(1))

    # -- KL machinery ----------------------------------------------------------

    def mean_kl(self, theta_new, theta_old, states) -> float:
        mu_p, rho_p, _, _ = self.mean_and_log_std(theta_new, states)
        mu_q, rho_q, _, _ = self.mean_and_log_std(theta_old, states)
        var_ratio = np.exp(2.0 * (rho_p - rho_q))
        dmu = (mu_p - mu_q) * np.exp(-rho_q)
        per_state = np.sum(rho_q - rho_p + 0.5 * (var_ratio + dmu * dmu) - 0.5, axis=1)
        return float(np.mean(per_state))

    def grad_mean_kl(self, theta_new, theta_old, states) -> np.ndarray:
        w_new, _ = self._split(theta_new)
        mu_p, rho_p, mask_p, acts = self.mean_and_log_std(theta_new, states)
        mu_q, rho_q, _, _ = self.mean_and_log_std(theta_old, states)
        n = mu_p.shape[0]
        dmu = (mu_p - mu_q) * np.exp(-2.0 * rho_q) / n
        g_net = nets.vjp(self.net_spec, w_new, acts, dmu)
        g_rho = (-1.0 + np.exp(2.0 * (rho_p - rho_q))) * mask_p
        return np.concatenate([g_net, g_rho])

    def kl_hvp_factory(self, theta, states):
        """Curvature-product closure with the forward pass cached.

        The activations at theta are fixed across a conjugate-gradient solve,
        so they are computed once here.
        """
        w_net, _ = self._split(theta)
        mu, rho, mask, acts = self.mean_and_log_std(theta, states)
        inv_var = np.exp(-2.0 * rho)
        n = mu.shape[0]
        n_net = self.net_spec.param_count

        def hvp(v):
            v = np.asarray(v, dtype=np.float64)
            dmu = nets.jvp(self.net_spec, w_net, acts, v[:n_net])
            h_net = nets.vjp(self.net_spec, w_net, acts, dmu * inv_var / n)
            return np.concatenate([h_net, 2.0 * v[n_net:] * mask])

        return hvp

    def kl_hvp(self, theta, states, v) -> np.ndarray:
        """(mean-KL Hessian at theta) @ v, without materializing the Hessian."""
        return self.kl_hvp_factory(theta, states)(v)

    # -- serialization -----------------------------------------------------------

    def checkpoint(self, theta) -> dict:
        return {
            "kind": self.kind,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "hidden": list(self.hidden),
            "theta": [float(x) for x in np.asarray(theta, dtype=np.float64)],
        }


class SoftmaxTablePolicy:
    """Tabular softmax policy: one logit row per state."""

    kind = "softmax_table"

    def __init__(self, n_states: int, n_actions: int):
        self.n_states = n_states
        self.n_actions = n_actions
        self.param_count = n_states * n_actions

    def init_theta(self, rng: np.random.Generator | None = None) -> np.ndarray:
        return np.zeros(self.param_count)

    def logits(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.param_count,):
            raise ValueError(
                f"theta has shape {theta.shape}, expected ({self.param_count},)"
            )
        return theta.reshape(self.n_states, self.n_actions)

    def probs(self, theta) -> np.ndarray:
        z = self.logits(theta)
        z = z - z.max(axis=1, keepdims=True)
        p = np.exp(z)
        return p / p.sum(axis=1, keepdims=True)

    def stack_states(self, states) -> np.ndarray:
        return np.asarray(states, dtype=np.int64).reshape(-1)

    def stack_actions(self, actions) -> np.ndarray:
        return np.asarray(actions, dtype=np.int64).reshape(-1)

    def value_features(self, states) -> np.ndarray:
        s = self.stack_states(states)
        feats = np.zeros((s.shape[0], self.n_states))
        feats[np.arange(s.shape[0]), s] = 1.0
        return feats

    def sample(self, theta, state, rng: np.random.Generator):
        p = self.probs(theta)[int(state)]
        cum = np.cumsum(p)
        a = min(int(np.searchsorted(cum, rng.random(), side="right")), self.n_actions - 1)
        return a, float(np.log(max(p[a], 1e-300)))

    def log_prob(self, theta, states, actions) -> np.ndarray:
        z = self.logits(theta)
        s = self.stack_states(states)
        a = self.stack_actions(actions)
        rows = z[s]
        lse = _logsumexp_rows(rows)
        return rows[np.arange(s.shape[0]), a] - lse

    def entropy(self, theta, state) -> float:
        p = self.probs(theta)[int(state)]
        nz = p > 0
        return float(-np.sum(p[nz] * np.log(p[nz])))

    def entropies(self, theta, states) -> np.ndarray:
        p = self.probs(theta)
        logp = np.log(np.maximum(p, 1e-300))
        row_ent = -np.sum(p * logp, axis=1)
        return row_ent[self.stack_states(states)]

    def score_sum(self, theta, states, actions, weights) -> np.ndarray:
        p = self.probs(theta)
        s = self.stack_states(states)
        a = self.stack_actions(actions)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        g = np.zeros((self.n_states, self.n_actions))
        np.add.at(g, (s, a), w)
        w_per_state = np.zeros(self.n_states)
        np.add.at(w_per_state, s, w)
        g -= w_per_state[:, None] * p
        return g.ravel()

    def grad_log_prob(self, theta, state, action) -> np.ndarray:
        return self.score_sum(theta, [state], [action], np.ones(1))

    def _state_weights(self, states) -> np.ndarray:
        s = self.stack_states(states)
        counts = np.bincount(s, minlength=self.n_states).astype(np.float64)
        return counts / s.shape[0]

    def mean_kl(self, theta_new, theta_old, states) -> float:
        p = self.probs(theta_new)
        q = self.probs(theta_old)
        w = self._state_weights(states)
        ratio = np.log(np.maximum(p, 1e-300)) - np.log(np.maximum(q, 1e-300))
        kl_rows = np.sum(p * ratio, axis=1)
        return float(np.dot(w, kl_rows))

    def grad_mean_kl(self, theta_new, theta_old, states) -> np.ndarray:
        p = self.probs(theta_new)
        q = self.probs(theta_old)
        w = self._state_weights(states)
        ell = np.log(np.maximum(p, 1e-300)) - np.log(np.maximum(q, 1e-300))
        kl_rows = np.sum(p * ell, axis=1, keepdims=True)
        g = w[:, None] * p * (ell - kl_rows)
        return g.ravel()

    def kl_hvp_factory(self, theta, states):
        p = self.probs(theta)
        w = self._state_weights(states)[:, None]

        def hvp(v):
            v_rows = np.asarray(v, dtype=np.float64).reshape(self.n_states, self.n_actions)
            pv = np.sum(p * v_rows, axis=1, keepdims=True)
            return (w * (p * v_rows - p * pv)).ravel()

        return hvp

    def kl_hvp(self, theta, states, v) -> np.ndarray:
        return self.kl_hvp_factory(theta, states)(v)

    def checkpoint(self, theta) -> dict:
        return {
            "kind": self.kind,
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "theta": [float(x) for x in np.asarray(theta, dtype=np.float64)],
        }


def from_checkpoint(data: dict):
    """Rebuild (policy, theta) from a checkpoint dictionary."""
    kind = data.get("kind")
    theta = np.asarray(data["theta"], dtype=np.float64)
    if kind == GaussianMlpPolicy.kind:
        policy = GaussianMlpPolicy(int(data["obs_dim"]), int(data["act_dim"]),
                                   tuple(int(h) for h in data["hidden"]))
    elif kind == SoftmaxTablePolicy.kind:
        policy = SoftmaxTablePolicy(int(data["n_states"]), int(data["n_actions"]))
    else:
        raise ValueError(f"unknown policy kind {kind!r}")
    if theta.shape != (policy.param_count,):
        raise ValueError("checkpoint theta length does not match architecture")
    return policy, theta


def _logsumexp_rows(rows: np.ndarray) -> np.ndarray:
    m = rows.max(axis=1)
    return m + np.log(np.sum(np.exp(rows - m[:, None]), axis=1))
