"""On-policy rollout collection and per-stream return/advantage estimation.

A :class:`TrajectoryBatch` stores flattened step arrays for every signal
stream plus episode bookkeeping. Episodes end either at a terminal transition,
at the environment horizon, or at the batch cut; only the first two count as
completed and contribute to the per-episode return estimates that feed the
constraint surpluses. Advantages use generalized advantage estimation with
the recursion cut at every segment end and bootstrapping cut at terminals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nets
from .errors import EstimationError


@dataclass
class EpisodeSlice:
    start: int
    stop: int
    terminated: bool
    completed: bool


@dataclass
class TrajectoryBatch:
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    log_probs: np.ndarray
    terminal: np.ndarray           # bool (N,): true terminal, no bootstrap
    seg_end: np.ndarray            # bool (N,): episode/segment boundary
    rewards: dict[str, np.ndarray]
    episodes: list[EpisodeSlice]
    advantages: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.log_probs.shape[0]

    @property
    def completed_episode_count(self) -> int:
        return sum(1 for ep in self.episodes if ep.completed)

    def episode_returns(self, stream: str, gamma: float | None) -> np.ndarray:
        """Per-completed-episode return; gamma=None means undiscounted."""
        r = self.rewards[stream]
        out = []
        for ep in self.episodes:
            if not ep.completed:
                continue
            seg = r[ep.start : ep.stop]
            if gamma is None:
                out.append(seg.sum())
            else:
                out.append(discounted_return(seg, gamma))
        return np.asarray(out)

    def jhat(self, stream: str, gamma: float | None) -> float:
        rets = self.episode_returns(stream, gamma)
        if rets.size == 0:
            raise EstimationError("batch contains no completed episode")
        return float(rets.mean())


def collect(env, policy, theta, steps_per_epoch: int,
            rngs: list[np.random.Generator]) -> TrajectoryBatch:
    """Sample an on-policy batch of exactly steps_per_epoch transitions.

    ``rngs`` carries one generator per worker; workers run in order and their
    buffers are concatenated, so the result is deterministic given the worker
    count and seeds.
    """
    if steps_per_epoch < env.spec.horizon:
        raise ValueError("steps_per_epoch must cover at least one horizon")
    n_workers = len(rngs)
    shares = [steps_per_epoch // n_workers] * n_workers
    for i in range(steps_per_epoch % n_workers):
        shares[i] += 1

    states, actions, next_states, logps = [], [], [], []
    terminal, seg_end = [], []
    rewards: dict[str, list[float]] = {"u": [], "r": []}
    cost_names = [f"c{i + 1}" for i in range(env.spec.cost_stream_count)]
    for name in cost_names:
        rewards[name] = []
    episodes: list[EpisodeSlice] = []

    idx = 0
    for share, rng in zip(shares, rngs):
        state = env.reset(rng)
        t_in_ep = 0
        ep_start = idx
        for k in range(share):
            action, logp = policy.sample(theta, state, rng)
            tr = env.step(state, action, rng)
            # Store the action exactly as sampled: the recorded log-density
            # refers to it, while the transition may carry a clipped copy.
            states.append(state)
            actions.append(action)
            next_states.append(tr.next_state)
            logps.append(logp)
            rewards["u"].append(tr.reward_u)
            rewards["r"].append(tr.reward_a)
            for j, name in enumerate(cost_names):
                rewards[name].append(float(tr.costs[j]))
            t_in_ep += 1
            idx += 1
            at_horizon = t_in_ep >= env.spec.horizon
            last_step = k == share - 1
            if tr.done or at_horizon:
                terminal.append(bool(tr.done))
                seg_end.append(True)
                episodes.append(EpisodeSlice(ep_start, idx, bool(tr.done), True))
                state = env.reset(rng)
                t_in_ep = 0
                ep_start = idx
            elif last_step:
                terminal.append(False)
                seg_end.append(True)
                episodes.append(EpisodeSlice(ep_start, idx, False, False))
            else:
                terminal.append(False)
                seg_end.append(False)
                state = tr.next_state

    return TrajectoryBatch(
        states=policy.stack_states(states),
        actions=policy.stack_actions(actions),
        next_states=policy.stack_states(next_states),
        log_probs=np.asarray(logps, dtype=np.float64),
        terminal=np.asarray(terminal, dtype=bool),
        seg_end=np.asarray(seg_end, dtype=bool),
        rewards={k: np.asarray(v, dtype=np.float64) for k, v in rewards.items()},
        episodes=episodes,
    )


def discounted_return(rewards, gamma: float) -> float:
    """sum_t gamma^t r_t over a finite reward sequence."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        return 0.0
    return float(np.polynomial.polynomial.polyval(gamma, r))


def gae_advantages(rewards: np.ndarray, values: np.ndarray, next_values: np.ndarray,
                   terminal: np.ndarray, seg_end: np.ndarray,
                   gamma: float, lam: float) -> np.ndarray:
    """Lambda-weighted TD advantages.

    Terminals drop the bootstrap value; every segment end (terminal, horizon,
    or batch cut) stops the recursion from crossing episode boundaries.
    """
    n = rewards.shape[0]
    not_terminal = 1.0 - terminal.astype(np.float64)
    carry = 1.0 - seg_end.astype(np.float64)
    deltas = rewards + gamma * next_values * not_terminal - values
    adv = np.empty(n)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        acc = deltas[t] + gamma * lam * carry[t] * acc
        adv[t] = acc
    return adv


def normalize_advantages(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Zero-mean unit-variance rescaling; a constant stream maps to zeros."""
    std = adv.std()
    if std < eps:
        return np.zeros_like(adv)
    return (adv - adv.mean()) / std


def constraint_surpluses(batch: TrajectoryBatch, d0: float, cost_limits,
                         gamma: float | None) -> tuple[float, ...]:
    """(c0, c1, ..., ck) from per-episode returns averaged over episodes.

    c0 = d0 - J_R and c_i = J_Ci - d_i; positive entries are violations.
    ``gamma=None`` switches to undiscounted constraint returns.
    """
    if batch.completed_episode_count == 0:
        raise EstimationError("constraint estimation needs a completed episode")
    c0 = d0 - batch.jhat("r", gamma)
    cs = [batch.jhat(f"c{i + 1}", gamma) - d for i, d in enumerate(cost_limits)]
    return (c0, *cs)


class ValueFunctions:
    """One small MLP regressor per stream, fit by a fixed number of Adam steps.

    Targets are standardized per fit; the parameters attaining the best loss
    during fitting are kept, so the post-fit loss never exceeds the pre-fit
    loss on the fitting batch.
    """

    def __init__(self, feature_dim: int, hidden: tuple[int, ...] = (32, 32),
                 fit_steps: int = 40, lr: float = 1e-2):
        self.spec = nets.MlpSpec(feature_dim, 1, hidden)
        self.fit_steps = fit_steps
        self.lr = lr
        self._params: dict[str, np.ndarray] = {}
        self._scale: dict[str, tuple[float, float]] = {}
        self._init_rng = np.random.default_rng(0)

    def _ensure(self, stream: str) -> np.ndarray:
        if stream not in self._params:
            self._params[stream] = nets.init_params(self.spec, self._init_rng)
            self._scale[stream] = (0.0, 1.0)
        return self._params[stream]

    def predict(self, stream: str, feats: np.ndarray) -> np.ndarray:
        theta = self._ensure(stream)
        mean, std = self._scale[stream]
        out, _ = nets.forward(self.spec, theta, feats)
        return out[:, 0] * std + mean

    def fit(self, stream: str, feats: np.ndarray, targets: np.ndarray) -> tuple[float, float]:
        """Regress targets on features; returns (pre_loss, post_loss), raw scale."""
        theta = self._ensure(stream)
        t_mean = float(targets.mean())
        t_std = float(targets.std())
        if t_std < 1e-8:
            t_std = 1.0
        y = (targets - t_mean) / t_std

        def loss_grad(th):
            out, acts = nets.forward(self.spec, th, feats)
            err = out[:, 0] - y
            loss = float(np.mean(err ** 2))
            grad = nets.vjp(self.spec, th, acts, (2.0 / err.size) * err[:, None])
            return loss, grad

        # Pre-fit loss of the old head, expressed in the new standardized
        # units so it is comparable with the optimization loss below.
        preds = self.predict(stream, feats)
        pre_loss = float(np.mean(((preds - targets) / t_std) ** 2))
        best = theta
        opt = nets.Adam(self.spec.param_count, lr=self.lr)
        cur = theta
        best_loss, grad = loss_grad(cur)
        for _ in range(self.fit_steps):
            cur = opt.step(cur, grad)
            loss, grad = loss_grad(cur)
            if loss < best_loss:
                best_loss, best = loss, cur
        if best_loss > pre_loss:
            # The restandardized head never caught up; keep the old one.
            return pre_loss, pre_loss
        self._params[stream] = best
        self._scale[stream] = (t_mean, t_std)
        return pre_loss, best_loss
