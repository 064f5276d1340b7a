"""Button navigation: goal reaching with pressable buttons and patrolling gremlins.

The task reward pays progress toward the goal (moving away is charged at an
asymmetric multiple) minus a small per-step living cost, plus bonuses for
first-time button presses and for reaching the goal. The user-expectation
reward pays the same bonuses but carries no negative term at all: its
progress component is *new net progress*, the reduction of the best goal
distance achieved so far, so deviations cost nothing yet oscillating back and
forth earns nothing. The safety cost charges 1.0 per step in contact with a
gremlin.

Gremlins shuttle along fixed segments with fixed periods (triangle-wave
position). The state carries everything needed to stay Markov:
[x, y, gremlin positions ..., pressed flags ..., t / horizon, best distance].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import CmdpSpec, PointEnvBase, Transition

DEFAULT_BUTTONS = ((0.5, 0.6), (-2.6, -2.0))
# (x0, y0, x1, y1, period): endpoints of the patrol segment and steps per lap.
DEFAULT_GREMLINS = ((0.9, -0.8, 0.9, 0.8, 26.0), (-0.4, 0.8, -0.4, -0.8, 34.0))


@dataclass
class ButtonNavParams:
    start: tuple[float, float] = (-2.0, 0.0)
    goal: tuple[float, float] = (2.0, 0.0)
    goal_radius: float = 0.3
    buttons: tuple[tuple[float, float], ...] = DEFAULT_BUTTONS
    button_radius: float = 0.4
    button_bonus: float = 1.0
    goal_bonus: float = 2.0
    away_penalty: float = 9.0   # multiplier on negative progress in the task reward
    step_cost: float = 0.02     # per-step charge on the task reward only
    gremlins: tuple[tuple[float, float, float, float, float], ...] = DEFAULT_GREMLINS
    gremlin_radius: float = 0.3
    action_max: float = 0.25
    arena_half: float = 3.0
    gamma: float = 0.99
    horizon: int = 200
    d0: float = 0.0
    d1: float = 2.5


class ButtonNavEnv(PointEnvBase):
    def __init__(self, params: ButtonNavParams | None = None):
        self.params = params or ButtonNavParams()
        p = self.params
        self.action_max = p.action_max
        self.arena_half = p.arena_half
        self.goal = np.asarray(p.goal, dtype=np.float64)
        self.start = np.asarray(p.start, dtype=np.float64)
        self.n_buttons = len(p.buttons)
        self.n_gremlins = len(p.gremlins)
        self.spec = CmdpSpec(
            state_dim=2 + 2 * self.n_gremlins + self.n_buttons + 2,
            action_dim=2,
            discrete_actions=False,
            gamma=p.gamma,
            horizon=p.horizon,
            cost_stream_count=1,
            d0=p.d0,
            cost_limits=(p.d1,),
        )

    def gremlin_positions(self, t: int) -> np.ndarray:
        """Triangle-wave interpolation along each patrol segment at step t."""
        out = np.empty((self.n_gremlins, 2))
        for i, (x0, y0, x1, y1, period) in enumerate(self.params.gremlins):
            phase = (t % period) / period
            frac = 2.0 * phase if phase <= 0.5 else 2.0 * (1.0 - phase)
            out[i, 0] = x0 + frac * (x1 - x0)
            out[i, 1] = y0 + frac * (y1 - y0)
        return out

    def pack_state(self, pos: np.ndarray, pressed: np.ndarray, t: int,
                   best_dist: float) -> np.ndarray:
        grem = self.gremlin_positions(t).ravel()
        return np.concatenate([
            pos, grem, pressed.astype(np.float64),
            [t / self.params.horizon, best_dist],
        ])

    def unpack_state(self, state):
        s = self.check_state(state)
        pos = s[:2]
        k = 2 + 2 * self.n_gremlins
        pressed = s[k : k + self.n_buttons] > 0.5
        t = int(round(s[-2] * self.params.horizon))
        best_dist = float(s[-1])
        return pos, pressed, t, best_dist

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        start_dist = float(np.linalg.norm(self.start - self.goal))
        return self.pack_state(self.start.copy(), np.zeros(self.n_buttons), 0,
                               start_dist)

    def step(self, state, action, rng: np.random.Generator) -> Transition:
        p = self.params
        pos, pressed, t, best_dist = self.unpack_state(state)
        a = self.clip_action(action)
        new_pos = self.clip_position(pos + a)
        prev_dist = float(np.linalg.norm(pos - self.goal))
        new_dist = float(np.linalg.norm(new_pos - self.goal))
        progress = prev_dist - new_dist
        shaped = progress if progress >= 0.0 else p.away_penalty * progress
        new_net_progress = max(best_dist - new_dist, 0.0)
        new_best = min(best_dist, new_dist)

        pressed = pressed.copy()
        presses = 0
        for i, (bx, by) in enumerate(p.buttons):
            if not pressed[i] and (new_pos[0] - bx) ** 2 + (new_pos[1] - by) ** 2 <= p.button_radius ** 2:
                pressed[i] = True
                presses += 1

        reached = new_dist <= p.goal_radius
        bonus = p.button_bonus * presses + (p.goal_bonus if reached else 0.0)
        reward_a = shaped + bonus - p.step_cost
        reward_u = new_net_progress + bonus

        grem_next = self.gremlin_positions(t + 1)
        contacts = int(np.sum(np.sum((grem_next - new_pos) ** 2, axis=1)
                              <= p.gremlin_radius ** 2))
        return Transition(
            state=np.asarray(state, dtype=np.float64),
            action=a,
            next_state=self.pack_state(new_pos, pressed, t + 1, new_best),
            reward_a=reward_a,
            costs=np.array([float(contacts)]),
            reward_u=reward_u,
            done=reached,
        )
