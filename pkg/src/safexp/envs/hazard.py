"""Hazard navigation: a goal-reaching point task with hazard disks and boxes.

The agent's reward is progress toward the goal. The safety cost charges 1.0
per step spent inside a hazard disk and 1.0 per step in contact with a box.
The user-expectation reward mirrors progress but treats hazards as free (the
user is unaware of them) and charges 1.0 per box contact (the user regards
boxes as fragile). Dynamics are deterministic; the state is the 2D position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import CmdpSpec, PointEnvBase, Transition

DEFAULT_HAZARDS = (
    (-0.3, -0.75, 0.55), (-0.3, 0.0, 0.55), (-0.3, 0.75, 0.55),
    (0.3, -0.75, 0.55), (0.3, 0.0, 0.55), (0.3, 0.75, 0.55),
)
DEFAULT_BOXES = ((1.35, 0.0, 0.35),)


@dataclass
class HazardNavParams:
    start: tuple[float, float] = (-2.0, 0.0)
    goal: tuple[float, float] = (2.0, 0.0)
    goal_radius: float = 0.3
    hazards: tuple[tuple[float, float, float], ...] = DEFAULT_HAZARDS  # (x, y, radius)
    boxes: tuple[tuple[float, float, float], ...] = DEFAULT_BOXES      # (x, y, half-size)
    action_max: float = 0.25
    arena_half: float = 3.0
    gamma: float = 0.99
    horizon: int = 200
    d0: float = 0.0
    d1: float = 2.5


class HazardNavEnv(PointEnvBase):
    def __init__(self, params: HazardNavParams | None = None):
        self.params = params or HazardNavParams()
        p = self.params
        self.action_max = p.action_max
        self.arena_half = p.arena_half
        self.goal = np.asarray(p.goal, dtype=np.float64)
        self.start = np.asarray(p.start, dtype=np.float64)
        self.spec = CmdpSpec(
            state_dim=2,
            action_dim=2,
            discrete_actions=False,
            gamma=p.gamma,
            horizon=p.horizon,
            cost_stream_count=1,
            d0=p.d0,
            cost_limits=(p.d1,),
        )

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return self.start.copy()

    def contact_counts(self, pos: np.ndarray) -> tuple[int, int]:
        """(hazard occupancy 0/1, number of box contacts) at a position."""
        hazard = 0
        for hx, hy, hr in self.params.hazards:
            if (pos[0] - hx) ** 2 + (pos[1] - hy) ** 2 <= hr * hr:
                hazard = 1
                break
        boxes = 0
        for bx, by, half in self.params.boxes:
            if abs(pos[0] - bx) <= half and abs(pos[1] - by) <= half:
                boxes += 1
        return hazard, boxes

    def step(self, state, action, rng: np.random.Generator) -> Transition:
        pos = self.check_state(state)
        a = self.clip_action(action)
        new_pos = self.clip_position(pos + a)
        prev_dist = float(np.linalg.norm(pos - self.goal))
        new_dist = float(np.linalg.norm(new_pos - self.goal))
        progress = prev_dist - new_dist
        hazard, boxes = self.contact_counts(new_pos)
        return Transition(
            state=pos,
            action=a,
            next_state=new_pos,
            reward_a=progress,
            costs=np.array([float(hazard + boxes)]),
            reward_u=progress - 1.0 * boxes,
            done=new_dist <= self.params.goal_radius,
        )
