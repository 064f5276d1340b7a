"""Core CMDP environment types.

An environment is a stateless simulator: ``reset`` samples an initial state,
``step`` maps (state, action) to a :class:`Transition` carrying the three
per-step signal streams (task reward, safety costs, user-expectation reward).
All randomness flows through the caller's generator, so identical seeds give
bitwise-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CmdpSpec:
    """Static description of a constrained MDP with k auxiliary cost streams."""

    state_dim: int
    action_dim: int            # continuous dims, or number of discrete actions
    discrete_actions: bool
    gamma: float
    horizon: int
    cost_stream_count: int
    d0: float                  # lower bound on the task return
    cost_limits: tuple[float, ...]  # upper bounds, one per cost stream

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie strictly inside (0, 1), got {self.gamma}")
        if self.state_dim <= 0 or self.action_dim <= 0 or self.horizon <= 0:
            raise ValueError("state_dim, action_dim and horizon must be positive")
        if self.cost_stream_count != len(self.cost_limits):
            raise ValueError(
                f"cost_stream_count={self.cost_stream_count} but "
                f"{len(self.cost_limits)} cost limits given (d0 is separate)"
            )

    @property
    def limits(self) -> tuple[float, ...]:
        """All limits as (d0, d1, ..., dk)."""
        return (self.d0, *self.cost_limits)


@dataclass
class Transition:
    """One environment step with all three signal streams populated."""

    state: object
    action: object
    next_state: object
    reward_a: float
    costs: np.ndarray
    reward_u: float
    done: bool = False

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=np.float64).reshape(-1)


class PointEnvBase:
    """Shared plumbing for the deterministic 2D point-mass tasks.

    Dynamics are ``position += clip(action)`` with the position kept inside a
    square arena. Actions outside the per-component bound are clipped rather
    than rejected.
    """

    spec: CmdpSpec
    action_max: float
    arena_half: float

    def clip_action(self, action) -> np.ndarray:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape[0] != 2:
            raise ValueError(f"action has dimension {a.shape[0]}, expected 2")
        return np.clip(a, -self.action_max, self.action_max)

    def clip_position(self, pos: np.ndarray) -> np.ndarray:
        return np.clip(pos, -self.arena_half, self.arena_half)

    def check_state(self, state) -> np.ndarray:
        s = np.asarray(state, dtype=np.float64).reshape(-1)
        if s.shape[0] != self.spec.state_dim:
            raise ValueError(
                f"state has dimension {s.shape[0]}, expected {self.spec.state_dim}"
            )
        return s
