"""Assembly of the local trust-region subproblem from a sampled batch.

The subproblem is max g.x subject to two linearized constraints and the
quadratic trust region (1/2) x.H.x <= delta, where H is the damped KL
curvature at the current parameters and is only ever applied matrix-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalError


@dataclass
class TrustRegionSubproblem:
    """(g, b0, b1, c0, c1, delta) plus the implicit curvature operator.

    ``b0``/``c0`` belong to the task-return lower bound (written
    c0 - b0.x <= 0), ``b1``/``c1`` to the cost upper bound (c1 + b1.x <= 0).
    Either constraint may be absent (None) for the reduced variants.
    """

    g: np.ndarray
    b0: np.ndarray | None
    b1: np.ndarray | None
    c0: float | None
    c1: float | None
    delta: float
    hvp: Callable[[np.ndarray], np.ndarray]


def policy_gradient(policy, theta, batch, advantages: np.ndarray) -> np.ndarray:
    """(1/N) sum_i advantage_i * grad log pi(a_i | s_i)."""
    n = batch.n
    return policy.score_sum(theta, batch.states, batch.actions, advantages / n)


def kl_hessian_vector_product(policy, theta, states, v: np.ndarray,
                              damping: float = 0.1) -> np.ndarray:
    """Damped curvature product (H + damping I) v for the mean-KL Hessian."""
    return policy.kl_hvp(theta, states, v) + damping * np.asarray(v, dtype=np.float64)


def make_hvp(policy, theta, states, damping: float = 0.1):
    """Damped curvature operator with the policy's forward pass cached."""
    base = policy.kl_hvp_factory(theta, states)

    def hvp(v: np.ndarray) -> np.ndarray:
        return base(v) + damping * np.asarray(v, dtype=np.float64)

    return hvp


def cg_solve(hvp: Callable[[np.ndarray], np.ndarray], rhs: np.ndarray,
             iters: int = 100, tol: float = 1e-8) -> tuple[np.ndarray, float]:
    """Conjugate gradients for H x = rhs with a matrix-free SPD operator.

    Returns (x, relative_residual); stops once ||Hx - rhs|| <= tol * ||rhs||
    or the iteration budget is spent. Non-finite intermediates raise.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), 0.0
    x = np.zeros_like(rhs)
    r = rhs.copy()
    p = rhs.copy()
    rs = float(r @ r)
    for _ in range(iters):
        hp = hvp(p)
        if not np.all(np.isfinite(hp)):
            raise NumericalError("non-finite values in curvature product")
        denom = float(p @ hp)
        if denom <= 0.0:
            raise NumericalError("curvature operator is not positive definite on CG probe")
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * hp
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= tol * rhs_norm:
            rs = rs_new
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    residual = float(np.sqrt(rs)) / rhs_norm
    if not np.all(np.isfinite(x)):
        raise NumericalError("conjugate gradient produced non-finite iterate")
    return x, residual
