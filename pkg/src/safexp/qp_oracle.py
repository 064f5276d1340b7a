"""Numerical oracle for the trust-region subproblem, independent of the dual.

Projected gradient on the primal

    min ghat.x   s.t.   bhat_i.x + c_i <= 0,   (1/2) x.H.x <= delta

after the change of variables y = L^T x (H = L L^T), which turns the trust
region into the ball ||y|| <= sqrt(2 delta). The projection onto the ball
intersected with at most two half-spaces is computed exactly by enumerating
closed-form candidates for every active set; the step size follows the
diminishing schedule eta_0 / sqrt(t + 1) with a cap of 1e5 iterations and an
early exit once iterates are numerically stationary.

Only test and verification code should reach for this module; the training
path uses the analytic solver.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import dual_solver
from .trust_region import TrustRegionSubproblem

PG_MAX_ITERS = 100_000
PG_STALL_LIMIT = 64


@dataclass
class QpInstance:
    """Dense two-constraint trust-region instance in canonical orientation."""

    h: np.ndarray
    ghat: np.ndarray
    bhat0: np.ndarray
    bhat1: np.ndarray
    c0: float
    c1: float
    delta: float

    @property
    def dim(self) -> int:
        return self.ghat.shape[0]

    def hvp(self, v: np.ndarray) -> np.ndarray:
        return self.h @ v

    def objective(self, x: np.ndarray) -> float:
        return float(self.ghat @ x)

    def max_violation(self, x: np.ndarray) -> float:
        return max(
            float(self.bhat0 @ x) + self.c0,
            float(self.bhat1 @ x) + self.c1,
            0.5 * float(x @ self.h @ x) - self.delta,
        )


def random_instance(rng: np.random.Generator, dim: int) -> QpInstance:
    """Seeded random SPD instance with a strictly feasible origin."""
    a = rng.normal(size=(dim, dim))
    h = a @ a.T + (0.5 + rng.random()) * np.eye(dim)
    ghat = rng.normal(size=dim)
    bhat0 = rng.normal(size=dim)
    bhat1 = rng.normal(size=dim)
    # A mix of nearly-tight and slack constraints so every dual case occurs.
    def draw_c() -> float:
        return -rng.uniform(0.01, 0.3) if rng.random() < 0.6 else -rng.uniform(0.3, 1.5)
    return QpInstance(
        h=h, ghat=ghat, bhat0=bhat0, bhat1=bhat1,
        c0=draw_c(), c1=draw_c(), delta=float(rng.uniform(0.2, 1.5)),
    )


def _project_ball_halfspaces(z: np.ndarray, radius: float,
                             betas: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Exact Euclidean projection onto {||y|| <= R} intersect {betas y <= rhs}.

    Enumerates the closed-form projection for every active set (none, each
    half-space, both, and each combination with the sphere) and returns the
    closest feasible candidate; the true projection always appears among them.
    """
    tol = 1e-9 * max(1.0, radius)

    def feasible(y: np.ndarray) -> bool:
        if y @ y > (radius + tol) ** 2:
            return False
        return bool(np.all(betas @ y <= rhs + tol))

    candidates = [z]
    zn = math.sqrt(float(z @ z))
    if zn > 0.0:
        candidates.append(z * (radius / zn))

    norms2 = np.einsum("ij,ij->i", betas, betas)
    for i in range(betas.shape[0]):
        if norms2[i] <= 0.0:
            continue
        # Half-space boundary alone.
        shift = (float(betas[i] @ z) - rhs[i]) / norms2[i]
        candidates.append(z - shift * betas[i])
        # Sphere + one hyperplane: min-norm point plus an in-plane arc point.
        y0 = (rhs[i] / norms2[i]) * betas[i]
        rad2 = radius * radius - float(y0 @ y0)
        if rad2 > 0.0:
            w = z - y0
            w = w - (float(betas[i] @ w) / norms2[i]) * betas[i]
            wn = math.sqrt(float(w @ w))
            if wn > 0.0:
                candidates.append(y0 + math.sqrt(rad2) * (w / wn))

    if betas.shape[0] == 2:
        gram = betas @ betas.T
        det = gram[0, 0] * gram[1, 1] - gram[0, 1] * gram[1, 0]
        if det > 1e-14 * max(gram[0, 0] * gram[1, 1], 1.0):
            gram_inv = np.linalg.inv(gram)
            # Both hyperplanes.
            mu = gram_inv @ (betas @ z - rhs)
            candidates.append(z - betas.T @ mu)
            # Sphere + both hyperplanes.
            y0 = betas.T @ (gram_inv @ rhs)
            rad2 = radius * radius - float(y0 @ y0)
            if rad2 > 0.0:
                w = z - y0
                w = w - betas.T @ (gram_inv @ (betas @ w))
                wn = math.sqrt(float(w @ w))
                if wn > 0.0:
                    candidates.append(y0 + math.sqrt(rad2) * (w / wn))

    best = None
    best_d = math.inf
    for y in candidates:
        if feasible(y):
            d = float((y - z) @ (y - z))
            if d < best_d:
                best, best_d = y, d
    if best is None:
        raise RuntimeError("projection found no feasible candidate (origin should be feasible)")
    return best


def solve_primal_pg(inst: QpInstance, max_iters: int = PG_MAX_ITERS) -> tuple[np.ndarray, float]:
    """Projected-gradient solve; returns (x_best, objective_best)."""
    chol = np.linalg.cholesky(inst.h)
    alpha = np.linalg.solve(chol, inst.ghat)
    betas = np.stack([
        np.linalg.solve(chol, inst.bhat0),
        np.linalg.solve(chol, inst.bhat1),
    ])
    rhs = np.array([-inst.c0, -inst.c1])
    radius = math.sqrt(2.0 * inst.delta)

    eta0 = radius / max(float(np.linalg.norm(alpha)), 1e-12)
    y = np.zeros(inst.dim)
    best_y = y
    best_obj = 0.0
    stall = 0
    for it in range(max_iters):
        step = eta0 / math.sqrt(it + 1.0)
        y_new = _project_ball_halfspaces(y - step * alpha, radius, betas, rhs)
        move = float(np.linalg.norm(y_new - y))
        y = y_new
        obj = float(alpha @ y)
        if obj < best_obj:
            best_obj = obj
            best_y = y
        if move <= 1e-15 * max(radius, 1.0):
            stall += 1
            if stall >= PG_STALL_LIMIT:
                break
        else:
            stall = 0
    x = np.linalg.solve(chol.T, best_y)
    return x, best_obj


@dataclass
class SweepRow:
    instance: int
    dim: int
    case_id: str
    obj_analytic: float
    obj_oracle: float
    rel_gap: float
    kkt_stationarity: float
    kkt_primal: float
    kkt_comp_slack: float
    primal_violation: float


@dataclass
class SweepReport:
    rows: list[SweepRow]
    elapsed_s: float

    @property
    def max_rel_gap(self) -> float:
        return max(r.rel_gap for r in self.rows)

    @property
    def max_kkt(self) -> float:
        return max(max(r.kkt_stationarity, r.kkt_primal, r.kkt_comp_slack)
                   for r in self.rows)

    def case_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.rows:
            counts[r.case_id] = counts.get(r.case_id, 0) + 1
        return counts


def run_dual_sweep(n_instances: int = 1000, seed: int = 0,
                   dim_range: tuple[int, int] = (5, 50),
                   pg_iters: int = PG_MAX_ITERS) -> SweepReport:
    """Analytic-vs-oracle comparison over seeded random feasible instances."""
    rng = np.random.default_rng(seed)
    rows = []
    start = time.perf_counter()
    for i in range(n_instances):
        dim = int(rng.integers(dim_range[0], dim_range[1] + 1))
        inst = random_instance(rng, dim)
        sub = TrustRegionSubproblem(
            g=-inst.ghat, b0=-inst.bhat0, b1=inst.bhat1,
            c0=inst.c0, c1=inst.c1, delta=inst.delta, hvp=inst.hvp,
        )
        canon = dual_solver.canonicalize(sub, cg_iters=4 * dim, cg_tol=1e-12)
        sol = dual_solver.solve_feasible(canon)
        obj_a = inst.objective(sol.step)
        _, obj_o = solve_primal_pg(inst, max_iters=pg_iters)
        gap = abs(obj_a - obj_o) / max(abs(obj_o), 1e-6)
        rows.append(SweepRow(
            instance=i, dim=dim, case_id=sol.case_id,
            obj_analytic=obj_a, obj_oracle=obj_o, rel_gap=gap,
            kkt_stationarity=sol.kkt.stationarity,
            kkt_primal=sol.kkt.primal,
            kkt_comp_slack=sol.kkt.comp_slack,
            primal_violation=inst.max_violation(sol.step),
        ))
    return SweepReport(rows=rows, elapsed_s=time.perf_counter() - start)
