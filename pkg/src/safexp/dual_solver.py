"""Closed-form solution of the two-constraint trust-region subproblem.

The original step problem is

    max g.x   s.t.   c0 - b0.x <= 0,   c1 + b1.x <= 0,   (1/2) x.H.x <= delta.

It is first mapped to the canonical minimization

    min ghat.x   s.t.   bhat_i.x + c_i <= 0,   (1/2) x.H.x <= delta

via ghat = -g, bhat0 = -b0, bhat1 = b1. With H positive definite the dual in
(lambda, nu0, nu1) splits into four active-set cases; each case's dual
function has the form A/(2 lambda) + B lambda / 2 + D and is unimodal on the
admissible lambda interval, so its maximum is the closed-form stationary
point sqrt(A/B) clamped to the interval, compared against the interval
endpoints. The best case wins and yields

    x* = -(1/lambda*) H^{-1} (ghat + nu0* bhat0 + nu1* bhat1).

When the current iterate violates a linear constraint, the recovery problem
min c_m + bhat_m.x over the trust region has the closed form
x* = -(1/phi*) H^{-1} bhat_m with phi* = sqrt(bhat_m.H^{-1}.bhat_m / (2 delta)).

All H^{-1} products come from matrix-free conjugate-gradient solves; three
solves are reused for every scalar in the case analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateDualError, RecoveryInfeasibleError
from .trust_region import TrustRegionSubproblem, cg_solve

LAMBDA_MIN = 1e-8
DEGENERACY_EPS = 1e-10

CASE_BOTH = "both_active"
CASE_C0 = "only_c0_active"
CASE_C1 = "only_c1_active"
CASE_NONE = "none_active"
CASE_RECOVERY = "recovery"


@dataclass
class KktReport:
    stationarity: float
    primal: float
    comp_slack: float

    def max_residual(self) -> float:
        return max(self.stationarity, self.primal, self.comp_slack)


@dataclass
class CanonicalSubproblem:
    ghat: np.ndarray
    bhat0: np.ndarray | None
    bhat1: np.ndarray | None
    c0: float | None
    c1: float | None
    delta: float
    hvp: Callable[[np.ndarray], np.ndarray]
    hi_g: np.ndarray
    hi_b0: np.ndarray | None
    hi_b1: np.ndarray | None
    q: float
    r0: float
    r1: float
    s0: float
    s1: float
    t: float
    cg_residual: float

    @property
    def has_c0(self) -> bool:
        return self.bhat0 is not None

    @property
    def has_c1(self) -> bool:
        return self.bhat1 is not None


@dataclass
class DualSolution:
    case_id: str
    lambda_star: float
    nu0_star: float
    nu1_star: float
    step: np.ndarray
    dual_value: float
    phi_star: float | None = None
    reachable: bool = True
    kkt: KktReport | None = None


def canonicalize(sub: TrustRegionSubproblem, cg_iters: int = 100,
                 cg_tol: float = 1e-8) -> CanonicalSubproblem:
    """Map the maximization step problem to Theorem-form minimization.

    Performs the three H^{-1} solves (objective and both constraint
    gradients) and precomputes the scalar products used by every case.
    """
    ghat = -np.asarray(sub.g, dtype=np.float64)
    bhat0 = None if sub.b0 is None else -np.asarray(sub.b0, dtype=np.float64)
    bhat1 = None if sub.b1 is None else np.asarray(sub.b1, dtype=np.float64)

    hi_g, res_g = cg_solve(sub.hvp, ghat, cg_iters, cg_tol)
    residual = res_g
    hi_b0 = hi_b1 = None
    if bhat0 is not None:
        hi_b0, res0 = cg_solve(sub.hvp, bhat0, cg_iters, cg_tol)
        residual = max(residual, res0)
    if bhat1 is not None:
        hi_b1, res1 = cg_solve(sub.hvp, bhat1, cg_iters, cg_tol)
        residual = max(residual, res1)

    q = max(float(ghat @ hi_g), 0.0)
    r0 = float(ghat @ hi_b0) if bhat0 is not None else 0.0
    r1 = float(ghat @ hi_b1) if bhat1 is not None else 0.0
    s0 = max(float(bhat0 @ hi_b0), 0.0) if bhat0 is not None else 0.0
    s1 = max(float(bhat1 @ hi_b1), 0.0) if bhat1 is not None else 0.0
    t = float(bhat0 @ hi_b1) if (bhat0 is not None and bhat1 is not None) else 0.0

    return CanonicalSubproblem(
        ghat=ghat, bhat0=bhat0, bhat1=bhat1,
        c0=sub.c0, c1=sub.c1, delta=float(sub.delta), hvp=sub.hvp,
        hi_g=hi_g, hi_b0=hi_b0, hi_b1=hi_b1,
        q=q, r0=r0, r1=r1, s0=s0, s1=s1, t=t, cg_residual=residual,
    )


def _interval(ineqs: list[tuple[float, float]]) -> tuple[float, float] | None:
    """Intersection of {lambda >= 0} with constraints alpha*lambda > beta."""
    lo, hi = 0.0, math.inf
    for alpha, beta in ineqs:
        if alpha > 0.0:
            lo = max(lo, beta / alpha)
        elif alpha < 0.0:
            hi = min(hi, beta / alpha)
        elif beta >= 0.0:
            return None
    if lo >= hi:
        return None
    return lo, hi


def _dual_value(canon: CanonicalSubproblem, lam: float, nu0: float, nu1: float) -> float:
    quad = (canon.q + 2.0 * nu0 * canon.r0 + 2.0 * nu1 * canon.r1
            + nu0 * nu0 * canon.s0 + nu1 * nu1 * canon.s1
            + 2.0 * nu0 * nu1 * canon.t)
    val = -quad / (2.0 * max(lam, 1e-300)) - lam * canon.delta
    if canon.has_c0:
        val += nu0 * canon.c0
    if canon.has_c1:
        val += nu1 * canon.c1
    return val


def solve_feasible(canon: CanonicalSubproblem,
                   lambda_min: float = LAMBDA_MIN) -> DualSolution:
    """Four-case dual maximization of the canonical subproblem.

    Valid whenever the primal admits a strictly feasible point; the training
    engine only routes here when the current iterate satisfies the linear
    constraints (c_i <= 0), which guarantees that. Raises
    :class:`DegenerateDualError` when the best multiplier falls below the
    floor (objective gradient in the span of active constraint gradients, or
    effectively zero); callers then fall back to a plain boundary step.
    """
    q, r0, r1 = canon.q, canon.r0, canon.r1
    s0, s1, t = canon.s0, canon.s1, canon.t
    c0 = canon.c0 if canon.has_c0 else 0.0
    c1 = canon.c1 if canon.has_c1 else 0.0
    delta = canon.delta

    eps_s = DEGENERACY_EPS * max(1.0, q)
    den = s0 * s1 - t * t
    parallel = den <= max(DEGENERACY_EPS, 1e-12 * s0 * s1)

    # (case_id, A, B, interval, nu(lambda))
    cases = [(
        CASE_NONE, -q, -2.0 * delta, (0.0, math.inf),
        lambda lam: (0.0, 0.0),
    )]
    if canon.has_c0 and s0 > eps_s:
        iv = _interval([(c0, r0)])
        if iv is not None:
            cases.append((
                CASE_C0,
                r0 * r0 / s0 - q,
                c0 * c0 / s0 - 2.0 * delta,
                iv,
                lambda lam: ((lam * c0 - r0) / s0, 0.0),
            ))
    if canon.has_c1 and s1 > eps_s:
        iv = _interval([(c1, r1)])
        if iv is not None:
            cases.append((
                CASE_C1,
                r1 * r1 / s1 - q,
                c1 * c1 / s1 - 2.0 * delta,
                iv,
                lambda lam: (0.0, (lam * c1 - r1) / s1),
            ))
    if canon.has_c0 and canon.has_c1 and s0 > eps_s and s1 > eps_s and not parallel:
        iv = _interval([
            (s1 * c0 - t * c1, s1 * r0 - t * r1),   # nu0 > 0
            (s0 * c1 - t * c0, s0 * r1 - t * r0),   # nu1 > 0
        ])
        if iv is not None:
            cases.append((
                CASE_BOTH,
                (s1 * r0 * r0 + s0 * r1 * r1 - 2.0 * t * r0 * r1) / den - q,
                (s1 * c0 * c0 + s0 * c1 * c1 - 2.0 * t * c0 * c1) / den - 2.0 * delta,
                iv,
                lambda lam: (
                    (lam * (s1 * c0 - t * c1) + t * r1 - s1 * r0) / den,
                    (lam * (s0 * c1 - t * c0) + t * r0 - s0 * r1) / den,
                ),
            ))

    best = None
    for case_id, a_coef, b_coef, (lo, hi), nu_of in cases:
        candidates = []
        if a_coef < 0.0 and b_coef < 0.0:
            candidates.append(min(max(math.sqrt(a_coef / b_coef), lo), hi))
        if lo > 0.0:
            candidates.append(lo)
        if math.isfinite(hi):
            candidates.append(hi)
        for lam in candidates:
            if not math.isfinite(lam) or lam <= 0.0:
                continue
            nu0, nu1 = nu_of(lam)
            nu0, nu1 = max(nu0, 0.0), max(nu1, 0.0)
            val = _dual_value(canon, lam, nu0, nu1)
            if best is None or val > best[0]:
                best = (val, case_id, lam, nu0, nu1)

    if best is None or best[2] < lambda_min:
        raise DegenerateDualError(
            "dual degenerate: no admissible multiplier above the floor"
        )

    val, case_id, lam, nu0, nu1 = best
    u = canon.hi_g.copy()
    if canon.hi_b0 is not None:
        u += nu0 * canon.hi_b0
    if canon.hi_b1 is not None:
        u += nu1 * canon.hi_b1
    step = -u / lam
    sol = DualSolution(case_id=case_id, lambda_star=lam, nu0_star=nu0,
                       nu1_star=nu1, step=step, dual_value=val)
    sol.kkt = kkt_check(canon, sol)
    return sol


def solve_recovery(bhat_m: np.ndarray, c_m: float,
                   hvp: Callable[[np.ndarray], np.ndarray], delta: float,
                   cg_iters: int = 100, cg_tol: float = 1e-8) -> DualSolution:
    """Boundary step that maximally reduces a violated linearized constraint.

    Requires c_m > 0 in canonical orientation. Raises
    :class:`RecoveryInfeasibleError` when the constraint gradient vanishes.
    """
    if c_m <= 0.0:
        raise ValueError("solve_recovery expects a violated constraint (c_m > 0)")
    bhat_m = np.asarray(bhat_m, dtype=np.float64)
    hi_b, _ = cg_solve(hvp, bhat_m, cg_iters, cg_tol)
    s_m = float(bhat_m @ hi_b)
    if s_m <= DEGENERACY_EPS:
        raise RecoveryInfeasibleError(
            f"violated constraint (surplus {c_m:.4g}) has a vanishing gradient; "
            "no recovery direction exists"
        )
    phi = math.sqrt(s_m / (2.0 * delta))
    step = -hi_b / phi
    reachable = c_m - math.sqrt(2.0 * delta * s_m) <= 0.0
    sol = DualSolution(
        case_id=CASE_RECOVERY, lambda_star=phi, nu0_star=0.0, nu1_star=0.0,
        step=step, dual_value=-s_m / (2.0 * phi) + c_m - phi * delta,
        phi_star=phi, reachable=reachable,
    )
    pseudo = CanonicalSubproblem(
        ghat=bhat_m, bhat0=None, bhat1=None, c0=None, c1=None, delta=delta,
        hvp=hvp, hi_g=hi_b, hi_b0=None, hi_b1=None,
        q=s_m, r0=0.0, r1=0.0, s0=0.0, s1=0.0, t=0.0, cg_residual=0.0,
    )
    sol.kkt = kkt_check(pseudo, sol)
    return sol


def combine_recovery(solutions: list[DualSolution],
                     hvp: Callable[[np.ndarray], np.ndarray],
                     delta: float) -> np.ndarray:
    """Sum per-constraint recovery steps, rescaled back into the trust region."""
    if not solutions:
        raise ValueError("no recovery solutions to combine")
    x = np.sum([sol.step for sol in solutions], axis=0)
    quad = 0.5 * float(x @ hvp(x))
    if quad > delta:
        x = x * math.sqrt(delta / quad)
    return x


def kkt_check(canon: CanonicalSubproblem, sol: DualSolution) -> KktReport:
    """Stationarity, primal feasibility, and complementary slackness residuals.

    For recovery solutions the objective slot of the canonical container holds
    the violated constraint gradient and the multiplier is phi*.
    """
    x = sol.step
    lam = sol.lambda_star
    hx = canon.hvp(x)
    stat_vec = canon.ghat + lam * hx
    if canon.bhat0 is not None:
        stat_vec = stat_vec + sol.nu0_star * canon.bhat0
    if canon.bhat1 is not None:
        stat_vec = stat_vec + sol.nu1_star * canon.bhat1
    stationarity = float(np.linalg.norm(stat_vec))

    quad_slack = 0.5 * float(x @ hx) - canon.delta
    primal = max(quad_slack, 0.0)
    comp = abs(lam * quad_slack)
    if canon.bhat0 is not None:
        g0 = float(canon.bhat0 @ x) + canon.c0
        primal = max(primal, g0)
        comp = max(comp, abs(sol.nu0_star * g0))
    if canon.bhat1 is not None:
        g1 = float(canon.bhat1 @ x) + canon.c1
        primal = max(primal, g1)
        comp = max(comp, abs(sol.nu1_star * g1))
    return KktReport(stationarity=stationarity, primal=primal, comp_slack=comp)
