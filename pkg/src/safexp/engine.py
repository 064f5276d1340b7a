"""Outer training loop: collect, estimate, assemble, solve, line-search, update.

The engine wires one of six algorithm variants into the same loop:

- ``seps``: maximize the user-expectation return subject to a task-return
  lower bound (d0) and a cost upper bound (d1),
- ``seps_no_c0``: same objective, cost bound only,
- ``seps_lin_no_c0``: objective u + lambda * r, cost bound only,
- ``agt`` / ``hum``: unconstrained trust-region ascent on the task /
  user-expectation stream,
- ``eps``: unconstrained ascent on the reshaped stream
  r + lambda * (u + entropy_weight * policy entropy).

Feasible epochs use the analytic two-constraint dual; epochs with violated
constraints take recovery steps that ignore the objective. Every proposed
step passes a backtracking line search on the sampled surrogates before the
parameters move.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dual_solver
from .errors import ConfigError, RecoveryInfeasibleError
from .estimation import (
    TrajectoryBatch,
    ValueFunctions,
    collect,
    gae_advantages,
    normalize_advantages,
)
from .trust_region import TrustRegionSubproblem, make_hvp, policy_gradient

ALGORITHMS = ("seps", "agt", "hum", "eps", "seps_no_c0", "seps_lin_no_c0")

BRANCH_FEASIBLE = "feasible"
BRANCH_RECOVERY = "recovery"
CASE_FALLBACK = "degenerate_fallback"


@dataclass
class AlgoConfig:
    algorithm: str
    d0: float | None = None
    d1: float | None = None
    delta: float = 0.01
    recon_lambda: float | None = None
    entropy_weight: float = 0.01
    epochs: int = 100
    steps_per_epoch: int = 4000
    gae_lambda: float = 0.95
    damping: float = 0.1
    cg_iters: int = 100
    cg_tol: float = 1e-8
    backtracks: int = 10
    discounted_constraints: bool = True
    recovery_mode: str = "combined"   # or "one_at_a_time"
    workers: int = 1
    value_fit_steps: int = 25
    value_lr: float = 1e-2
    value_hidden: tuple[int, ...] = (32,)

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        wiring = variant_wiring(self.algorithm)
        if wiring.use_c0 and self.d0 is None:
            raise ConfigError(f"algorithm {self.algorithm!r} requires d0")
        if wiring.use_c1 and self.d1 is None:
            raise ConfigError(f"algorithm {self.algorithm!r} requires d1")
        if wiring.objective == "lin" and self.recon_lambda is None:
            raise ConfigError(f"algorithm {self.algorithm!r} requires recon_lambda")
        if self.algorithm == "eps" and self.recon_lambda is None:
            raise ConfigError("algorithm 'eps' requires recon_lambda")
        if self.recovery_mode not in ("combined", "one_at_a_time"):
            raise ConfigError(f"unknown recovery_mode {self.recovery_mode!r}")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")


@dataclass(frozen=True)
class Wiring:
    objective: str        # "u", "r", "lin", or "eps"
    use_c0: bool
    use_c1: bool


def variant_wiring(algorithm: str) -> Wiring:
    """Objective stream and constraint set for each algorithm tag."""
    table = {
        "seps": Wiring("u", True, True),
        "seps_no_c0": Wiring("u", False, True),
        "seps_lin_no_c0": Wiring("lin", False, True),
        "agt": Wiring("r", False, False),
        "hum": Wiring("u", False, False),
        "eps": Wiring("eps", False, False),
    }
    if algorithm not in table:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    return table[algorithm]


def eps_objective_rewards(batch: TrajectoryBatch, policy, theta,
                          recon_lambda: float, entropy_weight: float) -> np.ndarray:
    """Reshaped per-step reward r + lambda * (u + entropy_weight * H_pi(s)).

    The shipped environments have deterministic dynamics, so the dynamics
    entropy term is a constant and is dropped.
    """
    ent = policy.entropies(theta, batch.states)
    return batch.rewards["r"] + recon_lambda * (
        batch.rewards["u"] + entropy_weight * ent
    )


def objective_rewards(batch: TrajectoryBatch, policy, theta, cfg: AlgoConfig) -> np.ndarray:
    wiring = variant_wiring(cfg.algorithm)
    if wiring.objective == "u":
        return batch.rewards["u"].copy()
    if wiring.objective == "r":
        return batch.rewards["r"].copy()
    if wiring.objective == "lin":
        return batch.rewards["u"] + cfg.recon_lambda * batch.rewards["r"]
    return eps_objective_rewards(batch, policy, theta, cfg.recon_lambda, cfg.entropy_weight)


@dataclass
class EpochReport:
    epoch: int
    j_u: float
    j_r: float
    j_c1: float
    ret_u: float
    ret_r: float
    ret_c1: float
    c0: float | None
    c1: float | None
    branch: str
    dual_case: str
    kl: float
    step_norm: float
    backtracks: int
    accepted: bool


def train(env, policy, theta: np.ndarray, cfg: AlgoConfig, seed: int,
          epoch_callback=None):
    """Run the constrained trust-region loop; returns (theta, reports).

    Deterministic given (env params, cfg, seed, worker count): every random
    draw comes from generators keyed on (seed, epoch, worker).
    """
    cfg.validate()
    wiring = variant_wiring(cfg.algorithm)
    gamma = env.spec.gamma
    horizon_scale = 1.0 / (1.0 - gamma)
    cons_gamma = gamma if cfg.discounted_constraints else None
    values = ValueFunctions(
        feature_dim=policy.value_features(
            policy.stack_states([env.reset(np.random.default_rng(0))])
        ).shape[1],
        hidden=tuple(cfg.value_hidden),
        fit_steps=cfg.value_fit_steps,
        lr=cfg.value_lr,
    )
    theta = np.asarray(theta, dtype=np.float64).copy()
    reports: list[EpochReport] = []

    for epoch in range(cfg.epochs):
        rngs = [np.random.default_rng([seed, epoch, w]) for w in range(cfg.workers)]
        batch = collect(env, policy, theta, cfg.steps_per_epoch, rngs)
        batch.rewards["obj"] = objective_rewards(batch, policy, theta, cfg)

        streams = ["obj"]
        if wiring.use_c0:
            streams.append("r")
        if wiring.use_c1:
            streams.append("c1")
        feats = policy.value_features(batch.states)
        feats_next = policy.value_features(batch.next_states)
        for stream in streams:
            v = values.predict(stream, feats)
            v_next = values.predict(stream, feats_next)
            adv = gae_advantages(batch.rewards[stream], v, v_next, batch.terminal,
                                 batch.seg_end, gamma, cfg.gae_lambda)
            batch.advantages[stream] = adv
            values.fit(stream, feats, adv + v)

        j_u = batch.jhat("u", gamma)
        j_r = batch.jhat("r", gamma)
        j_c1 = batch.jhat("c1", gamma)
        c0 = cfg.d0 - batch.jhat("r", cons_gamma) if wiring.use_c0 else None
        c1 = batch.jhat("c1", cons_gamma) - cfg.d1 if wiring.use_c1 else None

        adv_obj = normalize_advantages(batch.advantages["obj"])
        g = policy_gradient(policy, theta, batch, adv_obj)
        hvp = make_hvp(policy, theta, batch.states, cfg.damping)

        violated = []
        if wiring.use_c0 and c0 > 0.0:
            violated.append("c0")
        if wiring.use_c1 and c1 > 0.0:
            violated.append("c1")

        if not violated:
            b0 = b1 = None
            if wiring.use_c0:
                b0 = horizon_scale * policy_gradient(policy, theta, batch,
                                                     batch.advantages["r"])
            if wiring.use_c1:
                b1 = horizon_scale * policy_gradient(policy, theta, batch,
                                                     batch.advantages["c1"])
            sub = TrustRegionSubproblem(g=g, b0=b0, b1=b1, c0=c0, c1=c1,
                                        delta=cfg.delta, hvp=hvp)
            canon = dual_solver.canonicalize(sub, cfg.cg_iters, cfg.cg_tol)
            try:
                sol = dual_solver.solve_feasible(canon)
                step = sol.step
                dual_case = sol.case_id
            except dual_solver.DegenerateDualError:
                step = _boundary_fallback(canon)
                dual_case = CASE_FALLBACK
            branch = BRANCH_FEASIBLE
        else:
            if cfg.recovery_mode == "one_at_a_time":
                worst = max(violated, key=lambda name: c0 if name == "c0" else c1)
                violated = [worst]
            sols = []
            try:
                for name in violated:
                    if name == "c0":
                        bhat = -horizon_scale * policy_gradient(
                            policy, theta, batch, batch.advantages["r"])
                        sols.append(dual_solver.solve_recovery(
                            bhat, c0, hvp, cfg.delta, cfg.cg_iters, cfg.cg_tol))
                    else:
                        bhat = horizon_scale * policy_gradient(
                            policy, theta, batch, batch.advantages["c1"])
                        sols.append(dual_solver.solve_recovery(
                            bhat, c1, hvp, cfg.delta, cfg.cg_iters, cfg.cg_tol))
            except RecoveryInfeasibleError as exc:
                raise RecoveryInfeasibleError(
                    f"epoch {epoch}: {exc}"
                ) from exc
            step = dual_solver.combine_recovery(sols, hvp, cfg.delta)
            dual_case = dual_solver.CASE_RECOVERY
            branch = BRANCH_RECOVERY

        theta, accepted, kl, frac, used_backtracks = _line_search(
            policy, theta, step, batch, adv_obj, cfg, wiring, branch,
            c0, c1, violated, horizon_scale,
        )
        report = EpochReport(
            epoch=epoch, j_u=j_u, j_r=j_r, j_c1=j_c1,
            ret_u=batch.jhat("u", None), ret_r=batch.jhat("r", None),
            ret_c1=batch.jhat("c1", None),
            c0=c0, c1=c1, branch=branch, dual_case=dual_case,
            kl=kl, step_norm=float(np.linalg.norm(step) * frac),
            backtracks=used_backtracks, accepted=accepted,
        )
        reports.append(report)
        if epoch_callback is not None:
            epoch_callback(epoch, theta, report)
    return theta, reports


def _boundary_fallback(canon) -> np.ndarray:
    """Plain trust-region step along -H^{-1} ghat scaled to the boundary."""
    if canon.q <= 0.0:
        return np.zeros_like(canon.hi_g)
    return -canon.hi_g * np.sqrt(2.0 * canon.delta / canon.q)


def _line_search(policy, theta, step, batch, adv_obj, cfg: AlgoConfig,
                 wiring: Wiring, branch: str, c0, c1, violated,
                 horizon_scale: float):
    """Backtracking acceptance on sampled surrogates.

    Feasible branch: the surrogate objective must improve, no wired
    constraint may worsen beyond tolerance 0.05*|d| + 0.01, and the mean KL
    must stay within 1.5 * delta. Recovery branch: every violated
    constraint's surrogate surplus must strictly decrease under the same KL
    cap. Rejected steps leave theta unchanged.
    """
    kl_cap = 1.5 * cfg.delta
    logp_old = batch.log_probs
    n = batch.n
    kl = 0.0
    frac = 1.0
    for bt in range(cfg.backtracks + 1):
        frac = 0.5 ** bt
        cand = theta + frac * step
        kl = policy.mean_kl(cand, theta, batch.states)
        if kl > kl_cap:
            continue
        ratios = np.exp(policy.log_prob(cand, batch.states, batch.actions) - logp_old)
        shifts = ratios - 1.0

        if branch == BRANCH_FEASIBLE:
            if float(shifts @ adv_obj) / n <= 0.0:
                continue
            ok = True
            if wiring.use_c0:
                c0_new = c0 - horizon_scale * float(shifts @ batch.advantages["r"]) / n
                ok &= c0_new <= max(c0, 0.0) + (0.05 * abs(cfg.d0) + 0.01)
            if ok and wiring.use_c1:
                c1_new = c1 + horizon_scale * float(shifts @ batch.advantages["c1"]) / n
                ok &= c1_new <= max(c1, 0.0) + (0.05 * abs(cfg.d1) + 0.01)
            if not ok:
                continue
        else:
            ok = True
            for name in violated:
                if name == "c0":
                    new = c0 - horizon_scale * float(shifts @ batch.advantages["r"]) / n
                    ok &= new < c0
                else:
                    new = c1 + horizon_scale * float(shifts @ batch.advantages["c1"]) / n
                    ok &= new < c1
            if not ok:
                continue

        assert kl <= kl_cap + 1e-12
        return cand, True, kl, frac, bt
    return theta, False, kl, frac, cfg.backtracks
