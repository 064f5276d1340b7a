"""Verification suites behind ``safexp verify``.

Each suite returns (passed, report lines). The same entry points back the
acceptance tests, so the CLI and the test suite cannot drift apart.
"""

from __future__ import annotations

import time

import numpy as np

from . import qp_oracle
from .engine import AlgoConfig, train
from .envs import exact_policy_returns, make_chain
from .oracle import enumerate_constrained_optimum
from .policies import GaussianMlpPolicy, SoftmaxTablePolicy
from .trust_region import cg_solve

DUAL_SWEEP_SEED = 2026
DUAL_GAP_TOL = 1e-4
DUAL_KKT_TOL = 1e-6
DUAL_TIME_BUDGET_S = 60.0

GRAD_REL_TOL = 1e-4
HVP_REL_TOL = 1e-3
CG_TOL = 1e-8


def verify_dual_sweep(n_instances: int = 1000, seed: int = DUAL_SWEEP_SEED,
                      out_csv: str | None = None):
    report = qp_oracle.run_dual_sweep(n_instances=n_instances, seed=seed)
    ok = (report.max_rel_gap <= DUAL_GAP_TOL
          and report.max_kkt <= DUAL_KKT_TOL
          and report.elapsed_s <= DUAL_TIME_BUDGET_S)
    lines = [
        f"dual sweep: {n_instances} instances in {report.elapsed_s:.1f}s "
        f"(budget {DUAL_TIME_BUDGET_S:.0f}s)",
        f"  max relative objective gap vs oracle: {report.max_rel_gap:.3e} "
        f"(tol {DUAL_GAP_TOL:g})",
        f"  max KKT residual: {report.max_kkt:.3e} (tol {DUAL_KKT_TOL:g})",
        f"  case counts: {report.case_counts()}",
        f"  {'PASS' if ok else 'FAIL'}",
    ]
    if out_csv:
        with open(out_csv, "w", encoding="utf-8") as fh:
            fh.write("instance,dim,case,obj_analytic,obj_oracle,rel_gap,"
                     "kkt_stationarity,kkt_primal,kkt_comp_slack,primal_violation\n")
            for r in report.rows:
                fh.write(f"{r.instance},{r.dim},{r.case_id},{r.obj_analytic!r},"
                         f"{r.obj_oracle!r},{r.rel_gap!r},{r.kkt_stationarity!r},"
                         f"{r.kkt_primal!r},{r.kkt_comp_slack!r},{r.primal_violation!r}\n")
        lines.insert(-1, f"  residual report written to {out_csv}")
    return ok, lines


def _fd_logprob_errors(policy, theta, state, action, coords, h=1e-5):
    grad = policy.grad_log_prob(theta, state, action)
    scale = max(float(np.max(np.abs(grad))), 1e-8)
    errs = []
    for i in coords:
        tp = theta.copy()
        tp[i] += h
        tm = theta.copy()
        tm[i] -= h
        fp = float(policy.log_prob(tp, [state], [action])[0])
        fm = float(policy.log_prob(tm, [state], [action])[0])
        fd = (fp - fm) / (2.0 * h)
        errs.append(abs(fd - grad[i]) / max(abs(grad[i]), 1e-3 * scale))
    return max(errs)


def verify_grad_check(n_seeds: int = 10, n_coords: int = 64):
    lines = []
    ok = True

    worst_gauss = 0.0
    for s in range(n_seeds):
        rng = np.random.default_rng(1000 + s)
        policy = GaussianMlpPolicy(4, 2)
        theta = policy.init_theta(rng)
        state = rng.normal(size=4)
        action = rng.normal(size=2)
        coords = rng.choice(policy.param_count, size=n_coords, replace=False)
        worst_gauss = max(worst_gauss, _fd_logprob_errors(policy, theta, state, action, coords))
    ok &= worst_gauss <= GRAD_REL_TOL
    lines.append(f"grad log-prob (gaussian mlp): worst rel err {worst_gauss:.3e} "
                 f"over {n_seeds} seeds x {n_coords} coords (tol {GRAD_REL_TOL:g})")

    worst_tab = 0.0
    for s in range(n_seeds):
        rng = np.random.default_rng(2000 + s)
        policy = SoftmaxTablePolicy(6, 4)
        theta = rng.normal(size=policy.param_count)
        state = int(rng.integers(6))
        action = int(rng.integers(4))
        coords = rng.choice(policy.param_count, size=min(n_coords, policy.param_count),
                            replace=False)
        worst_tab = max(worst_tab, _fd_logprob_errors(policy, theta, state, action, coords))
    ok &= worst_tab <= GRAD_REL_TOL
    lines.append(f"grad log-prob (softmax table): worst rel err {worst_tab:.3e} "
                 f"(tol {GRAD_REL_TOL:g})")

    worst_hvp = 0.0
    for s in range(n_seeds):
        rng = np.random.default_rng(3000 + s)
        policy = GaussianMlpPolicy(3, 2)
        theta = policy.init_theta(rng)
        states = rng.normal(size=(40, 3))
        v = rng.normal(size=policy.param_count)
        hv = policy.kl_hvp(theta, states, v)
        h = 1e-4
        gp = policy.grad_mean_kl(theta + h * v, theta, states)
        gm = policy.grad_mean_kl(theta - h * v, theta, states)
        fd = (gp - gm) / (2.0 * h)
        worst_hvp = max(worst_hvp, float(np.linalg.norm(fd - hv) / np.linalg.norm(hv)))
    ok &= worst_hvp <= HVP_REL_TOL
    lines.append(f"kl hessian-vector product vs fd of kl gradient: worst rel err "
                 f"{worst_hvp:.3e} (tol {HVP_REL_TOL:g})")

    worst_cg_res = 0.0
    worst_cg_err = 0.0
    for s, dim in enumerate((20, 35, 50)):
        rng = np.random.default_rng(4000 + s)
        a = rng.normal(size=(dim, dim))
        mat = a @ a.T + 0.1 * np.eye(dim)
        rhs = rng.normal(size=dim)
        x, res = cg_solve(lambda v, m=mat: m @ v, rhs, iters=200, tol=CG_TOL)
        worst_cg_res = max(worst_cg_res, res)
        direct = np.linalg.solve(mat, rhs)
        worst_cg_err = max(worst_cg_err,
                           float(np.linalg.norm(x - direct) / np.linalg.norm(direct)))
    ok &= worst_cg_res <= CG_TOL
    lines.append(f"cg: worst residual {worst_cg_res:.3e} (tol {CG_TOL:g}); "
                 f"worst error vs dense solve {worst_cg_err:.3e}")

    lines.append("PASS" if ok else "FAIL")
    return ok, lines


def verify_tabular_oracle(epochs: int = 500, seed: int = 0):
    chain = make_chain()
    oracle_res = enumerate_constrained_optimum(chain, chain.d0, chain.d1)
    policy = SoftmaxTablePolicy(chain.n_states, chain.n_actions)
    cfg = AlgoConfig(algorithm="seps", d0=chain.d0, d1=chain.d1, epochs=epochs,
                     steps_per_epoch=600, delta=0.01, value_fit_steps=15)
    start = time.perf_counter()
    theta, _ = train(chain, policy, policy.init_theta(), cfg, seed=seed)
    elapsed = time.perf_counter() - start
    j_r, j_c1, j_u = exact_policy_returns(chain, policy.probs(theta))
    ok = (j_u >= 0.95 * oracle_res.j_u
          and j_r >= chain.d0 - 0.02
          and j_c1 <= chain.d1 + 0.02
          and elapsed <= 300.0)
    lines = [
        f"enumeration oracle: {oracle_res.summary()}",
        f"trained policy (exact eval after {epochs} epochs, {elapsed:.0f}s): "
        f"J_u={j_u:.4f} J_R={j_r:.4f} J_C1={j_c1:.4f}",
        f"  J_u gap vs oracle: {100.0 * (1.0 - j_u / oracle_res.j_u):.2f}% (allowed 5%)",
        f"  constraint slacks: J_R - d0 = {j_r - chain.d0:+.4f} (>= -0.02), "
        f"d1 - J_C1 = {chain.d1 - j_c1:+.4f} (>= -0.02)",
        "PASS" if ok else "FAIL",
    ]
    return ok, lines
