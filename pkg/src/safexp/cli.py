"""Command-line front end: train, plot, verify, oracle.

Run directories are self-describing: the resolved configuration, the merged
metrics CSV, and policy checkpoints all land under ``--out`` (default
``$SAFEXP_OUT_ROOT/<env>-<algo>`` or ``runs/<env>-<algo>``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import config as cfgmod
from . import metrics as metmod
from . import svgplot
from .engine import train
from .envs.tabular import TabularCmdp
from .errors import ConfigError, NumericalError, RecoveryInfeasibleError
from .oracle import enumerate_constrained_optimum
from .policies import GaussianMlpPolicy, SoftmaxTablePolicy


def build_policy(env, cfg: dict):
    if env.spec.discrete_actions:
        return SoftmaxTablePolicy(env.n_states, env.n_actions)
    return GaussianMlpPolicy(env.spec.state_dim, env.spec.action_dim,
                             hidden=tuple(cfg["hidden"]),
                             init_log_std=float(cfg["init_log_std"]))


def init_theta(policy, seed: int) -> np.ndarray:
    return policy.init_theta(np.random.default_rng([seed, 0x5EED]))


def _resolve_out_dir(cfg: dict) -> str:
    out = cfg["out_dir"]
    if not os.path.isabs(out):
        root = os.environ.get("SAFEXP_OUT_ROOT", "")
        if root:
            out = os.path.join(root, out)
    return out


def run_training(cfg: dict, echo=print) -> str:
    """Execute one resolved configuration across its seed list."""
    env = cfgmod.build_env(cfg)
    algo_cfg = cfgmod.build_algo_config(cfg)
    algo_cfg.validate()
    out_dir = _resolve_out_dir(cfg)
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.resolved"), "w", encoding="utf-8") as fh:
        fh.write(cfgmod.format_resolved(cfg))

    all_rows: list[metmod.MetricsRow] = []
    ckpt_every = int(cfg["checkpoint_every"])
    run_id = cfg["run_id"]
    for seed in cfg["seeds"]:
        policy = build_policy(env, cfg)
        theta0 = init_theta(policy, seed)
        rows: list[metmod.MetricsRow] = []

        def on_epoch(epoch, theta, report, _seed=seed, _policy=policy, _rows=rows):
            _rows.append(metmod.row_from_report(run_id, cfg["algo"], _seed, report))
            if ckpt_every and (epoch + 1) % ckpt_every == 0:
                _save_checkpoint(ckpt_dir, _seed, epoch, _policy, theta)

        theta, reports = train(env, policy, theta0, algo_cfg, seed,
                               epoch_callback=on_epoch)
        _save_checkpoint(ckpt_dir, seed, "final", policy, theta)
        all_rows.extend(rows)
        echo(f"seed {seed}: {len(reports)} epochs, final j_u={reports[-1].j_u:.4f} "
             f"j_r={reports[-1].j_r:.4f} j_c1={reports[-1].j_c1:.4f}")
    metmod.write_metrics(os.path.join(out_dir, "metrics.csv"), all_rows)
    echo(f"wrote {os.path.join(out_dir, 'metrics.csv')}")
    return out_dir


def _save_checkpoint(ckpt_dir, seed, tag, policy, theta) -> None:
    data = policy.checkpoint(theta)
    path = os.path.join(ckpt_dir, f"seed{seed}_{tag}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh)


def cmd_train(args) -> int:
    values = cfgmod.load_config(args.config) if args.config else {}
    if args.env:
        values["env"] = args.env
    if args.algo:
        values["algo"] = args.algo
    if args.seeds is not None:
        values["seeds"] = list(range(args.seeds))
    if args.recon_lambda is not None:
        values["recon_lambda"] = args.recon_lambda
    if args.out:
        values["out_dir"] = args.out
    values = cfgmod.apply_overrides(values, args.set or [])
    cfg = cfgmod.resolve(values)
    try:
        run_training(cfg)
    except (RecoveryInfeasibleError, NumericalError) as exc:
        print(f"run halted: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_plot(args) -> int:
    per_algo: dict[str, dict[int, list[dict]]] = {}
    limits: dict[str, float] = {}
    for run_dir in args.run_dirs:
        path = os.path.join(run_dir, "metrics.csv")
        rows = metmod.read_metrics(path)
        if not rows:
            print(f"error: {path} is empty", file=sys.stderr)
            return 1
        for row in rows:
            per_algo.setdefault(row["algorithm"], {}).setdefault(row["seed"], []).append(row)
        cfg_path = os.path.join(run_dir, "config.resolved")
        if os.path.exists(cfg_path):
            resolved = cfgmod.load_config(cfg_path)
            for key in ("d0", "d1"):
                if resolved.get(key) is not None:
                    limits[key] = float(resolved[key])
    os.makedirs(args.out, exist_ok=True)

    discounted = not args.undiscounted
    metric_cols = {"j_u": "u_H", "j_r": "R_A", "j_c1": "C_1"} if discounted else \
                  {"ret_u": "u_H", "ret_r": "R_A", "ret_c1": "C_1"}
    flavor = "discounted" if discounted else "undiscounted"
    written = []
    for col, label in metric_cols.items():
        series = []
        for algo in sorted(per_algo):
            seeds = per_algo[algo]
            lengths = {len(rows) for rows in seeds.values()}
            n = min(lengths)
            if len(lengths) > 1:
                print(f"warning: {algo} seeds have mismatched epoch counts; "
                      f"truncating to {n}", file=sys.stderr)
            data = np.array([
                [r[col] for r in sorted(rows, key=lambda r: r["epoch"])[:n]]
                for rows in seeds.values()
            ])
            xs = list(range(n))
            series.append(svgplot.Series(
                name=algo, xs=xs,
                mean=data.mean(axis=0).tolist(),
                lo=data.min(axis=0).tolist(),
                hi=data.max(axis=0).tolist(),
            ))
        refs = []
        if col in ("j_r", "ret_r") and "d0" in limits:
            refs.append(svgplot.RefLine(limits["d0"], f"d0 = {limits['d0']:g}"))
        if col in ("j_c1", "ret_c1") and "d1" in limits:
            refs.append(svgplot.RefLine(limits["d1"], f"d1 = {limits['d1']:g}"))
        path = os.path.join(args.out, f"{col}.svg")
        svgplot.write_chart(path, f"Returns under {label} ({flavor}, mean and "
                            f"min-max over seeds)", "epoch", f"return ({label})",
                            series, refs)
        written.append(path)
    print("wrote " + ", ".join(written))
    return 0


def cmd_verify(args) -> int:
    from . import verify as vermod

    if args.suite == "dual-sweep":
        ok, lines = vermod.verify_dual_sweep(out_csv=args.out)
    elif args.suite == "grad-check":
        ok, lines = vermod.verify_grad_check()
    else:
        ok, lines = vermod.verify_tabular_oracle()
    for line in lines:
        print(line)
    return 0 if ok else 1


def cmd_oracle(args) -> int:
    values = cfgmod.load_config(args.config) if args.config else {}
    values.setdefault("env", "chain5")
    values.setdefault("algo", "seps")
    values = cfgmod.apply_overrides(values, args.set or [])
    cfg = cfgmod.resolve(values)
    env = cfgmod.build_env(cfg)
    if not isinstance(env, TabularCmdp):
        print("error: the enumeration oracle requires a tabular environment",
              file=sys.stderr)
        return 1
    d0 = float(cfg["d0"])
    d1 = float(cfg["d1"])
    result = enumerate_constrained_optimum(env, d0, d1)
    print(f"environment: {cfg['env']}  d0={d0:g}  d1={d1:g}")
    print(result.summary())
    if args.out:
        header_needed = not os.path.exists(args.out)
        with open(args.out, "a", encoding="utf-8") as fh:
            if header_needed:
                fh.write("env,d0,d1,feasible,j_u,j_r,j_c1,policies\n")
            if result.feasible_found:
                fh.write(f"{cfg['env']},{d0!r},{d1!r},1,{result.j_u!r},"
                         f"{result.j_r!r},{result.j_c1!r},{result.policies_enumerated}\n")
            else:
                fh.write(f"{cfg['env']},{d0!r},{d1!r},0,,,,{result.policies_enumerated}\n")
        print(f"appended to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safexp",
        description="Constrained trust-region policy search with explicability objectives",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run training for one env/algorithm")
    p_train.add_argument("--config", help="path to a key=value config file")
    p_train.add_argument("--env", help="environment name (hazard-nav, button-nav, chain5)")
    p_train.add_argument("--algo", help="algorithm tag")
    p_train.add_argument("--seeds", type=int, help="number of seeds (0..n-1)")
    p_train.add_argument("--lambda", dest="recon_lambda", type=float,
                         help="reconciliation factor for eps / seps_lin_no_c0")
    p_train.add_argument("--out", help="output run directory")
    p_train.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override any config key (repeatable)")
    p_train.set_defaults(func=cmd_train)

    p_plot = sub.add_parser("plot", help="emit SVG charts from run metrics")
    p_plot.add_argument("run_dirs", nargs="+", help="run directories with metrics.csv")
    p_plot.add_argument("--out", required=True, help="output directory for charts")
    p_plot.add_argument("--undiscounted", action="store_true",
                        help="plot undiscounted episode returns instead")
    p_plot.set_defaults(func=cmd_plot)

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("suite", choices=("dual-sweep", "grad-check", "tabular-oracle"))
    p_verify.add_argument("--out", help="CSV path for the dual-sweep residual report")
    p_verify.set_defaults(func=cmd_verify)

    p_oracle = sub.add_parser("oracle", help="enumerate the constrained optimum "
                                             "of a tabular environment")
    p_oracle.add_argument("--config", help="path to a key=value config file")
    p_oracle.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_oracle.add_argument("--out", help="CSV file to append the result row to")
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
