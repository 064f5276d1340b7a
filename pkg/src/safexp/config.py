"""Plain-text experiment configuration.

The format is one ``key = value`` pair per line; ``#`` starts a comment.
Values are typed by the schema below: scalars, comma-separated integer lists,
``(a,b)`` pairs, or comma-separated tuples like ``(x,y,r),(x,y,r)``. Every
key can also be supplied on the command line as ``--set key=value``, which
wins over the file. The fully resolved configuration is copied into the run
directory so a run can be reproduced from its own artifacts.
"""

from __future__ import annotations

from .engine import ALGORITHMS, AlgoConfig
from .envs import ButtonNavEnv, ButtonNavParams, HazardNavEnv, HazardNavParams, make_chain
from .errors import ConfigError

ENV_NAMES = ("hazard-nav", "button-nav", "chain5")

# key -> (type tag, default or None). None defaults mean "resolved later".
SCHEMA: dict[str, tuple[str, object]] = {
    "env": ("str", None),
    "algo": ("str", None),
    "seeds": ("int_list", [0]),
    "out_dir": ("str", None),
    "run_id": ("str", None),
    "workers": ("int", 1),
    "checkpoint_every": ("int", 0),
    # algorithm
    "epochs": ("int", None),
    "steps_per_epoch": ("int", None),
    "delta": ("float", None),
    "d0": ("float", None),
    "d1": ("float", None),
    "recon_lambda": ("float", None),
    "entropy_weight": ("float", 0.01),
    "gae_lambda": ("float", 0.95),
    "damping": ("float", 0.1),
    "cg_iters": ("int", 100),
    "cg_tol": ("float", 1e-8),
    "backtracks": ("int", 10),
    "discounted_constraints": ("bool", True),
    "recovery_mode": ("str", "combined"),
    "value_fit_steps": ("int", 25),
    "value_lr": ("float", 1e-2),
    "value_hidden": ("int_list", [32]),
    "hidden": ("int_list", [32, 32]),
    "init_log_std": ("float", -0.5),
    # environment
    "gamma": ("float", None),
    "horizon": ("int", None),
    "start": ("pair", None),
    "goal": ("pair", None),
    "goal_radius": ("float", None),
    "action_max": ("float", None),
    "arena_half": ("float", None),
    "hazards": ("tuple_list", None),
    "boxes": ("tuple_list", None),
    "buttons": ("tuple_list", None),
    "button_radius": ("float", None),
    "button_bonus": ("float", None),
    "goal_bonus": ("float", None),
    "away_penalty": ("float", None),
    "gremlins": ("tuple_list", None),
    "gremlin_radius": ("float", None),
    "n_states": ("int", 5),
}

# Per-environment defaults for the training-loop keys the schema leaves open.
ENV_TRAINING_DEFAULTS = {
    "hazard-nav": {"epochs": 70, "steps_per_epoch": 2000, "delta": 0.02,
                   "d0": 0.0, "d1": 2.5},
    "button-nav": {"epochs": 60, "steps_per_epoch": 4000, "delta": 0.02,
                   "d0": 0.0, "d1": 2.5, "init_log_std": -1.0},
    "chain5": {"epochs": 500, "steps_per_epoch": 600, "delta": 0.01,
               "d0": 0.0, "d1": 1.5, "value_fit_steps": 15},
}


def _parse_value(key: str, raw: str, where: str):
    kind, _ = SCHEMA[key]
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if kind == "int_list":
            return [int(tok) for tok in raw.split(",") if tok.strip() != ""]
        if kind == "pair":
            toks = raw.strip("() ").split(",")
            if len(toks) != 2:
                raise ValueError("expected a pair (x,y)")
            return (float(toks[0]), float(toks[1]))
        if kind == "tuple_list":
            out = []
            for chunk in raw.replace("),", ")|").split("|"):
                chunk = chunk.strip().strip("()")
                if not chunk:
                    continue
                out.append(tuple(float(tok) for tok in chunk.split(",")))
            return tuple(out)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from exc
    raise ConfigError(f"{where}: unhandled type for key {key!r}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip().replace("-", "_")
        if key == "lambda":
            key = "recon_lambda"
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw, f"{source}:{lineno}")
    return values


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)


def apply_overrides(values: dict, overrides: list[str]) -> dict:
    out = dict(values)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        key = key.strip().replace("-", "_")
        if key == "lambda":
            key = "recon_lambda"
        if key not in SCHEMA:
            raise ConfigError(f"unknown override key {key!r}")
        out[key] = _parse_value(key, raw, "<override>")
    return out


def resolve(values: dict) -> dict:
    """Fill defaults; returns a complete, validated key->value mapping."""
    out = dict(values)
    env_name = out.get("env")
    if env_name is None:
        raise ConfigError("missing required key 'env'")
    env_name = str(env_name).replace("_", "-")
    if env_name not in ENV_NAMES:
        raise ConfigError(f"unknown env {env_name!r}; expected one of {ENV_NAMES}")
    out["env"] = env_name
    algo = out.get("algo")
    if algo is None:
        raise ConfigError("missing required key 'algo'")
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algo {algo!r}; expected one of {ALGORITHMS}")
    for key, default in ENV_TRAINING_DEFAULTS[env_name].items():
        out.setdefault(key, default)
    for key, (_, default) in SCHEMA.items():
        if default is not None:
            out.setdefault(key, default)
    out.setdefault("run_id", f"{env_name}-{algo}")
    out.setdefault("out_dir", f"runs/{env_name}-{algo}")
    return out


def build_env(cfg: dict):
    name = cfg["env"]
    if name == "chain5":
        kwargs = {"n_states": int(cfg.get("n_states", 5))}
        for key in ("gamma", "horizon", "d0", "d1"):
            if cfg.get(key) is not None:
                kwargs[key] = cfg[key]
        return make_chain(**kwargs)
    if name == "hazard-nav":
        params = HazardNavParams()
        fields = ("start", "goal", "goal_radius", "hazards", "boxes", "action_max",
                  "arena_half", "gamma", "horizon", "d0", "d1")
        cls = HazardNavEnv
    else:
        params = ButtonNavParams()
        fields = ("start", "goal", "goal_radius", "buttons", "button_radius",
                  "button_bonus", "goal_bonus", "away_penalty", "gremlins",
                  "gremlin_radius", "action_max", "arena_half", "gamma",
                  "horizon", "d0", "d1")
        cls = ButtonNavEnv
    for key in fields:
        if cfg.get(key) is not None:
            setattr(params, key, cfg[key])
    return cls(params)


def build_algo_config(cfg: dict) -> AlgoConfig:
    return AlgoConfig(
        algorithm=cfg["algo"],
        d0=cfg.get("d0"),
        d1=cfg.get("d1"),
        delta=float(cfg["delta"]),
        recon_lambda=cfg.get("recon_lambda"),
        entropy_weight=float(cfg["entropy_weight"]),
        epochs=int(cfg["epochs"]),
        steps_per_epoch=int(cfg["steps_per_epoch"]),
        gae_lambda=float(cfg["gae_lambda"]),
        damping=float(cfg["damping"]),
        cg_iters=int(cfg["cg_iters"]),
        cg_tol=float(cfg["cg_tol"]),
        backtracks=int(cfg["backtracks"]),
        discounted_constraints=bool(cfg["discounted_constraints"]),
        recovery_mode=str(cfg["recovery_mode"]),
        workers=int(cfg["workers"]),
        value_fit_steps=int(cfg["value_fit_steps"]),
        value_lr=float(cfg["value_lr"]),
        value_hidden=tuple(cfg["value_hidden"]),
    )


def format_resolved(cfg: dict) -> str:
    """Stable text rendering of a resolved configuration."""
    lines = []
    for key in sorted(cfg):
        value = cfg[key]
        if isinstance(value, (list, tuple)) and value and isinstance(value[0], tuple):
            rendered = ",".join("(" + ",".join(repr(float(x)) for x in t) + ")" for t in value)
        elif isinstance(value, tuple):
            rendered = "(" + ",".join(repr(float(x)) for x in value) + ")"
        elif isinstance(value, list):
            rendered = ",".join(str(x) for x in value)
        else:
            rendered = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
