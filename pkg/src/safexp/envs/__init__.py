"""CMDP environments: tabular chain, hazard navigation, button navigation."""

from .base import CmdpSpec, Transition
from .button import ButtonNavEnv, ButtonNavParams
from .hazard import HazardNavEnv, HazardNavParams
from .tabular import (
    TabularCmdp,
    exact_policy_returns,
    make_chain,
    monte_carlo_returns,
    oscillating_policy_table,
    random_tabular,
)

__all__ = [
    "ButtonNavEnv",
    "ButtonNavParams",
    "CmdpSpec",
    "HazardNavEnv",
    "HazardNavParams",
    "TabularCmdp",
    "Transition",
    "exact_policy_returns",
    "make_chain",
    "monte_carlo_returns",
    "oscillating_policy_table",
    "random_tabular",
]
