"""Constrained trust-region policy search for safe, user-expected behavior.

A library and CLI implementing policy search that maximizes a surrogate
user-expectation return subject to a task-performance lower bound and safety
cost upper bounds, solved per step with an analytic two-constraint
trust-region dual plus an infeasible recovery step, with desk-scale CMDP
environments, baselines, and verification oracles.
"""

from .dual_solver import (
    CanonicalSubproblem,
    DualSolution,
    canonicalize,
    combine_recovery,
    kkt_check,
    solve_feasible,
    solve_recovery,
)
from .engine import AlgoConfig, EpochReport, train, variant_wiring
from .envs import (
    ButtonNavEnv,
    CmdpSpec,
    HazardNavEnv,
    TabularCmdp,
    Transition,
    exact_policy_returns,
    make_chain,
)
from .errors import (
    ConfigError,
    DegenerateDualError,
    EstimationError,
    NumericalError,
    RecoveryInfeasibleError,
)
from .estimation import TrajectoryBatch, ValueFunctions, collect, discounted_return
from .oracle import OracleResult, enumerate_constrained_optimum
from .policies import GaussianMlpPolicy, SoftmaxTablePolicy
from .trust_region import TrustRegionSubproblem, cg_solve

__version__ = "0.1.0"
