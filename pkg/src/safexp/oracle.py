"""Brute-force ground truth: enumerate deterministic policies on a tabular CMDP.

Every deterministic policy is exactly evaluated through the linear Bellman
solver; the feasible one (task return >= d0, cost return <= d1, exact, no
slack) with the highest user-expectation return wins. Ties break toward the
higher task return and then the lexicographically smallest action table, so
oracle outputs are reproducible. Desk-scale only: the enumeration is guarded
at 10^7 policies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .envs.tabular import TabularCmdp, exact_policy_returns

ENUMERATION_GUARD = 10_000_000
TIE_EPS = 1e-12


@dataclass
class OracleResult:
    feasible_found: bool
    best_policy: np.ndarray | None
    j_u: float | None
    j_r: float | None
    j_c1: float | None
    satisfies_d0: bool
    satisfies_d1: bool
    policies_enumerated: int

    def summary(self) -> str:
        if not self.feasible_found:
            return (f"no feasible deterministic policy among "
                    f"{self.policies_enumerated} enumerated")
        actions = np.argmax(self.best_policy, axis=1)
        return (f"best feasible policy actions={actions.tolist()} "
                f"J_u={self.j_u:.6f} J_R={self.j_r:.6f} J_C1={self.j_c1:.6f} "
                f"({self.policies_enumerated} policies enumerated)")


def enumerate_constrained_optimum(tabular: TabularCmdp, d0: float, d1: float) -> OracleResult:
    s_n, a_n = tabular.n_states, tabular.n_actions
    total = a_n ** s_n
    if total > ENUMERATION_GUARD:
        raise ValueError(
            f"{a_n}^{s_n} = {total} deterministic policies exceeds the "
            f"enumeration guard of {ENUMERATION_GUARD}"
        )
    best = None  # (j_u, j_r, j_c1, table)
    for assignment in itertools.product(range(a_n), repeat=s_n):
        table = np.zeros((s_n, a_n))
        table[np.arange(s_n), assignment] = 1.0
        j_r, j_c1, j_u = exact_policy_returns(tabular, table)
        if j_r < d0 or j_c1 > d1:
            continue
        if best is None:
            best = (j_u, j_r, j_c1, table)
            continue
        # Lexicographic iteration order means earlier tables win exact ties.
        if j_u > best[0] + TIE_EPS or (
            abs(j_u - best[0]) <= TIE_EPS and j_r > best[1] + TIE_EPS
        ):
            best = (j_u, j_r, j_c1, table)
    if best is None:
        return OracleResult(
            feasible_found=False, best_policy=None, j_u=None, j_r=None,
            j_c1=None, satisfies_d0=False, satisfies_d1=False,
            policies_enumerated=total,
        )
    j_u, j_r, j_c1, table = best
    return OracleResult(
        feasible_found=True, best_policy=table, j_u=j_u, j_r=j_r, j_c1=j_c1,
        satisfies_d0=j_r >= d0, satisfies_d1=j_c1 <= d1,
        policies_enumerated=total,
    )
