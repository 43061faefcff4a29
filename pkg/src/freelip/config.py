"""Centralized numerical tolerances and solver size limits."""
from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """All numeric slack used by validators, solvers and harnesses.

    Every comparison in the package routes through one of these fields so a
    single override changes behaviour consistently.
    """

    # absolute slack allowed when checking (p-)triangle inequalities
    triangle_slack: float = 1e-12
    # molecule coefficients at or below this magnitude are pruned to zero
    coeff_prune: float = 1e-13
    # absolute divergence treated as exactly zero inside flow solvers
    flow_feasibility: float = 1e-9
    # relative tolerance for comparing norm values and certificate costs
    cost_rel: float = 1e-9
    # |primal - dual| allowance for the transportation norm
    duality_gap: float = 1e-7
    # dual witness Lipschitz constant may exceed 1 by this much
    lipschitz_slack: float = 1e-9
    # envelope norm may exceed the p-norm by at most this
    contraction_slack: float = 1e-9
    # subspace/ambient norm ratio may fall below 1 by at most this
    ratio_lower_slack: float = 1e-9
    # operator-norm harness: sampled ratio may exceed Lip(h) by at most this
    operator_slack: float = 1e-7

    def with_overrides(self, **kwargs: float) -> "Tolerances":
        """Return a copy with the given fields replaced.

        Unknown field names raise ``ValueError`` (not ``TypeError``) so the
        CLI can map them to a usage error.
        """
        bad = set(kwargs) - set(self.__dataclass_fields__)
        if bad:
            raise ValueError(f"unknown tolerance field(s): {sorted(bad)}")
        return replace(self, **kwargs)


DEFAULT_TOLERANCES = Tolerances()

# `auto` norm computation uses the exact solver up to this many points
EXACTNESS_THRESHOLD = 9
# the exact solver refuses outright above this many points
HARD_CAP = 12
