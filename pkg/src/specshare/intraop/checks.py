"""Independent feasibility audit of allocation solutions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import linearize
from .problem import IntraInstance, IntraSolution


@dataclass(frozen=True, eq=False)
class SolutionReport:
    """Constraint residuals of one solution; zero (or below) means satisfied.

    ``binary`` through ``delay_floors`` audit the original constraints:
    binary assignment variables, one user per subcarrier, non-negative
    powers only on assigned tuples, the power budget, and each
    delay-constrained user's rate floor.  ``lam_exactness`` measures
    ``max |lam - c*p|``, ``xi_slack_min`` the most violated rate-proxy cap
    (negative = violation), and ``xi_slack_max`` the loosest one.  The
    tightening probe raises every slack proxy to its cap and confirms the
    objective never decreases and no constraint breaks.
    """

    binary: float
    assignment: float
    power_sign: float
    budget: float
    delay_floors: tuple[float, ...]
    lam_exactness: float
    xi_slack_min: float
    xi_slack_max: float
    xi_slack: np.ndarray
    objective: float
    tightened_objective: float
    tightening_sound: bool

    def max_residual(self) -> float:
        worst = max(self.binary, self.assignment, self.power_sign, self.budget,
                    self.lam_exactness, max(0.0, -self.xi_slack_min))
        if self.delay_floors:
            worst = max(worst, max(self.delay_floors))
        return max(worst, 0.0)

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_residual() <= tol and self.tightening_sound

    def __str__(self) -> str:
        lines = [
            f"binary residual        {self.binary:.3e}",
            f"assignment residual    {self.assignment:.3e}",
            f"power-sign residual    {self.power_sign:.3e}",
            f"budget residual        {self.budget:.3e}",
        ]
        for i, s in enumerate(self.delay_floors):
            lines.append(f"delay floor {i} shortfall {s:.3e}")
        lines += [
            f"lam exactness          {self.lam_exactness:.3e}",
            f"xi slack min/max       {self.xi_slack_min:.3e} / {self.xi_slack_max:.3e}",
            f"objective              {self.objective:.12g}",
            f"tightened objective    {self.tightened_objective:.12g}"
            f" ({'sound' if self.tightening_sound else 'UNSOUND'})",
        ]
        return "\n".join(lines)


def check_solution(sol: IntraSolution, inst: IntraInstance) -> SolutionReport:
    """Audit a solution against its instance.

    All residuals are evaluated from scratch; nothing is trusted from the
    producing solver.
    """
    model = linearize(inst)
    c = sol.c.ravel()
    p = sol.p.ravel()

    binary = model.binary_residual(c)
    assignment = model.assignment_residual(c)
    # Powers must be non-negative, and power on an unassigned tuple is a
    # violation in its own right.
    power_sign = max(0.0, float(-p.min()))
    power_sign = max(power_sign, float(np.abs(p[np.round(c) == 0]).max(initial=0.0)))
    budget = max(0.0, float((c * p).sum() - inst.p_max))

    floors = []
    c_mat = sol.c
    p_mat = sol.p
    for i, target in enumerate(inst.dc_targets):
        if target <= 0.0:
            continue
        user = inst.n_ndc_users + i
        got = float((c_mat[user] * np.log2(1.0 + p_mat[user] * inst.gains[user])).sum())
        floors.append(inst.dc_rate_bits(i) - got)

    lam_exact = model.lam_exactness(c, p, sol.lam)
    slack = model.xi_slack(c, p, sol.xi)

    objective = model.objective_bits(sol.xi)
    xi_tight = model.xi_cap(c, p)
    tightened = model.objective_bits(xi_tight)
    shortfalls_tight = model.dc_rate_shortfalls(xi_tight)
    floors_before = model.dc_rate_shortfalls(sol.xi)
    sound = tightened >= objective - 1e-12 and all(
        after <= max(before, 0.0) + 1e-9
        for before, after in zip(floors_before, shortfalls_tight)
    )

    return SolutionReport(
        binary=binary,
        assignment=assignment,
        power_sign=power_sign,
        budget=budget,
        delay_floors=tuple(floors),
        lam_exactness=lam_exact,
        xi_slack_min=float(slack.min()),
        xi_slack_max=float(slack.max()),
        xi_slack=slack,
        objective=objective,
        tightened_objective=tightened,
        tightening_sound=bool(sound),
    )
