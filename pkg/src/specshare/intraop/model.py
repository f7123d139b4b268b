"""Convex mixed-integer reformulation of the allocation problem.

The product form ``(1 + p*h)^c`` with binary ``c`` equals ``1 + c*p*h``,
so each tuple's rate factor can be carried by an auxiliary variable
``xi_t`` capped by two affine constraints,

    xi_t <= 1 + p_t * h_t          and          xi_t <= 1 + p_max * c_t * h_t,

while the bilinear product ``c_t * p_t`` is replaced exactly by ``lam_t``
through the four-inequality envelope (with bounds 0 <= p <= p_max):

    lam_t <= p_max * c_t,   lam_t >= 0,   lam_t <= p_t,
    lam_t >= p_t - p_max * (1 - c_t),

which pins ``lam_t = c_t * p_t`` whenever ``c_t`` is binary.  The power
budget is ``sum(lam) <= p_max``, the objective the geometric mean of the
best-effort ``xi`` and each delay-constrained user contributes a
geometric-mean floor.  At binary points the reformulation is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .problem import IntraInstance


@dataclass(frozen=True, eq=False)
class ConvexMIModel:
    """Data of the convex mixed-integer model for one instance.

    ``h`` is the flat tuple gain vector, ``ndc_tuples`` the tuple indices
    entering the objective and ``dc_groups`` one ``(tuples, rate_bits)``
    pair per delay-constrained user with a positive target.  Evaluator
    methods below are the single source of truth for constraint residuals.
    """

    inst: IntraInstance
    h: np.ndarray
    ndc_tuples: np.ndarray
    dc_groups: tuple[tuple[np.ndarray, float], ...]

    @property
    def n_tuples(self) -> int:
        return self.h.size

    @property
    def p_max(self) -> float:
        return self.inst.p_max

    @cached_property
    def log2_xi_cap(self) -> np.ndarray:
        """``log2(1 + p_max * h)`` per tuple: each tuple's rate ceiling."""
        return np.log2(1.0 + self.p_max * self.h)

    # -- constraint evaluators (flat tuple vectors) -------------------------

    def xi_cap(self, c: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Upper envelope ``1 + min(p, p_max * c) * h`` per tuple."""
        return 1.0 + np.minimum(p, self.p_max * c) * self.h

    def assignment_residual(self, c: np.ndarray) -> float:
        """Max deviation of any subcarrier's assignment-count from one."""
        per_sub = c.reshape(self.inst.n_users, self.inst.n_subcarriers).sum(axis=0)
        return float(np.abs(per_sub - 1.0).max())

    def binary_residual(self, c: np.ndarray) -> float:
        return float(np.abs(c - np.round(c)).max())

    def budget_residual(self, lam: np.ndarray) -> float:
        return max(0.0, float(lam.sum() - self.p_max))

    def envelope_residual(self, c: np.ndarray, p: np.ndarray, lam: np.ndarray) -> float:
        """Worst violation of the four lam envelope inequalities."""
        viol = np.maximum(lam - self.p_max * c, 0.0)
        viol = np.maximum(viol, -lam)
        viol = np.maximum(viol, lam - p)
        viol = np.maximum(viol, (p - self.p_max * (1.0 - c)) - lam)
        return float(viol.max())

    def lam_exactness(self, c: np.ndarray, p: np.ndarray, lam: np.ndarray) -> float:
        return float(np.abs(lam - c * p).max())

    def xi_slack(self, c: np.ndarray, p: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Per-tuple slack ``cap - xi``; negative entries are violations."""
        return self.xi_cap(c, p) - xi

    def dc_rate_shortfalls(self, xi: np.ndarray) -> tuple[float, ...]:
        """Per delay-constrained user: required bits minus ``sum(log2 xi)``."""
        out = []
        for tuples, rate_bits in self.dc_groups:
            got = float(np.log2(np.maximum(xi[tuples], 1e-300)).sum())
            out.append(rate_bits - got)
        return tuple(out)

    def objective_geomean(self, xi: np.ndarray) -> float:
        """Geometric mean of the best-effort ``xi`` (the concave objective)."""
        logs = np.log(np.maximum(xi[self.ndc_tuples], 1e-300))
        return float(np.exp(logs.mean()))

    def objective_bits(self, xi: np.ndarray) -> float:
        """Same optimum on the plain scale: ``sum(log2 xi)`` over best-effort tuples."""
        return float(np.log2(np.maximum(xi[self.ndc_tuples], 1e-300)).sum())


def linearize(inst: IntraInstance) -> ConvexMIModel:
    """Build the convex mixed-integer model for an instance.

    Zero-target delay-constrained users impose no floor and appear in no
    ``dc_groups`` entry.
    """
    L = inst.n_subcarriers
    ndc = np.arange(inst.n_ndc_users * L)
    groups = []
    for i, target in enumerate(inst.dc_targets):
        if target <= 0.0:
            continue
        user = inst.n_ndc_users + i
        tuples = np.arange(user * L, (user + 1) * L)
        groups.append((tuples, inst.dc_rate_bits(i)))
    return ConvexMIModel(
        inst=inst, h=inst.gains.ravel().copy(), ndc_tuples=ndc,
        dc_groups=tuple(groups),
    )
