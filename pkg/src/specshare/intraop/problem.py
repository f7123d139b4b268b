"""Problem and solution containers for delay-constrained resource allocation.

One operator owns ``L`` subcarriers and serves ``K`` users: the first
``K1`` are non-delay-constrained (their sum rate is the objective), the
remaining ``K - K1`` are delay-constrained with a minimum spectral
efficiency each.  A solution assigns every subcarrier to exactly one user
(binary ``c``) and splits the power budget (continuous ``p``).

Tuple flattening: user ``k`` (0-based) on subcarrier ``l`` is tuple
``t = k * L + l``; auxiliary per-tuple vectors (rate proxies ``xi``,
power-assignment products ``lam``) use this order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class InfeasibleProblem(Exception):
    """The delay targets cannot be met under the power budget."""


class SolverError(RuntimeError):
    """The numerical solver failed; distinct from problem infeasibility."""


@dataclass(frozen=True, eq=False)
class IntraInstance:
    """One operator's allocation problem.

    ``gains[k, l]`` is user ``k``'s effective SNR per watt on subcarrier
    ``l``.  ``dc_targets[i]`` is the spectral-efficiency floor (bits/s/Hz)
    of delay-constrained user ``n_ndc_users + i``; a zero target leaves
    that user unconstrained.  A target of ``r`` translates to
    ``n_subcarriers * r`` total bits for that user.
    """

    gains: np.ndarray
    n_ndc_users: int
    dc_targets: tuple[float, ...]
    p_max: float

    @property
    def n_users(self) -> int:
        return self.gains.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.gains.shape[1]

    @property
    def n_tuples(self) -> int:
        return self.gains.size

    def tuple_index(self, user: int, subcarrier: int) -> int:
        return user * self.n_subcarriers + subcarrier

    def dc_rate_bits(self, dc_index: int) -> float:
        """Total-bit requirement of the ``dc_index``-th delay-constrained user."""
        return self.dc_targets[dc_index] * self.n_subcarriers


def build_instance(gains, n_ndc_users: int, dc_targets, p_max: float) -> IntraInstance:
    """Validate raw inputs into an :class:`IntraInstance`.

    ``dc_targets`` may list one target per delay-constrained user, or one
    per user (in which case the leading ``n_ndc_users`` entries must be
    zero: delay targets on best-effort users are rejected).
    """
    g = np.asarray(gains, dtype=float)
    if g.ndim != 2 or g.size == 0:
        raise ValueError("gains must be a non-empty 2-D array (users x subcarriers)")
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        raise ValueError("gains must be positive and finite")
    n_users = g.shape[0]
    if not 1 <= n_ndc_users <= n_users:
        raise ValueError("n_ndc_users must be in [1, n_users]")
    if p_max < 0 or not np.isfinite(p_max):
        raise ValueError("p_max must be >= 0 and finite")

    targets = [float(t) for t in np.atleast_1d(np.asarray(dc_targets, dtype=float))]
    n_dc = n_users - n_ndc_users
    if len(targets) == n_users:
        if any(t != 0.0 for t in targets[:n_ndc_users]):
            raise ValueError("delay targets on non-delay-constrained users are rejected")
        targets = targets[n_ndc_users:]
    elif len(targets) != n_dc:
        raise ValueError(
            f"dc_targets must have {n_dc} entries (or {n_users} with leading zeros)"
        )
    if any(t < 0 or not np.isfinite(t) for t in targets):
        raise ValueError("dc_targets must be >= 0 and finite")

    return IntraInstance(
        gains=g, n_ndc_users=int(n_ndc_users), dc_targets=tuple(targets),
        p_max=float(p_max),
    )


@dataclass
class SolverStats:
    nodes: int = 0
    relaxation_iterations: int = 0
    wall_time_s: float = 0.0


@dataclass(frozen=True, eq=False)
class IntraSolution:
    """A feasible assignment with powers and the auxiliary tuple vectors.

    ``c`` and ``p`` are (users x subcarriers); ``xi`` and ``lam`` are flat
    tuple vectors with ``xi_t = 1 + min(p_t, p_max * c_t) * h_t`` tight and
    ``lam_t = c_t * p_t`` exact.  ``objective`` is the total
    non-delay-constrained rate in bits, evaluated directly from ``(c, p)``.
    """

    c: np.ndarray
    p: np.ndarray
    xi: np.ndarray
    lam: np.ndarray
    objective: float
    stats: SolverStats = field(default_factory=SolverStats)


def ndc_sum_rate(inst: IntraInstance, c: np.ndarray, p: np.ndarray) -> float:
    """Objective in plain form: best-effort users' total bits under (c, p)."""
    rates = c * np.log2(1.0 + p * inst.gains)
    return float(rates[: inst.n_ndc_users].sum())


def make_solution(inst: IntraInstance, c: np.ndarray, p: np.ndarray,
                  stats: Optional[SolverStats] = None) -> IntraSolution:
    """Package (c, p) with tight auxiliary vectors and the recomputed objective."""
    c = np.asarray(c, dtype=float)
    p = np.asarray(p, dtype=float)
    h = inst.gains
    xi = 1.0 + np.minimum(p, inst.p_max * c) * h
    lam = c * p
    return IntraSolution(
        c=c, p=p, xi=xi.ravel(), lam=lam.ravel(),
        objective=ndc_sum_rate(inst, c, p),
        stats=stats or SolverStats(),
    )
