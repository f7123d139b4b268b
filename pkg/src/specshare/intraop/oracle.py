"""Exhaustive ground truth for small allocation instances.

For a fixed binary assignment the power split decomposes: each
delay-constrained user takes the minimum power meeting its floor on its
own subcarriers, and whatever budget remains is water-filled jointly over
the best-effort subcarriers.  Enumerating every assignment and taking the
best value is therefore exact, and deliberately shares no machinery with
the relaxation-based solver it cross-checks.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from math import log2
from typing import Optional

import numpy as np

from .problem import (InfeasibleProblem, IntraInstance, IntraSolution, SolverStats,
                      make_solution)
from .waterfill import waterfill_max_rate, waterfill_min_power

MAX_ASSIGNMENTS = 1_000_000


@dataclass(frozen=True, eq=False)
class AssignmentSplit:
    """Optimal powers for one fixed assignment, or its infeasibility."""

    feasible: bool
    powers: Optional[np.ndarray] = None  # users x subcarriers
    ndc_rate_bits: float = -np.inf
    reason: str = ""


def oracle_power_split(c, inst: IntraInstance) -> AssignmentSplit:
    """Optimal power split for a fixed binary assignment.

    Delay-constrained users get minimum-power water-filling to their
    floors; the leftover budget is water-filled jointly over all
    best-effort subcarriers.  Returns an infeasible split when a positive
    floor has no subcarrier or the floors alone exceed the budget.
    """
    c = np.asarray(c)
    if c.shape != inst.gains.shape:
        raise ValueError("assignment shape must match gains")
    col_sums = np.asarray(c, dtype=float).sum(axis=0)
    if np.any(np.abs(col_sums - 1.0) > 1e-9) or np.any((c != 0) & (c != 1)):
        raise ValueError("assignment must give every subcarrier exactly one user")

    powers = np.zeros_like(inst.gains)
    spent = 0.0
    for i, target in enumerate(inst.dc_targets):
        user = inst.n_ndc_users + i
        subs = np.nonzero(c[user])[0]
        rate_bits = inst.dc_rate_bits(i)
        if rate_bits <= 0.0:
            continue
        if len(subs) == 0:
            return AssignmentSplit(False, reason=f"user {user} has a floor but no subcarrier")
        p_user = waterfill_min_power(inst.gains[user, subs], rate_bits)
        powers[user, subs] = p_user
        spent += float(p_user.sum())
    if spent > inst.p_max:
        return AssignmentSplit(False, reason="delay floors exceed the power budget")

    ndc_users, ndc_subs = np.nonzero(c[: inst.n_ndc_users])
    rate = 0.0
    remaining = inst.p_max - spent
    if len(ndc_subs) > 0 and remaining > 0:
        g = inst.gains[ndc_users, ndc_subs]
        p_ndc = waterfill_max_rate(g, remaining)
        powers[ndc_users, ndc_subs] = p_ndc
        rate = float(np.log2(1.0 + p_ndc * g).sum())
    return AssignmentSplit(True, powers=powers, ndc_rate_bits=rate)


def _min_power_tables(inst: IntraInstance) -> list[Optional[np.ndarray]]:
    """Per delay-constrained user: minimum power for every subcarrier subset.

    Entry ``table[mask]`` is the minimum power for the subset encoded by
    bitmask ``mask`` (bit ``l`` set when subcarrier ``l`` belongs to the
    user); infeasible subsets (empty, under a positive floor) carry +inf.
    Users with a zero floor get ``None`` (no power ever needed).
    """
    L = inst.n_subcarriers
    tables: list[Optional[np.ndarray]] = []
    for i, target in enumerate(inst.dc_targets):
        if target <= 0.0:
            tables.append(None)
            continue
        user = inst.n_ndc_users + i
        rate_bits = inst.dc_rate_bits(i)
        table = np.full(1 << L, np.inf)
        all_subs = np.arange(L)
        for mask in range(1, 1 << L):
            subs = all_subs[[(mask >> l) & 1 == 1 for l in range(L)]]
            table[mask] = waterfill_min_power(inst.gains[user, subs], rate_bits).sum()
        tables.append(table)
    return tables


def _fast_max_rate(inv_gains: list[float], budget: float) -> float:
    """Sum rate of water-filling ``budget`` over channels given as 1/h."""
    inv = sorted(inv_gains)
    total_inv = 0.0
    mu = 0.0
    k_active = 0
    for k, v in enumerate(inv, start=1):
        cand = (budget + total_inv + v) / k
        if cand > v:
            total_inv += v
            mu = cand
            k_active = k
        else:
            break
    rate = 0.0
    for i in range(k_active):
        rate += log2(mu / inv[i])
    return rate


def oracle_exhaustive(inst: IntraInstance) -> IntraSolution:
    """Enumerate every assignment and apply the per-assignment power split.

    Refuses instances with more than one million assignments.  Ties
    resolve to the lowest assignment index (lexicographic order of the
    per-subcarrier user choices, subcarrier 0 most significant).

    Raises
    ------
    InfeasibleProblem
        When no assignment meets the delay floors under the budget.
    """
    K, L = inst.n_users, inst.n_subcarriers
    n_assignments = K ** L
    if n_assignments > MAX_ASSIGNMENTS:
        raise ValueError(
            f"{K}^{L} = {n_assignments} assignments exceed the "
            f"{MAX_ASSIGNMENTS} enumeration cap"
        )

    t_start = time.perf_counter()
    tables = _min_power_tables(inst)
    dc_list = [(inst.n_ndc_users + i, tables[i]) for i in range(len(inst.dc_targets))]
    inv_gains = 1.0 / inst.gains
    p_max = inst.p_max
    n_ndc = inst.n_ndc_users

    best_rate = -np.inf
    best_assign: Optional[tuple[int, ...]] = None
    for assign in itertools.product(range(K), repeat=L):
        spent = 0.0
        feasible = True
        for user, table in dc_list:
            if table is None:
                continue
            mask = 0
            for l in range(L):
                if assign[l] == user:
                    mask |= 1 << l
            need = table[mask]
            if need == np.inf:
                feasible = False
                break
            spent += need
        if not feasible or spent > p_max:
            continue
        ndc_inv = [inv_gains[u, l] for l, u in enumerate(assign) if u < n_ndc]
        rate = _fast_max_rate(ndc_inv, p_max - spent) if ndc_inv else 0.0
        if rate > best_rate:
            best_rate = rate
            best_assign = assign

    if best_assign is None:
        raise InfeasibleProblem(
            "no assignment meets the delay floors under the power budget"
        )

    c = np.zeros((K, L))
    c[np.asarray(best_assign), np.arange(L)] = 1.0
    split = oracle_power_split(c, inst)
    stats = SolverStats(nodes=n_assignments, relaxation_iterations=0,
                        wall_time_s=time.perf_counter() - t_start)
    return make_solution(inst, c, split.powers, stats=stats)
