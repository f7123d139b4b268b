"""Best-first branch-and-bound over the convex relaxation.

Nodes carry a partial binary fixing of the assignment variables.  Each
node is bounded by :func:`solve_relaxation`; branching splits the most
fractional assignment variable (ties to the lowest tuple index).  The
incumbent objective is always re-evaluated on the plain rate scale from
the recovered powers, never read off the relaxation, so the returned
value is achievable by construction.
"""

from __future__ import annotations

import heapq
import itertools
import time
from typing import Callable, Optional

import numpy as np

from .model import ConvexMIModel
from .problem import (InfeasibleProblem, IntraSolution, SolverError, SolverStats,
                      make_solution, ndc_sum_rate)
from .relax import FREE, RelaxedSolution, solve_relaxation
from .waterfill import waterfill_max_rate, waterfill_min_power

TraceFn = Callable[[int, float, Optional[float]], None]

_INT_TOL = 1e-6
_PRUNE_TOL = 1e-6


def branch_and_bound(model: ConvexMIModel, tol: float = 1e-6,
                     trace: Optional[TraceFn] = None,
                     node_limit: int = 1_000_000) -> IntraSolution:
    """Solve the convex mixed-integer model to binary optimality.

    Parameters
    ----------
    model : ConvexMIModel
    tol : float
        Feasibility tolerance passed to the relaxation solves.
    trace : callable, optional
        Called as ``trace(node_id, bound_bits, incumbent_bits_or_None)``
        for every solved node, in solve order.
    node_limit : int
        Safety cap on relaxation solves; exceeding it raises
        :class:`SolverError`.

    Returns
    -------
    IntraSolution
        Binary assignment with powers refit exactly for it: delay floors
        at minimum power, leftover budget water-filled over best-effort
        tuples.

    Raises
    ------
    InfeasibleProblem
        If no binary assignment can meet the delay floors under the
        power budget.
    """
    inst = model.inst
    t_start = time.perf_counter()
    stats = SolverStats()

    # Even with every subcarrier and the full budget, each delay floor needs
    # at least its all-subcarrier minimum power; their sum certifies
    # infeasibility before any search.
    greedy_power = 0.0
    for tuples, rate_bits in model.dc_groups:
        user = int(tuples[0] // inst.n_subcarriers)
        greedy_power += float(waterfill_min_power(inst.gains[user], rate_bits).sum())
    if greedy_power > inst.p_max * (1.0 + 1e-12) + 1e-15:
        raise InfeasibleProblem(
            f"delay floors need at least {greedy_power:.6g} W with every subcarrier; "
            f"budget is {inst.p_max:.6g} W"
        )

    node_ids = itertools.count()
    incumbent: Optional[tuple[float, np.ndarray, np.ndarray]] = None  # (bits, c, p)

    def solve_node(fixing) -> Optional[RelaxedSolution]:
        """Bound one node; ``None`` flags a solver breakdown at that node."""
        stats.nodes += 1
        if stats.nodes > node_limit:
            raise SolverError(f"node limit {node_limit} exceeded")
        try:
            sol = solve_relaxation(model, fixing, tol=tol)
        except SolverError:
            return None
        stats.relaxation_iterations += sol.iterations
        return sol

    def emit(node_id: int, bound: float) -> None:
        if trace is not None:
            trace(node_id, bound, incumbent[0] if incumbent else None)

    def try_incumbent(c_bin: np.ndarray) -> None:
        """Refit powers for a binary assignment and keep it if it wins.

        For a fixed assignment the power split is exact: each delay floor
        takes its minimum-power water-filling on the owned subcarriers and
        the leftover budget is water-filled jointly over the best-effort
        tuples, so no relaxation re-solve is needed.
        """
        nonlocal incumbent
        c_bin = np.asarray(c_bin, dtype=float)
        if np.abs(c_bin.sum(axis=0) - 1.0).max() > 0:
            return
        powers = np.zeros_like(inst.gains)
        spent = 0.0
        for tuples, rate_bits in model.dc_groups:
            user = int(tuples[0] // inst.n_subcarriers)
            subs = np.nonzero(c_bin[user])[0]
            if len(subs) == 0:
                return
            p_user = waterfill_min_power(inst.gains[user, subs], rate_bits)
            powers[user, subs] = p_user
            spent += float(p_user.sum())
        if spent > inst.p_max:
            return
        ndc_users, ndc_subs = np.nonzero(c_bin[: inst.n_ndc_users])
        remaining = inst.p_max - spent
        if len(ndc_subs) > 0 and remaining > 0:
            g = inst.gains[ndc_users, ndc_subs]
            powers[ndc_users, ndc_subs] = waterfill_max_rate(g, remaining)
        value = ndc_sum_rate(inst, c_bin, powers)
        if incumbent is None or value > incumbent[0]:
            incumbent = (value, c_bin, powers)

    root_fixing = np.full(model.n_tuples, FREE, dtype=int)
    root = solve_node(root_fixing)
    if root is None:
        raise SolverError("relaxation failed at the root node")
    if root.status != "optimal":
        raise InfeasibleProblem("delay floors are unattainable: the relaxation is empty")
    root_id = next(node_ids)
    emit(root_id, root.bound_bits)

    # Warm start: pin each subcarrier to its largest relaxed share.  A good
    # early incumbent keeps the best-first frontier small.
    shares = root.c.reshape(inst.n_users, inst.n_subcarriers)
    rounded = np.zeros_like(shares, dtype=int)
    rounded[np.argmax(shares, axis=0), np.arange(inst.n_subcarriers)] = 1
    try_incumbent(rounded)

    # Max-heap on the bound; ties pop the deepest node first (more fixings
    # mean an exacter relaxation), then the node id for determinism.
    frontier: list[tuple[float, int, int, np.ndarray, RelaxedSolution]] = []
    heapq.heappush(frontier, (-root.bound_bits, 0, root_id, root_fixing, root))

    while frontier:
        neg_bound, _, node_id, fixing, relaxed = heapq.heappop(frontier)
        bound = -neg_bound
        if incumbent is not None and bound <= incumbent[0] + _PRUNE_TOL:
            break  # best-first: every remaining node is bounded by this one

        frac = np.abs(relaxed.c - np.round(relaxed.c))
        if frac.max() <= _INT_TOL:
            try_incumbent(np.round(relaxed.c).reshape(inst.n_users, inst.n_subcarriers))
            continue

        free_mask = fixing == FREE
        # Most fractional free variable; argmax takes the lowest index on ties.
        score = np.where(free_mask, 0.5 - np.abs(relaxed.c - 0.5), -np.inf)
        t_branch = int(np.argmax(score))
        user, sub = divmod(t_branch, inst.n_subcarriers)

        for value in (1, 0):
            child = fixing.copy()
            child[t_branch] = value
            if value == 1:
                # One user per subcarrier: pinning this tuple clears the rest.
                for other in range(inst.n_users):
                    t_other = other * inst.n_subcarriers + sub
                    if t_other != t_branch and child[t_other] == FREE:
                        child[t_other] = 0
            if not np.any(child == FREE):
                # Fully fixed: the analytic refit is this node's exact
                # optimum, no relaxation needed.
                try_incumbent(child.reshape(inst.n_users, inst.n_subcarriers))
                continue
            child_sol = solve_node(child)
            child_id = next(node_ids)
            if child_sol is None:
                # Solver breakdown: fall back to the parent's bound (always
                # valid for a subset) and branch the child blind.
                child_sol = RelaxedSolution(
                    status="optimal", bound_bits=bound,
                    c=relaxed.c, p=relaxed.p, xi=relaxed.xi, lam=relaxed.lam,
                    iterations=0,
                )
            if child_sol.status != "optimal":
                continue
            emit(child_id, child_sol.bound_bits)
            if incumbent is None or child_sol.bound_bits > incumbent[0] + _PRUNE_TOL:
                depth = int(np.sum(child != FREE))
                heapq.heappush(
                    frontier,
                    (-child_sol.bound_bits, -depth, child_id, child, child_sol),
                )

    stats.wall_time_s = time.perf_counter() - t_start
    if incumbent is None:
        raise InfeasibleProblem(
            "no assignment meets the delay floors under the power budget"
        )
    value, c_bin, p_rec = incumbent
    return make_solution(inst, c_bin.astype(float), p_rec, stats=stats)
