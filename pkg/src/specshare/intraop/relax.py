"""Continuous relaxation used to bound branch-and-bound nodes.

The node bound comes from a resource-sharing program over ``(c, p, y)``
with ``y_t = log xi_t``:

* ``y <= c * log(1 + h * p / c)``, the perspective of the rate curve,
  exact at ``c in {0, 1}`` and jointly concave;
* ``y <= c * log(1 + p_max * h)``, the chord of the rate curve at full
  power, which implies the affine cap ``xi <= 1 + p_max * c * h``
  everywhere (Bernoulli), keeping returned points inside the
  mixed-integer model's envelope;
* ``sum(p) <= p_max`` counting every tuple's power in full.

Every binary assignment with on-tuple powers is feasible here (park
``p = 0`` on unassigned tuples), so the optimal value upper-bounds every
binary completion of a fixing, which is all branch-and-bound needs.
Fractional points cannot bank power the budget never sees, so the bound
is far tighter than the plain big-M envelope relaxation, and the product
slack ``lam = c * p`` recovered afterwards satisfies the envelope
exactly.

Effective SNRs reach 1e16, so the rate curve is never handed to the
solver raw: with ``S = 1 + p_max * h`` per tuple, the perspective is
expressed through ``(c + h*p) / S``, keeping every cone coefficient near
unity.  Problems are compiled once per instance shape with all data as
parameters, so branch-and-bound nodes re-solve without
re-canonicalizing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import cvxpy as cp
import numpy as np
import scipy.sparse as sp

from .model import ConvexMIModel
from .problem import SolverError
from .waterfill import waterfill_min_power

FREE = -1

# (solver, settings, relative duality-gap cushion claimed at OPTIMAL).
# A tight Clarabel solve comes first: its 1e-10 gap keeps the bound
# cushion far below the branch-and-bound pruning tolerance, so bound ties
# collapse instead of keeping whole frontiers alive.  Factory settings
# and SCS only run after a verification failure.
_ATTEMPTS = (
    ("CLARABEL", {"tol_gap_abs": 1e-10, "tol_gap_rel": 1e-10, "tol_feas": 1e-9,
                  "max_iter": 500}, 1e-10),
    ("CLARABEL", {}, 1e-8),
    ("SCS", {"eps_abs": 1e-9, "eps_rel": 1e-9, "max_iters": 200_000}, 1e-8),
)

# Cushion used when a solver settles for reduced accuracy.
_INACCURATE_GAP_REL = 1e-4

_LN2 = float(np.log(2.0))


@dataclass(frozen=True, eq=False)
class RelaxedSolution:
    """Outcome of one relaxation solve.

    ``bound_bits`` certifies an upper bound (total bits) on every binary
    completion of the fixing; the point itself satisfies the
    mixed-integer model's constraints within the verification tolerance.
    """

    status: str  # "optimal" or "infeasible"
    bound_bits: float
    c: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None
    xi: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None
    iterations: int = 0


class _CompiledRelaxation:
    """One parameterized cone program per (users, subcarriers, structure)."""

    def __init__(self, n_users: int, n_subcarriers: int, n_ndc_users: int,
                 dc_users: tuple[int, ...]):
        T = n_users * n_subcarriers
        self.c = cp.Variable(T)
        self.p = cp.Variable(T, nonneg=True)
        self.y = cp.Variable(T)

        self.log_cap = cp.Parameter(T, nonneg=True)   # log(1 + p_max * h)
        self.inv_s = cp.Parameter(T, nonneg=True)     # 1 / (1 + p_max * h)
        self.h_scaled = cp.Parameter(T, nonneg=True)  # h / (1 + p_max * h)
        self.p_max = cp.Parameter(nonneg=True)
        self.c_lo = cp.Parameter(T)
        self.c_hi = cp.Parameter(T)
        self.dc_rhs = cp.Parameter(len(dc_users)) if dc_users else None
        # Cover cuts: a delay floor needs at least this many whole
        # subcarriers even at full power, so fractional slivers cannot
        # satisfy it for free.  Valid at every binary point.
        self.dc_min_subs = cp.Parameter(len(dc_users)) if dc_users else None
        # Power-cover cuts: owning j subcarriers costs at least the
        # minimum floor-meeting power on the best j channels, so each
        # floor's total power sits above the convex minorant of that
        # count-to-power table.  Unused rows are padded vacuous.
        if dc_users:
            self.pw_slope = cp.Parameter((len(dc_users), n_subcarriers))
            self.pw_icpt = cp.Parameter((len(dc_users), n_subcarriers))
        else:
            self.pw_slope = self.pw_icpt = None

        # One assignment per subcarrier: rows are subcarriers, columns tuples.
        rows = np.tile(np.arange(n_subcarriers), n_users)
        cols = np.arange(T)
        a_c2 = sp.csr_matrix((np.ones(T), (rows, cols)), shape=(n_subcarriers, T))

        # rel_entr(c, (c + h*p)/S) == c*log(c*S/(c + h*p)), so the rate cap
        # y <= c*log(1 + h*p/c) becomes y <= log_cap*c - rel_entr(c, arg).
        arg = cp.multiply(self.inv_s, self.c) + cp.multiply(self.h_scaled, self.p)
        constraints = [
            self.c >= self.c_lo,
            self.c <= self.c_hi,
            a_c2 @ self.c == 1.0,
            cp.sum(self.p) <= self.p_max,
            self.y <= cp.multiply(self.log_cap, self.c) - cp.rel_entr(self.c, arg),
            self.y <= cp.multiply(self.log_cap, self.c),
        ]
        for i, user in enumerate(dc_users):
            idx = np.arange(user * n_subcarriers, (user + 1) * n_subcarriers)
            constraints.append(cp.sum(self.y[idx]) >= self.dc_rhs[i])
            constraints.append(cp.sum(self.c[idx]) >= self.dc_min_subs[i])
            constraints.append(
                cp.multiply(self.pw_slope[i], cp.sum(self.c[idx]))
                + self.pw_icpt[i] <= cp.sum(self.p[idx])
            )

        ndc = np.arange(n_ndc_users * n_subcarriers)
        self.problem = cp.Problem(cp.Maximize(cp.sum(self.y[ndc])), constraints)


_COMPILED_CACHE: dict[tuple, _CompiledRelaxation] = {}


def _compiled_for(model: ConvexMIModel) -> _CompiledRelaxation:
    inst = model.inst
    dc_users = tuple(int(tuples[0] // inst.n_subcarriers) for tuples, _ in model.dc_groups)
    key = (inst.n_users, inst.n_subcarriers, inst.n_ndc_users, dc_users)
    compiled = _COMPILED_CACHE.get(key)
    if compiled is None:
        compiled = _CompiledRelaxation(
            inst.n_users, inst.n_subcarriers, inst.n_ndc_users, dc_users
        )
        _COMPILED_CACHE[key] = compiled
    return compiled


def _lower_hull_lines(xs: np.ndarray, ys: np.ndarray) -> tuple[list[float], list[float]]:
    """Slopes and intercepts of the lower convex hull of ``(xs, ys)``.

    ``xs`` must be strictly increasing.  A single point degenerates to a
    horizontal line through it.
    """
    hull: list[tuple[float, float]] = []
    for x, y in zip(xs, ys):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0.0:
                hull.pop()
            else:
                break
        hull.append((float(x), float(y)))
    if len(hull) == 1:
        return [0.0], [hull[0][1]]
    slopes, icpts = [], []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        a = (y2 - y1) / (x2 - x1)
        slopes.append(a)
        icpts.append(y1 - a * x1)
    return slopes, icpts


def _normalize_fixing(model: ConvexMIModel, fixed) -> np.ndarray:
    T = model.n_tuples
    out = np.full(T, FREE, dtype=int)
    if fixed is None:
        return out
    if isinstance(fixed, dict):
        for t, v in fixed.items():
            out[int(t)] = int(v)
    else:
        arr = np.asarray(fixed, dtype=int)
        if arr.shape != (T,):
            raise ValueError(f"fixed must have one entry per tuple ({T})")
        out = arr.copy()
    if not np.all(np.isin(out, (FREE, 0, 1))):
        raise ValueError("fixings must be -1 (free), 0 or 1")
    return out


def solve_relaxation(model: ConvexMIModel, fixed=None, tol: float = 1e-6) -> RelaxedSolution:
    """Solve the node relaxation under a partial binary fixing of ``c``.

    Parameters
    ----------
    model : ConvexMIModel
    fixed : array_like or dict, optional
        Per-tuple fixing: -1 free, 0 or 1 pinned.  A fixing that leaves a
        subcarrier unassignable (every user pinned to 0, or two users
        pinned to 1) is reported infeasible without a solve.
    tol : float
        Feasibility tolerance the returned point is verified against.

    Returns
    -------
    RelaxedSolution
        ``status == "infeasible"`` signals an empty feasible set (used by
        branch-and-bound to prune); numerical solver breakdowns raise
        :class:`SolverError` instead.
    """
    inst = model.inst
    fixing = _normalize_fixing(model, fixed)

    per_sub = fixing.reshape(inst.n_users, inst.n_subcarriers)
    if np.any((per_sub == 0).all(axis=0)) or np.any((per_sub == 1).sum(axis=0) > 1):
        return RelaxedSolution(status="infeasible", bound_bits=-np.inf)

    compiled = _compiled_for(model)
    scale = 1.0 + inst.p_max * model.h
    compiled.log_cap.value = np.log(scale)
    compiled.inv_s.value = 1.0 / scale
    compiled.h_scaled.value = model.h / scale
    compiled.p_max.value = inst.p_max
    compiled.c_lo.value = np.where(fixing == 1, 1.0, 0.0)
    compiled.c_hi.value = np.where(fixing == 0, 0.0, 1.0)
    if compiled.dc_rhs is not None:
        compiled.dc_rhs.value = np.array([rate * _LN2 for _, rate in model.dc_groups])
        # Cover cut right-hand sides.  A floor of `need` nats is reachable
        # only through subcarriers not already denied to the user, each
        # capped at full-budget rate, so the top-m cumulative cap bounds
        # how few subcarriers can carry it.
        caps = compiled.log_cap.value
        L = inst.n_subcarriers
        min_subs = np.zeros(len(model.dc_groups))
        pw_slope = np.zeros((len(model.dc_groups), L))
        pw_icpt = np.full((len(model.dc_groups), L), -1.0)
        for i, (tuples, rate) in enumerate(model.dc_groups):
            need = rate * _LN2 - 1e-9
            if need <= 0.0:
                continue
            avail = np.sort(np.where(fixing[tuples] == 0, 0.0, caps[tuples]))[::-1]
            reach = np.cumsum(avail)
            if reach[-1] < need:
                return RelaxedSolution(status="infeasible", bound_bits=-np.inf)
            m = int(np.searchsorted(reach, need)) + 1
            min_subs[i] = float(m)
            # Count-to-power table on the best available channels; values
            # beyond twice the budget are equally prohibitive, so clamp
            # them to keep the cone data tame.
            g = np.sort(model.h[tuples][fixing[tuples] != 0])[::-1]
            counts = np.arange(m, len(g) + 1)
            pmin = np.array([
                min(float(waterfill_min_power(g[:j], rate).sum()), 2.0 * inst.p_max + 1.0)
                for j in counts
            ])
            slopes, icpts = _lower_hull_lines(counts.astype(float), pmin)
            pw_slope[i, : len(slopes)] = slopes
            pw_icpt[i, : len(icpts)] = icpts
        compiled.dc_min_subs.value = min_subs
        compiled.pw_slope.value = pw_slope
        compiled.pw_icpt.value = pw_icpt

    failures = []
    for solver, settings, gap_rel in _ATTEMPTS:
        if solver not in cp.installed_solvers():
            continue
        try:
            with warnings.catch_warnings():
                # Inaccurate-solution warnings are redundant here: the point
                # is accepted only after the residual checks below.
                warnings.simplefilter("ignore")
                # warm_start would seed each solve with the previous
                # solution of the shared compiled problem; after a solve of
                # a differently scaled instance that start can drag the
                # solver to a point with large primal residuals while it
                # still reports optimal.  Cold starts keep every solve a
                # pure function of the parameter values.
                compiled.problem.solve(solver=solver, warm_start=False,
                                       **settings)
        except cp.error.SolverError as exc:
            failures.append(f"{solver}: {exc}")
            continue
        status = compiled.problem.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return RelaxedSolution(status="infeasible", bound_bits=-np.inf)
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            failures.append(f"{solver}: status {status}")
            continue
        if status == cp.OPTIMAL_INACCURATE:
            gap_rel = max(gap_rel, _INACCURATE_GAP_REL)

        sol = _extract(model, compiled, tol, gap_rel)
        if sol is not None:
            return sol
        failures.append(f"{solver}: residuals above {tol}")
    raise SolverError("relaxation failed: " + "; ".join(failures))


def _extract(model: ConvexMIModel, compiled: _CompiledRelaxation,
             tol: float, gap_rel: float) -> Optional[RelaxedSolution]:
    """Verify the solver point's residuals and attach a cushioned bound.

    Rate-side residuals are measured in the log domain, where the solver
    actually worked; clipping ``xi`` down to its caps would silently push
    the slop into the delay floors instead.
    """
    inst = model.inst
    c = np.clip(compiled.c.value, compiled.c_lo.value, compiled.c_hi.value)
    p = np.clip(compiled.p.value, 0.0, inst.p_max)
    lam = c * p
    y = compiled.y.value
    xi = np.maximum(np.exp(np.minimum(y, 700.0)), 1e-300)

    if model.assignment_residual(c) > tol:
        return None
    if model.budget_residual(lam) > tol:
        return None
    if np.max(y - compiled.log_cap.value * c) > tol * _LN2:
        return None
    if np.max(y - np.log1p(model.h * p)) > tol * _LN2:
        return None
    if any(s > tol for s in model.dc_rate_shortfalls(xi)):
        return None

    stats = compiled.problem.solver_stats
    iters = int(stats.num_iters) if stats and stats.num_iters is not None else 0
    value_bits = float(compiled.problem.value) / _LN2
    # Cushion for the solver's duality gap so the bound stays a bound.
    bound = value_bits + gap_rel * abs(value_bits) + 1e-9
    return RelaxedSolution(
        status="optimal", bound_bits=bound,
        c=c, p=p, xi=xi, lam=lam, iterations=iters,
    )
