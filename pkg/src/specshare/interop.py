"""Inter-operator spectrum sharing between co-primary operators.

Implements the two coordination schemes compared in the experiments:

* subcarrier-gain sharing: demand-aware priorities turn into per-operator
  subcarrier quotas, then an iterative allocator hands individual
  subcarriers to operators (and their users) by channel gain; and
* fragmentation sharing: each operator receives contiguous spectrum runs
  sized by the same quotas, placed by end preference with randomized
  contention resolution.

Throughput evaluation treats both allocation forms identically so scheme
comparisons are unbiased.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization, GridSpec
from .intraop.waterfill import waterfill_max_rate

_SUM_TOL = 1e-12


class FragmentationError(ValueError):
    """A quota cannot accommodate the minimum viable fragment size."""


@dataclass(frozen=True, eq=False)
class SharingPolicy:
    """Static sharing agreement between operators.

    ``rho`` holds the agreed spectrum weights (positive, summing to one).
    ``alpha_pref`` optionally gives each operator a fragment-end preference
    code: 0 requests the low-frequency end, 1 the high end, ``None`` no
    preference.  ``min_fragment_subcarriers`` is the smallest viable
    fragment per operator, derived from guardband overhead.
    """

    rho: tuple[float, ...]
    alpha_pref: Optional[tuple[Optional[int], ...]] = None
    min_fragment_subcarriers: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not self.rho:
            raise ValueError("rho must be non-empty")
        if any(r <= 0 for r in self.rho):
            raise ValueError("all agreement weights must be positive")
        if abs(sum(self.rho) - 1.0) > _SUM_TOL:
            raise ValueError("agreement weights must sum to 1")
        n = len(self.rho)
        if self.alpha_pref is not None:
            if len(self.alpha_pref) != n:
                raise ValueError("alpha_pref length must match rho")
            if any(a not in (None, 0, 1) for a in self.alpha_pref):
                raise ValueError("alpha_pref codes must be 0 (low end), 1 (high end) or None")
        if not self.min_fragment_subcarriers:
            object.__setattr__(self, "min_fragment_subcarriers", (1,) * n)
        elif len(self.min_fragment_subcarriers) != n:
            raise ValueError("min_fragment_subcarriers length must match rho")
        if any(m < 1 for m in self.min_fragment_subcarriers):
            raise ValueError("min_fragment_subcarriers must be >= 1")

    @property
    def n_operators(self) -> int:
        return len(self.rho)


def min_fragment_from_guardband(guard_bandwidth_hz: float, fragment_bandwidth_hz: float,
                                subcarrier_spacing_hz: float) -> int:
    """Smallest fragment (in subcarriers) keeping guardband overhead below one.

    A fragment of bandwidth B_frag pays a fixed guardband B_guard; the
    fragment is viable once it is at least as wide as its guard overhead.
    """
    if guard_bandwidth_hz < 0 or fragment_bandwidth_hz <= 0:
        raise ValueError("bandwidths must be positive (guard may be zero)")
    ratio = guard_bandwidth_hz / fragment_bandwidth_hz
    return max(1, int(np.ceil(ratio * fragment_bandwidth_hz / subcarrier_spacing_hz)))


@dataclass(frozen=True, eq=False)
class DemandReport:
    """Per-operator demand snapshot handed to the coordination step.

    ``delta`` is the requested subcarrier count per operator; ``avg_snr``
    and ``p_max`` record the mean effective SNR per watt and the power
    budget the estimates were based on.
    """

    delta: tuple[int, ...]
    avg_snr: tuple[float, ...]
    p_max: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.delta:
            raise ValueError("delta must be non-empty")
        if any(d < 0 for d in self.delta):
            raise ValueError("demands must be >= 0")
        if len(self.avg_snr) != len(self.delta) or len(self.p_max) != len(self.delta):
            raise ValueError("avg_snr and p_max must match delta length")
        if any(s <= 0 for s in self.avg_snr):
            raise ValueError("avg_snr must be positive")
        if any(p <= 0 for p in self.p_max):
            raise ValueError("p_max must be positive")


@dataclass(frozen=True, eq=False)
class ActivePriorities:
    """Demand-adjusted priorities and the integer quotas they round to."""

    rho_act: tuple[float, ...]
    quota: tuple[int, ...]
    n_subcarriers: int

    def __post_init__(self) -> None:
        if abs(sum(self.rho_act) - 1.0) > 1e-9:
            raise ValueError("active priorities must sum to 1")
        if sum(self.quota) != self.n_subcarriers:
            raise ValueError("quotas must sum to the subcarrier count")
        for r, q in zip(self.rho_act, self.quota):
            if abs(q - r * self.n_subcarriers) > 1.0 + 1e-9:
                raise ValueError("quota may deviate from its exact share by at most 1")


@dataclass(frozen=True, eq=False)
class Allocation:
    """A partition of the subcarrier grid among operators.

    ``sets[n]`` holds operator ``n``'s subcarrier indices (sorted).  For
    fragmented allocations, ``fragments[n]`` lists contiguous
    ``(start, length)`` runs, none straddling a segment boundary.
    """

    sets: tuple[np.ndarray, ...]
    form: str  # "scattered" or "fragmented"
    n_subcarriers: int
    fragments: Optional[tuple[tuple[tuple[int, int], ...], ...]] = None

    def __post_init__(self) -> None:
        if self.form not in ("scattered", "fragmented"):
            raise ValueError("form must be 'scattered' or 'fragmented'")
        union = np.concatenate([s for s in self.sets]) if self.sets else np.array([], int)
        if len(union) != self.n_subcarriers or not np.array_equal(
            np.sort(union), np.arange(self.n_subcarriers)
        ):
            raise ValueError("operator sets must partition the subcarrier grid exactly")
        if self.form == "fragmented" and self.fragments is None:
            raise ValueError("fragmented allocations must carry their fragment runs")

    @property
    def n_operators(self) -> int:
        return len(self.sets)

    def counts(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.sets)


# ---------------------------------------------------------------------------
# Demand estimation
# ---------------------------------------------------------------------------

def compute_demand(total_rate_target: float, p_max: float, avg_snr: float,
                   n_sub_max: int) -> int:
    """Smallest subcarrier count whose flat-split capacity meets the target.

    Evaluates ``L * log2(1 + (p_max / L) * avg_snr)`` (power split evenly
    over ``L`` subcarriers at the mean gain) and returns the smallest
    ``L in [1, n_sub_max]`` reaching ``total_rate_target``, or ``n_sub_max``
    when even the full grid falls short.
    """
    if total_rate_target < 0:
        raise ValueError("total_rate_target must be >= 0")
    if p_max <= 0 or avg_snr <= 0:
        raise ValueError("p_max and avg_snr must be positive")
    if n_sub_max < 1:
        raise ValueError("n_sub_max must be >= 1")

    def capacity(n_sub: int) -> float:
        return n_sub * np.log2(1.0 + (p_max / n_sub) * avg_snr)

    if capacity(n_sub_max) < total_rate_target:
        return n_sub_max
    lo, hi = 1, n_sub_max  # capacity is nondecreasing in the subcarrier count
    while lo < hi:
        mid = (lo + hi) // 2
        if capacity(mid) >= total_rate_target:
            hi = mid
        else:
            lo = mid + 1
    return lo


# ---------------------------------------------------------------------------
# Phase 1: demand-adjusted priorities and quotas
# ---------------------------------------------------------------------------

def _largest_remainder(shares: np.ndarray, n_subcarriers: int) -> np.ndarray:
    exact = shares * n_subcarriers
    floors = np.floor(exact).astype(int)
    remaining = n_subcarriers - int(floors.sum())
    if remaining > 0:
        # Hand leftover seats to the largest fractional remainders,
        # lowest operator index first on ties.
        remainders = exact - floors
        order = np.lexsort((np.arange(len(shares)), -remainders))
        floors[order[:remaining]] += 1
    return floors


def active_priorities(policy: SharingPolicy, demand: DemandReport,
                      n_subcarriers: int) -> ActivePriorities:
    """Turn agreed weights plus current demands into active priorities.

    With ``eta_n = rho_n * n_subcarriers`` as each operator's nominal share:

    * if every demand is on the same side of its nominal share (all
      ``delta >= eta`` or all ``delta <= eta``), the agreement stands:
      ``rho_act = rho``;
    * in a mixed situation with no aggregate excess
      (``sum(delta - eta) <= 0``), priorities follow demand directly:
      ``rho_act = delta / sum(delta)``;
    * otherwise under-demanders are pinned to ``delta_n / n_subcarriers``
      and the spectrum they release is split among over-demanders
      proportionally to their excess ``delta_n - eta_n``.

    Quotas are the active priorities scaled to the grid and rounded by
    largest remainder, so they always sum to ``n_subcarriers``.
    """
    if len(demand.delta) != policy.n_operators:
        raise ValueError("demand and policy cover different operator counts")
    rho = np.asarray(policy.rho, dtype=float)
    delta = np.asarray(demand.delta, dtype=float)
    eta = rho * n_subcarriers

    if np.all(delta >= eta) or np.all(delta <= eta):
        rho_act = rho.copy()
    elif float(np.sum(delta - eta)) <= 0.0:
        rho_act = delta / delta.sum()
    else:
        under = delta < eta
        over = delta > eta
        released = float(np.sum(eta[under] - delta[under]))
        excess = delta[over] - eta[over]
        shares = eta.copy()
        shares[under] = delta[under]
        shares[over] += released * excess / excess.sum()
        rho_act = shares / shares.sum()

    quota = _largest_remainder(rho_act, n_subcarriers)
    return ActivePriorities(
        rho_act=tuple(rho_act), quota=tuple(int(q) for q in quota),
        n_subcarriers=int(n_subcarriers),
    )


# ---------------------------------------------------------------------------
# Phase 2: subcarrier-gain allocation
# ---------------------------------------------------------------------------

def allocate_subcarrier_gain(ch: ChannelRealization, act: ActivePriorities,
                             collect_trace: bool = False):
    """Hand out subcarriers one at a time by operator fill ratio and user gain.

    Each round the operator with remaining quota whose fill ratio
    ``(|S_n| / N) / rho_act_n`` is smallest (ties to the lowest operator
    index) takes one subcarrier: its next user in round-robin order picks
    that user's highest-gain unassigned subcarrier (gain ties to the lowest
    subcarrier index).  Rounds repeat until every quota is exhausted, which
    partitions the grid exactly.

    Returns the scattered :class:`Allocation`; with ``collect_trace=True``
    returns ``(allocation, trace)`` where each trace entry records
    ``(operator, user, subcarrier, fill_ratios)`` per round.
    """
    n_ops = ch.n_operators
    if len(act.quota) != n_ops:
        raise ValueError("priorities and channel cover different operator counts")
    n_sub = ch.grid.n_subcarriers
    if act.n_subcarriers != n_sub:
        raise ValueError("priorities were computed for a different grid size")

    # Per-user descending-gain subcarrier order; stable sort keeps ties at
    # the lowest subcarrier index.
    pref_order = [np.argsort(-ch.gains[n], axis=1, kind="stable") for n in range(n_ops)]
    cursors = [np.zeros(ch.users_per_operator[n], dtype=int) for n in range(n_ops)]
    next_user = [0] * n_ops
    assigned = np.zeros(n_sub, dtype=bool)
    sets: list[list[int]] = [[] for _ in range(n_ops)]
    remaining = list(act.quota)
    rho_act = np.asarray(act.rho_act, dtype=float)
    trace = [] if collect_trace else None

    for _ in range(n_sub):
        ratios = np.array([len(s) / n_sub for s in sets]) / rho_act
        best_op = -1
        for n in range(n_ops):
            if remaining[n] <= 0:
                continue
            if best_op < 0 or ratios[n] < ratios[best_op]:
                best_op = n
        if best_op < 0:
            raise RuntimeError("quotas exhausted before the grid was covered")

        user = next_user[best_op]
        order = pref_order[best_op][user]
        cur = cursors[best_op][user]
        while assigned[order[cur]]:
            cur += 1
        cursors[best_op][user] = cur + 1
        sc = int(order[cur])

        assigned[sc] = True
        sets[best_op].append(sc)
        remaining[best_op] -= 1
        next_user[best_op] = (user + 1) % ch.users_per_operator[best_op]
        if collect_trace:
            trace.append((best_op, user, sc, ratios.copy()))

    alloc = Allocation(
        sets=tuple(np.sort(np.asarray(s, dtype=int)) for s in sets),
        form="scattered", n_subcarriers=n_sub,
    )
    if alloc.counts() != act.quota:
        raise RuntimeError("allocation sizes drifted from their quotas")
    return (alloc, trace) if collect_trace else alloc


# ---------------------------------------------------------------------------
# Fragmentation sharing
# ---------------------------------------------------------------------------

def allocate_fragments(act: ActivePriorities, policy: SharingPolicy, grid: GridSpec,
                       rng_seed: int,
                       contention_memory: Optional[dict] = None) -> Allocation:
    """Assign quota-sized contiguous runs honoring end preferences.

    Operators preferring the low end (code 0) are placed from the lowest
    frequencies, high-end operators (code 1) from the highest; everyone
    else fills the middle in operator-index order.  When several operators
    request the same end, the winner is drawn uniformly at random under
    ``rng_seed``, excluding the previous winner recorded in
    ``contention_memory`` (a dict keyed by end, updated in place); losers
    join the middle fill.  Runs are split at segment boundaries so no
    fragment straddles a segment edge.

    Raises
    ------
    FragmentationError
        If any operator's quota is below its minimum viable fragment size.
    """
    n_ops = policy.n_operators
    if len(act.quota) != n_ops:
        raise ValueError("priorities and policy cover different operator counts")
    if act.n_subcarriers != grid.n_subcarriers:
        raise ValueError("priorities were computed for a different grid size")
    for n, (q, m) in enumerate(zip(act.quota, policy.min_fragment_subcarriers)):
        if q < m:
            raise FragmentationError(
                f"operator {n}: quota {q} is below the minimum fragment size {m}"
            )

    rng = np.random.default_rng(rng_seed)
    prefs = policy.alpha_pref or (None,) * n_ops
    low = [n for n in range(n_ops) if prefs[n] == 0]
    high = [n for n in range(n_ops) if prefs[n] == 1]
    middle = [n for n in range(n_ops) if prefs[n] is None]

    def resolve(end: int, contenders: list[int]) -> tuple[Optional[int], list[int]]:
        if not contenders:
            return None, []
        if len(contenders) == 1:
            return contenders[0], []
        previous = contention_memory.get(end) if contention_memory is not None else None
        pool = [n for n in contenders if n != previous] or contenders
        winner = pool[int(rng.integers(len(pool)))]
        if contention_memory is not None:
            contention_memory[end] = winner
        return winner, [n for n in contenders if n != winner]

    # Low end resolves before the high end; losers fill the middle in
    # operator-index order alongside the no-preference operators.
    low_winner, low_losers = resolve(0, low)
    high_winner, high_losers = resolve(1, high)
    order = ([low_winner] if low_winner is not None else [])
    order += sorted(middle + low_losers + high_losers)
    order += [high_winner] if high_winner is not None else []

    boundaries = [lo for lo, _ in grid.segment_index_ranges[1:]]
    sets: list[np.ndarray] = [np.array([], dtype=int)] * n_ops
    fragments: list[tuple[tuple[int, int], ...]] = [()] * n_ops
    start = 0
    for n in order:
        stop = start + act.quota[n]
        sets[n] = np.arange(start, stop)
        cuts = [start] + [b for b in boundaries if start < b < stop] + [stop]
        fragments[n] = tuple(
            (int(a), int(b - a)) for a, b in zip(cuts[:-1], cuts[1:])
        )
        start = stop

    return Allocation(
        sets=tuple(sets), form="fragmented", n_subcarriers=grid.n_subcarriers,
        fragments=tuple(fragments),
    )


# ---------------------------------------------------------------------------
# Throughput evaluation
# ---------------------------------------------------------------------------

def operator_throughput(alloc: Allocation, ch: ChannelRealization, p_max,
                        guard_subcarriers: float = 0.0):
    """Evaluate an allocation: per-operator and system spectral efficiency.

    Within each operator every held subcarrier is tagged to the user with
    the highest gain on it (ties to the lowest user index); the operator's
    power budget is split across users proportionally to their tagged
    subcarrier counts and each user water-fills its share.  The same
    evaluation applies to scattered and fragmented allocations.

    ``guard_subcarriers`` deducts a per-fragment guardband overhead from
    the throughput accounting of fragmented allocations (never changing
    the allocation itself); the default 0 assumes ideal synchronization.

    Parameters
    ----------
    alloc : Allocation
    ch : ChannelRealization
    p_max : float or sequence of float
        Per-operator power budget in watts.
    guard_subcarriers : float
        Subcarriers' worth of overhead charged per fragment.

    Returns
    -------
    (numpy.ndarray, float)
        Per-operator spectral efficiency normalized per held subcarrier
        (bits/s/Hz), and the system total normalized over the whole grid.
    """
    n_ops = alloc.n_operators
    if ch.n_operators != n_ops:
        raise ValueError("allocation and channel cover different operator counts")
    budgets = np.broadcast_to(np.asarray(p_max, dtype=float), (n_ops,))
    if np.any(budgets < 0):
        raise ValueError("p_max must be >= 0")

    per_op = np.zeros(n_ops)
    total_bits = 0.0
    for n in range(n_ops):
        subs = alloc.sets[n]
        if len(subs) == 0:
            continue
        gains = ch.gains[n][:, subs]
        owner = np.argmax(gains, axis=0)  # ties resolve to the lowest user index
        op_bits = 0.0
        for k in np.unique(owner):
            mask = owner == k
            share = budgets[n] * mask.sum() / len(subs)
            if share <= 0:
                continue
            powers = waterfill_max_rate(gains[k, mask], share)
            op_bits += float(np.sum(np.log2(1.0 + powers * gains[k, mask])))
        if alloc.form == "fragmented" and guard_subcarriers > 0:
            overhead = guard_subcarriers * len(alloc.fragments[n])
            op_bits *= max(0.0, len(subs) - overhead) / len(subs)
        per_op[n] = op_bits / len(subs)
        total_bits += op_bits

    return per_op, total_bits / alloc.n_subcarriers
