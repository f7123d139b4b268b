"""Closed-form water-filling over parallel channels.

Both directions of the classic single-user problem: spend a fixed power
budget for maximum sum rate, or hit a total rate target with minimum power.
Gains are effective SNRs per watt, rates are ``log2(1 + p * h)`` summed over
channels.
"""

from __future__ import annotations

import numpy as np


def waterfill_max_rate(gains, budget: float) -> np.ndarray:
    """Split ``budget`` across channels to maximize the sum rate.

    Solves ``max sum(log2(1 + p_i * h_i))`` s.t. ``sum(p_i) == budget``,
    ``p_i >= 0``.  The optimum is ``p_i = max(0, mu - 1/h_i)`` with the water
    level ``mu`` chosen so the budget is met exactly.

    Parameters
    ----------
    gains : array_like
        Positive channel gains ``h_i``.
    budget : float
        Total power, >= 0.

    Returns
    -------
    numpy.ndarray
        Optimal per-channel powers; ``powers.sum() == budget`` to within
        floating-point round-off.
    """
    h = np.asarray(gains, dtype=float).ravel()
    if h.size == 0:
        raise ValueError("gains must be non-empty")
    if np.any(h <= 0) or not np.all(np.isfinite(h)):
        raise ValueError("gains must be positive and finite")
    if budget < 0 or not np.isfinite(budget):
        raise ValueError("budget must be >= 0 and finite")
    if budget == 0.0:
        return np.zeros_like(h)

    inv = np.sort(1.0 / h)
    # With the k strongest channels active, mu = (budget + sum of their 1/h) / k.
    # The largest k for which mu exceeds the k-th inverse gain is optimal.
    cum = np.cumsum(inv)
    k_range = np.arange(1, h.size + 1)
    mu_candidates = (budget + cum) / k_range
    active = mu_candidates > inv
    # A budget small enough to vanish against 1/h in floating point leaves
    # no strict candidate; the single-channel split is then exact.
    k = int(np.nonzero(active)[0][-1]) + 1 if active.any() else 1
    mu = mu_candidates[k - 1]

    powers = np.maximum(0.0, mu - 1.0 / h)
    # Remove round-off drift so the budget holds to ~1e-16 relative.
    scale = powers.sum()
    if scale > 0:
        powers *= budget / scale
    else:
        powers[np.argmax(h)] = budget
    return powers


def waterfill_min_power(gains, rate_target: float) -> np.ndarray:
    """Meet a total rate target (bits) with minimum total power.

    Solves ``min sum(p_i)`` s.t. ``sum(log2(1 + p_i * h_i)) >= rate_target``,
    ``p_i >= 0``.  At the optimum ``p_i = max(0, nu - 1/h_i)`` where the
    level ``nu`` is the closed-form solution that meets the target with
    equality over the active channel set.

    Parameters
    ----------
    gains : array_like
        Positive channel gains ``h_i``.
    rate_target : float
        Required total rate in bits; 0 yields all-zero powers.

    Returns
    -------
    numpy.ndarray
        Minimal per-channel powers achieving the target with equality.
    """
    h = np.asarray(gains, dtype=float).ravel()
    if h.size == 0:
        raise ValueError("gains must be non-empty")
    if np.any(h <= 0) or not np.all(np.isfinite(h)):
        raise ValueError("gains must be positive and finite")
    if rate_target < 0 or not np.isfinite(rate_target):
        raise ValueError("rate_target must be >= 0 and finite")
    if rate_target == 0.0:
        return np.zeros_like(h)

    order = np.argsort(-h)
    h_sorted = h[order]
    log2h = np.log2(h_sorted)
    cum_log2h = np.cumsum(log2h)

    # With the k strongest channels active the target is met with equality at
    # level nu = 2 ** ((target - sum(log2 h_i)) / k); valid when nu buys a
    # positive power on the weakest active channel and none on the next one.
    n = h.size
    nu = None
    k_active = n
    for k in range(1, n + 1):
        cand = 2.0 ** ((rate_target - cum_log2h[k - 1]) / k)
        # Small slack: at a tiny target the k=1 level sits exactly on the
        # 1/h boundary and float rounding must not disqualify it.
        if cand * h_sorted[k - 1] < 1.0 - 1e-12:
            continue  # weakest active channel would get negative power
        if k < n and cand * h_sorted[k] >= 1.0:
            continue  # next channel should have joined the active set
        nu = cand
        k_active = k
        break
    if nu is None:
        # Numerical edge: fall back to all channels active.
        nu = 2.0 ** ((rate_target - cum_log2h[-1]) / n)
        k_active = n

    powers = np.zeros(n)
    powers[order[:k_active]] = nu - 1.0 / h_sorted[:k_active]
    return np.maximum(powers, 0.0)
