"""Subcarrier grid construction and frequency-selective Rayleigh fading.

All operators share one uniform subcarrier grid, possibly split across
non-contiguous spectrum segments.  Per-user channels are multipath Rayleigh
draws whose frequency response is evaluated at each subcarrier center, then
normalized by the per-subcarrier noise power into an effective SNR-per-watt
gain usable directly in ``log2(1 + p * h)`` rate expressions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

# Relative multipath powers in dB for the default six-path exponential-decay
# profile (unit decay factor), normalized to the first path.
DEFAULT_POWER_PROFILE_DB = (0.0, -4.35, -8.69, -13.08, -17.43, -21.78)

# Default per-subcarrier noise power spectral density: -170 dBm/Hz.
DEFAULT_NOISE_PSD_W_PER_HZ = 1e-20

_REL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GridSpec:
    """A uniform subcarrier grid over one or more spectrum segments.

    Segments are ordered, non-overlapping ``(start_hz, width_hz)`` intervals.
    Every segment width is an integer multiple of the subcarrier spacing, so
    subcarriers never straddle a segment edge.
    """

    total_bandwidth_hz: float
    n_subcarriers: int
    segments: tuple[tuple[float, float], ...]
    subcarrier_spacing_hz: float

    @cached_property
    def segment_subcarrier_counts(self) -> tuple[int, ...]:
        return tuple(
            int(round(width / self.subcarrier_spacing_hz)) for _, width in self.segments
        )

    @cached_property
    def segment_index_ranges(self) -> tuple[tuple[int, int], ...]:
        """Half-open ``(start, stop)`` subcarrier index range of each segment."""
        ranges = []
        start = 0
        for count in self.segment_subcarrier_counts:
            ranges.append((start, start + count))
            start += count
        return tuple(ranges)

    @cached_property
    def center_frequencies_hz(self) -> np.ndarray:
        """Center frequency of each subcarrier, strictly increasing."""
        freqs = np.empty(self.n_subcarriers)
        for (start_hz, _), (lo, hi) in zip(self.segments, self.segment_index_ranges):
            idx = np.arange(hi - lo)
            freqs[lo:hi] = start_hz + (idx + 0.5) * self.subcarrier_spacing_hz
        return freqs

    def segment_of(self, subcarrier: int) -> int:
        for seg, (lo, hi) in enumerate(self.segment_index_ranges):
            if lo <= subcarrier < hi:
                return seg
        raise IndexError(f"subcarrier index {subcarrier} out of range")


def build_grid(
    total_bandwidth_hz: float,
    n_subcarriers: int,
    segments: Optional[Sequence[tuple[float, float]]] = None,
) -> GridSpec:
    """Validate and construct the shared subcarrier grid.

    Parameters
    ----------
    total_bandwidth_hz : float
        Aggregate system bandwidth in Hz; must be positive.
    n_subcarriers : int
        Number of subcarriers on the common grid; must be >= 1.
    segments : sequence of (start_hz, width_hz), optional
        Ordered non-overlapping spectrum segments.  Defaults to one
        contiguous segment starting at 0 Hz.  Segment widths must sum to
        ``total_bandwidth_hz`` and each must be an integer multiple of the
        subcarrier spacing.

    Returns
    -------
    GridSpec
    """
    if not np.isfinite(total_bandwidth_hz) or total_bandwidth_hz <= 0:
        raise ValueError("total_bandwidth_hz must be positive and finite")
    if int(n_subcarriers) != n_subcarriers or n_subcarriers < 1:
        raise ValueError("n_subcarriers must be an integer >= 1")
    n_subcarriers = int(n_subcarriers)
    spacing = total_bandwidth_hz / n_subcarriers

    if segments is None:
        segments = [(0.0, float(total_bandwidth_hz))]
    segs = [(float(s), float(w)) for s, w in segments]
    if not segs:
        raise ValueError("segments must be a non-empty sequence")

    prev_end = -np.inf
    for i, (start, width) in enumerate(segs):
        if width <= 0:
            raise ValueError(f"segment {i}: width must be positive")
        if start < prev_end:
            raise ValueError(f"segment {i}: segments must be ordered and non-overlapping")
        ratio = width / spacing
        if abs(ratio - round(ratio)) > _REL_TOL * max(1.0, ratio):
            raise ValueError(
                f"segment {i}: width {width} Hz is not an integer multiple of the "
                f"subcarrier spacing {spacing} Hz"
            )
        prev_end = start + width

    width_sum = sum(w for _, w in segs)
    if abs(width_sum - total_bandwidth_hz) > _REL_TOL * total_bandwidth_hz:
        raise ValueError(
            f"segment widths sum to {width_sum} Hz, expected {total_bandwidth_hz} Hz"
        )

    return GridSpec(
        total_bandwidth_hz=float(total_bandwidth_hz),
        n_subcarriers=n_subcarriers,
        segments=tuple(segs),
        subcarrier_spacing_hz=spacing,
    )


@dataclass(frozen=True, eq=False)
class ChannelProfile:
    """Multipath Rayleigh fading profile with exponential power decay.

    ``relative_powers_db`` overrides the decay-law tap powers with explicit
    per-path values (dB relative to the first path); otherwise tap ``l``
    carries relative power ``exp(-decay_factor * l)``.  ``max_doppler_hz`` is
    carried for completeness but time selectivity is not simulated: every
    draw is one coherence-time snapshot.
    """

    n_paths: int = 6
    decay_factor: float = 1.0
    max_delay_spread_s: float = 5e-6
    max_doppler_hz: float = 30.0
    noise_psd_w_per_hz: float = DEFAULT_NOISE_PSD_W_PER_HZ
    relative_powers_db: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.decay_factor < 0:
            raise ValueError("decay_factor must be >= 0")
        if self.max_delay_spread_s < 0:
            raise ValueError("max_delay_spread_s must be >= 0")
        if self.noise_psd_w_per_hz <= 0:
            raise ValueError("noise_psd_w_per_hz must be positive")
        if self.relative_powers_db is not None and len(self.relative_powers_db) != self.n_paths:
            raise ValueError("relative_powers_db length must equal n_paths")

    @cached_property
    def path_powers(self) -> np.ndarray:
        """Per-path mean powers, normalized to sum to one."""
        if self.relative_powers_db is not None:
            powers = 10.0 ** (np.asarray(self.relative_powers_db, dtype=float) / 10.0)
        else:
            powers = np.exp(-self.decay_factor * np.arange(self.n_paths, dtype=float))
        return powers / powers.sum()

    @cached_property
    def path_delays_s(self) -> np.ndarray:
        """Path delays spread uniformly over [0, max_delay_spread_s]."""
        if self.n_paths == 1:
            return np.zeros(1)
        return np.linspace(0.0, self.max_delay_spread_s, self.n_paths)


def default_profile() -> ChannelProfile:
    """The standard six-path profile used by the shipped experiment defaults."""
    return ChannelProfile(relative_powers_db=DEFAULT_POWER_PROFILE_DB)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One fading snapshot for every (operator, user, subcarrier) triple.

    ``gains[n][k, l]`` is the effective SNR per watt of user ``k`` of
    operator ``n`` on subcarrier ``l``:  ``|z|^2 / (N0 * subcarrier_spacing)``
    where ``z`` is the multipath frequency response.
    """

    grid: GridSpec
    gains: tuple[np.ndarray, ...]
    users_per_operator: tuple[int, ...]
    seed: int

    @property
    def n_operators(self) -> int:
        return len(self.gains)

    def operator_gains(self, n: int) -> np.ndarray:
        return self.gains[n]


def sample_channel(
    grid: GridSpec,
    profile: ChannelProfile,
    users_per_operator: Sequence[int],
    seed: int,
) -> ChannelRealization:
    """Draw an independent multipath Rayleigh channel for every user.

    Tap amplitudes are complex circular Gaussian with variances proportional
    to the profile's normalized path powers (unit total mean power); the
    frequency response at each subcarrier center is the tap DFT.  Draws are
    independent across operators and users and deterministic in ``seed``.

    Parameters
    ----------
    grid : GridSpec
    profile : ChannelProfile
    users_per_operator : sequence of int
        Number of users of each operator; all must be >= 1.
    seed : int
        RNG seed; identical inputs reproduce the realization bit-for-bit.

    Returns
    -------
    ChannelRealization
    """
    users = tuple(int(k) for k in users_per_operator)
    if not users or any(k < 1 for k in users):
        raise ValueError("users_per_operator must be non-empty with all counts >= 1")

    rng = np.random.default_rng(seed)
    # DFT steering matrix: rows are paths, columns are subcarriers.
    steering = np.exp(
        -2j * np.pi * np.outer(profile.path_delays_s, grid.center_frequencies_hz)
    )
    tap_std = np.sqrt(profile.path_powers / 2.0)
    noise_power = profile.noise_psd_w_per_hz * grid.subcarrier_spacing_hz

    gains = []
    for n_users in users:
        shape = (n_users, profile.n_paths)
        taps = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * tap_std
        z = taps @ steering
        gains.append(np.abs(z) ** 2 / noise_power)
    return ChannelRealization(
        grid=grid, gains=tuple(gains), users_per_operator=users, seed=int(seed)
    )


def subcarrier_rate(p, h):
    """Achievable spectral efficiency ``log2(1 + p * h)`` in bits/s/Hz.

    Broadcasts over arrays.  Powers must be non-negative and gains positive.
    """
    p = np.asarray(p, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(p < 0):
        raise ValueError("power must be >= 0")
    if np.any(h <= 0):
        raise ValueError("gain must be > 0")
    out = np.log2(1.0 + p * h)
    return float(out) if out.ndim == 0 else out
