"""Exactness of the convex mixed-integer reformulation at binary points."""

import itertools

import numpy as np
import pytest

from specshare.intraop import build_instance, linearize, make_solution, oracle_power_split


def random_instance(rng, n_users=2, n_subcarriers=3, n_ndc=1, p_max=None,
                    target_range=(0.2, 1.0)):
    gains = rng.uniform(0.2, 8.0, size=(n_users, n_subcarriers))
    targets = rng.uniform(*target_range, size=n_users - n_ndc)
    p_max = float(rng.uniform(1.0, 6.0)) if p_max is None else p_max
    return build_instance(gains, n_ndc, targets, p_max)


def test_power_of_binary_exponent_identity():
    """(1 + p*h)^c equals 1 + c*p*h exactly when c is 0 or 1."""
    rng = np.random.default_rng(0)
    p = rng.uniform(0.0, 10.0, size=1000)
    h = rng.uniform(1e-3, 1e16, size=1000)
    base = 1.0 + p * h
    assert np.array_equal(base ** 1.0, 1.0 + 1.0 * p * h)
    assert np.array_equal(base ** 0.0, np.ones_like(base))
    assert np.array_equal(1.0 + 0.0 * p * h, np.ones_like(base))


def test_envelope_pins_product_at_binary_points():
    """The four-inequality envelope leaves lam no room besides c*p."""
    rng = np.random.default_rng(1)
    p_max = 4.0
    c = rng.integers(0, 2, size=1000).astype(float)
    p = rng.uniform(0.0, p_max, size=1000)
    lo = np.maximum(0.0, p - p_max * (1.0 - c))
    hi = np.minimum(p_max * c, p)
    assert np.max(hi - lo) <= 1e-9
    assert np.max(np.abs(lo - c * p)) <= 1e-12


def test_envelope_residual_zero_only_at_product():
    inst = build_instance([[1.0, 2.0], [3.0, 4.0]], 1, [0.5], 4.0)
    model = linearize(inst)
    rng = np.random.default_rng(2)
    c = rng.integers(0, 2, size=4).astype(float)
    p = rng.uniform(0.0, 4.0, size=4)
    assert model.envelope_residual(c, p, c * p) <= 1e-12
    off = c * p + 0.01
    assert model.envelope_residual(c, p, off) > 1e-3


def test_rate_proxy_caps():
    inst = build_instance([[3.0]], 1, [], 4.0)
    model = linearize(inst)
    # Assigned tuple with p=2, h=3: the proxy may reach 1 + 2*3 = 7.
    assert model.xi_cap(np.array([1.0]), np.array([2.0])) == pytest.approx([7.0])
    # Unassigned tuple: the proxy is pinned at 1 regardless of power.
    assert model.xi_cap(np.array([0.0]), np.array([2.0])) == pytest.approx([1.0])


def test_model_layout():
    inst = build_instance(np.ones((4, 8)), 2, [1.4, 0.0], 4.0)
    model = linearize(inst)
    assert model.n_tuples == 32
    assert model.ndc_tuples.tolist() == list(range(16))
    # The zero-target user imposes no floor.
    assert len(model.dc_groups) == 1
    tuples, rate_bits = model.dc_groups[0]
    assert tuples.tolist() == list(range(16, 24))
    assert rate_bits == pytest.approx(1.4 * 8)
    assert model.log2_xi_cap == pytest.approx(np.full(32, np.log2(5.0)))


def test_tuple_flattening():
    inst = build_instance(np.arange(1, 13, dtype=float).reshape(3, 4), 1, [0.0, 0.0], 1.0)
    assert inst.tuple_index(0, 0) == 0
    assert inst.tuple_index(2, 3) == 11
    model = linearize(inst)
    assert model.h[inst.tuple_index(1, 2)] == inst.gains[1, 2]


def assignments(n_users, n_subcarriers):
    for combo in itertools.product(range(n_users), repeat=n_subcarriers):
        c = np.zeros((n_users, n_subcarriers))
        c[list(combo), range(n_subcarriers)] = 1.0
        yield c


def test_objective_forms_rank_assignments_identically():
    """Sum-rate, product, and geometric-mean objectives share one argmax."""
    rng = np.random.default_rng(7)
    for _ in range(10):
        inst = random_instance(rng)
        model = linearize(inst)
        plain, bits, geo = [], [], []
        for c in assignments(inst.n_users, inst.n_subcarriers):
            split = oracle_power_split(c, inst)
            if not split.feasible:
                continue
            sol = make_solution(inst, c, split.powers)
            plain.append(split.ndc_rate_bits)
            bits.append(model.objective_bits(sol.xi))
            geo.append(model.objective_geomean(sol.xi))
        assert len(plain) > 0
        assert int(np.argmax(plain)) == int(np.argmax(bits)) == int(np.argmax(geo))


def test_floor_constraint_matches_geometric_mean_form():
    # With tight proxies, the per-user geometric-mean floor holds exactly
    # when the plain rate floor holds.
    rng = np.random.default_rng(9)
    for _ in range(50):
        inst = random_instance(rng, n_users=3, n_subcarriers=4, n_ndc=1)
        model = linearize(inst)
        c = np.zeros((3, 4))
        c[rng.integers(0, 3, size=4), range(4)] = 1.0
        p = rng.uniform(0.0, inst.p_max / 4, size=(3, 4)) * c
        sol = make_solution(inst, c, p)
        for (tuples, rate_bits), target in zip(model.dc_groups, inst.dc_targets):
            user = tuples[0] // 4
            plain = float((c[user] * np.log2(1.0 + p[user] * inst.gains[user])).sum())
            geo_mean = float(np.prod(sol.xi[tuples]) ** (1.0 / 4))
            floor = 2.0 ** (rate_bits / 4)
            assert (geo_mean >= floor * (1 - 1e-12)) == (plain >= rate_bits * (1 - 1e-12))


def test_dc_rate_shortfalls_from_tight_proxies():
    inst = build_instance([[1.0, 1.0], [1.0, 1.0]], 1, [1.0], 4.0)
    model = linearize(inst)
    # User 1 holds subcarrier 1 at 3 W: log2(4) = 2 bits meets the 2-bit floor.
    c = np.array([[1.0, 0.0], [0.0, 1.0]])
    p = np.array([[1.0, 0.0], [0.0, 3.0]])
    sol = make_solution(inst, c, p)
    shortfall = model.dc_rate_shortfalls(sol.xi)
    assert shortfall == pytest.approx((0.0,), abs=1e-12)
    # Halving the power leaves a positive shortfall.
    lean = make_solution(inst, c, p / 2)
    assert model.dc_rate_shortfalls(lean.xi)[0] > 0.5
