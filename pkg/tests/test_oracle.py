"""Exhaustive-search ground truth for small allocation instances."""

import numpy as np
import pytest

from specshare.intraop import (
    InfeasibleProblem,
    build_instance,
    check_solution,
    oracle_exhaustive,
    oracle_power_split,
    waterfill_max_rate,
)


def test_hand_enumerable_instance():
    """Best of the four assignments: floor user takes its strong subcarrier.

    Gains ((1,4),(3,1)), budget 2 W, floor 1 bit/s/Hz over 2 subcarriers:
    the floor user meets 2 bits on gain 3 with exactly 1 W, leaving 1 W for
    the best-effort user on gain 4, worth log2(5).
    """
    inst = build_instance([[1.0, 4.0], [3.0, 1.0]], 1, [1.0], 2.0)
    sol = oracle_exhaustive(inst)
    assert sol.objective == pytest.approx(np.log2(5.0), abs=1e-12)
    assert sol.c.tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert sol.p[1, 0] == pytest.approx(1.0, abs=1e-12)
    assert sol.p[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_single_user_reduces_to_waterfilling():
    gains = np.array([[4.0, 2.0, 0.5]])
    inst = build_instance(gains, 1, [], 3.0)
    sol = oracle_exhaustive(inst)
    p = waterfill_max_rate(gains[0], 3.0)
    assert sol.c.tolist() == [[1.0, 1.0, 1.0]]
    assert sol.objective == pytest.approx(np.log2(1.0 + p * gains[0]).sum())


def test_ties_keep_lowest_assignment_index():
    # Two identical best-effort users: every assignment scores the same,
    # so the first enumerated one (everything to user 0) must win.
    inst = build_instance(np.ones((2, 3)), 2, [], 2.0)
    sol = oracle_exhaustive(inst)
    assert sol.c.tolist() == [[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]]


def test_enumeration_guard():
    inst = build_instance(np.ones((4, 11)), 2, [0.5, 0.5], 4.0)
    with pytest.raises(ValueError, match="assignment"):
        oracle_exhaustive(inst)


def test_infeasible_when_budget_is_zero():
    inst = build_instance(np.ones((2, 2)), 1, [1.0], 0.0)
    with pytest.raises(InfeasibleProblem):
        oracle_exhaustive(inst)


def test_infeasible_when_floors_outrun_budget():
    inst = build_instance(np.full((2, 2), 0.5), 1, [20.0], 1.0)
    with pytest.raises(InfeasibleProblem):
        oracle_exhaustive(inst)


def test_zero_target_floor_never_binds():
    # A zero-floor user adds nothing to the objective and never needs a
    # subcarrier, so the optimum matches the best-effort user running alone.
    gains = np.array([[5.0, 1.0], [1.0, 5.0]])
    with_idle_user = oracle_exhaustive(build_instance(gains, 1, [0.0], 2.0))
    alone = oracle_exhaustive(build_instance(gains[:1], 1, [], 2.0))
    assert with_idle_user.objective == pytest.approx(alone.objective)


def test_oracle_solutions_audit_clean():
    rng = np.random.default_rng(12)
    for _ in range(5):
        gains = rng.uniform(0.3, 6.0, size=(3, 4))
        inst = build_instance(gains, 2, [0.6], 3.0)
        sol = oracle_exhaustive(inst)
        report = check_solution(sol, inst)
        assert report.max_residual() <= 1e-9
        assert report.passed(tol=1e-9)


# ---------------------------------------------------------------------------
# Per-assignment power split
# ---------------------------------------------------------------------------

def test_power_split_pure_best_effort():
    inst = build_instance([[2.0, 1.0]], 1, [], 1.0)
    split = oracle_power_split(np.ones((1, 2)), inst)
    assert split.feasible
    assert split.powers[0] == pytest.approx(waterfill_max_rate([2.0, 1.0], 1.0))


def test_power_split_rejects_uncovered_floor():
    inst = build_instance([[1.0, 1.0], [1.0, 1.0]], 1, [1.0], 2.0)
    c = np.array([[1.0, 1.0], [0.0, 0.0]])  # floor user holds nothing
    split = oracle_power_split(c, inst)
    assert not split.feasible
    assert split.reason


def test_power_split_rejects_overdrawn_budget():
    inst = build_instance([[1.0, 1.0], [1.0, 1.0]], 1, [3.0], 1.0)
    c = np.array([[1.0, 0.0], [0.0, 1.0]])  # 6 bits on one unit-gain subcarrier
    split = oracle_power_split(c, inst)
    assert not split.feasible


def test_power_split_validates_assignment():
    inst = build_instance([[1.0, 1.0], [1.0, 1.0]], 1, [0.5], 2.0)
    both = np.ones((2, 2))  # both users on every subcarrier
    with pytest.raises(ValueError):
        oracle_power_split(both, inst)


def test_build_instance_validation():
    with pytest.raises(ValueError, match="positive and finite"):
        build_instance([[0.0, 1.0]], 1, [], 1.0)
    with pytest.raises(ValueError, match="n_ndc_users"):
        build_instance(np.ones((2, 2)), 0, [1.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        build_instance(np.ones((2, 2)), 1, [1.0, 1.0], 1.0)  # too many targets
    with pytest.raises(ValueError, match="rejected"):
        # Full-length target vector may not put floors on best-effort users.
        build_instance(np.ones((2, 2)), 1, [0.5, 0.5], 1.0)
    with pytest.raises(ValueError):
        build_instance(np.ones((2, 2)), 1, [-1.0], 1.0)
    with pytest.raises(ValueError):
        build_instance(np.ones((2, 2)), 1, [1.0], -2.0)


def test_build_instance_accepts_full_length_targets():
    inst = build_instance(np.ones((3, 2)), 2, [0.0, 0.0, 0.7], 1.0)
    assert inst.dc_targets == (0.7,)
    assert inst.dc_rate_bits(0) == pytest.approx(1.4)
