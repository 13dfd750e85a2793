import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochroute.criteria import (Criterion, PolicyInput, fan_select, frank_select, joint_select,
                                 policy_from_candidates)
from stochroute.distributions import TimeGrid
from stochroute.errors import ParameterError, PolicyError

GRID = TimeGrid(1.0, 100)
T = GRID.times


def ramp(start, stop, top=1.0):
    """CDF rising linearly from 0 at ``start`` to ``top`` at ``stop``."""
    return np.clip((T - start) / (stop - start), 0, 1) * top


# three candidate paths: slow and unreliable, fast, and slower but equally sure by the budget
PATH1 = ramp(0, 80, top=0.6)       # never reaches 0.8
PATH2 = ramp(0, 20)                # crosses 0.8 at t=16, certain from t=20
PATH3 = ramp(10, 40)               # crosses 0.8 at t=34, certain from t=40
BUDGET, THETA = 60.0, 0.8


def fig1_policy(ids=(1, 2, 3), budget=BUDGET, theta=THETA):
    return policy_from_candidates(dict(zip(ids, (PATH1, PATH2, PATH3))), budget, theta, GRID)


def test_fan_cannot_separate_the_two_sure_paths():
    pol = fig1_policy()
    k = GRID.bin_of(BUDGET)
    assert PATH2[k] == PATH3[k] == 1.0 > PATH1[k]
    assert fan_select(pol) == 2                   # tie resolved to the smaller id
    # relabel so the slower sure path has the smaller id: Fan follows the label, not the path
    assert fan_select(fig1_policy(ids=(1, 3, 2))) == 2          # id 2 is now PATH3
    assert fan_select(fig1_policy(ids=(1, 3, 2))) != 3


def test_frank_prefers_fast_path_and_ignores_unreliable_one():
    assert frank_select(fig1_policy()) == 2
    assert frank_select(fig1_policy(ids=(1, 3, 2))) == 3       # PATH2 under its new label
    only_path1 = policy_from_candidates({1: PATH1}, BUDGET, THETA, GRID)
    assert frank_select(only_path1) is None


def test_joint_selects_the_fast_path():
    assert joint_select(fig1_policy()) == 2
    assert joint_select(fig1_policy(ids=(1, 3, 2))) == 3       # label of PATH2
    only_path1 = policy_from_candidates({1: PATH1}, BUDGET, THETA, GRID)
    assert joint_select(only_path1) == fan_select(only_path1) == 1


def test_frank_is_budget_bounded():
    # PATH3 alone crosses 0.8 at t=34: outside a budget of 30, inside one of 40
    pol = policy_from_candidates({3: PATH3}, 30.0, THETA, GRID)
    assert frank_select(pol) is None
    assert frank_select(policy_from_candidates({3: PATH3}, 40.0, THETA, GRID)) == 3


def test_single_neighbor_and_direct_argmax():
    pol = policy_from_candidates({7: ramp(0, 50)}, 10.0, THETA, GRID)
    assert fan_select(pol) == joint_select(pol) == 7
    a = np.full(100, 0.4)
    b = np.full(100, 0.6)
    assert fan_select(policy_from_candidates({4: a, 9: b}, 10.0, 0.9, GRID)) == 9


def test_certain_cdf_uses_first_bin():
    succ = np.arange(100) + 1000
    pol = PolicyInput(np.ones(100), succ, 50.0, 0.8, GRID)
    assert frank_select(pol) == 1000


def test_joint_branch_example():
    # CDF crosses 0.8 at t*=12 < budget 100; the successor map differs at 12 and 100
    c = np.clip(T / 15, 0, 1)
    succ = np.where(T < 50, 11, 22)
    grid = TimeGrid(1.0, 101)
    c = np.append(c, 1.0)
    succ = np.append(succ, 22)
    pol = PolicyInput(c, succ, 100.0, 0.8, grid)
    assert frank_select(pol) == 11
    assert joint_select(pol) == 11
    assert fan_select(pol) == 22


def test_theta_one_reduces_to_fan_when_cdf_below_one():
    c = ramp(0, 200, top=0.999)
    succ = np.where(T < 30, 1, 2)
    pol = PolicyInput(c, succ, 70.0, 1.0, GRID)
    assert frank_select(pol) is None
    assert joint_select(pol) == fan_select(pol) == 2


def test_errors():
    with pytest.raises(PolicyError):
        fan_select(PolicyInput(np.zeros(0), np.zeros(0, dtype=int), 1.0, 0.5, GRID))
    with pytest.raises(PolicyError):
        joint_select(PolicyInput(np.zeros(0), np.zeros(0, dtype=int), 1.0, 0.5, GRID))
    with pytest.raises(PolicyError):
        fan_select(PolicyInput(np.zeros(100), np.zeros(100, dtype=int), -1.0, 0.5, GRID))
    with pytest.raises(PolicyError):
        fan_select(PolicyInput(np.zeros(100), np.full(100, -1), 5.0, 0.5, GRID))
    with pytest.raises(PolicyError):
        policy_from_candidates({}, 1.0, 0.5, GRID)
    assert Criterion.parse("joint") is Criterion.JOINT
    with pytest.raises(ParameterError):
        Criterion.parse("greedy")


# --- properties -------------------------------------------------------------

cdf_curves = st.lists(st.floats(0, 1), min_size=100, max_size=100).map(lambda xs: np.maximum.accumulate(xs))
successor_maps = st.lists(st.integers(0, 5), min_size=100, max_size=100).map(np.array)


@given(cdf_curves, successor_maps, st.floats(0, 99), st.floats(0.01, 1))
def test_joint_is_frank_else_fan(c, succ, budget, theta):
    pol = PolicyInput(c, succ, budget, theta, GRID)
    fr = frank_select(pol)
    assert joint_select(pol) == (fr if fr is not None else fan_select(pol))
    for crit in Criterion:
        assert crit.select(pol) == {"fan": fan_select, "frank": frank_select, "joint": joint_select}[crit.value](pol)


@given(cdf_curves, successor_maps, st.floats(0, 99), st.data())
def test_fan_depends_only_on_budget_bin(c, succ, budget, data):
    k = GRID.bin_of(budget)
    other = np.array(data.draw(st.lists(st.integers(0, 5), min_size=100, max_size=100)))
    other[k] = succ[k]
    c2 = np.sort(np.array(data.draw(st.lists(st.floats(0, 1), min_size=100, max_size=100))))
    assert fan_select(PolicyInput(c, succ, budget, 0.5, GRID)) == \
        fan_select(PolicyInput(c2, other, budget, 0.5, GRID))


@given(cdf_curves, st.floats(0.01, 1), st.floats(0.01, 1))
def test_first_passage_monotone_in_threshold(c, a, b):
    from stochroute.distributions import first_passage_time
    lo, hi = sorted((a, b))
    t_lo = first_passage_time(c, lo, GRID)
    t_hi = first_passage_time(c, hi, GRID)
    if t_hi is not None:
        assert t_lo is not None and t_lo <= t_hi
