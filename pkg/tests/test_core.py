import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_instance
from mdvrp_lab.core import (CAPACITY, COVERAGE, DEPOT_ANCHOR, DUPLICATE, Instance, InstanceError,
                            Solution, Tour, euclid, max_tours, solution_cost, tour_length, validate)


def test_euclid_examples():
    assert euclid((0, 0), (0, 0)) == 0
    assert euclid((0, 0), (3, 4)) == 5
    assert abs(euclid((0.2, 0.7), (0.9, 0.1)) - math.sqrt(0.49 + 0.36)) < 1e-15
    assert abs(euclid((0.2, 0.7), (0.9, 0.1)) - 0.9219544457292886) < 1e-12


coord = st.floats(-100, 100, allow_nan=False)
point = st.tuples(coord, coord)


@given(point, point, point)
def test_euclid_metric_properties(a, b, c):
    assert euclid(a, b) >= 0
    assert euclid(a, b) == euclid(b, a)
    assert euclid(a, c) <= euclid(a, b) + euclid(b, c) + 1e-9


def test_tour_length_examples():
    inst = make_instance([(0, 0)], [(0, 1), (1, 1), (1, 0)], [1, 1, 1], 10)
    assert abs(tour_length(inst, Tour(0, (0, 1))) - (2 + math.sqrt(2))) < 1e-12
    assert tour_length(inst, Tour(0, ())) == 0
    assert tour_length(inst, Tour(0, (2,))) == 2
    with pytest.raises(IndexError):
        tour_length(inst, Tour(0, (5,)))
    with pytest.raises(IndexError):
        tour_length(inst, Tour(3, (0,)))


def test_solution_cost_examples():
    inst = make_instance([(0, 0), (5, 5)], [(0, 1), (1, 1), (5, 6)], [1, 1, 1], 10)
    assert abs(solution_cost(inst, Solution((Tour(0, (0, 1)),))) - 3.414213562373095) < 1e-9
    two = Solution((Tour(0, (0,)), Tour(1, (2,))))
    assert abs(solution_cost(inst, two) - 4) < 1e-9


def test_cost_permutation_and_reversal_invariant():
    rng = np.random.default_rng(3)
    inst = make_instance(rng.random((2, 2)), rng.random((6, 2)), [1] * 6, 10)
    tours = [Tour(0, (0, 3, 1)), Tour(1, (2, 5)), Tour(0, (4,))]
    base = solution_cost(inst, Solution(tuple(tours)))
    shuffled = Solution(tuple(reversed(tours)))
    flipped = Solution(tuple(Tour(t.depot_index, t.visits[::-1]) for t in tours))
    assert abs(solution_cost(inst, shuffled) - base) < 1e-9
    assert abs(solution_cost(inst, flipped) - base) < 1e-9


def test_validate_reports_each_violation():
    inst = make_instance([(0, 0)], [(1, 0), (2, 0), (3, 0), (4, 0)], [5, 5, 5, 6], 10)
    missing = validate(inst, Solution((Tour(0, (0, 1)), Tour(0, (2,)))))
    assert not missing.is_feasible
    assert missing.tags() == {COVERAGE}
    assert any("customer 3" in msg for _, msg in missing.violations)

    over = validate(inst, Solution((Tour(0, (0, 1, 2)), Tour(0, (3,)))))
    assert CAPACITY in over.tags()

    dup = validate(inst, Solution((Tour(0, (0, 1)), Tour(0, (1, 2)), Tour(0, (3,)))))
    assert DUPLICATE in dup.tags()

    bad_depot = validate(inst, Solution((Tour(2, (0, 1)), Tour(0, (2,)), Tour(0, (3,)))))
    assert DEPOT_ANCHOR in bad_depot.tags()

    ok = validate(inst, Solution((Tour(0, (0, 1)), Tour(0, (2,)), Tour(0, (3,)), Tour(0, ()))))
    assert ok.is_feasible and ok.violations == ()


def test_capacity_exactly_full_is_feasible():
    inst = make_instance([(0, 0)], [(1, 0), (2, 0)], [4, 6], 10)
    assert validate(inst, Solution((Tour(0, (0, 1)),))).is_feasible


def test_max_tours_examples():
    def inst_with(total, cap, d):
        dem = [cap] * (total // cap) + ([total % cap] if total % cap else [])
        return make_instance([(0, 0)] * d, [(1, 1)] * len(dem), dem, cap)
    assert max_tours(inst_with(100, 50, 2)) == 4
    assert max_tours(inst_with(101, 50, 3)) == 6
    assert max_tours(inst_with(1, 50, 4)) == 5


def test_instance_rejects_bad_input():
    with pytest.raises(InstanceError):
        make_instance([(0, 0)], [(1, 1)], [11], 10)
    with pytest.raises(InstanceError):
        make_instance([(0, 0)], [(1, 1)], [0], 10)
    with pytest.raises(InstanceError):
        make_instance([(0, 0)], [(np.inf, 1)], [1], 10)
    with pytest.raises(InstanceError):
        make_instance([(0, 0)], np.zeros((0, 2)), [], 10)
    with pytest.raises(InstanceError):
        make_instance([(0, 0)], [(1, 1)], [1], 0)
    with pytest.raises(InstanceError):
        make_instance([(0, 0)], [(1, 1)], [1.5], 10)


def test_instance_is_immutable():
    inst = make_instance([(0, 0)], [(1, 1)], [1], 10)
    with pytest.raises(ValueError):
        inst.customers[0, 0] = 3.0
    with pytest.raises(AttributeError):
        inst.capacity = 5
    assert inst == make_instance([(0, 0)], [(1, 1)], [1], 10)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 4), st.integers(10, 60), st.integers(0, 10_000))
def test_max_tours_bound(n, d, cap, seed):
    rng = np.random.default_rng(seed)
    inst = Instance(rng.random((d, 2)), rng.random((n, 2)), rng.integers(1, 11, n), cap)
    assert max_tours(inst) == -(-int(inst.demand.sum()) // cap) + d
    assert max_tours(inst) >= d + 1
