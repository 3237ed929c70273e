import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import (direct_gram_inv_diag, random_channels,
                     waterfill_active_set_oracle)
from xlmimo import (check_feasibility, gram_inverse_diag, min_power,
                    quick_infeasible, single_user_min_power, waterfill)
from xlmimo.errors import Infeasible


def test_min_power_values():
    assert min_power(0.0, 1.0, 1.0) == 0.0
    assert min_power(1.0, 1.0, 1.0) == 1.0
    assert min_power(5.0, 0.5, 2.0) == pytest.approx(31.0)


def test_single_user_min_power_values():
    assert single_user_min_power(5.0, 1.0, 1.0) == pytest.approx(31.0)
    assert single_user_min_power(0.0, 3.0, 1.0) == 0.0


def test_single_user_power_lower_bounds_joint_power(rng):
    for _ in range(50):
        m = int(rng.integers(4, 16))
        n = int(rng.integers(2, min(m, 6) + 1))
        a = random_channels(rng, m, n)
        rates = rng.uniform(0.5, 6.0, size=n)
        noise = 0.1
        joint = min_power(rates, gram_inverse_diag(a), noise)
        alone = single_user_min_power(rates, np.linalg.norm(a, axis=0) ** 2, noise)
        assert np.all(alone <= joint * (1.0 + 1e-12))


def test_feasibility_empty_set():
    a = np.zeros((4, 0), dtype=complex)
    assert check_feasibility(a, [], 1.0, 0.5)


def test_feasibility_boundary_inclusive():
    a = np.array([[1.0]], dtype=complex)       # diag of gram inverse = 1
    noise = 1.0
    p_max = noise * (2.0 ** 3 - 1.0)           # exactly the one floor
    assert check_feasibility(a, [3.0], noise, p_max)


def test_near_collinear_pair_infeasible_while_each_alone_feasible():
    c = 0.999
    a = np.array([[1.0, c], [0.0, np.sqrt(1 - c * c)]], dtype=complex)
    noise, rate = 1.0, 2.0
    single_floor = min_power(rate, gram_inverse_diag(a[:, :1])[0], noise)
    p_max = 4.0 * single_floor
    assert check_feasibility(a[:, :1], [rate], noise, p_max)
    assert check_feasibility(a[:, 1:], [rate], noise, p_max)
    assert not check_feasibility(a, [rate, rate], noise, p_max)


def test_quick_infeasible_boundary_is_infeasible():
    # single-user floors summing exactly to the budget trip the test
    assert quick_infeasible([1.0], [1.0], 1.0, 1.0)


def test_quick_infeasible_single_user_consistency():
    a = np.array([[1.0]], dtype=complex)
    noise, rate = 1.0, 3.0
    p_max = 0.5 * noise * (2.0 ** rate - 1.0)
    assert quick_infeasible([1.0], [rate], noise, p_max)
    assert not check_feasibility(a, [rate], noise, p_max)


def test_quick_infeasible_never_contradicts_feasible_sets(rng):
    for _ in range(100):
        m = int(rng.integers(3, 12))
        n = int(rng.integers(1, min(m, 5) + 1))
        a = random_channels(rng, m, n)
        rates = rng.uniform(0.5, 4.0, size=n)
        noise = 0.05
        floors = min_power(rates, gram_inverse_diag(a), noise)
        p_max = float(floors.sum()) * float(rng.uniform(1.0, 3.0))
        if check_feasibility(a, rates, noise, p_max):
            assert not quick_infeasible(np.linalg.norm(a, axis=0) ** 2, rates,
                                        noise, p_max)


def test_waterfill_single_user_gets_whole_budget():
    alloc = waterfill([1.0], [1.0], 0.1, 5.0)
    np.testing.assert_allclose(alloc.powers, [5.0])
    assert alloc.total == pytest.approx(5.0)


def test_waterfill_symmetric_split():
    # noise * diag = (1, 1), floors (1, 1), budget 4 -> equal split
    alloc = waterfill([1.0, 1.0], [1.0, 1.0], 1.0, 4.0)
    np.testing.assert_allclose(alloc.powers, [2.0, 2.0])


def test_waterfill_pinned_user_hand_case():
    # noise * diag = (1, 3); floors (1, 3); budget 6 -> (3, 3), water level 4
    noise = 1.0
    diag = np.array([1.0, 3.0])
    rates = np.array([1.0, 1.0])
    alloc = waterfill(diag, rates, noise, 6.0)
    np.testing.assert_allclose(alloc.powers, [3.0, 3.0], rtol=1e-9)
    assert alloc.water_level == pytest.approx(4.0, rel=1e-9)


def test_waterfill_empty_set():
    alloc = waterfill([], [], 1.0, 1.0)
    assert alloc.powers.size == 0
    assert alloc.feasible


def test_waterfill_rejects_infeasible_floors():
    with pytest.raises(Infeasible):
        waterfill([1.0, 1.0], [3.0, 3.0], 1.0, 2.0)


def _random_feasible_instance(rng, n):
    diag = rng.uniform(0.2, 5.0, size=n)
    rates = rng.uniform(0.2, 4.0, size=n)
    noise = float(rng.uniform(0.01, 1.0))
    floors = min_power(rates, diag, noise)
    p_max = float(floors.sum()) * float(rng.uniform(1.02, 4.0)) + 1e-6
    return diag, rates, noise, p_max


def test_waterfill_kkt_conditions(rng):
    for _ in range(200):
        n = int(rng.integers(1, 6))
        diag, rates, noise, p_max = _random_feasible_instance(rng, n)
        alloc = waterfill(diag, rates, noise, p_max)
        floors = min_power(rates, diag, noise)
        base = noise * diag
        assert np.all(alloc.powers >= floors - 1e-12 * p_max)
        assert alloc.total <= p_max * (1.0 + 1e-9)
        unpinned = alloc.powers > floors * (1.0 + 1e-12)
        if unpinned.any():
            # common water level for every unpinned user, budget exhausted
            levels = alloc.powers[unpinned] + base[unpinned]
            np.testing.assert_allclose(levels, alloc.water_level, rtol=1e-9)
            assert alloc.total == pytest.approx(p_max, rel=1e-9)
            # pinned users would sit below their floor at this water level
            pinned = ~unpinned
            assert np.all(alloc.water_level - base[pinned] <= floors[pinned] * (1 + 1e-9))


def test_waterfill_rates_meet_floors(rng):
    for _ in range(100):
        n = int(rng.integers(1, 5))
        diag, rates, noise, p_max = _random_feasible_instance(rng, n)
        alloc = waterfill(diag, rates, noise, p_max)
        achieved = np.log2(1.0 + alloc.powers / (noise * diag))
        assert np.all(achieved >= rates - 1e-9)


def test_waterfill_matches_active_set_oracle(rng):
    for _ in range(150):
        n = int(rng.integers(1, 5))
        diag, rates, noise, p_max = _random_feasible_instance(rng, n)
        alloc = waterfill(diag, rates, noise, p_max)
        oracle_powers, oracle_value = waterfill_active_set_oracle(
            diag, rates, noise, p_max)
        value = float(np.sum(np.log2(1.0 + alloc.powers / (noise * diag))))
        assert value == pytest.approx(oracle_value, rel=1e-6)
        np.testing.assert_allclose(alloc.powers, oracle_powers, rtol=1e-5,
                                   atol=1e-9 * p_max)
