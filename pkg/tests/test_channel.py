import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_config
from xlmimo import (SystemConfig, UserPosition, antenna_positions,
                    los_channel_vector, multi_state_channel,
                    nlos_covariance_diag, sample_channel_state,
                    sample_nlos_vector, sample_user_position, sample_users,
                    user_antenna_distance)
from xlmimo.channel import SPEED_OF_LIGHT, radius_from_uniform
from xlmimo.errors import ConfigInvalid


def test_table_defaults():
    cfg = SystemConfig()
    assert cfg.num_antennas == 1000
    assert cfg.num_users == 1000
    assert cfg.carrier_freq == 4.0e9
    assert cfg.bandwidth == 20.0e6
    assert cfg.antenna_spacing == 0.0375
    assert cfg.epsilon == 0.4
    assert cfg.pathloss_exp_los == 2.20
    assert cfg.pathloss_exp_nlos == 3.67
    assert cfg.ref_attenuation_los == 1e-4
    assert cfg.ref_attenuation_nlos == 10 ** -3.85
    assert cfg.min_rate_range == (5.0, 15.0)
    assert (cfg.r_min, cfg.r_max) == (30.0, 1000.0)
    assert cfg.noise_power == pytest.approx(7.96e-14, rel=1e-3)
    assert cfg.wavelength == pytest.approx(SPEED_OF_LIGHT / 4e9)
    assert cfg.aperture == pytest.approx(999 * 0.0375)


@pytest.mark.parametrize("field,value", [
    ("epsilon", 1.5),
    ("epsilon", 0.0),
    ("los_probability", -0.1),
    ("los_probability", 1.5),
    ("r_min", 0.0),
    ("r_max", 10.0),            # below default r_min
    ("rng_seed", -1),
    ("min_rate_range", (5.0, 100.0)),
    ("antenna_spacing", 0.01),  # below half a wavelength at 4 GHz
    ("tx_power_budget", 0.0),
])
def test_config_validation(field, value):
    with pytest.raises(ConfigInvalid):
        SystemConfig(**{field: value})


def test_antenna_positions_single_element():
    cfg = make_config(num_antennas=1, antenna_spacing=0.0375)
    assert antenna_positions(cfg).tolist() == [0.0]


def test_antenna_positions_symmetric_pair():
    cfg = make_config(num_antennas=2, antenna_spacing=2.0)
    assert antenna_positions(cfg).tolist() == [-1.0, 1.0]


def test_antenna_positions_odd_centers_element():
    cfg = make_config(num_antennas=3, antenna_spacing=1.0)
    assert antenna_positions(cfg).tolist() == [-1.0, 0.0, 1.0]
    assert cfg.aperture == 2.0


def test_distance_boresight_symmetry():
    pos = UserPosition(r=1.0, theta=0.0)
    d = user_antenna_distance(pos, np.array([-1.0, 1.0]))
    assert d == pytest.approx([math.sqrt(2.0), math.sqrt(2.0)])


def test_distance_collinear_geometry():
    pos = UserPosition(r=3.0, theta=math.pi / 2)  # user on the array axis
    assert user_antenna_distance(pos, -1.0) == pytest.approx(4.0)
    assert user_antenna_distance(pos, 1.0) == pytest.approx(2.0)


def test_distance_matches_planar_norm_oracle():
    pos = UserPosition(r=30.0, theta=0.3)
    offset = 18.73
    user_xy = np.array(pos.xy)
    antenna_xy = np.array([offset, 0.0])
    expected = np.linalg.norm(user_xy - antenna_xy)
    assert user_antenna_distance(pos, offset) == pytest.approx(expected, rel=1e-12)


@given(r=st.floats(1.0, 1e4), theta=st.floats(-math.pi, math.pi),
       offset=st.floats(-50.0, 50.0))
def test_distance_planar_norm_property(r, theta, offset):
    pos = UserPosition(r=r, theta=theta)
    expected = math.hypot(r * math.sin(theta) - offset, r * math.cos(theta))
    assert user_antenna_distance(pos, offset) == pytest.approx(expected, rel=1e-9)


def _unit_wavelength_config(**overrides):
    # wavelength exactly 1 m; element spacing at the half-wavelength floor
    defaults = dict(num_antennas=1, antenna_spacing=0.5,
                    carrier_freq=SPEED_OF_LIGHT, ref_attenuation_los=1.0,
                    pathloss_exp_los=2.0, r_min=1.0, r_max=100.0, num_users=4)
    defaults.update(overrides)
    return SystemConfig(**defaults)


def test_los_vector_hand_case():
    cfg = _unit_wavelength_config()
    a = los_channel_vector(UserPosition(r=2.0, theta=0.0), cfg)
    # amplitude sqrt(1/2^2) = 1/2; phase -4*pi wraps to 0
    assert a.shape == (1,)
    assert a[0] == pytest.approx(0.5 + 0.0j, abs=1e-12)


def test_los_vector_boresight_symmetry():
    cfg = make_config(num_antennas=2)
    a = los_channel_vector(UserPosition(r=50.0, theta=0.0), cfg)
    assert abs(a[0]) == pytest.approx(abs(a[1]), rel=1e-12)
    assert np.angle(a[0]) == pytest.approx(np.angle(a[1]), rel=1e-12)


@given(r=st.floats(30.0, 1000.0), theta=st.floats(-math.pi, math.pi))
@settings(max_examples=25)
def test_los_vector_phase_property(r, theta):
    cfg = make_config(num_antennas=8)
    pos = UserPosition(r=r, theta=theta)
    a = los_channel_vector(pos, cfg)
    r_m = user_antenna_distance(pos, antenna_positions(cfg))
    expected = np.exp(-2j * np.pi * r_m / cfg.wavelength)
    np.testing.assert_allclose(a / np.abs(a), expected, atol=1e-10)


def test_nlos_covariance_diag_hand_case():
    cfg = _unit_wavelength_config(ref_attenuation_nlos=1.0, pathloss_exp_nlos=2.0)
    diag = nlos_covariance_diag(UserPosition(r=10.0, theta=0.0), cfg)
    assert diag == pytest.approx([0.01])


def test_nlos_covariance_decreases_with_distance():
    cfg = make_config(num_antennas=4)
    near = nlos_covariance_diag(UserPosition(r=50.0, theta=0.1), cfg)
    far = nlos_covariance_diag(UserPosition(r=500.0, theta=0.1), cfg)
    assert np.all(far < near)


def test_nlos_vector_sample_moments():
    cfg = make_config(num_antennas=4)
    pos = UserPosition(r=100.0, theta=0.2)
    expected_var = nlos_covariance_diag(pos, cfg)
    rng = np.random.default_rng(7)
    draws = np.array([sample_nlos_vector(pos, cfg, rng) for _ in range(100_000)])
    var = np.mean(np.abs(draws) ** 2, axis=0)
    np.testing.assert_allclose(var, expected_var, rtol=0.05)
    mean = draws.mean(axis=0)
    assert np.all(np.abs(mean) ** 2 < 0.01 * expected_var)
    # cross-antenna correlation of the fading should vanish
    centered = draws - mean
    cov = centered.conj().T @ centered / draws.shape[0]
    corr = np.abs(cov) / np.sqrt(np.outer(var, var))
    np.fill_diagonal(corr, 0.0)
    assert corr.max() < 0.02


def test_nlos_vector_seed_determinism():
    cfg = make_config(num_antennas=6)
    pos = UserPosition(r=80.0, theta=-0.4)
    a = sample_nlos_vector(pos, cfg, np.random.default_rng(42))
    b = sample_nlos_vector(pos, cfg, np.random.default_rng(42))
    assert np.array_equal(a, b)


def test_channel_state_degenerate_probabilities(rng):
    assert all(sample_channel_state(1.0, rng) == 1 for _ in range(1000))
    assert all(sample_channel_state(0.0, rng) == 0 for _ in range(1000))


def test_channel_state_sample_mean():
    rng = np.random.default_rng(11)
    draws = [sample_channel_state(0.25, rng) for _ in range(100_000)]
    assert np.mean(draws) == pytest.approx(0.25, abs=0.01)


def test_multi_state_selects_los_branch(rng):
    cfg = make_config()
    pos = UserPosition(r=60.0, theta=0.5)
    a = multi_state_channel(pos, 1, cfg, rng)
    assert np.array_equal(a, los_channel_vector(pos, cfg))


def test_multi_state_selects_nlos_branch():
    cfg = make_config()
    pos = UserPosition(r=60.0, theta=0.5)
    a = multi_state_channel(pos, 0, cfg, np.random.default_rng(3))
    b = sample_nlos_vector(pos, cfg, np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_los_channel_power_matches_summation_oracle(rng):
    cfg = make_config(num_antennas=32)
    pos = UserPosition(r=45.0, theta=-1.0)
    a = multi_state_channel(pos, 1, cfg, rng)
    r_m = user_antenna_distance(pos, antenna_positions(cfg))
    expected = np.sum(cfg.ref_attenuation_los / r_m ** cfg.pathloss_exp_los)
    assert np.sum(np.abs(a) ** 2) == pytest.approx(expected, rel=1e-12)


def test_radius_inverse_cdf_endpoints():
    assert radius_from_uniform(0.0, 30.0, 1000.0) == pytest.approx(30.0)
    assert radius_from_uniform(1.0, 30.0, 1000.0) == pytest.approx(1000.0)


def test_position_sample_moments():
    cfg = make_config()
    rng = np.random.default_rng(5)
    radii = np.array([sample_user_position(cfg, rng).r for _ in range(100_000)])
    expected = (2.0 / 3.0) * (cfg.r_max**3 - cfg.r_min**3) / (cfg.r_max**2 - cfg.r_min**2)
    assert radii.mean() == pytest.approx(expected, rel=0.01)
    assert radii.min() >= cfg.r_min and radii.max() <= cfg.r_max


def test_near_field_amplitude_varies_across_aperture():
    cfg = SystemConfig()  # reference geometry: 1000 elements, 37.5 m aperture
    a = los_channel_vector(UserPosition(r=cfg.r_min, theta=0.0), cfg)
    amps = np.abs(a)
    assert amps.max() / amps.min() > 1.0


def test_nlos_favorable_propagation():
    cfg = make_config(num_antennas=1024)
    rng = np.random.default_rng(17)
    corrs = []
    for _ in range(200):
        pos = sample_user_position(cfg, rng)
        a = sample_nlos_vector(pos, cfg, rng)
        b = sample_nlos_vector(pos, cfg, rng)
        corrs.append(abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))
    assert np.mean(corrs) < 0.1


def test_population_determinism():
    cfg = make_config(num_users=20, los_probability=0.5)
    first = sample_users(cfg, np.random.default_rng(99))
    second = sample_users(cfg, np.random.default_rng(99))
    for u, v in zip(first, second):
        assert u.position == v.position
        assert u.state == v.state
        assert u.min_rate == v.min_rate
        assert np.array_equal(u.channel, v.channel)
