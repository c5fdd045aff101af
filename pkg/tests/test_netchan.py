import numpy as np
import pytest

from dacom import netchan
from dacom.netchan import CalibrationError, RadioParams


def params(**kw):
    defaults = dict(bandwidth_hz=1e6, tx_power_w=1.0, noise_power=0.5,
                    interference=0.5, pathloss_db_per_unit=1.0, message_bits=10_000)
    defaults.update(kw)
    return RadioParams(**defaults)


# ---------------------------------------------------------------------------
# sinr


def test_sinr_at_zero_distance_is_power_over_noise():
    p = params(tx_power_w=1.0, noise_power=1.0, interference=0.0)
    assert netchan.sinr(p, 0.0) == 1.0


def test_sinr_ten_db_pathloss_gives_tenth():
    p = params(tx_power_w=1.0, noise_power=1.0, interference=0.0,
               pathloss_db_per_unit=10.0)
    assert netchan.sinr(p, 1.0) == pytest.approx(0.1, rel=1e-12)


def test_sinr_three_db_value():
    # 2 / 10^0.3 evaluated at high precision
    p = params(tx_power_w=2.0, noise_power=0.5, interference=0.5,
               pathloss_db_per_unit=3.0)
    assert netchan.sinr(p, 1.0) == pytest.approx(2.0 / 10.0 ** 0.3, rel=1e-12)
    assert netchan.sinr(p, 1.0) == pytest.approx(1.0023744672861391, rel=1e-10)


def test_sinr_requires_positive_noise_plus_interference():
    # zero total noise+interference is constructible but not evaluable
    p = RadioParams(noise_power=0.0, interference=0.0)
    with pytest.raises(ValueError):
        netchan.sinr(p, 1.0)


def test_sinr_strictly_decreasing_in_distance():
    g = np.random.default_rng(0)
    for _ in range(50):
        p = params(tx_power_w=g.uniform(0.1, 10),
                   noise_power=g.uniform(0.01, 2), interference=g.uniform(0, 2),
                   pathloss_db_per_unit=g.uniform(0.1, 20))
        d = np.sort(g.uniform(0, 10, size=6))
        eta = netchan.sinr(p, d)
        assert np.all(np.diff(eta) < 0)


# ---------------------------------------------------------------------------
# bitrate and delay


def test_bitrate_known_values():
    p = params(bandwidth_hz=1e6)
    assert netchan.bitrate(p, 1.0) == pytest.approx(1e6)
    assert netchan.bitrate(p, 3.0) == pytest.approx(2e6)
    assert netchan.bitrate(p, 0.0) == 0.0


def test_delay_known_values():
    assert netchan.delay(params(message_bits=10 ** 6), 1e6) == pytest.approx(1.0)
    assert netchan.delay(params(message_bits=10 ** 6), 2e6) == pytest.approx(0.5)
    assert netchan.delay(params(message_bits=512), 1e6) == 512.0 / 1e6  # 5.12e-4 exactly


def test_zero_bitrate_means_unreachable():
    assert netchan.delay(params(), 0.0) == np.inf


def test_delay_times_bitrate_recovers_message_size():
    g = np.random.default_rng(1)
    p = params(message_bits=4096)
    rates = g.uniform(10.0, 1e8, size=100)
    np.testing.assert_allclose(netchan.delay(p, rates) * rates, 4096.0, rtol=1e-12)


def test_delay_increases_with_distance():
    g = np.random.default_rng(2)
    for _ in range(30):
        p = params(pathloss_db_per_unit=g.uniform(0.5, 10))
        d = np.sort(g.uniform(0, 20, size=5))
        l = netchan.delay(p, netchan.bitrate(p, netchan.sinr(p, d)))
        assert np.all(np.diff(l) > 0)


# ---------------------------------------------------------------------------
# channel_state


def test_two_colocated_agents_share_zero_distance_delay():
    p = params(pathloss_db_per_unit=0.0)
    st = netchan.channel_state([[0.3, 0.3], [0.3, 0.3]], p)
    expected = p.message_bits / (p.bandwidth_hz * np.log2(1.0 + 1.0))
    assert st.delay_matrix[0, 1] == pytest.approx(expected, rel=1e-12)
    assert st.delay_matrix[1, 0] == st.delay_matrix[0, 1]
    assert st.delay_matrix[0, 0] == 0.0 and st.delay_matrix[1, 1] == 0.0


def test_nearer_receiver_gets_message_sooner():
    p = params()
    st = netchan.channel_state([[0, 0], [1, 0], [3, 0]], p)
    assert st.delay_matrix[1, 0] < st.delay_matrix[2, 0]


def test_channel_state_noise_free_is_pure():
    p = params()
    pos = np.random.default_rng(3).uniform(-1, 1, size=(5, 2))
    a = netchan.channel_state(pos, p)
    b = netchan.channel_state(pos, p)
    assert np.array_equal(a.delay_matrix, b.delay_matrix)
    assert np.array_equal(a.bitrate_matrix, b.bitrate_matrix)


def test_channel_state_with_fixed_seed_is_reproducible():
    p = params()
    pos = np.random.default_rng(4).uniform(-1, 1, size=(4, 2))
    a = netchan.channel_state(pos, p, rng=np.random.default_rng(77), fading_sigma=0.4)
    b = netchan.channel_state(pos, p, rng=np.random.default_rng(77), fading_sigma=0.4)
    assert np.array_equal(a.delay_matrix, b.delay_matrix)


def test_symmetric_geometry_gives_symmetric_delays():
    p = params()
    pos = np.random.default_rng(5).uniform(-2, 2, size=(6, 2))
    st = netchan.channel_state(pos, p)
    np.testing.assert_allclose(st.delay_matrix, st.delay_matrix.T, rtol=0, atol=0)


def test_scaling_distances_never_decreases_any_delay():
    p = params()
    g = np.random.default_rng(6)
    for _ in range(20):
        pos = g.uniform(-1, 1, size=(4, 2))
        k = g.uniform(1.0, 5.0)
        base = netchan.channel_state(pos, p).delay_matrix
        scaled = netchan.channel_state(pos * k, p).delay_matrix
        assert np.all(scaled >= base)


def test_channel_state_needs_two_positions():
    with pytest.raises(ValueError):
        netchan.channel_state([[0.0, 0.0]], params())


# ---------------------------------------------------------------------------
# calibration


def unit_square_sampler(rng, trials):
    return rng.uniform(-1.0, 1.0, size=(trials, 4, 2))


def test_calibrate_hits_target_ratio():
    p = params()
    dt = 0.1
    rng = np.random.default_rng(10)
    s = netchan.calibrate_scale(0.30, dt, p, unit_square_sampler, trials=2000,
                                rng=rng)
    # independent Monte Carlo oracle at the calibrated scale
    check = netchan.mean_delay_ratio(p, dt, s, unit_square_sampler, 40_000,
                                     np.random.default_rng(999))
    assert abs(check * dt - 0.030) <= 0.001


def test_calibrate_is_nearly_fixed_point_when_already_matched():
    p = params()
    dt = 0.1
    s1 = netchan.calibrate_scale(0.30, dt, p, unit_square_sampler, trials=2000,
                                 rng=np.random.default_rng(11))
    achieved = netchan.mean_delay_ratio(p, dt, s1, unit_square_sampler, 2000,
                                        np.random.default_rng(11))
    s2 = netchan.calibrate_scale(achieved, dt, p, unit_square_sampler, trials=2000,
                                 rng=np.random.default_rng(11))
    assert s2 == pytest.approx(s1, rel=1e-3)


def test_doubling_message_bits_doubles_mean_delay_at_fixed_scale():
    dt = 0.1
    rng_seed = 12
    base = netchan.mean_delay_ratio(params(message_bits=5000), dt, 3.0,
                                    unit_square_sampler, 2000,
                                    np.random.default_rng(rng_seed))
    double = netchan.mean_delay_ratio(params(message_bits=10000), dt, 3.0,
                                      unit_square_sampler, 2000,
                                      np.random.default_rng(rng_seed))
    assert double == pytest.approx(2.0 * base, rel=1e-12)


def test_calibrate_rejects_non_bracketing_range():
    with pytest.raises(CalibrationError):
        netchan.calibrate_scale(0.30, 0.1, params(), unit_square_sampler,
                                trials=1000, rng=np.random.default_rng(13),
                                bracket=(1e-4, 2e-4))


def test_calibrate_validates_inputs():
    with pytest.raises(ValueError):
        netchan.calibrate_scale(1.5, 0.1, params(), unit_square_sampler, trials=1000)
    with pytest.raises(ValueError):
        netchan.calibrate_scale(0.3, 0.1, params(), unit_square_sampler, trials=10)
