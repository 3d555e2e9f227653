"""Channel models, profiles, and frequency-domain covariance statistics."""
import math

import numpy as np
import pytest

from mploc import (
    ChannelCovariance,
    ChannelRealization,
    ClusterChannelParams,
    ExpPdpParams,
    FrequencyGrid,
    Pdp,
    cached_channel_covariance,
    channel_covariance,
    eigen_factor,
    empirical_pdp,
    exp_pdp,
    frequency_response,
    sample_cluster_channel,
    sample_rayleigh_channel,
    steering_matrix,
    steering_vector,
)
from mploc.errors import (
    ConfigurationError,
    DegenerateChannelError,
    DelayRangeError,
    ValidationError,
)


def test_frequency_grid_layout():
    grid = FrequencyGrid(num_bins=4, sample_rate_hz=100e6)
    assert np.array_equal(grid.frequencies_hz, [0.0, 25e6, 50e6, 75e6])
    assert grid.window_s == pytest.approx(40e-9, rel=1e-15)
    with pytest.raises(ConfigurationError):
        FrequencyGrid(num_bins=1, sample_rate_hz=100e6)
    with pytest.raises(ConfigurationError):
        FrequencyGrid(num_bins=8, sample_rate_hz=0.0)


def test_steering_vector_values():
    grid = FrequencyGrid(num_bins=4, sample_rate_hz=100e6)
    tau = 10e-9
    g = steering_vector(tau, grid)
    assert np.abs(g) == pytest.approx(np.ones(4), abs=1e-15)
    expected = np.exp(-2j * np.pi * grid.frequencies_hz * tau)
    np.testing.assert_allclose(g, expected, rtol=1e-15)


def test_steering_matrix_stacks_columns():
    grid = FrequencyGrid(num_bins=5, sample_rate_hz=50e6)
    delays = np.array([0.0, 7e-9, 21e-9])
    mat = steering_matrix(delays, grid)
    assert mat.shape == (5, 3)
    for j, tau in enumerate(delays):
        np.testing.assert_allclose(mat[:, j], steering_vector(tau, grid), rtol=1e-15)


def test_exp_pdp_values():
    params = ExpPdpParams(
        mu0_los=0.45, mu0_nlos=0.1, mu1_s=20e-9, delta_tau_s=1e-9, num_taps=100
    )
    pdp = exp_pdp(params)
    assert pdp.variances[0] == 0.45
    assert pdp.variances[1] == pytest.approx(0.1 * math.exp(-1.0 / 20.0), rel=1e-12)
    assert pdp.variances[10] == pytest.approx(0.1 * math.exp(-10.0 / 20.0), rel=1e-12)
    assert pdp.num_taps == 100
    assert pdp.total_power == pytest.approx(pdp.variances.sum(), rel=1e-15)


def test_exp_pdp_parameter_validation():
    with pytest.raises(ConfigurationError):
        ExpPdpParams(mu0_los=-0.1, mu0_nlos=0.1, mu1_s=1e-9, delta_tau_s=1e-9, num_taps=4)
    with pytest.raises(ConfigurationError):
        ExpPdpParams(mu0_los=0.0, mu0_nlos=0.0, mu1_s=1e-9, delta_tau_s=1e-9, num_taps=4)
    with pytest.raises(ConfigurationError):
        ExpPdpParams(mu0_los=0.1, mu0_nlos=0.1, mu1_s=0.0, delta_tau_s=1e-9, num_taps=4)


def test_pdp_validation():
    with pytest.raises(ConfigurationError):
        Pdp(delta_tau_s=1e-9, variances=np.array([0.1, -0.2]))
    with pytest.raises(ConfigurationError):
        Pdp(delta_tau_s=1e-9, variances=np.zeros(3))
    pdp = Pdp(delta_tau_s=2e-9, variances=np.array([0.5, 0.25]))
    assert np.array_equal(pdp.delays_s(), [0.0, 2e-9])
    assert Pdp.from_dict(pdp.to_dict()).total_power == pdp.total_power


def test_rayleigh_channel_draw():
    pdp = Pdp(delta_tau_s=1e-9, variances=np.array([1.0, 0.0, 0.5]))
    a = sample_rayleigh_channel(pdp, np.random.default_rng(3))
    b = sample_rayleigh_channel(pdp, np.random.default_rng(3))
    assert np.array_equal(a.gains, b.gains)
    assert np.array_equal(a.delays_s, pdp.delays_s())
    assert a.gains[1] == 0.0  # zero-variance taps come out exactly zero


def test_rayleigh_channel_matches_profile_variance():
    pdp = Pdp(delta_tau_s=1e-9, variances=np.array([2.0, 0.5]))
    rng = np.random.default_rng(17)
    draws = np.stack([sample_rayleigh_channel(pdp, rng).gains for _ in range(4000)])
    measured = np.mean(np.abs(draws) ** 2, axis=0)
    np.testing.assert_allclose(measured, pdp.variances, rtol=0.08)


def test_channel_realization_validation():
    with pytest.raises(ValidationError):
        ChannelRealization(delays_s=np.array([1e-9, 2e-9]), gains=np.ones(2))
    with pytest.raises(ValidationError):
        ChannelRealization(delays_s=np.array([0.0, 2e-9, 1e-9]), gains=np.ones(3))


def test_cluster_channel_draw():
    params = ClusterChannelParams(
        cluster_rate_hz=2e7,
        ray_rate_hz=4e8,
        cluster_decay_s=30e-9,
        ray_decay_s=10e-9,
        span_s=100e-9,
    )
    a = sample_cluster_channel(params, np.random.default_rng(29))
    b = sample_cluster_channel(params, np.random.default_rng(29))
    assert np.array_equal(a.delays_s, b.delays_s)
    assert np.array_equal(a.gains, b.gains)
    assert a.delays_s[0] == 0.0
    assert np.all(np.diff(a.delays_s) >= 0)
    assert a.delays_s[-1] <= params.span_s


def test_cluster_params_validation():
    with pytest.raises(ConfigurationError):
        ClusterChannelParams(
            cluster_rate_hz=-1.0,
            ray_rate_hz=1e8,
            cluster_decay_s=1e-8,
            ray_decay_s=1e-8,
            span_s=1e-7,
        )
    with pytest.raises(ConfigurationError):
        ClusterChannelParams(
            cluster_rate_hz=1e7,
            ray_rate_hz=1e8,
            cluster_decay_s=1e-8,
            ray_decay_s=1e-8,
            span_s=0.0,
        )


def test_empirical_pdp_bins_power_on_the_grid():
    real = ChannelRealization(
        delays_s=np.array([0.0, 1.1e-9, 2.9e-9]),
        gains=np.array([1.0, 2.0, 1.0 + 1.0j]),
    )
    pdp = empirical_pdp([real], delta_tau_s=1e-9, num_taps=4)
    np.testing.assert_allclose(pdp.variances, [1.0, 4.0, 0.0, 2.0], rtol=1e-12)


def test_empirical_pdp_conserves_total_power():
    base = Pdp(delta_tau_s=1e-9, variances=np.linspace(1.0, 0.1, 8))
    rng = np.random.default_rng(31)
    draws = [sample_rayleigh_channel(base, rng) for _ in range(200)]
    measured = empirical_pdp(draws, delta_tau_s=1e-9, num_taps=8)
    drawn_power = np.mean([np.sum(np.abs(d.gains) ** 2) for d in draws])
    assert measured.total_power == pytest.approx(drawn_power, rel=1e-12)


def test_empirical_pdp_rejects_out_of_range_delays():
    real = ChannelRealization(delays_s=np.array([0.0, 5e-9]), gains=np.ones(2))
    with pytest.raises(DelayRangeError):
        empirical_pdp([real], delta_tau_s=1e-9, num_taps=5)


def test_frequency_response_is_a_steered_sum():
    grid = FrequencyGrid(num_bins=6, sample_rate_hz=100e6)
    real = ChannelRealization(
        delays_s=np.array([0.0, 3e-9]), gains=np.array([1.0 + 0.5j, -0.25j])
    )
    eta = frequency_response(real, grid)
    expected = real.gains[0] * steering_vector(0.0, grid) + real.gains[1] * steering_vector(
        3e-9, grid
    )
    np.testing.assert_allclose(eta, expected, rtol=1e-14)


def test_channel_covariance_factorization():
    grid = FrequencyGrid(num_bins=8, sample_rate_hz=100e6)
    pdp = Pdp(delta_tau_s=1e-9, variances=np.array([1.0, 0.0, 0.3, 0.1]))
    cov = channel_covariance(pdp, grid)
    cov.validate()
    assert cov.num_bins == 8
    assert cov.rank_bound == 3  # zero-variance taps contribute no factor column
    np.testing.assert_allclose(
        cov.matrix, cov.factor @ cov.factor.conj().T, rtol=0, atol=1e-12
    )
    eigs = np.linalg.eigvalsh(cov.matrix)
    assert eigs[0] >= -1e-10 * eigs[-1]
    # Diagonal entries all equal the total power on a uniform phase ramp grid.
    np.testing.assert_allclose(np.diag(cov.matrix).real, pdp.total_power, rtol=1e-12)


def test_eigen_factor_compresses_long_tap_grids():
    grid = FrequencyGrid(num_bins=4, sample_rate_hz=100e6)
    pdp = exp_pdp(
        ExpPdpParams(mu0_los=0.5, mu0_nlos=0.2, mu1_s=6e-9, delta_tau_s=1e-9, num_taps=30)
    )
    cov = channel_covariance(pdp, grid)
    assert cov.rank_bound == 30
    packed = eigen_factor(cov.matrix)
    assert packed.rank_bound <= grid.num_bins
    np.testing.assert_allclose(
        packed.factor @ packed.factor.conj().T, cov.matrix, rtol=0, atol=1e-8
    )
    with pytest.raises(DegenerateChannelError):
        eigen_factor(np.zeros((4, 4)))


def test_channel_covariance_validate_rejects_bad_factor():
    good = channel_covariance(
        Pdp(delta_tau_s=1e-9, variances=np.array([1.0])),
        FrequencyGrid(num_bins=4, sample_rate_hz=100e6),
    )
    bad = ChannelCovariance(matrix=good.matrix, factor=2.0 * good.factor)
    with pytest.raises(ValidationError):
        bad.validate()


def test_cached_channel_covariance_round_trips(tmp_path):
    grid = FrequencyGrid(num_bins=8, sample_rate_hz=100e6)
    pdp = Pdp(delta_tau_s=1e-9, variances=np.array([1.0, 0.4]))
    first = cached_channel_covariance(pdp, grid, tmp_path)
    files = list(tmp_path.glob("cov_*.npz"))
    assert len(files) == 1
    again = cached_channel_covariance(pdp, grid, tmp_path)
    np.testing.assert_array_equal(first.matrix, again.matrix)
    np.testing.assert_array_equal(first.factor, again.factor)
    other = Pdp(delta_tau_s=1e-9, variances=np.array([1.0, 0.5]))
    cached_channel_covariance(other, grid, tmp_path)
    assert len(list(tmp_path.glob("cov_*.npz"))) == 2
