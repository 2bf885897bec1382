import math
from dataclasses import replace

import numpy as np
import pytest

from qscsim import reference
from qscsim.errors import ArgumentError, DegenerateChannelError, ValidationError
from qscsim.link import (
    CALIBRATED_DUTY_FACTOR,
    CALIBRATED_MISALIGNMENT,
    CapacityConfig,
    CapacityMode,
    ChannelParams,
    GateStats,
    binary_entropy,
    calibrate_duty_factor,
    calibrate_misalignment,
    capacity_lines,
    click_probability,
    info_rate,
    link_budget,
    qber_model,
    simulate_gates,
    transmittance,
)

# Independently evaluated entropy at the measured error rate, frozen.
H_AT_MEASURED_QBER = 0.2097075498355704


class TestChannelParams:
    def test_defaults_match_field_system(self):
        p = ChannelParams()
        assert (p.distance_km, p.loss_db_per_km) == (50.0, 0.2)
        assert (p.rep_rate_hz, p.pulse_width_s) == (1.25e9, 50e-12)
        assert (p.mu_signal, p.mu_decoy1, p.mu_decoy2) == (0.6, 0.2, 0.0)
        assert (p.det_efficiency, p.dark_count_per_gate) == (0.20, 1.2e-6)
        assert (p.spread_ratio, p.fec_ratio) == (192, 12)

    def test_probability_bounds_enforced(self):
        with pytest.raises(ValidationError):
            ChannelParams(det_efficiency=1.5)
        with pytest.raises(ValidationError):
            ChannelParams(mu_signal=-0.1)
        with pytest.raises(ValidationError):
            ChannelParams(spread_ratio=0)
        with pytest.raises(ValidationError):
            ChannelParams(duty_factor=0.0)


class TestTransmittance:
    def test_ten_db_of_loss(self):
        assert transmittance(ChannelParams()) == pytest.approx(0.1, rel=1e-12)

    def test_zero_distance(self):
        assert transmittance(ChannelParams(distance_km=0.0)) == 1.0

    def test_hundred_km(self):
        assert transmittance(ChannelParams(distance_km=100.0)) == pytest.approx(0.01, rel=1e-12)

    def test_negative_distance_rejected(self):
        with pytest.raises(ArgumentError):
            transmittance(ChannelParams(distance_km=-1.0))

    def test_strictly_decreasing(self):
        t = [transmittance(ChannelParams(distance_km=d)) for d in (0, 10, 25, 50, 80)]
        assert all(a > b for a, b in zip(t, t[1:]))
        assert transmittance(ChannelParams(loss_db_per_km=0.3)) < transmittance(ChannelParams())


class TestClickProbability:
    def test_vacuum_clicks_only_from_darks(self):
        p = ChannelParams()
        assert click_probability(0.0, p) == p.dark_count_per_gate

    def test_operating_point_value(self):
        p = ChannelParams()
        expected = 1.0 - (1.0 - 1.2e-6) * math.exp(-0.6 * 0.1 * 0.2)
        assert click_probability(0.6, p) == pytest.approx(expected, rel=1e-12)
        assert click_probability(0.6, p) == pytest.approx(0.0119297, abs=5e-7)

    def test_monotone_in_mu_and_saturating(self):
        p = ChannelParams()
        values = [click_probability(mu, p) for mu in (0.0, 0.2, 0.6, 5.0, 500.0)]
        assert all(a < b for a, b in zip(values, values[1:]))
        assert values[-1] < 1.0
        assert values[-1] == pytest.approx(1.0, abs=1e-4)

    def test_negative_mu_rejected(self):
        with pytest.raises(ArgumentError):
            click_probability(-0.1, ChannelParams())


class TestQberModel:
    def test_noiseless(self):
        p = ChannelParams(dark_count_per_gate=0.0, misalignment_error=0.0)
        assert qber_model(p) == 0.0

    def test_all_dark_clicks_are_random(self):
        p = ChannelParams(mu_signal=0.0)
        assert qber_model(p) == 0.5

    def test_calibrated_operating_point(self):
        assert qber_model(ChannelParams()) == pytest.approx(0.0331, abs=1e-4)

    def test_degenerate_channel_rejected(self):
        p = ChannelParams(mu_signal=0.0, dark_count_per_gate=0.0)
        with pytest.raises(DegenerateChannelError):
            qber_model(p)

    def test_bounded_and_decreasing_in_photon_yield(self):
        base = ChannelParams()
        q = [qber_model(replace(base, mu_signal=mu)) for mu in (0.05, 0.2, 0.6)]
        assert all(a > b for a, b in zip(q, q[1:]))
        for value in q:
            assert base.misalignment_error <= value <= 0.5


class TestInfoRate:
    def test_unit_duty_ceiling(self):
        p = replace(ChannelParams(), duty_factor=1.0)
        p_click = 1.0 - (1.0 - 1.2e-6) * math.exp(-0.012)
        expected = 1.25e9 * p_click / 192 * 12 / 13
        assert info_rate(p) == pytest.approx(expected, rel=1e-12)
        assert info_rate(p) == pytest.approx(71.7e3, rel=1e-3)

    def test_calibrated_rate(self):
        assert info_rate(ChannelParams()) == pytest.approx(37360.0, rel=5e-3)

    def test_longer_fiber_is_slower(self):
        assert info_rate(ChannelParams(distance_km=100.0)) < info_rate(ChannelParams())

    def test_linear_in_duty_factor(self):
        p = ChannelParams()
        half = replace(p, duty_factor=p.duty_factor / 2)
        assert info_rate(half) == pytest.approx(info_rate(p) / 2, rel=1e-12)

    def test_decreasing_in_spread_ratio(self):
        assert info_rate(ChannelParams(spread_ratio=384)) < info_rate(ChannelParams())


class TestBinaryEntropy:
    def test_maximum_at_half(self):
        assert binary_entropy(0.5) == 1.0

    def test_boundaries(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_measured_operating_point(self):
        assert binary_entropy(0.0331) == pytest.approx(H_AT_MEASURED_QBER, abs=1e-15)
        assert binary_entropy(0.0331) == pytest.approx(0.20966, abs=5e-5)

    def test_symmetry(self):
        for p in (0.1, 0.25, 0.4):
            assert binary_entropy(p) == pytest.approx(binary_entropy(1 - p), abs=1e-15)

    def test_out_of_range_rejected(self):
        for bad in (-0.1, 1.1):
            with pytest.raises(ArgumentError):
                binary_entropy(bad)


class TestCapacityLines:
    def test_reference_constants(self):
        shannon, wyner = capacity_lines(ChannelParams(), CapacityConfig())
        assert shannon == 1_496_530.0
        assert wyner == 560_200.0
        assert shannon == reference.SHANNON_CAPACITY_BPS
        assert wyner == reference.SECRECY_CAPACITY_BPS

    def test_model_clamps_secrecy_at_zero(self):
        p = ChannelParams(dark_count_per_gate=0.0, misalignment_error=0.0)
        config = CapacityConfig(mode=CapacityMode.MODEL, eve_error=0.5)
        shannon, wyner = capacity_lines(p, config)
        r_det = p.rep_rate_hz * click_probability(p.mu_signal, p) * p.duty_factor
        assert shannon == pytest.approx(r_det, rel=1e-12)
        assert wyner == 0.0

    def test_model_ordering_invariant(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            p = ChannelParams(
                distance_km=float(rng.uniform(1, 80)),
                mu_signal=float(rng.uniform(0.05, 1.0)),
                misalignment_error=float(rng.uniform(0.0, 0.2)),
            )
            config = CapacityConfig(mode=CapacityMode.MODEL,
                                    eve_error=float(rng.uniform(0.0, 1.0)))
            shannon, wyner = capacity_lines(p, config)
            assert shannon >= wyner >= 0.0


class TestCalibration:
    def test_misalignment_reproduces_measured_qber(self):
        p = ChannelParams()
        mis = calibrate_misalignment(p, reference.MEASURED_QBER)
        assert qber_model(replace(p, misalignment_error=mis)) == pytest.approx(
            reference.MEASURED_QBER, abs=1e-15)

    def test_duty_factor_reproduces_measured_rate(self):
        p = ChannelParams()
        duty = calibrate_duty_factor(p, reference.MEASURED_INFO_RATE_BPS)
        assert info_rate(replace(p, duty_factor=duty)) == pytest.approx(
            reference.MEASURED_INFO_RATE_BPS, rel=1e-12)

    def test_frozen_defaults_equal_fresh_calibration(self):
        p = ChannelParams()
        assert calibrate_misalignment(p, reference.MEASURED_QBER) == CALIBRATED_MISALIGNMENT
        assert calibrate_duty_factor(p, reference.MEASURED_INFO_RATE_BPS) == CALIBRATED_DUTY_FACTOR
        assert p.misalignment_error == CALIBRATED_MISALIGNMENT
        assert p.duty_factor == CALIBRATED_DUTY_FACTOR

    def test_unreachable_targets_rejected(self):
        with pytest.raises(ArgumentError):
            calibrate_duty_factor(ChannelParams(), 1e9)
        with pytest.raises(ArgumentError):
            calibrate_misalignment(ChannelParams(), 0.6)


class TestMonteCarlo:
    def test_matches_model_within_three_sigma(self):
        p = ChannelParams()
        gates = 1_000_000
        stats = simulate_gates(p, gates, seed=42)
        p_click = click_probability(p.mu_signal, p)
        click_sigma = math.sqrt(gates * p_click * (1 - p_click))
        assert abs(stats.clicks - gates * p_click) <= 3 * click_sigma
        q = qber_model(p)
        qber_sigma = math.sqrt(q * (1 - q) / stats.clicks)
        assert abs(stats.qber_hat - q) <= 3 * qber_sigma

    def test_deterministic_per_seed(self):
        p = ChannelParams()
        a = simulate_gates(p, 200_000, seed=7)
        b = simulate_gates(p, 200_000, seed=7)
        assert a == b
        c = simulate_gates(p, 200_000, seed=8)
        assert c != a

    def test_rate_hat_tracks_info_rate(self):
        p = ChannelParams()
        stats = simulate_gates(p, 500_000, seed=9)
        assert stats.rate_hat_bps == pytest.approx(info_rate(p), rel=0.05)

    def test_csv_row(self):
        stats = GateStats(seed=1, gates=10, clicks=2, errors=1,
                          qber_hat=0.5, rate_hat_bps=100.0)
        assert GateStats.CSV_HEADER == "seed,gates,clicks,errors,qber_hat,rate_hat"
        assert stats.csv_row() == "1,10,2,1,0.5,100.0"

    def test_gate_count_validated(self):
        with pytest.raises(ArgumentError):
            simulate_gates(ChannelParams(), 0, seed=1)


class TestLinkBudget:
    def test_budget_is_consistent(self):
        p = ChannelParams()
        budget = link_budget(p)
        assert budget.transmittance == transmittance(p)
        assert budget.p_click_signal == click_probability(p.mu_signal, p)
        assert budget.p_dark == p.dark_count_per_gate
        assert budget.qber == qber_model(p)
        assert budget.raw_detection_rate_hz == pytest.approx(
            p.rep_rate_hz * budget.p_click_signal, rel=1e-12)
        assert budget.info_rate_bps == info_rate(p)
        assert 0.0 <= budget.qber <= 0.5
