import math

import numpy as np
import pytest

from midcsim.droop import DroopSettings, droop_power_order, update_coefficient
from midcsim.errors import NegativeCoefficientError

W50 = 2.0 * math.pi * 50.0


def settings(**kw):
    base = dict(k_droop=20.0, p_nominal=0.66, omega_nominal=W50,
                p_ceiling=0.924, deadband=0.0004, armed=True,
                signal_delay=0.05)
    base.update(kw)
    return DroopSettings(**base)


def test_step_response_arithmetic():
    # 0.66 + 20 * (0.35 / 50) = 0.80
    p = droop_power_order(2.0 * math.pi * 49.65, settings())
    assert p == pytest.approx(0.80, abs=1e-9)


def test_zero_deviation_returns_nominal_exactly():
    assert droop_power_order(W50, settings()) == 0.66


def test_ceiling_saturation():
    s = settings(k_droop=1000.0, p_ceiling=0.73)
    assert droop_power_order(2.0 * math.pi * 49.65, s) == 0.73


def test_output_floored_at_zero():
    s = settings(k_droop=1000.0)
    assert droop_power_order(2.0 * math.pi * 51.0, s) == 0.0


def test_overfrequency_reduces_symmetrically():
    p = droop_power_order(2.0 * math.pi * 50.35, settings())
    assert p == pytest.approx(0.52, abs=1e-9)


def test_deadband():
    s = settings(deadband=0.001)  # 0.05 Hz
    inside = droop_power_order(2.0 * math.pi * 49.96, s)
    outside = droop_power_order(2.0 * math.pi * 49.90, s)
    assert inside == s.p_nominal
    assert outside > s.p_nominal


def test_disarmed_is_identity_on_nominal():
    s = settings(armed=False, k_droop=500.0)
    for f in (45.0, 49.0, 50.0, 51.0, 60.0):
        assert droop_power_order(2.0 * math.pi * f, s) == s.p_nominal


def test_linearity_in_active_region():
    s = settings(p_ceiling=10.0, p_nominal=0.66)
    rng = np.random.RandomState(11)
    for _ in range(200):
        d1, d2 = rng.uniform(0.001, 0.05, 2)
        if abs(d1 - d2) < 1e-6:
            continue
        p1 = droop_power_order(W50 * (1.0 - d1), s)
        p2 = droop_power_order(W50 * (1.0 - d2), s)
        slope = (p1 - p2) / (d1 - d2)
        assert slope == pytest.approx(s.k_droop, rel=1e-9)


def test_output_always_within_bounds():
    s = settings(k_droop=80.0)
    rng = np.random.RandomState(12)
    for _ in range(500):
        w = rng.uniform(0.5, 1.5) * W50
        p = droop_power_order(w, s)
        assert 0.0 <= p <= s.p_ceiling


def test_nonpositive_frequency_rejected():
    with pytest.raises(ValueError):
        droop_power_order(0.0, settings())


class TestUpdateCoefficient:
    def test_sets_and_arms(self):
        s = settings(armed=False, k_droop=20.0)
        out = update_coefficient(s, 30.0)
        assert out.k_droop == 30.0
        assert out.armed
        assert out.p_nominal == s.p_nominal
        assert out.signal_delay == s.signal_delay

    def test_same_value_only_arms(self):
        s = settings(armed=False)
        out = update_coefficient(s, s.k_droop)
        assert out == settings(armed=True)

    def test_zero_gain_pins_output_at_nominal(self):
        s = update_coefficient(settings(armed=False), 0.0)
        for f in (48.0, 49.5, 50.0, 52.0):
            assert droop_power_order(2.0 * math.pi * f, s) == s.p_nominal

    def test_negative_rejected(self):
        with pytest.raises(NegativeCoefficientError):
            update_coefficient(settings(), -1.0)


class TestValidation:
    def test_negative_gain(self):
        with pytest.raises(ValueError):
            settings(k_droop=-1.0)

    def test_ceiling_below_nominal(self):
        with pytest.raises(ValueError):
            settings(p_ceiling=0.5)

    def test_negative_deadband(self):
        with pytest.raises(ValueError):
            settings(deadband=-0.1)
