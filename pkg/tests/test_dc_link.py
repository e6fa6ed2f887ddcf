import dataclasses
import math

import numpy as np
import pytest
from scipy.optimize import fsolve

from midcsim.dc_link import (
    apply_block,
    calibrate_converter,
    current_for_power,
    max_inverter_power,
    power_to_current_order,
    solve_steady_state,
    step_power_tracking,
)
from midcsim.errors import (
    AlphaOutOfRangeError,
    CosineDomainError,
    StepTooLargeError,
    VoltageFloorError,
)

_K_V0 = 3.0 * math.sqrt(2.0) / math.pi
_K_XC = 3.0 / math.pi


@pytest.fixture(scope="module")
def rated():
    return calibrate_converter(660.0, 600.0, k_max=1.4)


class TestPowerToCurrentOrder:
    def test_documented_operating_point(self, rated):
        # 0.66 p.u. on a 1000 MVA base at 600 kV is 1.1 kA
        i = power_to_current_order(0.66, 600.0, 1000.0, rated)
        assert i == pytest.approx(1.1, rel=1e-12)

    def test_zero_power(self, rated):
        assert power_to_current_order(0.0, 432.1, 1000.0, rated) == 0.0

    def test_division_arithmetic(self, rated):
        # 0.80 * 1000 / 595, evaluated independently
        i = power_to_current_order(0.80, 595.0, 1000.0, rated)
        assert i == pytest.approx(1.3445378151260505, abs=1e-12)

    def test_clamped_to_overload_ceiling(self, rated):
        i = power_to_current_order(5.0, 600.0, 1000.0, rated)
        assert i == rated.k_max * rated.i_rated

    def test_voltage_floor(self, rated):
        with pytest.raises(VoltageFloorError):
            power_to_current_order(0.66, 0.09 * rated.v_rated, 1000.0, rated)

    def test_custom_floor(self, rated):
        with pytest.raises(VoltageFloorError):
            power_to_current_order(0.66, 500.0, 1000.0, rated, u_d_floor=550.0)


class TestSolveSteadyState:
    def test_calibrated_rated_point(self, rated):
        st = solve_steady_state(1.1, rated)
        assert st.v_d_inv == pytest.approx(600.0, rel=1e-12)
        assert st.p_inv == pytest.approx(660.0, rel=1e-12)
        assert st.i_d == 1.1
        assert st.alpha == pytest.approx(math.radians(15.0), abs=1e-12)
        assert st.p_order == pytest.approx(0.66, rel=1e-12)
        assert not st.blocked

    def test_equation_residuals_on_returned_state(self, rated):
        # recompute the converter equations on the returned state
        for i_order in np.linspace(0.05, rated.i_max, 50):
            st = solve_steady_state(float(i_order), rated)
            drop_i = _K_XC * rated.n_bridges * rated.x_c_inv * st.i_d
            drop_r = _K_XC * rated.n_bridges * rated.x_c_rect * st.i_d
            r1 = st.v_d_rect - (rated.v_d0_rect * math.cos(st.alpha) - drop_r)
            r2 = st.v_d_inv - (rated.v_d0_inv * math.cos(rated.gamma_ref) - drop_i)
            r3 = st.v_d_rect - (st.v_d_inv + rated.r_dc * st.i_d)
            r4 = st.p_rect - rated.n_poles * st.v_d_rect * st.i_d
            r5 = st.p_inv - rated.n_poles * st.v_d_inv * st.i_d
            scale = max(1.0, st.v_d_rect, st.p_rect)
            assert max(abs(r) for r in (r1, r2, r3, r4, r5)) / scale < 1e-10

    def test_against_independent_root_solve(self, rated):
        # brute-force nonlinear solve of the converter system: unknowns
        # (v_d_rect, v_d_inv, alpha) with the current held at the order
        def residuals(x, i_d):
            v_r, v_i, alpha = x
            drop_i = _K_XC * rated.n_bridges * rated.x_c_inv * i_d
            drop_r = _K_XC * rated.n_bridges * rated.x_c_rect * i_d
            return [
                v_r - rated.v_d0_rect * math.cos(alpha) + drop_r,
                v_i - rated.v_d0_inv * math.cos(rated.gamma_ref) + drop_i,
                v_r - v_i - rated.r_dc * i_d,
            ]

        for i_order in np.linspace(0.1, rated.i_max, 9):
            st = solve_steady_state(float(i_order), rated)
            sol = fsolve(residuals, [620.0, 615.0, 0.3],
                         args=(float(i_order),), xtol=1e-12)
            # judge the oracle by its residual, not fsolve's exit flag
            assert max(abs(r) for r in residuals(sol, float(i_order))) < 1e-10
            assert st.v_d_rect == pytest.approx(sol[0], abs=1e-8)
            assert st.v_d_inv == pytest.approx(sol[1], abs=1e-8)
            assert st.alpha == pytest.approx(sol[2], abs=1e-10)

    def test_zero_current_limit(self, rated):
        st = solve_steady_state(1e-9, rated)
        assert st.p_rect == pytest.approx(0.0, abs=1e-6)
        assert st.v_d_rect - st.v_d_inv == pytest.approx(0.0, abs=1e-8)
        # commutation drop vanishes with the current
        assert st.v_d_rect == pytest.approx(
            rated.v_d0_rect * math.cos(st.alpha), abs=1e-6)

    def test_power_balance_identity(self, rated):
        for i_order in np.linspace(0.01, rated.i_max, 200):
            st = solve_steady_state(float(i_order), rated)
            loss = rated.n_poles * rated.r_dc * st.i_d ** 2
            assert abs((st.p_rect - st.p_inv) - loss) <= 1e-9 * loss

    def test_monotone_in_current_order(self, rated):
        grid = np.linspace(0.05, rated.i_max, 80)
        states = [solve_steady_state(float(i), rated) for i in grid]
        i_d = np.array([s.i_d for s in states])
        p_inv = np.array([s.p_inv for s in states])
        alpha = np.array([s.alpha for s in states])
        v_inv = np.array([s.v_d_inv for s in states])
        assert np.all(np.diff(i_d) > 0)
        assert np.all(np.diff(p_inv) > 0)
        assert np.all(np.diff(alpha) < 0)
        assert np.all(np.diff(v_inv) < 0)

    def test_alpha_out_of_range(self):
        tight = calibrate_converter(660.0, 600.0, alpha_rated_deg=15.0,
                                    alpha_min_deg=15.5, alpha_max_deg=16.0)
        with pytest.raises(AlphaOutOfRangeError):
            solve_steady_state(1.1, tight)

    def test_cosine_domain(self, rated):
        weak = dataclasses.replace(rated, k_t_rect=0.3)
        with pytest.raises(CosineDomainError):
            solve_steady_state(1.1, weak)

    @pytest.mark.parametrize("i_order", [0.0, -0.5, 10.0])
    def test_order_outside_precondition(self, rated, i_order):
        with pytest.raises(ValueError):
            solve_steady_state(i_order, rated)


class TestCurrentForPower:
    def test_inverts_the_solver(self, rated):
        for i_order in np.linspace(0.05, rated.i_max, 40):
            st = solve_steady_state(float(i_order), rated)
            assert current_for_power(st.p_inv, rated) == pytest.approx(
                st.i_d, rel=1e-12)

    def test_zero(self, rated):
        assert current_for_power(0.0, rated) == 0.0

    def test_beyond_maximum(self, rated):
        with pytest.raises(ValueError):
            current_for_power(max_inverter_power(rated) * 1.01, rated)


class TestStepPowerTracking:
    def test_fixed_point(self, rated):
        assert step_power_tracking(0.8, 0.8, rated, 1e-3) == 0.8

    def test_matches_closed_form(self, rated):
        # P(t) = 0.80 - 0.14 exp(-t / 0.1) under a constant order
        p = 0.66
        for _ in range(100):
            p = step_power_tracking(p, 0.80, rated, 1e-3)
        assert p == pytest.approx(0.80 - 0.14 * math.exp(-1.0), abs=1e-8)

    def test_five_time_constant_settling(self, rated):
        p0, target = 0.66, 0.80
        p = p0
        steps = int(round(5 * rated.t_dc / 1e-3))
        for _ in range(steps):
            p = step_power_tracking(p, target, rated, 1e-3)
        assert abs(p - target) < 0.01 * abs(p0 - target)

    def test_never_overshoots(self, rated):
        rng = np.random.RandomState(7)
        for _ in range(300):
            p_dc = rng.uniform(0.0, 1.2)
            p_order = rng.uniform(0.0, 1.2)
            dt = rng.uniform(1e-5, rated.t_dc / 2)
            out = step_power_tracking(p_dc, p_order, rated, dt)
            assert min(p_dc, p_order) <= out <= max(p_dc, p_order)

    def test_step_too_large(self, rated):
        with pytest.raises(StepTooLargeError):
            step_power_tracking(0.5, 0.8, rated, rated.t_dc)

    def test_nonpositive_dt(self, rated):
        with pytest.raises(ValueError):
            step_power_tracking(0.5, 0.8, rated, 0.0)


class TestApplyBlock:
    def test_blocks_delivering_state(self):
        params = calibrate_converter(540.0, 600.0, k_max=1.4)
        st = solve_steady_state(params.i_rated, params)
        assert st.p_inv == pytest.approx(540.0, rel=1e-12)
        blocked = apply_block(st)
        assert blocked.blocked
        assert blocked.i_d == 0.0
        assert blocked.p_rect == 0.0
        assert blocked.p_inv == 0.0
        assert blocked.p_dc == 0.0
        assert blocked.p_order == st.p_order  # frozen

    def test_idempotent(self, rated):
        st = apply_block(solve_steady_state(1.0, rated))
        assert apply_block(st) == st

    def test_zero_contribution(self, rated):
        rng = np.random.RandomState(3)
        for _ in range(20):
            st = solve_steady_state(float(rng.uniform(0.05, rated.i_max)), rated)
            assert apply_block(st).p_inv == 0.0


class TestParamsValidation:
    def test_rejects_bad_angles(self, rated):
        with pytest.raises(ValueError):
            dataclasses.replace(rated, alpha_min=0.5, alpha_max=0.2)
        with pytest.raises(ValueError):
            dataclasses.replace(rated, gamma_ref=2.0)

    def test_rejects_nonpositive(self, rated):
        with pytest.raises(ValueError):
            dataclasses.replace(rated, r_dc=0.0)
        with pytest.raises(ValueError):
            dataclasses.replace(rated, n_poles=0)

    def test_rejects_k_max_below_one(self, rated):
        with pytest.raises(ValueError):
            dataclasses.replace(rated, k_max=0.9)
