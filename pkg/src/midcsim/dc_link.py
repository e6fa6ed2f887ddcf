"""Quasi-steady-state model of one monopolar LCC-HVDC link.

The rectifier runs constant-current control, the inverter constant
extinction-angle control, and the two are tied by the DC line resistance.
Converter dynamics faster than the pole-control power order are collapsed
into a single first-order tracking lag (time constant ``t_dc``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .constants import S_BASE_MVA
from .errors import (
    AlphaOutOfRangeError,
    CosineDomainError,
    StepTooLargeError,
    VoltageFloorError,
)

# 6-pulse bridge voltage factors
_K_V0 = 3.0 * math.sqrt(2.0) / math.pi  # ideal no-load DC voltage per bridge
_K_XC = 3.0 / math.pi                   # commutation voltage drop per bridge


@dataclass(frozen=True)
class ConverterParams:
    """Fixed electrical parameters of one LCC-HVDC link.

    Reactances in ohms, voltages in kV, currents in kA, powers in MW,
    angles in radians, time constants in seconds.
    """

    n_poles: int
    n_bridges: int
    x_c_rect: float
    x_c_inv: float
    r_dc: float
    k_t_rect: float
    k_t_inv: float
    v_ac_rect: float
    v_ac_inv: float
    gamma_ref: float
    alpha_min: float
    alpha_max: float
    p_rated: float
    i_rated: float
    v_rated: float
    k_max: float = 1.1
    t_dc: float = 0.1

    def __post_init__(self):
        if self.n_poles < 1 or self.n_bridges < 1:
            raise ValueError("n_poles and n_bridges must be >= 1")
        for name in ("x_c_rect", "x_c_inv", "r_dc", "k_t_rect", "k_t_inv",
                     "v_ac_rect", "v_ac_inv", "p_rated", "i_rated", "v_rated",
                     "t_dc"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 < self.alpha_min < self.alpha_max < math.pi / 2:
            raise ValueError("need 0 < alpha_min < alpha_max < pi/2")
        if not 0.0 < self.gamma_ref < math.pi / 2:
            raise ValueError("need 0 < gamma_ref < pi/2")
        if self.k_max < 1.0:
            raise ValueError("k_max must be >= 1")

    @property
    def v_d0_rect(self):
        """Ideal no-load rectifier DC voltage, kV."""
        return _K_V0 * self.n_bridges * self.k_t_rect * self.v_ac_rect

    @property
    def v_d0_inv(self):
        """Ideal no-load inverter DC voltage, kV."""
        return _K_V0 * self.n_bridges * self.k_t_inv * self.v_ac_inv

    @property
    def i_max(self):
        """Overload current ceiling, kA."""
        return self.k_max * self.i_rated


@dataclass(frozen=True)
class DcLinkState:
    """Instantaneous electrical operating point of one link."""

    v_d_rect: float   # kV
    v_d_inv: float    # kV
    i_d: float        # kA
    alpha: float      # rad
    p_rect: float     # MW
    p_inv: float      # MW
    p_order: float    # p.u. of system base
    i_order: float    # kA
    p_dc: float       # tracked power, p.u. of system base
    blocked: bool = False


def power_to_current_order(p_order, u_d, base, params, u_d_floor=None):
    """Convert a per-unit power order into a current set-point in kA.

    ``u_d`` is the measured DC voltage in kV; ``base`` the power base in MVA.
    The result is clamped to [0, k_max * i_rated].  Raises VoltageFloorError
    when the measured voltage is below the floor (default 0.1 * v_rated),
    i.e. too collapsed for the division to be meaningful.
    """
    floor = 0.1 * params.v_rated if u_d_floor is None else u_d_floor
    if u_d < floor:
        raise VoltageFloorError(
            f"measured DC voltage {u_d:.3f} kV below floor {floor:.3f} kV")
    i = p_order * base / (params.n_poles * u_d)
    return min(max(i, 0.0), params.i_max)


def solve_steady_state(i_order, params, s_base=S_BASE_MVA):
    """Solve the link's DC steady state for a given current order.

    With the rectifier holding I_d = i_order and the inverter holding its
    extinction-angle reference, the inverter voltage follows directly, the
    rectifier voltage adds the line drop, and the firing angle is recovered
    from the rectifier voltage equation.

    Raises CosineDomainError when no firing angle can produce the required
    rectifier voltage, and AlphaOutOfRangeError when the solved angle falls
    outside [alpha_min, alpha_max] (infeasible operating point).
    """
    if not 0.0 < i_order <= params.i_max * (1.0 + 1e-12):
        raise ValueError(
            f"i_order {i_order} outside (0, {params.i_max}] kA")
    i_d = i_order
    v_d_inv = (params.v_d0_inv * math.cos(params.gamma_ref)
               - _K_XC * params.n_bridges * params.x_c_inv * i_d)
    v_d_rect = v_d_inv + params.r_dc * i_d
    arg = (v_d_rect + _K_XC * params.n_bridges * params.x_c_rect * i_d) \
        / params.v_d0_rect
    if not -1.0 <= arg <= 1.0:
        raise CosineDomainError(f"arccos argument {arg:.6f} outside [-1, 1]")
    alpha = math.acos(arg)
    if not params.alpha_min <= alpha <= params.alpha_max:
        raise AlphaOutOfRangeError(
            f"alpha {alpha:.4f} rad outside "
            f"[{params.alpha_min:.4f}, {params.alpha_max:.4f}]")
    p_rect = params.n_poles * v_d_rect * i_d
    p_inv = params.n_poles * v_d_inv * i_d
    return DcLinkState(
        v_d_rect=v_d_rect, v_d_inv=v_d_inv, i_d=i_d, alpha=alpha,
        p_rect=p_rect, p_inv=p_inv, p_order=p_inv / s_base, i_order=i_order,
        p_dc=p_inv / s_base, blocked=False)


def max_inverter_power(params):
    """Largest inverter power the link can deliver, MW (vertex of P(I_d))."""
    a = params.v_d0_inv * math.cos(params.gamma_ref)
    b = _K_XC * params.n_bridges * params.x_c_inv
    return params.n_poles * a * a / (4.0 * b)


def current_for_power(p_inv, params):
    """Invert the inverter power curve: DC current in kA delivering ``p_inv`` MW.

    Returns the low-current root of N_p * I_d * (V_d0I cos(gamma) - b I_d),
    the branch the link actually operates on.
    """
    if p_inv < 0.0:
        raise ValueError("p_inv must be >= 0")
    if p_inv == 0.0:
        return 0.0
    a = params.v_d0_inv * math.cos(params.gamma_ref)
    b = _K_XC * params.n_bridges * params.x_c_inv
    disc = a * a - 4.0 * b * p_inv / params.n_poles
    if disc < 0.0:
        raise ValueError(
            f"p_inv {p_inv:.3f} MW above deliverable maximum "
            f"{max_inverter_power(params):.3f} MW")
    return (a - math.sqrt(disc)) / (2.0 * b)


def step_power_tracking(p_dc, p_order, params, dt):
    """Advance the first-order power-order tracking lag by one step.

    Classic explicit fourth-order step for dP/dt = (P_order - P) / T_DC; for
    a constant order over the step this reduces to a scalar decay factor.
    The result always lies between ``p_dc`` and ``p_order``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if dt > params.t_dc / 2.0:
        raise StepTooLargeError(
            f"dt {dt} exceeds stability margin t_dc/2 = {params.t_dc / 2.0}")
    x = -dt / params.t_dc
    decay = 1.0 + x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x / 24.0)))
    return p_order + (p_dc - p_order) * decay


def apply_block(state):
    """Block the link: zero current and powers, power order frozen."""
    return replace(state, blocked=True, i_d=0.0, p_rect=0.0, p_inv=0.0,
                   p_dc=0.0)


def calibrate_converter(p_rated, v_rated, gamma_deg=18.0, alpha_rated_deg=15.0,
                        x_c=12.0, r_dc=5.0, v_ac=230.0, n_poles=1,
                        n_bridges=2, k_max=1.1, t_dc=0.1, alpha_min_deg=5.0,
                        alpha_max_deg=30.0):
    """Build ConverterParams whose rated point hits (v_rated, p_rated) exactly.

    Transformer ratios are solved from the converter voltage equations so
    that at rated current the inverter sits at ``v_rated`` kV with the given
    extinction angle and the rectifier at the given rated firing angle.  Use
    this instead of guessing ratios: every other electrical quantity then
    follows consistently.

    Parameters
    ----------
    p_rated : rated inverter DC power, MW
    v_rated : rated inverter DC voltage, kV
    gamma_deg : inverter extinction angle reference, degrees
    alpha_rated_deg : rectifier firing angle at the rated point, degrees
    x_c : commutating reactance per bridge (both sides), ohms
    r_dc : DC line resistance, ohms
    v_ac : converter-bus AC voltage (both sides), kV
    """
    gamma = math.radians(gamma_deg)
    alpha_rated = math.radians(alpha_rated_deg)
    i_rated = p_rated / (n_poles * v_rated)
    drop = _K_XC * n_bridges * x_c * i_rated
    k_t_inv = (v_rated + drop) / (_K_V0 * n_bridges * v_ac * math.cos(gamma))
    v_d_rect = v_rated + r_dc * i_rated
    k_t_rect = (v_d_rect + drop) / (_K_V0 * n_bridges * v_ac
                                    * math.cos(alpha_rated))
    return ConverterParams(
        n_poles=n_poles, n_bridges=n_bridges, x_c_rect=x_c, x_c_inv=x_c,
        r_dc=r_dc, k_t_rect=k_t_rect, k_t_inv=k_t_inv, v_ac_rect=v_ac,
        v_ac_inv=v_ac, gamma_ref=gamma, alpha_min=math.radians(alpha_min_deg),
        alpha_max=math.radians(alpha_max_deg), p_rated=p_rated,
        i_rated=i_rated, v_rated=v_rated, k_max=k_max, t_dc=t_dc)
