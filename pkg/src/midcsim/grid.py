"""Aggregate center-of-inertia frequency dynamics of one AC subsystem.

Two states per subsystem: the swing equation on the per-unit frequency
deviation and a first-order governor lag whose equilibrium reproduces the
steady-state primary response k_gov * (omega_n - omega) / omega_n.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ZeroStiffnessError


@dataclass(frozen=True)
class SubsystemParams:
    """Inertia, damping and governor data of a sending- or receiving-end grid."""

    inertia_h: float        # s
    damping_d: float        # p.u. power / p.u. frequency
    k_gov: float            # p.u. power / p.u. frequency
    t_gov: float            # s
    omega_nominal: float    # rad/s
    omega_min: float        # rad/s
    omega_max: float        # rad/s
    s_base: float           # MVA

    def __post_init__(self):
        if self.inertia_h <= 0.0:
            raise ValueError("inertia_h must be > 0")
        if self.damping_d < 0.0 or self.k_gov < 0.0:
            raise ValueError("damping_d and k_gov must be >= 0")
        if self.t_gov <= 0.0:
            raise ValueError("t_gov must be > 0")
        if not self.omega_min < self.omega_nominal < self.omega_max:
            raise ValueError("need omega_min < omega_nominal < omega_max")
        if self.s_base <= 0.0:
            raise ValueError("s_base must be > 0")


@dataclass(frozen=True)
class SubsystemState:
    """Frequency state of one subsystem."""

    omega: float        # rad/s
    p_gov: float = 0.0  # governor mechanical-power increment, p.u.
    p_shed: float = 0.0  # cumulative load shed, p.u. (receiving end only)

    def __post_init__(self):
        if self.omega <= 0.0:
            raise ValueError("omega must be > 0")
        if self.p_shed < 0.0:
            raise ValueError("p_shed must be >= 0")


def coi_rates(dev, p_gov, p_net, inertia_h, damping_d, k_gov, t_gov):
    """Rates of the two COI states, vectorized over subsystems.

    ``dev`` is the per-unit frequency deviation; returns (d dev/dt in p.u./s,
    d p_gov/dt in p.u./s).  Accepts scalars or numpy arrays elementwise.
    """
    d_dev = (p_net + p_gov - damping_d * dev) / (2.0 * inertia_h)
    d_pgov = (-k_gov * dev - p_gov) / t_gov
    return d_dev, d_pgov


def subsystem_derivatives(state, p_net, params):
    """Time derivatives (d omega/dt rad/s^2, d p_gov/dt p.u./s).

    ``p_net`` is the net electrical injection imbalance in p.u. on the
    subsystem base (positive = surplus).
    """
    dev = (state.omega - params.omega_nominal) / params.omega_nominal
    d_dev, d_pgov = coi_rates(dev, state.p_gov, p_net, params.inertia_h,
                              params.damping_d, params.k_gov, params.t_gov)
    return params.omega_nominal * d_dev, d_pgov


def steady_state_frequency(p_deficit, params):
    """Analytic equilibrium frequency under a constant per-unit deficit."""
    stiffness = params.k_gov + params.damping_d
    if stiffness == 0.0:
        if p_deficit != 0.0:
            raise ZeroStiffnessError(
                "k_gov + damping_d = 0 with a nonzero deficit")
        return params.omega_nominal
    return params.omega_nominal * (1.0 - p_deficit / stiffness)
