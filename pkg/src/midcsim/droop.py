"""Decentralized P-f droop controller of one LCC-HVDC line.

Maps the receiving-end frequency deviation (in per-unit of nominal) to an
active-power set-point.  Controllers ship disarmed and are armed by the
coordination layer's coefficient update.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import NegativeCoefficientError


@dataclass(frozen=True)
class DroopSettings:
    """One line's P-f droop controller configuration.

    k_droop is in p.u. power per p.u. angular-frequency deviation;
    p_nominal and p_ceiling in p.u. of the system base; deadband in p.u.
    of omega_nominal; signal_delay in seconds.
    """

    k_droop: float
    p_nominal: float
    omega_nominal: float
    p_ceiling: float
    deadband: float = 0.0004
    armed: bool = False
    signal_delay: float = 0.05

    def __post_init__(self):
        if self.k_droop < 0.0:
            raise ValueError("k_droop must be >= 0")
        if self.deadband < 0.0:
            raise ValueError("deadband must be >= 0")
        if self.p_ceiling < self.p_nominal:
            raise ValueError("p_ceiling must be >= p_nominal")
        if self.omega_nominal <= 0.0:
            raise ValueError("omega_nominal must be > 0")
        if self.signal_delay < 0.0:
            raise ValueError("signal_delay must be >= 0")


def droop_power_order(omega_re, settings):
    """Power set-point in p.u. for a measured receiving-end frequency.

    Disarmed controllers, and deviations inside the deadband, return the
    nominal set-point.  Otherwise the set-point rises linearly with the
    per-unit under-frequency deviation, clamped to [0, p_ceiling].
    """
    if omega_re <= 0.0:
        raise ValueError("omega_re must be > 0")
    dev = (settings.omega_nominal - omega_re) / settings.omega_nominal
    if not settings.armed or abs(dev) <= settings.deadband:
        return settings.p_nominal
    p = settings.p_nominal + settings.k_droop * dev
    return min(max(p, 0.0), settings.p_ceiling)


def update_coefficient(settings, k_new):
    """Install a new droop coefficient and arm the controller."""
    if k_new < 0.0:
        raise NegativeCoefficientError(f"k_new {k_new} must be >= 0")
    return replace(settings, k_droop=k_new, armed=True)
