"""Timed scenario events, applied at the first step boundary >= their time."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BlockFault:
    """Protective shutdown of one HVDC line."""

    time: float
    line: int


@dataclass(frozen=True)
class FrequencyStep:
    """Override one line's measured receiving-end frequency signal.

    From ``time`` onward the controller of ``line`` reads ``f_to`` Hz
    instead of the delayed receiving-end measurement (open-loop droop test).
    """

    time: float
    line: int
    f_from: float
    f_to: float


@dataclass(frozen=True)
class CoefficientUpdate:
    """Install and arm a new droop coefficient on one line."""

    time: float
    line: int
    k_droop: float


@dataclass(frozen=True)
class LoadShed:
    """Step decrease of receiving-end load, p.u. of the system base."""

    time: float
    amount: float
