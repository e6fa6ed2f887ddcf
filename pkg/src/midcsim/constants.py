"""System-wide per-unit bases."""

import math

# System power base: 1000 MVA makes a 660 MW line order equal 0.66 p.u.
S_BASE_MVA = 1000.0

F_NOMINAL_HZ = 50.0
OMEGA_NOMINAL = 2.0 * math.pi * F_NOMINAL_HZ  # rad/s
