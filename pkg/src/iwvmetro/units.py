"""Physical constants (CODATA exact values) and unit conversions.

Lengths are in cm, times in s, energies in J.
"""

import math

C_CM_PER_S = 2.99792458e10
PLANCK_J_S = 6.62607015e-34
HBAR_J_S = PLANCK_J_S / (2 * math.pi)
NM_TO_CM = 1e-7


def wavenumber(wavelength_cm: float) -> float:
    """Vacuum wavenumber 2 pi / lambda (1/cm)."""
    return 2 * math.pi / wavelength_cm


def angular_frequency(wavelength_cm: float) -> float:
    """Optical angular frequency 2 pi c / lambda (rad/s)."""
    return C_CM_PER_S * wavenumber(wavelength_cm)


def photon_energy(wavelength_cm: float) -> float:
    return 2 * math.pi * HBAR_J_S * C_CM_PER_S / wavelength_cm


def rad_per_s_to_hz(omega: float) -> float:
    return omega / (2 * math.pi)
