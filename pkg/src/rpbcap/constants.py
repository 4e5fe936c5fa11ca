"""Physical constants and unit conversions used across the package.

All internal computation is SI (K, Pa, m, s, mol, J). Conversions are
centralized here so that rpm->rad/s etc. never happen ad hoc.
"""

R_GAS = 8.314462618  # J/mol/K
G_STANDARD = 9.81    # m/s2, also the characteristic acceleration g0
T_REF = 298.15       # K, enthalpy reference
ATM = 101325.0       # Pa

# molar masses, kg/mol
M_CO2 = 0.04401
M_H2O = 0.018015
M_N2 = 0.028014
M_O2 = 0.031999
M_MEA = 0.061084

MOLAR_MASS = {"co2": M_CO2, "h2o": M_H2O, "n2": M_N2, "o2": M_O2, "mea": M_MEA}

GAS_COMPONENTS = ("co2", "h2o", "n2", "o2")
LIQ_COMPONENTS = ("co2", "h2o", "mea")

INCH = 0.0254        # m
FT3 = 0.0283168466   # m3
SECONDS_PER_DAY = 86400.0
GJ = 1.0e9           # J


def rpm_to_rad_s(rpm):
    """Rotation speed conversion; the single place rpm enters the code."""
    return rpm * 2.0 * 3.141592653589793 / 60.0


def rad_s_to_rpm(omega):
    return omega * 60.0 / (2.0 * 3.141592653589793)


def celsius_to_kelvin(t_c):
    return t_c + 273.15


def kelvin_to_celsius(t_k):
    return t_k - 273.15
