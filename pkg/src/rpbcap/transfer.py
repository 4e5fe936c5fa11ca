"""Rotation-aware interphase transfer, hydraulics and flooding correlations.

All functions are stateless and accept numpy arrays. The centrifugal
replacement of gravity is total: the film, area and holdup correlations
see the acceleration group (omega*r)^2 floored at g0, so a value of
exactly 9.81 reproduces static-bed results and omega = 0 falls back to a
gravity-driven bed. The flooding correlation uses the linear group
omega^2*r with the same floor.

Correlation constants (flooding intercept/slopes, characteristic values
g0/u0/nu0/mu0/gamma0, cavity correction) are collected in
TransferConstants and can be overridden from the scenario file.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import G_STANDARD, R_GAS
from .errors import HoldupClampWarning


@dataclass(frozen=True)
class PackingSpec:
    """Packing characteristics of one bed.

    hydraulic_diameter defaults to 4*void/area; a single packing length
    scale serves both the d_p and d_h symbols of the correlations.
    """

    specific_surface_area: float          # a_p, m2/m3
    void_fraction: float                  # -
    packing_name: str = "wire_mesh"
    cavity_correction: float = 1.15       # extra interfacial area from the cavity zone
    hydraulic_diameter: float | None = None

    def __post_init__(self):
        if not 0.0 < self.void_fraction < 1.0:
            raise ValueError("void_fraction must lie in (0, 1)")
        if self.specific_surface_area <= 0.0:
            raise ValueError("specific_surface_area must be positive")
        if self.cavity_correction < 1.0:
            raise ValueError("cavity_correction must be >= 1")
        if self.hydraulic_diameter is None:
            object.__setattr__(
                self,
                "hydraulic_diameter",
                4.0 * self.void_fraction / self.specific_surface_area,
            )
        if self.hydraulic_diameter <= 0.0:
            raise ValueError("hydraulic_diameter must be positive")


@dataclass(frozen=True)
class TransferConstants:
    """Characteristic values and tunable correlation coefficients."""

    g0: float = G_STANDARD        # m/s2
    u0: float = 0.01              # m/s, characteristic liquid velocity
    nu0: float = 1.0e-6           # m2/s
    mu0: float = 1.0e-3           # Pa.s
    gamma0: float = 0.072         # N/m
    area_lead: float = 202.3 / 546.5
    area_exponents: tuple = (0.0435, 0.4275, 0.12, -0.5856)
    holdup_lead: float = 0.039
    holdup_exponents: tuple = (-0.5, 0.6, 0.22)
    flood_coeffs: tuple = (-3.01, -1.40, -0.15)
    enhancement_exponent: float = 1.35

    @classmethod
    def from_config(cls, overrides=None):
        if not overrides:
            return cls()
        known = {f for f in cls.__dataclass_fields__}
        bad = set(overrides) - known
        if bad:
            raise ValueError(f"unknown correlation overrides: {sorted(bad)}")
        overrides = {
            k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()
        }
        return replace(cls(), **overrides)


@dataclass(frozen=True)
class GasPhaseState:
    """Local vapor-phase bundle for the correlations (arrays allowed)."""

    density: float                # kg/m3
    viscosity: float              # Pa.s
    velocity: float               # superficial, m/s
    diffusivity: float            # m2/s of the transferring species
    heat_capacity_mass: float = 1.0    # kJ/kg/K
    thermal_conductivity: float = 0.026  # W/m/K


@dataclass(frozen=True)
class LiquidPhaseState:
    """Local liquid-phase bundle for the correlations (arrays allowed)."""

    density: float                # kg/m3
    viscosity: float              # Pa.s
    velocity: float               # superficial, m/s
    diffusivity: float            # m2/s (CO2)
    surface_tension: float = 0.06  # N/m

    @property
    def kinematic_viscosity(self):
        return self.viscosity / self.density


@dataclass
class LocalTransferState:
    """Per-node transfer bundle assembled by the column model."""

    k_v: np.ndarray               # m/s per component
    k_l: np.ndarray               # m/s
    a_eff: np.ndarray             # m2/m3
    e_co2: np.ndarray             # -
    hatta: np.ndarray             # -
    k_overall: dict               # mol/m2/s/Pa per component
    fluxes: dict = field(default_factory=dict)  # mol/m2/s per component
    holdup: np.ndarray | float = 0.0
    h_heat: np.ndarray | float = 0.0            # kW/m2/K
    flooding: np.ndarray | float = 0.0          # fraction of flooding velocity


def accel_group(omega, r, g0=G_STANDARD):
    """Centrifugal replacement group (omega*r)^2, floored at g0.

    The floor keeps omega = 0 runs (fixed beds) on the same code path.
    """
    return np.maximum((np.asarray(omega) * np.asarray(r)) ** 2, g0)


def vapor_mtc(gas: GasPhaseState, pack: PackingSpec):
    """Vapor-film mass transfer coefficient, m/s (Onda-family form)."""
    d = pack.hydraulic_diameter
    if np.any(np.asarray(gas.diffusivity) <= 0.0):
        raise ValueError("vapor diffusivity must be positive")
    re = gas.density * d * gas.velocity / gas.viscosity
    sc = gas.viscosity / (gas.density * gas.diffusivity)
    return 2.0 * re**0.7 * sc ** (1.0 / 3.0) * gas.diffusivity / (pack.specific_surface_area * d**2)


def liquid_mtc(liq: LiquidPhaseState, pack: PackingSpec, omega, r,
               a_eff=None, constants: TransferConstants = TransferConstants()):
    """Liquid-film mass transfer coefficient, m/s (Tung-family form).

    Gravity is replaced by the centrifugal group; the optional effective
    area feeds the (a_p/a)^(1/3) packing-wetting factor (defaults to a_p).
    """
    d = pack.hydraulic_diameter
    re = liq.density * d * liq.velocity / liq.viscosity
    sc = liq.viscosity / (liq.density * liq.diffusivity)
    acc = accel_group(omega, r, constants.g0)
    ga = d**3 * liq.density**2 * acc / liq.viscosity**2
    ratio = pack.specific_surface_area / (a_eff if a_eff is not None else pack.specific_surface_area)
    return (
        0.918
        * re ** (1.0 / 3.0)
        * sc**0.5
        * ga ** (1.0 / 6.0)
        * ratio ** (1.0 / 3.0)
        * liq.diffusivity
        / d
    )


def effective_area(liq: LiquidPhaseState, pack: PackingSpec, omega, r,
                   constants: TransferConstants = TransferConstants()):
    """Effective interfacial area, m2/m3 (rotation-modified Xie form)."""
    e1, e2, e3, e4 = constants.area_exponents
    acc = accel_group(omega, r, constants.g0)
    ratio = (
        constants.area_lead
        * (acc / constants.g0) ** e1
        * (liq.velocity / constants.u0) ** e2
        * (liq.viscosity / constants.mu0) ** e3
        * (liq.surface_tension / constants.gamma0) ** e4
    )
    return pack.cavity_correction * ratio * pack.specific_surface_area


def hatta_number(k_app, d_co2, k_l):
    """Reaction/diffusion modulus Ha = sqrt(k_app * D) / k_l."""
    if np.any(np.asarray(k_l) <= 0.0):
        raise ValueError("k_l must be positive")
    return np.sqrt(np.maximum(0.0, k_app) * d_co2) / k_l

def instantaneous_enhancement(d_mea, c_mea, d_co2, c_co2_interface):
    """Instantaneous-reaction limit E2 = 1 + D_mea*C_mea / (2*D_co2*C_co2,i)."""
    c_i = np.maximum(np.asarray(c_co2_interface, dtype=float), 1e-12)
    return 1.0 + d_mea * np.maximum(0.0, c_mea) / (2.0 * d_co2 * c_i)


def enhancement_blend(e1, e2, exponent=1.35):
    """Second-order-reaction blend of the film and instantaneous limits."""
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    x1 = np.maximum(e1 - 1.0, 0.0)
    x2 = np.maximum(e2 - 1.0, 0.0)
    with np.errstate(divide="ignore", over="ignore"):
        s = np.where(x1 > 0.0, x1 ** -exponent, np.inf) + np.where(
            x2 > 0.0, x2 ** -exponent, np.inf
        )
        blend = np.where(np.isfinite(s) & (s > 0.0), s ** (-1.0 / exponent), 0.0)
    out = 1.0 + blend
    return out if out.ndim else float(out)


def enhancement_factor(ha, e_inf, exponent=1.35):
    """Chemical enhancement of the liquid film (E >= 1).

    ha is the Hatta modulus, e_inf the instantaneous limit; the film
    limit E1 = Ha/tanh(Ha) is blended with e_inf.
    """
    ha = np.asarray(ha, dtype=float)
    small = ha < 1e-6
    with np.errstate(invalid="ignore", divide="ignore"):
        e1 = np.where(small, 1.0 + ha**2 / 3.0, ha / np.tanh(np.where(small, 1.0, ha)))
    out = enhancement_blend(e1, e_inf, exponent)
    return out if np.ndim(out) else float(out)


def overall_mtc_co2(k_v, k_l, e_co2, he, t_v):
    """Overall CO2 coefficient, mol/m2/s/Pa: gas film in series with the
    reaction-enhanced liquid film."""
    return 1.0 / (R_GAS * t_v / k_v + he / (np.maximum(e_co2, 1.0) * k_l))


def overall_mtc_gas_film(k_v, t_v):
    """Overall coefficient for vapor-resistance-only components."""
    return k_v / (R_GAS * t_v)


def interphase_flux(k_overall, p_i, p_i_star):
    """Molar flux, mol/m2/s; positive into the liquid (absorption)."""
    return k_overall * (p_i - p_i_star)


def liquid_holdup(liq: LiquidPhaseState, omega, r, pack: PackingSpec,
                  constants: TransferConstants = TransferConstants()):
    """Liquid holdup fraction (Burns-form), clamped below 0.95*void."""
    h1, h2, h3 = constants.holdup_exponents
    acc = accel_group(omega, r, constants.g0)
    eps_l = (
        constants.holdup_lead
        * (acc / constants.g0) ** h1
        * (liq.velocity / constants.u0) ** h2
        * (liq.kinematic_viscosity / constants.nu0) ** h3
    )
    cap = 0.95 * pack.void_fraction
    if np.any(np.asarray(eps_l) > cap):
        warnings.warn(
            "liquid holdup correlation exceeded 0.95*void fraction; clamped",
            HoldupClampWarning,
            stacklevel=2,
        )
        eps_l = np.minimum(eps_l, cap)
    return eps_l


def pressure_gradient(gas: GasPhaseState, pack: PackingSpec, g_flow, height, r, omega):
    """Vapor pressure gradient dP/dr, Pa/m: Ergun drag plus centrifugal head.

    g_flow is the volumetric gas rate (m3/s) through the bed of the given
    height; reduces exactly to rho*omega^2*r when g_flow = 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("radius must be positive")
    if np.any(np.asarray(height) <= 0.0):
        raise ValueError("height must be positive")
    eps = pack.void_fraction
    d = pack.hydraulic_diameter
    u = g_flow / (2.0 * np.pi * height * r)
    viscous = 150.0 * (1.0 - eps) ** 2 * gas.viscosity / (d**2 * eps**3) * u
    inertial = 1.75 * (1.0 - eps) * gas.density / (d * eps**3) * u**2
    centrifugal = gas.density * np.asarray(omega) ** 2 * r
    return viscous + inertial + centrifugal


def flooding_velocity(l_over_g_mass, rho_v, rho_l, pack: PackingSpec, omega, r,
                      constants: TransferConstants = TransferConstants()):
    """Flooding vapor velocity, m/s (Sherwood-type analysis for rotating beds).

    ln of the capacity group u_f^2*a_p*(rho_v/rho_l)/(acc*eps^3) is a
    quadratic in ln of the flow parameter X = (L/G)*sqrt(rho_v/rho_l).
    The printed correlation carries the same density ratio on both sides;
    it is applied once, in the capacity group.
    """
    c0, c1, c2 = constants.flood_coeffs
    x = np.maximum(np.asarray(l_over_g_mass, dtype=float), 1e-12) * np.sqrt(rho_v / rho_l)
    lnx = np.log(x)
    rhs = c0 + c1 * lnx + c2 * lnx**2
    acc = np.maximum(np.asarray(omega) ** 2 * np.asarray(r), constants.g0)
    cap = np.exp(rhs)
    return np.sqrt(cap * acc * pack.void_fraction**3 * rho_l / (rho_v * pack.specific_surface_area))


def flooding_ratio(u_v, u_flood):
    """Operating-to-flooding velocity ratio, %."""
    u_flood = np.asarray(u_flood, dtype=float)
    if np.any(u_flood <= 0.0):
        raise ValueError("u_flood must be positive")
    return 100.0 * np.asarray(u_v, dtype=float) / u_flood


def heat_transfer_coefficient(k_v, gas: GasPhaseState):
    """Interfacial heat transfer coefficient, kW/m2/K (Chilton-Colburn).

    h = k_v * rho * cp * Le^(2/3) with Le built from the gas thermal
    conductivity and the transferring-species diffusivity.
    """
    if np.any(np.asarray(k_v) <= 0.0):
        raise ValueError("k_v must be positive")
    cp_j = gas.heat_capacity_mass * 1000.0  # J/kg/K
    lewis = gas.thermal_conductivity / (gas.density * cp_j * gas.diffusivity)
    return k_v * gas.density * gas.heat_capacity_mass * lewis ** (2.0 / 3.0)
