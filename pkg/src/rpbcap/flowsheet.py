"""Closed-loop capture flowsheet: absorber, cross exchanger, stripper with
reboiler and condenser, lean cooler and makeup.

The recycle is torn at the lean solvent entering the absorber. Because the
lean cooler pins the absorber-inlet temperature and the reboiler pins the
hot-side temperatures, the tear reduces to the lean loading, converged by
bounded Wegstein acceleration. The stripper column and its reboiler are
closed in an inner substitution loop on the stripping-vapor flows.

All duties are reported in kW; specific energies in GJ/t CO2.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import (
    GAS_COMPONENTS,
    MOLAR_MASS,
    R_GAS,
    T_REF,
    celsius_to_kelvin,
    rpm_to_rad_s,
)
from .errors import NonConvergenceError, TearNonConvergenceError, TemperatureCrossError
from .column import ColumnOptions, ColumnProfile, column_kpis, solve_column
from .properties import PropertyPackage, SolventState, default_package
from .streams import StreamState
from .transfer import TransferConstants

PUMP_EFFICIENCY = 0.75
BLOWER_EFFICIENCY = 0.75
ELEC_TO_HEAT = 0.4
REBOILER_T_TOLERANCE = 0.5  # K over the 120 C solvent-degradation cap
IDLE_ROTATION_KW = 1.2


@dataclass(frozen=True)
class OperatingPoint:
    """Loop operating decisions; rpm-to-rad/s conversion lives here."""

    solvent_flow: float           # kg/s
    reboiler_temperature: float   # K
    stripper_pressure: float      # Pa
    absorber_rpm: float
    stripper_rpm: float

    def __post_init__(self):
        for name in ("solvent_flow", "reboiler_temperature", "stripper_pressure",
                     "absorber_rpm", "stripper_rpm"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def omega_abs(self):
        return rpm_to_rad_s(self.absorber_rpm)

    @property
    def omega_str(self):
        return rpm_to_rad_s(self.stripper_rpm)

    def as_dict(self):
        return {
            "solvent_flow_kg_s": self.solvent_flow,
            "reboiler_temperature_k": self.reboiler_temperature,
            "stripper_pressure_pa": self.stripper_pressure,
            "absorber_rpm": self.absorber_rpm,
            "stripper_rpm": self.stripper_rpm,
        }


@dataclass(frozen=True)
class ProcessScenario:
    """One capture case: feed, solvent, unit geometries and operation."""

    flue_gas: StreamState
    mea_mass_frac: float
    target_capture: float
    absorber: object             # RpbGeometry or PbGeometry
    stripper: object
    operating: OperatingPoint
    hx_approach: float = 10.0    # K
    condenser_temperature: float = 313.15
    lean_cooler_temperature: float = 313.15
    product_delivery_pressure: float = 110e5  # Pa, CO2 compressor outlet
    grid_n: int = 40
    constants: TransferConstants = field(default_factory=TransferConstants)
    name: str = "scenario"

    def __post_init__(self):
        if not 0.0 < self.target_capture < 1.0:
            raise ValueError("target capture must lie in (0, 1)")
        if not 0.30 - 1e-9 <= self.mea_mass_frac <= 0.70 + 1e-9:
            raise ValueError("mea_mass_frac must lie in [0.30, 0.70]")

    def with_operating(self, operating: OperatingPoint):
        return replace(self, operating=operating)

    def with_geometry(self, absorber=None, stripper=None):
        return replace(self, absorber=absorber or self.absorber,
                       stripper=stripper or self.stripper)


@dataclass
class ProcessSolution:
    """Converged loop streams, duties and specific performance numbers."""

    scenario: ProcessScenario
    streams: dict
    lean_loading: float
    rich_loading: float
    l_over_g: float
    capture_rate: float
    m_co2_captured: float         # kg/s product CO2
    q_reboiler: float             # kW
    q_condenser: float            # kW
    q_lean_cooler: float          # kW
    q_cross_hx: float             # kW
    e_rotation_abs: float         # kW
    e_rotation_str: float         # kW
    e_pump: float                 # kW
    e_blower: float               # kW
    e_compressor: float           # kW, product CO2 to delivery pressure
    srd: float                    # GJ/t
    sre: float                    # GJe/t
    capture_energy: float         # GJ/t, srd + sre / 0.4
    absorber_profile: ColumnProfile = None
    stripper_profile: ColumnProfile = None
    tear_iterations: int = 0
    column_solves: int = 0
    co2_loop_closure: float = np.inf
    makeup: dict = field(default_factory=dict)

    def kpi_dict(self):
        return {
            "capture_rate": self.capture_rate,
            "lean_loading_mol_mol": self.lean_loading,
            "rich_loading_mol_mol": self.rich_loading,
            "l_over_g_kg_kg": self.l_over_g,
            "m_co2_captured_kg_s": self.m_co2_captured,
            "q_reboiler_kw": self.q_reboiler,
            "q_condenser_kw": self.q_condenser,
            "q_lean_cooler_kw": self.q_lean_cooler,
            "e_rotation_abs_kw": self.e_rotation_abs,
            "e_rotation_str_kw": self.e_rotation_str,
            "e_pump_kw": self.e_pump,
            "e_blower_kw": self.e_blower,
            "e_compressor_kw": self.e_compressor,
            "srd_gj_t": self.srd,
            "sre_gje_t": self.sre,
            "capture_energy_gj_t": self.capture_energy,
            "absorber_dp_kpa": self.absorber_profile.pressure_drop() / 1e3,
            "stripper_dp_kpa": self.stripper_profile.pressure_drop() / 1e3,
            "absorber_peak_flooding_pct": self.absorber_profile.peak_flooding(),
            "stripper_peak_flooding_pct": self.stripper_profile.peak_flooding(),
            "tear_iterations": self.tear_iterations,
            "co2_loop_closure": self.co2_loop_closure,
        }


# ----------------------------------------------------------------------
# single units
# ----------------------------------------------------------------------
def _liquid_enthalpy(stream: StreamState, package: PropertyPackage):
    """W, consistent with the column's discrete enthalpy definition."""
    st = SolventState(stream.mea_mass_frac, stream.co2_loading, stream.temperature)
    cp = package.liquid_properties(st)["heat_capacity"] * 1000.0
    return stream.total_molar_flow * cp * (stream.temperature - T_REF)


def _vapor_sensible_enthalpy(flows, t, package):
    return sum(
        flows.get(c, 0.0) * (package._gas_cp[c][0] + package._gas_cp[c][1] * t)
        for c in GAS_COMPONENTS
    ) * (t - T_REF)


def bubble_pressure(liquid: StreamState, t, package=None):
    """Total equilibrium vapor pressure of a solvent stream at t, Pa."""
    package = package or default_package()
    n_mea, n_co2, n_h2o = liquid.flow("mea"), liquid.flow("co2"), liquid.flow("h2o")
    w = liquid.mea_mass_frac
    x_w = n_h2o / (n_co2 + n_h2o + n_mea)
    st = SolventState(w, n_co2 / n_mea, t)
    return float(
        package.co2_equilibrium_pressure(st)
        + package.h2o_equilibrium_pressure(x_w, w, t)
    )


def _isothermal_flash(feed: StreamState, t, p, package):
    """Split a solvent stream into equilibrium vapor and liquid at (t, p).

    Returns (vapor, liquid); the vapor is CO2 + H2O satisfying the solvent
    isotherm and water vapor-pressure curve simultaneously. Subcooled
    feeds return an empty vapor.
    """
    n_mea = feed.flow("mea")
    n_co2 = feed.flow("co2")
    n_h2o = feed.flow("h2o")
    if n_mea <= 0.0:
        raise ValueError("flash feed must carry MEA")

    if bubble_pressure(feed, t, package) <= p:
        vapor = StreamState.vapor({"co2": 0.0, "h2o": 0.0, "n2": 0.0, "o2": 0.0}, t, p)
        return vapor, StreamState.liquid(dict(feed.molar_flows), t, p)

    def equilibria(v):
        v_c, v_w = v
        l_c = max(n_co2 - v_c, 0.0)
        l_w = max(n_h2o - v_w, 1e-9)
        alpha = l_c / n_mea
        w = (n_mea * MOLAR_MASS["mea"]) / (n_mea * MOLAR_MASS["mea"] + l_w * MOLAR_MASS["h2o"])
        w = min(max(w, 0.05), 0.90)
        x_w = l_w / (l_c + l_w + n_mea)
        p_star_c = package.co2_equilibrium_pressure(SolventState(w, alpha, t))
        p_star_w = package.h2o_equilibrium_pressure(x_w, w, t)
        v_tot = v_c + v_w
        return np.array([v_c / v_tot * p - p_star_c, v_w / v_tot * p - p_star_w])

    v = None
    for v0 in (
        np.array([0.02 * n_co2 + 1e-6, 0.05 * n_h2o + 1e-6]),
        np.array([0.3 * n_co2 + 1e-6, 0.15 * n_h2o + 1e-6]),
        np.array([0.8 * n_co2 + 1e-6, 0.5 * n_h2o + 1e-6]),
    ):
        v_try0 = v0.copy()
        ok = False
        for _ in range(80):
            f = equilibria(v_try0)
            if np.max(np.abs(f)) < 1e-9 * p:
                ok = True
                break
            jac = np.zeros((2, 2))
            for j in range(2):
                dv = v_try0.copy()
                step = max(1e-8, 1e-6 * abs(v_try0[j]))
                dv[j] += step
                jac[:, j] = (equilibria(dv) - f) / step
            try:
                step_v = np.linalg.solve(jac, -f)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            for _ls in range(40):
                v_next = v_try0 + lam * step_v
                v_next[0] = min(max(v_next[0], 0.0), n_co2)
                v_next[1] = min(max(v_next[1], 0.0), 0.95 * n_h2o)
                f_try = equilibria(v_next)
                if np.linalg.norm(f_try) <= np.linalg.norm(f) or lam < 1e-6:
                    break
                lam *= 0.5
            v_try0 = v_next
        if ok:
            v = v_try0
            break
    if v is None:
        raise NonConvergenceError("isothermal flash did not converge")
    v_c, v_w = float(v[0]), float(v[1])
    vapor = StreamState.vapor({"co2": v_c, "h2o": v_w, "n2": 0.0, "o2": 0.0}, t, p)
    liquid = StreamState.liquid(
        {"co2": n_co2 - v_c, "h2o": n_h2o - v_w, "mea": n_mea}, t, p
    )
    return vapor, liquid


def solve_reboiler(rich_hot: StreamState, t_reb, p_str, package=None):
    """Single equilibrium flash of the stripper bottoms at (T_reb, P_str).

    Returns (vapor StreamState, lean liquid StreamState, Q_reb in kW);
    raising T_reb at a fixed feed strictly raises the vapor fraction.
    """
    package = package or default_package()
    if t_reb > 393.15 + REBOILER_T_TOLERANCE:
        raise ValueError("reboiler temperature exceeds the 120 C solvent cap")
    vapor, lean = _isothermal_flash(rich_hot, t_reb, p_str, package)

    alpha_lean = max(lean.co2_loading, 1e-6)
    dh_abs = package.heat_of_absorption(
        SolventState(lean.mea_mass_frac, alpha_lean, t_reb)
    ) * 1000.0
    h_vapor = (
        _vapor_sensible_enthalpy(vapor.molar_flows, t_reb, package)
        + vapor.flow("h2o") * package.dh_vap_water
        + vapor.flow("co2") * dh_abs
    )
    q = (_liquid_enthalpy(lean, package) + h_vapor - _liquid_enthalpy(rich_hot, package)) / 1000.0
    return vapor, lean, q


def adiabatic_feed_flash(rich_hot: StreamState, p_str, package=None):
    """Flash a superheated rich feed down to stripper pressure.

    The feed cools until its enthalpy balances the vapor it throws; the
    flash vapor bypasses the packing and joins the overhead. Returns
    (liquid feed at its new temperature, flash vapor).
    """
    package = package or default_package()
    t_feed = rich_hot.temperature
    if bubble_pressure(rich_hot, t_feed, package) <= p_str:
        empty = StreamState.vapor({"co2": 0.0, "h2o": 0.0, "n2": 0.0, "o2": 0.0},
                                  t_feed, p_str)
        return rich_hot, empty

    h_in = _liquid_enthalpy(rich_hot, package)

    def energy_mismatch(t):
        vapor, liquid = _isothermal_flash(rich_hot, t, p_str, package)
        dh_abs = package.heat_of_absorption(
            SolventState(liquid.mea_mass_frac, max(liquid.co2_loading, 1e-6), t)
        ) * 1000.0
        h_vap = (
            _vapor_sensible_enthalpy(vapor.molar_flows, t, package)
            + vapor.flow("h2o") * package.dh_vap_water
            + vapor.flow("co2") * dh_abs
        )
        return _liquid_enthalpy(liquid, package) + h_vap - h_in, vapor, liquid

    # bubble temperature bracket: flash cools the liquid below t_feed
    t_lo, t_hi = t_feed - 60.0, t_feed
    for _ in range(60):
        t_mid = 0.5 * (t_lo + t_hi)
        miss, vapor, liquid = energy_mismatch(t_mid)
        if miss > 0.0:
            t_hi = t_mid
        else:
            t_lo = t_mid
        if t_hi - t_lo < 1e-4:
            break
    return liquid.with_temperature(0.5 * (t_lo + t_hi)), vapor


def solve_cross_hx(rich_cold: StreamState, lean_hot: StreamState, approach=10.0,
                   package=None):
    """Counter-current cross exchanger with a fixed hot-end approach.

    The rich outlet leaves `approach` K below the hot lean inlet; the lean
    outlet follows from the exactly balanced duty. Raises
    TemperatureCrossError when the lean outlet would undercut the rich
    inlet.
    """
    package = package or default_package()
    if lean_hot.temperature <= rich_cold.temperature:
        raise TemperatureCrossError(
            f"lean inlet {lean_hot.temperature:.2f} K not above rich inlet "
            f"{rich_cold.temperature:.2f} K"
        )
    t_rich_out = max(rich_cold.temperature, lean_hot.temperature - approach)
    rich_hot = rich_cold.with_temperature(t_rich_out)
    duty = _liquid_enthalpy(rich_hot, package) - _liquid_enthalpy(rich_cold, package)

    # invert the lean-side enthalpy drop for the outlet temperature
    t_lo, t_hi = rich_cold.temperature - 5.0, lean_hot.temperature
    h_in = _liquid_enthalpy(lean_hot, package)
    for _ in range(80):
        t_mid = 0.5 * (t_lo + t_hi)
        h_mid = _liquid_enthalpy(lean_hot.with_temperature(t_mid), package)
        if h_in - h_mid > duty:
            t_lo = t_mid
        else:
            t_hi = t_mid
    lean_cold = lean_hot.with_temperature(0.5 * (t_lo + t_hi))
    if lean_cold.temperature < rich_cold.temperature - 1e-6:
        raise TemperatureCrossError(
            "temperature cross in cross exchanger: "
            f"rich in {rich_cold.temperature:.2f} K, lean out {lean_cold.temperature:.2f} K, "
            f"rich {rich_cold.molar_flows}, lean {lean_hot.molar_flows}"
        )
    return rich_hot, lean_cold, duty / 1000.0


def condense_overhead(overhead: StreamState, t_cond, pressure, package=None):
    """Partial condenser: water drops out at t_cond, CO2 stays vapor.

    Returns (product vapor, reflux water liquid, duty kW).
    """
    package = package or default_package()
    n_c = overhead.flow("co2")
    n_w = overhead.flow("h2o")
    p_sat = float(package.water_psat(t_cond))
    y_w_eq = min(p_sat / pressure, 0.999)
    if n_w <= 0.0 or (n_c > 0 and n_w / (n_c + n_w) <= y_w_eq):
        product = StreamState.vapor(dict(overhead.molar_flows), t_cond, pressure)
        reflux = StreamState.liquid({"co2": 0.0, "h2o": 0.0, "mea": 0.0}, t_cond, pressure)
        duty = (
            _vapor_sensible_enthalpy(overhead.molar_flows, overhead.temperature, package)
            - _vapor_sensible_enthalpy(overhead.molar_flows, t_cond, package)
        ) / 1000.0
        return product, reflux, duty
    # water vapor remaining with the CO2 at saturation
    n_w_vap = n_c * y_w_eq / (1.0 - y_w_eq)
    n_w_vap = min(n_w_vap, n_w)
    condensed = n_w - n_w_vap
    product = StreamState.vapor(
        {"co2": n_c, "h2o": n_w_vap, "n2": overhead.flow("n2"), "o2": overhead.flow("o2")},
        t_cond, pressure,
    )
    reflux = StreamState.liquid({"co2": 0.0, "h2o": condensed, "mea": 0.0}, t_cond, pressure)
    duty = (
        _vapor_sensible_enthalpy(overhead.molar_flows, overhead.temperature, package)
        - _vapor_sensible_enthalpy(product.molar_flows, t_cond, package)
        - condensed * package.cp_water * (t_cond - T_REF)
        + condensed * package.dh_vap_water
    ) / 1000.0
    return product, reflux, duty


def rotation_energy(geometry, liquid_flow, rho_liquid, omega):
    """Rotor shaft power, kW: idle term plus the liquid-acceleration term."""
    return IDLE_ROTATION_KW + 1.1e-3 * rho_liquid * liquid_flow * geometry.r_outer**2 * omega**2


def compressor_duty(product: StreamState, p_out, stages=4, efficiency=0.75,
                    gamma=1.28):
    """Multistage intercooled isentropic compression power of the product, kW."""
    if p_out <= product.pressure:
        return 0.0
    ratio = (p_out / product.pressure) ** (1.0 / stages)
    exponent = (gamma - 1.0) / gamma
    w_molar = (
        stages
        * gamma / (gamma - 1.0)
        * R_GAS * product.temperature
        * (ratio**exponent - 1.0)
    )
    return product.total_molar_flow * w_molar / efficiency / 1000.0


def capture_energy(solution: ProcessSolution):
    """Specific capture energy, GJ/t: SRD plus SRE converted at 0.4."""
    return solution.srd + solution.sre / ELEC_TO_HEAT


# ----------------------------------------------------------------------
# the closed loop
# ----------------------------------------------------------------------
class FlowsheetEvaluator:
    """Reusable loop solver keeping warm-start profiles between calls."""

    def __init__(self, scenario: ProcessScenario, package=None, fast=False):
        self.scenario = scenario
        self.package = package or default_package()
        self.fast = fast
        self._abs_profile = None
        self._str_profile = None
        self._alpha_hint = None
        self._vapor_hint = None
        self._sys_jac = None
        self._reflux_hint = 0.0
        self.column_solves = 0

    def _column_options(self, warm):
        return ColumnOptions(grid_n=self.scenario.grid_n, initial_profile=warm,
                             robust=not self.fast,
                             max_iter=50 if self.fast else 80)

    def solve(self, operating: OperatingPoint = None, tear_tol=1e-6, max_tear=40):
        sc = self.scenario if operating is None else self.scenario.with_operating(operating)
        pkg = self.package
        op = sc.operating
        if op.reboiler_temperature > 393.15 + REBOILER_T_TOLERANCE:
            raise ValueError("reboiler temperature exceeds the 120 C solvent cap")
        # a stripper pressure at or below the solvent water bubble pressure
        # boils the loop dry (total-reflux runaway); reject analytically
        w = sc.mea_mass_frac
        n_mea = w / MOLAR_MASS["mea"]
        n_h2o = (1.0 - w) / MOLAR_MASS["h2o"]
        x_w = n_h2o / (n_mea + n_h2o)
        p_w_lean = float(pkg.h2o_equilibrium_pressure(x_w, w, op.reboiler_temperature))
        if op.stripper_pressure <= 1.02 * p_w_lean:
            raise NonConvergenceError(
                f"stripper pressure {op.stripper_pressure:.0f} Pa is inside the "
                f"solvent boil-off region (water bubble {p_w_lean:.0f} Pa at the "
                "reboiler temperature)"
            )
        flue = sc.flue_gas

        alpha = self._alpha_hint if self._alpha_hint is not None else _lean_loading_guess(
            pkg, sc.mea_mass_frac, op
        )
        reflux = self._reflux_hint
        history = []
        prev = None
        tear_iters = 0
        result = None
        for tear_iters in range(1, max_tear + 1):
            lean_in = StreamState.solvent(
                op.solvent_flow, sc.mea_mass_frac, alpha,
                sc.lean_cooler_temperature, flue.pressure,
            )
            result = self._once_through(sc, lean_in, reflux)
            alpha_new = result["lean_from_reboiler"].co2_loading
            reflux_new = result["reflux"].flow("h2o")
            history.append((alpha, alpha_new, reflux, reflux_new))
            err = abs(alpha_new - alpha) + abs(reflux_new - reflux) / max(reflux_new, 1.0)
            if err <= tear_tol:
                break
            # bounded per-component Wegstein acceleration
            v = np.array([alpha, reflux])
            g = np.array([alpha_new, reflux_new])
            if prev is not None:
                v_old, g_old = prev
                with np.errstate(divide="ignore", invalid="ignore"):
                    slope = (g - g_old) / (v - v_old)
                q = np.where(np.isfinite(slope), slope / (slope - 1.0), 0.0)
                q = np.clip(q, -5.0, 0.0)
            else:
                q = np.zeros(2)
            prev = (v, g)
            nxt = q * v + (1.0 - q) * g
            alpha = float(min(max(nxt[0], 0.01), 0.45))
            reflux = float(max(nxt[1], 0.0))
        else:
            raise TearNonConvergenceError(
                "lean-loading tear failed to converge",
                diagnostics={"trace": history},
            )
        self._alpha_hint = alpha
        self._reflux_hint = reflux
        return self._assemble(sc, result, tear_iters)

    # ------------------------------------------------------------------
    def _once_through(self, sc: ProcessScenario, lean_in: StreamState, reflux_h2o=0.0):
        pkg = self.package
        op = sc.operating
        flue = sc.flue_gas

        abs_profile = solve_column(
            sc.absorber, op.omega_abs, {"vapor": flue, "liquid": lean_in},
            self._column_options(self._abs_profile), package=pkg, constants=sc.constants,
        )
        self.column_solves += 1
        self._abs_profile = abs_profile
        rich_cold = abs_profile.liquid_outlet()

        t_reb, p_str = op.reboiler_temperature, op.stripper_pressure
        rich_cold = StreamState.liquid(dict(rich_cold.molar_flows), rich_cold.temperature, p_str)
        t_rich_hot = max(rich_cold.temperature, t_reb - sc.hx_approach)
        rich_hot = rich_cold.with_temperature(t_rich_hot)

        # condenser reflux water returns to the stripper top: mix it into
        # the hot rich feed (tear-iterated amount), cooling it by enthalpy
        # balance
        if reflux_h2o > 1e-9:
            st = SolventState(rich_hot.mea_mass_frac, rich_hot.co2_loading,
                              rich_hot.temperature)
            cp_feed = pkg.liquid_properties(st)["heat_capacity"] * 1000.0
            n_feed = rich_hot.total_molar_flow
            t_mix = (
                n_feed * cp_feed * rich_hot.temperature
                + reflux_h2o * pkg.cp_water * sc.condenser_temperature
            ) / (n_feed * cp_feed + reflux_h2o * pkg.cp_water)
            rich_with_reflux = StreamState.liquid(
                {"co2": rich_hot.flow("co2"),
                 "h2o": rich_hot.flow("h2o") + reflux_h2o,
                 "mea": rich_hot.flow("mea")},
                t_mix, p_str,
            )
        else:
            rich_with_reflux = rich_hot

        # superheated feeds flash down to stripper pressure before the bed;
        # the flash vapor bypasses the packing into the overhead
        bed_feed, flash_vapor = adiabatic_feed_flash(rich_with_reflux, p_str, pkg)

        # stripper + reboiler coupling: the flash vapor is hypersensitive to
        # the bottoms state near the bubble point, so plain substitution is
        # unstable; close the 2-vector fixed point v = flash(bed(v)) with a
        # damped Newton on the stripping-vapor flows.
        vapor_guess, lean_reb, q_reb = solve_reboiler(bed_feed, t_reb, p_str, pkg)
        state = {"profile": self._str_profile, "lean": lean_reb, "q": q_reb,
                 "solves": 0}

        def bed_flash(v):
            vapor_in = StreamState.vapor(
                {"co2": max(v[0], 1e-9), "h2o": max(v[1], 1e-6), "n2": 0.0, "o2": 0.0},
                t_reb, p_str,
            )
            profile = solve_column(
                sc.stripper, op.omega_str,
                {"vapor": vapor_in, "liquid": bed_feed},
                self._column_options(state["profile"]), package=pkg,
                constants=sc.constants,
            )
            state["solves"] += 1
            state["profile"] = profile
            vapor_new, lean_new, q_new = solve_reboiler(
                profile.liquid_outlet(), t_reb, p_str, pkg
            )
            state["lean"], state["q"] = lean_new, q_new
            return np.array([vapor_new.flow("co2"), vapor_new.flow("h2o")])

        if self._vapor_hint is not None:
            v = np.maximum(np.asarray(self._vapor_hint, float), [1e-3, 1e-2])
        else:
            v = np.array([max(vapor_guess.flow("co2"), 1e-3),
                          max(vapor_guess.flow("h2o"), 1e-2)])
        g = bed_flash(v)

        def fd_jacobian(v0, g0):
            jac = np.zeros((2, 2))
            for j in range(2):
                dv = v0.copy()
                step = max(1e-4 * abs(v0[j]), 1e-6)
                dv[j] += step
                jac[:, j] = (bed_flash(dv) - g0 - (dv - v0)) / step
            return jac

        jac = self._sys_jac  # residual Jacobian d(g - v)/dv, Broyden-updated
        converged = False
        for _inner in range(20):
            f = g - v
            scale = max(float(np.sum(g)), 1e-9)
            if float(np.sum(np.abs(f))) / scale < 1e-6:
                converged = True
                break
            if jac is None:
                jac = fd_jacobian(v, g)
            try:
                newton_step = np.linalg.solve(jac, -f)
            except np.linalg.LinAlgError:
                newton_step = f  # fall back to substitution direction
            lam = 1.0
            norm0 = float(np.sum(np.abs(f)))
            accepted = False
            while lam > 1e-3:
                v_try = np.maximum(v + lam * newton_step, [1e-9, 1e-6])
                g_try = bed_flash(v_try)
                if float(np.sum(np.abs(g_try - v_try))) <= (1.0 - 1e-4 * lam) * norm0:
                    accepted = True
                    break
                lam *= 0.5
            if not accepted:
                # stale quasi-Newton model: rebuild once, else take the step
                if self._sys_jac is not None and _inner < 19:
                    jac = fd_jacobian(v, g)
                    self._sys_jac = None
                    continue
                v_try, g_try = np.maximum(v + newton_step, [1e-9, 1e-6]), g
            dv_step = v_try - v
            df_step = (g_try - v_try) - f
            denom = float(dv_step @ dv_step)
            if denom > 1e-20:
                jac = jac + np.outer(df_step - jac @ dv_step, dv_step) / denom
            v, g = v_try, g_try
        self._sys_jac = jac
        if not converged:
            f = g - v
            if float(np.sum(np.abs(f))) / max(float(np.sum(g)), 1e-9) > 1e-4:
                raise NonConvergenceError(
                    "stripper-reboiler coupling failed to close",
                    diagnostics={"vapor": v.tolist(), "mismatch": f.tolist()},
                )
        # re-anchor the bed on the converged vapor so profile and flash agree
        bed_flash(v)
        self.column_solves += state["solves"]
        self._str_profile = state["profile"]
        self._vapor_hint = v.copy()
        str_profile = state["profile"]
        lean_reb, q_reb = state["lean"], state["q"]
        bed_overhead = str_profile.vapor_outlet()
        overhead = StreamState.vapor(
            {
                c: bed_overhead.flow(c) + flash_vapor.flow(c)
                for c in ("co2", "h2o", "n2", "o2")
            },
            max(bed_overhead.temperature, flash_vapor.temperature), p_str,
        )
        product, reflux, q_cond = condense_overhead(
            overhead, sc.condenser_temperature, p_str, pkg
        )
        return {
            "lean_in": lean_in, "abs_profile": abs_profile, "rich_cold": rich_cold,
            "rich_hot": rich_hot, "bed_feed": bed_feed, "flash_vapor": flash_vapor,
            "str_profile": str_profile,
            "lean_from_reboiler": lean_reb, "q_reb": q_reb,
            "overhead": overhead, "product": product, "reflux": reflux, "q_cond": q_cond,
        }

    # ------------------------------------------------------------------
    def _assemble(self, sc: ProcessScenario, r: dict, tear_iters) -> ProcessSolution:
        pkg = self.package
        op = sc.operating
        lean_in, abs_profile = r["lean_in"], r["abs_profile"]
        str_profile, lean_reb = r["str_profile"], r["lean_from_reboiler"]
        rich_cold = r["rich_cold"]

        rich_hot2, lean_cold, q_hx = solve_cross_hx(
            rich_cold, lean_reb, sc.hx_approach, pkg
        )
        # lean cooler closes the temperature loop
        lean_cooled = lean_cold.with_temperature(sc.lean_cooler_temperature)
        q_cooler = (
            _liquid_enthalpy(lean_cold, pkg) - _liquid_enthalpy(lean_cooled, pkg)
        ) / 1000.0

        # makeup closes water and MEA so the recycle matches the lean spec
        avail = {
            "h2o": lean_cooled.flow("h2o"),
            "mea": lean_cooled.flow("mea"),
            "co2": lean_cooled.flow("co2"),
        }
        target = lean_in.molar_flows
        makeup = {k: target.get(k, 0.0) - avail.get(k, 0.0) for k in ("h2o", "mea")}

        kpis_abs = column_kpis(abs_profile)
        capture = kpis_abs["capture_fraction"]
        product = r["product"]
        m_co2 = product.flow("co2") * MOLAR_MASS["co2"]

        absorbed = abs_profile.vapor_inlet.flow("co2") - abs_profile.vapor_outlet().flow("co2")
        stripped = r["rich_hot"].flow("co2") - lean_reb.flow("co2")
        closure = abs(absorbed - stripped) / max(absorbed, 1e-12)

        lp = pkg.liquid_properties(
            SolventState(sc.mea_mass_frac, lean_in.co2_loading, lean_in.temperature)
        )
        liq_flow_abs = lean_in.mass_flow / lp["density"]
        lp_rich = pkg.liquid_properties(
            SolventState(r["rich_hot"].mea_mass_frac, r["rich_hot"].co2_loading,
                         r["rich_hot"].temperature)
        )
        liq_flow_str = r["rich_hot"].mass_flow / lp_rich["density"]
        e_rot_abs = rotation_energy(sc.absorber, liq_flow_abs, lp["density"], op.omega_abs) \
            if sc.absorber.rotating else 0.0
        e_rot_str = rotation_energy(sc.stripper, liq_flow_str, lp_rich["density"], op.omega_str) \
            if sc.stripper.rotating else 0.0

        # rich pump to stripper pressure plus the flue blower over the bed drop
        dp_pump = max(op.stripper_pressure - sc.flue_gas.pressure, 0.0) + abs(
            str_profile.pressure_drop()
        )
        e_pump = dp_pump * liq_flow_abs / PUMP_EFFICIENCY / 1000.0
        gas_volume = sc.flue_gas.total_molar_flow * R_GAS * sc.flue_gas.temperature / sc.flue_gas.pressure
        e_blower = abs(abs_profile.pressure_drop()) * gas_volume / BLOWER_EFFICIENCY / 1000.0
        e_comp = compressor_duty(product, sc.product_delivery_pressure)

        q_reb = r["q_reb"]
        srd = q_reb / max(m_co2, 1e-12) / 1000.0          # GJ/t
        sre = (e_rot_abs + e_rot_str) / max(m_co2, 1e-12) / 1000.0

        sol = ProcessSolution(
            scenario=sc,
            streams={
                "lean_in": lean_in, "rich_cold": rich_cold, "rich_hot": r["rich_hot"],
                "lean_from_reboiler": lean_reb, "lean_cold": lean_cold,
                "lean_cooled": lean_cooled, "overhead": r["overhead"],
                "product": product, "reflux": r["reflux"],
                "treated_gas": abs_profile.vapor_outlet(),
            },
            lean_loading=lean_in.co2_loading,
            rich_loading=rich_cold.co2_loading,
            l_over_g=lean_in.mass_flow / sc.flue_gas.mass_flow,
            capture_rate=capture,
            m_co2_captured=m_co2,
            q_reboiler=q_reb,
            q_condenser=r["q_cond"],
            q_lean_cooler=q_cooler,
            q_cross_hx=q_hx,
            e_rotation_abs=e_rot_abs,
            e_rotation_str=e_rot_str,
            e_pump=e_pump,
            e_blower=e_blower,
            e_compressor=e_comp,
            srd=srd,
            sre=sre,
            capture_energy=srd + sre / ELEC_TO_HEAT,
            absorber_profile=abs_profile,
            stripper_profile=str_profile,
            tear_iterations=tear_iters,
            column_solves=self.column_solves,
            co2_loop_closure=closure,
            makeup=makeup,
        )
        return sol


def equilibrium_lean_loading(package, w, t_reb, p_str):
    """Loading of solvent boiling at (t_reb, p_str): the reboiler pins it.

    Solves P*_co2(alpha) + P*_h2o(x_w(alpha)) = p_str; returns the loading
    floor 1e-3 when even CO2-free solvent boils above p_str.
    """
    n_mea = w / MOLAR_MASS["mea"]
    n_h2o = (1.0 - w) / MOLAR_MASS["h2o"]

    def bubble_excess(alpha):
        x_w = n_h2o / (n_mea + n_h2o + alpha * n_mea)
        p_w = package.h2o_equilibrium_pressure(x_w, w, t_reb)
        p_c = package.co2_equilibrium_pressure(SolventState(w, alpha, t_reb))
        return p_c + p_w - p_str

    lo, hi = 1e-3, 0.58
    if bubble_excess(lo) >= 0.0:
        return lo
    if bubble_excess(hi) <= 0.0:
        return hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if bubble_excess(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _lean_loading_guess(package, w, op: OperatingPoint):
    """Equilibrium-based initial lean loading at reboiler conditions."""
    alpha = equilibrium_lean_loading(package, w, op.reboiler_temperature,
                                     op.stripper_pressure)
    return float(min(max(alpha, 0.05), 0.40))


def solve_flowsheet(scenario: ProcessScenario, package=None, tear_tol=1e-6):
    """One-shot loop solve; see FlowsheetEvaluator for warm-started reuse."""
    return FlowsheetEvaluator(scenario, package).solve(tear_tol=tear_tol)


# ----------------------------------------------------------------------
# pilot-dataset validation
# ----------------------------------------------------------------------
DATASET_COLUMNS = [
    "run", "flue_mass_kg_s", "co2_mol_frac", "h2o_mol_frac", "o2_mol_frac",
    "t_in_c", "p_bar", "solvent_flow_kg_s", "mea_mass_frac", "lean_loading",
    "rpm", "r_inner_m", "r_outer_m", "height_m",
    "measured_capture_pct", "measured_rich_t_c",
]


def validate_against_dataset(path, package=None, grid_n=30):
    """Run the absorber model over a pilot dataset and report MARE.

    The CSV schema is DATASET_COLUMNS; measured columns are compared with
    model predictions run by run. Returns {'per_run': [...], 'mare': {...}}.
    """
    from .column import RpbGeometry
    from .transfer import PackingSpec

    package = package or default_package()
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        missing = set(DATASET_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"dataset schema mismatch; missing columns {sorted(missing)}")
        rows = [dict(r) for r in reader]

    per_run = []
    for row in rows:
        vals = {k: float(row[k]) for k in DATASET_COLUMNS if k != "run"}
        n_tot = vals["flue_mass_kg_s"] / _mixture_molar_mass(vals)
        y_n2 = 1.0 - vals["co2_mol_frac"] - vals["h2o_mol_frac"] - vals["o2_mol_frac"]
        flue = StreamState.vapor(
            {
                "co2": vals["co2_mol_frac"] * n_tot,
                "h2o": vals["h2o_mol_frac"] * n_tot,
                "n2": y_n2 * n_tot,
                "o2": vals["o2_mol_frac"] * n_tot,
            },
            celsius_to_kelvin(vals["t_in_c"]),
            vals["p_bar"] * 1e5,
        )
        lean = StreamState.solvent(
            vals["solvent_flow_kg_s"], vals["mea_mass_frac"], vals["lean_loading"],
            celsius_to_kelvin(vals["t_in_c"]), vals["p_bar"] * 1e5,
        )
        geom = RpbGeometry(vals["r_inner_m"], vals["r_outer_m"], vals["height_m"],
                           PackingSpec(803.0, 0.96))
        profile = solve_column(
            geom, rpm_to_rad_s(vals["rpm"]), {"vapor": flue, "liquid": lean},
            ColumnOptions(grid_n=grid_n), package=package,
        )
        model_capture = 100.0 * column_kpis(profile)["capture_fraction"]
        model_rich_t = profile.liquid_outlet().temperature - 273.15
        per_run.append(
            {
                "run": row["run"],
                "model_capture_pct": model_capture,
                "measured_capture_pct": vals["measured_capture_pct"],
                "model_rich_t_c": model_rich_t,
                "measured_rich_t_c": vals["measured_rich_t_c"],
            }
        )
    mare = {}
    for model_key, meas_key, name in [
        ("model_capture_pct", "measured_capture_pct", "capture_rate"),
        ("model_rich_t_c", "measured_rich_t_c", "rich_temperature"),
    ]:
        errs = [
            abs(p[model_key] - p[meas_key]) / abs(p[meas_key])
            for p in per_run
            if p[meas_key] != 0.0
        ]
        mare[name] = float(np.mean(errs)) if errs else np.nan
    return {"per_run": per_run, "mare": mare}


def _mixture_molar_mass(vals):
    y_n2 = 1.0 - vals["co2_mol_frac"] - vals["h2o_mol_frac"] - vals["o2_mol_frac"]
    return (
        vals["co2_mol_frac"] * MOLAR_MASS["co2"]
        + vals["h2o_mol_frac"] * MOLAR_MASS["h2o"]
        + y_n2 * MOLAR_MASS["n2"]
        + vals["o2_mol_frac"] * MOLAR_MASS["o2"]
    )
