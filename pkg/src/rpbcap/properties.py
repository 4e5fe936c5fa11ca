"""Thermodynamic and transport properties of the MEA-H2O-CO2 system.

Parameterized correlations covering 30-70 wt% MEA. Coefficients live in a
versioned multi-document YAML file (one document per wt% bracket plus a
shared document); bracket sets are interpolated linearly in mass fraction
and returned verbatim at the bracket points. All evaluations are pure
functions of their inputs and accept numpy arrays for the state fields.

Out-of-range inputs are clamped to the validity edge and a
CorrelationRangeWarning is emitted, so wide-ranging optimizer probes never
abort inside a property call.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from .constants import GAS_COMPONENTS, MOLAR_MASS, R_GAS
from .errors import CorrelationRangeWarning, MissingCoefficientsError
from .streams import StreamState

VLE_ONSET_LOADING = 0.01  # tanh onset width; P* -> 0 smoothly as loading -> 0
DH_ABS_FD_STEP = 1.0      # K, central difference for the heat of absorption


@dataclass(frozen=True)
class SolventState:
    """Bulk liquid state: CO2-free MEA mass fraction, loading, temperature.

    Fields may be scalars or numpy arrays of equal shape.
    """

    mea_mass_frac: float
    co2_loading: float
    temperature: float

    def __post_init__(self):
        w = np.asarray(self.mea_mass_frac)
        a = np.asarray(self.co2_loading)
        if np.any(w <= 0.0) or np.any(w >= 1.0):
            raise ValueError("mea_mass_frac must lie in (0, 1)")
        if np.any(a < 0.0):
            raise ValueError("co2_loading must be nonnegative")


def _clamp(value, lo, hi, what):
    arr = np.asarray(value, dtype=float)
    if np.any(arr < lo) or np.any(arr > hi):
        warnings.warn(
            f"{what} outside validity range [{lo}, {hi}]; clamped",
            CorrelationRangeWarning,
            stacklevel=3,
        )
        arr = np.clip(arr, lo, hi)
    return arr if arr.ndim else float(arr)


def _load_documents(path=None):
    if path is None:
        source = resources.files("rpbcap.data").joinpath("mea_properties.yaml")
        text = source.read_text()
    else:
        with open(path, "r") as fh:
            text = fh.read()
    return list(yaml.safe_load_all(text))


class PropertyTables:
    """Parsed coefficient sets: one shared document plus wt% brackets."""

    def __init__(self, documents):
        shared = [d for d in documents if d.get("document") == "shared"]
        brackets = [d for d in documents if d.get("document") == "bracket"]
        if not shared or not brackets:
            raise MissingCoefficientsError(
                "property file must contain a shared document and >=1 bracket"
            )
        self.shared = shared[0]
        self.brackets = sorted(brackets, key=lambda d: d["mea_mass_frac"])
        self.bracket_fracs = np.array([d["mea_mass_frac"] for d in self.brackets])
        self.schema_version = self.shared.get("schema_version")

    @classmethod
    def from_file(cls, path=None):
        return cls(_load_documents(path))

    def bracket_coeffs(self, block, w):
        """Linear interpolation of a per-bracket coefficient block in w.

        Exact (verbatim dict) at bracket points; clamped with a warning
        outside the shipped bracket span.
        """
        fr = self.bracket_fracs
        w = _clamp(w, fr[0], fr[-1], "mea_mass_frac")
        sets = []
        for doc in self.brackets:
            if block not in doc:
                raise MissingCoefficientsError(
                    f"bracket {doc['mea_mass_frac']} lacks block {block!r}"
                )
            sets.append(doc[block])
        if "coefficients" in sets[0]:
            keys = sets[0]["coefficients"].keys()
            values = {
                k: np.interp(w, fr, np.array([s["coefficients"][k] for s in sets]))
                for k in keys
            }
        else:
            values = {"value": np.interp(w, fr, np.array([s["value"] for s in sets]))}
        return values

    def validity(self, w=None):
        return self.brackets[0]["validity"]


class PropertyPackage:
    """Stateless property evaluator bound to a PropertyTables instance.

    Safe for concurrent read-only use; construction parses the data file
    once and every method is a pure function of its arguments.
    """

    def __init__(self, tables=None):
        self.tables = tables if tables is not None else PropertyTables.from_file()
        v = self.tables.validity()
        self._t_lo, self._t_hi = v["temperature_k"]
        self._a_lo, self._a_hi = v["co2_loading"]
        ls = self.tables.shared["liquid_shared"]
        self._rho_c = ls["density"]["coefficients"]
        self._mu_c = ls["viscosity"]["coefficients"]
        self._cp_c = ls["heat_capacity_mass"]["coefficients"]
        self._dif_c = ls["diffusivity_co2"]["coefficients"]
        self._dmea_ratio = ls["diffusivity_mea_ratio"]["value"]
        self._gam_c = ls["surface_tension"]["coefficients"]
        self._kin_c = ls["kinetics"]["coefficients"]
        w = self.tables.shared["water"]
        self._ant = w["antoine"]["coefficients"]
        self.dh_vap_water = w["heat_of_vaporization"]["value"]  # J/mol
        self.cp_water = w["heat_capacity"]["value"]             # J/mol/K
        g = self.tables.shared["gas"]
        self._gas_cp = g["heat_capacity_linear"]["coefficients"]
        self._gas_mu = g["viscosity_ref"]
        self._gas_lam = g["thermal_conductivity"]
        self._fuller = g["fuller_diffusion_volumes"]["coefficients"]

    # ------------------------------------------------------------------
    # vapor-liquid equilibrium
    # ------------------------------------------------------------------
    def _vle_lnp(self, w, alpha, t):
        c = self.tables.bracket_coeffs("vle", w)
        return c["c0"] + c["c1"] * alpha + c["c2"] * alpha**2 + c["c3"] / t + c["c4"] * alpha / t

    def co2_equilibrium_pressure(self, state: SolventState):
        """CO2 equilibrium partial pressure P* over the solvent, Pa.

        Strictly increasing in loading and in temperature; returns an
        exact 0 at zero loading (fresh solvent) through a tanh onset
        factor that leaves the surrogate untouched above loading ~0.04.
        """
        t = _clamp(state.temperature, self._t_lo, self._t_hi, "temperature")
        alpha = _clamp(state.co2_loading, self._a_lo, self._a_hi, "co2_loading")
        lnp = self._vle_lnp(state.mea_mass_frac, alpha, t)
        return np.tanh(np.asarray(state.co2_loading) / VLE_ONSET_LOADING) * np.exp(lnp)

    def co2_loading_at_equilibrium(self, w, t, p_co2):
        """Inverse isotherm: loading with P*(loading) = p_co2 (scalar)."""
        if p_co2 <= 0.0:
            return 0.0
        lo, hi = 1e-6, self._a_hi
        f = lambda a: self.co2_equilibrium_pressure(SolventState(w, a, t)) - p_co2
        if f(hi) < 0.0:
            return hi
        if f(lo) > 0.0:
            return lo
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0.0:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def heat_of_absorption(self, state: SolventState):
        """CO2 absorption heat magnitude, kJ/mol, via Clausius-Clapeyron.

        Central finite difference of ln P* over +-1 K around the state
        temperature; exact for the shipped surrogate because ln P* is
        linear in 1/T.
        """
        d = DH_ABS_FD_STEP
        t = _clamp(state.temperature, self._t_lo + d, self._t_hi - d, "temperature")
        alpha = _clamp(state.co2_loading, max(self._a_lo, 1e-9), self._a_hi, "co2_loading")
        w = state.mea_mass_frac
        lo = self._vle_lnp(w, alpha, t - d)
        hi = self._vle_lnp(w, alpha, t + d)
        dln_dinvt = (hi - lo) / (1.0 / (t + d) - 1.0 / (t - d))
        out = -R_GAS * dln_dinvt / 1000.0
        return out if np.ndim(out) else float(out)

    def henry_co2(self, state: SolventState):
        """Henry constant of CO2 in the solvent, Pa.m3/mol (N2O analogy)."""
        c = self.tables.bracket_coeffs("henry_co2", state.mea_mass_frac)
        t = _clamp(state.temperature, self._t_lo, self._t_hi, "temperature")
        return c["h0"] * np.exp(c["h1"] / t) * c["mea_factor"]

    def water_activity(self, w):
        return self.tables.bracket_coeffs("water_activity", w)["value"]

    def water_psat(self, t):
        """Saturation pressure of pure water, Pa."""
        a = self._ant
        return np.exp(a["a"] - a["b"] / (np.asarray(t, dtype=float) + a["c"]))

    def h2o_equilibrium_pressure(self, x_h2o, w, t):
        """Water equilibrium partial pressure over the solvent, Pa."""
        return x_h2o * self.water_activity(w) * self.water_psat(t)

    # ------------------------------------------------------------------
    # liquid bulk properties
    # ------------------------------------------------------------------
    def liquid_properties(self, state: SolventState):
        """Density, viscosity, molar heat capacity and diffusivities.

        Returns a dict: density kg/m3, viscosity Pa.s, heat_capacity
        kJ/mol/K (per mole of apparent solution), d_co2 and d_mea m2/s.
        """
        t = _clamp(state.temperature, self._t_lo, self._t_hi, "temperature")
        alpha = _clamp(state.co2_loading, self._a_lo, self._a_hi, "co2_loading")
        w = np.asarray(state.mea_mass_frac, dtype=float)
        c = self._rho_c
        rho = c["a0"] + c["a1"] * t + c["a2"] * t**2 + w * (c["b0"] + c["b1"] * t) + c["c0"] * alpha * w
        mu_w = 2.414e-5 * 10.0 ** (247.8 / (t - 140.0))
        v = self._mu_c
        mu = mu_w * np.exp((v["v1"] * w + v["v2"] * w**2) * (1.0 + v["v3"] * alpha) * (313.15 / t))
        h = self._cp_c
        cp_mass = h["h0"] + h["h1"] * w + h["h2"] * alpha * w + h["h3"] * (t - 313.15)  # kJ/kg/K
        d = self._dif_c
        d_co2 = d["d0"] * np.exp(d["d1"] / t) * (mu_w / mu) ** d["d2"]
        g = self._gam_c
        gamma = g["g0"] + g["g1"] * (t - 293.15) + g["g2"] * w
        m_avg = self.liquid_molar_mass(state)
        return {
            "density": rho,
            "viscosity": mu,
            "heat_capacity": cp_mass * m_avg,  # kJ/mol/K
            "heat_capacity_mass": cp_mass,     # kJ/kg/K
            "d_co2": d_co2,
            "d_mea": self._dmea_ratio * d_co2,
            "surface_tension": gamma,
        }

    def liquid_molar_mass(self, state: SolventState):
        """Apparent molar mass of the solution, kg/mol."""
        w = np.asarray(state.mea_mass_frac, dtype=float)
        alpha = np.asarray(state.co2_loading, dtype=float)
        n_mea = w / MOLAR_MASS["mea"]
        n_h2o = (1.0 - w) / MOLAR_MASS["h2o"]
        n_co2 = alpha * n_mea
        mass = 1.0 + n_co2 * MOLAR_MASS["co2"]
        return mass / (n_mea + n_h2o + n_co2)

    def mea_molarity(self, state: SolventState):
        """Total MEA concentration, mol/m3 of solution."""
        props = self.liquid_properties(state)
        w = np.asarray(state.mea_mass_frac, dtype=float)
        alpha = np.asarray(state.co2_loading, dtype=float)
        mass_per_kg_solvent = 1.0 + alpha * w / MOLAR_MASS["mea"] * MOLAR_MASS["co2"]
        return w / MOLAR_MASS["mea"] / mass_per_kg_solvent * props["density"]

    def free_mea_molarity(self, state: SolventState):
        """Unreacted amine concentration, mol/m3.

        The consumption stoichiometry is bracket-interpolated: carbamate
        (2 MEA per CO2) toward dilute solvent, drifting toward the
        bicarbonate path (fewer MEA per CO2) in concentrated solvent.
        """
        total = self.mea_molarity(state)
        stoich = self.tables.bracket_coeffs("stoichiometry", state.mea_mass_frac)["value"]
        depletion = 1.0 - stoich * np.asarray(state.co2_loading)
        return total * np.maximum(0.0, depletion)

    def reaction_rate_constant(self, state: SolventState, c_mea):
        """Apparent pseudo-first-order rate constant k_app = k2(T)*c_mea, 1/s.

        k2 carries a per-bracket concentration factor standing in for the
        higher-order amine dependence of the direct mechanism.
        """
        c_mea = np.asarray(c_mea, dtype=float)
        if np.any(c_mea < 0.0):
            raise ValueError("c_mea must be nonnegative")
        t = _clamp(state.temperature, self._t_lo, self._t_hi, "temperature")
        factor = self.tables.bracket_coeffs("kinetics_factor", state.mea_mass_frac)["value"]
        k2 = self._kin_c["A"] * np.exp(-self._kin_c["Ea_R"] / t) * factor
        out = k2 * c_mea
        return out if np.ndim(out) else float(out)

    # ------------------------------------------------------------------
    # gas properties
    # ------------------------------------------------------------------
    def gas_props_arrays(self, y, t, p):
        """Vectorized gas-mixture properties.

        Parameters
        ----------
        y : dict of mole fractions per component (arrays ok), normalized.
        t, p : temperature K and pressure Pa.

        Returns dict with density (ideal gas), viscosity, molar and mass
        heat capacity, per-component Fuller diffusivities, molar mass and
        thermal conductivity.
        """
        t = np.asarray(t, dtype=float)
        p = np.asarray(p, dtype=float)
        m_bar = sum(y[k] * MOLAR_MASS[k] for k in GAS_COMPONENTS)
        rho = p * m_bar / (R_GAS * t)
        tr = self._gas_mu["reference_temperature_k"]
        ex = self._gas_mu["exponent"]
        mu = sum(
            y[k] * self._gas_mu["coefficients"][k] for k in GAS_COMPONENTS
        ) * (t / tr) ** ex
        cp = sum(
            y[k] * (self._gas_cp[k][0] + self._gas_cp[k][1] * t) for k in GAS_COMPONENTS
        )  # J/mol/K
        lam = self._gas_lam["reference"] * (t / self._gas_lam["reference_temperature_k"]) ** self._gas_lam["exponent"]
        vmix = self._fuller["mixture"]
        m_bar_g = m_bar * 1000.0  # g/mol for the Fuller form
        diff = {}
        for k in GAS_COMPONENTS:
            m_ab = 2.0 / (1.0 / (MOLAR_MASS[k] * 1000.0) + 1.0 / m_bar_g)
            denom = (p / 1e5) * np.sqrt(m_ab) * (self._fuller[k] ** (1 / 3) + vmix ** (1 / 3)) ** 2
            diff[k] = 0.00143 * t**1.75 / denom * 1e-4  # m2/s
        return {
            "density": rho,
            "viscosity": mu,
            "heat_capacity": cp / 1000.0,  # kJ/mol/K
            "heat_capacity_mass": cp / 1000.0 / m_bar,  # kJ/kg/K
            "diffusivity": diff,
            "molar_mass": m_bar,
            "thermal_conductivity": lam,
        }

    def gas_properties(self, stream: StreamState):
        """Gas-mixture properties of a vapor StreamState (see gas_props_arrays)."""
        if stream.phase != "vapor":
            raise ValueError("gas_properties expects a vapor stream")
        if stream.temperature <= 0.0 or stream.pressure <= 0.0:
            raise ValueError("temperature and pressure must be positive")
        y = stream.normalized_composition()
        y = {k: y.get(k, 0.0) for k in GAS_COMPONENTS}
        return self.gas_props_arrays(y, stream.temperature, stream.pressure)


_DEFAULT_PACKAGE = None


def default_package():
    """Process-wide package built from the shipped coefficient file."""
    global _DEFAULT_PACKAGE
    if _DEFAULT_PACKAGE is None:
        _DEFAULT_PACKAGE = PropertyPackage()
    return _DEFAULT_PACKAGE
