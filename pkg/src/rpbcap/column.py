"""Steady-state counter-current column model for rotating and fixed beds.

The radial balances are discretized with cell-centered finite volumes,
uniform in the flow coordinate, first-order upwind in each phase's flow
direction. Vapor enters at the outer face and flows inward; liquid enters
at the inner face and is thrown outward. A fixed bed reuses the same
kernel with a constant flow area and zero rotation (the correlations fall
back to gravity).

Unknowns per cell: vapor and liquid molar flows for each of the four gas
components, the two phase temperatures and the vapor pressure, i.e.
grid_n * (2 * 4 + 2 + 1) values in the flat vector handed to the residual
assembler. Liquid MEA is nonvolatile and travels as a conserved parameter.

The nonlinear system is solved by damped Newton with a colored
finite-difference Jacobian (block-tridiagonal sparsity, factorized with
SuperLU), continuation on the interphase-flux scale for cold starts, and
a pseudo-transient fallback.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .constants import GAS_COMPONENTS, MOLAR_MASS, R_GAS, T_REF
from .errors import FloodingExceededWarning, NonConvergenceError
from .properties import PropertyPackage, SolventState, default_package
from .streams import StreamState
from .transfer import (
    GasPhaseState,
    LiquidPhaseState,
    TransferConstants,
    effective_area,
    enhancement_factor,
    flooding_ratio,
    flooding_velocity,
    hatta_number,
    heat_transfer_coefficient,
    instantaneous_enhancement,
    interphase_flux,
    liquid_holdup,
    liquid_mtc,
    overall_mtc_co2,
    overall_mtc_gas_film,
    vapor_mtc,
)

N_COMP = len(GAS_COMPONENTS)
NVAR = 2 * N_COMP + 3  # vapor flows, liquid flows, T_V, T_L, P
_IDX = {name: i for i, name in enumerate(GAS_COMPONENTS)}


@dataclass(frozen=True)
class RpbGeometry:
    """Annular rotating bed: radii, packing height and packing spec."""

    r_inner: float
    r_outer: float
    height: float
    packing: object

    def __post_init__(self):
        if not 0.0 < self.r_inner < self.r_outer:
            raise ValueError("need 0 < r_inner < r_outer")
        if self.height <= 0.0:
            raise ValueError("height must be positive")

    @property
    def aspect_ratio(self):
        """H / (2 r_outer), checked against the stout-rotor design bound."""
        return self.height / (2.0 * self.r_outer)

    @property
    def span(self):
        return (self.r_inner, self.r_outer)

    @property
    def packing_volume(self):
        return np.pi * (self.r_outer**2 - self.r_inner**2) * self.height

    def flow_area(self, s):
        return 2.0 * np.pi * np.asarray(s) * self.height

    def cell_volumes(self, faces):
        return np.pi * self.height * (faces[1:] ** 2 - faces[:-1] ** 2)

    rotating = True


@dataclass(frozen=True)
class PbGeometry:
    """Conventional cylindrical tower; flow coordinate is depth from the top."""

    radius: float
    height: float
    packing: object

    def __post_init__(self):
        if self.radius <= 0.0 or self.height <= 0.0:
            raise ValueError("radius and height must be positive")

    @property
    def span(self):
        return (0.0, self.height)

    @property
    def packing_volume(self):
        return np.pi * self.radius**2 * self.height

    @property
    def aspect_ratio(self):
        return self.height / (2.0 * self.radius)

    def flow_area(self, s):
        return np.pi * self.radius**2 * np.ones_like(np.asarray(s, dtype=float))

    def cell_volumes(self, faces):
        return np.pi * self.radius**2 * np.diff(faces)

    rotating = False


@dataclass(frozen=True)
class ColumnOptions:
    grid_n: int = 40
    tol: float = 1e-8
    max_iter: int = 80
    min_damping: float = 1e-6
    flux_scale: float = 1.0
    continuation_steps: tuple = (0.25, 0.55, 1.0)
    initial_profile: "ColumnProfile | None" = None
    dh_vap_override: float | None = None
    robust: bool = True   # False skips the dense ladder / pseudo-transient rescue


@dataclass
class ColumnProfile:
    """Converged (or best-iterate) radial profiles of one column solve."""

    geometry: object
    omega: float
    nodes: np.ndarray                 # cell centers, m
    faces: np.ndarray
    vapor_flows: np.ndarray           # (n, 4) mol/s
    liquid_flows: np.ndarray          # (n, 4) mol/s
    liquid_mea: float                 # mol/s, constant
    t_vapor: np.ndarray
    t_liquid: np.ndarray
    pressure: np.ndarray
    vapor_inlet: StreamState
    liquid_inlet: StreamState
    transfer: dict = field(default_factory=dict)
    converged: bool = False
    iterations: int = 0
    residual_norm: float = np.inf
    flagged_flooding: bool = False

    def vapor_outlet(self):
        flows = {c: float(self.vapor_flows[0, _IDX[c]]) for c in GAS_COMPONENTS}
        return StreamState.vapor(flows, float(self.t_vapor[0]), float(self.pressure[0]))

    def liquid_outlet(self):
        flows = {
            "co2": float(self.liquid_flows[-1, _IDX["co2"]]),
            "h2o": float(self.liquid_flows[-1, _IDX["h2o"]]),
            "mea": self.liquid_mea,
        }
        return StreamState.liquid(flows, float(self.t_liquid[-1]), float(self.pressure[-1]))

    def component_closure(self):
        """Relative per-component balance error |in - out| / in."""
        out = {}
        for c in GAS_COMPONENTS:
            i = _IDX[c]
            inflow = self.vapor_inlet.flow(c) + self.liquid_inlet.flow(c)
            outflow = self.vapor_flows[0, i] + self.liquid_flows[-1, i]
            out[c] = abs(inflow - outflow) / max(abs(inflow), 1e-12)
        return out

    def energy_closure(self):
        """Relative enthalpy closure of the discrete scheme."""
        tr = self.transfer
        e_in = tr["phi_v_inlet"] + tr["phi_l_inlet"]
        e_out = tr["phi_v_outlet"] + tr["phi_l_outlet"]
        return abs(e_in + tr["latent_total"] - e_out) / max(abs(e_in), abs(e_out), 1.0)

    def pressure_drop(self):
        """Total vapor pressure change across the packing, Pa."""
        return float(self.pressure[-1] - self.pressure[0])

    def peak_flooding(self):
        return float(np.max(self.transfer["flooding"]))

    def to_csv(self, path, manifest_hash=None):
        """One row per node; header row carries units."""
        cols = [("position", "m")]
        cols += [(f"vapor_{c}", "mol/s") for c in GAS_COMPONENTS]
        cols += [(f"liquid_{c}", "mol/s") for c in GAS_COMPONENTS]
        cols += [("liquid_mea", "mol/s"), ("t_vapor", "K"), ("t_liquid", "K"), ("pressure", "Pa")]
        extra = ["k_l", "a_eff", "e_co2", "holdup", "flooding", "flux_co2", "flux_h2o"]
        units = {"k_l": "m/s", "a_eff": "m2/m3", "e_co2": "-", "holdup": "-",
                 "flooding": "%", "flux_co2": "mol/m2/s", "flux_h2o": "mol/m2/s"}
        cols += [(name, units[name]) for name in extra]
        n = len(self.nodes)
        data = np.column_stack(
            [self.nodes, self.vapor_flows, self.liquid_flows,
             np.full(n, self.liquid_mea), self.t_vapor, self.t_liquid, self.pressure]
            + [np.asarray(self.transfer[name]) for name in extra]
        )
        with open(path, "w") as fh:
            if manifest_hash:
                fh.write(f"# manifest_hash: {manifest_hash}\n")
            fh.write(",".join(f"{name} [{u}]" for name, u in cols) + "\n")
            for row in data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


class _Assembler:
    """Precomputed grid/inlet data and the vectorized residual function."""

    def __init__(self, geometry, omega, vapor_in: StreamState, liquid_in: StreamState,
                 grid_n, package: PropertyPackage, constants: TransferConstants,
                 dh_vap=None):
        if grid_n < 5:
            raise ValueError("grid_n must be at least 5")
        self.geometry = geometry
        self.omega = float(omega)
        self.package = package
        self.constants = constants
        self.n = int(grid_n)
        s0, s1 = geometry.span
        self.faces = np.linspace(s0, s1, self.n + 1)
        self.centers = 0.5 * (self.faces[1:] + self.faces[:-1])
        self.volumes = geometry.cell_volumes(self.faces)
        self.areas = geometry.flow_area(self.centers)
        self.pack = geometry.packing
        self.vapor_in = vapor_in
        self.liquid_in = liquid_in
        self.dh_vap = package.dh_vap_water if dh_vap is None else dh_vap

        self.v_in = np.array([vapor_in.flow(c) for c in GAS_COMPONENTS])
        self.l_in = np.array([liquid_in.flow(c) for c in GAS_COMPONENTS])
        self.l_mea = liquid_in.flow("mea")
        if self.l_mea <= 0.0:
            raise ValueError("liquid inlet must carry MEA")

        self.f_scale_v = max(self.v_in.sum(), 1e-9)
        self.f_scale_l = max(self.l_in.sum() + self.l_mea, 1e-9)
        self.e_scale_v = self.f_scale_v * 35.0 * 50.0
        self.e_scale_l = self.f_scale_l * 90.0 * 50.0
        self.p_scale = 1e3
        per_cell_x = np.concatenate(
            [np.full(N_COMP, self.f_scale_v), np.full(N_COMP, self.f_scale_l), [100.0, 100.0, 1e4]]
        )
        self.x_scale = np.tile(per_cell_x, self.n)
        per_cell_r = np.concatenate(
            [np.full(N_COMP, self.f_scale_v), np.full(N_COMP, self.f_scale_l),
             [self.e_scale_v, self.e_scale_l, self.p_scale]]
        )
        self.r_scale = np.tile(per_cell_r, self.n)

        # inlet enthalpy fluxes, same discrete definition as interior faces
        t_in = vapor_in.temperature
        self.phi_v_inlet = float(
            sum(vapor_in.flow(c) * self._cp_gas(c, t_in) for c in GAS_COMPONENTS) * (t_in - T_REF)
        )
        st_in = SolventState(liquid_in.mea_mass_frac, liquid_in.co2_loading, liquid_in.temperature)
        lp_in = package.liquid_properties(st_in)
        self.phi_l_inlet = float(
            liquid_in.total_molar_flow * lp_in["heat_capacity"] * 1000.0
            * (liquid_in.temperature - T_REF)
        )

    def _cp_gas(self, comp, t):
        a, b = self.package._gas_cp[comp]
        return a + b * t  # J/mol/K

    # ------------------------------------------------------------------
    def initial_vector(self):
        """Pass-through initial guess at inlet conditions."""
        grid = np.zeros((self.n, NVAR))
        grid[:, 0:N_COMP] = self.v_in
        grid[:, N_COMP:2 * N_COMP] = self.l_in
        grid[:, 2 * N_COMP] = self.vapor_in.temperature
        grid[:, 2 * N_COMP + 1] = self.liquid_in.temperature
        grid[:, 2 * N_COMP + 2] = self.vapor_in.pressure
        return grid.ravel()

    def vector_from_profile(self, profile: ColumnProfile):
        grid = np.zeros((self.n, NVAR))
        grid[:, 0:N_COMP] = profile.vapor_flows
        grid[:, N_COMP:2 * N_COMP] = profile.liquid_flows
        grid[:, 2 * N_COMP] = profile.t_vapor
        grid[:, 2 * N_COMP + 1] = profile.t_liquid
        grid[:, 2 * N_COMP + 2] = profile.pressure
        return grid.ravel()

    def _states(self, x):
        grid = x.reshape(self.n, NVAR)
        return (grid[:, 0:N_COMP], grid[:, N_COMP:2 * N_COMP],
                grid[:, 2 * N_COMP], grid[:, 2 * N_COMP + 1], grid[:, 2 * N_COMP + 2])

    def evaluate(self, x, flux_scale):
        """Residual vector plus the local property/transfer snapshot."""
        n = self.n
        v, l, t_v, t_l, p = self._states(x)

        # guarded copies for property evaluation only; balances use raw x
        v_g = np.maximum(v, 0.0)
        l_g = np.maximum(l, 0.0)
        t_v_g = np.clip(t_v, 288.0, 430.0)
        t_l_g = np.clip(t_l, 288.0, 430.0)
        p_g = np.clip(p, 2e4, 8e5)

        v_tot = np.maximum(v_g.sum(axis=1), 1e-12)
        y = {c: v_g[:, _IDX[c]] / v_tot for c in GAS_COMPONENTS}

        m_mea = self.l_mea * MOLAR_MASS["mea"]
        m_h2o = np.maximum(l_g[:, _IDX["h2o"]], 1e-12) * MOLAR_MASS["h2o"]
        w = np.clip(m_mea / (m_mea + m_h2o), 0.05, 0.90)
        alpha = np.clip(l_g[:, _IDX["co2"]] / self.l_mea, 0.0, 0.65)
        l_tot = l_g[:, _IDX["co2"]] + l_g[:, _IDX["h2o"]] + self.l_mea

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sol = SolventState(w, alpha, t_l_g)
            lp = self.package.liquid_properties(sol)
            gp = self.package.gas_props_arrays(y, t_v_g, p_g)
            he = self.package.henry_co2(sol)
            p_star_co2 = self.package.co2_equilibrium_pressure(sol)
            dh_abs = self.package.heat_of_absorption(sol) * 1000.0  # J/mol
            c_free = self.package.free_mea_molarity(sol)
            k_app = self.package.reaction_rate_constant(sol, c_free)
            x_h2o = l_g[:, _IDX["h2o"]] / l_tot
            p_star_h2o = self.package.h2o_equilibrium_pressure(x_h2o, w, t_l_g)

        u_v = v_tot * R_GAS * t_v_g / p_g / self.areas
        l_mass = (l_g[:, _IDX["co2"]] * MOLAR_MASS["co2"] + m_h2o + m_mea)
        u_l = l_mass / lp["density"] / self.areas

        liq = LiquidPhaseState(lp["density"], lp["viscosity"], u_l, lp["d_co2"],
                               lp["surface_tension"])
        a_eff = effective_area(liq, self.pack, self.omega, self.centers, self.constants)
        a_eff = np.minimum(a_eff, self.pack.cavity_correction * self.pack.specific_surface_area)
        k_l = liquid_mtc(liq, self.pack, self.omega, self.centers, a_eff, self.constants)

        k_v = {}
        for c in GAS_COMPONENTS:
            gas_c = GasPhaseState(gp["density"], gp["viscosity"], u_v, gp["diffusivity"][c],
                                  gp["heat_capacity_mass"], gp["thermal_conductivity"])
            k_v[c] = vapor_mtc(gas_c, self.pack)

        ha = hatta_number(k_app, lp["d_co2"], k_l)
        p_co2 = y["co2"] * p_g
        c_co2_i = np.maximum(p_co2, 1.0) / he
        e_inf = instantaneous_enhancement(lp["d_mea"], c_free, lp["d_co2"], c_co2_i)
        e_co2 = enhancement_factor(ha, e_inf, self.constants.enhancement_exponent)

        k_ov = {
            "co2": overall_mtc_co2(k_v["co2"], k_l, e_co2, he, t_v_g),
            "h2o": overall_mtc_gas_film(k_v["h2o"], t_v_g),
        }
        fluxes = {
            "co2": flux_scale * interphase_flux(k_ov["co2"], p_co2, p_star_co2),
            "h2o": flux_scale * interphase_flux(k_ov["h2o"], y["h2o"] * p_g, p_star_h2o),
            "n2": np.zeros(n),
            "o2": np.zeros(n),
        }

        gas_co2 = GasPhaseState(gp["density"], gp["viscosity"], u_v, gp["diffusivity"]["co2"],
                                gp["heat_capacity_mass"], gp["thermal_conductivity"])
        h_heat = flux_scale * heat_transfer_coefficient(k_v["co2"], gas_co2) * 1000.0  # W/m2/K

        cp_gas = {c: self._cp_gas(c, t_v_g) for c in GAS_COMPONENTS}
        dpds = self._dpds(gp, u_v)

        snapshot = {
            "y": y, "w": w, "alpha": alpha, "lp": lp, "gp": gp,
            "k_v": k_v, "k_l": k_l, "a_eff": a_eff, "e_co2": e_co2, "ha": ha,
            "k_overall": k_ov, "fluxes": fluxes, "h_heat": h_heat,
            "u_v": u_v, "u_l": u_l, "liq": liq, "dpds": dpds,
            "p_star_co2": p_star_co2, "p_star_h2o": p_star_h2o,
            "dh_abs": dh_abs, "cp_gas": cp_gas,
            "cp_l": lp["heat_capacity"] * 1000.0, "l_tot": l_tot,
        }
        return self._residuals(x, snapshot), snapshot

    def _dpds(self, gp, u_v):
        eps = self.pack.void_fraction
        d = self.pack.hydraulic_diameter
        viscous = 150.0 * (1.0 - eps) ** 2 * gp["viscosity"] / (d**2 * eps**3) * u_v
        inertial = 1.75 * (1.0 - eps) * gp["density"] / (d * eps**3) * u_v**2
        if self.geometry.rotating:
            return viscous + inertial + gp["density"] * self.omega**2 * self.centers
        return viscous + inertial

    def _residuals(self, x, s):
        n = self.n
        v, l, t_v, t_l, p = self._states(x)
        res = np.zeros((n, NVAR))

        # upstream values: vapor flows from high index to low, liquid opposite
        v_up = np.vstack([v[1:], self.v_in])
        t_v_up = np.append(t_v[1:], self.vapor_in.temperature)
        l_up = np.vstack([self.l_in, l[:-1]])
        t_l_up = np.append(self.liquid_in.temperature, t_l[:-1])

        a_vol = s["a_eff"] * self.volumes
        for c in GAS_COMPONENTS:
            i = _IDX[c]
            tr = s["fluxes"][c] * a_vol
            res[:, i] = v_up[:, i] - v[:, i] - tr
            res[:, N_COMP + i] = l_up[:, i] - l[:, i] + tr

        # vapor energy: upstream enthalpy in, own out, conduction and the
        # sensible heat of transferring moles to the liquid
        phi_v_in = np.zeros(n)
        for c in GAS_COMPONENTS:
            i = _IDX[c]
            phi_v_in += v_up[:, i] * self._cp_gas(c, t_v_up) * (t_v_up - T_REF)
        phi_v_in[-1] = self.phi_v_inlet
        phi_v_out = np.zeros(n)
        q_sens = np.zeros(n)
        for c in GAS_COMPONENTS:
            i = _IDX[c]
            phi_v_out += v[:, i] * s["cp_gas"][c] * (t_v - T_REF)
            q_sens += s["fluxes"][c] * a_vol * s["cp_gas"][c] * (t_v - T_REF)
        q_cond = s["h_heat"] * a_vol * (t_v - t_l)
        res[:, 2 * N_COMP] = phi_v_in - phi_v_out - q_cond - q_sens

        # liquid energy with latent sources (condensing water heats, CO2
        # absorption releases its reaction heat into the liquid)
        l_tot_up = l_up[:, _IDX["co2"]] + l_up[:, _IDX["h2o"]] + self.l_mea
        cp_l_up = np.append(s["cp_l"][0], s["cp_l"][:-1])
        phi_l_in = l_tot_up * cp_l_up * (t_l_up - T_REF)
        phi_l_in[0] = self.phi_l_inlet
        phi_l_out = s["l_tot"] * s["cp_l"] * (t_l - T_REF)
        q_latent = a_vol * (s["fluxes"]["h2o"] * self.dh_vap + s["fluxes"]["co2"] * s["dh_abs"])
        res[:, 2 * N_COMP + 1] = phi_l_in - phi_l_out + q_cond + q_sens + q_latent

        # vapor pressure, marched inward from the outer boundary value
        dpds = s["dpds"]
        ds = np.diff(self.centers)
        res[:-1, 2 * N_COMP + 2] = p[1:] - p[:-1] - dpds[1:] * ds
        res[-1, 2 * N_COMP + 2] = (
            self.vapor_in.pressure - p[-1] - dpds[-1] * (self.faces[-1] - self.centers[-1])
        )
        return res.ravel()

    def scaled_residuals(self, x, flux_scale):
        r, _ = self.evaluate(x, flux_scale)
        return r / self.r_scale

    # ------------------------------------------------------------------
    def coloring(self):
        """Column groups for the block-tridiagonal FD Jacobian."""
        groups = []
        for mod in range(3):
            for var in range(NVAR):
                cols = np.arange(mod, self.n, 3) * NVAR + var
                rows = []
                for k in range(mod, self.n, 3):
                    lo = max(0, k - 1) * NVAR
                    hi = min(self.n - 1, k + 1) * NVAR + NVAR
                    rows.append(np.arange(lo, hi))
                groups.append((cols, rows))
        return groups

    def jacobian(self, fun, x, f0, groups):
        rows_all, cols_all, vals_all = [], [], []
        for cols, rows in groups:
            step = 1e-7 * self.x_scale[cols] + 1e-12
            xp = x.copy()
            xp[cols] += step
            df = fun(xp) - f0
            for c, rr, st in zip(cols, rows, step):
                vals = df[rr] / st
                keep = vals != 0.0
                rows_all.append(rr[keep])
                cols_all.append(np.full(int(keep.sum()), c))
                vals_all.append(vals[keep])
        j = sp.coo_matrix(
            (np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
            shape=(x.size, x.size),
        )
        return j.tocsc()


def assemble_residuals(geometry, omega, inlets, grid_n, unknowns,
                       package=None, constants=None, flux_scale=1.0):
    """Finite-volume steady-state residuals for a flat unknown vector.

    inlets is {'vapor': StreamState, 'liquid': StreamState}; the vector
    layout is grid_n cells x (4 vapor flows, 4 liquid flows, T_V, T_L, P).
    Residuals are unscaled (mol/s, W, Pa); boundary residuals pin the
    inlet conditions through the upstream convective terms. Non-finite
    entries are reported with their cell and equation index.
    """
    package = package or default_package()
    constants = constants or TransferConstants()
    asm = _Assembler(geometry, omega, inlets["vapor"], inlets["liquid"],
                     grid_n, package, constants)
    x = np.asarray(unknowns, dtype=float)
    if x.size != grid_n * NVAR:
        raise ValueError(f"expected {grid_n * NVAR} unknowns, got {x.size}")
    res, _ = asm.evaluate(x, flux_scale)
    if not np.all(np.isfinite(res)):
        bad = np.argwhere(~np.isfinite(res.reshape(grid_n, NVAR)))
        cell, eq = bad[0]
        raise FloatingPointError(f"non-finite residual at cell {cell}, equation {eq}")
    return res


def _newton(asm: _Assembler, x0, flux_scale, tol, max_iter, min_damping):
    groups = asm.coloring()
    fun = lambda z: asm.scaled_residuals(z, flux_scale)
    x = x0.copy()
    f = fun(x)
    if not np.all(np.isfinite(f)):
        return x, np.inf, 0, False
    best_x, best_norm = x.copy(), float(np.max(np.abs(f)))
    lu = None
    last_jac_norm = np.inf
    pulses = 3  # non-monotone escapes from line-search stagnation near tol
    for it in range(1, max_iter + 1):
        norm = float(np.max(np.abs(f)))
        if norm <= tol:
            return x, norm, it - 1, True
        if lu is None or norm > 0.3 * last_jac_norm:
            jac = asm.jacobian(fun, x, f, groups)
            try:
                lu = splu(jac)
            except RuntimeError:
                lu = splu(jac + sp.identity(jac.shape[0], format="csc") * 1e-10)
            last_jac_norm = norm
        step = -lu.solve(f)
        if not np.all(np.isfinite(step)):
            return best_x, best_norm, it, False
        lam, merit0 = 1.0, 0.5 * float(f @ f)
        accepted = False
        while lam >= min_damping:
            x_try = x + lam * step
            f_try = fun(x_try)
            if np.all(np.isfinite(f_try)) and 0.5 * float(f_try @ f_try) <= (1.0 - 1e-4 * lam) * merit0:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if last_jac_norm != norm:
                lu = None  # retry once with a fresh Jacobian
                continue
            if pulses > 0 and norm < 1e-4:
                # stagnating on a clip kink close to the answer: take the
                # full step non-monotonically and continue
                f_full = fun(x + step)
                if np.all(np.isfinite(f_full)):
                    pulses -= 1
                    x, f = x + step, f_full
                    lu = None
                    continue
            return best_x, best_norm, it, False
        x, f = x_try, f_try
        cur = float(np.max(np.abs(f)))
        if cur < best_norm:
            best_x, best_norm = x.copy(), cur
        if lam < 1.0:
            lu = None
    return best_x, best_norm, max_iter, best_norm <= tol


def _pseudo_transient(asm: _Assembler, x0, flux_scale, tol, min_damping):
    """Backstop: Newton on R + (x - x_ref)/(scale*dt) with growing dt."""
    groups = asm.coloring()
    x = x0.copy()
    dt = 1e-2
    for _ in range(40):
        x_ref = x.copy()
        step_dt = dt

        def fun(z):
            return asm.scaled_residuals(z, flux_scale) + (z - x_ref) / (asm.x_scale * step_dt)

        f = fun(x)
        for _inner in range(12):
            jac = asm.jacobian(fun, x, f, groups)
            try:
                lu = splu(jac)
            except RuntimeError:
                lu = splu(jac + sp.identity(jac.shape[0], format="csc") * 1e-10)
            newton_step = -lu.solve(f)
            if not np.all(np.isfinite(newton_step)):
                break
            lam = 1.0
            moved = False
            while lam >= min_damping:
                x_try = x + lam * newton_step
                f_try = fun(x_try)
                if np.all(np.isfinite(f_try)) and np.linalg.norm(f_try) <= np.linalg.norm(f):
                    moved = True
                    break
                lam *= 0.5
            if not moved:
                break
            x, f = x_try, f_try
            if np.max(np.abs(f)) < 1e-9:
                break
        if np.max(np.abs(asm.scaled_residuals(x, flux_scale))) <= tol:
            return x, True
        dt = min(dt * 3.0, 1e6)
    return x, False


def solve_column(geometry, omega, inlets, options: ColumnOptions = ColumnOptions(),
                 package=None, constants=None):
    """Solve the counter-current bed to steady state.

    Returns a ColumnProfile; raises NonConvergenceError (carrying the best
    iterate in diagnostics) if the damped Newton, flux continuation and
    pseudo-transient ladder all stall. A converged profile with any node
    above 100% flooding is returned flagged, with a warning.
    """
    package = package or default_package()
    constants = constants or TransferConstants()
    asm = _Assembler(geometry, omega, inlets["vapor"], inlets["liquid"], options.grid_n,
                     package, constants, dh_vap=options.dh_vap_override)

    total_iters = 0
    if options.initial_profile is not None and len(options.initial_profile.nodes) == asm.n:
        x = asm.vector_from_profile(options.initial_profile)
        x, norm, iters, ok = _newton(asm, x, options.flux_scale, options.tol,
                                     options.max_iter, options.min_damping)
        total_iters += iters
        if ok:
            return _finish(asm, x, norm, total_iters, options)

    x = asm.initial_vector()
    ok = False
    norm = np.inf
    for lam in (0.0,) + tuple(options.continuation_steps):
        x, norm, iters, ok = _newton(asm, x, lam * options.flux_scale, options.tol,
                                     options.max_iter, options.min_damping)
        total_iters += iters
        if not ok:
            break
    if not ok and options.robust:
        x = asm.initial_vector()
        ok = True
        for lam in (0.0, 0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0):
            scale = lam * options.flux_scale
            x, norm, iters, ok_step = _newton(asm, x, scale, options.tol,
                                              options.max_iter, options.min_damping)
            total_iters += iters
            if not ok_step:
                x, ok_pt = _pseudo_transient(asm, x, scale, options.tol, options.min_damping)
                if not ok_pt:
                    ok = False
                    break
        if ok:
            norm = float(np.max(np.abs(asm.scaled_residuals(x, options.flux_scale))))
            ok = norm <= options.tol
    if not ok:
        profile = _build_profile(asm, x, norm, total_iters, False, options.flux_scale)
        raise NonConvergenceError(
            f"column solve stalled at scaled residual {norm:.3e}",
            diagnostics={"profile": profile, "residual_norm": float(norm),
                         "iterations": total_iters},
        )
    return _finish(asm, x, norm, total_iters, options)


def _finish(asm, x, norm, iterations, options):
    profile = _build_profile(asm, x, norm, iterations, True, options.flux_scale)
    if profile.peak_flooding() > 100.0:
        profile.flagged_flooding = True
        warnings.warn(
            f"converged profile exceeds flooding: peak {profile.peak_flooding():.1f}%",
            FloodingExceededWarning,
            stacklevel=2,
        )
    return profile


def _build_profile(asm: _Assembler, x, norm, iterations, converged, flux_scale):
    _, s = asm.evaluate(x, flux_scale)
    v, l, t_v, t_l, p = asm._states(x)
    l_over_g = np.maximum(
        l[:, _IDX["co2"]] * MOLAR_MASS["co2"] + l[:, _IDX["h2o"]] * MOLAR_MASS["h2o"]
        + asm.l_mea * MOLAR_MASS["mea"],
        1e-12,
    ) / np.maximum(v.sum(axis=1) * s["gp"]["molar_mass"], 1e-12)
    u_fl = flooding_velocity(l_over_g, s["gp"]["density"], s["lp"]["density"],
                             asm.pack, asm.omega, asm.centers, asm.constants)
    phi = flooding_ratio(s["u_v"], u_fl)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        holdup = liquid_holdup(s["liq"], asm.omega, asm.centers, asm.pack, asm.constants)

    a_vol = s["a_eff"] * asm.volumes
    latent_total = float(
        np.sum(a_vol * (s["fluxes"]["h2o"] * asm.dh_vap + s["fluxes"]["co2"] * s["dh_abs"]))
    )
    phi_v_out = float(
        sum(v[0, _IDX[c]] * asm._cp_gas(c, t_v[0]) for c in GAS_COMPONENTS) * (t_v[0] - T_REF)
    )
    phi_l_out = float(s["l_tot"][-1] * s["cp_l"][-1] * (t_l[-1] - T_REF))

    transfer = {
        "k_l": s["k_l"], "a_eff": s["a_eff"], "e_co2": s["e_co2"], "hatta": s["ha"],
        "k_overall_co2": s["k_overall"]["co2"], "flux_co2": s["fluxes"]["co2"],
        "flux_h2o": s["fluxes"]["h2o"], "holdup": holdup, "flooding": phi,
        "u_v": s["u_v"], "u_l": s["u_l"], "h_heat": s["h_heat"] / 1000.0,
        "p_star_co2": s["p_star_co2"], "latent_total": latent_total,
        "phi_v_inlet": asm.phi_v_inlet, "phi_l_inlet": asm.phi_l_inlet,
        "phi_v_outlet": phi_v_out, "phi_l_outlet": phi_l_out,
        "u_flood": u_fl,
    }
    return ColumnProfile(
        geometry=asm.geometry, omega=asm.omega, nodes=asm.centers, faces=asm.faces,
        vapor_flows=v.copy(), liquid_flows=l.copy(), liquid_mea=asm.l_mea,
        t_vapor=t_v.copy(), t_liquid=t_l.copy(), pressure=p.copy(),
        vapor_inlet=asm.vapor_in, liquid_inlet=asm.liquid_in,
        transfer=transfer, converged=converged, iterations=iterations,
        residual_norm=float(norm),
    )


def column_kpis(profile: ColumnProfile):
    """Headline performance numbers of one converged profile."""
    v_in_co2 = profile.vapor_inlet.flow("co2")
    v_out_co2 = profile.vapor_outlet().flow("co2")
    capture = 1.0 - v_out_co2 / v_in_co2 if v_in_co2 > 0 else 0.0
    l_in_co2 = profile.liquid_inlet.flow("co2")
    l_out_co2 = profile.liquid_outlet().flow("co2")
    strip = (l_in_co2 - l_out_co2) / l_in_co2 if l_in_co2 > 0 else 0.0
    return {
        "capture_fraction": capture,
        "strip_fraction": strip,
        "pressure_drop_pa": profile.pressure_drop(),
        "peak_flooding_pct": profile.peak_flooding(),
        "vapor_outlet": profile.vapor_outlet(),
        "liquid_outlet": profile.liquid_outlet(),
        "iterations": profile.iterations,
    }
