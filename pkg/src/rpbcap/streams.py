"""Material stream containers.

A StreamState is a value object: per-component molar flows plus T and P.
Vapor streams carry (co2, h2o, n2, o2); liquid solvent streams carry
(co2, h2o, mea). Helper accessors give mass flow, composition and, for
solvent streams, the CO2 loading and CO2-free MEA mass fraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .constants import GAS_COMPONENTS, LIQ_COMPONENTS, MOLAR_MASS

COMPOSITION_TOL = 1e-10


@dataclass(frozen=True)
class StreamState:
    """One material stream.

    Parameters
    ----------
    molar_flows : dict
        Component molar flows in mol/s; keys are lowercase species names.
    temperature : float
        K.
    pressure : float
        Pa.
    phase : str
        'vapor' or 'liquid'.
    """

    molar_flows: dict = field(default_factory=dict)
    temperature: float = 298.15
    pressure: float = 101325.0
    phase: str = "vapor"

    def __post_init__(self):
        if self.phase not in ("vapor", "liquid"):
            raise ValueError(f"unknown phase tag {self.phase!r}")
        for name, flow in self.molar_flows.items():
            if flow < -COMPOSITION_TOL:
                raise ValueError(f"negative flow for {name}: {flow}")
        # tidy tiny negatives from iterative solvers
        object.__setattr__(
            self,
            "molar_flows",
            {k: max(0.0, float(v)) for k, v in self.molar_flows.items()},
        )

    # -- totals ---------------------------------------------------------
    @property
    def total_molar_flow(self):
        """mol/s"""
        return sum(self.molar_flows.values())

    @property
    def mass_flow(self):
        """kg/s"""
        return sum(f * MOLAR_MASS[k] for k, f in self.molar_flows.items())

    @property
    def molar_mass(self):
        """Mixture molar mass, kg/mol."""
        n = self.total_molar_flow
        if n <= 0.0:
            raise ValueError("empty stream has no molar mass")
        return self.mass_flow / n

    # -- composition ----------------------------------------------------
    def mole_fraction(self, name):
        n = self.total_molar_flow
        return self.molar_flows.get(name, 0.0) / n if n > 0 else 0.0

    @property
    def mole_fractions(self):
        n = self.total_molar_flow
        if n <= 0.0:
            return {k: 0.0 for k in self.molar_flows}
        return {k: v / n for k, v in self.molar_flows.items()}

    def flow(self, name):
        return self.molar_flows.get(name, 0.0)

    # -- solvent-specific views ------------------------------------------
    @property
    def co2_loading(self):
        """mol CO2 per mol MEA (liquid streams)."""
        mea = self.molar_flows.get("mea", 0.0)
        if mea <= 0.0:
            raise ValueError("loading undefined without MEA")
        return self.molar_flows.get("co2", 0.0) / mea

    @property
    def mea_mass_frac(self):
        """CO2-free MEA mass fraction, kg MEA / (kg MEA + kg H2O)."""
        m_mea = self.molar_flows.get("mea", 0.0) * MOLAR_MASS["mea"]
        m_h2o = self.molar_flows.get("h2o", 0.0) * MOLAR_MASS["h2o"]
        if m_mea + m_h2o <= 0.0:
            raise ValueError("mea_mass_frac undefined for dry stream")
        return m_mea / (m_mea + m_h2o)

    # -- constructors ------------------------------------------------------
    @staticmethod
    def vapor(molar_flows, temperature, pressure):
        return StreamState(dict(molar_flows), temperature, pressure, "vapor")

    @staticmethod
    def liquid(molar_flows, temperature, pressure):
        return StreamState(dict(molar_flows), temperature, pressure, "liquid")

    @staticmethod
    def solvent(mass_flow, mea_mass_frac, co2_loading, temperature, pressure):
        """Build a lean/rich solvent stream from bulk specs.

        mass_flow is the total stream mass in kg/s including dissolved CO2;
        mea_mass_frac is CO2-free.
        """
        if not 0.0 < mea_mass_frac < 1.0:
            raise ValueError("mea_mass_frac must lie in (0, 1)")
        if co2_loading < 0.0:
            raise ValueError("loading must be nonnegative")
        # per kg of (MEA + H2O): CO2 mass = loading * (w / M_mea) * M_co2
        m_co2_per_kg_dryish = co2_loading * mea_mass_frac / MOLAR_MASS["mea"] * MOLAR_MASS["co2"]
        solvent_mass = mass_flow / (1.0 + m_co2_per_kg_dryish)
        m_mea = solvent_mass * mea_mass_frac
        m_h2o = solvent_mass * (1.0 - mea_mass_frac)
        n_mea = m_mea / MOLAR_MASS["mea"]
        return StreamState.liquid(
            {
                "mea": n_mea,
                "h2o": m_h2o / MOLAR_MASS["h2o"],
                "co2": co2_loading * n_mea,
            },
            temperature,
            pressure,
        )

    def with_flows(self, molar_flows):
        return replace(self, molar_flows=dict(molar_flows))

    def with_temperature(self, temperature):
        return replace(self, temperature=temperature)

    def normalized_composition(self):
        """Composition dict guaranteed to sum to 1 within 1e-10."""
        fr = self.mole_fractions
        s = sum(fr.values())
        if s <= 0.0:
            raise ValueError("cannot normalize empty stream")
        if not math.isclose(s, 1.0, abs_tol=COMPOSITION_TOL):
            fr = {k: v / s for k, v in fr.items()}
        return fr


def component_order(phase):
    return GAS_COMPONENTS if phase == "vapor" else LIQ_COMPONENTS
