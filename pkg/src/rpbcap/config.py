"""Scenario file loading, validation and canonical serialization.

Scenario files are hierarchical YAML documents with explicit units in the
key names (bar, kg/s, degrees C, rpm). Loading resolves every default and
returns the fully-built object graph plus a canonical dict whose SHA-256
is the run's config hash; serializing and re-loading reproduces the same
objects bit for bit.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import yaml

from .column import PbGeometry, RpbGeometry
from .constants import celsius_to_kelvin
from .economics import EconomicParams
from .errors import ConfigError
from .flowsheet import OperatingPoint, ProcessScenario
from .sizing import SizingAssumptions
from .streams import StreamState
from .transfer import PackingSpec, TransferConstants

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class LoadedScenario:
    scenario: ProcessScenario
    economics: EconomicParams
    sizing: SizingAssumptions
    raw: dict
    config_hash: str


def _require(mapping, key, path):
    if key not in mapping:
        raise ConfigError(f"missing required field {path}.{key}")
    return mapping[key]


def _packing(cfg, path):
    try:
        return PackingSpec(
            specific_surface_area=float(_require(cfg, "surface_area_m2_m3", path)),
            void_fraction=float(_require(cfg, "void_fraction", path)),
            packing_name=str(cfg.get("name", "wire_mesh")),
            cavity_correction=float(cfg.get("cavity_correction", 1.15)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _geometry(cfg, packing, path):
    kind = cfg.get("kind", "rpb")
    try:
        if kind == "rpb":
            return RpbGeometry(
                r_inner=float(_require(cfg, "r_inner_m", path)),
                r_outer=float(_require(cfg, "r_outer_m", path)),
                height=float(_require(cfg, "height_m", path)),
                packing=packing,
            )
        if kind == "pb":
            return PbGeometry(
                radius=float(_require(cfg, "radius_m", path)),
                height=float(_require(cfg, "height_m", path)),
                packing=packing,
            )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind must be 'rpb' or 'pb', got {kind!r}")


def load_scenario_dict(raw, source="<dict>"):
    """Build the full object graph from a parsed scenario mapping."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: scenario document must be a mapping")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{source}: schema_version {version!r} does not match {SCHEMA_VERSION}"
        )
    name = raw.get("name", "scenario")

    fg = _require(raw, "flue_gas", "scenario")
    comp = _require(fg, "composition_mol", "flue_gas")
    total = sum(float(v) for v in comp.values())
    if abs(total - 1.0) > 1e-6:
        raise ConfigError(f"flue_gas.composition_mol sums to {total}, expected 1")
    mass_flow = float(_require(fg, "mass_flow_kg_s", "flue_gas"))
    t_flue = celsius_to_kelvin(float(_require(fg, "temperature_c", "flue_gas")))
    p_flue = float(_require(fg, "pressure_bar", "flue_gas")) * 1e5
    molar_mass = sum(
        float(comp.get(c, 0.0)) * m
        for c, m in (("co2", 0.04401), ("h2o", 0.018015), ("n2", 0.028014), ("o2", 0.031999))
    )
    n_total = mass_flow / molar_mass
    flue = StreamState.vapor(
        {c: float(comp.get(c, 0.0)) * n_total for c in ("co2", "h2o", "n2", "o2")},
        t_flue, p_flue,
    )

    sol = _require(raw, "solvent", "scenario")
    mea = float(_require(sol, "mea_mass_frac", "solvent"))
    target = float(sol.get("target_capture", 0.90))

    pk = raw.get("packing", {})
    pack_abs = _packing(_require(pk, "absorber", "packing"), "packing.absorber")
    pack_str = _packing(pk.get("stripper", pk["absorber"]), "packing.stripper")

    geo = _require(raw, "geometry", "scenario")
    geom_abs = _geometry(_require(geo, "absorber", "geometry"), pack_abs, "geometry.absorber")
    geom_str = _geometry(_require(geo, "stripper", "geometry"), pack_str, "geometry.stripper")

    op = _require(raw, "operating", "scenario")
    try:
        operating = OperatingPoint(
            solvent_flow=float(_require(op, "solvent_flow_kg_s", "operating")),
            reboiler_temperature=celsius_to_kelvin(
                float(_require(op, "reboiler_temperature_c", "operating"))
            ),
            stripper_pressure=float(_require(op, "stripper_pressure_bar", "operating")) * 1e5,
            absorber_rpm=float(_require(op, "absorber_rpm", "operating")),
            stripper_rpm=float(_require(op, "stripper_rpm", "operating")),
        )
    except ValueError as exc:
        raise ConfigError(f"operating: {exc}") from exc

    opts = raw.get("options", {})
    constants = TransferConstants.from_config(raw.get("correlations") or {})
    try:
        scenario = ProcessScenario(
            flue_gas=flue,
            mea_mass_frac=mea,
            target_capture=target,
            absorber=geom_abs,
            stripper=geom_str,
            operating=operating,
            hx_approach=float(opts.get("hx_approach_k", 10.0)),
            condenser_temperature=celsius_to_kelvin(
                float(opts.get("condenser_temperature_c", 40.0))
            ),
            lean_cooler_temperature=celsius_to_kelvin(
                float(opts.get("lean_cooler_temperature_c", 40.0))
            ),
            product_delivery_pressure=float(opts.get("product_delivery_pressure_bar", 110.0)) * 1e5,
            grid_n=int(opts.get("grid_n", 40)),
            constants=constants,
            name=name,
        )
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc

    econ_over = raw.get("economics") or {}
    try:
        economics = EconomicParams().with_overrides(**econ_over)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"economics: {exc}") from exc

    sizing_over = dict(raw.get("sizing") or {})
    sizing_over.setdefault("mea_mass_frac", mea)
    sizing_over.setdefault("packing", pack_abs)
    sizing_over.setdefault("rotation_rpm", op.get("absorber_rpm", 600.0))
    sizing_over.setdefault("stripper_pressure", operating.stripper_pressure)
    sizing_over.setdefault("reboiler_temperature", operating.reboiler_temperature)
    sizing_over.setdefault("hx_approach", scenario.hx_approach)
    sizing_over.setdefault("target_capture", target)
    try:
        sizing = SizingAssumptions(**sizing_over)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sizing: {exc}") from exc

    canonical = canonical_dict(raw)
    digest = hashlib.sha256(
        json.dumps(canonical, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    return LoadedScenario(scenario, economics, sizing, canonical, digest)


def load_scenario(path):
    """Parse, validate and build a scenario file; see LoadedScenario."""
    with open(path, "r") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return load_scenario_dict(raw, source=str(path))


def canonical_dict(raw):
    """Scenario mapping with every default made explicit (round-trip stable)."""
    out = json.loads(json.dumps(raw))  # deep copy, YAML scalars normalized
    out.setdefault("name", "scenario")
    out["solvent"].setdefault("target_capture", 0.90)
    opts = out.setdefault("options", {})
    opts.setdefault("hx_approach_k", 10.0)
    opts.setdefault("condenser_temperature_c", 40.0)
    opts.setdefault("lean_cooler_temperature_c", 40.0)
    opts.setdefault("product_delivery_pressure_bar", 110.0)
    opts.setdefault("grid_n", 40)
    pk = out.setdefault("packing", {})
    for unit in ("absorber", "stripper"):
        cfg = pk.setdefault(unit, dict(pk.get("absorber", {})))
        cfg.setdefault("name", "wire_mesh")
        cfg.setdefault("cavity_correction", 1.15)
    for unit in ("absorber", "stripper"):
        out["geometry"][unit].setdefault("kind", "rpb")
    out.setdefault("correlations", {})
    out.setdefault("economics", {})
    out.setdefault("sizing", {})
    return out


def dump_scenario(loaded: LoadedScenario):
    """Serialize back to YAML text; loading it reproduces the same objects."""
    return yaml.safe_dump(loaded.raw, sort_keys=True)


def shipped_scenario_path(name):
    """Path of a scenario file shipped inside the package."""
    return resources.files("rpbcap.data").joinpath("scenarios").joinpath(f"{name}.yaml")
