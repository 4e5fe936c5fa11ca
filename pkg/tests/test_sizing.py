import math

import numpy as np
import pytest

from rpbcap.column import ColumnOptions, column_kpis, solve_column
from rpbcap.constants import rpm_to_rad_s
from rpbcap.errors import UnreachableTargetError
from rpbcap.sizing import (
    SizingAssumptions,
    _TransferContext,
    estimate_solvent_flow,
    flooding_height,
    lean_mea_mole_fraction,
    min_inner_radius,
    outer_radius_for_target,
    packing_pressure_drop,
    sequential_design,
    solvent_stream_from_estimate,
)
from rpbcap.transfer import PackingSpec


class TestMinInnerRadius:
    def test_flow_scaling(self):
        a = SizingAssumptions()
        r1 = min_inner_radius(1.0, 1.2, 1050.0, a)
        r4 = min_inner_radius(4.0, 1.2, 1050.0, a)
        assert r4 / r1 == pytest.approx(2.0, rel=1e-12)

    def test_hand_evaluation_unit_density_factor(self):
        a = SizingAssumptions(jet_velocity=30.0, disk_fraction=0.1)
        oracle = math.sqrt(5.0 / (math.pi * 30.0 * 0.9))  # (rho_v/rho_l)^(1/4) = 1
        assert min_inner_radius(5.0, 1.0, 1.0, a) == pytest.approx(oracle, rel=1e-12)

    def test_density_correction(self):
        a = SizingAssumptions()
        r = min_inner_radius(5.0, 1.2, 1050.0, a)
        base = min_inner_radius(5.0, 1.0, 1.0, a)
        assert r == pytest.approx(base * (1.2 / 1050.0) ** 0.25, rel=1e-12)


class TestFloodingHeight:
    def test_hand_evaluation(self):
        assert flooding_height(1.0, 0.18, 5.0) == pytest.approx(
            1.0 / (2.0 * math.pi * 0.18 * 5.0), rel=1e-12
        )
        assert flooding_height(1.0, 0.18, 5.0) == pytest.approx(0.17684, rel=1e-4)

    def test_inverse_proportionality(self):
        assert flooding_height(1.0, 0.18, 2.5) == pytest.approx(
            2.0 * flooding_height(1.0, 0.18, 5.0), rel=1e-12
        )


class TestSolventEstimate:
    def test_zero_capture_zero_solvent(self, flue_gas):
        assert estimate_solvent_flow(flue_gas, SizingAssumptions(), eta=0.0) == 0.0

    @pytest.mark.parametrize("w,ref", [(0.30, 3.87), (0.50, 2.39), (0.70, 1.76)])
    def test_published_lg_ratios(self, flue_gas, w, ref):
        a = SizingAssumptions(mea_mass_frac=w)
        lean = solvent_stream_from_estimate(flue_gas, a)
        lg = lean.mass_flow / flue_gas.mass_flow
        assert lg == pytest.approx(ref, rel=0.05)

    def test_loading_swing_inverse(self, flue_gas):
        narrow = SizingAssumptions(lean_loading=0.30, rich_loading=0.40)
        wide = SizingAssumptions(lean_loading=0.30, rich_loading=0.50)
        f_narrow = estimate_solvent_flow(flue_gas, narrow)
        f_wide = estimate_solvent_flow(flue_gas, wide)
        # doubling the swing halves the flow, up to the mole-fraction factor
        x_n = lean_mea_mole_fraction(0.30, 0.30)
        assert f_narrow * 0.10 * x_n == pytest.approx(f_wide * 0.20 * x_n, rel=1e-12)

    def test_inverted_window_rejected(self, flue_gas):
        with pytest.raises(ValueError):
            estimate_solvent_flow(
                flue_gas, SizingAssumptions(lean_loading=0.5, rich_loading=0.5000001),
                eta=None,
            ) and estimate_solvent_flow(
                flue_gas,
                SizingAssumptions(lean_loading=0.5, rich_loading=0.4),
            )


class TestPackingPressureDrop:
    def geometry(self, r_i=0.18, r_o=1.31, h=0.36):
        from rpbcap.column import RpbGeometry

        return RpbGeometry(r_i, r_o, h, PackingSpec(803.0, 0.96))

    def test_zero_thickness_limit(self):
        g = self.geometry(r_i=0.5, r_o=0.5 + 1e-9)
        dp = packing_pressure_drop(g, 5.0, 62.8, SizingAssumptions(), 1.2)
        assert dp == pytest.approx(0.0, abs=1e-3)

    def test_static_bed_removes_centrifugal(self):
        g = self.geometry()
        a = SizingAssumptions()
        dp_spun = packing_pressure_drop(g, 5.0, 62.8, a, 1.2)
        dp_still = packing_pressure_drop(g, 5.0, 0.0, a, 1.2)
        centrifugal = 1.2 / 2.0 * a.velocity_profile_factor * 62.8**2 * (
            g.r_outer**2 - g.r_inner**2
        )
        assert dp_spun - dp_still == pytest.approx(centrifugal, rel=1e-12)

    def test_exceeds_centrifugal_alone(self):
        g = self.geometry()
        a = SizingAssumptions()
        dp = packing_pressure_drop(g, 5.0, 62.8, a, 1.2)
        centrifugal = 1.2 / 2.0 * a.velocity_profile_factor * 62.8**2 * (
            g.r_outer**2 - g.r_inner**2
        )
        assert dp >= centrifugal

    def test_tracks_integrated_differential_model(self):
        # oracle: radially integrated Ergun + centrifugal differential form
        g = self.geometry()
        a = SizingAssumptions()
        rho, mu, flow = 1.2, 1.8e-5, 6.24
        r = np.linspace(g.r_inner, g.r_outer, 4000)
        u = flow / (2.0 * math.pi * g.height * r)
        eps, d_h = 0.96, g.packing.hydraulic_diameter
        viscous = 150.0 * (1 - eps) ** 2 * mu / (d_h**2 * eps**3) * u
        inertial = 1.75 * (1 - eps) * rho / (d_h * eps**3) * u**2
        centrifugal = rho * 62.8**2 * r
        oracle = float(np.trapezoid(viscous + inertial + centrifugal, r))
        got = packing_pressure_drop(g, flow, 62.8, a, rho, mu)
        assert got == pytest.approx(oracle, rel=0.20)


class TestOuterRadius:
    def _context(self, k, a_eff, height=0.4):
        return _TransferContext.__new__(_TransferContext).__init__ or None

    def test_degenerate_target(self, flue_gas, package):
        from rpbcap.transfer import TransferConstants

        assume = SizingAssumptions()
        ctx = _make_constant_context(assume, height=0.4, constant_ka=(1e-6, 500.0))
        assert outer_radius_for_target(0.2, 0.4, ctx, 0.0) == 0.2

    def test_constant_coefficient_halving(self):
        # with uniform K*a the required annulus area scales inversely with K
        assume = SizingAssumptions()
        demand = 3.0e-3
        r_i = 0.2
        ctx1 = _make_constant_context(assume, 0.4, (1e-6, 500.0))
        ctx2 = _make_constant_context(assume, 0.4, (2e-6, 500.0))
        r1 = outer_radius_for_target(r_i, 0.4, ctx1, demand)
        r2 = outer_radius_for_target(r_i, 0.4, ctx2, demand)
        assert (r2**2 - r_i**2) == pytest.approx(0.5 * (r1**2 - r_i**2), rel=1e-4)

    def test_unreachable_target(self):
        assume = SizingAssumptions()
        ctx = _make_constant_context(assume, 0.4, (1e-12, 1.0))
        with pytest.raises(UnreachableTargetError) as err:
            outer_radius_for_target(0.2, 0.4, ctx, 1.0)
        assert err.value.achieved is not None


def _make_constant_context(assume, height, constant_ka):
    ctx = object.__new__(_TransferContext)
    ctx.height = height
    ctx.constant_ka = constant_ka
    return ctx


class TestSequentialDesign:
    @pytest.fixture(scope="class")
    def designs(self, flue_gas):
        out = {}
        for w in (0.30, 0.50, 0.70):
            out[w] = sequential_design(
                flue_gas,
                SizingAssumptions(mea_mass_frac=w, reboiler_strip_fraction=0.5),
            )
        return out

    def test_absorber_geometry_bands(self, designs):
        g = designs[0.30]["absorber"].geometry
        assert g.r_inner == pytest.approx(0.18, rel=0.20)
        assert g.r_outer == pytest.approx(1.31, rel=0.20)
        assert g.height == pytest.approx(0.36, rel=0.20)

    def test_outer_radius_shrinks_with_concentration(self, designs):
        r30 = designs[0.30]["absorber"].geometry.r_outer
        r50 = designs[0.50]["absorber"].geometry.r_outer
        r70 = designs[0.70]["absorber"].geometry.r_outer
        assert r30 > r50 > r70

    def test_height_shrinks_with_concentration(self, designs):
        h30 = designs[0.30]["absorber"].geometry.height
        h70 = designs[0.70]["absorber"].geometry.height
        assert h30 > h70

    def test_stripper_inner_radius(self, designs):
        assert designs[0.30]["stripper"].geometry.r_inner == pytest.approx(0.10, rel=0.25)

    def test_inner_radius_at_its_minimum(self, designs, flue_gas, package):
        a = SizingAssumptions(mea_mass_frac=0.30, reboiler_strip_fraction=0.5)
        gp = package.gas_properties(flue_gas)
        from rpbcap.properties import SolventState

        rho_l = package.liquid_properties(
            SolventState(0.30, a.lean_loading, a.design_temperature)
        )["density"]
        g_vol = flue_gas.total_molar_flow * 8.314462618 * flue_gas.temperature / flue_gas.pressure
        r_min = min_inner_radius(a.engineering_factor * g_vol, gp["density"], rho_l, a)
        assert designs[0.30]["absorber"].geometry.r_inner == pytest.approx(r_min, rel=1e-9)

    def test_designed_flooding_fraction_by_construction(self, designs):
        r = designs[0.30]["absorber"]
        u_inner = r.gas_flow_design / (
            2.0 * math.pi * r.geometry.r_inner * r.geometry.height
        )
        assert u_inner / r.u_flood_inner == pytest.approx(0.80, rel=1e-9)

    def test_stage_tagging_on_failure(self, flue_gas):
        bad = SizingAssumptions(jet_velocity=-1.0)
        with pytest.raises(ValueError, match=r"\[absorber\]"):
            sequential_design(flue_gas, bad)

    def test_designed_absorber_meets_capture_with_margin(self, designs, flue_gas):
        # the sized bed, run at the assumed speed and solvent, lands within
        # five points of the separation target
        a = SizingAssumptions(mea_mass_frac=0.30, reboiler_strip_fraction=0.5)
        lean = solvent_stream_from_estimate(flue_gas, a, eta=1.0)
        lean = lean.with_temperature(313.15)
        geometry = designs[0.30]["absorber"].geometry
        profile = solve_column(
            geometry, rpm_to_rad_s(600.0),
            {"vapor": flue_gas, "liquid": lean}, ColumnOptions(grid_n=30),
        )
        capture = column_kpis(profile)["capture_fraction"]
        assert capture >= a.target_capture - 0.05
