import numpy as np
import pytest

from rpbcap.column import (
    NVAR,
    ColumnOptions,
    PbGeometry,
    RpbGeometry,
    assemble_residuals,
    column_kpis,
    solve_column,
)
from rpbcap.constants import rpm_to_rad_s
from rpbcap.streams import StreamState
from rpbcap.transfer import PackingSpec

PACK = PackingSpec(803.0, 0.96)


def small_geometry():
    return RpbGeometry(0.15, 0.8, 0.3, PACK)


def small_inlets(lean_loading=0.23, solvent=9.0, co2_frac=0.145):
    n = 2.0 / 0.0297
    y = {"co2": co2_frac, "h2o": 0.068, "o2": 0.021}
    y["n2"] = 1.0 - sum(y.values())
    vapor = StreamState.vapor({k: v * n for k, v in y.items()}, 313.15, 1.1e5)
    liquid = StreamState.solvent(solvent, 0.30, lean_loading, 313.15, 1.1e5)
    return {"vapor": vapor, "liquid": liquid}


@pytest.fixture(scope="module")
def solved_small():
    return solve_column(small_geometry(), rpm_to_rad_s(600), small_inlets(),
                        ColumnOptions(grid_n=24))


class TestAssembleResiduals:
    def test_vector_length_contract(self):
        inlets = small_inlets()
        with pytest.raises(ValueError, match="unknowns"):
            assemble_residuals(small_geometry(), 60.0, inlets, 10, np.zeros(10))

    def test_zero_transfer_pass_through(self):
        # with all interphase exchange off, the pass-through profile with
        # marched pressure is an exact root of the residuals
        geometry, inlets = small_geometry(), small_inlets()
        profile = solve_column(geometry, rpm_to_rad_s(600), inlets,
                               ColumnOptions(grid_n=12, flux_scale=0.0))
        out = profile.vapor_outlet()
        for c in ("co2", "h2o", "n2", "o2"):
            assert out.flow(c) == pytest.approx(inlets["vapor"].flow(c), rel=1e-12)
        x = np.zeros(12 * NVAR)
        grid = x.reshape(12, NVAR)
        grid[:, 0:4] = [inlets["vapor"].flow(c) for c in ("co2", "h2o", "n2", "o2")]
        grid[:, 4:8] = [inlets["liquid"].flow(c) for c in ("co2", "h2o", "n2", "o2")]
        grid[:, 8] = inlets["vapor"].temperature
        grid[:, 9] = inlets["liquid"].temperature
        grid[:, 10] = profile.pressure  # marched pressure from the solve
        res = assemble_residuals(geometry, rpm_to_rad_s(600), inlets, 12, x,
                                 flux_scale=0.0)
        scaled = np.abs(res.reshape(12, NVAR))
        assert scaled[:, 0:10].max() < 1e-8

    def test_adiabatic_inert_gas(self):
        # single-component inert vapor at the liquid temperature: the energy
        # residual vanishes on the uniform-temperature profile
        geometry = small_geometry()
        n = 60.0
        vapor = StreamState.vapor({"co2": 0.0, "h2o": 0.0, "n2": n, "o2": 0.0},
                                  313.15, 1.1e5)
        liquid = StreamState.solvent(9.0, 0.30, 0.23, 313.15, 1.1e5)
        inlets = {"vapor": vapor, "liquid": liquid}
        profile = solve_column(geometry, rpm_to_rad_s(600), inlets,
                               ColumnOptions(grid_n=12, flux_scale=0.0))
        assert np.allclose(profile.t_vapor, 313.15, atol=1e-8)
        assert np.allclose(profile.t_liquid, 313.15, atol=1e-8)

    def test_minimum_grid(self):
        with pytest.raises(ValueError, match="grid_n"):
            assemble_residuals(small_geometry(), 60.0, small_inlets(), 3,
                               np.zeros(3 * NVAR))


class TestSolveColumn:
    def test_component_closure(self, solved_small):
        closure = solved_small.component_closure()
        assert max(closure.values()) <= 1e-6

    def test_energy_closure(self, solved_small):
        assert solved_small.energy_closure() <= 1e-6

    def test_deterministic(self):
        a = solve_column(small_geometry(), rpm_to_rad_s(600), small_inlets(),
                         ColumnOptions(grid_n=16))
        b = solve_column(small_geometry(), rpm_to_rad_s(600), small_inlets(),
                         ColumnOptions(grid_n=16))
        assert np.array_equal(a.vapor_flows, b.vapor_flows)
        assert np.array_equal(a.t_liquid, b.t_liquid)

    def test_counter_current_loading_profile(self, solved_small):
        # liquid CO2 content grows monotonically from inner to outer radius
        co2 = solved_small.liquid_flows[:, 0]
        assert np.all(np.diff(co2) >= -1e-10)

    def test_pressure_increases_outward(self, solved_small):
        assert np.all(np.diff(solved_small.pressure) > 0.0)

    def test_rotation_speed_sweep(self):
        geometry = RpbGeometry(0.182, 1.032, 1.032, PACK)
        inlets = small_inlets(solvent=10.0)
        caps = []
        for rpm in (267.0, 600.0):
            profile = solve_column(geometry, rpm_to_rad_s(rpm), inlets,
                                   ColumnOptions(grid_n=20))
            caps.append(column_kpis(profile)["capture_fraction"])
        assert caps[1] > caps[0]

    def test_grid_refinement(self):
        geometry, inlets = small_geometry(), small_inlets()
        caps = {}
        for n in (20, 40):
            profile = solve_column(geometry, rpm_to_rad_s(600), inlets,
                                   ColumnOptions(grid_n=n))
            caps[n] = column_kpis(profile)["capture_fraction"]
        assert abs(caps[40] - caps[20]) / caps[40] < 0.01

    def test_warm_start_matches_cold(self, solved_small):
        warm = solve_column(small_geometry(), rpm_to_rad_s(600), small_inlets(),
                            ColumnOptions(grid_n=24, initial_profile=solved_small))
        cold_cap = column_kpis(solved_small)["capture_fraction"]
        warm_cap = column_kpis(warm)["capture_fraction"]
        assert warm_cap == pytest.approx(cold_cap, rel=1e-7)


class TestKpis:
    def test_no_transfer_eta_zero(self):
        profile = solve_column(small_geometry(), rpm_to_rad_s(600), small_inlets(),
                               ColumnOptions(grid_n=12, flux_scale=0.0))
        assert column_kpis(profile)["capture_fraction"] == pytest.approx(0.0, abs=1e-12)

    def test_peak_flooding_is_node_maximum(self, solved_small):
        phi = solved_small.transfer["flooding"]
        assert solved_small.peak_flooding() == pytest.approx(float(np.max(phi)))

    def test_pressure_drop_is_boundary_difference(self, solved_small):
        dp = column_kpis(solved_small)["pressure_drop_pa"]
        assert dp == pytest.approx(
            float(solved_small.pressure[-1] - solved_small.pressure[0])
        )


class TestPackedBedKernel:
    def test_fixed_bed_solves(self):
        pb_pack = PackingSpec(250.0, 0.97, packing_name="structured",
                              cavity_correction=1.0)
        geometry = PbGeometry(0.5, 4.0, pb_pack)
        inlets = small_inlets(solvent=8.0)
        profile = solve_column(geometry, 0.0, inlets, ColumnOptions(grid_n=16))
        kpis = column_kpis(profile)
        assert 0.0 < kpis["capture_fraction"] < 1.0
        assert max(profile.component_closure().values()) <= 1e-6

    def test_aspect_ratio_definition(self):
        g = RpbGeometry(0.1, 1.0, 1.0, PACK)
        assert g.aspect_ratio == pytest.approx(0.5)
        pb = PbGeometry(0.95, 10.0, PackingSpec(250.0, 0.97))
        assert pb.packing_volume == pytest.approx(np.pi * 0.95**2 * 10.0)


def test_profile_csv_export(tmp_path, solved_small):
    path = tmp_path / "profile.csv"
    solved_small.to_csv(path, manifest_hash="abc123")
    lines = path.read_text().splitlines()
    assert lines[0] == "# manifest_hash: abc123"
    assert "position [m]" in lines[1]
    assert len(lines) == 2 + len(solved_small.nodes)
