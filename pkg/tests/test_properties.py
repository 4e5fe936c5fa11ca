import math

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st
from importlib import resources

from rpbcap.errors import CorrelationRangeWarning
from rpbcap.properties import PropertyTables, SolventState
from rpbcap.streams import StreamState

R = 8.314462618


def _raw_documents():
    text = resources.files("rpbcap.data").joinpath("mea_properties.yaml").read_text()
    return list(yaml.safe_load_all(text))


def _bracket(docs, w):
    return next(d for d in docs if d.get("document") == "bracket"
                and abs(d["mea_mass_frac"] - w) < 1e-12)


class TestVle:
    def test_zero_loading_floor(self, package):
        p = package.co2_equilibrium_pressure(SolventState(0.30, 0.0, 313.15))
        assert p == 0.0  # fresh solvent: no equilibrium backpressure
        assert p <= 0.1

    def test_isotherm_ordering_in_temperature(self, package):
        hot = package.co2_equilibrium_pressure(SolventState(0.30, 0.5, 393.15))
        cold = package.co2_equilibrium_pressure(SolventState(0.30, 0.5, 313.15))
        assert hot > cold

    def test_hand_evaluation_matches_coefficient_file(self, package):
        # independent oracle: direct arithmetic on the raw coefficient file
        docs = _raw_documents()
        c = _bracket(docs, 0.30)["vle"]["coefficients"]
        a, t = 0.4, 313.15
        expected = math.exp(c["c0"] + c["c1"] * a + c["c2"] * a * a
                            + c["c3"] / t + c["c4"] * a / t)
        got = package.co2_equilibrium_pressure(SolventState(0.30, a, t))
        assert got == pytest.approx(expected, rel=1e-12)
        check = _bracket(docs, 0.30)["vle"]["check"]
        assert got == pytest.approx(check["value"], rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        w=st.sampled_from([0.30, 0.40, 0.50, 0.70]),
        a=st.floats(0.02, 0.54),
        da=st.floats(0.005, 0.04),
        t=st.floats(298.15, 398.15),
    )
    def test_strictly_increasing_in_loading(self, package, w, a, da, t):
        lo = package.co2_equilibrium_pressure(SolventState(w, a, t))
        hi = package.co2_equilibrium_pressure(SolventState(w, a + da, t))
        assert hi > lo

    def test_bracket_interpolation_exact_at_endpoints(self, package):
        for w in (0.30, 0.50, 0.70):
            docs = _raw_documents()
            raw = _bracket(docs, w)["vle"]["coefficients"]
            interp = package.tables.bracket_coeffs("vle", w)
            for k, v in raw.items():
                assert interp[k] == pytest.approx(v, rel=0, abs=0)

    def test_out_of_range_clamps_with_warning(self, package):
        with pytest.warns(CorrelationRangeWarning):
            clamped = package.co2_equilibrium_pressure(SolventState(0.30, 0.4, 500.0))
        edge = package.co2_equilibrium_pressure(SolventState(0.30, 0.4, 403.15))
        assert clamped == pytest.approx(edge, rel=1e-12)


class TestHeatOfAbsorption:
    def test_exact_clausius_clapeyron_form(self, package):
        # the shipped surrogate is exactly linear in 1/T, so the central
        # difference must return -R (c3 + c4 a) to machine precision
        docs = _raw_documents()
        c = _bracket(docs, 0.30)["vle"]["coefficients"]
        a = 0.3
        expected = -R * (c["c3"] + c["c4"] * a) / 1000.0
        got = package.heat_of_absorption(SolventState(0.30, a, 350.0))
        assert got == pytest.approx(expected, rel=1e-3)

    def test_declines_with_loading(self, package):
        hi = package.heat_of_absorption(SolventState(0.30, 0.2, 313.15))
        lo = package.heat_of_absorption(SolventState(0.30, 0.5, 313.15))
        assert hi > lo > 0.0

    def test_step_size_insensitive(self, package, monkeypatch):
        import rpbcap.properties as P

        base = package.heat_of_absorption(SolventState(0.30, 0.35, 330.0))
        monkeypatch.setattr(P, "DH_ABS_FD_STEP", 0.5)
        halved = package.heat_of_absorption(SolventState(0.30, 0.35, 330.0))
        assert abs(halved - base) / base < 0.005

    def test_consistency_all_brackets(self, package):
        # finite-difference oracle on ln P* for every shipped bracket
        for w in (0.30, 0.50, 0.70):
            for a in (0.1, 0.3, 0.5):
                t, d = 350.0, 1.0
                lo = math.log(package.co2_equilibrium_pressure(SolventState(w, a, t - d)))
                hi = math.log(package.co2_equilibrium_pressure(SolventState(w, a, t + d)))
                oracle = -R * (hi - lo) / (1.0 / (t + d) - 1.0 / (t - d)) / 1000.0
                got = package.heat_of_absorption(SolventState(w, a, t))
                assert got == pytest.approx(oracle, rel=0.01)


class TestLiquidProperties:
    def test_density_sane_window(self, package):
        for a in (0.0, 0.23, 0.5):
            rho = package.liquid_properties(SolventState(0.30, a, 313.15))["density"]
            assert 1000.0 <= rho <= 1150.0

    def test_viscosity_increases_with_concentration(self, package):
        lo = package.liquid_properties(SolventState(0.30, 0.23, 313.15))["viscosity"]
        hi = package.liquid_properties(SolventState(0.70, 0.23, 313.15))["viscosity"]
        assert hi > lo

    def test_diffusivity_matches_check_value(self, package):
        docs = _raw_documents()
        check = next(
            d for d in docs if d.get("document") == "shared"
        )["liquid_shared"]["diffusivity_co2"]["check"]
        got = package.liquid_properties(
            SolventState(check["mea_mass_frac"], check["co2_loading"],
                         check["temperature_k"])
        )["d_co2"]
        assert got == pytest.approx(check["value"], rel=1e-12)

    def test_all_outputs_positive(self, package):
        props = package.liquid_properties(SolventState(0.50, 0.3, 350.0))
        for key in ("density", "viscosity", "heat_capacity", "d_co2", "d_mea"):
            assert props[key] > 0.0


class TestGasProperties:
    def test_pure_n2_ideal_density(self, package):
        stream = StreamState.vapor({"co2": 0, "h2o": 0, "n2": 10.0, "o2": 0}, 313.15, 1.1e5)
        rho = package.gas_properties(stream)["density"]
        assert rho == pytest.approx(1.1e5 * 0.028014 / (R * 313.15), rel=1e-12)
        assert rho == pytest.approx(1.183, rel=1e-3)

    def test_fuller_pressure_scaling(self, package):
        y = {"co2": 0.145, "h2o": 0.068, "n2": 0.766, "o2": 0.021}
        d1 = package.gas_props_arrays(y, 313.15, 1.0e5)["diffusivity"]["co2"]
        d2 = package.gas_props_arrays(y, 313.15, 2.0e5)["diffusivity"]["co2"]
        assert d2 == pytest.approx(d1 / 2.0, rel=1e-12)

    def test_flue_gas_mean_molar_mass(self, package, flue_gas):
        # direct arithmetic on the published composition gives 29.74 g/mol
        got = package.gas_properties(flue_gas)["molar_mass"] * 1000.0
        oracle = (0.145 * 44.01 + 0.068 * 18.015 + 0.766 * 28.014 + 0.021 * 31.999)
        assert got == pytest.approx(oracle, abs=0.01)
        assert got == pytest.approx(29.74, abs=0.2)

    def test_unnormalizable_composition_rejected(self, package):
        empty = StreamState.vapor({"co2": 0, "h2o": 0, "n2": 0, "o2": 0}, 313.15, 1e5)
        with pytest.raises(ValueError):
            package.gas_properties(empty)


class TestKinetics:
    def test_zero_concentration(self, package):
        assert package.reaction_rate_constant(SolventState(0.30, 0.2, 313.15), 0.0) == 0.0

    def test_arrhenius_monotone(self, package):
        hot = package.reaction_rate_constant(SolventState(0.30, 0.2, 333.15), 3000.0)
        cold = package.reaction_rate_constant(SolventState(0.30, 0.2, 313.15), 3000.0)
        assert hot > cold

    def test_hand_evaluation(self, package):
        docs = _raw_documents()
        shared = next(d for d in docs if d.get("document") == "shared")
        kin = shared["liquid_shared"]["kinetics"]
        c = kin["coefficients"]
        check = kin["check"]
        expected = c["A"] * math.exp(-c["Ea_R"] / check["temperature_k"]) * check["c_mea"]
        got = package.reaction_rate_constant(
            SolventState(0.30, 0.0, check["temperature_k"]), check["c_mea"]
        )
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(check["value"], rel=1e-12)

    def test_negative_concentration_rejected(self, package):
        with pytest.raises(ValueError):
            package.reaction_rate_constant(SolventState(0.30, 0.2, 313.15), -1.0)


def test_determinism(package):
    s = SolventState(0.42, 0.31, 337.0)
    a = package.liquid_properties(s)
    b = package.liquid_properties(s)
    assert all(np.all(a[k] == b[k]) for k in a)
