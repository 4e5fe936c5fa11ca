import math

import numpy as np
import pytest

from rpbcap.constants import R_GAS
from rpbcap.errors import HoldupClampWarning
from rpbcap.transfer import (
    GasPhaseState,
    LiquidPhaseState,
    PackingSpec,
    TransferConstants,
    accel_group,
    effective_area,
    enhancement_blend,
    enhancement_factor,
    flooding_ratio,
    flooding_velocity,
    heat_transfer_coefficient,
    interphase_flux,
    liquid_holdup,
    liquid_mtc,
    overall_mtc_co2,
    overall_mtc_gas_film,
    pressure_gradient,
    vapor_mtc,
)

PACK = PackingSpec(803.0, 0.96)
CONST = TransferConstants()


def gas(u=2.0, rho=1.2, mu=1.8e-5, d=1.6e-5):
    return GasPhaseState(rho, mu, u, d)


def liq(u=0.01, rho=1050.0, mu=1.5e-3, d=1.5e-9, gamma=0.06):
    return LiquidPhaseState(rho, mu, u, d, gamma)


class TestVaporMtc:
    def test_velocity_power_law(self):
        k1 = vapor_mtc(gas(u=2.0), PACK)
        k2 = vapor_mtc(gas(u=4.0), PACK)
        assert k2 / k1 == pytest.approx(2.0**0.7, rel=1e-12)

    def test_unit_schmidt_collapse(self):
        # mu = rho * D makes Sc = 1, leaving the Reynolds factor alone
        rho, d = 1.2, 1.6e-5
        st = gas(rho=rho, mu=rho * d, d=d)
        d_h = PACK.hydraulic_diameter
        re = rho * d_h * st.velocity / st.viscosity
        expected = 2.0 * re**0.7 * d / (PACK.specific_surface_area * d_h**2)
        assert vapor_mtc(st, PACK) == pytest.approx(expected, rel=1e-12)

    def test_reference_hand_evaluation(self):
        d_h = 4.0 * 0.96 / 803.0
        re = 1.2 * d_h * 2.0 / 1.8e-5
        sc = 1.8e-5 / (1.2 * 1.6e-5)
        oracle = 2.0 * re**0.7 * sc ** (1 / 3) * 1.6e-5 / (803.0 * d_h**2)
        assert vapor_mtc(gas(), PACK) == pytest.approx(oracle, rel=1e-12)

    def test_zero_diffusivity_rejected(self):
        with pytest.raises(ValueError):
            vapor_mtc(gas(d=0.0), PACK)


class TestLiquidMtc:
    def test_omega_scaling(self):
        k1 = liquid_mtc(liq(), PACK, 10.0, 0.5)
        k2 = liquid_mtc(liq(), PACK, 40.0, 0.5)
        assert k2 / k1 == pytest.approx(16.0 ** (1 / 6), rel=1e-12)

    def test_radius_scaling(self):
        k1 = liquid_mtc(liq(), PACK, 60.0, 0.25)
        k2 = liquid_mtc(liq(), PACK, 60.0, 1.0)
        assert k2 / k1 == pytest.approx(16.0 ** (1 / 6), rel=1e-12)

    def test_reference_hand_evaluation(self):
        st = liq()
        d_h = PACK.hydraulic_diameter
        omega, r = 62.83, 0.7
        re = st.density * d_h * st.velocity / st.viscosity
        sc = st.viscosity / (st.density * st.diffusivity)
        ga = d_h**3 * st.density**2 * (omega * r) ** 2 / st.viscosity**2
        oracle = (0.918 * re ** (1 / 3) * sc**0.5 * ga ** (1 / 6)
                  * st.diffusivity / d_h)
        assert liquid_mtc(st, PACK, omega, r) == pytest.approx(oracle, rel=1e-12)

    def test_gravity_floor_at_zero_speed(self):
        static = liquid_mtc(liq(), PACK, 0.0, 0.5)
        # (omega * r)^2 = 9.81 reproduces the static value exactly
        omega = math.sqrt(9.81) / 0.5
        spun = liquid_mtc(liq(), PACK, omega, 0.5)
        assert spun == static


class TestEffectiveArea:
    def test_unit_ratios_give_printed_lead(self):
        st = LiquidPhaseState(1000.0, CONST.mu0, CONST.u0, 1.5e-9, CONST.gamma0)
        omega = math.sqrt(CONST.g0 / 0.25)  # accel group exactly g0 at r = 0.5
        a = effective_area(st, PACK, omega, 0.5)
        assert a / PACK.specific_surface_area == pytest.approx(
            1.15 * 202.3 / 546.5, rel=1e-12
        )
        assert a / PACK.specific_surface_area == pytest.approx(0.42571, rel=1e-4)

    def test_increasing_in_rotation(self):
        st = liq()
        a1 = effective_area(st, PACK, 30.0, 0.5)
        a2 = effective_area(st, PACK, 60.0, 0.5)
        assert a2 > a1

    def test_decreasing_in_surface_tension(self):
        a1 = effective_area(liq(gamma=0.05), PACK, 60.0, 0.5)
        a2 = effective_area(liq(gamma=0.07), PACK, 60.0, 0.5)
        assert a2 < a1


class TestEnhancement:
    def test_slow_reaction_limit(self):
        assert enhancement_factor(1e-9, 1e6) == pytest.approx(1.0, abs=1e-9)

    def test_equal_limits_hand_value(self):
        # E1 = E2 = 3: E = 1 + (2 * 2^-1.35)^(-1/1.35)
        oracle = 1.0 + (2.0 * 2.0**-1.35) ** (-1.0 / 1.35)
        assert enhancement_blend(3.0, 3.0) == pytest.approx(oracle, rel=1e-12)
        assert enhancement_blend(3.0, 3.0) == pytest.approx(2.196864, rel=1e-6)

    def test_film_limit_dominates_with_huge_instantaneous(self):
        ha = 5.0
        e1 = ha / math.tanh(ha)
        assert e1 == pytest.approx(5.000454, abs=1e-5)
        assert enhancement_factor(ha, 1e9) == pytest.approx(e1, rel=1e-3)

    def test_floor_at_unity(self):
        assert enhancement_factor(0.0, 1.0) >= 1.0


class TestOverallMtc:
    def test_vanishing_liquid_resistance(self):
        k = overall_mtc_co2(0.02, 1e-4, 20.0, 0.0, 313.0)
        assert k == pytest.approx(0.02 / (R_GAS * 313.0), rel=1e-12)

    def test_equal_resistances_halve(self):
        t, k_v = 313.0, 0.02
        gas_res = R_GAS * t / k_v
        e, k_l = 10.0, 1e-4
        he = gas_res * e * k_l
        k = overall_mtc_co2(k_v, k_l, e, he, t)
        assert k == pytest.approx(0.5 / gas_res, rel=1e-12)

    def test_series_resistance_hand_evaluation(self):
        oracle = 1.0 / (R_GAS * 313.0 / 0.02 + 3000.0 / (20.0 * 1e-4))
        assert overall_mtc_co2(0.02, 1e-4, 20.0, 3000.0, 313.0) == pytest.approx(
            oracle, rel=1e-12
        )

    def test_gas_film_only_components(self):
        assert overall_mtc_gas_film(0.02, 313.0) == pytest.approx(
            0.02 / (R_GAS * 313.0), rel=1e-12
        )


class TestFlux:
    def test_equilibrium_zero(self):
        assert interphase_flux(1e-6, 5000.0, 5000.0) == 0.0

    def test_linear(self):
        assert interphase_flux(1e-6, 2000.0, 1000.0) == pytest.approx(1e-3, rel=1e-12)

    def test_desorption_sign(self):
        assert interphase_flux(1e-6, 1000.0, 2000.0) < 0.0


class TestHoldup:
    def test_characteristic_point(self):
        st = LiquidPhaseState(1000.0, 1000.0 * CONST.nu0, CONST.u0, 1.5e-9)
        omega = math.sqrt(CONST.g0) / 0.5
        assert liquid_holdup(st, omega, 0.5, PACK) == pytest.approx(0.039, rel=1e-12)

    def test_accel_exponent(self):
        st = liq()
        h1 = liquid_holdup(st, 20.0, 0.5, PACK)
        h2 = liquid_holdup(st, 40.0, 0.5, PACK)
        assert h2 / h1 == pytest.approx(4.0**-0.5, rel=1e-12)

    def test_velocity_exponent(self):
        st1 = liq(u=0.01)
        st2 = liq(u=0.01 * 2.0 ** (1.0 / 0.6))
        h1 = liquid_holdup(st1, 60.0, 0.5, PACK)
        h2 = liquid_holdup(st2, 60.0, 0.5, PACK)
        assert h2 / h1 == pytest.approx(2.0, rel=1e-12)

    def test_clamp_with_warning(self):
        st = liq(u=10.0, mu=0.5)  # absurd loading, drives the correlation high
        with pytest.warns(HoldupClampWarning):
            h = liquid_holdup(st, 0.0, 0.5, PACK)
        assert h == pytest.approx(0.95 * PACK.void_fraction)


class TestPressureGradient:
    def test_pure_centrifugal_head(self):
        dp = pressure_gradient(gas(), PACK, 0.0, 1.0, 0.5, 62.8)
        assert dp == pytest.approx(1.2 * 62.8**2 * 0.5, rel=1e-12)

    def test_viscous_linearity_at_small_flow(self):
        d1 = pressure_gradient(gas(), PACK, 1e-6, 1.0, 0.5, 0.0)
        d2 = pressure_gradient(gas(), PACK, 2e-6, 1.0, 0.5, 0.0)
        assert d2 / d1 == pytest.approx(2.0, rel=1e-3)

    def test_three_term_hand_evaluation(self):
        rho, mu, eps = 1.2, 1.8e-5, 0.96
        d_h = PACK.hydraulic_diameter
        u = 5.0 / (2.0 * math.pi * 1.0 * 0.5)
        viscous = 150.0 * (1 - eps) ** 2 * mu / (d_h**2 * eps**3) * u
        inertial = 1.75 * (1 - eps) * rho / (d_h * eps**3) * u**2
        centrifugal = rho * 62.8**2 * 0.5
        oracle = viscous + inertial + centrifugal
        got = pressure_gradient(gas(rho=rho, mu=mu), PACK, 5.0, 1.0, 0.5, 62.8)
        assert got == pytest.approx(oracle, rel=1e-12)

    def test_zero_radius_rejected(self):
        with pytest.raises(ValueError):
            pressure_gradient(gas(), PACK, 1.0, 1.0, 0.0, 10.0)


class TestFlooding:
    def test_printed_intercept(self):
        # ln X = 0 collapses the quadratic to the intercept
        x_unit = 1.0 / math.sqrt(1.2 / 1050.0)  # makes X exactly 1
        u = flooding_velocity(x_unit, 1.2, 1050.0, PACK, 62.8, 0.5)
        group = u**2 * PACK.specific_surface_area * (1.2 / 1050.0) / (
            62.8**2 * 0.5 * PACK.void_fraction**3
        )
        assert group == pytest.approx(math.exp(-3.01), rel=1e-12)
        assert group == pytest.approx(0.04929, rel=1e-4)

    def test_omega_doubling(self):
        u1 = flooding_velocity(2.0, 1.2, 1050.0, PACK, 30.0, 0.5)
        u2 = flooding_velocity(2.0, 1.2, 1050.0, PACK, 60.0, 0.5)
        assert u2 / u1 == pytest.approx(2.0, rel=1e-12)

    def test_decreasing_in_flow_parameter(self):
        ratio = math.sqrt(1.2 / 1050.0)
        lnx = np.linspace(-2.0, 2.0, 21)
        lg = np.exp(lnx) / ratio
        u = flooding_velocity(lg, 1.2, 1050.0, PACK, 60.0, 0.5)
        assert np.all(np.diff(u) < 0.0)

    def test_round_trip_ratio(self):
        u_f = flooding_velocity(3.0, 1.2, 1050.0, PACK, 60.0, 0.5)
        assert flooding_ratio(u_f, u_f) == pytest.approx(100.0, rel=1e-14)

    def test_ratio_guards(self):
        assert flooding_ratio(0.0, 5.0) == 0.0
        with pytest.raises(ValueError):
            flooding_ratio(1.0, 0.0)


class TestHeatTransfer:
    def test_unit_lewis(self):
        rho, cp, d = 1.2, 1.0, 1.6e-5
        lam = rho * (cp * 1000.0) * d  # Le = 1 exactly
        st = GasPhaseState(rho, 1.8e-5, 2.0, d, cp, lam)
        assert heat_transfer_coefficient(0.02, st) == pytest.approx(
            0.02 * rho * cp, rel=1e-12
        )

    def test_linearity_in_kv(self):
        st = GasPhaseState(1.2, 1.8e-5, 2.0, 1.6e-5, 1.0, 0.026)
        assert heat_transfer_coefficient(0.04, st) == pytest.approx(
            2.0 * heat_transfer_coefficient(0.02, st), rel=1e-12
        )

    def test_air_like_hand_evaluation(self):
        rho, cp_mass, d, lam = 1.2, 1.006, 2.1e-5, 0.026
        st = GasPhaseState(rho, 1.8e-5, 2.0, d, cp_mass, lam)
        lewis = lam / (rho * cp_mass * 1000.0 * d)
        oracle = 0.02 * rho * cp_mass * lewis ** (2.0 / 3.0)
        assert heat_transfer_coefficient(0.02, st) == pytest.approx(oracle, rel=1e-12)


class TestGravityReplacement:
    def test_total_identity(self):
        # an acceleration group of exactly 9.81 reproduces static values
        omega, r = math.sqrt(9.81) / 0.7, 0.7
        st = liq()
        assert liquid_mtc(st, PACK, omega, r) == liquid_mtc(st, PACK, 0.0, r)
        assert effective_area(st, PACK, omega, r) == effective_area(st, PACK, 0.0, r)
        assert liquid_holdup(st, omega, r, PACK) == liquid_holdup(st, 0.0, r, PACK)

    def test_accel_group_floor(self):
        assert accel_group(0.0, 123.0) == 9.81
        assert accel_group(100.0, 0.5) == pytest.approx(2500.0)


def test_smoothness_over_search_box():
    # finite central-difference derivatives stay bounded over the rpm range
    st = liq()
    omegas = np.linspace(15.0, 160.0, 60)
    k = liquid_mtc(st, PACK, omegas, 0.5)
    dk = np.gradient(k, omegas)
    assert np.all(np.isfinite(dk))
    assert np.all(np.abs(np.diff(dk)) < 1e-3)


def test_correlation_overrides():
    c = TransferConstants.from_config({"area_lead": 0.9, "flood_coeffs": [-3.0, -1.0, -0.1]})
    assert c.area_lead == 0.9
    assert c.flood_coeffs == (-3.0, -1.0, -0.1)
    with pytest.raises(ValueError):
        TransferConstants.from_config({"bogus": 1.0})
