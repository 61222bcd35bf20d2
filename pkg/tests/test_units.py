import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as const

from ionsim import units

# Ca-40 at 1e6 rad/s, evaluated directly from CODATA constants and the AME mass 39.962590863 u
CA40_ELL = 1.5149087922199386e-05
CA40_EPS = 6.9246918814694126e-06


def test_length_scale_identity(ctx):
    lhs = ctx.length_scale**3 * 4 * math.pi * const.epsilon_0 * ctx.mass * ctx.omega_z**2
    assert lhs == pytest.approx(const.e**2, rel=1e-12)


def test_ca40_scales(ctx):
    assert ctx.length_scale == pytest.approx(CA40_ELL, rel=1e-12)
    assert ctx.nonlinearity == pytest.approx(CA40_EPS, rel=1e-12)
    assert ctx.energy_scale == pytest.approx(const.hbar * 1e6, rel=1e-15)
    assert ctx.ground_width == pytest.approx(math.sqrt(const.hbar / (2 * ctx.mass * 1e6)), rel=1e-15)
    assert ctx.oscillator_length == pytest.approx(ctx.length_scale * math.sqrt(ctx.nonlinearity), rel=1e-12)


def test_scaling_laws():
    a = units.make_context(mass_amu=40.0, species=None, omega_z=1e6)
    b = units.make_context(mass_amu=80.0, species=None, omega_z=1e6)
    c = units.make_context(mass_amu=40.0, species=None, omega_z=2e6)
    assert b.length_scale / a.length_scale == pytest.approx(2 ** (-1 / 3), rel=1e-12)
    assert c.length_scale / a.length_scale == pytest.approx(2 ** (-2 / 3), rel=1e-12)


def test_length_decreases_with_mass():
    ells = [units.make_context(mass_amu=m, species=None).length_scale for m in (1, 10, 100, 1000)]
    assert all(x > y for x, y in zip(ells, ells[1:]))


def test_unknown_species_lists_known():
    with pytest.raises(units.UnknownSpeciesError) as info:
        units.make_context("Xx-999")
    assert "Ca-40" in str(info.value)


@pytest.mark.parametrize("bad", [dict(omega_z=0.0), dict(omega_z=-1.0), dict(mass_amu=-1.0)])
def test_invalid_inputs(bad):
    with pytest.raises(ValueError):
        units.make_context(**bad)


def test_unit_definitions(ctx):
    assert units.to_si(1.0, "length", ctx) == ctx.length_scale
    assert units.to_si(1.0, "frequency", ctx) == ctx.omega_z
    assert units.to_si(1.0, "energy", ctx) == ctx.energy_scale
    with pytest.raises(ValueError):
        units.to_si(1.0, "colour", ctx)


@settings(max_examples=100, deadline=None)
@given(
    value=st.floats(1e-30, 1e30),
    kind=st.sampled_from(["length", "energy", "frequency", "time"]),
    mass=st.floats(1.0, 300.0),
    omega=st.floats(1e4, 1e8),
)
def test_round_trip(value, kind, mass, omega):
    ctx = units.make_context(mass_amu=mass, species=None, omega_z=omega)
    back = units.to_si(units.from_si(value, kind, ctx), kind, ctx)
    assert back == pytest.approx(value, rel=1e-12)


def test_cyclic_convention():
    ang = units.make_context("Ca-40", 2 * math.pi * 1e6)
    cyc = units.make_context("Ca-40", 1e6, freq_convention="cyclic")
    assert cyc.omega_z == pytest.approx(ang.omega_z, rel=1e-15)
    assert units.as_angular(3e3, cyc) == pytest.approx(2 * math.pi * 3e3)
    assert units.as_angular(3e3, ang) == 3e3


def test_json_round_trip():
    ctx = units.make_context("Be-9", 2e6, freq_convention="cyclic")
    again = units.PhysicalContext.from_json(ctx.to_json())
    assert again == ctx
    assert set(json.loads(ctx.to_json())) == {"species", "mass_amu", "omega_z", "freq_convention"}
    with pytest.raises(ValueError):
        units.PhysicalContext.from_dict({"species": "Ca-40", "colour": 1})


def test_context_is_immutable(ctx):
    with pytest.raises(Exception):
        ctx.mass = 1.0
