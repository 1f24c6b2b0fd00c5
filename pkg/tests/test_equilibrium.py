import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fvdegen import model as M
from fvdegen.equilibrium import (
    NoEquilibriumError,
    barenblatt,
    barenblatt_values,
    discrete_equilibrium_1d,
    equilibrium_residual,
    fermi_bose,
    write_profile_csv,
)
from fvdegen.mesh import build_cartesian, build_uniform_1d

MESH = build_uniform_1d(-5.5, 5.5, 160)


def test_barenblatt_matches_mass_and_formula():
    prof = barenblatt(MESH, 5.0, 6.0)
    assert prof.mass == pytest.approx(6.0, rel=1e-12)
    x = MESH.centers
    expected = np.maximum(prof.parameter - 0.4 * x * x, 0.0) ** 0.25
    np.testing.assert_allclose(prof.values, expected, rtol=1e-13, atol=1e-14)
    assert prof.values[0] == 0 and prof.values[-1] == 0


def test_barenblatt_is_a_steady_state_on_its_support():
    prof = barenblatt(MESH, 5.0, 6.0)
    rep = equilibrium_residual(prof, M.porous_media(5.0), MESH)
    assert rep.max_residual < 1e-12
    assert rep.skipped > 0  # vacuum interfaces


def test_barenblatt_needs_room():
    with pytest.raises(NoEquilibriumError):
        barenblatt(build_uniform_1d(-1, 1, 20), 2.0, 50.0)
    with pytest.raises(ValueError):
        barenblatt(MESH, 1.0, 1.0)


def test_barenblatt_2d_radial():
    ax = build_uniform_1d(-10, 10, 40)
    mesh = build_cartesian([ax, ax])
    prof = barenblatt(mesh, 4.0, 20.0)
    assert mesh.mass(prof.values) == pytest.approx(20.0, rel=1e-12)
    np.testing.assert_allclose(prof.values, prof.values.T)


@given(st.floats(0.5, 8.0), st.floats(0.5, 8.0))
def test_barenblatt_parameter_grows_with_mass(m1, m2):
    c1 = barenblatt(MESH, 3.0, m1).parameter
    c2 = barenblatt(MESH, 3.0, m2).parameter
    assert (c1 - c2) * (m1 - m2) >= 0


def test_fermion_profile():
    mesh = build_uniform_1d(-8, 8, 64)
    prof = fermi_bose(mesh, -1, 3.0)
    assert prof.mass == pytest.approx(3.0, rel=1e-12)
    assert np.all((prof.values > 0) & (prof.values < 1))
    np.testing.assert_allclose(prof.values, 1 / (prof.parameter * np.exp(0.5 * mesh.centers**2) + 1), rtol=1e-13)
    assert equilibrium_residual(prof, M.fokker_planck(-1), mesh).max_residual < 1e-10


def test_fermion_mass_below_volume():
    mesh = build_uniform_1d(-1, 1, 10)
    with pytest.raises(NoEquilibriumError):
        fermi_bose(mesh, -1, 2.0)
    # close to the volume the profile saturates towards 1
    assert fermi_bose(mesh, -1, 1.9).values.max() > 0.9


def test_boson_profile_and_critical_mass():
    mesh = build_uniform_1d(-6, 6, 48)
    prof = fermi_bose(mesh, 1, 0.5)
    assert prof.parameter > 1 and prof.mass == pytest.approx(0.5, rel=1e-12)
    # the beta -> 1 profile bounds the reachable mass
    critical = float(np.sum(mesh.widths / (np.exp(0.5 * mesh.centers**2) - 1)))
    with pytest.raises(NoEquilibriumError):
        fermi_bose(mesh, 1, 1.1 * critical)


def test_discrete_recursion_holds_exactly():
    model = M.porous_media(2.0)
    u = discrete_equilibrium_1d(model, MESH, 80, 1.0)
    hU = model.h(u)
    V = 0.5 * MESH.centers**2
    supp = u > 0
    inner = supp[1:] & supp[:-1]
    np.testing.assert_allclose((hU[1:] - hU[:-1])[inner], -(V[1:] - V[:-1])[inner], atol=1e-13)
    assert u[80] == 1.0


def test_discrete_recursion_linear_diffusion_is_gibbs():
    model = M.linear_drift_power_diffusion(1.0, drift=2.0)
    mesh = build_uniform_1d(0, 1, 10)
    u = discrete_equilibrium_1d(model, mesh, 0, 1.0)
    np.testing.assert_allclose(u, np.exp(-2.0 * (mesh.centers - mesh.centers[0])), rtol=1e-13)


def test_barenblatt_values_vanish_outside_support():
    v = barenblatt_values(MESH, 2.0, 1.0)
    r = np.abs(MESH.centers)
    assert np.all(v[r > math.sqrt(4.0)] == 0)


def test_profile_csv(tmp_path):
    prof = barenblatt(MESH, 5.0, 6.0)
    write_profile_csv(prof, MESH, tmp_path / "p.csv")
    data = np.loadtxt(tmp_path / "p.csv", delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 1], prof.values)
