import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fvdegen import model as M
from fvdegen import solver as S
from fvdegen.diagnostics import (
    DIAGNOSTICS_HEADER,
    ConvergenceTable,
    DiagnosticsRecord,
    Problem,
    convergence_study,
    default_window,
    discrete_dissipation,
    dissipation_from_stepper,
    discrete_entropy,
    discrete_mass,
    equilibrium_slope,
    fit_decay_rate,
    l1_distance,
    read_diagnostics_csv,
    refinement_dt,
    write_diagnostics_csv,
)
from fvdegen.equilibrium import barenblatt, fermi_bose
from fvdegen.flux import FluxScheme
from fvdegen.mesh import build_uniform_1d

MESH = build_uniform_1d(-4, 4, 40)
PM = M.porous_media(2.0)
EQ = barenblatt(MESH, 2.0, 2.0)


def test_mass_and_l1():
    u = np.arange(40.0)
    assert discrete_mass(u, MESH) == pytest.approx(0.2 * u.sum())
    assert l1_distance(u, u + 1, MESH) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        l1_distance(u, u[:-1], MESH)


def test_entropy_vanishes_at_equilibrium():
    assert discrete_entropy(EQ.values, EQ.values, PM, MESH) == 0.0


def test_vacuum_slope_is_free_energy_difference():
    # with the vacuum subgradient the entropy equals F(U) - F(Ueq), F = sum m (H(U) + V U)
    rng = np.random.default_rng(0)
    u = rng.uniform(0, 1, 40)
    u *= EQ.mass / discrete_mass(u, MESH)
    V = 0.5 * MESH.centers**2
    free = lambda w: float(np.sum(MESH.widths * (PM.H(w) + V * w)))  # noqa: E731
    assert discrete_entropy(u, EQ.values, PM, MESH) == pytest.approx(free(u) - free(EQ.values), rel=1e-12)


def test_literal_and_subgradient_slopes_agree_on_positive_equilibria():
    fer = M.fokker_planck(-1)
    eq = fermi_bose(MESH, -1, 1.0)
    u = np.full(40, 0.125)
    assert discrete_entropy(u, eq, fer, MESH) == discrete_entropy(u, eq, fer, MESH, literal=True)


def test_vacuum_slope_stays_below_h0():
    slope = equilibrium_slope(PM, EQ.values, 0.5 * MESH.centers**2)
    vac = EQ.values == 0
    assert np.all(slope[vac] <= PM.h_at_zero)
    np.testing.assert_allclose(slope[~vac], PM.h(EQ.values[~vac]))


@given(arrays(float, 40, elements=st.floats(0, 3)))
def test_entropy_is_nonnegative_for_equal_mass(u):
    if discrete_mass(u, MESH) == 0:
        return
    u = u * EQ.mass / discrete_mass(u, MESH)
    assert discrete_entropy(u, EQ.values, PM, MESH) >= -1e-12


@given(arrays(float, 40, elements=st.floats(0, 3)), st.randoms(use_true_random=False))
def test_entropy_invariant_under_relabeling(u, rnd):
    perm = list(range(40))
    rnd.shuffle(perm)
    e1 = discrete_entropy(u, EQ.values, PM, MESH)
    e2 = discrete_entropy(u[perm], EQ.values[perm], PM, MESH,
                          slope=equilibrium_slope(PM, EQ.values, 0.5 * MESH.centers**2)[perm])
    assert e2 == pytest.approx(e1, rel=1e-12, abs=1e-12)


def test_dissipation_hand_value():
    # two cells, zero-flux walls: only the middle interface counts
    model = M.porous_media(2.0)
    mesh = build_uniform_1d(0, 2, 2)
    u = np.array([1.0, 2.0])
    A = -(0.5 * 1.5**2 - 0.5 * 0.5**2) / 1.0 - (model.h(2.0) - model.h(1.0)) / 1.0
    got = discrete_dissipation(u, model, mesh, S.neumann(), FluxScheme.parse("fu1"))
    assert got == pytest.approx(A * A * 1.0 * 1.0)


@pytest.mark.parametrize("scheme", ["fu1", "fu2"])
@given(u=arrays(float, 40, elements=st.floats(0, 2)))
@example(u=np.full(40, 2.0))
def test_entropy_decreases_at_half_cfl(scheme, u):
    if discrete_mass(u, MESH) < 0.1:
        return
    eq = barenblatt(MESH, 2.0, discrete_mass(u, MESH))
    cfg = S.SolverConfig(FluxScheme.parse(scheme), t_final=0.3, dt_mode="cfl_auto", cfl_safety=0.5)
    res = S.run(cfg, PM, MESH, S.neumann(), S.State(u), eq.values)
    E = np.array([r.entropy for r in res.records])
    assert np.all(np.diff(E) <= 1e-12)


@pytest.mark.parametrize("scheme", ["fu1", "fu2"])
@given(u=arrays(float, 40, elements=st.floats(0, 2)))
@example(u=np.full(40, 2.0))
def test_entropy_decreases_with_diffusive_step_cap(scheme, u):
    # the drift bound alone grows without limit near equilibrium; cap by dx^2 / (2 max r')
    if discrete_mass(u, MESH) < 0.1:
        return
    eq = barenblatt(MESH, 2.0, discrete_mass(u, MESH)).values
    stepper = S.Stepper(PM, MESH, S.neumann(), FluxScheme.parse(scheme))
    E = discrete_entropy(u, eq, PM, MESH)
    for _ in range(60):
        dt = 0.5 * min(S.cfl_dt(u, PM, MESH), 0.2**2 / (2 * PM.r_prime(u).max()))
        u = u + dt * stepper.rhs(u)
        E_next = discrete_entropy(u, eq, PM, MESH)
        assert E_next <= E + 1e-12
        E = E_next


@pytest.mark.parametrize("scheme", ["fu1", "fu2"])
@given(u=arrays(float, 40, elements=st.floats(0, 2)))
def test_semidiscrete_entropy_rate_bounded_by_dissipation(scheme, u):
    # dE/dt = sum m (h(U) + V) dU/dt <= -I
    stepper = S.Stepper(PM, MESH, S.neumann(), FluxScheme.parse(scheme))
    rate = stepper.rhs(u, keep=True)
    I = dissipation_from_stepper(stepper)
    dE = float(np.sum(MESH.widths * (PM.h(u) + 0.5 * MESH.centers**2) * rate))
    assert dE <= -I + 1e-10 * (1.0 + I)


def test_entropy_dissipation_inequality_for_small_steps():
    # forward Euler adds an O(dt) excess; at small dt the budget closes
    u = 0.5 + 0.4 * np.cos(np.pi * MESH.centers / 4) ** 2
    eq = barenblatt(MESH, 2.0, discrete_mass(u, MESH))
    res = S.run(S.SolverConfig(FluxScheme.parse("fu2"), dt=1e-4, t_final=0.1), PM, MESH, S.neumann(),
                S.State(u), eq.values)
    t = np.array([r.time for r in res.records])
    E = np.array([r.entropy for r in res.records])
    I = np.array([r.dissipation for r in res.records])
    assert E[-1] + np.sum(np.diff(t) * I[:-1]) <= E[0] * (1 + 1e-8)


def test_fit_recovers_exponential_rate():
    t = np.linspace(0, 10, 101)
    fit = fit_decay_rate(np.column_stack([t, 3.0 * np.exp(-2.0 * t)]), window=(1, 9))
    assert fit.rate == pytest.approx(2.0, rel=1e-12)
    assert fit.residual < 1e-12
    assert fit.n_points == 81


def test_fit_input_checks():
    t = np.linspace(0, 1, 4)
    with pytest.raises(ValueError):
        fit_decay_rate(np.column_stack([t, np.exp(-t)]))
    t = np.linspace(0, 1, 20)
    with pytest.raises(ValueError):
        fit_decay_rate(np.column_stack([t, -np.ones(20)]), window=(0, 1))


def test_default_window_middle_half_and_floor_cut():
    t = np.linspace(0, 8, 81)
    assert default_window(t, np.exp(-t)) == (2.0, 6.0)
    v = np.exp(-t)
    v[t >= 4] = 0.0
    assert default_window(t, v) == (2.0, 4.0)
    v = np.exp(-t)
    v[t >= 1] = 0.0
    assert default_window(t, v) == (0.0, 1.0)


def test_convergence_table_orders_and_csv(tmp_path):
    tab = ConvergenceTable.from_errors([200, 400, 800], [4e-3, 1e-3, 2.5e-4])
    assert tab.orders == pytest.approx([2.0, 2.0])
    assert tab.rows[0].order is None
    tab.write_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "n_cells,l1_error,order"
    assert lines[1] == "200,0.0040000000000000001,"
    assert "order" in str(tab)


def _smooth_problem(n):
    return Problem(M.linear_drift_power_diffusion(2.0), build_uniform_1d(-1, 1, n), S.periodic(),
                   lambda x: 0.5 + 0.5 * np.sin(np.pi * x), 0.02)


def test_refinement_dt_scales_with_dx_squared():
    dts = []
    for n in (50, 100):
        p = _smooth_problem(n)
        dts.append(refinement_dt(p, S.project_initial(p.u0, p.mesh)))
    assert dts[0] / dts[1] == pytest.approx(4.0, rel=0.01)
    assert math.isclose(0.02 / dts[1], round(0.02 / dts[1]))


def test_first_order_study_on_coarse_levels():
    tab = convergence_study(_smooth_problem, FluxScheme.parse("fu1"), [25, 50, 100])
    assert [r.n_cells for r in tab.rows] == [50, 100]
    assert 0.8 < tab.finest_order < 1.2


def test_study_rejects_non_doubling_levels():
    with pytest.raises(ValueError):
        convergence_study(_smooth_problem, FluxScheme.parse("fu1"), [25, 60])


def test_diagnostics_csv_round_trip(tmp_path):
    recs = [DiagnosticsRecord(0.1 * i, 1 / 3, math.pi * i, 2.0**-i, math.nan) for i in range(4)]
    write_diagnostics_csv(recs, tmp_path / "d.csv")
    text = (tmp_path / "d.csv").read_text().splitlines()
    assert tuple(text[0].split(",")) == DIAGNOSTICS_HEADER
    back = read_diagnostics_csv(tmp_path / "d.csv")
    for a, b in zip(recs, back):
        assert a.as_row()[:4] == b.as_row()[:4] and math.isnan(b.l1_to_equilibrium)
