"""Full-scale acceptance runs; each prints one PASS/FAIL line in the summary.

Run only these with ``pytest -m slow tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

from fvdegen import model as M
from fvdegen import solver as S
from fvdegen.config import preset
from fvdegen.diagnostics import Problem, convergence_study, discrete_mass, fit_decay_rate
from fvdegen.driftdiffusion import dd_run, pn_diode_1d, thermal_equilibrium
from fvdegen.equilibrium import barenblatt, discrete_equilibrium_1d, fermi_bose
from fvdegen.flux import FluxScheme, InterfaceStencil, bernoulli, dr_mean, flux_fu1, upwind, van_leer
from fvdegen.mesh import build_cartesian, build_uniform_1d

pytestmark = pytest.mark.slow

LEVELS = (100, 200, 400, 800, 1600)


def _study(name, scheme):
    cfg = preset(name)
    model, bc, u0 = cfg.build_model(), cfg.build_bc(), cfg.build_initial()

    def setup(n):
        return Problem(model, cfg.build_mesh((n,)), bc, u0, cfg.t_final)

    return convergence_study(setup, FluxScheme.parse(scheme), LEVELS)


def test_criterion_1_table1_orders(acceptance_report):
    start = time.perf_counter()
    targets = {"fu2": (1.98, 0.15), "fu1": (0.99, 0.1), "sgext": (2.0, 0.15)}
    orders = {s: _study("example1", s).finest_order for s in targets}
    elapsed = time.perf_counter() - start
    ok = all(abs(orders[s] - c) <= tol for s, (c, tol) in targets.items()) and elapsed <= 600
    detail = ", ".join(f"{s} {orders[s]:.3f}" for s in targets) + f"; {elapsed:.0f} s"
    acceptance_report(1, "Example 1 finest-pair orders", ok, detail)
    for s, (c, tol) in targets.items():
        assert abs(orders[s] - c) <= tol, (s, orders[s])
    assert elapsed <= 600


def test_criterion_2_table2_orders(acceptance_report):
    sg = _study("example2", "sgext").finest_order
    fu2 = _study("example2", "fu2").finest_order
    ok = abs(sg - 1.0) <= 0.1 and abs(fu2 - 1.8) <= 0.2
    acceptance_report(2, "Example 2 finest-pair orders", ok, f"sgext {sg:.3f}, fu2 {fu2:.3f}")
    assert abs(sg - 1.0) <= 0.1
    assert abs(fu2 - 1.8) <= 0.2


def test_criterion_3_discrete_equilibrium_preserved(acceptance_report):
    mesh = build_uniform_1d(-5.5, 5.5, 160)
    worst = 0.0
    for m in (2.0, 5.0):
        model = M.porous_media(m)
        ueq = discrete_equilibrium_1d(model, mesh, 80, 1.0)
        cfg = S.SolverConfig(FluxScheme.parse("fu2"), dt=1e-4, t_final=0.1)
        res = S.run(cfg, model, mesh, S.neumann(), S.State(ueq), record=False)
        assert res.steps == 1000
        worst = max(worst, float(np.max(np.abs(res.final.values - ueq))))
    acceptance_report(3, "equilibrium preserved over 1000 FU2 steps", worst <= 1e-12, f"max change {worst:.3g}")
    assert worst <= 1e-12


def test_criterion_4_first_order_nonnegativity(acceptance_report):
    rng = np.random.default_rng(2024)
    mesh = build_uniform_1d(-2, 2, 40)
    model = M.porous_media(2.0)
    bc = S.neumann()
    stepper = S.Stepper(model, mesh, bc, FluxScheme.parse("fu1"))
    lowest = np.inf
    for _ in range(100):
        u = rng.uniform(0, 1, 40) * (rng.uniform(size=40) < 0.7)
        for _ in range(1000):
            dt = S.cfl_dt(u, model, mesh, bc)
            if not np.isfinite(dt):
                break
            u = u + dt * stepper.rhs(u)
            lowest = min(lowest, float(u.min()))
    acceptance_report(4, "FU1 at dt = cfl_dt stays nonnegative", lowest >= -1e-12, f"min cell {lowest:.3g}")
    assert lowest >= -1e-12


def test_criterion_5_entropy_estimate(acceptance_report):
    start = time.perf_counter()
    cfg = preset("example5")
    model, mesh = cfg.build_model(), cfg.build_mesh()
    init = S.project_initial(cfg.build_initial(), mesh)
    eq = barenblatt(mesh, cfg.params["m"], discrete_mass(init.values, mesh))
    scfg = S.SolverConfig(cfg.scheme(), dt=cfg.dt, t_final=cfg.t_final, record_every=1)
    res = S.run(scfg, model, mesh, cfg.build_bc(), init, eq.values)
    elapsed = time.perf_counter() - start
    t = np.array([r.time for r in res.records])
    E = np.array([r.entropy for r in res.records])
    I = np.array([r.dissipation for r in res.records])
    rise = float(np.max(np.diff(E)))
    budget = E[-1] + float(np.sum(np.diff(t) * I[:-1]))
    lam = fit_decay_rate(np.column_stack([t, E])).rate
    ok = rise <= 1e-12 and budget <= E[0] * (1 + 1e-8) and lam >= 3 / 7 and 3 <= lam <= 10 and elapsed <= 300
    acceptance_report(5, "Example 5 entropy estimate", ok,
                      f"max step rise {rise:.3g}, E(T)+sum dt I {budget:.6g} vs E(0) {E[0]:.6g}, "
                      f"rate {lam:.3f}, {elapsed:.0f} s")
    assert rise <= 1e-12
    assert budget <= E[0] * (1 + 1e-8)
    assert lam >= 3 / 7 and 3 <= lam <= 10
    assert elapsed <= 300


def test_criterion_6_drift_diffusion_long_time(acceptance_report):
    ratios = {}
    for scheme in ("fu2", "cu"):
        system, init = pn_diode_1d(64, 2.0, scheme)
        eq = thermal_equilibrium(system.doping, system.bc, system.mesh, operator=system.poisson)
        res = dd_run(system, init, 5e-5, 10.0, eq, record_every=1000)
        ratios[scheme] = res.records[-1].entropy / res.records[0].entropy
    fu2_ok = ratios["fu2"] <= 1e-8
    cu_ok = ratios["cu"] >= 1e-4
    acceptance_report(6, "Example 3 FU2 decays, CU saturates", fu2_ok and cu_ok,
                      f"E(T)/E(0): fu2 {ratios['fu2']:.3g} (need <= 1e-8), cu {ratios['cu']:.3g} (need >= 1e-4)")
    assert fu2_ok
    assert cu_ok


def test_criterion_7_fermion_relaxation(acceptance_report):
    start = time.perf_counter()
    cfg = preset("example7")
    model, mesh = cfg.build_model(), cfg.build_mesh()
    init = S.project_initial(cfg.build_initial(), mesh)
    eq = fermi_bose(mesh, -1, discrete_mass(init.values, mesh))
    scfg = S.SolverConfig(cfg.scheme(), dt=1e-4, t_final=2.0, record_every=100)
    res = S.run(scfg, model, mesh, cfg.build_bc(), init, eq.values)
    elapsed = time.perf_counter() - start
    rec = res.records[len(res.records) // 10:]
    t = np.array([r.time for r in rec])
    cols = {k: np.array([getattr(r, k) for r in rec]) for k in ("entropy", "dissipation", "l1_to_equilibrium")}
    decreasing = {k: bool(np.all(np.diff(v) < 0)) for k, v in cols.items()}
    y = np.log(cols["entropy"])
    slope, icpt = np.polyfit(t, y, 1)
    resid = float(np.max(np.abs(y - (slope * t + icpt))))
    spread = float(y.max() - y.min())
    ok = all(decreasing.values()) and resid <= 0.1 * spread and elapsed <= 1800
    acceptance_report(7, "fermion relaxation (20^3, T = 2)", ok,
                      f"monotone {decreasing}, log-fit max residual {resid:.3f} vs range {spread:.3f}, "
                      f"rate {-slope:.3f}, {elapsed:.0f} s")
    assert all(decreasing.values()), decreasing
    assert resid <= 0.1 * spread
    assert elapsed <= 1800


def _bl_f(u):
    return u * u / (u * u + (1 - u) ** 2)


def _bl_df(u):
    return 2 * u * (1 - u) / (u * u + (1 - u) ** 2) ** 2


def _textbook_llf(u, dt, dx, steps):
    """Conservative LLF with inflow ghost 1 and a mirrored outflow ghost."""
    for _ in range(steps):
        g = np.concatenate(([1.0], u, [u[-1]]))
        a, b = g[:-1], g[1:]
        speed = np.maximum(np.abs(_bl_df(a)), np.abs(_bl_df(b)))
        # f' peaks at u = 1/2; include it when the interval straddles the peak
        straddle = (np.minimum(a, b) <= 0.5) & (np.maximum(a, b) >= 0.5)
        speed = np.where(straddle, np.maximum(speed, abs(_bl_df(0.5))), speed)
        F = 0.5 * (_bl_f(a) + _bl_f(b)) - 0.5 * speed * (b - a)
        u = u - dt * ((F[1:] - F[:-1]) / dx)
    return u


def test_criterion_8_buckley_leverett(acceptance_report):
    cfg = preset("example8")
    mesh = cfg.build_mesh()
    bc = cfg.build_bc()
    init = S.project_initial(cfg.build_initial(), mesh)
    scheme = FluxScheme.parse("fu1")
    res = S.run(S.SolverConfig(scheme, dt=cfg.dt, t_final=cfg.t_final), cfg.build_model(0.0), mesh, bc, init,
                record=False)
    ref = _textbook_llf(init.values.copy(), cfg.dt, float(mesh.axes[0].widths[0]), res.steps)
    identical = bool(np.array_equal(res.final.values, ref))
    lo, hi = np.inf, -np.inf
    for eps in cfg.epsilons:
        for name in ("fu1", "fu2"):
            stepper = S.Stepper(cfg.build_model(eps), mesh, bc, FluxScheme.parse(name))
            u = init.values.copy()
            for _ in range(res.steps):
                u = u + cfg.dt * stepper.rhs(u)
                lo, hi = min(lo, float(u.min())), max(hi, float(u.max()))
    bounded = lo >= 0.0 and hi <= 1.0 + 1e-10
    acceptance_report(8, "Buckley-Leverett LLF limit and bounds", identical and bounded,
                      f"bit-identical {identical} ({res.steps} steps), range [{lo:.3g}, {hi:.17g}]")
    assert identical
    assert bounded


def test_criterion_9_unit_identities(acceptance_report):
    x = np.linspace(-700, 700, 1000)
    bern = float(np.max(np.abs(bernoulli(-x) - (bernoulli(x) + x)) / np.maximum(1.0, np.abs(x))))
    lin = M.linear_drift_power_diffusion(1.0)
    rng = np.random.default_rng(9)
    pairs = rng.uniform(1e-6, 1e3, (1000, 2))
    drm = max(abs(dr_mean(lin, a, b) - 1.0) for a, b in pairs)
    ident = M.threshold_cubic_diffusion()
    fu1_gap = 0.0
    for a, b, c, d, dv in rng.uniform([0, 0, 0, 0, -5], [2, 1, 1, 2, 5], (1000, 5)):
        s = InterfaceStencil(a, b, c, d, dv, 0.1)
        fu1_gap = max(fu1_gap, abs(flux_fu1(ident, s) - upwind(-dv, b, c)))
    theta = np.concatenate([rng.uniform(-10, 10, 1000), np.geomspace(1e-8, 1e8, 1000)])
    phi = van_leer(theta)
    vl_ok = bool(np.all((phi >= 0) & (phi < 2)) and np.all(phi[theta > 0] <= 2 * theta[theta > 0]))
    mass_drift = 0.0
    closed = [(M.porous_media(2.0), S.neumann()), (M.linear_drift_power_diffusion(2.0), S.periodic())]
    for model, side in closed:
        for scheme in ("fu1", "fu2", "cu", "sgext"):
            for mesh in (build_cartesian([build_uniform_1d(-2, 2, 50)]),
                         build_cartesian([build_uniform_1d(-2, 2, 20)] * 2)):
                u0 = rng.uniform(0, 1, mesh.shape)
                bc = tuple((side, side) for _ in range(mesh.dim))
                res = S.run(S.SolverConfig(FluxScheme.parse(scheme), dt=1e-4, t_final=0.02), model, mesh, bc,
                            S.State(u0), record=False)
                w = mesh.cell_volumes
                m0, m1 = float(np.sum(w * u0)), float(np.sum(w * res.final.values))
                mass_drift = max(mass_drift, abs(m1 - m0) / max(1.0, m0))
    ok = bern <= 1e-12 and drm <= 1e-12 and fu1_gap <= 1e-14 and vl_ok and mass_drift <= 1e-13
    acceptance_report(9, "unit identities", ok,
                      f"bernoulli {bern:.2g}, dr_mean {drm:.2g}, fu1-upwind {fu1_gap:.2g}, "
                      f"van_leer ok {vl_ok}, mass drift {mass_drift:.2g}")
    assert bern <= 1e-12 and drm <= 1e-12 and fu1_gap <= 1e-14
    assert vl_ok
    assert mass_drift <= 1e-13
