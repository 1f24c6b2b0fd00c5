import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fvdegen.config import (
    PRESET_NAMES,
    ConfigError,
    RunConfig,
    format_boundary,
    load_config,
    parse_boundary,
    preset,
)


@pytest.mark.parametrize("full", [False, True])
@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_round_trip_and_validate(name, full):
    cfg = preset(name, full=full)
    assert cfg.validate() is cfg
    assert RunConfig.from_ini(cfg.to_ini()) == cfg


def test_example1_values():
    cfg = preset("example1")
    assert cfg.t_final == 0.1
    assert cfg.boundary == ("periodic", "periodic")
    assert cfg.levels == (100, 200, 400, 800, 1600)
    u0 = cfg.build_initial()
    np.testing.assert_allclose(u0(np.array([-0.5, 0.0, 0.5])), [0.0, 0.5, 1.0], atol=1e-15)


def test_example5_mesh():
    cfg = preset("example5")
    mesh = cfg.build_mesh()
    ax = mesh.axes[0]
    assert ax.n_cells == 160 and ax.interfaces[0] == -5.5 and ax.interfaces[-1] == 5.5
    assert cfg.params == {"m": 5.0} and cfg.dt == 1e-4 and cfg.t_final == 10.0


def test_example8_epsilons_include_zero():
    cfg = preset("example8")
    assert 0.0 in cfg.epsilons
    assert cfg.build_model(0.0).linear_convection is False
    left, right = cfg.build_bc()[0]
    assert left.kind == "dirichlet" and left.value == 1.0 and right.kind == "outflow"


def test_example7_scaled_and_full():
    assert preset("example7").cells == (20, 20, 20) and preset("example7").t_final == 2.0
    assert preset("example7", full=True).cells == (40, 40, 40)
    assert preset("example7", full=True).t_final == 10.0


def test_unknown_preset():
    with pytest.raises(ConfigError) as err:
        preset("example9")
    assert err.value.problems[0][0] == "preset"


@given(st.floats(1e-8, 1.0), st.floats(0.0, 50.0), st.integers(1, 5000), st.floats(1.01, 9.0))
def test_round_trip_keeps_every_float(dt, t_final, every, m):
    cfg = preset("example5").with_updates(dt=dt, t_final=t_final, record_every=every, model_params={"m": m})
    assert RunConfig.from_ini(cfg.to_ini()) == cfg


def _paths(cfg):
    return {p for p, _ in cfg.problems()}


def test_every_bad_field_reported_with_its_path():
    cfg = preset("example5").with_updates(
        model="nope", cells=(0,), flux="weno", dt=-1.0, cfl_safety=2.0, record_every=0,
        equilibrium="maybe", levels=(100, 300), out="")
    paths = _paths(cfg)
    for p in ("model.name", "mesh.cells[0]", "solver.flux", "solver.dt", "solver.cfl_safety",
              "solver.record_every", "study.equilibrium", "study.levels", "output.directory"):
        assert p in paths
    with pytest.raises(ConfigError):
        cfg.validate()


def test_cross_field_checks():
    assert "boundary.x_right" in _paths(preset("example1").with_updates(boundary=("periodic", "neumann")))
    assert "solver.flux" in _paths(preset("example7").with_updates(flux="cu"))
    assert "study.equilibrium" in _paths(preset("example1").with_updates(equilibrium="barenblatt"))
    assert "solver.snapshot_times" in _paths(preset("example8").with_updates(snapshot_times=(0.5,)))
    assert "model.k" in _paths(preset("example5").with_updates(model_params={"m": 2.0, "k": 1.0}))
    assert "boundary" in _paths(preset("example5").with_updates(boundary=("neumann",)))


def test_parse_errors_are_collected():
    text = preset("example5").to_ini().replace("t_final = 10.0", "t_final = soon")
    text = text.replace("cells = 160", "cells = many")
    with pytest.raises(ConfigError) as err:
        RunConfig.from_ini(text)
    paths = [p for p, _ in err.value.problems]
    assert "solver.t_final" in paths and any(p.startswith("mesh.cells") for p in paths)


def test_missing_sections_and_garbage():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_ini("[run]\nname = x\n")
    assert {p for p, _ in err.value.problems} >= {"model", "mesh", "solver"}
    with pytest.raises(ConfigError):
        RunConfig.from_ini("not an ini file")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(tmp_path / "absent.ini")
    assert err.value.problems[0][0] == "config"


def test_load_config_reads_written_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text(preset("example2").to_ini())
    assert load_config(path) == preset("example2")


@pytest.mark.parametrize("spec", ["periodic", "neumann", "outflow", "dirichlet:0.25", "dirichlet:-1.0"])
def test_boundary_spec_round_trip(spec):
    assert format_boundary(parse_boundary(spec)) == spec


@pytest.mark.parametrize("spec", ["dirichlet:", "dirichlet:abc", "robin", ""])
def test_bad_boundary_specs(spec):
    with pytest.raises(ValueError):
        parse_boundary(spec)
