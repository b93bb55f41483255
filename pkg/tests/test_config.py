from pathlib import Path

import pytest
import yaml

from todaflow.config import build_operator, load_config
from todaflow.errors import ConfigError
from todaflow.lattice import Boundary, JacobiWindow

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"


def write_config(tmp_path, payload, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(payload), encoding="utf-8")
    return path


BASE = {
    "operator": {"random": {"sites": 8, "boundary": "periodic"}},
    "polynomial": [1.0],
    "t_final": 0.5,
    "dt": 0.001,
}


def test_periodic_fixture_loads():
    cfg = load_config(FIXTURES / "periodic8.yaml")
    J = cfg.operator()
    assert J.sites == 8 and J.boundary is Boundary.PERIODIC
    assert cfg.polynomial().degree == 1
    assert [p.degree for p in cfg.identity_polynomials()] == [1, 2, 3, 4]
    assert cfg.tolerances["exact"] == 1e-9
    zs = cfg.z_grid()
    assert len(zs) == 8
    assert all(abs(abs(z) - 3.0) < 1e-12 and z.imag > 0.49 for z in zs)


def test_same_seed_same_operator():
    first = load_config(FIXTURES / "periodic8.yaml").operator()
    second = load_config(FIXTURES / "periodic8.yaml").operator()
    third = load_config(FIXTURES / "periodic8.yaml", {"seed": 8}).operator()
    assert (first.a == second.a).all()
    assert not (first.a == third.a).all()


def test_bump_fixture_perturbation():
    cfg = load_config(FIXTURES / "bump.yaml")
    J = cfg.operator()
    assert J.boundary is Boundary.EVENTUALLY_FREE
    assert J.b[32] == 0.5 and J.b.sum() == 0.5
    assert cfg.z_grid()[0] == 3j


def test_overrides_apply(tmp_path):
    cfg = load_config(write_config(tmp_path, BASE), {"dt": 0.01, "t_final": 2.0, "seed": None})
    assert cfg.dt == 0.01 and cfg.t_final == 2.0 and cfg.seed == 0


def test_missing_field_is_named(tmp_path):
    payload = dict(BASE)
    del payload["dt"]
    with pytest.raises(ConfigError) as info:
        load_config(write_config(tmp_path, payload))
    assert info.value.field == "dt"
    assert "dt" in str(info.value)


def test_syntax_error_reports_line(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("polynomial: [1.0]\ndt: 0.001\noperator: {free: [\n", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.line is not None and info.value.line >= 3


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


@pytest.mark.parametrize(
    "change, field",
    [
        ({"dt": 0.0}, "dt"),
        ({"polynomial": [1.0, 0.0]}, "polynomial"),
        ({"polynomial": []}, "polynomial"),
        ({"z_grid": {"points": ["1-1j"]}}, "z_grid"),
        ({"checks": ["master", "bogus"]}, "checks"),
        ({"checks": ["mfunc"]}, "checks"),
        ({"operator": {"a": [1.0, -1.0, 1.0], "b": [0.0, 0.0, 0.0]}}, "operator"),
        ({"operator": "missing.yaml"}, "operator"),
        ({"polynomial": [0.1] * 16 + [1.0]}, "polynomial"),
        ({"identity_polynomials": [[1.0], [0.5] * 17]}, "identity_polynomials"),
        ({"site": "x"}, "site"),
        ({"mfunc": {"site": "middle"}}, "mfunc.site"),
    ],
)
def test_invalid_configs(tmp_path, change, field):
    with pytest.raises(ConfigError) as info:
        load_config(write_config(tmp_path, dict(BASE, **change)))
    assert info.value.field == field


def test_periodic_only_check_on_free_window(tmp_path):
    payload = dict(BASE, operator={"free": {"sites": 16}}, checks=["shiftcomm"])
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, payload))


def test_operator_from_flow_state_file(tmp_path, periodic8):
    (tmp_path / "flow.yaml").write_text(
        yaml.safe_dump({"J": periodic8.to_record(), "t": 0.0, "dt": 0.001, "steps": 0}), encoding="utf-8"
    )
    cfg = load_config(write_config(tmp_path, dict(BASE, operator="flow.yaml")))
    assert (cfg.operator().a == periodic8.a).all()


def test_build_operator_forms():
    free = build_operator({"free": {"sites": 5}})
    assert free.boundary is Boundary.EVENTUALLY_FREE
    inline = build_operator({"a": [1.0, 1.0, 1.0], "b": [0.0, 0.1, 0.0], "perturb": [{"site": 0, "a": 0.5}]})
    assert isinstance(inline, JacobiWindow) and inline.a[0] == 0.5 and inline.b[1] == 0.1
    with pytest.raises(ConfigError):
        build_operator(42)
