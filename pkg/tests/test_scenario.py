import numpy as np
import pytest

from lwrctl.scenario import ConfigError, ScenarioConfig, load_config, parse_config, run_scenario


def test_defaults_are_greenshields_scenario():
    c = parse_config("")
    assert (c.flux, c.u_max, c.u_star, c.u_bar) == ("greenshields", 1.0, pytest.approx(1 / 3), 0.25)
    assert (c.a, c.b, c.t_end, c.control_period) == (-1.0, 1.0, 15.0, 0.015)
    assert c.controller_mode == "left" and c.initial == "paper_sinusoid"
    assert c.snapshot_times == [0.0, 5.0, 10.0, 15.0]
    assert parse_config("{}") == c and parse_config("# comment only\n") == c


def test_greenberg_log_config():
    c = parse_config("flux: greenberg_log\nepsilon: 0.1\nu_star: 0.25\nu_bar: 0.2\n")
    m = c.build_flux()
    assert m.kind == "greenberg_log" and m.params["epsilon"] == 0.1
    assert abs(m.f(1.0)) < 1e-15


@pytest.mark.parametrize(
    "text, field",
    [
        ("u_star: 2", "u_star"),
        ("u_bar: 0", "u_bar"),
        ("control_period: -1", "control_period"),
        ("t_end: 0.001", "t_end"),
        ("controller_mode: both", "controller_mode"),
        ("flux: quartic", "flux"),
        ("n_cells: 1", "n_cells"),
        ("n_cells: 2.5", "n_cells"),
        ("a: 1\nb: 0", "b"),
        ("cfl: 1.5", "cfl"),
        ("kappa_V: 0", "kappa_V"),
        ("u_max: abc", "u_max"),
        ("initial: {kind: wave}", "initial"),
        ("initial: {value: 0.2}", "initial"),
        ("flux: greenberg_log\nepsilon: 0", "epsilon"),
    ],
)
def test_field_level_errors(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(text)


def test_structural_errors():
    with pytest.raises(ConfigError, match="unknown keys: speed"):
        parse_config("speed: 3")
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("u_star: [1, 2")
    with pytest.raises(ConfigError, match="mapping"):
        parse_config("- 1\n- 2")


def test_json_and_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"flux": "sextic", "u_star": 0.25, "initial": {"kind": "constant", "value": 0.2}}')
    c = load_config(p, controller_mode="right")
    assert c.flux == "sextic" and c.controller_mode == "right"
    assert c.initial_spec() == ("constant", {"value": 0.2})


def short(**kw):
    base = dict(n_cells=50, t_end=0.6, snapshot_times=[0.0, 0.3, 0.6])
    base.update(kw)
    return parse_config("", **base)


def test_uncontrolled_constant_state():
    log = run_scenario(short(controller_mode="none", initial={"kind": "constant", "value": 0.3}))
    V, B = log.column("V"), log.column("B")
    assert np.all(V == V[0]) and np.all(B == B[0])
    assert all(r.omega_a is None and r.omega_b is None for r in log.rows)
    assert all(r.active == "uncontrolled" for r in log.rows)


def test_log_timing_and_snapshots():
    log = run_scenario(short())
    t = log.column("t")
    assert len(t) == 41 and t[0] == 0.0 and t[-1] == pytest.approx(0.6)
    assert np.all(np.abs(np.diff(t) - 0.015) <= 1e-12)
    assert sorted(log.snapshots) == [0.0, 0.3, 0.6]
    assert log.snapshots[0.3].t == pytest.approx(0.3)
    assert np.max(log.mass_residuals) <= 1e-10


def test_modes_use_the_expected_inputs():
    left = run_scenario(short(controller_mode="left"))
    assert all(r.omega_b is None and r.omega_a is not None for r in left.rows)
    right = run_scenario(short(controller_mode="right"))
    assert all(r.omega_a is None and 5 / 12 - 1e-9 <= r.omega_b <= 1 for r in right.rows)
    both = run_scenario(short(controller_mode="two_input", t_end=0.15))
    assert all(r.omega_a is not None and r.omega_b is not None for r in both.rows)


def test_infeasible_steps_are_logged():
    log = run_scenario(short())
    flagged = [r.t for r in log.rows if not r.feasible]
    assert flagged == log.infeasible_events
    assert all(r.violation > 0 for r in log.rows if not r.feasible)
    assert all(r.violation == 0 for r in log.rows if r.feasible)


def test_deterministic():
    a = run_scenario(short(controller_mode="right"))
    b = run_scenario(short(controller_mode="right"))
    assert a.rows == b.rows


def test_validate_on_direct_construction():
    with pytest.raises(ConfigError):
        run_scenario(ScenarioConfig(u_star=-0.1))
