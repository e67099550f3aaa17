import pytest

from dnls.config import ExperimentSuite, from_dict, loads, parse_config, to_dict
from dnls.damping import DampingProfile
from dnls.solver import ConfigError, SimConfig

MINIMAL = """
dim = 1
p = 3
mu = -1
t_end = 1.0
dt = 1e-3

[grid]
points = 512
half_length = 32.0
"""


def test_minimal_config_fills_defaults(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(MINIMAL)
    cfg = parse_config(path)
    assert isinstance(cfg, SimConfig)
    assert cfg.p == 3.0 and isinstance(cfg.p, float)
    assert cfg.damping == DampingProfile.zero()
    assert cfg.cadence == 0.1 and cfg.formulation == "direct"
    assert cfg.blowup_threshold == 1e6 and cfg.resolution_tail == 1e-4
    assert cfg.initial.kind == "gaussian" and cfg.name == "run"
    assert cfg.reports.checks == ("mass", "hamiltonian")
    assert cfg.base_dir == str(tmp_path)


def test_energy_supercritical_p_rejected():
    text = MINIMAL.replace("dim = 1", "dim = 3").replace("p = 3", "p = 6").replace("points = 512", "points = 32")
    with pytest.raises(ConfigError, match="energy-supercritical p"):
        loads(text)


@pytest.mark.parametrize(
    "text, message",
    [
        (MINIMAL + "colour = 'red'\n", "unknown key"),
        (MINIMAL.replace("half_length = 32.0", "half_length = 32.0\nspacing = 1"), "unknown key"),
        (MINIMAL.replace("dt = 1e-3\n", ""), "missing required"),
        (MINIMAL.replace("[grid]\npoints = 512\n", "[grid]\n"), "points"),
        (MINIMAL.replace("dim = 1", "dim = 'one'"), "integer"),
        (MINIMAL.replace("p = 3", "p = true"), "number"),
        ('damping = "linear:a=1"\n' + MINIMAL, "damping"),
        (MINIMAL + "[reports]\nchecks = ['mass', 'entropy']\n", "unknown check"),
        (MINIMAL + "[reports]\nscattering = 1\n", "boolean"),
        (MINIMAL + "[initial]\nkind = 'bump'\n", "initial data kind"),
    ],
)
def test_validation_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        loads(text)


def test_parse_error_reports_position():
    with pytest.raises(ConfigError, match=r"line 2, column"):
        loads("dim = 1\np 3\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "absent.toml")


def _run_table(name):
    body = MINIMAL.replace("[grid]", "[run.grid]")
    return f'[[run]]\nname = "{name}"\n' + body


def test_suite_of_three():
    text = '[suite]\nname = "s"\nseed = 7\n\n' + "\n".join(_run_table(n) for n in "abc")
    suite = loads(text)
    assert isinstance(suite, ExperimentSuite) and len(suite) == 3
    assert [r.name for r in suite.runs] == ["a", "b", "c"]
    assert all(r.seed == 7 for r in suite.runs)


def test_suite_names_unique():
    text = "[suite]\n" + "\n".join(_run_table(n) for n in "aba")
    with pytest.raises(ConfigError, match="unique"):
        loads(text)


def test_suite_needs_runs():
    with pytest.raises(ConfigError, match="no \\[\\[run\\]\\]"):
        loads('[suite]\nname = "empty"\n')


def test_dict_round_trip(tmp_path):
    table = tmp_path / "a.csv"
    table.write_text("0,0.5\n1,0.5\n")
    text = 'damping = "tabulated:path=a.csv"\nname = "x"\n' + MINIMAL + "[initial]\ncenter = [1.0]\nnoise = 0.01\n"
    cfg = loads(text, base_dir=tmp_path)
    again = from_dict(to_dict(cfg), tmp_path)
    assert again == cfg


def test_shipped_configs_validate():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.toml"))
    assert files
    for path in files:
        parse_config(path)
