import json
import math
import subprocess
import sys

import pytest

from bellselect import cli


def write_config(path, **cfg):
    cfg = {"schema_version": 1, **cfg}
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture
def vfixed(tmp_path):
    return write_config(tmp_path / "cfg.json", protocol="v_fixed", label="C0", trials=20_000, seed=11)


def test_run_v_fixed_summary(tmp_path, vfixed):
    out = tmp_path / "out"
    out.mkdir()
    assert cli.main(["run", "--config", vfixed, "--out", str(out), "--gates"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["reports"]["chsh"]["all"]["analytic_S"] == pytest.approx(-2 * math.sqrt(2), abs=1e-12)
    assert summary["config"]["seed"] == 11
    assert summary["gates"]["passed"]
    lines = (out / "events.csv").read_text().splitlines()
    assert lines[0] == "trial,protocol,prep,m,a,b,A,B,kept,hopper"
    assert len(lines) == 20_001
    # absent fields are empty
    assert lines[1].split(",")[3] == "" and lines[1].split(",")[9] == ""


def test_csv_angle_format(tmp_path, vfixed):
    out = tmp_path / "o"
    out.mkdir()
    cli.main(["run", "--config", vfixed, "--out", str(out)])
    angles = {row.split(",")[5] for row in (out / "events.csv").read_text().splitlines()[1:]}
    assert angles == {"0.785398163397", "2.35619449019"}


def test_byte_identical_and_worker_independent(tmp_path, vfixed):
    outs = []
    for i, workers in enumerate(("1", "4", "1")):
        out = tmp_path / f"o{i}"
        out.mkdir()
        assert cli.main(["run", "--config", vfixed, "--out", str(out), "--workers", workers]) == 0
        outs.append((out / "events.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_config_echo_round_trip(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", protocol="w_swap", geometry="MPast", trials=5000, seed=3, workers=2)
    first = tmp_path / "first"
    first.mkdir()
    assert cli.main(["run", "--config", cfg, "--out", str(first)]) == 0
    echo = json.loads((first / "summary.json").read_text())["config"]
    assert "workers" not in echo
    again = write_config(tmp_path / "echo.json", **{k: v for k, v in echo.items() if k != "schema_version"})
    second = tmp_path / "second"
    second.mkdir()
    assert cli.main(["run", "--config", again, "--out", str(second)]) == 0
    assert (first / "events.csv").read_bytes() == (second / "events.csv").read_bytes()
    s1 = json.loads((first / "summary.json").read_text())
    s2 = json.loads((second / "summary.json").read_text())
    assert s1["reports"] == s2["reports"]


def test_generated_seed_is_echoed(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", protocol="hopper", trials=1000)
    out = tmp_path / "o"
    out.mkdir()
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0
    err = capsys.readouterr().err
    seed = json.loads((out / "summary.json").read_text())["config"]["seed"]
    assert str(seed) in err


@pytest.mark.parametrize(
    "cfg, key",
    [
        ({"protocol": "v_fixed", "bogus": 1}, "bogus"),
        ({"protocol": "v_fixed", "trials": 0}, "trials"),
        ({"protocol": "teleport"}, "protocol"),
        ({"protocol": "v_fixed", "label": "C9"}, "label"),
        ({"protocol": "w_swap", "geometry": "MSideways"}, "geometry"),
        ({"protocol": "v_random", "settings": {"a": ["x"], "b": [0]}}, "settings"),
        ({"protocol": "charlie", "settings": {"a": [0], "b": [0]}}, "settings"),
        ({"protocol": "v_fixed"}, "label"),
    ],
)
def test_malformed_config_exit_2_no_files(tmp_path, capsys, cfg, key):
    path = write_config(tmp_path / "bad.json", **cfg)
    out = tmp_path / "o"
    out.mkdir()
    assert cli.main(["run", "--config", path, "--out", str(out)]) == 2
    assert list(out.iterdir()) == []
    assert key in capsys.readouterr().err


def test_unreadable_and_invalid_json(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["run"]) == 2


def test_gate_failure_exit_3(tmp_path):
    # two trials cannot populate all four CHSH pairs, so the gate fails
    cfg = write_config(tmp_path / "cfg.json", protocol="v_fixed", label="C1", trials=2, seed=1, reports=["chsh"])
    out = tmp_path / "o"
    out.mkdir()
    assert cli.main(["run", "--config", cfg, "--out", str(out), "--gates"]) == 3
    assert not json.loads((out / "summary.json").read_text())["gates"]["passed"]
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0


@pytest.mark.parametrize("name", cli.GALLERY)
def test_gallery_commands(tmp_path, name):
    out = tmp_path / name
    out.mkdir()
    params = {"population": 200_000} if name == "clinic" else {}
    argv = ["gallery", name, "--seed", "5", "--out", str(out), "--gates"]
    if params:
        (tmp_path / "p.json").write_text(json.dumps(params))
        argv += ["--config", str(tmp_path / "p.json")]
    assert cli.main(argv) == 0
    assert (out / f"{name}.csv").exists()
    assert json.loads((out / "summary.json").read_text())["config"]["protocol"] == name


def test_run_accepts_gallery_config(tmp_path):
    cfg = write_config(tmp_path / "g.json", protocol="survivorship", seed=2, gallery={"sorties": 1000})
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "survivorship.csv").exists()


def test_gallery_bad_parameter(tmp_path):
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"error_rate": 0.7}))
    assert cli.main(["gallery", "coin_factory", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_oracle_output(capsys):
    assert cli.main(["oracle", "--label", "C0", "--a", "0", "--b", "0"]) == 0
    out = capsys.readouterr().out
    assert "P(+,-) = 0.5" in out and "P(-,+) = 0.5" in out and "P(+,+) = 0\n" in out
    cli.main(["oracle", "--label", "C1", "--a", "0", "--b", "0"])
    out = capsys.readouterr().out
    assert "P(+,+) = 0.5" in out and "P(-,-) = 0.5" in out
    cli.main(["oracle", "--label", "C0", "--a", "0", "--b", "pi/2"])
    out = capsys.readouterr().out
    for cell in ("++", "+-", "-+", "--"):
        assert f"P({cell[0]},{cell[1]}) = 0.25" in out
    assert cli.main(["oracle", "--label", "C7"]) == 2


def test_combos_output(capsys):
    cli.main(["combos", "--grid", "0,0"])
    assert "a=0 b=0 A=+1 B=+1 M=C0" in capsys.readouterr().out
    cli.main(["combos", "--grid", "0,pi/2"])
    assert capsys.readouterr().out.strip() == "none found"
    cli.main(["combos"])
    assert capsys.readouterr().out.strip() == "none found"
    assert cli.main(["combos", "--grid", "0"]) == 2


@pytest.mark.parametrize("text, value", [("pi/2", math.pi / 2), ("3pi/4", 3 * math.pi / 4), ("0.5", 0.5), (1, 1.0), ("-pi", -math.pi)])
def test_parse_angle(text, value):
    assert cli.parse_angle(text) == pytest.approx(value)


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bellselect.cli", "oracle"], capture_output=True, text=True)
    assert proc.returncode == 0 and "E(a,b) = -1" in proc.stdout
