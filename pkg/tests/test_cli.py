import io as stdio
import json
import math

import pytest

from theta_forge import __version__
from theta_forge import theta as th
from theta_forge.cli import RunConfig, build_parser, config_from_args, main, parse_grid, run


@pytest.fixture
def z_file(tmp_path):
    path = tmp_path / "z.json"
    path.write_text('{"rank": 1, "gram": [[1]], "label": "Z"}')
    return str(path)


def execute(argv):
    args = build_parser().parse_args(argv)
    out = stdio.StringIO()
    code = run(config_from_args(args), out)
    return code, out.getvalue()


def test_parse_grid():
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("1,2.5") == [1.0, 2.5]
    with pytest.raises(ValueError):
        parse_grid("1:2")


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig("nope")
    with pytest.raises(ValueError):
        RunConfig("theta", tolerance=0.6)


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_invariants(z_file):
    code, out = execute(["invariants", "--lattice", z_file])
    assert code == 0
    data = json.loads(out)
    assert data["h0_theta"] == pytest.approx(th.ETA0, abs=1e-12)
    assert data["h1_theta"] == pytest.approx(th.ETA0, abs=1e-12)
    assert data["deg"] == 0.0
    assert data["lambda1"] == 1.0 and data["nu"] == 2
    assert data["riemann_holds"]


def test_theta_csv(z_file):
    code, out = execute(["theta", "--lattice", z_file, "--t", "1,2", "--csv"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,log_theta,rel_error"
    assert len(lines) == 3
    assert float(lines[1].split(",")[1]) == pytest.approx(th.ETA0, abs=1e-12)


def test_profile(z_file):
    code, out = execute(["profile", "--lattice", z_file, "--max-r2", "4"])
    assert code == 0
    assert json.loads(out)["counts"] == [1, 3, 5]


def test_gext_commands(z_file):
    code, out = execute(["gext", "--E", z_file, "--G", z_file, "--T", "[[0.5]]"])
    assert code == 0
    assert json.loads(out)["h_theta"] >= 0
    code, out = execute(["gext-average", "--E", z_file, "--G", z_file, "--grid", "64", "--threads", "1"])
    assert code == 0
    assert json.loads(out)["error"] <= 1e-6


def test_legendre(z_file):
    code, out = execute(["legendre", "--lattice", z_file, "--t-grid", "1"])
    assert code == 0
    row = json.loads(out)[0]
    assert row["h0_ar"] <= row["htilde0_ar"] + 1e-8


def test_prolim(tmp_path):
    path = tmp_path / "s.json"
    levels = [{"gram": []}, {"gram": [[1.0]], "map": []},
              {"gram": [[1.0, 0.0], [0.0, 4.0]], "map": [[1, 0]]}]
    path.write_text(json.dumps({"levels": levels}))
    code, out = execute(["prolim", "--system", str(path)])
    assert code == 0
    data = json.loads(out)
    assert data["summable"] in (True, False)
    assert data["ranks"] == [0, 1, 2]
    assert data["level_h0"][2] == pytest.approx(th.ETA0 + th.tau(4.0), abs=1e-9)


def test_hardy():
    code, out = execute(["hardy", "--R", "2", "--delta", "0,1"])
    assert code == 0
    rows = json.loads(out)
    assert [r["delta"] for r in rows] == [0.0, 1.0]
    code, out = execute(["hardy", "--R", "1", "--delta", "0", "--csv"])
    assert out.splitlines()[1] == "0,inf"


def test_siegel_small():
    code, out = execute(["siegel", "--samples", "64", "--blocks", "8", "--seed", "3", "--threads", "1"])
    assert code == 0
    data = json.loads(out)
    assert data["theta"]["target"] == pytest.approx(2.0)
    assert data["count"]["target"] == pytest.approx(1 + math.pi)


def test_verify_passes():
    code, out = execute(["verify", "--suite", "lattice,theta", "--trials", "4"])
    assert code == 0
    data = json.loads(out)
    assert data["lattice"]["failures"] == []


def test_missing_file_exits_2(tmp_path):
    code, _ = execute(["invariants", "--lattice", str(tmp_path / "missing.json")])
    assert code == 2


def test_malformed_file_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"gram": [[1, 2], [2, 1]]}')
    code, _ = execute(["invariants", "--lattice", str(path)])
    assert code == 2
    assert "bad.json:1:" in capsys.readouterr().err


def test_gext_shape_error_exits_1(z_file):
    code, _ = execute(["gext", "--E", z_file, "--G", z_file, "--T", "[[1, 2]]"])
    assert code == 1


@pytest.fixture
def system_file(tmp_path):
    path = tmp_path / "system.json"
    levels = [{"gram": []}, {"gram": [[1.0]], "map": []},
              {"gram": [[1.0, 0.0], [0.0, 4.0]], "map": [[1, 0]]}]
    path.write_text(json.dumps({"levels": levels}))
    return str(path)


SMOKE = [
    ["invariants", "--lattice", "{z}"],
    ["theta", "--lattice", "{z}", "--t", "0.5:2:3", "--csv"],
    ["profile", "--lattice", "{z}", "--max-r2", "9"],
    ["gext", "--E", "{z}", "--G", "{z}", "--T", "[[0.25]]"],
    ["gext-average", "--E", "{z}", "--G", "{z}", "--grid", "16"],
    ["legendre", "--lattice", "{z}", "--t-grid", "0.5,1"],
    ["prolim", "--system", "{system}", "--depth", "2"],
    ["hardy", "--R", "3", "--delta", "0:2:3"],
    ["siegel", "--samples", "32", "--blocks", "4", "--threads", "2"],
    ["verify", "--suite", "siegel", "--trials", "2"],
    ["build-kernels", "-x", "2", "-q"],
]


@pytest.mark.parametrize("argv", SMOKE, ids=[a[0] for a in SMOKE])
def test_main_runs_every_command(argv, z_file, system_file, monkeypatch, capsys):
    monkeypatch.setattr("theta_forge.cli.build_kernels", lambda options: "/tmp/kernels")
    with pytest.raises(SystemExit) as e:
        main([a.format(z=z_file, system=system_file) for a in argv])
    assert e.value.code == 0
    captured = capsys.readouterr()
    assert "Error" not in captured.err
    if argv[0] != "build-kernels":
        assert captured.out.strip()


def test_build_kernels_rejects_missing_ccache(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["build-kernels", "-c", str(tmp_path / "no-ccache")])
    assert e.value.code == 1
    assert "ccache not found at" in capsys.readouterr().err


def test_build_kernels_accepts_executable_ccache(tmp_path):
    exe = tmp_path / "ccache"
    exe.write_text("#!/bin/sh\n")
    exe.chmod(0o755)
    args = build_parser().parse_args(["build-kernels", "-c", str(exe)])
    assert config_from_args(args).build.ccache == str(exe)
    plain = tmp_path / "plain"
    plain.write_text("")
    with pytest.raises(ValueError):
        config_from_args(build_parser().parse_args(["build-kernels", "-c", str(plain)]))
