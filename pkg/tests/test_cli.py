import json
import subprocess
import sys

import numpy as np
import pytest

from strohsign.cli import main, parse_grid, parse_number
from strohsign.config import load_material
from strohsign.table import CSV_HEADER, DispersionTable

from conftest import rayleigh_cubic_speed


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def no_wave_file(tmp_path):
    V = np.diag([200.0, 200.0, 200.0, 100.0, 5.0, 100.0])
    V[0, 1] = V[1, 0] = V[0, 2] = V[2, 0] = V[1, 2] = V[2, 1] = 50.0
    p = tmp_path / "sh.json"
    p.write_text(json.dumps({"name": "sh", "c_voigt_gpa": V[np.triu_indices(6)].tolist(), "rho": 5000.0}))
    return p


@pytest.mark.parametrize("text, val", [("pi", np.pi), ("pi/12", np.pi / 12), ("2pi", 2 * np.pi), ("0.5*pi", np.pi / 2), ("1e3", 1000.0)])
def test_parse_number(text, val):
    assert parse_number(text) == pytest.approx(val, rel=1e-15)


def test_parse_grid():
    g = parse_grid("pi/12:pi:12")
    assert len(g) == 12 and g[0] == pytest.approx(np.pi / 12) and g[-1] == pytest.approx(np.pi)


def test_rayleigh_copper(capsys):
    code, out, _ = run(capsys, "rayleigh", "--material", "copper")
    rec = json.loads(out)
    assert code == 0 and rec["status"] == "ok"
    assert rec["v_s"] == pytest.approx(rayleigh_cubic_speed(load_material("copper")), rel=1e-8)


def test_rayleigh_rotated_isotropic(capsys):
    ref = rayleigh_cubic_speed(load_material("steel"))
    for psi in ("0", "37", "90"):
        code, out, _ = run(capsys, "rayleigh", "--material", "steel", "--psi-deg", psi)
        assert code == 0
        assert json.loads(out)["v_s"] == pytest.approx(ref, rel=1e-8)


def test_rayleigh_no_root_exit(capsys, no_wave_file):
    code, out, _ = run(capsys, "rayleigh", "--material", str(no_wave_file))
    assert code == 2 and json.loads(out)["status"] == "no_root"


def test_malformed_config_exit(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n "name": "x",\n "E_gpa": 100,\n "nu": 0.3,\n "rh": 1\n}')
    code, _, err = run(capsys, "rayleigh", "--material", str(p))
    assert code == 1
    assert f"{p}:5: unknown key 'rh'" in err


def test_usage_error_exit(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["rayleigh"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["periodic-sweep", "--material", "copper", "--material2", "steel", "--k-grid", "1:2:0"])
    assert exc.value.code == 1


def test_impedance_positive(capsys):
    code, out, _ = run(capsys, "impedance", "--material", "aluminum", "--v-grid", "0:4000:9")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0].startswith("v,status,eig_Z_1")
    vs = json.loads(run(capsys, "rayleigh", "--material", "aluminum")[1])["v_s"]
    for line in lines[1:]:
        f = line.split(",")
        if f[1] == "ok" and float(f[0]) < vs:
            assert all(float(x) > 0 for x in f[2:5])
        elif f[1] == "ok":
            assert float(f[2]) < 0
    statuses = [line.split(",")[1] for line in lines[1:]]
    assert "not_subsonic" in statuses and statuses[0] == "ok"


def test_impedance_single_static_row(capsys):
    code, out, _ = run(capsys, "impedance", "--material", "copper", "--v-grid", "0:0:1", "--format", "json")
    rows = json.loads(out)["rows"]
    assert code == 0 and len(rows) == 1 and rows[0]["v"] == 0.0 and rows[0]["status"] == "ok"


def test_impedance_default_grid(capsys):
    code, out, _ = run(capsys, "impedance", "--material", "copper")
    assert code == 0 and len(out.strip().split("\n")) == 51


def test_sweep_identical_materials(capsys):
    ref = json.loads(run(capsys, "rayleigh", "--material", "copper")[1])["v_s"]
    code, out, _ = run(capsys, "periodic-sweep", "--material", "copper", "--material2", "copper", "--k-grid", "0.5:3:2",
                       "--psi-deg", "0,45", "--nh", "2")
    assert code == 0
    tab = DispersionTable.from_csv(out)
    assert len(tab) == 4
    for r in tab.rows:
        assert r.status == "ok" and r.v_s == pytest.approx(ref, rel=1e-6)


def test_sweep_missing_material(capsys):
    code, _, err = run(capsys, "periodic-sweep", "--material", "copper")
    assert code == 1 and "material2" in err


def test_sweep_deterministic(capsys, tmp_path):
    args = ["periodic-sweep", "--material", "copper", "--material2", "aluminum", "--k-grid", "1:2:2", "--psi-deg", "0,90",
            "--nh", "2", "--format", "json"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    meta = json.loads(a.read_text())["metadata"]
    assert meta["N_h"] == 2 and len(meta["config_hash"]) == 16


def test_fig1_preset_files(capsys, tmp_path):
    code, out, _ = run(capsys, "periodic-sweep", "--preset", "fig1", "--k-grid", "pi/2:pi:2", "--psi-deg", "0,90", "--nh", "2",
                       "--out", str(tmp_path))
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["fig1_Cu-Al.csv", "fig1_Cu-St.csv", "fig1_St-Al.csv"]
    text = (tmp_path / "fig1_Cu-Al.csv").read_text()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert len(text.splitlines()) == 5


def test_verify_subset(capsys):
    code, out, _ = run(capsys, "verify", "--subset", "kernel", "--format", "json")
    rec = json.loads(out)
    assert code == 0 and rec["passed"]
    assert {c["family"] for c in rec["checks"]} == {"kernel"}


def test_verify_inject_fails(capsys):
    code, out, _ = run(capsys, "verify", "--subset", "kernel", "--inject", "involution")
    assert code == 1
    assert "FAIL kernel      involution" in out


def test_entry_point_module():
    res = subprocess.run([sys.executable, "-m", "strohsign.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("strohsign ")
