import json
import os

import numpy as np
import pytest

from scottlab.cli import ConfigError, main, parse_real, resolve
from scottlab.manifest import RunManifest


def run(tmp_path, *argv, out="out"):
    d = tmp_path / out
    return main([*argv, "--out", str(d)]), d


def load(d, name):
    with open(d / name) as fh:
        return json.load(fh)


# parsing ----------------------------------------------------------------

def test_parse_real_expressions():
    assert parse_real("2/pi") == pytest.approx(2 / np.pi)
    assert parse_real("-1e-3") == -1e-3
    assert parse_real("1/128") == 1 / 128
    for bad in ("__import__('os')", "pi**2", "x", ""):
        with pytest.raises(ConfigError):
            parse_real(bad)


def test_resolve_layers_defaults_file_and_flags(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[scott]\nalphas = 0, 0.2\nR = 8,16\n")
    cfg = resolve("scott", str(ini), {"R": "8,32"})
    assert cfg["alphas"] == [0.0, 0.2]
    assert cfg["R"] == [8.0, 32.0]
    assert cfg["margin"] == 8.0


@pytest.mark.parametrize("text", ["[scott]\nbogus = 1\n", "[tf]\nZ = 1\n",
                                  "[scott]\nalphas = 0, zero\n", "no section\n"])
def test_resolve_rejects_malformed_config(tmp_path, text):
    ini = tmp_path / "c.ini"
    ini.write_text(text)
    with pytest.raises(ConfigError):
        resolve("scott", str(ini))


# exit codes -------------------------------------------------------------

def test_malformed_config_exits_2_without_files(tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[tf]\nZ = 1, ten\n")
    code, d = run(tmp_path, "tf", "--config", str(ini))
    assert code == 2
    assert not d.exists()


@pytest.mark.parametrize("argv", [
    ["scott", "--alphas", ""],
    ["scott", "--alphas", "0.7"],
    ["scott", "--alphas", "0.2", "--spacing", "0.05"],
    ["scott", "--R", "2"],
    ["verify", "--families", "nonsense"],
    ["pauli", "--flux", "1.5"],
    ["pauli", "--N", "7"],
    ["tf", "--Z", "-1"],
])
def test_usage_errors_exit_2_without_files(tmp_path, argv):
    code, d = run(tmp_path, *argv)
    assert code == 2
    assert not d.exists()


def test_unknown_subcommand_and_flag_exit_2(tmp_path):
    assert main(["nonsense"]) == 2
    assert main(["tf", "--no-such-flag", "1"]) == 2


def test_residual_failure_exits_1(tmp_path):
    code, d = run(tmp_path, "tf", "--Z", "1", "--points-per-b", "10")
    assert code == 1
    assert not d.exists()


# subcommands ------------------------------------------------------------

def test_tf_outputs_and_scaling(tmp_path):
    code, d = run(tmp_path, "tf", "--Z", "1,10")
    assert code == 0
    s = load(d, "tf_summary.json")
    assert s["slope"] == pytest.approx(-1.588071, abs=1e-6)
    assert s["scaling"][0]["relative_error"] < 1e-3
    assert (d / "tf_Z1.csv").exists() and (d / "tf_Z10.csv").exists()
    header = (d / "tf_Z10.csv").read_text().splitlines()[0]
    assert header == "r,rho_tf,v_tf"


def test_semiclassics_identity(tmp_path):
    code, d = run(tmp_path, "semiclassics", "--Z", "1", "--z", "0.5,0.5", "--alpha", "0.01")
    assert code == 0
    s = load(d, "semiclassics.json")
    assert s["identity"][0]["relative_difference"] < 1e-3
    assert s["parameters"]["subcritical"]


def test_scott_alpha_zero(tmp_path):
    code, d = run(tmp_path, "scott", "--alphas", "0", "--channels", "true")
    assert code == 0
    s = load(d, "scott_summary.json")
    assert s["entries"][0]["extrapolated"] == pytest.approx(0.25, abs=0.025)
    assert "A = 0" in s["magnetic_field"]
    rows = (d / "scott_channels.csv").read_text().splitlines()
    assert rows[0] == "alpha,R,ell,contribution,negative_eigenvalues"


def test_scott_table_is_non_increasing(tmp_path):
    code, d = run(tmp_path, "scott", "--alphas", "0,2/pi", "--R", "8,16",
                  "--spacing-check", "true")
    assert code == 0
    s = load(d, "scott_summary.json")
    v = [e["s2_estimate"] for e in s["entries"]]
    assert v[1] < v[0]
    assert s["monotone"]
    # halving the spacing lowers the critical estimate
    assert s["spacing_check"]["shift"] < 0


def test_verify_hard_families(tmp_path):
    code, d = run(tmp_path, "verify", "--families", "pullout,ims,monotone,hardy",
                  "--dump-cases", "true")
    assert code == 0
    for fam in ("pullout", "ims", "monotone", "hardy"):
        assert load(d, f"verify_{fam}.json")["passed"]
    assert (d / "verify_pullout_cases.csv").exists()
    lines = (d / "verify_summary.csv").read_text().splitlines()
    assert lines[0] == "family,kind,passed,cases,worst_margin,empirical_constant"
    assert len(lines) == 5


def test_verify_soft_family_reports(tmp_path):
    code, d = run(tmp_path, "verify", "--families", "daubechies",
                  "--daubechies-spacings", "0.05,0.025")
    assert code == 0
    r = load(d, "verify_daubechies.json")
    assert not r["hard"]
    assert np.isfinite(r["empirical_constant"])


def test_pauli_constant_field(tmp_path):
    code, d = run(tmp_path, "pauli", "--N", "8,16")
    assert code == 0
    s = load(d, "pauli.json")
    assert s["min_eig_decreasing"] and s["zeeman_lowers_bottom"]
    assert s["topology"] == "periodic torus"


# manifest and rerun -----------------------------------------------------

def test_manifest_digests_and_rerun(tmp_path, capsys):
    code, d = run(tmp_path, "tf", "--Z", "1,4")
    assert code == 0
    m = RunManifest.load(d / "manifest.json")
    assert m.command == "tf" and m.config["Z"] == [1.0, 4.0]
    assert all(m.verify(d).values())
    assert set(m.outputs) == {"tf_Z1.csv", "tf_Z4.csv", "tf_summary.json"}
    assert "universal" in m.stages and m.versions["numpy"] == np.__version__
    capsys.readouterr()
    assert main(["rerun", str(d / "manifest.json"), "--out", str(tmp_path / "again")]) == 0
    assert "DIFFERS" not in capsys.readouterr().out
    for name in m.outputs:
        assert (d / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_rerun_detects_tampering(tmp_path):
    code, d = run(tmp_path, "tf", "--Z", "1")
    m = load(d, "manifest.json")
    m["outputs"]["tf_Z1.csv"] = "0" * 64
    (d / "manifest.json").write_text(json.dumps(m))
    assert main(["rerun", str(d / "manifest.json"), "--out", str(tmp_path / "b")]) == 1


def test_rerun_rejects_same_directory_and_missing_manifest(tmp_path):
    code, d = run(tmp_path, "tf", "--Z", "1")
    assert main(["rerun", str(d / "manifest.json"), "--out", str(d)]) == 2
    assert main(["rerun", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")]) == 2


def test_failed_check_still_writes_outputs_and_status(tmp_path):
    code, d = run(tmp_path, "tf", "--Z", "1,10", "--scaling-tol", "1e-12")
    assert code == 1
    m = load(d, "manifest.json")
    assert m["status"].startswith("failed")
    assert os.path.exists(d / "tf_summary.json")
