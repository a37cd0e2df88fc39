import json
import subprocess
import sys

import numpy as np
import pytest

from heatframe.cli import main
from heatframe.grid import GridDomain, read_grid_function, write_grid_function
from heatframe.testfuncs import band_limited_family

CONFIG = """\
domain.n = 64
operator.kind = laplacian
symbol.name = zeta_exp
frame.delta = 1.2
frame.M = 4
input.path = f.hfgf
output.dir = out
cache.dir = cache
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("HEATFRAME_CACHE", raising=False)
    f = band_limited_family(GridDomain(1, 64), 1, seed=1)[0]
    write_grid_function(tmp_path / "f.hfgf", f)
    (tmp_path / "run.cfg").write_text(CONFIG)
    return tmp_path, f


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_build(workdir, capsys):
    tmp, _ = workdir
    assert main(["build", "--config", "run.cfg"]) == 0
    out = _json(capsys)
    assert out["delta"] == 1.2 and out["M"] == 4 and out["R_norm"] < 1
    assert (tmp / "out" / "frame.json").exists()
    assert list((tmp / "cache").glob("*.hfrm"))


def test_cache_env_override(workdir, monkeypatch, capsys):
    tmp, _ = workdir
    monkeypatch.setenv("HEATFRAME_CACHE", str(tmp / "elsewhere"))
    assert main(["build", "--config", "run.cfg"]) == 0
    assert list((tmp / "elsewhere").glob("*.hfrm"))
    assert not (tmp / "cache").exists()


def test_analyze_then_synthesize(workdir, capsys):
    tmp, f = workdir
    assert main(["analyze", "--config", "run.cfg"]) == 0
    info = _json(capsys)
    assert info["residual"] <= 1e-10
    assert main(["synthesize", "--config", "run.cfg", "--coeffs", info["coefficients"],
                 "--output", "back.hfgf"]) == 0
    back = read_grid_function(tmp / "back.hfgf")
    assert np.linalg.norm(back.values - f.values) <= 1e-6 * np.linalg.norm(f.values)


def test_search(workdir, capsys):
    assert main(["search", "--config", "run.cfg"]) == 0
    out = _json(capsys)
    assert out["achieved"] and out["achieved_norm"] <= 0.5


@pytest.mark.parametrize("which", ["sl", "g1", "g2", "g3", "g4", "radial", "nt", "gradnt", "hl"])
def test_norms(workdir, capsys, which):
    assert main(["norms", "--config", "run.cfg", "--which", which]) == 0
    out = _json(capsys)
    assert set(out["norms"]) == {"1", "2"} and len(out["values"]) == 64
    assert out["norms"]["1"] <= out["norms"]["2"] + 1e-12


def test_hardy_report(workdir, capsys):
    tmp, _ = workdir
    assert main(["hardy", "--config", "run.cfg", "--suite", "standard", "--report", "hardy.json"]) == 0
    data = json.loads((tmp / "hardy.json").read_text())
    assert len(data["records"]) == 10 and data["summary"]["good_lambda_holds"]


def test_verify_and_report(workdir, capsys):
    tmp, _ = workdir
    assert main(["verify", "frame", "--config", "run.cfg"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split()[0] for ln in lines[:4]] == ["PASS"] * 4
    assert main(["report", "--from", str(tmp / "out" / "report.json")]) == 0
    assert "PASS  search" in capsys.readouterr().out


def test_verify_exit_code_reflects_failures(workdir, capsys):
    (workdir[0] / "bad.cfg").write_text(CONFIG + "frame.j_min = 0\nframe.j_max = 0\n")
    assert main(["verify", "frame", "--config", "bad.cfg"]) == 1
    assert "FAIL  search" in capsys.readouterr().out


def test_config_error_exit_code(workdir, capsys):
    (workdir[0] / "bad.cfg").write_text(CONFIG.replace("1.2", "2.5"))
    assert main(["build", "--config", "bad.cfg"]) == 2
    assert "(1, 2]" in capsys.readouterr().err


def test_missing_input_grid_mismatch(workdir, capsys):
    tmp, _ = workdir
    write_grid_function(tmp / "g.hfgf", band_limited_family(GridDomain(1, 32), 1)[0])
    assert main(["analyze", "--config", "run.cfg", "--input", "g.hfgf"]) == 1
    assert "does not match" in capsys.readouterr().err


def test_console_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "heatframe.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for verb in ("build", "analyze", "synthesize", "search", "norms", "hardy", "verify", "report"):
        assert verb in proc.stdout
