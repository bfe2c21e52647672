import hashlib
import json
import math

import pytest

from polymoments import cli
from polymoments.generator import jacobi_spec
from polymoments.mcsim import CovarianceError

JACOBI = {
    "command": "moments",
    "seed": 1,
    "model": jacobi_spec().to_json(),
    "k": 2,
    "y0": [0.5],
    "T": 1.0,
    "mc": {"n_paths": 20000, "dt": 0.01, "clamp": [0.0, 1.0]},
}
SIGNATURE = {"command": "signature", "seed": 3, "d": 2, "N": 4, "t": 1.0, "mc": {"n_paths": 3000, "n_steps": 50}}
VOLTERRA = {
    "command": "vix-volterra",
    "seed": 5,
    "kernel": {"form": "exponential", "omega": 0.5, "gamma": 2.0},
    "curve": {"form": "exponential", "b": 0.04, "gamma": 2.0},
    "t": 0.25,
    "k": [1, 2],
    "mc": {"n_paths": 20000, "exact": True},
}
BERGOMI = {
    "command": "vix-bergomi",
    "seed": 7,
    "kernels": [{"form": "rough", "H": 0.1, "c": 0.2}],
    "curve": {"form": "flat", "c": 0.04},
    "t": 0.5,
    "k": [1, 2, 3],
    "n_nodes": 24,
    "mc": {"n_paths": 20000, "n_x": 16},
}
SIMULATE = {
    "command": "simulate",
    "seed": 2,
    "model": jacobi_spec().to_json(),
    "y0": [0.5],
    "T": 1.0,
    "polynomial": [{"alpha": [2], "c": 1.0}],
    "mc": {"n_paths": 5000, "dt": 0.05, "clamp": [0.0, 1.0]},
}


def _invoke(tmp_path, cfg, *args, text=None):
    path = tmp_path / "cfg.json"
    path.write_text(text if text is not None else json.dumps(cfg))
    out = tmp_path / "out.txt"
    code = cli.main([args[0], "--config", str(path), "--out", str(out), *args[1:]])
    return code, (out.read_text() if out.exists() else None)


def test_moments_run(tmp_path):
    code, out = _invoke(tmp_path, JACOBI, "run")
    assert code == 0
    doc = json.loads(out)
    assert doc["result"]["moments"] == pytest.approx([1.0, 0.5, 0.5 - 0.25 * math.exp(-2)], abs=1e-12)
    assert doc["command"] == "moments" and doc["seed"] == 1
    assert "Philox" in doc["rng"] and doc["version"]


def test_signature_run(tmp_path):
    code, out = _invoke(tmp_path, SIGNATURE, "run")
    sig = json.loads(out)["result"]["signature"]
    assert sig["11"] == 0.5 and sig["1122"] == 0.125
    assert json.loads(out)["result"]["dual_route_max_abs_diff"] <= 1e-14


def test_malformed_json_writes_nothing(tmp_path, capsys):
    code, out = _invoke(tmp_path, None, "run", text="{not json")
    assert code == 2 and out is None
    assert "malformed JSON" in capsys.readouterr().err


@pytest.mark.parametrize(
    "patch,path",
    [
        ({"seed": None}, "config.seed"),
        ({"command": "price"}, "config.command"),
        ({"k": -1}, "config.k"),
        ({"y0": [0.5, 0.5]}, "config.y0"),
        ({"mc": {"n_paths": 0}}, "config.mc.n_paths"),
        ({"T": "soon"}, "config.T"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, patch, path):
    cfg = dict(JACOBI)
    for key, val in patch.items():
        if val is None:
            cfg.pop(key)
        else:
            cfg[key] = val
    code, out = _invoke(tmp_path, cfg, "compare")
    assert code == 2 and out is None
    assert path in capsys.readouterr().err


def test_asymmetric_diffusion_is_config_error(tmp_path, capsys):
    model = {
        "dim": 2,
        "drift": [[], []],
        "diffusion": [[[], [{"alpha": [0, 0], "c": 1.0}]], [[], []]],
    }
    code, _ = _invoke(tmp_path, dict(JACOBI, model=model, y0=[0.0, 0.0]), "run")
    assert code == 2
    assert "config.model.diffusion[0][1]" in capsys.readouterr().err


def test_degree_increase_is_numerical_error(tmp_path, capsys):
    model = {"dim": 1, "drift": [[{"alpha": [2], "c": 1.0}]], "diffusion": [[[]]]}
    code, out = _invoke(tmp_path, dict(JACOBI, model=model), "run")
    assert code == 3 and out is None
    assert "raises degree" in capsys.readouterr().err


def test_covariance_failure_is_numerical_error(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise CovarianceError(-0.5)

    monkeypatch.setattr(cli, "simulate_bergomi_vix", broken)
    code, _ = _invoke(tmp_path, BERGOMI, "compare")
    assert code == 3


def test_volterra_closed_form_needs_matching_curve(tmp_path, capsys):
    cfg = dict(VOLTERRA, curve={"form": "flat", "c": 0.04})
    code, _ = _invoke(tmp_path, cfg, "run")
    assert code == 2
    assert "config.curve" in capsys.readouterr().err


def test_config_hash_roundtrip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(JACOBI, indent=4))
    out = tmp_path / "out.json"
    assert cli.main(["run", "--config", str(path), "--out", str(out)]) == 0
    doc = json.loads(path.read_text())
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    assert json.loads(out.read_text())["config_hash"] == hashlib.sha256(canonical.encode()).hexdigest()


@pytest.mark.parametrize("cfg", [JACOBI, SIGNATURE, VOLTERRA, BERGOMI, SIMULATE], ids=lambda c: c["command"])
def test_compare_is_reproducible_across_threads(tmp_path, cfg):
    _, one = _invoke(tmp_path, cfg, "compare", "--threads", "1")
    _, again = _invoke(tmp_path, cfg, "compare", "--threads", "1")
    _, eight = _invoke(tmp_path, cfg, "compare", "--threads", "8")
    assert one == again == eight


def test_jacobi_compare_within_three_se(tmp_path):
    _, out = _invoke(tmp_path, JACOBI, "compare")
    rows = json.loads(out)["result"]["comparison"]
    assert [r["quantity"] for r in rows] == ["y0", "y0^2"]
    assert not any(r["flag"] for r in rows)


def test_volterra_exact_first_moment(tmp_path):
    _, out = _invoke(tmp_path, VOLTERRA, "compare")
    rows = json.loads(out)["result"]["comparison"]
    assert rows[0]["z"] == 0.0 and rows[0]["mc_se"] == 0.0
    assert abs(rows[1]["z"]) <= 3


def test_bergomi_compare_reports_bounds(tmp_path):
    _, out = _invoke(tmp_path, BERGOMI, "compare")
    result = json.loads(out)["result"]
    for row, bound in zip(result["moments"], result["lognormal_bounds"]):
        assert bound["lower"] * (1 - 1e-12) <= row["value"] <= bound["upper"] * (1 + 1e-12)
    assert not any(r["flag"] for r in result["comparison"])


def test_csv_output(tmp_path):
    code, out = _invoke(tmp_path, JACOBI, "compare", "--format", "csv")
    lines = out.splitlines()
    assert code == 0
    assert any(line.startswith("# config_hash=") for line in lines)
    header = [line for line in lines if not line.startswith("#")][0]
    assert header.split(",")[:4] == ["quantity", "analytic", "mc_mean", "mc_se"]


def test_csv_cells_are_plain_numbers(tmp_path):
    _, out = _invoke(tmp_path, BERGOMI, "run", "--format", "csv")
    assert "np." not in out
    rows = [line for line in out.splitlines() if not line.startswith("#")][1:]
    assert [float(r.split(",")[1]) for r in rows][0] == pytest.approx(0.04)


def test_dump_samples(tmp_path):
    dump = tmp_path / "samples.csv"
    code, out = _invoke(tmp_path, SIMULATE, "run", "--dump", str(dump))
    lines = dump.read_text().splitlines()
    assert code == 0
    assert lines[0] == "path_index,value" and len(lines) == 5001
    est = json.loads(out)["result"]["estimate"]
    assert set(est) == {"mean", "std_error", "n_paths", "seed"}
    values = [float(line.split(",")[1]) for line in lines[1:]]
    assert sum(values) / len(values) == pytest.approx(est["mean"], rel=1e-12)


def test_dump_unavailable_is_config_error(tmp_path):
    code, _ = _invoke(tmp_path, SIGNATURE, "run", "--dump", str(tmp_path / "d.csv"))
    assert code == 2


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SIGNATURE))
    proc = subprocess.run([sys.executable, "-m", "polymoments", "run", "--config", str(path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["signature"]["1122"] == 0.125
