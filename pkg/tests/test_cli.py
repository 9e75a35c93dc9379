import json

import pytest

from ergolab import cellsys
from ergolab.cli import main
from ergolab.runner import ConfigError, default_threads, load_config, run_config, validate
from ergolab.spectral import CorrelationSequence


def golden_mixing_csv(stop):
    # coordinate events {w_0 = s}, {w_1 = s} on L = 10: T^j moves coordinate c to
    # c - j mod 10, so the deviation is 1/2 - 1/4 when j = 0, 1, 9 mod 10 and 0 otherwise
    lines = ["j,value,exact,witness"]
    for j in range(stop + 1):
        if j % 10 in (0, 1, 9):
            lines.append(f"{j},0.25,1/4,0")
        else:
            lines.append(f"{j},0.0,0,1")
    return "\n".join(lines) + "\n"


MIXING = {
    "schema_version": 1,
    "task": "scan",
    "system": "bernoulli_cyclic(k=2, L=10)",
    "family": {"kind": "coordinate", "coords": [0, 1]},
    "functional": "phi",
    "N": 4,
    "j_range": {"start": 0, "stop": 20},
    "output": {"dir": "out", "name": "mixing"},
}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return p


def test_run_golden_mixing(tmp_path, capsys):
    cfg = write(tmp_path, MIXING)
    assert main(["run", str(cfg)]) == 0
    out = tmp_path / "out"
    assert (out / "mixing.csv").read_text() == golden_mixing_csv(20)
    summary = json.loads((out / "mixing.summary.json").read_text())
    assert summary["system"] == "bernoulli_cyclic(k=2, L=10)"
    dat = (out / "mixing.dat").read_text().splitlines()
    assert dat[0] == "# j phi" and dat[1] == "0 0.25"
    meta = json.loads((out / "mixing.meta.json").read_text())
    assert meta["threads"] == 1 and "created" in meta
    assert str(out / "mixing.csv") in capsys.readouterr().out


def test_run_threads_identical(tmp_path):
    a = run_config(write(tmp_path, dict(MIXING, output={"dir": "a", "name": "m"})), 1)
    b = run_config(write(tmp_path, dict(MIXING, output={"dir": "b", "name": "m"})), 4)
    for ext in (".csv", ".summary.json", ".dat"):
        assert a[ext].read_bytes() == b[ext].read_bytes()


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ERGOLAB_THREADS", "3")
    assert default_threads() == 3
    paths = run_config(write(tmp_path, MIXING))
    assert json.loads(paths[".meta.json"].read_text())["threads"] == 3
    monkeypatch.setenv("ERGOLAB_THREADS", "x")
    with pytest.raises(ConfigError):
        default_threads()


def test_cap_exceeded_writes_nothing(tmp_path, capsys):
    doc = dict(MIXING, system="bernoulli_cyclic(k=2, L=25)")
    cfg = write(tmp_path, doc)
    assert main(["run", str(cfg)]) == 3
    assert not (tmp_path / "out").exists()
    assert "cap" in capsys.readouterr().err
    cfg = write(tmp_path, dict(MIXING, cell_cap=512))
    assert main(["run", str(cfg)]) == 3
    assert not (tmp_path / "out").exists()
    assert cellsys.get_cell_cap() == 1 << 24
    assert main(["--cell-cap", "100", "run", str(write(tmp_path, MIXING))]) == 3
    assert cellsys.get_cell_cap() == 1 << 24


def test_cap_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ERGOLAB_CELL_CAP", "1000")
    assert main(["run", str(write(tmp_path, MIXING))]) == 3
    assert not (tmp_path / "out").exists()


def test_malformed_json_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "schema_version": 1,\n  "task": "scan"\n  "N": 4\n}\n')
    assert main(["run", str(p)]) == 2
    err = capsys.readouterr().err
    assert f"{p}:4:" in err


def test_unknown_field_named(tmp_path, capsys):
    assert main(["run", str(write(tmp_path, dict(MIXING, colour="red")))]) == 2
    assert "colour" in capsys.readouterr().err
    doc = dict(MIXING, output={"name": "x"})
    del doc["N"]
    assert main(["run", str(write(tmp_path, doc))]) == 2
    assert "N: missing required field" in capsys.readouterr().err


@pytest.mark.parametrize(
    "patch,field",
    [
        ({"schema_version": 2}, "schema_version"),
        ({"task": "dance"}, "task"),
        ({"functional": "chi"}, "functional"),
        ({"N": 99}, "N"),
        ({"j_range": []}, "j_range"),
        ({"system": "torus(n=3)"}, "system"),
        ({"output": {"name": "a/b"}}, "output.name"),
        ({"threads": 0}, "threads"),
    ],
)
def test_validation_errors_name_field(tmp_path, patch, field):
    doc, base = load_config(write(tmp_path, dict(MIXING, **patch)))
    with pytest.raises(ConfigError) as exc:
        validate(doc, base)
    assert exc.value.where == field


def test_entropy_and_triple_tasks(tmp_path):
    ent = {
        "schema_version": 1,
        "task": "entropy",
        "system": "bernoulli_cyclic(k=2, L=16)",
        "partition": {"kind": "coordinate", "coord": 0},
        "sequence": {"kind": "progression", "L": 5},
        "j_range": [1, 2],
        "output": {"name": "ent"},
    }
    paths = run_config(write(tmp_path, ent))
    rows = paths[".csv"].read_text().splitlines()
    assert rows[0] == "j,size,H,h_j" and rows[1].startswith("1,5,")
    assert abs(json.loads(paths[".summary.json"].read_text())["hp_estimate"] - 0.6931471805599453) < 1e-12
    tri = {
        "schema_version": 1,
        "task": "triple",
        "system": "cyclic_rotation(n=8)",
        "set": [0, 1],
        "m_range": [1, 2],
        "output": {"name": "tri"},
    }
    paths = run_config(write(tmp_path, tri))
    assert paths[".csv"].read_text().splitlines()[0] == "m,forward,backward,gap"


def test_ensemble_task_csv(tmp_path):
    doc = {
        "schema_version": 1,
        "task": "ensemble",
        "ensemble": {"base": "cyclic_rotation(n=4)", "fiber_size": 8, "sampler": "near_identity", "trials": 3, "master_seed": 0},
        "selector": "a_rigidity",
        "params": {"a": 1, "N": 4, "lags": [4]},
        "output": {"name": "ens"},
    }
    paths = run_config(write(tmp_path, doc))
    assert paths[".csv"].read_text() == "trial,value,witness\n0,0.0,1\n1,0.0,1\n2,0.0,1\n"
    doc["ensemble"]["extra"] = 1
    with pytest.raises(ConfigError) as exc:
        run_config(write(tmp_path, doc))
    assert exc.value.where == "ensemble.extra"


def test_list_systems(capsys):
    assert main(["list-systems"]) == 0
    out = capsys.readouterr().out
    assert "odometer(b, l)" in out and "grammar:" in out
    assert main(["list-systems", "--format", "structured"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert {s["kind"] for s in doc["systems"]} >= {"identity", "cyclic_rotation", "odometer", "bernoulli_cyclic"}


def test_verify_list_and_unknown(capsys):
    assert main(["verify", "--list"]) == 0
    out = capsys.readouterr().out
    for name in ("mixing", "spectral", "defect", "determinism"):
        assert name in out
    assert main(["verify", "nosuch"]) == 2


def test_verify_fast_suite(capsys):
    assert main(["verify", "triple"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] triple:" in out and "checks passed" in out


def test_diag(capsys):
    assert main(["diag", "--system", "bernoulli_cyclic(k=2, L=8)", "--functional", "h_j", "--partition", "coordinate:0", "--j", "1,2,3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert abs(doc["value"] - 0.6931471805599453) < 1e-12 and doc["lags"] == [1, 2, 3]
    assert main(["diag", "--system", "cyclic_rotation(n=8)", "--functional", "psi", "--j", "8", "--N", "4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["values"][0]["exact"] == "0"
    assert main(["diag", "--system", "cyclic_rotation(n=4)", "--functional", "triple_forward", "--set", "0", "--j", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["values"][0]["exact"] == "1/4"
    assert main(["diag", "--system", "bogus(", "--functional", "phi"]) == 2


def test_spectral_classify_csv(tmp_path, capsys):
    p = tmp_path / "leb.csv"
    p.write_text(CorrelationSequence.lebesgue().to_csv())
    assert main(["spectral-classify", "--csv", str(p), "--band-limited", "--N", "2", "--P", "3,10,100"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "not_singular_at_horizon"
    p = tmp_path / "dirac.csv"
    p.write_text(CorrelationSequence.dirac(0, 2048).to_csv())
    assert main(["spectral-classify", "--csv", str(p), "--N", "2", "--P", "16"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "singular_witnessed"
    assert main(["spectral-classify", "--system", "cyclic_rotation(n=4)", "--s-max", "4096", "--P", "2"]) == 2
