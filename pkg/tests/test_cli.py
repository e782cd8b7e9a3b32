import csv
import io
import json
import subprocess
import sys

import pytest

from stablelike import cli

BASE_MODEL = {"d": 1, "index": {"kind": "constant", "alpha": 1.5}, "kernel": {"kind": "bass"},
              "phi": {"name": "logpower", "beta": 1.0}}
QUICK = {
    "verify-assumptions": {"samples": 8, "probes": 100, "h4_samples": 2,
                           "inequality_samples": 20000, "lemma_grid": 6},
    "verify-drift": {"r_min": 1e-2, "r_max": 1e-1, "points": 5, "probes": 100},
    "simulate": {"x0": [[0.0], [0.5]], "t": 0.5, "xi": [1.0], "event_log": True},
    "couple": {"eps": 0.2, "t_grid": [0.25, 0.5], "C0": 0.4, "event_log": True},
    "holder-fit": {"t": 0.5, "t_grid": [0.5, 1.0], "x": [0.3]},
    "modulus-fit": {"t": 0.5, "x": [0.3], "eps0": 0.1},
}


def config(tmp_path, command, **over):
    cfg = {"seed": 5, "model": BASE_MODEL, "quadrature": {"tol_abs": 1e-7, "tol_rel": 1e-6},
           "simulation": {"t_max": 0.5, "paths": 300, "delta_cut": 1e-2},
           "experiment": dict(QUICK[command]), "output": {"directory": str(tmp_path / "out")}}
    for k, v in over.items():
        cfg[k] = v
    path = tmp_path / f"{command}.json"
    path.write_text(json.dumps(cfg))
    return path


def run(path, command, out, *extra):
    return cli.main([command, "--config", str(path), "--out", str(out), *extra])


def test_schema_rejects_index_above_two(tmp_path, capsys):
    model = dict(BASE_MODEL, index={"kind": "constant", "alpha": 2.1})
    path = config(tmp_path, "verify-assumptions", model=model)
    assert run(path, "verify-assumptions", tmp_path / "o") == cli.EXIT_CONFIG
    assert "config" in capsys.readouterr().err


def test_schema_rejects_unknown_keys(tmp_path):
    path = config(tmp_path, "simulate", bogus=1)
    assert run(path, "simulate", tmp_path / "o") == cli.EXIT_CONFIG
    path = config(tmp_path, "simulate", simulation={"paths": 10, "delta_cap": 1e-2})
    assert run(path, "simulate", tmp_path / "o") == cli.EXIT_CONFIG


def test_beta_outside_range_rejected(tmp_path):
    ex = dict(QUICK["verify-drift"], beta=1.0)
    path = config(tmp_path, "verify-drift", experiment=ex)
    assert run(path, "verify-drift", tmp_path / "o") == cli.EXIT_CONFIG
    model = dict(BASE_MODEL, index={"kind": "constant", "alpha": 0.6})
    ex = dict(QUICK["verify-drift"], beta=0.7)
    path = config(tmp_path, "verify-drift", model=model, experiment=ex)
    assert run(path, "verify-drift", tmp_path / "o") == cli.EXIT_CONFIG


def test_vector_length_checked(tmp_path):
    path = config(tmp_path, "holder-fit", experiment={"x": [0.0, 1.0]})
    assert run(path, "holder-fit", tmp_path / "o") == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert run(tmp_path / "nope.json", "simulate", tmp_path / "o") == cli.EXIT_CONFIG


def test_constant_coefficients_assumptions(tmp_path):
    model = {"d": 2, "index": {"kind": "constant", "alpha": 1.2},
             "kernel": {"kind": "constant", "c": 0.8}}
    path = config(tmp_path, "verify-assumptions", model=model)
    out = tmp_path / "o"
    assert run(path, "verify-assumptions", out) == cli.EXIT_OK
    doc = json.loads((out / "assumptions.json").read_text())
    for name, curve in doc["report"]["curves"].items():
        assert all(v == 0.0 for v in curve), name
    assert doc["verdict"] == "pass"


def _read_csv(path):
    raw = path.read_bytes()
    assert raw.endswith(b"\r\n")
    assert b"\n" not in raw.replace(b"\r\n", b"")
    return list(csv.reader(io.StringIO(raw.decode(), newline="")))


@pytest.mark.parametrize("command", list(QUICK))
def test_outputs_tagged_and_reproducible(tmp_path, command):
    path = config(tmp_path, command)
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [run(path, command, a), run(path, command, b)]
    assert codes[0] == codes[1] and codes[0] in (cli.EXIT_OK, cli.EXIT_FAIL)
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    h = cli.config_hash(cli.load_config(path))
    for name in files:
        pa, pb = a / name, b / name
        assert pa.read_bytes() == pb.read_bytes(), name
        if name.endswith(".csv"):
            rows = _read_csv(pa)
            assert rows[0][-3:] == ["config_hash", "seed", "version"]
            assert all(r[-3:] == [h, "5", cli.VERSION] for r in rows[1:])
        elif name.endswith(".bin.json"):
            assert json.loads(pa.read_text())["config_hash"] == h
        elif name.endswith(".json"):
            doc = json.loads(pa.read_text())
            assert (doc["config_hash"], doc["seed"], doc["version"]) == (h, 5, cli.VERSION)


def test_seed_override(tmp_path):
    path = config(tmp_path, "simulate")
    run(path, "simulate", tmp_path / "a", "--seed", "6")
    doc = json.loads((tmp_path / "a" / "simulate.json").read_text())
    assert doc["seed"] == 6
    assert doc["config_hash"] != cli.config_hash(cli.load_config(path))


def test_couple_histogram_format(tmp_path):
    path = config(tmp_path, "couple")
    run(path, "couple", tmp_path / "o")
    rows = _read_csv(tmp_path / "o" / "coupling_time_histogram.csv")
    assert rows[0][:4] == ["r", "bin_lo", "bin_hi", "count"]
    body = rows[1:]
    per_r = {}
    for r in body:
        per_r.setdefault(r[0], []).append(r)
    assert len(per_r) == 3
    for r, group in per_r.items():
        assert len(group) == 21
        assert group[-1][2] == "inf"
        assert sum(int(g[3]) for g in group) == 300
        edges = [float(g[1]) for g in group[:-1]]
        assert edges == sorted(edges) and edges[0] == 0.0


def test_simulate_char_function_oracle(tmp_path):
    sim = {"t_max": 1.0, "paths": 20000, "delta_cut": 1e-3}
    path = config(tmp_path, "simulate", simulation=sim,
                  experiment={"x0": [[0.0]], "t": 1.0, "xi": [1.0]})
    assert run(path, "simulate", tmp_path / "o") == cli.EXIT_OK
    rows = _read_csv(tmp_path / "o" / "simulate.csv")
    head = rows[0]
    cos_row = [r for r in rows[1:] if r[head.index("statistic")].startswith("cos")][0]
    assert cos_row[head.index("oracle")] != "nan"
    assert cos_row[head.index("within_tolerance")] == "true"


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "stablelike.cli", "--help"], capture_output=True,
                         text=True, check=True)
    for sub in cli.COMMANDS:
        assert sub in res.stdout
    for flag in ("--config", "--seed", "--out", "--threads"):
        res = subprocess.run([sys.executable, "-m", "stablelike.cli", "simulate", "--help"],
                             capture_output=True, text=True, check=True)
        assert flag in res.stdout


def test_interrupt_exit_code(tmp_path, monkeypatch):
    def boom(cfg, out):
        """Stub that is interrupted after writing one table."""
        out.csv("partial", ("a",), [(1.0,)])
        raise KeyboardInterrupt
    monkeypatch.setitem(cli.HANDLERS, "simulate", boom)
    path = config(tmp_path, "simulate")
    assert run(path, "simulate", tmp_path / "o") == cli.EXIT_INTERRUPT
    assert (tmp_path / "o" / "partial.csv").exists()


def test_numerical_failure_exit_code(tmp_path):
    sim = {"t_max": 1.0, "paths": 10, "delta_cut": 1e-3, "max_events": 5}
    path = config(tmp_path, "simulate", simulation=sim)
    assert run(path, "simulate", tmp_path / "o") == cli.EXIT_NUMERIC
