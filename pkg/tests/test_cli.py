"""Command-line pipeline: exit codes, artifacts, manifest, reproducibility."""

import hashlib
import json
import os

import numpy as np
import pytest

import driftbayes as db
from driftbayes.cli import run_command


def write_config(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_json(outdir, name):
    with open(os.path.join(outdir, name)) as fh:
        return json.load(fh)


def run(tmp_path, command, cfg, extra=(), name="config.json", out="out"):
    path = write_config(tmp_path, name, cfg)
    outdir = str(tmp_path / out)
    rc = run_command([command, "--config", path, *extra, "--out", outdir])
    return rc, outdir


OU1 = db.ou_spec(1.0).to_json_dict()

LINEAR_NET = {
    "family": {"kind": "linear", "beta_min": 1e-9, "beta_max": 2.0},
    "m_max": 1, "l_max": 2, "eps_schedule": [0.5, 0.25], "net_seed": 11,
}


def two_atom_net_file(tmp_path):
    net = db.PriorNet(
        atoms=[db.ou_spec(1.0, growth_K=2.0), db.ou_spec(2.0)],
        weights=np.array([0.5, 0.5]),
        provenance=[(1, 1, 0), (1, 1, 1)],
        atom_params=[(1.0,), (2.0,)],
        eps_schedule=(0.5,), q1=(1.0,), q2=(1.0,),
        truncated_mass=0.0, renormalized=False, family_name="linear")
    path = tmp_path / "two_atom_net.json"
    path.write_text(json.dumps(net.to_json_dict()))
    return str(path)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def test_validate_compliant_drift_exits_zero(tmp_path):
    rc, out = run(tmp_path, "validate", {"seed": 1, "drift": OU1})
    assert rc == 0
    doc = read_json(out, "validation.json")
    assert doc["ok"] is True
    assert doc["violations"] == []


def test_validate_ou_overdeclared_rate_exits_one(tmp_path, capsys):
    bad = db.ou_spec(2.0).to_json_dict()
    bad["growth_K"] = 1.0
    rc, _ = run(tmp_path, "validate", {"seed": 1, "drift": bad})
    assert rc == 1
    err = capsys.readouterr().err
    assert "growth" in err


def test_validate_grid_violation_writes_report_and_exits_one(tmp_path, capsys):
    # cubic drift declared with K=1 fails the linear growth audit on the grid
    cubic = {
        "dim": 1,
        "form": {"kind": "tabulated", "grid": [-5.0, -2.0, 0.0, 2.0, 5.0],
                 "values": [[125.0, 8.0, 0.0, -8.0, -125.0]],
                 "extrapolation": "linear"},
        "growth_K": 1.0,
        "dissipativity": {"r": 0.5, "M": 1.0, "alpha": 1.0},
    }
    rc, out = run(tmp_path, "validate",
                  {"seed": 1, "drift": cubic, "half_width": 5.0})
    assert rc == 1
    assert "growth" in capsys.readouterr().err
    doc = read_json(out, "validation.json")
    assert doc["ok"] is False
    assert any("growth" in v["constraint"] for v in doc["violations"])
    # the failure report is still covered by the manifest
    manifest = read_json(out, "run_manifest.json")
    assert "validation.json" in manifest["outputs"]


# ---------------------------------------------------------------------------
# simulate and ingest
# ---------------------------------------------------------------------------

def test_simulate_writes_series_with_expected_shape(tmp_path):
    rc, out = run(tmp_path, "simulate",
                  {"seed": 5, "drift": OU1, "delta": 0.5, "n": 20})
    assert rc == 0
    lines = open(os.path.join(out, "series.csv")).read().splitlines()
    assert lines[0] == "t,x1"
    assert len(lines) == 22


def test_ingest_roundtrip_preserves_states(tmp_path):
    rc, out = run(tmp_path, "simulate",
                  {"seed": 5, "drift": OU1, "delta": 0.5, "n": 20})
    assert rc == 0
    series_path = os.path.join(out, "series.csv")
    rc2, out2 = run(tmp_path, "ingest",
                    {"seed": 5, "path": series_path, "delta": 0.5},
                    name="ingest.json", out="out2")
    assert rc2 == 0
    report = read_json(out2, "ingest_report.json")
    assert report["n_accepted"] == 21
    assert report["rejected"] == []
    assert report["origin"] == "ingested"
    original, _ = db.read_series_csv(series_path)
    back, _ = db.read_series_csv(os.path.join(out2, "series.csv"))
    np.testing.assert_array_equal(back.states, original.states)


def test_ingest_rejects_drifting_timestamp_naming_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,x1\n0,0.1\n0.5,0.2\n1.1,0.3\n")
    rc, _ = run(tmp_path, "ingest",
                {"seed": 1, "path": str(bad), "delta": 0.5})
    assert rc == 1
    assert "row 3" in capsys.readouterr().err


def test_ingest_records_malformed_rows(tmp_path):
    messy = tmp_path / "messy.csv"
    messy.write_text("t,x1\n0,0.1\n0.5,oops\n0.5,0.2\n1.0,0.3\n")
    rc, out = run(tmp_path, "ingest",
                  {"seed": 1, "path": str(messy), "delta": 0.5})
    assert rc == 0
    report = read_json(out, "ingest_report.json")
    assert report["n_accepted"] == 3
    assert report["rejected"] == [{"line": 3, "reason": "non-numeric field"}]


# ---------------------------------------------------------------------------
# net, posterior, consistency
# ---------------------------------------------------------------------------

def test_net_artifacts_roundtrip_and_audit(tmp_path):
    rc, out = run(tmp_path, "net", {"seed": 11, **LINEAR_NET})
    assert rc == 0
    net = db.PriorNet.from_json_dict(read_json(out, "net.json"))
    assert net.n_atoms == 6
    audit = read_json(out, "net_audit.json")
    assert audit["n_atoms"] == 6
    assert set(audit["cells"]) == {"1,1", "1,2"}
    assert all(w <= eps + 1e-9 for w, eps in
               zip(audit["cells"].values(), [0.5, 0.25]))


def test_posterior_two_atoms_concentrates_on_truth(tmp_path):
    net_path = two_atom_net_file(tmp_path)
    cfg = {
        "seed": 3, "delta": 0.5, "net_path": net_path,
        "series": {"drift": OU1, "n": 500},
        "model": {"method": "exact_ou"},
    }
    rc, out = run(tmp_path, "posterior", cfg)
    assert rc == 0
    lines = open(os.path.join(out, "posterior.csv")).read().splitlines()
    assert lines[0] == "atom,prior,log_lik_ratio,posterior"
    weights = [float(line.split(",")[3]) for line in lines[1:]]
    assert max(weights) > 0.99
    doc = read_json(out, "posterior.json")
    assert doc["n_used"] == 500


def test_consistency_curve_header_and_prior_row(tmp_path):
    cfg = {
        "seed": 21, "delta": 0.5, **LINEAR_NET,
        "true_drift": OU1,
        "n_schedule": [0, 20], "replications": 2,
        "criterion": {"type": "l2ball", "radius": 0.141},
        "model": {"method": "exact_ou"},
    }
    rc, out = run(tmp_path, "consistency", cfg)
    assert rc == 0
    lines = open(os.path.join(out, "curve.csv")).read().splitlines()
    assert lines[0] == "n,mass,stderr"
    assert len(lines) == 3
    # the n = 0 row is the prior complement mass, identical across
    # replications
    n0 = lines[1].split(",")
    assert int(n0[0]) == 0
    assert float(n0[2]) < 1e-12


def test_consistency_accepts_weak_criterion(tmp_path):
    cfg = {
        "seed": 4, "delta": 0.5, **LINEAR_NET,
        "true_drift": OU1,
        "n_schedule": [0], "replications": 1,
        "criterion": {"type": "weak", "epsilon": 0.05, "fn": "cos",
                      "half_width": 4.0, "n_nodes": 21},
        "model": {"method": "exact_ou"},
    }
    rc, out = run(tmp_path, "consistency", cfg)
    assert rc == 0
    doc = read_json(out, "curve.json")
    assert 0.0 <= doc["means"][0] <= 1.0


# ---------------------------------------------------------------------------
# divergence and identifiability
# ---------------------------------------------------------------------------

def test_divergence_results_do_not_depend_on_threads(tmp_path):
    pairs = [{"b": db.ou_spec(b).to_json_dict(), "b0": OU1}
             for b in (0.8, 1.2)]
    cfg = {"seed": 9, "delta": 0.5, "pairs": pairs}
    rc1, out1 = run(tmp_path, "divergence", cfg, out="one")
    rc2, out2 = run(tmp_path, "divergence", cfg, extra=("--threads", "4"),
                    name="config2.json", out="four")
    assert rc1 == rc2 == 0
    text1 = open(os.path.join(out1, "divergence.json")).read()
    text2 = open(os.path.join(out2, "divergence.json")).read()
    assert text1 == text2
    reports = json.loads(text1)
    assert len(reports) == 2
    assert all(r["kl_transition"] >= -3 * r["kl_transition_stderr"]
               for r in reports)


def test_identifiability_separates_distinct_rates(tmp_path):
    cfg = {"seed": 2, "delta": 0.5, "a": OU1,
           "b": db.ou_spec(1.5).to_json_dict(),
           "model": {"method": "exact_ou"}}
    rc, out = run(tmp_path, "identifiability", cfg)
    assert rc == 0
    doc = read_json(out, "identifiability.json")
    assert doc["separated"] is True
    assert doc["max_gap"] > 0.1


# ---------------------------------------------------------------------------
# exit codes and config diagnostics
# ---------------------------------------------------------------------------

def test_malformed_json_reports_line_and_column(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"seed": 1,\n  "delta": }\n')
    rc = run_command(["simulate", "--config", str(path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


def test_missing_seed_is_a_config_error(tmp_path, capsys):
    rc, _ = run(tmp_path, "simulate", {"drift": OU1, "delta": 0.5, "n": 5})
    assert rc == 1
    assert "seed" in capsys.readouterr().err


def test_missing_field_is_named(tmp_path, capsys):
    rc, _ = run(tmp_path, "simulate", {"seed": 1, "drift": OU1, "n": 5})
    assert rc == 1
    assert "'delta'" in capsys.readouterr().err


def test_unknown_model_key_is_named(tmp_path, capsys):
    cfg = {"seed": 3, "delta": 0.5, "net_path": two_atom_net_file(tmp_path),
           "series": {"drift": OU1, "n": 5},
           "model": {"method": "exact_ou", "paths": 10}}
    rc, _ = run(tmp_path, "posterior", cfg)
    assert rc == 1
    assert "model.paths" in capsys.readouterr().err


def test_numerical_failure_exits_two(tmp_path, capsys):
    # exact simulation of a non-linear (tabulated) drift has no closed form
    tab = {
        "dim": 1,
        "form": {"kind": "tabulated", "grid": [-5.0, 0.0, 5.0],
                 "values": [[5.0, 0.0, -5.0]], "extrapolation": "linear"},
        "growth_K": 1.0,
        "dissipativity": {"r": 0.5, "M": 1.0, "alpha": 1.0},
    }
    cfg = {"seed": 1, "drift": tab, "delta": 0.5, "n": 5,
           "scheme": {"method": "exact"}}
    rc, _ = run(tmp_path, "simulate", cfg)
    assert rc == 2
    assert "numerical failure" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# seeds, threads, manifest, reproducibility
# ---------------------------------------------------------------------------

def test_seed_flag_overrides_config_seed(tmp_path):
    cfg = {"seed": 5, "drift": OU1, "delta": 0.5, "n": 10}
    rc1, out1 = run(tmp_path, "simulate", cfg, out="a")
    rc2, out2 = run(tmp_path, "simulate", cfg, extra=("--seed", "6"),
                    name="config2.json", out="b")
    assert rc1 == rc2 == 0
    assert read_json(out1, "run_manifest.json")["seed"] == 5
    assert read_json(out2, "run_manifest.json")["seed"] == 6
    a = open(os.path.join(out1, "series.csv")).read()
    b = open(os.path.join(out2, "series.csv")).read()
    assert a != b


def test_threads_env_honored_only_without_flag(tmp_path, monkeypatch):
    cfg = {"seed": 9, "delta": 0.5,
           "pairs": [{"b": db.ou_spec(1.2).to_json_dict(), "b0": OU1}]}
    monkeypatch.setenv("DRIFTBAYES_THREADS", "3")
    rc1, out1 = run(tmp_path, "divergence", cfg, out="env")
    rc2, out2 = run(tmp_path, "divergence", cfg, extra=("--threads", "1"),
                    name="config2.json", out="flag")
    assert rc1 == rc2 == 0
    assert read_json(out1, "run_manifest.json")["threads"] == 3
    assert read_json(out2, "run_manifest.json")["threads"] == 1


def test_manifest_lists_every_output_with_content_hash(tmp_path):
    rc, out = run(tmp_path, "net", {"seed": 11, **LINEAR_NET})
    assert rc == 0
    manifest = read_json(out, "run_manifest.json")
    files = sorted(f for f in os.listdir(out) if f != "run_manifest.json")
    assert sorted(manifest["outputs"]) == files
    for name, digest in manifest["outputs"].items():
        text = open(os.path.join(out, name)).read()
        assert hashlib.sha256(text.encode()).hexdigest() == digest
    assert manifest["versions"]["numpy"] == np.__version__
    assert manifest["versions"]["kernel_backend"] in ("compiled", "fallback")
    assert manifest["config_sha256"]


def test_identical_config_and_seed_reproduce_bytes(tmp_path):
    cfg = {
        "seed": 21, "delta": 0.5, **LINEAR_NET,
        "true_drift": OU1,
        "n_schedule": [0, 10], "replications": 2,
        "criterion": {"type": "l2ball", "radius": 0.141},
        "model": {"method": "exact_ou"},
    }
    rc1, out1 = run(tmp_path, "consistency", cfg, out="r1")
    rc2, out2 = run(tmp_path, "consistency", cfg, name="config2.json",
                    out="r2")
    assert rc1 == rc2 == 0
    for name in os.listdir(out1):
        a = open(os.path.join(out1, name)).read()
        b = open(os.path.join(out2, name)).read()
        assert a == b, name


def test_run_command_is_importable_from_package():
    assert db.run_command is run_command


def test_outputs_are_complete_files_not_temp_leftovers(tmp_path):
    rc, out = run(tmp_path, "simulate",
                  {"seed": 5, "drift": OU1, "delta": 0.5, "n": 5})
    assert rc == 0
    assert not [f for f in os.listdir(out) if f.startswith(".tmp-")]
