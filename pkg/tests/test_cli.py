import json
import os
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "roughgg.cli"]


def run(*args, cwd=None):
    return subprocess.run(CLI + list(args), capture_output=True, text=True, cwd=cwd)


def test_gallery_manifest(tmp_path):
    out = tmp_path / "gal"
    proc = run("gallery", "--out-dir", str(out))
    assert proc.returncode == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest) == 6
    assert manifest["slit-square"]["star_measure"] == 10.0
    assert abs(manifest["slit-disk"]["star_measure"] - (2 * 3.141592653589793 + 1)) < 1e-12
    for entry in manifest.values():
        assert (out / entry["file"]).exists()


def test_trace_subcommand_slit(tmp_path):
    out = tmp_path / "tr.json"
    proc = run("trace", "--preset", "slit-square", "--grid", "32",
               "--out", str(out))
    assert proc.returncode == 0
    report = json.loads(out.read_text())
    assert report["g_infinity"] == 2.0
    slit_sides = [s for s in report["sides"]
                  if s["axis"] == 1 and s["g"] == -1.0]
    assert len(slit_sides) == 2 * 64  # both sides of 2/dx crack facets


def test_classify_and_idempotence(tmp_path):
    out = tmp_path / "cls.json"
    png = tmp_path / "cls.pgm"
    args = ("classify", "--preset", "slit-square", "--grid", "32",
            "--out", str(out), "--png", str(png))
    assert run(*args).returncode == 0
    first = out.read_bytes(), png.read_bytes()
    assert run(*args).returncode == 0
    assert (out.read_bytes(), png.read_bytes()) == first
    assert png.read_bytes().startswith(b"P5\n")
    report = json.loads(out.read_text())
    assert report["star_measure"] == pytest.approx(10.0, rel=0.03)


def test_perimeter_subcommand(tmp_path):
    out = tmp_path / "p.json"
    proc = run("perimeter", "--preset", "disk", "--grid", "128",
               "--out", str(out))
    assert proc.returncode == 0
    report = json.loads(out.read_text())
    assert report["perimeter_estimate"] == pytest.approx(6.2832, rel=0.02)


def test_approx_subcommand_and_sweep(tmp_path):
    out = tmp_path / "a.json"
    png = tmp_path / "e.pgm"
    proc = run("approx", "--preset", "square", "--grid", "64", "--delta",
               "0.25", "--out", str(out), "--png", str(png))
    assert proc.returncode == 0
    report = json.loads(out.read_text())
    assert report["ratio"] < 4.0
    assert png.exists()
    csv = tmp_path / "sweep.csv"
    proc = run("approx", "--preset", "square", "--grid", "128",
               "--sweep", "0.25,0.125,0.0625", "--out", str(csv))
    assert proc.returncode == 0
    lines = csv.read_text().strip().splitlines()
    assert lines[0].startswith("delta,")
    assert len(lines) == 4
    assert all(line.endswith("BOUNDED") for line in lines[1:])


def test_gg_check_subcommand(tmp_path):
    out = tmp_path / "gg.json"
    proc = run("gg-check", "--preset", "slit-square", "--grid", "32",
               "--out", str(out))
    assert proc.returncode == 0
    report = json.loads(out.read_text())
    assert report["worst_relative"] <= 1e-8


def test_solve_div_round_trip(tmp_path):
    tr = tmp_path / "tr.csv"
    proc = run("trace", "--preset", "slit-square", "--grid", "32",
               "--csv", str(tr))
    assert proc.returncode == 0
    out = tmp_path / "solve.json"
    flux = tmp_path / "f.dmf"
    proc = run("solve-div", "--preset", "slit-square", "--grid", "32",
               "--trace", str(tr), "--out", str(out), "--flux", str(flux))
    assert proc.returncode == 0, proc.stderr
    report = json.loads(out.read_text())
    assert report["audit_pass"] is True
    assert report["trace_linf_gap"] <= 1e-8
    assert flux.read_bytes().startswith(b"DMF1")
    proc = run("solve-div", "--preset", "slit-square", "--grid", "32",
               "--trace", str(tr), "--mode", "decomposed", "--out", str(out))
    assert proc.returncode == 0
    assert json.loads(out.read_text())["mode"] == "DECOMPOSED"


def test_solve_div_incompatible_exit_3(tmp_path):
    tr = tmp_path / "tr.csv"
    proc = run("trace", "--preset", "square", "--grid", "16", "--csv", str(tr))
    assert proc.returncode == 0
    lines = tr.read_text().splitlines()
    # keep only the positive-flux rows: net inflow, no exact solution
    bad = [lines[0]] + [l for l in lines[1:] if l.endswith(",1")]
    assert len(bad) > 1
    badfile = tmp_path / "bad.csv"
    badfile.write_text("\n".join(bad) + "\n")
    proc = run("solve-div", "--preset", "square", "--grid", "16",
               "--trace", str(badfile))
    assert proc.returncode == 3


def test_bad_input_exit_2(tmp_path):
    proc = run("classify", "--domain", '{"shape":{"op":"disk","r":-2}}',
               "--grid", "16")
    assert proc.returncode == 2
    proc = run("classify", "--domain", "{not json", "--grid", "16")
    assert proc.returncode == 2
    proc = run("classify", "--grid", "16")  # no domain source at all
    assert proc.returncode == 2
