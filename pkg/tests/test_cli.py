import json
import subprocess
import sys

import pytest

from haarlab.cli import main

LINE = """\
name: line
group: R
resolution: 32
seed: 5
sets:
  I: {box: {lo: [0], hi: [1]}}
  J: {box: {lo: [0], hi: [3]}}
  Gap: {union: [{lo: [0], hi: [1]}, {lo: [3], hi: [4]}]}
  R1: {random: {seed: 2}}
analyses:
  - {kind: kemperman, A: I, B: J}
  - {kind: kemperman_random, count: 5}
  - {kind: covering, A: I, B: J, direction: left}
  - {kind: progression, A: Gap, I: [0, 1], P: [[3, 2]]}
  - {kind: bm, A: I, B: R1}
"""


@pytest.fixture
def scenario(tmp_path):
    p = tmp_path / "line.yaml"
    p.write_text(LINE)
    return p


def test_minimal_scenario_passes(tmp_path, capsys):
    assert main(["run", "--scenario", "scenarios/minimal.yaml", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "minimal.csv").read_text().splitlines()
    assert rows[0].startswith("scenario,")
    assert len(rows) > 1 and all(",pass," in r for r in rows[1:])
    assert "minimal" in capsys.readouterr().out


def test_run_writes_reports_and_certificates(scenario, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(scenario), "--out", str(out)]) == 0
    assert (out / "line.summary.txt").exists()
    meta = json.loads((out / "line.json").read_text())
    assert meta["scenarios"][0]["scenario"] == "line"
    certs = sorted((out / "certificates").glob("*.json"))
    assert {json.loads(c.read_text())["kind"] for c in certs} == {"covering", "progression"}
    for c in certs:
        assert main(["verify", "--cert", str(c)]) == 0


def test_tampered_certificate_is_invalid(scenario, tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", "--scenario", str(scenario), "--out", str(out)])
    cert = next(c for c in (out / "certificates").glob("*.json")
                if json.loads(c.read_text())["kind"] == "covering")
    rec = json.loads(cert.read_text())
    rec["omega"] = rec["omega"][:1]
    cert.write_text(json.dumps(rec))
    capsys.readouterr()
    assert main(["verify", "--cert", str(cert)]) == 1
    assert "INVALID" in capsys.readouterr().out


def test_verify_with_explicit_set(scenario, tmp_path):
    out = tmp_path / "out"
    main(["run", "--scenario", str(scenario), "--out", str(out)])
    cert = next(c for c in (out / "certificates").glob("*.json")
                if json.loads(c.read_text())["kind"] == "progression")
    other = tmp_path / "far.grid"
    assert main(["gen", "--group", "R", "--res", "8", "--seed", "1", "--out", str(other)]) == 0
    wide = tmp_path / "wide.grid"
    from haarlab.grids import box_set, save

    save(box_set("R", 8, [0], [9]), wide)
    assert main(["verify", "--cert", str(cert), "--set", f"A={wide}"]) == 1


@pytest.mark.parametrize("body", ["name: x\ngroup: nope\nresolution: 8\nsets: {}\nanalyses: []\n",
                                  "name: x\ngroup: R\nsets: {}\nanalyses: []\n",
                                  "name: x\ngroup: R\nresolution: 8\nsets: {}\n"
                                  "analyses: [{kind: bogus}]\n",
                                  ": : :\n"])
def test_bad_scenario_exits_2(tmp_path, body):
    p = tmp_path / "bad.yaml"
    p.write_text(body)
    assert main(["run", "--scenario", str(p)]) == 2


def test_refused_hypothesis_exits_3(tmp_path):
    p = tmp_path / "ref.yaml"
    p.write_text("name: ref\ngroup: axb\nresolution: 8\n"
                 "sets: {A: {box: {lo: [0, 0], hi: [1, 1]}}}\n"
                 "analyses: [{kind: kemperman, A: A, B: A}]\n")
    assert main(["run", "--scenario", str(p)]) == 3


def test_parallel_run_is_byte_identical(scenario, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--scenario", str(scenario), "--out", str(a)])
    main(["run", "--scenario", str(scenario), "--out", str(b), "--jobs", "2"])
    assert (a / "line.csv").read_bytes() == (b / "line.csv").read_bytes()


def test_seed_override_changes_random_sets(scenario, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--scenario", str(scenario), "--out", str(a)])
    main(["run", "--scenario", str(scenario), "--out", str(b), "--seed", "99"])
    assert (a / "line.csv").read_text() != (b / "line.csv").read_text()


def test_sweep_reports_narrowing(tmp_path, capsys):
    assert main(["sweep", "--scenario", "scenarios/sweep.yaml", "--out", str(tmp_path)]) == 0
    rows = [r.split(",") for r in (tmp_path / "sweep.sweep.csv").read_text().splitlines()]
    head = rows[0]
    width = head.index("width")
    box = [float(r[width]) for r in rows[1:]
           if r[0] == "affine-sweep" and r[3] == "product[left]"]
    assert len(box) == 3 and box[0] > box[1] > box[2]
    text = capsys.readouterr().out
    assert "transitions:" in text and "unresolved@8 -> pass@16" in text


def test_sweep_needs_two_levels(tmp_path):
    assert main(["sweep", "--scenario", "scenarios/minimal.yaml"]) == 2
    assert main(["sweep", "--scenario", "scenarios/minimal.yaml", "--levels", "2",
                 "--out", str(tmp_path)]) == 0
    assert "64" in (tmp_path / "minimal.sweep.csv").read_text()
    assert "128" in (tmp_path / "minimal.sweep.csv").read_text()


def test_catalog(capsys):
    assert main(["catalog", "--check"]) == 0
    out = capsys.readouterr().out
    for name in ("R", "T", "RxT", "axb", "heis3"):
        assert f"\n{name} " in out
    assert "VIOLATIONS" not in out


def test_gen_is_seeded(capsys):
    main(["gen", "--group", "RxT", "--res", "8", "--seed", "3"])
    a = capsys.readouterr().out
    main(["gen", "--group", "RxT", "--res", "8", "--seed", "3"])
    assert capsys.readouterr().out == a and a
    assert main(["gen", "--group", "nope"]) == 2


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "haarlab.cli", "run", "--scenario",
                        "scenarios/minimal.yaml"], capture_output=True, text=True)
    assert r.returncode == 0 and "minimal" in r.stdout
