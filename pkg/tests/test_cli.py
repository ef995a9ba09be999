import csv
import hashlib
import io
import json

import numpy as np
import pytest

from pfrlab.cli import main, parse_seeds
from pfrlab.gf2core import from_bits


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_seeds(monkeypatch):
    assert parse_seeds("3..5") == [3, 4, 5]
    assert parse_seeds("7") == [7]
    monkeypatch.setenv("PFRLAB_SEED", "11")
    assert parse_seeds(None) == [11]


def test_gen_cover_line_count_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.set", tmp_path / "b.set"
    for p in (a, b):
        code, _, _ = run(capsys, "gen", "cover", "--n", 16, "--dim", 8, "--cosets", 4, "--noise", 0, "--seed", 1, "--out", p)
        assert code == 0
    assert len(a.read_text().splitlines()) == 1 + 4 * 256
    assert sha(a) == sha(b)
    side = json.loads((tmp_path / "a.set.json").read_text())
    assert side["dimV"] == 8 and len(side["reps"]) == 4 and side["seed"] == 1


def test_gen_affine_matches_sidecar(tmp_path, capsys):
    p = tmp_path / "f.tab"
    assert run(capsys, "gen", "affine", "--m", 8, "--n", 6, "--rho", 1.0, "--seed", 3, "--out", p)[0] == 0
    side = json.loads((tmp_path / "f.tab.json").read_text())
    rows = [from_bits(r) for r in side["M"]]
    v = from_bits(side["v"])
    lines = p.read_text().splitlines()[1:]
    for x, line in enumerate(lines):
        fx = from_bits(line)
        mx = sum(((bin(r & x).count("1") & 1) << i) for i, r in enumerate(rows))
        assert fx == mx ^ v


def test_pfr_sweep_on_subspace(tmp_path, capsys):
    p = tmp_path / "a.set"
    run(capsys, "gen", "cover", "--n", 12, "--dim", 6, "--cosets", 1, "--seed", 2, "--out", p)
    code, out, _ = run(capsys, "pfr", p, "--seeds", "0..29", "--workers", 2)
    assert code == 0
    rows = [json.loads(line) for line in out.splitlines()]
    summary = rows[-1]
    assert summary["summary"] and summary["seeds"] == 30
    assert summary["success_rate"] >= 2 / 3
    assert [r["seed"] for r in rows[:-1]] == list(range(30))


def test_malformed_set_names_line(tmp_path, capsys):
    p = tmp_path / "bad.set"
    p.write_text("n=4 count=2\n0101\n01x1\n")
    code, _, err = run(capsys, "pfr", p)
    assert code != 0 and ":3:" in err


def test_homtest_exact_affine(tmp_path, capsys):
    p = tmp_path / "f.tab"
    run(capsys, "gen", "affine", "--m", 6, "--n", 4, "--rho", 1.0, "--seed", 4, "--out", p)
    code, out, _ = run(capsys, "homtest", p, "--seed", 1)
    row = json.loads(out)
    assert code == 0 and row["agreement_fraction"] == 1.0 and row["seed"] == 1


def test_approxhom_small_image(tmp_path, capsys):
    p = tmp_path / "g.tab"
    run(capsys, "gen", "smallimage", "--m", 8, "--n", 6, "--imgk", 2, "--seed", 5, "--out", p)
    code, out, _ = run(capsys, "approxhom", p)
    row = json.loads(out)
    assert code == 0 and row["within_bound"] and row["residual_image_size"] <= row["bound"]


def test_truncated_table_fails(tmp_path, capsys):
    p = tmp_path / "g.tab"
    run(capsys, "gen", "affine", "--m", 4, "--n", 2, "--out", p)
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-1]) + "\n")
    code, _, err = run(capsys, "homtest", p)
    assert code != 0 and "expected 16 values" in err


def test_homtest_cap_surfaced(tmp_path, capsys):
    p = tmp_path / "g.tab"
    run(capsys, "gen", "affine", "--m", 4, "--n", 4, "--out", p)
    code, _, err = run(capsys, "homtest", p, "--backend", "exhaustive")
    assert code != 0 and "cap 7" in err


def test_verify_sidecar_and_report(tmp_path, capsys):
    p = tmp_path / "a.set"
    run(capsys, "gen", "cover", "--n", 12, "--dim", 5, "--cosets", 3, "--seed", 6, "--out", p)
    code, out, _ = run(capsys, "verify", p, tmp_path / "a.set.json")
    assert code == 0 and json.loads(out)["covered"]
    rep = tmp_path / "r.jsonl"
    run(capsys, "pfr", p, "--seeds", "0", "--out", rep)
    code, out, _ = run(capsys, "verify", p, rep)
    assert code == 0 and json.loads(out)["covered"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"basis": [], "reps": ["000000000000"]}))
    assert run(capsys, "verify", p, bad)[0] == 1


def test_bench_queries_csv(capsys):
    code, out, _ = run(capsys, "bench-queries", "--sizes", "6..8", "--seeds", "0..1")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 6
    for r in rows:
        assert r["samples"] == r["t"]
        assert int(r["membership_queries"]) <= 10**6


def test_manifest_replay(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    run(capsys, "gen", "cover", "--n", 12, "--dim", 5, "--cosets", 2, "--seed", 9, "--out", "a.set",
        "--manifest", "gen.json")
    code, _, _ = run(capsys, "pfr", "a.set", "--seeds", "0..3", "--out", "r.jsonl", "--manifest", "pfr.json")
    assert code == 0
    before = sha(tmp_path / "r.jsonl")
    assert run(capsys, "replay", "pfr.json")[0] == 0
    assert sha(tmp_path / "r.jsonl") == before
    assert run(capsys, "replay", "gen.json")[0] == 0
