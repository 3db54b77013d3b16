"""Exit codes, file outputs, determinism, and spec-file validation."""

import json
import math

import numpy as np
import pytest

from domsplit import cli
from domsplit.words import GapReport


@pytest.fixture()
def diag_spec(tmp_path):
    path = tmp_path / "diag.json"
    path.write_text(json.dumps({"dim": 2, "matrices": [{"label": "A", "entries": [2, 0, 0, 1]}]}))
    return path


@pytest.fixture()
def rotation_spec(tmp_path):
    c, s = math.cos(1.0), math.sin(1.0)
    path = tmp_path / "rot.json"
    path.write_text(json.dumps({"dim": 2, "matrices": [{"label": "R", "entries": [c, -s, s, c]}]}))
    return path


def test_check_dominated_exit_zero(diag_spec, tmp_path):
    out = tmp_path / "out"
    code = cli.main(["check", str(diag_spec), "--index", "1", "--out", str(out)])
    assert code == 0
    report = GapReport.from_json_dict(json.loads((out / "gap_report.json").read_text()))
    assert report.verdict.kind == "dominated"
    header = (out / "gap_report.csv").read_text().splitlines()[0]
    assert header == "N,max_log_ratio,words_examined,exact"


def test_check_not_dominated_exit_two(rotation_spec, tmp_path):
    code = cli.main(["check", str(rotation_spec), "--index", "1", "--out", str(tmp_path / "o")])
    assert code == 2


def test_check_malformed_json_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 2, "matrices": [')
    code = cli.main(["check", str(bad), "--index", "1", "--out", str(tmp_path / "o")])
    assert code == 1
    err = capsys.readouterr().err
    assert "line" in err and "column" in err
    assert not (tmp_path / "o" / "gap_report.json").exists()  # no partial outputs


def test_check_missing_file_exit_one(tmp_path):
    code = cli.main(["check", str(tmp_path / "nope.json"), "--index", "1", "--out", str(tmp_path)])
    assert code == 1


def test_spec_requires_exactly_one_source(tmp_path):
    both = tmp_path / "both.json"
    both.write_text(json.dumps({"dim": 2, "matrices": [], "generator": {"kind": "example4d"}}))
    code = cli.main(["check", str(both), "--index", "1", "--out", str(tmp_path)])
    assert code == 1


def test_generator_specs(tmp_path):
    spec = tmp_path / "gen.json"
    spec.write_text(
        json.dumps(
            {"generator": {"kind": "conjugated_diagonal", "entries": [3.0, 1.0], "rotation_seed": 4}}
        )
    )
    fam = cli.load_family_spec(spec)
    assert fam.size == 1 and fam.dim == 2
    svals = np.linalg.svd(fam.matrix(0), compute_uv=False)
    assert np.allclose(svals, [3.0, 1.0])

    spec.write_text(
        json.dumps(
            {
                "generator": {
                    "kind": "random_perturbation",
                    "base": {"generator": {"kind": "conjugated_diagonal", "entries": [3.0, 1.0], "rotation_seed": 4}},
                    "noise": 0.01,
                    "seed": 2,
                    "copies": 3,
                }
            }
        )
    )
    fam = cli.load_family_spec(spec)
    assert fam.size == 3

    spec.write_text(json.dumps({"generator": {"kind": "example4d", "lambda": 8.0, "samples": 6}}))
    fam = cli.load_family_spec(spec)
    assert fam.dim == 4 and fam.size == 6
    assert fam.source.kind == "sampled_curve"


def test_multicone_command(diag_spec, rotation_spec, tmp_path):
    out = tmp_path / "mc"
    code = cli.main(["multicone", str(diag_spec), "--index", "1", "--out", str(out)])
    assert code == 0
    payload = json.loads((out / "multicone.json").read_text())
    assert len(payload["components"]) == 1
    assert (out / "component_0.csv").exists()
    # gate refusal without the override flag
    code = cli.main(["multicone", str(rotation_spec), "--index", "1", "--out", str(out)])
    assert code == 3


def test_splitting_command(diag_spec, tmp_path):
    out = tmp_path / "sp"
    code = cli.main(["splitting", str(diag_spec), "--index", "1", "--out", str(out)])
    assert code == 0
    payload = json.loads((out / "splitting.json").read_text())
    assert payload["verification"]["passes"]
    assert (out / "ratio_curve.csv").read_text().splitlines()[0] == "n,ratio,log_ratio"


def test_splitting_degenerate_gap_exit_one(rotation_spec, tmp_path):
    code = cli.main(["splitting", str(rotation_spec), "--index", "1", "--out", str(tmp_path)])
    assert code == 1


def test_check_determinism_byte_identical(tmp_path):
    spec = tmp_path / "fam.json"
    spec.write_text(
        json.dumps(
            {
                "dim": 2,
                "matrices": [
                    {"label": "A", "entries": [2, 0, 0, 1]},
                    {"label": "R", "entries": [0, -1, 1, 0]},
                ],
            }
        )
    )
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        cli.main(["check", str(spec), "--index", "1", "--max-len", "8", "--budget", "64", "--out", str(out)])
        outs.append(out)
    for fname in ("gap_report.json", "gap_report.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_emitted_json_reloads_to_equal_structures(diag_spec, tmp_path):
    from domsplit.multicone import Multicone
    from domsplit.splitting import SplittingEstimate

    out = tmp_path / "roundtrip"
    assert cli.main(["multicone", str(diag_spec), "--index", "1", "--out", str(out)]) == 0
    payload = json.loads((out / "multicone.json").read_text())
    mc = Multicone.from_json_dict(payload)
    assert [list(c) for c in mc.components] == payload["components"]
    assert mc.invariance_margin == payload["invariance_margin"]

    assert cli.main(["splitting", str(diag_spec), "--index", "1", "--out", str(out)]) == 0
    payload = json.loads((out / "splitting.json").read_text())
    est = SplittingEstimate.from_json_dict(payload)
    assert est.to_json_dict() == {
        k: payload[k] for k in est.to_json_dict()
    }


def test_example4d_undersampled_grid_warns_but_runs(tmp_path, capsys):
    out = tmp_path / "tiny"
    code = cli.main(["example4d", "--grid", "2", "--skip-perturbed", "--out", str(out)])
    err = capsys.readouterr().err
    assert "under-samples" in err
    assert code in (0, 2)
    assert (out / "example4d_report.json").exists()


def test_example4d_weak_lambda_fails_with_margins(tmp_path, capsys):
    out = tmp_path / "weak"
    code = cli.main(
        ["example4d", "--grid", "8", "--lambda", "1.01", "--skip-perturbed", "--out", str(out)]
    )
    assert code == 2
    captured = capsys.readouterr().out
    assert "invariance_scan" in captured
    assert "margin" in captured
    report = json.loads((out / "example4d_report.json").read_text())
    assert report["lambda"] is None
    assert not report["scan"][0]["passed"]
