import csv
import io
import json

import pytest

from specgap.cli import ExperimentConfig, main, parse_range
from specgap.core import ChainSpec


def _csv(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_laplacian_csv(capsys):
    assert main(["laplacian", "--w", "2..4"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# ")
    rows = _csv(out)
    assert [r["w"] for r in rows] == ["2", "3", "4"]
    assert float(rows[0]["lambda_min_float"]) == pytest.approx(-0.6180339887, abs=1e-9)


def test_qpe_overlap_json(capsys):
    assert main(["qpe", "overlap", "--eta", "11", "--N", "2"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["schema"] == 1
    assert set(obj) >= {"phi_bits", "overlap", "bound", "satisfied"}


def test_unknown_lemma_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["verify", "no-such-lemma"])
    assert e.value.code == 2


def test_empty_range_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["figure", "gapped-vs-dense", "--N", "5..4"])
    assert e.value.code == 2
    with pytest.raises(ValueError):
        ExperimentConfig(n_range=(4, 3))


@pytest.mark.parametrize("lemma", ["elastic-1", "main-periodic", "single-segment"])
def test_verify_passing_lemmas(lemma, tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", lemma, "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["lemma"] == lemma and rep["ok"]


def test_verify_elastic_reports_rows(tmp_path):
    out = tmp_path / "r.json"
    code = main(["verify", "elastic", "--N", "6", "--out", str(out)])
    rep = json.loads(out.read_text())
    assert len(rep["rows"]) == 2**6
    assert code == (0 if rep["ok"] else 1)


def test_segment_profile(capsys):
    assert main(["segment", "profile", "--machine", "consume_6", "--eta", "1", "--w", "2..10"]) == 0
    rows = _csv(capsys.readouterr().out)
    classes = {int(r["w"]): r["class"] for r in rows}
    assert classes[6] == "truncated" and classes[7] == "no_halt" and classes[8] == "halted"


def test_pen_and_bonux_figure(capsys):
    assert main(["figure", "pen-and-bonux"]) == 0
    rows = _csv(capsys.readouterr().out)
    lam = {int(r["w"]): float(r["lambda_min"]) for r in rows}
    assert lam[7] > 0 > lam[8]


def test_gap_scan_with_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"halting": False, "mu": "1"}))
    assert main(["gap", "scan", "--config", str(cfg), "--N", "3..4"]) == 0
    rows = _csv(capsys.readouterr().out)
    assert [int(r["N"]) for r in rows] == [3, 4]
    assert all(float(r["gap"]) >= 1 - 1e-9 for r in rows)


def test_audit_and_build(tmp_path, capsys):
    assert main(["audit", "--N", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]
    out = tmp_path / "m.json"
    assert main(["build", "marker", "--N", "4", "--out", str(out)]) == 0
    assert ChainSpec.loads(out.read_text()).N == 4


def test_parse_range():
    assert parse_range("3") == (3, 3)
    assert parse_range("2..16") == (2, 16)
