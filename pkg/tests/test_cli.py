"""CLI commands, exit codes, and report determinism."""
import json

import numpy as np
import pytest

from trisep import cli, states


def run(argv):
    return cli.main(argv)


def strip_timestamp(path):
    obj = json.loads(path.read_text())
    obj.pop("timestamp", None)
    return json.dumps(obj, sort_keys=True)


def test_gen_upb_and_classify_exit_codes(tmp_path):
    f = tmp_path / "upb.json"
    assert run(["gen", "upb", str(f)]) == 0
    st = states.load(f)
    assert st.ranks == (4, 4, 4, 4)
    assert run(["classify", str(f)]) == 4


def test_gen_canonical_classify_separable(tmp_path):
    f = tmp_path / "c.json"
    assert run(["gen", "canonical", str(f), "--n", "3", "--seed", "7"]) == 0
    assert states.load(f).rank == 3
    out = tmp_path / "report.json"
    assert run(["classify", str(f), "--seed", "7", "--out", str(out)]) == 0
    obj = json.loads(out.read_text())
    assert obj["verdict"]["class"] == "SEPARABLE"


def test_gen_single_term_is_pure_product(tmp_path):
    f = tmp_path / "e.json"
    assert run(["gen", "ensemble", str(f), "--terms", "1", "--seed", "3"]) == 0
    st = states.load(f)
    assert st.rank == 1
    from trisep.lowrank import factor_product3
    w, v = np.linalg.eigh(st.rho)
    assert factor_product3(v[:, -1], (2, 2, 2)) is not None


def test_classify_npt_exit_code(tmp_path):
    f = tmp_path / "w.json"
    assert run(["gen", "werner", str(f), "--p", "0.4"]) == 0
    assert run(["classify", str(f)]) == 3


def test_ppt_check(tmp_path):
    f = tmp_path / "w.json"
    run(["gen", "werner", str(f), "--p", "0.4"])
    assert run(["ppt-check", str(f)]) == 3
    run(["gen", "werner", str(f), "--p", "0.3"])
    assert run(["ppt-check", str(f)]) == 0


def test_bad_file_exit_code(tmp_path):
    f = tmp_path / "junk.json"
    f.write_text("{\"version\": 1}")
    assert run(["classify", str(f)]) == 2
    assert run(["classify", str(tmp_path / "missing.json")]) == 2


def test_decompose_verify_round_trip(tmp_path):
    f = tmp_path / "c.json"
    run(["gen", "canonical", str(f), "--n", "2", "--seed", "5"])
    ev = tmp_path / "dec.json"
    assert run(["decompose", str(f), "--seed", "5", "--out", str(ev)]) == 0
    assert run(["verify", str(f), str(ev)]) == 0
    # corrupt one weight: verification must fail with exit 7
    obj = json.loads(ev.read_text())
    obj["decomposition"]["weights"][0] *= -1.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    assert run(["verify", str(f), str(bad)]) == 7


def test_witness_verify_round_trip(tmp_path):
    f = tmp_path / "upb.json"
    run(["gen", "upb", str(f)])
    ev = tmp_path / "wit.json"
    assert run(["witness", str(f), "--out", str(ev), "--starts", "80"]) == 0
    obj = json.loads(ev.read_text())
    assert obj["epsilon"] >= 1e-4
    assert abs(obj["trace_w_rho"] + obj["epsilon"]) <= 1e-8
    assert run(["verify", str(f), str(ev)]) == 0


def test_witness_rejects_separable(tmp_path):
    f = tmp_path / "c.json"
    run(["gen", "canonical", str(f), "--n", "2", "--seed", "1"])
    assert run(["witness", str(f)]) == 6


def test_find_vectors_report(tmp_path, capsys):
    f = tmp_path / "e.json"
    run(["gen", "ensemble", str(f), "--terms", "5", "--seed", "11"])
    capsys.readouterr()
    assert run(["find-vectors", str(f), "--seed", "11"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["v_size"] >= 5


def test_reports_byte_identical_modulo_timestamp(tmp_path):
    f = tmp_path / "c.json"
    run(["gen", "canonical", str(f), "--n", "2", "--seed", "9"])
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert run(["classify", str(f), "--seed", "9", "--out", str(r1)]) == 0
    assert run(["classify", str(f), "--seed", "9", "--out", str(r2)]) == 0
    assert strip_timestamp(r1) == strip_timestamp(r2)
    g = tmp_path / "c2.json"
    run(["gen", "canonical", str(g), "--n", "2", "--seed", "9"])
    assert g.read_text() == f.read_text()


def test_text_format(tmp_path, capsys):
    f = tmp_path / "upb.json"
    run(["gen", "upb", str(f)])
    capsys.readouterr()
    assert run(["classify", str(f), "--format", "text"]) == 4
    out = capsys.readouterr().out
    assert "PPT_EDGE" in out
