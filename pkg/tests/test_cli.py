import hashlib
import json

import pytest

from transverse.cli import EXIT_BUDGET, EXIT_CERT, EXIT_INPUT, EXIT_OK, main
from transverse.gf_linalg import FieldSpec
from transverse.gridset import Ambient2, GridSet, TransverseSet, from_lss
from transverse.lss import lines_system


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_gen_bilinear_is_pinned(capsys):
    code, out, _ = run(capsys, "gen", "--kind", "bilinear", "--r", "1", "--seed", "7", "--nG", "4", "--nH", "4")
    assert code == EXIT_OK
    assert hashlib.sha256(out.encode()).hexdigest() == "e351ec2d4688a7e2698c03d49ca643d66522ba4afa26d41320f4da7916b6bdbc"
    code, out, _ = run(
        capsys, "gen", "--kind", "bilinear", "--r", "1", "--seed", "7", "--nG", "4", "--nH", "4", "--format", "hex"
    )
    assert json.loads(out)["bits"] == "ffffff00a55aa5a599669999c3c3c33cffffff00a55aa5a599669999c3c3c33c"


def test_gen_kinds_roundtrip(capsys, tmp_path):
    for kind in ("full", "bilinear", "lss"):
        out = tmp_path / f"{kind}.json"
        assert main(["gen", "--kind", kind, "--p", "3", "--out", str(out)]) == EXIT_OK
        T = TransverseSet.from_json(json.loads(out.read_text()))
        assert T.ambient.p == 3
    code, out, _ = run(capsys, "gen", "--kind", "enumerate", "--out", str(tmp_path / "all"))
    assert code == EXIT_OK and json.loads(out)["count"] == 50
    assert len(list((tmp_path / "all").glob("set_*.json"))) == 50


def test_check_report(capsys, tmp_path):
    T = from_lss(lines_system(FieldSpec(2, 3)))
    path = write(tmp_path, "lines.json", T.to_json())
    code, out, _ = run(capsys, "check", "--in", path)
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["transverse"] and rep["lss_valid"]
    assert rep["dhor_invariant"] and rep["dver_invariant"]
    assert rep["profile"] == {"d": 1, "eps1": "1/8", "eps2": "7/64"}


def test_check_reports_non_transverse_witness(capsys, tmp_path):
    G = GridSet.from_cells(Ambient2(2, 2, 2), [(0, 0)])
    path = write(tmp_path, "bad.json", G.to_json())
    code, out, _ = run(capsys, "check", "--in", path)
    assert code == EXIT_INPUT
    assert json.loads(out) == {"transverse": False, "witness": {"kind": "row", "index": 1}}


def test_extract_is_byte_identical(capsys, tmp_path):
    T = from_lss(lines_system(FieldSpec(2, 4)))
    path = write(tmp_path, "dot.json", T.to_json())
    args = ["extract", "--in", path, "--nG", "4", "--nH", "4", "--eps", "0.1", "--seed", "2"]
    code1, out1, _ = run(capsys, *args, "--timings", str(tmp_path / "t.json"))
    code2, out2, _ = run(capsys, *args)
    assert code1 == code2 == EXIT_OK
    assert out1 == out2
    rep = json.loads(out1)
    assert rep["r"] == 1 and rep["certificate"]["passed"]
    assert set(json.loads((tmp_path / "t.json").read_text())) == {"regularize", "structure", "certify"}


def test_oracle(capsys, tmp_path):
    amb_cols = {"type": "transverse", "p": 2, "nG": 2, "nH": 2, "columns": [[1, 2], [], [], []]}
    code, out, _ = run(capsys, "oracle", "--in", write(tmp_path, "axes.json", amb_cols))
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["is_variety"] and rep["r"] == 2 and rep["minimal"]


def test_bench_csv(capsys):
    code, out, _ = run(capsys, "bench", "--kind", "bilinear", "--count", "3", "--nG", "3", "--nH", "3",
                       "--eps", "0.1", "--format", "csv")
    lines = out.strip().splitlines()
    assert code == EXIT_OK
    assert lines[0].startswith("index,p,nG,nH,delta")
    assert len(lines) == 4


@pytest.mark.parametrize(
    "argv",
    [
        ["gen", "--p", "4"],
        ["gen", "--eps", "1.5"],
        ["check"],
        ["check", "--in", "/nonexistent/file.json"],
        ["gen", "--kind", "enumerate"],
    ],
)
def test_input_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INPUT
    assert err.startswith("error:")


def test_parse_error_reports_position(capsys, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"type": "transverse",\n  "p": 2,,\n}')
    code, _, err = run(capsys, "check", "--in", str(path))
    assert code == EXIT_INPUT
    assert "line 2" in err


def test_exit_code_constants():
    assert (EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_CERT) == (0, 2, 3, 4)
