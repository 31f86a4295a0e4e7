import json

import pytest

from rotsums import cli
from rotsums.checks import CheckResult


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(autouse=True)
def fixed_clock(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


def test_cf_table(capsys):
    code, out, _ = run(capsys, "cf", "--alpha", "3/7")
    doc = json.loads(out)
    assert code == 0
    assert doc["digits"] == [2, 3]
    assert [r["q_n"] for r in doc["levels"]] == [1, 2, 7]
    assert doc["levels"][0]["lambda_n"] == "3/7"
    assert doc["manifest"]["timestamp"] == "2023-11-14T22:13:20Z"


def test_partition_json(capsys):
    code, out, _ = run(capsys, "partition", "--alpha", "14/47", "--level", "0")
    doc = json.loads(out)
    assert code == 0 and doc["string"] == "llls" and doc["reflected_string"] == "slll"
    assert doc["intervals"][0] == {"left": "0/1", "type": "l", "j": 0}


def test_sum_methods_agree(capsys):
    values = {}
    for method in ("direct", "cycles"):
        code, out, _ = run(capsys, "sum", "--alpha", "golden", "--x", "1/3", "--N", "1000",
                           "--method", method)
        assert code == 0
        values[method] = json.loads(out)["sum"]
    assert values["direct"] == pytest.approx(values["cycles"], rel=1e-9)


def test_sum_truncated(capsys):
    code, out, _ = run(capsys, "sum", "--alpha", "golden", "--x", "1/3", "--N", "1000",
                       "--method", "truncated", "--M", "8")
    doc = json.loads(out)
    assert code == 0 and doc["M_orders"] == 8 and doc["eps"] == 0.1


def test_decompose_json(capsys):
    code, out, _ = run(capsys, "decompose", "--alpha", "13/21", "--x", "1/5", "--N", "10")
    doc = json.loads(out)
    assert code == 0 and doc["N"] == 10
    covered = sum(c["r"] for o in doc["orders"] for c in o["cycles"])
    covered += doc["head"][1] - doc["head"][0] + doc["tail"][1] - doc["tail"][0]
    assert covered == 10


def test_cosecant_golden(capsys):
    code, out, _ = run(capsys, "cosecant", "--alpha", "golden", "--N", "100")
    doc = json.loads(out)
    assert code == 0 and doc["alpha"] == "1548008755920/2504730781961"
    assert doc["alpha_note"] == "golden means F_60/F_61"


def test_dist_reproducible(tmp_path, capsys):
    paths = []
    for i, jobs in enumerate(("1", "2")):
        path = tmp_path / f"d{i}.csv"
        code, _, _ = run(capsys, "dist", "--N", "50", "--samples", "500", "--seed", "9",
                         "--out", str(path), "--jobs", jobs)
        assert code == 0
        paths.append(path.read_bytes())
    assert paths[0] == paths[1]
    assert b"--jobs" not in paths[0]


def test_dist_json(tmp_path, capsys):
    path = tmp_path / "d.json"
    code, _, _ = run(capsys, "dist", "--N", "50", "--samples", "300", "--seed", "1", "--complex",
                     "--out", str(path))
    doc = json.loads(path.read_text())
    assert code == 0 and doc["kind"] == "complex" and len(doc["values"]) == 300
    assert doc["manifest"]["seed"] == 1 and doc["meta"]["grid_bits"] == 128


def test_renewal_json(capsys):
    code, out, _ = run(capsys, "renewal", "--N", "100", "--samples", "200", "--M", "1", "--seed", "2")
    doc = json.loads(out)
    assert code == 0 and doc["range_failures"] == 0 and set(doc["entry_freqs"]) == {"-1", "0", "1"}


@pytest.mark.parametrize("argv", [
    ["cf", "--alpha", "0.5"],
    ["cf", "--alpha", "4/3"],
    ["sum", "--alpha", "1/3", "--x", "1/5", "--N", "0"],
    ["nonsense"],
    ["dist", "--N", "10", "--samples", "10", "--seed", "1"],
    ["cosecant", "--alpha", "silver", "--N", "10"],
])
def test_argument_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


def test_domain_error_exit(capsys):
    code, _, err = run(capsys, "sum", "--alpha", "1/2", "--x", "1/2", "--N", "3")
    assert code == 2 and "orbit hits 0" in err


def test_verify_quick(capsys):
    code, out, _ = run(capsys, "verify", "--quick")
    assert code == 0 and "checks passed" in out


def test_verify_failure_exit(monkeypatch, capsys):
    import rotsums.checks

    monkeypatch.setattr(rotsums.checks, "run_suite", lambda quick: [CheckResult("broken", False)])
    code, out, _ = run(capsys, "verify", "--quick")
    assert code == 1 and "FAIL broken" in out


def test_json_floats():
    assert cli.to_json(0.1, None) == "0.10000000000000001"
    assert cli.to_json({"a": [1, 2.5]}, None) == '{"a": [1,2.5]}'
