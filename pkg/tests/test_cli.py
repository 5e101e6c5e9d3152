import json
import subprocess
import sys

import pytest

from mmnet import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_bsc_passes(capsys):
    code, out, _ = run(["verify", "--network", "bsc", "--trials", "200"], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["failures"] == 0 and summary["passed"]
    assert {s["name"] for s in summary["suites"]} >= {"renyi", "prop2", "prop3", "prop4", "lemma1", "certificate"}


def test_region_non_member_is_exit_zero(capsys):
    code, out, _ = run(["--command", "region", "--network", "line", "--rates", "5,0,0"], capsys)
    assert code == 0
    assert json.loads(out)["verdict"] == "non-member"


def test_malformed_network_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "nodes": 2,\n  "sources": [1]\n  "destinations": [2]\n}\n')
    code, _, err = run(["verify", "--network", str(bad)], capsys)
    assert code == 2 and "line 4" in err
    bad.write_text(json.dumps({"nodes": 2, "sources": [1], "destinations": [2],
                               "channel": {"form": "dense", "input_sizes": [2, 1], "output_sizes": [1, 2],
                                           "matrix": [[0.9, 0.1], [0.5, 0.6]]}}))
    code, _, err = run(["verify", "--network", str(bad)], capsys)
    assert code == 2 and "channel" in err
    bad.write_text(json.dumps({"nodes": 2, "sources": ["a"], "destinations": [2],
                               "channel": {"form": "erasure", "edges": [[1, 2]], "erasure_probs": 0.5,
                                           "input_sizes": [2, 1]}}))
    code, _, err = run(["verify", "--network", str(bad)], capsys)
    assert code == 2 and "sources[0]" in err


def test_decimal_string_probabilities(tmp_path, capsys):
    net = tmp_path / "bsc.json"
    net.write_text(json.dumps({"nodes": 2, "sources": [1], "destinations": [2],
                               "channel": {"form": "product_links",
                                           "links": [{"from": 1, "to": 2, "matrix": [["0.9", "0.1"], ["0.1", "0.9"]]}]}}))
    code, out, _ = run(["capacity", "--network", str(net)], capsys)
    assert code == 0
    assert json.loads(out)["links"][0]["capacity_bits"] == pytest.approx(0.531004406411, abs=1e-11)
    net.write_text(net.read_text().replace('"0.9"', '"nine"'))
    assert run(["capacity", "--network", str(net)], capsys)[0] == 2


def test_budget_exit_3(capsys):
    code, _, err = run(["tilt", "--network", "line", "--n", "3", "--budget-cells", "100"], capsys)
    assert code == 3 and "budget" in err


def test_budget_env_default(monkeypatch, capsys):
    monkeypatch.setenv(cli.BUDGET_ENV, "50")
    code, _, _ = run(["tilt", "--network", "line", "--n", "2"], capsys)
    assert code == 3
    monkeypatch.setenv(cli.BUDGET_ENV, "lots")
    code, _, _ = run(["tilt", "--network", "line"], capsys)
    assert code == 2


def test_bad_flags_exit_2(capsys):
    assert run(["region", "--network", "line", "--rates", "0.1,0.1,0"], capsys)[0] == 2
    assert run(["region", "--network", "line", "--rates", "x"], capsys)[0] == 2
    assert run(["tilt", "--network", "bsc", "--cuts", "9"], capsys)[0] == 2
    assert run(["capacity", "--network", "bsc", "--format", "csv"], capsys)[0] == 2
    assert run(["--network", "bsc"], capsys)[0] == 2


def test_tilt_and_capacity_outputs(capsys):
    code, out, _ = run(["tilt", "--network", "bsc", "--n", "2", "--lambda", "2", "--seed", "3"], capsys)
    assert code == 0
    t = json.loads(out)
    assert t["lambda"] == 2.0 and t["n"] == 2 and len(t["joints"]) == 2
    code, out, _ = run(["capacity", "--network", "line"], capsys)
    caps = json.loads(out)
    assert caps["links"][0]["capacity_bits"] == pytest.approx(0.531004406411, abs=1e-11)


def test_simulate_byte_identical(tmp_path, capsys):
    args = ["simulate", "--network", "bec", "--rates", "0.25,0.75", "--n", "4", "--seeds", "0,1,2", "--no-timing"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "rate_bits,n,method,error,ci_half_width,seed,cell_runtime_ms"
    assert lines[1] == "0.25,4,exact,0.0625,0,1,0"


def test_failed_check_exit_1(monkeypatch, capsys):
    from mmnet import suites

    def broken(*a, **k):
        r = suites.SuiteResult("broken")
        r.record(-1.0, 0.0, "forced")
        return [r]

    monkeypatch.setattr(suites, "run_all", broken)
    code, out, err = run(["verify", "--network", "bsc"], capsys)
    assert code == 1 and "forced" in err
    assert json.loads(out)["failures"] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mmnet", "region", "--network", "bsc", "--rates", "0.1,0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["verdict"] == "member"
