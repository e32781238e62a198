import json
import subprocess
import sys

import pytest

from frackpp.cli import compare_documents, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


MC_FAST = ["--u0", "constant", "--c", "0.5", "--alpha", "1", "--beta", "2", "--n-paths", "2000", "--t", "0.5"]


class TestMLEval:
    def test_values(self, capsys):
        code, out, _ = run(capsys, "ml-eval", "--alpha", "0.5", "--rho", "one", "--z", "-1, 0.5+0.5j")
        assert code == 0
        doc = json.loads(out)
        values = doc["results"]["values"]
        assert values[0]["value"][0] == pytest.approx(0.4275835761, abs=1e-10)
        assert values[1]["z"] == [0.5, 0.5]
        assert doc["config"]["alpha"] == 0.5

    def test_rho_alpha(self, capsys):
        code, out, _ = run(capsys, "ml-eval", "--alpha", "0.5", "--rho", "alpha", "--z", "0")
        assert json.loads(out)["results"]["values"][0]["value"][0] == pytest.approx(0.5641895835, abs=1e-10)


class TestKernelCheck:
    def test_pass(self, capsys):
        code, out, _ = run(capsys, "kernel-check", "--alpha", "0.5", "--rho", "alpha", "--beta", "1", "--kernel-t", "1")
        assert code == 0
        assert json.loads(out)["results"]["passed"] is True

    def test_invalid_skew(self, capsys):
        code, _, err = run(capsys, "kernel-check", "--beta", "1.5", "--theta", "1.9")
        assert code == 2
        assert "theta" in err


class TestSampleDiag:
    def test_clock_with_csv(self, capsys, tmp_path):
        path = tmp_path / "s.csv"
        code, out, _ = run(
            capsys, "sample-diag", "--sample-kind", "clock", "--alpha", "0.6", "--n-samples", "20000",
            "--output", str(path),
        )
        assert code == 0
        assert json.loads(out)["results"]["ks"]["passed"] is True
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# config")
        assert lines[2] == "index,value" and len(lines) == 3 + 20000

    def test_kernel_without_oracle(self, capsys):
        code, out, _ = run(capsys, "sample-diag", "--beta", "0.8", "--n-samples", "1000")
        assert code == 0
        assert json.loads(out)["results"]["ks"]["oracle"] == "none"


class TestSolve:
    def test_mc_reproducible(self, capsys, tmp_path):
        path = tmp_path / "a.json"
        texts = []
        for _ in range(2):
            assert run(capsys, "solve-mc", *MC_FAST, "--output", str(path))[0] == 0
            texts.append(path.read_text())
        # byte-identical apart from the timestamp line
        strip = [[line for line in text.splitlines() if '"timestamp"' not in line] for text in texts]
        assert strip[0] == strip[1]
        doc = json.loads(texts[0])
        assert doc["config"]["seed"] == 12345
        assert doc["results"]["estimates"][0]["n_paths"] == 2000

    def test_mc_workers_do_not_change_results(self, capsys):
        _, one, _ = run(capsys, "solve-mc", *MC_FAST, "--n-paths", "20000")
        _, four, _ = run(capsys, "solve-mc", *MC_FAST, "--n-paths", "20000", "--workers", "4")
        assert json.loads(one)["results"] == json.loads(four)["results"]

    def test_compare_round_trip(self, capsys, tmp_path):
        mc, ref = tmp_path / "mc.json", tmp_path / "ref"
        args = ["--u0", "constant", "--c", "0.5", "--alpha", "1", "--beta", "2", "--t", "0.5, 1", "--x", "0"]
        assert run(capsys, "solve-mc", *args, "--n-paths", "20000", "--output", str(mc))[0] == 0
        assert run(capsys, "solve-ref", *args, "--halfwidth", "8", "--output", str(ref))[0] == 0
        assert (tmp_path / "ref.csv").exists()
        code, out, _ = run(capsys, "compare", str(mc), str(tmp_path / "ref.json"))
        assert code == 0
        assert json.loads(out)["results"]["passed"] is True

    def test_compare_detects_mismatch(self, capsys, tmp_path):
        mc, ref = tmp_path / "mc.json", tmp_path / "ref"
        base = ["--u0", "constant", "--alpha", "1", "--beta", "2", "--t", "1", "--x", "0"]
        run(capsys, "solve-mc", *base, "--c", "0.5", "--n-paths", "5000", "--output", str(mc))
        run(capsys, "solve-ref", *base, "--c", "0.6", "--halfwidth", "8", "--output", str(ref))
        assert run(capsys, "compare", str(mc), str(tmp_path / "ref.json"))[0] == 3

    def test_trivial_compare(self):
        mc = {"results": {"estimates": [{"t": 1.0, "x": 0.0, "mean": 1.0, "stderr": 0.0}]}}
        ref = {"results": {"points": [{"t": 1.0, "x": 0.0, "u": 1.0, "grid_tolerance": None}]}}
        assert compare_documents(mc, ref)["passed"]

    def test_divergence_exit_code(self, capsys):
        code, _, err = run(
            capsys, "solve-ref", "--u0", "constant", "--c", "3", "--alpha", "1", "--beta", "2", "--t", "1",
            "--halfwidth", "8", "--grid-check", "false",
        )
        assert code == 4
        assert "converge" in err

    def test_leak_exit_code(self, capsys):
        code, _, _ = run(capsys, "solve-ref", "--alpha", "0.5", "--beta", "1", "--halfwidth", "4", "--t", "0.5")
        assert code == 3

    def test_unbounded_exit_code(self, capsys):
        assert run(capsys, "solve-mc", "--u0", "constant", "--c", "1.5", "--n-paths", "10")[0] == 2


class TestConfig:
    def test_print_and_reload(self, capsys, tmp_path):
        code, out, _ = run(capsys, "print-config")
        assert code == 0
        assert "[params]" in out and "alpha = 0.7" in out
        path = tmp_path / "run.ini"
        path.write_text(out.replace("alpha = 0.7", "alpha = 0.4"))
        _, echoed, _ = run(capsys, "print-config", "--config", str(path), "--beta", "1.2")
        assert "alpha = 0.4" in echoed and "beta = 1.2" in echoed

    def test_unknown_key(self, capsys, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[params]\ngamma = 1\n")
        assert run(capsys, "print-config", "--config", str(path))[0] == 2

    def test_bad_flag(self, capsys):
        assert run(capsys, "ml-eval", "--no-such-flag", "1")[0] == 2

    def test_bad_number(self, capsys):
        assert run(capsys, "ml-eval", "--alpha", "abc")[0] == 2

    def test_tabulated_datum(self, capsys, tmp_path):
        table = tmp_path / "u0.csv"
        table.write_text("x,u\n-50,0.5\n50,0.5\n")
        code, out, _ = run(
            capsys, "solve-mc", "--u0", "tabulated", "--u0-file", str(table), "--n-paths", "500", "--alpha", "1",
            "--beta", "2", "--t", "0",
        )
        assert code == 0
        assert json.loads(out)["results"]["estimates"][0]["mean"] == 0.5


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "frackpp.cli", "ml-eval", "--alpha", "1", "--z", "-1"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["values"][0]["value"][0] == pytest.approx(0.3678794412)
