import json
import subprocess
import sys

import pytest

from freept import cli


def run(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestNc:
    def test_enumerate_json(self, capsys):
        code, out, _ = run(capsys, "nc", "enumerate", "--p", "4", "--format", "json")
        assert code == 0
        parts = json.loads(out)
        assert len(parts) == 14
        assert [[1, 3], [2, 4]] not in parts

    def test_enumerate_text(self, capsys):
        code, out, _ = run(capsys, "nc", "enumerate", "--p", "3")
        assert code == 0 and len(out.splitlines()) == 5

    def test_count(self, capsys):
        code, out, _ = run(capsys, "nc", "count-ccw", "--p", "4", "--blocks", "1,3;2;4", "--n", "2", "--mode", "bruteforce")
        assert code == 0 and out.strip().endswith("N=4")

    def test_count_resource_error(self, capsys):
        code, _, err = run(capsys, "nc", "count-ccw", "--p", "8", "--blocks", "1,2,3,4,5,6,7,8", "--n", "8", "--mode", "bruteforce")
        assert code == 3 and "resource" in err

    def test_domain_error(self, capsys):
        assert run(capsys, "nc", "enumerate", "--p", "0")[0] == 1
        assert run(capsys, "nc", "count-ccw", "--p", "4", "--blocks", "1,3;2,4", "--n", "2")[0] == 1


class TestCalc:
    def test_m2k(self, capsys):
        code, out, _ = run(capsys, "calc", "m2k", "--values", "1,2,5,14")
        assert code == 0
        assert json.loads(out)["values"] == ["1/1"] * 4

    def test_k2m_float(self, capsys):
        code, out, _ = run(capsys, "calc", "k2m", "--values", "0,1.0,0,0")
        d = json.loads(out)
        assert d["mode"] == "float" and d["values"] == [0.0, 1.0, 0.0, 2.0]

    def test_pt_cumulants_file(self, capsys, tmp_path):
        out = tmp_path / "k.json"
        code, stdout, _ = run(
            capsys, "calc", "pt-cumulants", "--n", "2", "--rate", "4", "--jump", "-0.114943", "--order", "6", "--out", str(out)
        )
        assert code == 0 and "wrote" in stdout
        d = json.loads(out.read_text())
        assert d["order"] == 6
        assert d["values"][1] == pytest.approx(4 * 0.114943**2, rel=1e-12)
        assert d["values"][1] == pytest.approx(0.052848, abs=1e-6)

    def test_pt_cumulants_rational_round_trip(self, capsys, tmp_path):
        src = tmp_path / "in.json"
        src.write_text(json.dumps({"kind": "cumulants", "order": 3, "mode": "rational", "values": ["1/2", "1/4", "1/8"]}))
        code, out, _ = run(capsys, "calc", "pt-cumulants", "--n", "2", "--in", str(src))
        assert code == 0 and json.loads(out)["values"] == ["1/2", "1/4", "1/32"]

    def test_density(self, capsys):
        code, out, _ = run(capsys, "calc", "density", "--rate", "1", "--jump", "1", "--grid", "1:2:0.5")
        lines = out.splitlines()
        assert code == 0 and lines[0] == "t,density,converged" and len(lines) == 4
        t, d, c = lines[1].split(",")
        assert float(t) == 1.0 and float(d) == pytest.approx(0.2757, abs=2e-3) and c == "true"

    def test_density_pt_shifted(self, capsys):
        code, out, _ = run(
            capsys, "calc", "density", "--rate", "4", "--jump", "-10/87", "--n", "2", "--shift", "1", "--grid", "-0.5:1.5:0.5"
        )
        assert code == 0
        dens = [float(line.split(",")[1]) for line in out.splitlines()[1:]]
        assert dens[0] < 1e-3 and dens[2] > 0.1

    def test_bad_eps(self, capsys):
        assert run(capsys, "calc", "density", "--rate", "1", "--jump", "1", "--eps", "1")[0] == 1

    def test_bad_grid(self, capsys):
        assert run(capsys, "calc", "density", "--rate", "1", "--jump", "1", "--grid", "1:0:0.1")[0] == 1
        assert run(capsys, "calc", "density", "--rate", "1", "--jump", "1", "--grid", "nonsense")[0] == 2

    def test_missing_input(self, capsys, tmp_path):
        assert run(capsys, "calc", "m2k")[0] == 2
        assert run(capsys, "calc", "m2k", "--in", str(tmp_path / "nope.json"))[0] == 2
        assert run(capsys, "calc", "pt-cumulants", "--n", "2", "--rate", "abc", "--jump", "1")[0] == 2

    def test_no_partial_output_on_error(self, capsys, tmp_path):
        out = tmp_path / "d.csv"
        assert run(capsys, "calc", "density", "--rate", "-1", "--jump", "1", "--out", str(out))[0] == 1
        assert not out.exists()

    def test_unwritable_output(self, capsys, tmp_path):
        assert run(capsys, "calc", "m2k", "--values", "1", "--out", str(tmp_path / "missing" / "x.json"))[0] == 1


class TestSimAndCertify:
    def test_seed_required(self, capsys):
        code, _, err = run(capsys, "sim", "compare", "--ensemble", "gue", "--n", "2", "--N", "10")
        assert code == 2 and "--seed" in err
        assert run(capsys, "certify", "run", "--n", "2", "--rate", "4", "--jump", "-0.1")[0] == 2

    def test_compare(self, capsys, tmp_path):
        out = tmp_path / "cmp.json"
        code, stdout, _ = run(
            capsys, "sim", "compare", "--ensemble", "gue", "--n", "2", "--N", "50", "--seed", "1", "--trials", "4", "--out", str(out)
        )
        assert code == 0 and stdout.split(":")[0] in ("PASS", "FAIL")
        rep = json.loads(out.read_text())
        assert rep["x"]["predicted"] == [0.0, 1.0, 0.0, 2.0]
        assert rep["pt"]["predicted"] == [0.0, 1.0, 0.0, 2.0]
        assert len(rep["x"]["z"]) == 4

    def test_spectrum_export(self, capsys, tmp_path):
        code, _, _ = run(
            capsys, "sim", "spectrum", "--ensemble", "wishart", "--rate", "2", "--n", "2", "--N", "5",
            "--seed", "3", "--trials", "2", "--pt", "--out", str(tmp_path),
        )
        assert code == 0
        csv = (tmp_path / "spectrum_001.csv").read_text().splitlines()
        assert csv[0] == "index,eigenvalue" and len(csv) == 11
        assert json.loads((tmp_path / "spectrum_001.json").read_text())["trial"] == 1

    def test_dimension_cap(self, capsys):
        assert run(capsys, "sim", "compare", "--ensemble", "gue", "--n", "2", "--N", "3000", "--seed", "1")[0] == 3

    def test_window(self, capsys):
        code, out, _ = run(capsys, "certify", "window", "--n", "2", "--rate", "4")
        assert code == 0 and out.strip() == "8.5 9"
        assert run(capsys, "certify", "window", "--n", "2", "--rate", "1")[0] == 1

    def test_certify_run_deterministic(self, capsys, tmp_path):
        argv = ["certify", "run", "--n", "2", "--k", "1", "--rate", "4", "--jump", "-1/8.7", "--N", "20", "--trials", "2", "--seed", "9"]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(capsys, *argv, "--out", str(a))[0] == 0
        assert run(capsys, *argv, "--out", str(b), "--threads", "2")[0] == 0
        assert a.read_bytes() == b.read_bytes()
        assert json.loads(a.read_text())["schema"] == "certReport/1"

    def test_certify_bad_params(self, capsys):
        assert run(capsys, "certify", "run", "--n", "2", "--rate", "4", "--jump", "0.5", "--seed", "1")[0] == 1


class TestConfig:
    def test_flags_override_config(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"schema": "freept/1", "n": 3, "rate": 4}))
        code, out, _ = run(capsys, "certify", "window", "--config", str(cfg))
        lo, hi = map(float, out.split())
        assert lo == pytest.approx(1 / 3 + 8, rel=1e-5) and hi == 9
        code, out, _ = run(capsys, "certify", "window", "--config", str(cfg), "--n", "2")
        assert out.strip() == "8.5 9"

    def test_config_seed(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"ensemble": "gue", "n": 1, "N": 8, "seed": 2, "trials": 2}))
        code, out, _ = run(capsys, "sim", "compare", "--config", str(cfg))
        assert code == 0
        report = json.loads(out[: out.rindex("}") + 1])
        assert report["spec"]["seed"] == 2 and report["trials"] == 2

    def test_bad_config(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"schema": "other/9"}))
        assert run(capsys, "selftest", "--config", str(cfg))[0] == 2
        assert run(capsys, "selftest", "--config", str(tmp_path / "absent.json"))[0] == 2


class TestUsage:
    @pytest.mark.parametrize("argv", [[], ["bogus"], ["nc"], ["nc", "enumerate", "--bogus"], ["calc", "k2m", "--order", "x"]])
    def test_usage_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2 and err

    def test_selftest(self, capsys):
        code, out, _ = run(capsys, "selftest")
        assert code == 0
        assert len(out.splitlines()) == 6 and all(line.startswith("PASS") for line in out.splitlines())

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "freept", "certify", "window", "--n", "2", "--rate", "4"], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.strip() == "8.5 9"
