import json

import numpy as np
import pytest

from diracspect.cli import main
from diracspect.core import Potential, load_potential, save_potential
from diracspect.direct_spectra import SpectrumPair


@pytest.fixture
def zero_potential_file(tmp_path):
    path = tmp_path / "zero.json"
    save_potential(Potential.zero(), path)
    return str(path)


@pytest.fixture
def free_spectra_file(tmp_path):
    n = 16
    ns = np.arange(-n, n + 1)
    sp = SpectrumPair(-n, n, np.pi * (ns + 0.5), np.pi * ns, 2.0)
    path = tmp_path / "free.json"
    sp.save(path)
    return str(path)


@pytest.fixture
def violating_spectra_file(tmp_path):
    n = 16
    ns = np.arange(-n, n + 1)
    mu = np.pi * ns.astype(float)
    mu[n + 1] = np.pi + 2.0  # mu_1 past lambda_1: interlacing broken
    sp = SpectrumPair(-n, n, np.pi * (ns + 0.5), mu, 2.0)
    path = tmp_path / "bad.json"
    sp.save(path)
    return str(path)


class TestDirect:
    def test_zero_potential(self, zero_potential_file, tmp_path, capsys):
        out = tmp_path / "spectra.json"
        code = main(["direct", zero_potential_file, "-o", str(out), "-N", "8",
                     "--norming"])
        assert code == 0
        data = json.loads(out.read_text())
        ns = np.arange(-8, 9)
        assert np.max(np.abs(np.array(data["lambda"]) - np.pi * (ns + 0.5))) < 1e-10
        assert np.max(np.abs(np.array(data["mu"]) - np.pi * ns)) < 1e-10
        assert np.max(np.abs(np.array(data["alpha"]) - 1.0)) < 1e-10
        assert "remainders" in capsys.readouterr().out

    def test_missing_file(self, tmp_path, capsys):
        code = main(["direct", str(tmp_path / "nope.json")])
        assert code == 2
        err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert "error" in err and err["error"]["module"]

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"type": "piecewise", "breakpoints": [0, 1]')
        code = main(["direct", str(path)])
        assert code == 2
        err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert err["error"]["condition"]

    def test_csv_output(self, zero_potential_file, tmp_path):
        out = tmp_path / "spectra.csv"
        code = main(["direct", zero_potential_file, "-o", str(out), "-N", "4",
                     "--format", "csv"])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "n,lambda,mu"
        assert len(lines) == 10

    def test_root_failure_exit(self, tmp_path, capsys):
        path = tmp_path / "big.json"
        save_potential(Potential.constant(30.0), path)
        code = main(["direct", str(path), "-N", "0",
                     "-o", str(tmp_path / "o.json")])
        assert code == 3

    def test_determinism(self, zero_potential_file, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        main(["direct", zero_potential_file, "-o", str(a), "-N", "4"])
        main(["direct", zero_potential_file, "-o", str(b), "-N", "4"])
        assert a.read_bytes() == b.read_bytes()


class TestValidate:
    def test_good_file(self, free_spectra_file, tmp_path):
        out = tmp_path / "report.json"
        assert main(["validate", free_spectra_file, "-o", str(out)]) == 0
        assert json.loads(out.read_text())["passed"] is True

    def test_violating_file(self, violating_spectra_file, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main(["validate", violating_spectra_file, "-o", str(out)])
        assert code == 4
        report = json.loads(out.read_text())
        assert report["interlacing_ok"] is False
        err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert "interlacing" in err["error"]["condition"]


class TestInverse:
    def test_free_spectra_give_zero_potential(self, free_spectra_file, tmp_path):
        out = tmp_path / "qhat.json"
        report = tmp_path / "report.json"
        code = main(["inverse", free_spectra_file, "-o", str(out),
                     "--report", str(report), "-M", "32"])
        assert code == 0
        q = load_potential(out)
        assert q.l1_norm < 1e-10
        rep = json.loads(report.read_text())
        assert rep["min_eigenvalue"] > 0.5
        assert rep["krein_residual"] < 1e-10

    def test_violating_file_rejected_before_solve(self, violating_spectra_file,
                                                  tmp_path, capsys):
        code = main(["inverse", violating_spectra_file,
                     "-o", str(tmp_path / "q.json"), "-M", "32"])
        assert code == 4
        text = capsys.readouterr().out
        err = json.loads(text.strip().splitlines()[-1])
        assert "interlacing" in err["error"]["condition"]

    def test_norming_input(self, tmp_path):
        n = 8
        ns = np.arange(-n, n + 1)
        payload = {"n_min": -n, "n_max": n,
                   "lambda": (np.pi * (ns + 0.5)).tolist(),
                   "alpha": np.ones(len(ns)).tolist()}
        path = tmp_path / "norming.json"
        path.write_text(json.dumps(payload))
        out = tmp_path / "q.json"
        code = main(["inverse-norming", str(path), "-o", str(out), "-M", "32"])
        assert code == 0
        assert load_potential(out).l1_norm < 1e-10

    def test_asymmetric_range_rejected(self, tmp_path, capsys):
        payload = {"n_min": 0, "n_max": 2, "lambda": [1.5, 4.6, 7.8],
                   "alpha": [1.0, 1.0, 1.0]}
        path = tmp_path / "asym.json"
        path.write_text(json.dumps(payload))
        code = main(["inverse-norming", str(path),
                     "-o", str(tmp_path / "q.json")])
        assert code == 2
        err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert "symmetric" in err["error"]["detail"]

    def test_h_profile_export(self, free_spectra_file, tmp_path):
        prof = tmp_path / "h.csv"
        code = main(["inverse", free_spectra_file,
                     "-o", str(tmp_path / "q.json"), "-M", "32",
                     "--h-profile", str(prof)])
        assert code == 0
        lines = prof.read_text().strip().splitlines()
        assert lines[0] == "s,a,b"
        assert len(lines) == 1 + 2 * 64  # two cells per grid cell


class TestRoundtrip:
    def test_zero_potential(self, zero_potential_file, tmp_path):
        out = tmp_path / "report.json"
        code = main(["roundtrip", zero_potential_file, "-o", str(out),
                     "-N", "8", "-M", "32",
                     "--lambda-tol", "1e-10", "--alpha-tol", "1e-10",
                     "--l1-tol", "1e-10"])
        assert code == 0
        rep = json.loads(out.read_text())
        assert rep["l1_error"] < 1e-10
        assert rep["max_lambda_error"] < 1e-10
        assert rep["max_alpha_error"] < 1e-10

    def test_threshold_exit(self, zero_potential_file, tmp_path, capsys):
        code = main(["roundtrip", zero_potential_file,
                     "-o", str(tmp_path / "r.json"), "-N", "4", "-M", "32",
                     "--l1-tol", "1e-30"])
        assert code == 6
        err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert "threshold" in err["error"]["condition"]


class TestKernel:
    def test_export(self, tmp_path):
        pot = tmp_path / "q.json"
        save_potential(Potential.constant(1.0), pot)
        out = tmp_path / "kernel.csv"
        report = tmp_path / "kernel-report.json"
        code = main(["kernel", str(pot), "-o", str(out), "-M", "32",
                     "--report", str(report), "--terms", "8"])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "x,t,k11,k12,k21,k22"
        rep = json.loads(report.read_text())
        assert rep["gp_norm"] > 0
        assert rep["terms"] == 8


def test_env_thread_fallback(zero_potential_file, tmp_path, monkeypatch):
    monkeypatch.setenv("DIRAC_SPECT_THREADS", "2")
    code = main(["roundtrip", zero_potential_file,
                 "-o", str(tmp_path / "r.json"), "-N", "4", "-M", "32"])
    assert code == 0
