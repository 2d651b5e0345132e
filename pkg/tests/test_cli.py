"""Command-line driver: exit codes, artifacts, determinism.

Commands run in-process through main() so exit codes and stdout are captured
without subprocess overhead. The sweep smoke test uses a two-mode contraction
cycle whose resets hand the state from one guard ray to the other scaled by
2 - C; composing the two jump conditions around the cycle forces
r^2 >= (2 - C)^4, so certification flips at C = 2 - sqrt(r) no matter the
degree, which makes the bisection fast and its outcome predictable.
"""

import json

import pytest

from zenocert.cli import main

CROSSQUAD = {
    "name": "crossquad",
    "variables": ["x1", "x2"],
    "constants": {"C": 2.0},
    "param_bound_constant": "C",
    "modes": [
        {"id": 1, "domain": ["x1", "x2"], "field": ["-x1", "-x2"],
         "neighborhood": [{"expr": "1 - x1^2 - x2^2", "strict": True}],
         "anchor": [0.0, 0.0]},
        {"id": 2, "domain": ["x1", "x2"], "field": ["-x1", "-x2"],
         "neighborhood": [{"expr": "1 - x1^2 - x2^2", "strict": True}],
         "anchor": [0.0, 0.0]},
    ],
    "edges": [
        {"from": 1, "to": 2, "guard_eq": "x2", "guard_ineq": ["x1"],
         "reset": ["0", "(2 - C)*x1"]},
        {"from": 2, "to": 1, "guard_eq": "x1", "guard_ineq": ["x2"],
         "reset": ["(2 - C)*x2", "0"]},
    ],
}


@pytest.fixture()
def crossquad_file(tmp_path):
    path = tmp_path / "crossquad.json"
    path.write_text(json.dumps(CROSSQUAD))
    return path


@pytest.fixture(scope="module")
def ball_cert_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ball_cert")
    code = main(["certify", "bouncing-ball", "--degree", "4",
                 "--output", str(out)])
    assert code == 0
    return out


class TestValidate:
    def test_bundled_name_resolves(self, capsys):
        assert main(["validate", "bouncing-ball"]) == 0
        out = capsys.readouterr().out
        assert "valid" in out
        assert "cycle order 1" in out

    def test_parametric_system_reports_box(self, capsys):
        assert main(["validate", "example2"]) == 0
        out = capsys.readouterr().out
        assert "p1 in [2" in out

    def test_missing_file(self, capsys):
        assert main(["validate", "missing.json"]) == 1
        assert "not found" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"variables\": [")
        assert main(["validate", str(bad)]) == 1
        err = capsys.readouterr().err
        assert "line" in err and "col" in err

    def test_structurally_invalid_system(self, tmp_path, capsys):
        broken = dict(CROSSQUAD, edges=[CROSSQUAD["edges"][0]])
        bad = tmp_path / "open_chain.json"
        bad.write_text(json.dumps(broken))
        assert main(["validate", str(bad)]) == 1


class TestCertify:
    def test_success_writes_certificate_and_manifest(self, ball_cert_dir):
        cert = ball_cert_dir / "bouncing-ball-d4.cert.json"
        manifest = ball_cert_dir / "run_manifest.json"
        assert cert.exists() and manifest.exists()
        man = json.loads(manifest.read_text())
        assert man["command"] == "certify"
        assert man["seed"] == 0
        assert len(man["input_hash"]) >= 16

    def test_certificates_are_byte_identical(self, ball_cert_dir, tmp_path):
        again = tmp_path / "again"
        assert main(["certify", "bouncing-ball", "--degree", "4",
                     "--output", str(again)]) == 0
        a = (ball_cert_dir / "bouncing-ball-d4.cert.json").read_bytes()
        b = (again / "bouncing-ball-d4.cert.json").read_bytes()
        assert a == b

    def test_infeasible_exit_and_report(self, crossquad_file, tmp_path,
                                        capsys):
        out = tmp_path / "fail"
        code = main(["certify", str(crossquad_file), "--degree", "2",
                     "--param-bound", "0.6", "--output", str(out)])
        assert code == 2
        assert "no certificate" in capsys.readouterr().out
        report = json.loads(
            (out / "crossquad-d2-failure.json").read_text())
        assert report["status"] == "FAILED"
        assert report["probes"]

    def test_missing_system_file(self, capsys):
        assert main(["certify", "missing.json"]) == 1


class TestCheck:
    def test_fresh_certificate_passes(self, ball_cert_dir, tmp_path, capsys):
        cert = ball_cert_dir / "bouncing-ball-d4.cert.json"
        code = main(["check", str(cert), "bouncing-ball",
                     "--output", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "verification PASSED" in out
        assert (tmp_path / "bouncing-ball-verification.json").exists()

    def test_tampered_coefficient_fails_with_exit_3(self, ball_cert_dir,
                                                    tmp_path, capsys):
        cert = json.loads(
            (ball_cert_dir / "bouncing-ball-d4.cert.json").read_text())
        q = next(iter(cert["vs"]))
        cert["vs"][q] = cert["vs"][q].replace("x1^2", "x1^2 + 0.01*x1^2", 1)
        bad = tmp_path / "tampered.cert.json"
        bad.write_text(json.dumps(cert))
        code = main(["check", str(bad), "bouncing-ball",
                     "--output", str(tmp_path)])
        assert code == 3
        out = capsys.readouterr().out
        assert "verification FAILED" in out
        assert "differs from witness" in out

    def test_wrong_system_is_an_input_error(self, ball_cert_dir, tmp_path,
                                            capsys):
        cert = ball_cert_dir / "bouncing-ball-d4.cert.json"
        code = main(["check", str(cert), "example1",
                     "--output", str(tmp_path)])
        assert code == 1
        assert "issued for" in capsys.readouterr().err


class TestSimulate:
    def test_artifacts_and_classification(self, tmp_path, capsys):
        code = main(["simulate", "bouncing-ball", "--x0", "1.0,0.0",
                     "--output", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "classification: Zeno" in out
        assert (tmp_path / "bouncing-ball-trajectory.csv").exists()
        assert (tmp_path / "bouncing-ball-portrait.svg").exists()
        summary = json.loads(
            (tmp_path / "bouncing-ball-classification.json").read_text())
        assert summary["diagnostics"]["classification"] == "Zeno"
        assert summary["termination"] == "AnchorConvergence"

    def test_csv_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["simulate", "bouncing-ball", "--x0", "1.0,0.0",
                         "--output", str(out)]) == 0
        assert (a / "bouncing-ball-trajectory.csv").read_bytes() == \
            (b / "bouncing-ball-trajectory.csv").read_bytes()

    def test_parametric_run(self, tmp_path, capsys):
        code = main(["simulate", "example2", "--x0", "0.3,0.0",
                     "--params", "0.4", "--output", str(tmp_path)])
        assert code == 0
        assert "Divergent" in capsys.readouterr().out

    def test_initial_state_outside_domain(self, tmp_path, capsys):
        code = main(["simulate", "bouncing-ball", "--x0=-1.0,0.0",
                     "--output", str(tmp_path)])
        assert code == 1
        assert "outside" in capsys.readouterr().err


class TestSweep:
    def test_threshold_found(self, crossquad_file, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = main(["sweep", str(crossquad_file), "--degrees", "2",
                     "--bracket", "0.6", "1.6", "--tolerance", "0.2",
                     "--output", str(out)])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "certified" in stdout
        rows = (out / "crossquad-sweep.csv").read_text().splitlines()
        assert rows[0] == "degree,bound,probes,certified,message"
        fields = rows[1].split(",")
        assert fields[0] == "2"
        bound = float(fields[1])
        # true flip is at 2 - sqrt(0.99); the bound lands within one
        # tolerance above it
        assert 1.0 < bound <= 1.21
        assert (out / "crossquad-sweep.json").exists()
        assert (out / "run_manifest.json").exists()

    def test_reversed_bracket(self, crossquad_file, capsys):
        code = main(["sweep", str(crossquad_file), "--degrees", "2",
                     "--bracket", "1.6", "0.6"])
        assert code == 2
        assert "not increasing" in capsys.readouterr().err

    def test_infeasible_upper_endpoint(self, crossquad_file, tmp_path,
                                       capsys):
        out = tmp_path / "sweep"
        code = main(["sweep", str(crossquad_file), "--degrees", "2",
                     "--bracket", "0.2", "0.6", "--tolerance", "0.2",
                     "--output", str(out)])
        assert code == 2
        assert "invalid bracket" in capsys.readouterr().out

    def test_undeclared_scalar(self, capsys):
        code = main(["sweep", "bouncing-ball", "--degrees", "2",
                     "--bracket", "0.5", "1.5"])
        assert code == 1
        assert "not declared" in capsys.readouterr().err
