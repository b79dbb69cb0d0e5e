import json

import pytest

from gausspf.cli import EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, RunConfig, UsageError, main


def run(tmp_path, name, *argv):
    out = tmp_path / name
    return main([*argv, "--out-dir", str(out)]), out


def records(out):
    lines = (out / "record.txt").read_text().splitlines()
    return dict(l.split(" = ", 1) for l in lines if not l.startswith("#"))


def test_invariant_density_closed_form(tmp_path):
    code, out = run(tmp_path, "d", "invariant-density", "--beta", "3", "--n-cells", "1024")
    assert code == EXIT_OK
    rec = records(out)
    assert rec["status"] == "pass" and float(rec["l1_to_closed_form"]) < 1e-3
    assert (out / "density.csv").exists()


def test_spectrum_and_orbit(tmp_path):
    code, out = run(tmp_path, "s", "spectrum", "--gamma", "1", "--n-cells", "512")
    assert code == EXIT_OK and records(out)["n_peripheral"] == "1"
    code, out = run(tmp_path, "o", "orbit", "--beta", "2", "--x0", "0.3", "--steps", "10")
    assert code == EXIT_OK
    assert len((out / "orbit.csv").read_text().splitlines()) > 10


def test_singular_measure_commands(tmp_path):
    code, out = run(tmp_path, "m", "minkowski", "--n-samples", "10", "--seed", "3")
    assert code == EXIT_OK and records(out)["q_half"] == "0.5"
    code, out = run(tmp_path, "p", "periodic-points", "--k-max", "2", "--quotient-max", "3")
    assert code == EXIT_OK and records(out)["n_orbits"] == "6"


def test_annihilator_small_budget(tmp_path):
    code, out = run(tmp_path, "a", "annihilator", "--beta", "2", "--n-cells", "1024",
                    "--n-cells-f2", "1024", "--j-trunc", "2000", "--n-max", "5",
                    "--tol", "1e-4")
    # a reduced budget: the default one reaches 1e-6, see test_acceptance
    assert code == EXIT_OK
    assert float(records(out)["max_family_x"]) < 1e-4
    code, _ = run(tmp_path, "t", "annihilator", "--beta", "2", "--n-cells", "64",
                  "--n-cells-f2", "64", "--j-trunc", "50", "--n-max", "3", "--tol", "1e-14")
    assert code == EXIT_TOLERANCE


def test_usage_errors(tmp_path, capsys):
    assert run(tmp_path, "u1", "annihilator", "--beta", "0.5")[0] == EXIT_USAGE
    assert run(tmp_path, "u2", "spectrum", "--beta", "2", "--gamma", "2")[0] == EXIT_USAGE
    assert run(tmp_path, "u3", "orbit", "--beta", "2", "--x0", "3")[0] == EXIT_USAGE
    assert run(tmp_path, "u4", "annihilator", "--beta", "2", "--shape", "nope")[0] == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == EXIT_USAGE


def test_config_round_trip(tmp_path):
    cfg = RunConfig(command="spectrum", parameter=2.0, n_cells=256, seed=9)
    assert RunConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(UsageError):
        RunConfig.from_json(json.dumps({"bogus": 1}))
    saved = tmp_path / "cfg.json"
    code, a = run(tmp_path, "a", "spectrum", "--beta", "2", "--n-cells", "256",
                  "--save-config", str(saved))
    assert code == EXIT_OK
    code, b = run(tmp_path, "b", "spectrum", "--config", str(saved))
    assert code == EXIT_OK
    assert (a / "eigenvalues.csv").read_bytes() == (b / "eigenvalues.csv").read_bytes()


def test_outputs_are_deterministic(tmp_path):
    args = ("minkowski", "--n-samples", "20", "--seed", "7")
    _, a = run(tmp_path, "r1", *args)
    _, b = run(tmp_path, "r2", *args)
    for name in ("minkowski.csv", "invariance.csv", "record.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    _, c = run(tmp_path, "r3", "minkowski", "--n-samples", "20", "--seed", "8")
    assert (a / "invariance.csv").read_bytes() != (c / "invariance.csv").read_bytes()
