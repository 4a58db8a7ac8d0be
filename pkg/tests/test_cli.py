import json


from causalfock.cli import main


def run_cli(tmp_path, command, cfg, name="cfg.json", extra=()):
    cfg_path = tmp_path / name
    with open(cfg_path, "w") as fh:
        json.dump(cfg, fh)
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg_path), "--out", str(out),
                 *extra])
    return code, out


def small_scalar_grid_doc():
    return {"species": [{"name": "phi", "statistics": "bose", "mass": 1.0,
                         "spins": [0],
                         "momentum_points": [[0.3, 0, 0], [0.9, 0, 0]],
                         "weights": [0.5, 2.0]}]}


def test_vacpol_zero_row(tmp_path):
    cfg = {"mass": 1.0, "p2_values": [0.0, -0.5, -2.0]}
    code, out = run_cli(tmp_path, "vacpol", cfg)
    assert code == 0
    rows = (out / "vacpol.csv").read_text().strip().splitlines()
    header, first = rows[0], rows[1].split(",")
    assert header == "p2,re,im"
    assert float(first[0]) == 0.0
    assert float(first[1]) == 0.0 and float(first[2]) == 0.0
    report = json.loads((out / "report.json").read_text())
    assert report["results"]["singularity_degree"] == 2
    assert report["library_version"]


def test_empty_scenarios_exit_zero(tmp_path):
    code, out = run_cli(tmp_path, "adiabatic", {"scenarios": []})
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["results"]["scenarios"] == []


def test_adiabatic_expected_mismatch_exit_two(tmp_path):
    # a plus-constant scenario declared as expected-converged must exit 2
    cfg = {"scenarios": [{"name": "bad-expectation",
                          "normalization": "plus-constant",
                          "n_radial": 24, "n_directions": 6,
                          "expected": "converged"}]}
    code, out = run_cli(tmp_path, "adiabatic", cfg)
    assert code == 2
    report = json.loads((out / "report.json").read_text())
    sc = report["results"]["scenarios"][0]
    assert sc["verdict"] == "diverged"
    assert sc["expected"] == "converged"


def test_input_error_exit_one(tmp_path):
    code, _out = run_cli(tmp_path, "split", {"not_a_distribution": 1})
    assert code == 1
    missing = tmp_path / "nope.json"
    code = main(["vacpol", "--config", str(missing),
                 "--out", str(tmp_path / "o2")])
    assert code == 1


def test_split_command(tmp_path):
    cfg = {"distribution": {"density": "exp-decay", "s0": 1.0, "alpha": 2},
           "split_normalization": [0.1],
           "p2_samples": [0.5, 2.0, 5.0]}
    code, out = run_cli(tmp_path, "split", cfg)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["results"]["singularity_degree"] == 2
    assert report["results"]["degree_retarded"] == 2
    assert report["results"]["max_jump_residual"] < 1e-9


def test_wick_check_command(tmp_path):
    cfg = {"grid": small_scalar_grid_doc(),
           "pairs": [{"left": ":phi:", "right": ":phi:"},
                     {"left": ":phi phi:", "right": ":phi:"}],
           "n_compare": 2, "eps": 0.5, "tolerance": 1e-10}
    code, out = run_cli(tmp_path, "wick-check", cfg)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["results"]["all_pass"]


def test_ir_probe_command(tmp_path):
    cfg = {"kernel": "inverse-square",
           "cutoffs": [0.03, 0.01, 0.003, 0.001]}
    code, out = run_cli(tmp_path, "ir-probe", cfg)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert abs(report["results"]["growth_exponent"] - 1.0) < 0.05


def test_gelfand_check_command(tmp_path):
    cfg = {"n_points": 200, "r_max": 5.0}
    code, out = run_cli(tmp_path, "gelfand-check", cfg)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["results"]["eigenvalue_max_err"] < 5e-3
    assert report["results"]["residual_ratio"] > 3.0


def test_decompose_command_and_refusal(tmp_path):
    cfg = {"cases": [
        {"name": "gauss", "fhat": "gaussian", "center": 0.3, "width": 0.8},
        {"name": "bad", "fhat": "delta-prime", "expect_refusal": True},
    ]}
    code, out = run_cli(tmp_path, "decompose-1d", cfg)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    gauss, bad = report["results"]["cases"]
    assert gauss["two_route_error"] < 1e-9
    assert bad["refused"]


def test_determinism_byte_identical(tmp_path):
    cfg = {"mass": 1.0, "p2_values": {"min": -4.0, "max": -0.5, "n": 7}}
    code1, out1 = run_cli(tmp_path, "vacpol", cfg, name="a.json")
    blob1 = (out1 / "report.json").read_bytes()
    csv1 = (out1 / "vacpol.csv").read_bytes()
    # second run into a fresh directory
    cfg_path = tmp_path / "b.json"
    with open(cfg_path, "w") as fh:
        json.dump(cfg, fh)
    out2 = tmp_path / "out2"
    code2 = main(["vacpol", "--config", str(cfg_path), "--out", str(out2),
                  "--seed", "0"])
    assert (code1, code2) == (0, 0)
    assert (out2 / "report.json").read_bytes() == blob1
    assert (out2 / "vacpol.csv").read_bytes() == csv1
