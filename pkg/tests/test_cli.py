import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from freeutil.model import FreeUtilError
from freeutil.problemio import dumps, load, loads

GOLDEN = Path(__file__).parent / "golden"
LN2 = math.log(2.0)

VALID_GOLDENS = sorted(p.name for p in GOLDEN.glob("*.json") if not p.name.startswith("invalid_"))
INVALID_GOLDENS = sorted(p.name for p in GOLDEN.glob("invalid_*.json"))


def run_cli(*args, seed=None):
    env = dict(os.environ)
    env.pop("FREEUTIL_SEED", None)
    if seed is not None:
        env["FREEUTIL_SEED"] = seed
    return subprocess.run(
        [sys.executable, "-m", "freeutil", *[str(a) for a in args]],
        capture_output=True,
        text=True,
        env=env,
    )


def solve_doc(*args):
    result = run_cli("solve", *args)
    assert result.returncode == 0, result.stderr
    return json.loads(result.stdout)


# ---------------------------------------------------------------------------
# file format


@pytest.mark.parametrize("name", VALID_GOLDENS)
def test_load_serialize_load_is_identity(name):
    first = dumps(load(str(GOLDEN / name)))
    assert dumps(loads(first)) == first


@pytest.mark.parametrize("name", INVALID_GOLDENS)
def test_malformed_files_rejected_at_load(name):
    with pytest.raises(FreeUtilError):
        load(str(GOLDEN / name))


@pytest.mark.parametrize("name", INVALID_GOLDENS)
def test_malformed_files_exit_2(name):
    result = run_cli("solve", GOLDEN / name)
    assert result.returncode == 2
    assert result.stdout == ""
    # diagnostic names the violated invariant, e.g. "NegativeProbability: ..."
    assert ":" in result.stderr.strip()


def test_missing_file_exits_2():
    result = run_cli("solve", "/no/such/problem.json")
    assert result.returncode == 2
    assert "No such file" in result.stderr


# ---------------------------------------------------------------------------
# solve: control


def test_solve_control_document():
    doc = solve_doc(GOLDEN / "control_basic.json")
    assert list(doc) == [
        "command", "kind", "alpha", "policy", "value", "log_partition",
        "expected_utility", "information_cost", "achieved_kl", "total", "units",
    ]
    assert doc["command"] == "solve" and doc["kind"] == "control"
    assert doc["alpha"] == "1" and doc["units"] == "nats"
    assert doc["policy"]["a"] == pytest.approx(1 / 3, abs=1e-12)
    assert doc["policy"]["b"] == pytest.approx(2 / 3, abs=1e-12)
    assert doc["value"] == pytest.approx(math.log(1.5), abs=1e-12)
    assert doc["total"] == pytest.approx(doc["value"], abs=1e-12)


def test_solve_alpha_flag_overrides_file():
    doc = solve_doc(GOLDEN / "control_basic.json", "--alpha", "2")
    assert doc["alpha"] == "2"
    assert doc["value"] == pytest.approx(2 * math.log((1 + math.sqrt(2)) / 2), abs=1e-12)


def test_solve_infinite_alpha_returns_prior():
    doc = solve_doc(GOLDEN / "control_alpha_inf.json")
    assert doc["alpha"] == "inf"
    assert doc["policy"] == {"up": 0.25, "down": 0.75}
    assert doc["value"] == -2.5
    assert doc["achieved_kl"] == 0.0 and doc["information_cost"] == 0.0


def test_solve_constant_utility_returns_prior():
    doc = solve_doc(GOLDEN / "control_constants.json")
    assert doc["policy"] == {"a": 0.2, "b": 0.3, "c": 0.5}
    assert doc["value"] == pytest.approx(3.0, abs=1e-12)


def test_solve_keeps_prior_zeros():
    doc = solve_doc(GOLDEN / "control_zero_prior.json")
    assert doc["policy"]["c"] == 0.0


def test_solve_control_rejects_mu_flag():
    result = run_cli("solve", GOLDEN / "control_basic.json", "--mu", "1")
    assert result.returncode == 2


def test_solve_control_rejects_alpha_and_lambda_together():
    result = run_cli("solve", GOLDEN / "control_basic.json", "--alpha", "1", "--lambda", "1")
    assert result.returncode == 2


def test_solve_negative_alpha_is_input_error():
    assert run_cli("solve", GOLDEN / "control_alpha_negative.json").returncode == 2
    assert run_cli("solve", GOLDEN / "control_basic.json", "--alpha=-1").returncode == 2


# ---------------------------------------------------------------------------
# solve: two-stage


def test_solve_two_stage_document():
    doc = solve_doc(GOLDEN / "two_stage_basic.json")
    assert list(doc) == [
        "command", "kind", "lambda", "mu", "regime", "action_policy",
        "outcome_beliefs", "values", "value", "log_z1", "log_z2",
        "achieved_c1", "achieved_c2", "units",
    ]
    assert doc["lambda"] == "1" and doc["mu"] == "1"
    assert doc["regime"] == "risk-seeking-bounded"
    assert doc["achieved_c1"] >= 0.0 and doc["achieved_c2"] >= 0.0
    assert sum(doc["action_policy"].values()) == pytest.approx(1.0, abs=1e-12)


def test_solve_file_temperatures_match_flags():
    from_file = run_cli("solve", GOLDEN / "two_stage_temps.json")
    from_flags = run_cli(
        "solve", GOLDEN / "two_stage_basic.json", "--lambda", "2", "--mu", "0.7"
    )
    assert from_file.returncode == from_flags.returncode == 0
    assert from_file.stdout == from_flags.stdout


def test_solve_robust_limit_from_file_temperatures():
    doc = solve_doc(GOLDEN / "two_stage_mu_neginf.json")
    assert doc["regime"] == "robust"
    assert doc["action_policy"] == {"safe": 1.0, "risky": 0.0}
    assert doc["value"] == 2.0


def test_solve_lambda_zero_is_solver_error():
    result = run_cli("solve", GOLDEN / "two_stage_lambda_zero.json")
    assert result.returncode == 3
    assert "UnsupportedRegime" in result.stderr


# ---------------------------------------------------------------------------
# solve: trees


def test_solve_tree_chain_adds_edge_utilities():
    doc = solve_doc(GOLDEN / "tree_chain.json")
    assert doc["kind"] == "tree"
    assert doc["value"] == pytest.approx(6.0, abs=1e-12)
    assert doc["node_values"]["root/a/b/c"] == 0.0


def test_solve_tree_hard_max_limit():
    doc = solve_doc(GOLDEN / "tree_binary.json", "--lambda", "inf", "--mu", "inf")
    assert doc["regime"] == "optimistic"
    assert doc["value"] == pytest.approx(4.0, abs=1e-12)
    assert doc["node_policies"]["root"] == {"a": 0.5, "b": 0.5}  # exact tie


def test_solve_tree_lambda_zero_is_solver_error():
    result = run_cli("solve", GOLDEN / "tree_chain.json", "--lambda", "zero")
    assert result.returncode == 3


# ---------------------------------------------------------------------------
# output handling


def test_output_flag_writes_stdout_bytes_to_file(tmp_path):
    target = tmp_path / "doc.json"
    direct = run_cli("solve", GOLDEN / "control_basic.json")
    routed = run_cli("solve", GOLDEN / "control_basic.json", "--output", target)
    assert routed.returncode == 0 and routed.stdout == ""
    assert target.read_text() == direct.stdout


def test_unwritable_output_exits_2():
    result = run_cli(
        "solve", GOLDEN / "control_basic.json", "--output", "/no/such/dir/out.json"
    )
    assert result.returncode == 2


def test_repeated_runs_are_byte_identical():
    for args in (
        ("solve", GOLDEN / "two_stage_basic.json"),
        ("regimes", GOLDEN / "two_stage_basic.json"),
        ("sweep", GOLDEN / "control_basic.json", "--param", "alpha", "--grid", "0.5,1,2"),
    ):
        first, second = run_cli(*args), run_cli(*args)
        assert first.returncode == second.returncode == 0
        assert first.stdout == second.stdout


# ---------------------------------------------------------------------------
# sweep


def test_sweep_control_csv_shape_and_kl_monotone():
    result = run_cli(
        "sweep", GOLDEN / "control_basic.json",
        "--param", "alpha", "--grid", "0.25,0.5,1,2,inf",
    )
    assert result.returncode == 0
    lines = result.stdout.strip().split("\n")
    assert lines[0] == "alpha,p[a],p[b],value,achieved_kl"
    assert len(lines) == 6
    assert [row.split(",")[0] for row in lines[1:]] == ["0.25", "0.5", "1", "2", "inf"]
    kls = [float(row.split(",")[4]) for row in lines[1:]]
    assert all(a >= b - 1e-15 for a, b in zip(kls, kls[1:]))
    assert kls[-1] == 0.0


def test_sweep_single_point_matches_solve():
    doc = solve_doc(GOLDEN / "control_basic.json")
    result = run_cli(
        "sweep", GOLDEN / "control_basic.json", "--param", "alpha", "--grid", "1"
    )
    row = result.stdout.strip().split("\n")[1].split(",")
    assert float(row[1]) == doc["policy"]["a"]
    assert float(row[2]) == doc["policy"]["b"]
    assert float(row[3]) == doc["value"]
    assert float(row[4]) == doc["achieved_kl"]


def test_sweep_mu_value_nondecreasing():
    result = run_cli(
        "sweep", GOLDEN / "two_stage_basic.json",
        "--param", "mu", "--grid=-inf,-2,-0.5,zero,0.5,2,inf",
        "--lambda", "inf",
    )
    assert result.returncode == 0
    lines = result.stdout.strip().split("\n")
    assert lines[0] == "mu,p[safe],p[risky],value,achieved_c1,achieved_c2"
    values = [float(row.split(",")[3]) for row in lines[1:]]
    assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))


def test_sweep_tree_lambda():
    result = run_cli(
        "sweep", GOLDEN / "tree_binary.json",
        "--param", "lambda", "--grid", "0.5,1,inf", "--mu", "inf",
    )
    assert result.returncode == 0
    lines = result.stdout.strip().split("\n")
    assert lines[0] == "lambda,p[a],p[b],value,achieved_kl"
    assert float(lines[-1].split(",")[3]) == pytest.approx(4.0, abs=1e-12)


def test_sweep_parameter_mismatches_exit_2():
    assert run_cli(
        "sweep", GOLDEN / "two_stage_basic.json", "--param", "alpha", "--grid", "1"
    ).returncode == 2
    assert run_cli(
        "sweep", GOLDEN / "control_basic.json", "--param", "mu", "--grid", "1"
    ).returncode == 2


def test_sweep_invalid_grid_values_exit_2():
    assert run_cli(
        "sweep", GOLDEN / "control_basic.json", "--param", "alpha", "--grid", "1,-1"
    ).returncode == 2
    assert run_cli(
        "sweep", GOLDEN / "two_stage_basic.json", "--param", "lambda", "--grid", "-3"
    ).returncode == 2
    assert run_cli(
        "sweep", GOLDEN / "control_basic.json", "--param", "alpha", "--grid", ","
    ).returncode == 2


# ---------------------------------------------------------------------------
# regimes


def test_regimes_sections_in_canonical_order():
    result = run_cli("regimes", GOLDEN / "two_stage_basic.json")
    assert result.returncode == 0
    doc = json.loads(result.stdout)
    assert doc["mu_risk"] == "-1"
    labels = [s["regime"] for s in doc["sections"]]
    assert labels == ["risk-seeking-bounded", "risk-neutral", "risk-averse", "robust"]
    chosen = [s["chosen_action"] for s in doc["sections"]]
    assert chosen == ["risky", "risky", "safe", "safe"]
    assert doc["sections"][1]["value"] == pytest.approx(3.0, abs=1e-12)
    assert doc["sections"][3]["value"] == pytest.approx(2.0, abs=1e-12)


def test_regimes_custom_risk_point():
    result = run_cli("regimes", GOLDEN / "two_stage_basic.json", "--mu", "-2")
    doc = json.loads(result.stdout)
    averse = doc["sections"][2]
    assert averse["mu"] == "-2"
    assert averse["value"] == pytest.approx(2.1899426, abs=1e-6)


def test_regimes_rejects_bad_targets():
    assert run_cli("regimes", GOLDEN / "control_basic.json").returncode == 2
    assert run_cli("regimes", GOLDEN / "two_stage_basic.json", "--mu", "zero").returncode == 2
    assert run_cli("regimes", GOLDEN / "two_stage_basic.json", "--mu", "1").returncode == 2
    assert run_cli("regimes", GOLDEN / "two_stage_basic.json", "--mu", "-inf").returncode == 2


# ---------------------------------------------------------------------------
# units


def test_bits_rescale_only_relative_entropy_fields():
    nats = solve_doc(GOLDEN / "control_basic.json")
    bits = solve_doc(GOLDEN / "control_basic.json", "--units", "bits")
    assert bits["units"] == "bits"
    assert bits["achieved_kl"] == pytest.approx(nats["achieved_kl"] / LN2, rel=1e-12)
    assert bits["information_cost"] == pytest.approx(nats["information_cost"] / LN2, rel=1e-12)
    for key in ("policy", "value", "expected_utility", "log_partition"):
        assert bits[key] == nats[key]


def test_bits_rescale_sweep_kl_column():
    base = ("sweep", GOLDEN / "control_basic.json", "--param", "alpha", "--grid", "0.5")
    nats_row = run_cli(*base).stdout.strip().split("\n")[1].split(",")
    bits_row = run_cli(*base, "--units", "bits").stdout.strip().split("\n")[1].split(",")
    assert float(bits_row[4]) == pytest.approx(float(nats_row[4]) / LN2, rel=1e-12)
    assert bits_row[3] == nats_row[3]


# ---------------------------------------------------------------------------
# verify


def test_verify_suite_passes_and_repeats_bytes():
    first = run_cli("verify", "--suite", "control-optimality", seed="7")
    second = run_cli("verify", "--suite", "control-optimality", seed="7")
    assert first.returncode == 0
    assert first.stdout == second.stdout
    doc = json.loads(first.stdout)
    assert doc["seed"] == "7"
    assert doc["passed"] is True
    assert all(c["passed"] and c["gap"] <= c["tolerance"] for c in doc["certificates"])


def test_verify_seed_defaults_to_zero():
    doc = json.loads(run_cli("verify", "--suite", "limit-recovery").stdout)
    assert doc["seed"] == "0"


def test_verify_perturbation_trips_every_certificate():
    result = run_cli("verify", "--suite", "control-optimality", "--perturb", "0.001")
    assert result.returncode == 4
    doc = json.loads(result.stdout)
    assert doc["passed"] is False
    assert doc["perturbation"] == 0.001
    assert all(not c["passed"] for c in doc["certificates"])


def test_verify_file_control():
    result = run_cli("verify", GOLDEN / "control_basic.json")
    assert result.returncode == 0
    doc = json.loads(result.stdout)
    assert doc["file"].endswith("control_basic.json")
    assert doc["passed"] is True
    assert [c["name"] for c in doc["certificates"]] == ["file/control/objective-gap"]
    for cert in doc["certificates"]:
        assert list(cert) == [
            "name", "analytic", "oracle", "gap", "tolerance", "passed", "note"
        ]


def test_verify_file_control_with_dead_outcomes():
    result = run_cli("verify", GOLDEN / "control_zero_prior.json")
    assert result.returncode == 0
    doc = json.loads(result.stdout)
    names = [c["name"] for c in doc["certificates"]]
    assert names == [
        "file/control/objective-gap",
        "file/control/support-preservation",
    ]
    assert doc["passed"] is True


def test_verify_file_two_stage():
    result = run_cli("verify", GOLDEN / "two_stage_basic.json")
    assert result.returncode == 0
    assert json.loads(result.stdout)["passed"] is True


def test_verify_file_tree():
    result = run_cli("verify", GOLDEN / "tree_chain.json")
    assert result.returncode == 0
    assert json.loads(result.stdout)["passed"] is True


def test_verify_oversized_problems_exit_2():
    assert run_cli("verify", GOLDEN / "control_five_outcomes.json").returncode == 2
    assert run_cli("verify", GOLDEN / "two_stage_3x4.json").returncode == 2


def test_verify_infinite_alpha_file_exit_2():
    assert run_cli("verify", GOLDEN / "control_alpha_inf.json").returncode == 2


def test_verify_lambda_zero_file_runs_applicable_certs():
    # The lattice check needs finite temperatures; only the worst-case
    # certificate applies here, and it does not touch lambda.
    result = run_cli("verify", GOLDEN / "two_stage_lambda_zero.json")
    assert result.returncode == 0
    doc = json.loads(result.stdout)
    assert [c["name"] for c in doc["certificates"]] == [
        "file/two-stage/minimax-agreement"
    ]


def test_verify_needs_exactly_one_target():
    assert run_cli("verify").returncode == 2
    assert run_cli(
        "verify", GOLDEN / "control_basic.json", "--suite", "control-optimality"
    ).returncode == 2
