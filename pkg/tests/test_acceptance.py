"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines; the same
checks back the ``monarchbench verify`` subcommand. Criterion 8 is implemented
at its stated shape (4, 6, 8) where no Monarch configuration reaches the
stated density bound; it fails with the blocking analysis (see the companion
test at a feasible shape, and the project notes).
"""

import subprocess
import sys
import warnings
from pathlib import Path

import pytest

from monarchbench import cli as cli_module
from monarchbench.layout import VideoShape
from monarchbench.verify import (
    CheckResult,
    check_alignment,
    check_containment,
    check_dense_degenerate,
    check_matched_budget,
    check_iterations,
    check_param_accounting,
    check_projection_optimality,
    check_row_stochastic,
    check_solver_oracle,
    check_strictness,
    check_aligned_blockwise_rank1,
    check_top_p,
)

CRITERIA = {
    1: check_aligned_blockwise_rank1,
    2: check_containment,
    3: check_strictness,
    4: check_solver_oracle,
    5: check_dense_degenerate,
    6: check_row_stochastic,
    7: check_projection_optimality,
    8: check_matched_budget,
    9: check_alignment,
    10: check_iterations,
    11: check_top_p,
    12: check_param_accounting,
}


@pytest.fixture(scope="module")
def results() -> dict[int, CheckResult]:
    out: dict[int, CheckResult] = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # criterion 10 monotonicity is warn-only
        for number, fn in CRITERIA.items():
            out[number] = fn()
    return out


def report(number: int, result: CheckResult) -> None:
    status = "PASS" if result.passed else "FAIL"
    print(f"{status} criterion {number} [{result.name}] ({result.seconds:.2f}s): {result.detail}")
    assert result.passed, f"criterion {number}: {result.detail}"


def test_criterion_01_aligned_blockwise_rank1(results):
    report(1, results[1])


def test_criterion_02_containment(results):
    report(2, results[2])


def test_criterion_03_strictness(results):
    report(3, results[3])


def test_criterion_04_solver_oracle_equivalence(results):
    report(4, results[4])


def test_criterion_05_dense_degenerate_exactness(results):
    report(5, results[5])


def test_criterion_06_row_stochasticity(results):
    report(6, results[6])


def test_criterion_07_projection_optimality(results):
    report(7, results[7])


def test_criterion_08_matched_budget_contest(results):
    # Stated shape (4,6,8): the minimum Monarch factor density is
    # (24+8)/192 = 1/6 > 0.12, so no configuration can be matched at the
    # stated budget; this fails by construction and the analysis is recorded
    # in the project notes. The companion test below runs the identical
    # contest at a shape where the stated budget is feasible.
    report(8, results[8])


def test_criterion_08_companion_feasible_shape():
    result = check_matched_budget(VideoShape(4, 6, 16), max_density=0.12, seeds=40)
    report(8, result)


def test_criterion_09_alignment_ablation(results):
    report(9, results[9])


def test_criterion_10_iteration_ablation(results):
    report(10, results[10])


def test_criterion_11_top_p_coverage(results):
    report(11, results[11])


def test_criterion_12_param_accounting(results):
    report(12, results[12])


def test_criterion_13_cli_determinism_and_verify_exit(results, tmp_path, monkeypatch, capsys):
    config = tmp_path / "sweep.cfg"
    config.write_text(
        "sweep.shape = 2,3,4\n"
        "sweep.methods = topk,monarch-project,tiled-solve\n"
        "sweep.densities = 0.5,1.0\n"
        "sweep.seeds = 0,1\n"
        "sweep.iterations = 1\n"
        "synth.semantic_entries = 2\n"
    )
    for run in ("a", "b"):
        proc = subprocess.run(
            [sys.executable, "-m", "monarchbench.cli", "sweep",
             "--config", str(config), "--out", str(tmp_path / run), "--quiet"],
            capture_output=True, text=True, cwd=str(Path(__file__).resolve().parents[1]),
        )
        assert proc.returncode == 0, proc.stderr
    bytes_a = (tmp_path / "a" / "sweep.csv").read_bytes()
    bytes_b = (tmp_path / "b" / "sweep.csv").read_bytes()
    assert bytes_a == bytes_b, "sweep CSV bytes differ between identical runs"

    # verify exit semantics against the real check outcomes computed above
    # (re-running the suites inside the CLI would only duplicate the work)
    monkeypatch.setattr(cli_module, "run_all_checks", lambda overrides=None: list(results.values()))
    exit_code = cli_module.main(["verify"])
    capsys.readouterr()
    all_pass = all(r.passed for r in results.values())
    assert exit_code == (0 if all_pass else 1)
    print(
        "PASS criterion 13 [cli determinism + verify exit]: identical CSV bytes; "
        f"verify exit {exit_code} consistent with {sum(r.passed for r in results.values())}/12 passing"
    )
