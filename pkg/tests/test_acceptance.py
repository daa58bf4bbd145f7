"""The twelve acceptance criteria, one test each, at their stated tolerances.

Each test prints a PASS/FAIL line; the terminal summary repeats all of them.
"""

from __future__ import annotations

import pytest

from lirsim.acceptance import CRITERIA, evaluate_criterion

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance


def _run(number: int) -> None:
    outcome = evaluate_criterion(CRITERIA[number])
    ACCEPTANCE_LINES.append(outcome.line)
    print(outcome.line)
    for d in outcome.details:
        print(f"    {d}")
    assert outcome.passed, outcome.summary + "\n" + "\n".join(outcome.details)


def test_01_fpr_formula_within_three_sigma():
    _run(1)


def test_02_branching_process_matches_closed_form():
    _run(2)


@pytest.mark.slow
def test_03_wrong_hops_on_grid_match_formula():
    _run(3)


def test_04_total_overhead_convexly_increasing():
    _run(4)


def test_05_dp_equals_exhaustive_search():
    _run(5)


def test_06_optimal_policy_beats_source_with_growing_gap():
    _run(6)


@pytest.mark.slow
def test_07_multi_flow_queuing_ordering():
    _run(7)


@pytest.mark.slow
def test_08_failure_management_ordering():
    _run(8)


def test_09_lir_beats_explicit_link_list():
    _run(9)


@pytest.mark.slow
def test_10_multicast_ordering():
    _run(10)


def test_11_node_identified_duplicates_and_loops():
    _run(11)


def test_12_repeated_runs_byte_identical():
    _run(12)
