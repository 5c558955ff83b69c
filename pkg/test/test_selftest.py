from __future__ import annotations

import pytest

from crosspers.oracles import gaussian_overlap, gf2_rank
from crosspers.selftest import SUITES, report_table, run_selftest


def test_gf2_rank() -> None:
    assert gf2_rank([]) == 0
    assert gf2_rank([0b011, 0b110, 0b101]) == 2
    assert gf2_rank([0b001, 0b010, 0b100]) == 3
    assert gf2_rank([0b11, 0b11]) == 1
    assert gf2_rank([0]) == 0


def test_gaussian_overlap() -> None:
    assert gaussian_overlap(0.0, 0.0) == pytest.approx(1.0)
    assert gaussian_overlap(0.0, 2.0) == pytest.approx(0.3173, abs=1e-4)
    assert gaussian_overlap(1.0, -1.0) == gaussian_overlap(-1.0, 1.0)


@pytest.mark.parametrize("suite", list(SUITES))
def test_quick_suite(suite: str) -> None:
    (report,) = run_selftest(seed=3, quick=True, suites=[suite])
    assert report.trials == SUITES[suite][2]
    assert report.passed, f"{suite}: max violation {report.max_violation}"


def test_report_table() -> None:
    reports = run_selftest(quick=True, suites=["auc", "gaussian_overlap"])
    assert [report.name for report in reports] == [
        "rank auc vs pairwise auc",
        "gaussian overlap closed form",
    ]
    assert report_table(reports).row_count == 2


@pytest.mark.slow
def test_full_selftest() -> None:
    reports = run_selftest(seed=0)
    assert len(reports) == len(SUITES)
    assert all(report.passed for report in reports)
