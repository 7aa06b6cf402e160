"""Tests for the cross-oracle verification suites."""

from __future__ import annotations

import pytest

from powerspec.errors import UsageError
from powerspec.verify import CheckResult, SuiteReport, run_suite, suite_dpv, suite_oracles


class TestReports:
    def test_check_pass_rule(self):
        assert CheckResult("a", 1e-9, 1e-8, 2).passed
        assert not CheckResult("a", 1e-7, 1e-8, 2).passed
        assert not CheckResult("a", float("nan"), 1e-8, 2).passed

    def test_suite_to_dict(self):
        report = SuiteReport("x", [CheckResult("a", 0.0, 1.0, 1), CheckResult("b", 2.0, 1.0, 1)])
        data = report.to_dict()
        assert data["passed"] is False
        assert [c["passed"] for c in data["checks"]] == [True, False]


class TestSuites:
    def test_oracles(self):
        report = suite_oracles(quick=True)
        assert report.passed, report.to_dict()
        assert len(report.checks) == 5

    def test_dpv_quick(self):
        report = suite_dpv(quick=True)
        assert report.passed, report.to_dict()

    def test_pipeline_quick(self, mocker):
        check = mocker.patch("powerspec.verify.i_n0_check", return_value=(1.0, 1.0, 1e-12))
        (report,) = run_suite("pipeline", quick=True)
        assert report.passed
        assert check.call_count == 6

    def test_all_runs_every_suite(self, mocker):
        mocker.patch("powerspec.verify.i_n0_check", return_value=(1.0, 1.0, 0.0))
        mocker.patch.dict(
            "powerspec.verify._SUITES",
            {
                "oracles": lambda quick: SuiteReport("oracles"),
                "dpv": lambda quick: SuiteReport("dpv"),
            },
        )
        assert [r.suite for r in run_suite("all", quick=True)] == ["oracles", "dpv", "pipeline"]

    def test_unknown_suite(self):
        with pytest.raises(UsageError):
            run_suite("fast")
