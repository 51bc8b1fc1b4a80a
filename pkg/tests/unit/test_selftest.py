"""Tests for the built-in oracle suite."""

import io

import pytest

from src.services.selftest import CheckOutcome, SelfTestResult, run_selftest


@pytest.fixture(scope="module")
def selftest_result() -> SelfTestResult:
    return run_selftest()


class TestSelfTest:
    """Tests for run_selftest and its report."""

    def test_every_check_passes(self, selftest_result):
        assert selftest_result.failures == []
        assert selftest_result.passed

    def test_covers_every_module(self, selftest_result):
        modules = {outcome.module for outcome in selftest_result.outcomes}
        assert {"numkernel", "freq_selector", "fusion", "memory", "metrics"} <= modules

    def test_report(self, selftest_result):
        stream = io.StringIO()
        selftest_result.print_report(stream)
        text = stream.getvalue()
        assert "SELFTEST PASSED" in text
        assert f"Checks: {len(selftest_result.outcomes)}" in text

    def test_invalid_config_fails(self, tmp_path):
        path = tmp_path / "bad.toon"
        path.write_text("version: 1\nmemory:\n  filter_ratio: 5\n")
        result = run_selftest(str(path))
        assert not result.passed
        assert result.failures[0].module == "config"
        assert "filter_ratio" in result.failures[0].detail

    def test_empty_result_does_not_pass(self):
        assert not SelfTestResult().passed

    def test_failed_outcome_lists_detail(self):
        text = str(CheckOutcome("memory", "fifo", False, "wrong order"))
        assert "[FAIL]" in text and "wrong order" in text
