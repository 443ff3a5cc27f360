"""
Tests for self-verifying reports.
"""

import numpy as np
import pytest

from kawlab.common.errors import ConfigError, WitnessError
from kawlab.common.report import Report


@pytest.fixture
def report():
    r = Report("probe")
    r.set("eta", 0.5).set("flag", True).set("count", 3)
    r.add_vector("e", np.array([0.3, 0.4j]))
    r.add_table("sweep", ["eps", "value"], [[0.1, 2.0], [0.2, 5.0]])
    return r


class TestChecks:

    def test_expressions(self, report):
        report.add_check("norm_e", "norm(e)", "==", "key(eta)", 1e-12)
        report.add_check("sweep_max", "colmax(sweep, value)", "<=", "2 * key(eta) * 5", 0.0)
        report.add_check("sweep_min", "colmin(sweep, eps)", ">=", 0.1)
        report.add_check("arith", "sqrt(key(count) ** 2)", "==", "max(1, 3)")
        assert report.failed_checks() == []

    def test_dist(self, report):
        report.add_vector("f", np.array([0.3, 0.0]))
        report.add_check("gap", "dist(e, f)", "==", 0.4, 1e-12)
        assert report.failed_checks() == []

    def test_failure_is_reported(self, report):
        report.add_check("too_strict", "key(eta)", "<=", 0.1)
        failed = report.failed_checks()
        assert [c.name for c in failed] == ["too_strict"]
        assert failed[0].lhs == 0.5
        with pytest.raises(WitnessError):
            report.verify()

    def test_missing_key_is_a_witness_error(self, report):
        report.add_check("missing", "key(nothing)", "<=", 1)
        with pytest.raises(WitnessError):
            report.evaluate_checks()

    def test_unsupported_expression(self, report):
        report.add_check("call", "open(e)", "<=", 1)
        with pytest.raises(WitnessError):
            report.evaluate_checks()

    def test_bad_relation(self, report):
        with pytest.raises(ValueError):
            report.add_check("neq", "key(eta)", "!=", 1)


class TestSerialization:

    def test_round_trip(self, report):
        report.add_check("norm_e", "norm(e)", "==", "key(eta)", 1e-12)
        report.embed_config("[experiment]\nname = probe\n")
        loaded = Report.from_text(report.to_text())
        assert loaded.kind == "probe"
        assert loaded.get("flag") == "true"
        assert np.allclose(loaded.vector("e"), [0.3, 0.4j])
        assert loaded.column("sweep", "value").tolist() == [2.0, 5.0]
        assert loaded.config_text == "[experiment]\nname = probe\n"
        assert [c.name for c in loaded.checks] == ["norm_e"]

    def test_tampered_report_fails_verification(self, report):
        report.add_check("norm_e", "norm(e)", "==", "key(eta)", 1e-12)
        text = report.to_text().replace("eta = 0.5", "eta = 0.25")
        with pytest.raises(WitnessError):
            Report.from_text(text)
        assert Report.from_text(text, verify=False).get_float("eta") == 0.25

    def test_bad_magic(self):
        with pytest.raises(ConfigError, match="line 1"):
            Report.from_text("REPORT\nkind = x\n")

    def test_malformed_check(self):
        with pytest.raises(ConfigError, match="line 3"):
            Report.from_text("KAWLAB-REPORT 1\nkind = x\n[check] broken\n")

    def test_infinite_values(self):
        r = Report("x").set("big", float("inf"))
        assert Report.from_text(r.to_text()).get_float("big") == float("inf")

    def test_invalid_key(self):
        with pytest.raises(ValueError):
            Report("x").set("two words", 1)
