"""
Tests for run output directories and signal files.
"""

import json

import numpy as np
import pytest

from kawlab.common.errors import ConfigError, SizeError
from kawlab.common.report import Report
from kawlab.common.signal_io import (
    decode_cvec_binary,
    encode_cvec_binary,
    format_cvec_text,
    format_signal_set,
    parse_cvec_text,
    parse_signal_set,
    read_signal,
)
from kawlab.cli.output import MANIFEST_FILE, RunOutput, atomic_write, read_manifest, sha256_of


class TestAtomicWrite:

    def test_writes_and_leaves_no_temp_files(self, tmp_path):
        target = tmp_path / "sub" / "file.txt"
        atomic_write(target, b"hello")
        atomic_write(target, b"again")
        assert target.read_bytes() == b"again"
        assert [p.name for p in target.parent.iterdir()] == ["file.txt"]


class TestRunOutput:

    def _populate(self, directory):
        out = RunOutput(directory)
        report = Report("demo").set("value", 1.5)
        report.add_table("rows", ["a", "b"], [[1, 2]])
        out.write_report("demo", report)
        out.write_signal("x", np.array([1.0, 2j]))
        out.write_plot("demo.rows", "demo.rows.csv", "rows", "a", ["b"])
        out.finalize("demo", 7)
        return out

    def test_manifest_lists_every_file(self, tmp_path):
        out = self._populate(tmp_path)
        manifest = read_manifest(tmp_path)
        assert manifest["experiment"] == "demo"
        assert manifest["seed"] == 7
        assert "created" not in manifest
        paths = [f["path"] for f in manifest["files"]]
        assert paths == sorted(paths) == out.files
        assert {"demo.report", "demo.rows.csv", "x.cvec", "demo.rows.gp"} <= set(paths)
        for entry in manifest["files"]:
            assert sha256_of((tmp_path / entry["path"]).read_bytes()) == entry["sha256"]

    def test_manifest_is_deterministic(self, tmp_path):
        self._populate(tmp_path / "a")
        self._populate(tmp_path / "b")
        assert (tmp_path / "a" / MANIFEST_FILE).read_bytes() == (tmp_path / "b" / MANIFEST_FILE).read_bytes()

    def test_stamp_adds_timestamp(self, tmp_path):
        out = RunOutput(tmp_path, stamp=True)
        out.finalize("demo", 0)
        assert "created" in json.loads((tmp_path / MANIFEST_FILE).read_text())

    def test_binary_signals(self, tmp_path):
        out = RunOutput(tmp_path, binary_signals=True)
        path = out.write_signal("x", np.array([1 + 1j]))
        assert path.name == "x.cvec.bin"
        assert np.array_equal(read_signal(path), [1 + 1j])

    def test_missing_manifest(self, tmp_path):
        assert read_manifest(tmp_path) is None


class TestSignalFiles:

    def test_text_format(self):
        text = format_cvec_text([1.0, 3 - 2j])
        assert text.splitlines() == ["CVEC 2", "1 0", "3 -2"]
        assert np.array_equal(parse_cvec_text(text), [1.0, 3 - 2j])

    def test_binary_format(self):
        x = np.array([0.1 + 0.2j, -3.0])
        assert np.array_equal(decode_cvec_binary(encode_cvec_binary(x)), x)

    def test_length_mismatch(self):
        with pytest.raises(SizeError):
            parse_cvec_text("CVEC 3\n1 0\n")
        with pytest.raises(SizeError):
            decode_cvec_binary(encode_cvec_binary([1.0, 2.0])[:-8])

    def test_bad_header(self):
        with pytest.raises(ConfigError):
            parse_cvec_text("VEC 1\n1 0\n")

    def test_signal_set(self):
        signals = [np.array([1.0]), np.array([2j, 3.0])]
        parsed = parse_signal_set(format_signal_set(signals))
        assert len(parsed) == 2
        assert np.array_equal(parsed[1], signals[1])

    def test_empty_set(self):
        with pytest.raises(ConfigError):
            parse_signal_set("# nothing here\n")
