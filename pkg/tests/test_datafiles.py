"""Tests for curve/table files and reports."""

from __future__ import annotations

import json

import numpy as np
import pytest

from powerspec import __version__
from powerspec.datafiles import (
    SCHEMA_VERSION,
    read_curve,
    read_levels,
    read_table,
    write_curve,
    write_levels,
    write_report,
    write_table,
)
from powerspec.errors import DataError
from powerspec.spectra import Provenance, Quantity, SpectrumCurve


@pytest.fixture
def curve():
    x = np.array([0.1, 0.7, 1.3, np.pi])
    return SpectrumCurve(
        x=x,
        values=1.0 / (3.0 * x),
        provenance=Provenance.MONTE_CARLO,
        stderr=np.full(x.size, 1e-3),
        meta={"n": 16, "seed": 5},
    )


class TestCurves:
    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_values_read_back_exactly(self, tmp_path, curve, fmt):
        (path,) = write_curve(curve, tmp_path / "mc", fmt, config={"ensemble": {"n": 16}})
        back, header = read_curve(path)
        np.testing.assert_array_equal(back.x, curve.x)
        np.testing.assert_array_equal(back.values, curve.values)
        np.testing.assert_array_equal(back.stderr, curve.stderr)
        assert back.provenance is Provenance.MONTE_CARLO
        assert back.quantity is Quantity.POWER_SPECTRUM
        assert back.meta == {"n": 16, "seed": 5}
        assert header["config"] == {"ensemble": {"n": 16}}

    def test_both_formats(self, tmp_path, curve):
        paths = write_curve(curve, tmp_path / "sub" / "curve")
        assert [p.name for p in paths] == ["curve.json", "curve.csv"]
        assert all(p.exists() for p in paths)

    def test_header_records_build(self, tmp_path, curve):
        (path,) = write_curve(curve, tmp_path / "c", "json")
        header = json.loads(path.read_text(encoding="utf-8"))
        assert header["schema_version"] == SCHEMA_VERSION
        assert header["build"]["powerspec"] == __version__

    def test_curve_without_stderr(self, tmp_path):
        plain = SpectrumCurve(x=[0.5, 1.0], values=[2.0, 1.0], provenance="tcue-theory")
        (path,) = write_curve(plain, tmp_path / "t", "csv")
        back, _ = read_curve(path)
        assert back.stderr is None

    def test_table_is_not_a_curve(self, tmp_path):
        path = write_table(tmp_path / "t.json", {"omega": [1.0], "s": [2.0]})
        with pytest.raises(DataError, match="not a spectrum-curve"):
            read_curve(path)


class TestTables:
    def test_missing_cells(self, tmp_path):
        path = write_table(tmp_path / "t.csv", {"a": [1.0, None], "b": [0.5, 0.25]}, kind="fig")
        columns, header = read_table(path)
        assert header["kind"] == "fig"
        assert np.isnan(columns["a"][1])
        np.testing.assert_array_equal(columns["b"], [0.5, 0.25])

    def test_unequal_columns(self, tmp_path):
        with pytest.raises(DataError):
            write_table(tmp_path / "t.json", {"a": [1.0], "b": [1.0, 2.0]})

    def test_unknown_suffix(self, tmp_path):
        with pytest.raises(DataError):
            write_table(tmp_path / "t.xlsx", {"a": [1.0]})

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_table(tmp_path / "absent.json")

    def test_csv_without_header(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("x,value\n1.0,2.0\n", encoding="utf-8")
        with pytest.raises(DataError, match="header"):
            read_table(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(DataError):
            read_table(path)

    def test_schema_version(self, tmp_path):
        path = write_table(tmp_path / "t.json", {"a": [1.0]})
        payload = json.loads(path.read_text(encoding="utf-8"))
        payload["schema_version"] = SCHEMA_VERSION + 1
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(DataError, match="schema version"):
            read_table(path)


class TestReports:
    def test_numpy_values_are_serialized(self, tmp_path):
        path = write_report(
            tmp_path / "r.json",
            {"max": np.float64(0.5), "cases": np.arange(3), "zeta": 1 - 1j},
        )
        report = json.loads(path.read_text(encoding="utf-8"))["report"]
        assert report == {"max": 0.5, "cases": [0, 1, 2], "zeta": {"re": 1.0, "im": -1.0}}


class TestLevels:
    def test_values_read_back_exactly(self, tmp_path, rng):
        levels = np.sort(rng.uniform(0.0, 10.0, (5, 7)), axis=1)
        path = write_levels(tmp_path / "ens.csv", levels, meta={"n": 7}, config={"seed": 1})
        back, header = read_levels(path)
        np.testing.assert_array_equal(back, levels)
        assert header["kind"] == "level-ensemble"
        assert header["meta"] == {"n": 7}
        assert not (tmp_path / "ens.csv.tmp").exists()

    def test_streamed_blocks(self, tmp_path):
        blocks = (np.arange(6.0).reshape(2, 3) + 10 * k for k in range(3))
        back, _ = read_levels(write_levels(tmp_path / "ens.csv", blocks))
        assert back.shape == (6, 3)
        np.testing.assert_array_equal(back[-1], [50.0, 51.0, 52.0])

    def test_plain_csv_without_header(self, tmp_path):
        path = tmp_path / "external.csv"
        path.write_text("# two realizations\n0.5,1.5,2.5\n\n0.2,1.1,3.0\n", encoding="utf-8")
        levels, header = read_levels(path)
        assert header == {}
        np.testing.assert_array_equal(levels, [[0.5, 1.5, 2.5], [0.2, 1.1, 3.0]])

    def test_mixed_block_widths(self, tmp_path):
        with pytest.raises(DataError, match="mix"):
            write_levels(tmp_path / "e.csv", [np.zeros((1, 3)), np.zeros((1, 4))])
        assert not (tmp_path / "e.csv").exists()

    @pytest.mark.parametrize(
        "text, message",
        [
            ("1.0,2.0\n1.0,2.0,3.0\n", "different lengths"),
            ("1.0,abc\n", "Malformed"),
            ("1.0,nan\n", "non-finite"),
            ("0.0,1.0\n2.0,1.0\n", "realization 2"),
            ("# only a comment\n", "no realizations"),
        ],
    )
    def test_invalid_files(self, tmp_path, text, message):
        path = tmp_path / "bad.csv"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(DataError, match=message):
            read_levels(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_levels(tmp_path / "absent.csv")
