"""Tests for the artifact writers."""

import json
import os
from fractions import Fraction

import numpy as np
import pytest

from vicsek.reporting import (
    format_value,
    render_series_figure,
    write_csv,
    write_json,
)


class TestFormatValue:
    def test_floats_round_trip(self):
        assert format_value(0.1) == "0.1"
        assert format_value(4.0) == "4.0"
        assert float(format_value(1 / 3)) == 1 / 3
        assert format_value(np.float64(2.5)) == "2.5"

    def test_ints_and_bools(self):
        assert format_value(7) == "7"
        assert format_value(np.int64(7)) == "7"
        assert format_value(True) == "true"
        assert format_value(False) == "false"

    def test_fractions(self):
        assert format_value(Fraction(2, 3)) == "2/3"
        assert format_value(Fraction(4)) == "4"

    def test_fallback_str(self):
        assert format_value("label") == "label"


class TestWriteCsv:
    def test_rfc4180_crlf_and_header(self, tmp_path):
        path = os.path.join(tmp_path, "t.csv")
        write_csv(path, ["a", "b"], [(1, 2.5), (Fraction(1, 3), True)])
        raw = open(path, "rb").read()
        assert raw == b"a,b\r\n1,2.5\r\n1/3,true\r\n"

    def test_quoting_of_commas(self, tmp_path):
        path = os.path.join(tmp_path, "q.csv")
        write_csv(path, ["x"], [("a,b",)])
        assert open(path, "rb").read() == b'x\r\n"a,b"\r\n'

    def test_byte_identical_rewrites(self, tmp_path):
        p1 = os.path.join(tmp_path, "1.csv")
        p2 = os.path.join(tmp_path, "2.csv")
        rows = [(i, i / 7) for i in range(20)]
        write_csv(p1, ["i", "v"], rows)
        write_csv(p2, ["i", "v"], rows)
        assert open(p1, "rb").read() == open(p2, "rb").read()


class TestWriteJson:
    def test_sorted_keys_and_fractions(self, tmp_path):
        path = os.path.join(tmp_path, "r.json")
        write_json(path, {"b": Fraction(1, 3), "a": np.float64(2.0)})
        text = open(path, "r", encoding="utf-8").read()
        assert text.index('"a"') < text.index('"b"')
        data = json.loads(text)
        assert data == {"a": 2.0, "b": "1/3"}

    def test_numpy_arrays_and_ints(self, tmp_path):
        path = os.path.join(tmp_path, "n.json")
        write_json(path, {"v": np.arange(3), "n": np.int32(4)})
        assert json.loads(open(path).read()) == {"n": 4, "v": [0, 1, 2]}

    def test_byte_identical_rewrites(self, tmp_path):
        p1 = os.path.join(tmp_path, "1.json")
        p2 = os.path.join(tmp_path, "2.json")
        obj = {"values": [0.1, 0.2], "name": "scan"}
        write_json(p1, obj)
        write_json(p2, obj)
        assert open(p1, "rb").read() == open(p2, "rb").read()


class TestFigures:
    def test_renders_png(self, tmp_path):
        path = os.path.join(tmp_path, "fig", "scan.png")
        render_series_figure(
            path, "t", "x", "y",
            [("a", [1, 2, 3], [1.0, 0.5, 0.25])],
            logy=True,
        )
        raw = open(path, "rb").read()
        assert raw[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(raw) > 1000
