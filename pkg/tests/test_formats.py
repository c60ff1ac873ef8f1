"""Tests for dictionary, signal and observation files."""

import json

import numpy as np
import pytest

from bsl.errors import ArgumentError
from bsl.formats import (
    read_dictionary,
    read_observation,
    read_signal,
    write_dictionary,
    write_observation,
    write_signal,
)


class TestDictionaryFile:

    def test_header_line(self, tmp_dir, small_dict):
        path = tmp_dir / "dict.txt"
        write_dictionary(small_dict, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "BSL1 L=20 M=8 d=2"
        assert len(lines) == 21
        assert len(lines[1].split()) == 16

    def test_bit_exact(self, tmp_dir, small_dict):
        path = tmp_dir / "dict.txt"
        write_dictionary(small_dict, path)
        loaded = read_dictionary(path)
        assert loaded.block_size == 2
        assert np.array_equal(loaded.entries, small_dict.entries)

    def test_single_row(self, tmp_dir):
        path = tmp_dir / "row.txt"
        path.write_text("BSL1 L=1 M=2 d=1\n1 -1\n")
        D = read_dictionary(path)
        assert D.entries.shape == (1, 2)

    def test_bad_header(self, tmp_dir):
        path = tmp_dir / "dict.txt"
        path.write_text("L=2 M=1 d=2\n1 0\n0 1\n")
        with pytest.raises(ArgumentError, match="not a BSL1 dictionary"):
            read_dictionary(path)

    def test_shape_mismatch(self, tmp_dir):
        path = tmp_dir / "dict.txt"
        path.write_text("BSL1 L=3 M=1 d=2\n1 0\n0 1\n")
        with pytest.raises(ArgumentError, match="header declares 3 x 2"):
            read_dictionary(path)

    def test_non_numeric(self, tmp_dir):
        path = tmp_dir / "dict.txt"
        path.write_text("BSL1 L=2 M=1 d=2\n1 zero\n0 1\n")
        with pytest.raises(ArgumentError, match="malformed"):
            read_dictionary(path)

    def test_non_unit_atoms(self, tmp_dir):
        path = tmp_dir / "dict.txt"
        path.write_text("BSL1 L=2 M=1 d=2\n2 0\n0 1\n")
        with pytest.raises(ArgumentError, match="unit norm"):
            read_dictionary(path)

    def test_missing_file(self, tmp_dir):
        with pytest.raises(ArgumentError, match="cannot read"):
            read_dictionary(tmp_dir / "absent.txt")


class TestSignalFile:

    def test_round_trip(self, tmp_dir, make_signal):
        x = make_signal(4, 2, {1: [0.1, -0.2], 3: [1 / 3, 0.0]})
        path = tmp_dir / "x.json"
        write_signal(x, path)
        loaded = read_signal(path)
        assert np.array_equal(loaded.values, x.values)
        assert loaded.support == (1, 3)

    def test_support_is_one_based(self, tmp_dir, make_signal):
        path = tmp_dir / "x.json"
        write_signal(make_signal(3, 1, {0: [2.0]}), path)
        assert json.loads(path.read_text())["support"] == [1]

    def test_missing_block_size(self, tmp_dir):
        path = tmp_dir / "x.json"
        path.write_text('{"values": [1.0, 2.0]}')
        with pytest.raises(ArgumentError, match="invalid signal file"):
            read_signal(path)

    def test_not_an_object(self, tmp_dir):
        path = tmp_dir / "x.json"
        path.write_text("[1, 2]")
        with pytest.raises(ArgumentError, match="JSON object"):
            read_signal(path)


class TestObservationFile:

    def test_round_trip(self, tmp_dir):
        y = np.array([0.5, -1e-300, 3.25])
        path = tmp_dir / "y.json"
        write_observation(y, path)
        assert np.array_equal(read_observation(path), y)

    def test_length_mismatch(self, tmp_dir):
        path = tmp_dir / "y.json"
        path.write_text('{"L": 3, "values": [1.0, 2.0]}')
        with pytest.raises(ArgumentError, match="declares L=3"):
            read_observation(path)

    def test_invalid_json(self, tmp_dir):
        path = tmp_dir / "y.json"
        path.write_text("{")
        with pytest.raises(ArgumentError, match="failed to load observation"):
            read_observation(path)
