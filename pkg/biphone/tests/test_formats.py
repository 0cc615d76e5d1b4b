# Licensed under a 3-clause BSD style license - see LICENSE.md
"""Test the shared file conventions."""

import pytest

from biphone.formats import atomic_write, format_float, read_header, tsv_rows, write_header


def test_atomic_write_replaces(tmp_path) -> None:
    target = tmp_path / "out" / "matrix.tsv"
    with atomic_write(target) as handle:
        write_header(handle, l1="hi", l2="en")
        handle.write("Z\tJH\t3\t0.75\n")
    assert target.read_text() == "#l1=hi\n#l2=en\nZ\tJH\t3\t0.75\n"
    assert list(target.parent.iterdir()) == [target]


def test_atomic_write_keeps_old_file_on_error(tmp_path) -> None:
    target = tmp_path / "matrix.tsv"
    target.write_text("old\n")
    with pytest.raises(RuntimeError):
        with atomic_write(target) as handle:
            handle.write("partial")
            raise RuntimeError("stop")
    assert target.read_text() == "old\n"
    assert list(tmp_path.iterdir()) == [target]


def test_headers_and_rows() -> None:
    lines = ["#l1=hi\n", "\n", "DH\tTH\t1\t0.5\n", "# comment\n", "DH\tDH\t1\t0.5\n"]
    assert read_header(lines[0]) == ("l1", "hi")
    assert read_header(lines[2]) is None
    assert read_header(lines[3]) is None
    assert list(tsv_rows(lines)) == [
        (3, ["DH", "TH", "1", "0.5"]),
        (5, ["DH", "DH", "1", "0.5"]),
    ]


def test_format_float_reads_back() -> None:
    value = 0.1 + 0.2
    assert float(format_float(value)) == value
    assert format_float(1) == "1.0"
