# Licensed under a 3-clause BSD style license - see LICENSE.md
"""
:mod:`formats` holds the plain-text file conventions shared by every stage:
tab separated tables with ``#key=value`` header lines, probabilities written
with the shortest representation that reads back to the same float, and
atomic replacement of finished artifacts so a failed run never leaves a
partial file behind.
"""

import contextlib
import io
import os
import tempfile
from collections.abc import Iterable, Iterator
from pathlib import Path

__all__ = [
    "CONSTANTS",
    "atomic_write",
    "format_float",
    "read_header",
    "tsv_rows",
    "write_header",
]

CONSTANTS = {
    "COMMENT": "#",
    "ENCODING": "utf-8",
    "NEWLINE": "\n",
    "SEPARATOR": "=",
    "TAB": "\t",
}


def format_float(value: float) -> str:
    """Return ``repr`` of a float, the shortest text that reads back exactly."""
    return repr(float(value))


@contextlib.contextmanager
def atomic_write(path, encoding: str = CONSTANTS["ENCODING"]) -> Iterator[io.TextIOBase]:
    """Open a text file for writing that only appears once it is complete.

    The content goes to a temporary file in the target directory which
    replaces ``path`` with ``os.replace`` when the block exits without an
    exception.  On an exception the temporary file is removed and the old
    ``path`` (if any) is left untouched.

    Parameters
    ----------
    path: str or Path
        The artifact to write.
    encoding: str
        Text encoding, UTF-8 by default.

    Examples
    --------
    >>> with atomic_write(tmp_path / "matrix.tsv") as handle:  # doctest: +SKIP
    ...     handle.write("#l1=hi\\n")
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, temporary = tempfile.mkstemp(
        dir=target.parent, prefix=f".{target.name}.", suffix=".tmp"
    )
    try:
        with open(fd, "w", encoding=encoding, newline="") as handle:
            yield handle
        os.replace(temporary, target)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(temporary)
        raise


def write_header(handle, **values) -> None:
    """Write ``#key=value`` lines in the given order."""
    for key, value in values.items():
        handle.write(
            f'{CONSTANTS["COMMENT"]}{key}{CONSTANTS["SEPARATOR"]}{value}{CONSTANTS["NEWLINE"]}'
        )


def read_header(line: str):
    """Split a ``#key=value`` line, returning ``None`` for other lines."""
    if not line.startswith(CONSTANTS["COMMENT"]) or CONSTANTS["SEPARATOR"] not in line:
        return None
    key, _, value = line[1:].rstrip("\r\n").partition(CONSTANTS["SEPARATOR"])
    return key.strip(), value.strip()


def tsv_rows(lines: Iterable[str]) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(line_no, fields)`` for the non-blank, non-header lines.

    Line numbers start at 1 and count every line, so error messages can
    point at the file as an editor shows it.
    """
    for line_no, line in enumerate(lines, start=1):
        stripped = line.rstrip("\r\n")
        if not stripped.strip() or stripped.startswith(CONSTANTS["COMMENT"]):
            continue
        yield line_no, stripped.split(CONSTANTS["TAB"])
