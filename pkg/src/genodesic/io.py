"""File helpers: atomic writes and locale-independent CSV round trips.

All floats are written with 17 significant digits so that every double
round-trips exactly; +infinity serializes as the literal ``inf``.
"""

import io
import os
import tempfile

import numpy as np

FLOAT_FMT = "%.17g"


def fmt_float(x) -> str:
    """Format one float with full round-trip precision."""
    return FLOAT_FMT % float(x)


def atomic_write(path, data) -> None:
    """Write ``data`` (str or bytes) to ``path`` via temp file + rename.

    The temp file lives in the target directory so os.replace is atomic;
    an interrupted write never leaves a truncated file at ``path``.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_matrix_csv(path, values) -> None:
    """Write a 2-D float array as comma-separated rows, no header."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("expected a 2-D array")
    buf = io.StringIO()
    np.savetxt(buf, values, fmt=FLOAT_FMT, delimiter=",")
    atomic_write(path, buf.getvalue())


def read_matrix_csv(path, skip_header: bool = False):
    """Read a float matrix written by write_matrix_csv (``inf`` allowed)."""
    try:
        values = np.loadtxt(
            path, delimiter=",", ndmin=2, skiprows=1 if skip_header else 0
        )
    except (ValueError, StopIteration) as exc:
        raise MalformedInputError(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(values) | np.isposinf(values)):
        raise MalformedInputError(f"{path}: NaN or -inf entries")
    return values


def write_points_csv(path, points) -> None:
    """Write a point cloud, one point per row, no header."""
    write_matrix_csv(path, points)


def read_points_csv(path, skip_header: bool = False):
    """Read a point cloud; rejects non-finite coordinates."""
    points = read_matrix_csv(path, skip_header=skip_header)
    if not np.all(np.isfinite(points)):
        raise MalformedInputError(f"{path}: non-finite coordinates")
    return points


def write_labels_csv(path, labels) -> None:
    """Write integer labels, one per row."""
    labels = np.asarray(labels)
    buf = io.StringIO()
    np.savetxt(buf, labels.reshape(-1, 1), fmt="%d")
    atomic_write(path, buf.getvalue())


def read_labels_csv(path, skip_header: bool = False):
    try:
        labels = np.loadtxt(
            path, delimiter=",", dtype=int, skiprows=1 if skip_header else 0
        )
    except (ValueError, StopIteration) as exc:
        raise MalformedInputError(f"{path}: {exc}") from exc
    return np.atleast_1d(labels)


def _fmt_cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return "%d" % v
    return fmt_float(v)


def write_table_csv(path, header, rows) -> None:
    """Write a named-column table: header line plus 17g-formatted rows."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt_cell(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


class MalformedInputError(ValueError):
    """An input file failed to parse or carried invalid values."""

    code = "malformed-input"
