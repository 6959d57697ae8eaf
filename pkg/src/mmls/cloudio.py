"""CloudFile reading/writing: CSV, one point per row, optional ``# n=<n> d=<d>`` header."""

import math
import re

import numpy as np

from .errors import ParseError

_HEADER = re.compile(r"(\w+)\s*=\s*([^\s,]+)")


def parse_cloud(text, source="<input>"):
    """Return ``(points, header)``; ``header`` holds any ``key=value`` pairs."""
    header = {}
    rows = []
    width = None
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if not seen_header and not rows:
                header.update({k: v for k, v in _HEADER.findall(line)})
                seen_header = True
            continue
        fields = [f.strip() for f in line.split(",")]
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"{source}: non-numeric value in {line!r}", row=lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(f"{source}: NaN or infinite value", row=lineno)
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ParseError(f"{source}: expected {width} columns, found {len(values)}",
                             row=lineno)
        rows.append(values)
    if not rows:
        raise ParseError(f"{source}: no data rows")
    if "n" in header:
        try:
            declared = int(header["n"])
        except ValueError:
            raise ParseError(f"{source}: bad header n={header['n']!r}", row=1) from None
        if declared != width:
            raise ParseError(f"{source}: header declares n={declared} but rows have {width} columns",
                             row=1)
    return np.array(rows, dtype=float), header


def read_cloud(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_cloud(fh.read(), source=str(path))


def format_value(v):
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def format_cloud(points, d=None):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    head = f"# n={points.shape[1]}" + (f" d={d}" if d is not None else "")
    lines = [head]
    lines.extend(",".join(format_value(v) for v in row) for row in points)
    return "\n".join(lines) + "\n"


def write_cloud(path, points, d=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_cloud(points, d))
