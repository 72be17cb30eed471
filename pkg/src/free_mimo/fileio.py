"""Reading and writing complex matrices and sweep tables as CSV.

Matrix files start with a header line ``n,m`` followed by ``n`` rows of
``m`` entries written as ``a+bi`` or ``a-bi`` with 17 significant digits.
"""

import csv
import io
import math

import numpy as np


class MatrixFormatError(ValueError):
    pass


def format_complex(z):
    re, im = float(z.real), float(z.imag)
    sign = "-" if math.copysign(1.0, im) < 0 else "+"
    return f"{re:.17g}{sign}{abs(im):.17g}i"


def parse_complex(text):
    s = text.strip().replace(" ", "")
    if not s:
        raise MatrixFormatError("empty matrix entry")
    if s.endswith("i"):
        s = s[:-1] + "j"
    try:
        z = complex(s)
    except ValueError:
        raise MatrixFormatError(f"cannot parse complex entry {text!r}") from None
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise MatrixFormatError(f"non-finite entry {text!r}")
    return z


def dumps_matrix(M):
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    lines = [f"{M.shape[0]},{M.shape[1]}"]
    lines += [",".join(format_complex(z) for z in row) for row in M]
    return "\n".join(lines) + "\n"


def loads_matrix(text):
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise MatrixFormatError("empty matrix file")
    try:
        n, m = (int(v) for v in rows[0].split(","))
    except ValueError:
        raise MatrixFormatError(f"bad header {rows[0]!r}, expected 'n,m'") from None
    body = rows[1:]
    if len(body) != n:
        raise MatrixFormatError(f"header says {n} rows, found {len(body)}")
    M = np.empty((n, m), dtype=complex)
    for i, line in enumerate(body):
        entries = line.split(",")
        if len(entries) != m:
            raise MatrixFormatError(f"row {i + 1} has {len(entries)} entries, expected {m}")
        M[i] = [parse_complex(e) for e in entries]
    return M


def write_matrix(path, M):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_matrix(M))


def read_matrix(path):
    with open(path, encoding="utf-8") as fh:
        return loads_matrix(fh.read())


SWEEP_COLUMNS = ["sweep_value", "estimator", "mean_capacity", "se_capacity",
                 "true_capacity", "mean_m1", "mean_m2", "mean_m3", "mean_m4",
                 "flags_count"]


def sweep_csv(rows):
    """Render :class:`~free_mimo.simulation.SweepRow` objects as CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        moments = row.mean_moments or []
        cells = [repr(v) for v in moments] + [""] * (4 - len(moments))
        writer.writerow([repr(row.sweep_value), row.estimator, repr(row.mean_capacity),
                         repr(row.se_capacity), repr(row.true_capacity), *cells,
                         row.flags_count])
    return buf.getvalue()
