"""CSV output with mandatory headers and shortest round-trip float text."""

import csv
import os

import numpy as np


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_columns(path, columns):
    """``columns`` is an ordered mapping name -> 1-D array of equal length."""
    names = list(columns)
    arrs = [np.asarray(columns[n]) for n in names]
    write_csv(path, names, zip(*arrs))


def read_csv(path):
    """Header and rows as strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def read_columns(path):
    """Numeric columns keyed by header name; empty fields read as NaN."""
    header, rows = read_csv(path)
    data = np.array([[float(v) if v else np.nan for v in r] for r in rows]) if rows \
        else np.zeros((0, len(header)))
    return {h: data[:, k] for k, h in enumerate(header)}
