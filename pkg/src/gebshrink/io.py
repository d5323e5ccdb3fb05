"""CSV interchange for signals, coefficient tables, and plot data.

All floats are written with 17 significant digits, which round-trips
IEEE doubles exactly.
"""

from __future__ import annotations

import csv

import numpy as np


def format_float(x) -> str:
    return f"{float(x):.17g}"


def write_signal_csv(path, values, truth=None, estimate=None, index=None):
    """Write columns index,value[,truth][,estimate]."""
    values = np.asarray(values, dtype=float).ravel()
    idx = np.arange(1, values.size + 1) if index is None else np.asarray(index)
    header = ["index", "value"]
    columns = [values]
    if truth is not None:
        header.append("truth")
        columns.append(np.asarray(truth, dtype=float).ravel())
    if estimate is not None:
        header.append("estimate")
        columns.append(np.asarray(estimate, dtype=float).ravel())
    for col in columns:
        if col.size != values.size:
            raise ValueError("all columns must have equal length")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(idx, *columns):
            writer.writerow([row[0], *(format_float(v) for v in row[1:])])


def read_signal_csv(path):
    """Read a signal CSV; returns (values, truth or None, estimate or None)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: i for i, name in enumerate(header)}
        if "value" not in cols:
            raise ValueError(f"{path}: missing 'value' column")
        rows = [row for row in reader if row]
    def column(name):
        if name not in cols:
            return None
        return np.array([float(row[cols[name]]) for row in rows])
    return column("value"), column("truth"), column("estimate")


def write_coefficients_csv(path, levels, deltas=None):
    """Write rows (j, k, value, delta) with 1-based k within each level."""
    levels = {int(j): np.asarray(v, dtype=float).ravel() for j, v in dict(levels).items()}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "k", "value", "delta"])
        for j in sorted(levels):
            vals = levels[j]
            if deltas is None:
                marks = np.ones(vals.size, dtype=int)
            else:
                marks = np.asarray(dict(deltas)[j]).astype(int).ravel()
                if marks.size != vals.size:
                    raise ValueError(f"delta length mismatch at level {j}")
            for k, (v, d) in enumerate(zip(vals, marks), start=1):
                writer.writerow([j, k, format_float(v), d])


def read_coefficients_csv(path):
    """Read a coefficient CSV; returns (levels, deltas) as {j: array} dicts."""
    levels: dict[int, list] = {}
    deltas: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["j", "k", "value", "delta"]:
            raise ValueError(f"{path}: expected header j,k,value,delta")
        for row in reader:
            if not row:
                continue
            j = int(row[0])
            levels.setdefault(j, []).append(float(row[2]))
            deltas.setdefault(j, []).append(int(row[3]))
    return (
        {j: np.array(v) for j, v in sorted(levels.items())},
        {j: np.array(v, dtype=int) for j, v in sorted(deltas.items())},
    )


def write_plot_triples(path, signal, noisy, reconstruction):
    """Write (index, signal, noisy, reconstruction) rows for external plotting."""
    signal = np.asarray(signal, dtype=float).ravel()
    noisy = np.asarray(noisy, dtype=float).ravel()
    recon = np.asarray(reconstruction, dtype=float).ravel()
    if not (signal.size == noisy.size == recon.size):
        raise ValueError("signal, noisy and reconstruction must have equal length")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "signal", "noisy", "reconstruction"])
        for i, (s, y, r) in enumerate(zip(signal, noisy, recon), start=1):
            writer.writerow([i, format_float(s), format_float(y), format_float(r)])
