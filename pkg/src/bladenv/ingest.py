"""Design-of-experiments generation and input-output database handling.

Random draws use the counter-based Philox generator so a recorded seed
reproduces the exact stream on any platform.  Tables are persisted as
csv with 17-significant-digit floats, which round-trips IEEE doubles
losslessly, and a leading ``#`` comment line records provenance.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError


def rng_from_seed(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


def doe_uniform(d, k, seed):
    """K design vectors drawn i.i.d. uniform on ``[-1, 1]^d``."""
    if d < 1 or k < 1:
        raise ValidationError(f"need d >= 1 and k >= 1, got d={d}, k={k}")
    return rng_from_seed(seed).uniform(-1.0, 1.0, size=(int(k), int(d)))


# ---------------------------------------------------------------------------
# Aerodynamic quantities of interest.
# ---------------------------------------------------------------------------


def loss_coefficient(p01, p02, p2):
    """Stagnation pressure loss ``(p02 - p01) / (p02 - p2)``.

    Inlet stagnation ``p01``, exit stagnation ``p02``, exit static
    ``p2``, all in consistent units.
    """
    if p01 <= 0 or p02 <= 0 or p2 <= 0:
        raise ValidationError("pressures must be positive")
    if p02 == p2:
        raise ValidationError("exit stagnation equals exit static pressure")
    return (p02 - p01) / (p02 - p2)


def mass_flow_function(mdot, t01, p01):
    """Normalized capacity ``mdot * sqrt(t01) / p01 * 1e4``."""
    if mdot <= 0 or t01 <= 0 or p01 <= 0:
        raise ValidationError("mass flow, temperature and pressure must be positive")
    return mdot * np.sqrt(t01) / p01 * 1e4


def isentropic_mach(p01, p, gamma=1.4):
    """Mach number from the isentropic stagnation-to-static ratio.

    ``p`` may be a scalar or an array of local static pressures, as in
    a surface distribution; values must satisfy ``0 < p <= p01``.
    """
    if p01 <= 0:
        raise ValidationError("stagnation pressure must be positive")
    if gamma <= 1:
        raise ValidationError(f"gamma must exceed 1, got {gamma}")
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or np.any(p > p01 * (1 + 1e-12)):
        raise ValidationError("static pressures must lie in (0, p01]")
    g = (gamma - 1.0) / gamma
    m2 = 2.0 / (gamma - 1.0) * ((p01 / p) ** g - 1.0)
    m = np.sqrt(np.maximum(m2, 0.0))
    return float(m) if m.ndim == 0 else m


@dataclass
class QoiRecord:
    """One evaluated design: the inputs plus named scalar outputs.

    ``pressures`` optionally carries a surface static-pressure table
    for Mach-distribution work.
    """

    design: np.ndarray
    values: dict = field(default_factory=dict)
    pressures: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# Tabular persistence.
# ---------------------------------------------------------------------------


def _fmt(v):
    return f"{float(v):.17g}"


def write_design_csv(path, designs, comment=None):
    designs = np.atleast_2d(np.asarray(designs, dtype=float))
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["design_id"] + [f"x{j + 1}" for j in range(designs.shape[1])])
        for i, row in enumerate(designs):
            writer.writerow([i] + [_fmt(v) for v in row])


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty table")
    return rows


def read_design_csv(path):
    rows = _read_rows(path)
    header = [c.strip() for c in rows[0]]
    if header[:1] != ["design_id"]:
        raise ValidationError(f"{path}: expected a design_id-led header")
    try:
        data = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        ids = [int(r[0]) for r in rows[1:]]
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry") from exc
    if ids != list(range(len(ids))):
        raise ValidationError(f"{path}: design ids must run 0..{len(ids) - 1}")
    return data


def write_qoi_csv(path, columns, comment=None):
    """Write named output columns keyed by design id.

    ``columns`` maps column name to a 1-d array; all must share length.
    """
    names = list(columns)
    if not names:
        raise ValidationError("no output columns to write")
    arrays = [np.asarray(columns[n], dtype=float).ravel() for n in names]
    k = arrays[0].shape[0]
    if any(a.shape[0] != k for a in arrays):
        raise ValidationError("output columns differ in length")
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["design_id"] + names)
        for i in range(k):
            writer.writerow([i] + [_fmt(a[i]) for a in arrays])


def read_qoi_csv(path):
    rows = _read_rows(path)
    header = [c.strip() for c in rows[0]]
    if header[:1] != ["design_id"]:
        raise ValidationError(f"{path}: expected a design_id-led header")
    names = header[1:]
    try:
        data = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry") from exc
    return {name: data[:, j].copy() for j, name in enumerate(names)}


def read_external_database(design_path, qoi_path, column=None):
    """Adapter for externally produced design/output tables.

    Reads a design matrix and an output table from plain text files.
    Accepts either this package's csv layout or bare whitespace- or
    comma-separated numeric matrices with optional ``#`` comments, the
    layout used by published blade-study datasets (one design per row;
    outputs as a column vector or a table whose ``column`` to extract
    is named or zero-indexed).
    """

    def load_matrix(path):
        try:
            return read_design_csv(path)
        except (ValidationError, ValueError):
            pass
        try:
            return np.atleast_2d(np.loadtxt(path, delimiter=","))
        except ValueError:
            return np.atleast_2d(np.loadtxt(path))

    designs = load_matrix(design_path)
    try:
        table = read_qoi_csv(qoi_path)
    except (ValidationError, ValueError):
        table = None
    if table is not None:
        if column is None:
            if len(table) != 1:
                raise ValidationError(
                    f"{qoi_path}: several output columns, pick one of {sorted(table)}"
                )
            outputs = next(iter(table.values()))
        elif column not in table:
            raise ValidationError(
                f"{qoi_path}: no column {column!r}, have {sorted(table)}"
            )
        else:
            outputs = table[column]
    else:
        raw = load_matrix(qoi_path)
        idx = 0 if column is None else int(column)
        outputs = raw[:, idx] if raw.shape[0] > 1 else raw.ravel()
    outputs = np.asarray(outputs, dtype=float).ravel()
    if designs.shape[0] != outputs.shape[0]:
        raise ValidationError(
            f"design count {designs.shape[0]} does not match output count "
            f"{outputs.shape[0]}"
        )
    return designs, outputs
