"""Readers for the trace CSV schema and the verify summary TSV.

These implement the flow package's external file contracts; nothing here
imports the solver.  The CSV columns are fixed and serialised with 17
significant digits, so values read back are the producer's doubles
bit-for-bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

CSV_HEADER = ("step,t_tilde,dt,area,total_R,R_max,R_min,total_R2,len_minus,"
              "len_plus,len_mid,k_minus,k_plus,gb_residual,meridian,argmax_node,"
              "rmin_loc,r_boundary,phi,t_norm,R_max_norm,R_min_norm,r_norm,"
              "len_minus_norm,len_plus_norm,len_mid_norm,k_minus_norm,k_plus_norm")
COLUMNS = CSV_HEADER.split(",")
_TEXT_COLUMNS = {"rmin_loc"}


class SchemaError(ValueError):
    """The file does not match the trace schema; names the offender."""


def read_trace(path) -> dict[str, np.ndarray]:
    """Load a trace CSV into named columns (floats, plus ints for counters
    and strings for the location class)."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        raise SchemaError("empty file")
    header = text[0].split(",")
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"missing column {missing[0]!r}")
    if header != COLUMNS:
        raise SchemaError("column order does not match the trace schema")
    rows = [line.split(",") for line in text[1:] if line]
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(COLUMNS):
        raw = [row[j] for row in rows]
        if name in _TEXT_COLUMNS:
            cols[name] = np.array(raw, dtype=object)
        elif name in ("step", "argmax_node"):
            cols[name] = np.array([int(v) for v in raw], dtype=int)
        else:
            cols[name] = np.array([float(v) for v in raw], dtype=float)
    return cols


def read_summary(path) -> dict[str, dict]:
    """Parse a verify summary TSV: one check per line,
    ``name<TAB>verdict<TAB>constant<TAB>margin``."""
    out: dict[str, dict] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise SchemaError(f"malformed summary line: {line!r}")
        name, verdict, constant, margin = parts
        out[name] = {"verdict": verdict, "constant": float(constant),
                     "margin": float(margin)}
    return out
