"""Artifact serialization: byte-reproducible CSV, versioned JSON reports,
and the compact binary field dump.

CSV floats use repr (shortest round-trip representation) so that identical
runs produce byte-identical files.
"""

import json
import struct

import numpy as np

from .fields import GridField

SCHEMA = "pressure-lab/1"
_MAGIC = b"PLAB"


def format_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, rows, header):
    """rows: iterable of sequences aligned with header."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_records_csv(path, records, columns=None):
    """Dict records in a fixed column order; missing keys empty."""
    if columns is None:
        columns = []
        for rec in records:
            for k in rec:
                if k not in columns:
                    columns.append(k)
    rows = [[format_value(rec[k]) if k in rec else "" for k in columns]
            for rec in records]
    write_csv(path, rows, columns)


def field_csv_rows(f: GridField):
    """(x1, x2, value...) per node, row-major in the chart ordering."""
    pts = f.chart.points.reshape(-1, 2)
    vals = f.values.reshape(pts.shape[0], -1)
    for p, v in zip(pts, vals):
        yield [p[0], p[1], *v]


def write_field_csv(path, f: GridField):
    ncomp = 1 if not f.is_vector else f.values.shape[-1]
    header = ["x1", "x2"] + (["value"] if ncomp == 1
                             else [f"value{i+1}" for i in range(ncomp)])
    write_csv(path, field_csv_rows(f), header)


def write_field_binary(path, f: GridField, chart_tag):
    """Header: magic 'PLAB', chart tag (8 bytes, space padded), ndim (u32),
    dims (u32 each); payload: float64 row-major values."""
    vals = np.ascontiguousarray(f.values, dtype="<f8")
    tag = chart_tag.encode("ascii")[:8].ljust(8)
    with open(path, "wb") as fh:
        fh.write(_MAGIC + tag + struct.pack("<I", vals.ndim))
        fh.write(struct.pack(f"<{vals.ndim}I", *vals.shape))
        fh.write(vals.tobytes())


def read_field_binary(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise ValueError("not a field dump (bad magic)")
    tag = raw[4:12].decode("ascii").strip()
    ndim = struct.unpack_from("<I", raw, 12)[0]
    shape = struct.unpack_from(f"<{ndim}I", raw, 16)
    vals = np.frombuffer(raw[16 + 4 * ndim:], dtype="<f8").reshape(shape)
    return tag, vals.copy()


def _jsonable(obj):
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (str, bool)) or obj is None:
        return obj
    return str(obj)


def write_json_report(path, payload):
    doc = {"schema": SCHEMA}
    doc.update(_jsonable(payload))
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
