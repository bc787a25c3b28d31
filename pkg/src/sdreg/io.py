r"""Binary and CSV persistence for models and datasets.

Two self-contained little-endian binary formats:

ModelFile (magic ``SDR1``)::

    "SDR1" | u32 version=1 | u8 kind | u32 d | u32 q_or_p | u32 r_or_s
    | payload float64

where kind 0 is semidefinite (payload: the d component matrices in
order, each row-major -- ``d*q*q`` doubles) and kind 1 is polyhedral
(payload: the d x p dictionary, row-major).

DataFile (magic ``SDD1``)::

    "SDD1" | u32 version=1 | u32 d | u32 n | payload float64

with the d x n data matrix stored column-major (one data point at a
time).  Factor sets ride the same format with d = q^2: each column is a
vectorized (column-stacked) factor matrix.

Loads verify magic, version, kind, and exact payload length, raising
:class:`~sdreg.exceptions.FormatError`; round-trips are bitwise exact.
A CSV import/export of DataFile is provided for interop (one row per
data point, ``%.17g`` formatting so doubles survive the round trip).
"""

import csv
import struct

import numpy as np

from .exceptions import FormatError
from .linalg import LinearMapL
from .learning import RegularizerModel


__all__ = [
    "save_model", "load_model", "save_data", "load_data",
    "save_factors", "load_factors", "data_to_csv", "data_from_csv",
    "write_csv",
]

_MODEL_MAGIC = b"SDR1"
_DATA_MAGIC = b"SDD1"
_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sIBIII")
_DATA_HEADER = struct.Struct("<4sIII")

_KIND_CODES = {"semidefinite": 0, "polyhedral": 1}
_KIND_NAMES = {0: "semidefinite", 1: "polyhedral"}


def save_model(path, model):
    """Write a RegularizerModel (or bare LinearMapL) to a ModelFile.

    A bare map is stored as a semidefinite model with rank 1.
    """
    if isinstance(model, LinearMapL):
        model = RegularizerModel("semidefinite", model, rank=1)
    if not isinstance(model, RegularizerModel):
        raise TypeError("expected a RegularizerModel or LinearMapL")
    if model.kind == "semidefinite":
        L = model.map
        header = _MODEL_HEADER.pack(_MODEL_MAGIC, _VERSION, 0,
                                    L.d, L.q, model.rank)
        payload = np.ascontiguousarray(L.components,
                                       dtype="<f8").tobytes()
    else:
        D = model.map
        header = _MODEL_HEADER.pack(_MODEL_MAGIC, _VERSION, 1,
                                    D.shape[0], D.shape[1], model.sparsity)
        payload = np.ascontiguousarray(D, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def _read_exact(fh, count, path, what):
    buf = fh.read(count)
    if len(buf) != count:
        raise FormatError("%s: truncated %s" % (path, what))
    return buf


def load_model(path):
    """Load a ModelFile, returning a RegularizerModel."""
    with open(path, "rb") as fh:
        header = _read_exact(fh, _MODEL_HEADER.size, path, "header")
        magic, version, kind, d, qp, rs = _MODEL_HEADER.unpack(header)
        if magic != _MODEL_MAGIC:
            raise FormatError("%s: bad magic %r (not a model file)"
                              % (path, magic))
        if version != _VERSION:
            raise FormatError("%s: unsupported version %d"
                              % (path, version))
        if kind not in _KIND_NAMES:
            raise FormatError("%s: unknown model kind %d" % (path, kind))
        if kind == 0:
            count = d * qp * qp
        else:
            count = d * qp
        payload = _read_exact(fh, 8 * count, path, "payload")
        if fh.read(1):
            raise FormatError("%s: trailing bytes after payload" % path)
    values = np.frombuffer(payload, dtype="<f8", count=count)
    values = values.astype(np.float64)
    try:
        if kind == 0:
            L = LinearMapL(values.reshape(d, qp, qp))
            return RegularizerModel("semidefinite", L, rank=rs)
        D = values.reshape(d, qp)
        return RegularizerModel("polyhedral", D, sparsity=rs)
    except (TypeError, ValueError) as exc:
        raise FormatError("%s: invalid model contents (%s)" % (path, exc))


def save_data(path, Y):
    """Write a d x n data matrix to a DataFile (column-major payload)."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError("data must be a 2-d array")
    d, n = Y.shape
    with open(path, "wb") as fh:
        fh.write(_DATA_HEADER.pack(_DATA_MAGIC, _VERSION, d, n))
        fh.write(np.asarray(Y.ravel(order="F"), dtype="<f8").tobytes())


def load_data(path):
    """Load a DataFile, returning the d x n matrix."""
    with open(path, "rb") as fh:
        header = _read_exact(fh, _DATA_HEADER.size, path, "header")
        magic, version, d, n = _DATA_HEADER.unpack(header)
        if magic != _DATA_MAGIC:
            raise FormatError("%s: bad magic %r (not a data file)"
                              % (path, magic))
        if version != _VERSION:
            raise FormatError("%s: unsupported version %d"
                              % (path, version))
        payload = _read_exact(fh, 8 * d * n, path, "payload")
        if fh.read(1):
            raise FormatError("%s: trailing bytes after payload" % path)
    values = np.frombuffer(payload, dtype="<f8", count=d * n)
    return values.astype(np.float64).reshape((d, n), order="F")


def save_factors(path, Xs):
    """Write a stack of (n, q, q) factors as a DataFile of vec columns."""
    Xs = np.asarray(Xs, dtype=np.float64)
    if Xs.ndim != 3 or Xs.shape[1] != Xs.shape[2]:
        raise ValueError("factors must have shape (n, q, q)")
    n, q = Xs.shape[0], Xs.shape[1]
    save_data(path, Xs.transpose(0, 2, 1).reshape(n, q * q).T)


def load_factors(path):
    """Load a factor DataFile back into a stack of (n, q, q) matrices."""
    V = load_data(path)
    q2, n = V.shape
    q = int(round(np.sqrt(q2)))
    if q * q != q2:
        raise FormatError("%s: %d rows is not a square vec dimension"
                          % (path, q2))
    return V.T.reshape(n, q, q).transpose(0, 2, 1)


def data_to_csv(path, Y):
    """Export a d x n data matrix as CSV, one row per data point."""
    Y = np.asarray(Y, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for j in range(Y.shape[1]):
            writer.writerow(["%.17g" % v for v in Y[:, j]])


def data_from_csv(path):
    """Import a CSV written by :func:`data_to_csv` (or compatible)."""
    rows = []
    with open(path, "r", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise FormatError("%s: non-numeric value on line %d"
                                  % (path, lineno))
    if not rows:
        raise FormatError("%s: no data rows" % path)
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise FormatError("%s: ragged rows" % path)
    return np.asarray(rows, dtype=np.float64).T


def write_csv(path, header, rows):
    """Write a CSV with a fixed header and pre-ordered rows.

    Floats are rendered with ``%.17g`` so re-parsing is exact and output
    bytes are reproducible.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            out = []
            for v in row:
                if isinstance(v, float):
                    out.append("%.17g" % v)
                else:
                    out.append(v)
            writer.writerow(out)
