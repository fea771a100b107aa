"""On-disk containers.

CSIR-v1 (CFR series)::

    b"CSIR1 " + json + b"\\n"
    then per snapshot: <f8 time_s, <f4 rssi_db, K x (<f4 re, <f4 im)

MAT1 (matrix products)::

    b"MAT1 " + json + b"\\n"
    then each axis grid as <f8 (lengths in the header), then the payload
    as <f4 in C order (complex payloads store interleaved re/im).

Writes go through a temporary file in the target directory followed by
``os.replace`` so readers never observe partial files.
"""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .config import RadioParams, from_dict, to_dict
from .errors import ConfigError, DataError
from .series import CfrSeries

CSIR_MAGIC = b"CSIR1 "
MAT_MAGIC = b"MAT1 "


@contextmanager
def atomic_open(path, mode: str = "wb"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    mask = os.umask(0)
    os.umask(mask)
    try:
        os.chmod(tmp, 0o666 & ~mask)
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _read_header(fh, magic: bytes) -> dict:
    line = fh.readline()
    if not line.startswith(magic) or not line.endswith(b"\n"):
        raise DataError(f"missing {magic.decode().strip()} header")
    try:
        return json.loads(line[len(magic):].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed header: {exc}") from None


# ---------------------------------------------------------------------------
# CSIR-v1
# ---------------------------------------------------------------------------

def _csir_dtype(k: int) -> np.dtype:
    return np.dtype([("time_s", "<f8"), ("rssi_db", "<f4"), ("iq", "<f4", (k, 2))])


def _csir_header(radio: RadioParams, count: int) -> bytes:
    meta = {"format": "CSIR-v1", "radio": to_dict(radio), "snapshot_count": int(count),
            "subcarrier_indices": [int(k) for k in radio.indices]}
    return CSIR_MAGIC + json.dumps(meta, separators=(",", ":")).encode() + b"\n"


def _csir_records(times, values, rssi) -> np.ndarray:
    values = np.asarray(values)
    rec = np.empty(values.shape[0], dtype=_csir_dtype(values.shape[1]))
    rec["time_s"] = times
    rec["rssi_db"] = rssi
    rec["iq"][..., 0] = values.real
    rec["iq"][..., 1] = values.imag
    return rec


def write_csir(path, series: CfrSeries) -> None:
    with atomic_open(path) as fh:
        fh.write(_csir_header(series.radio, len(series)))
        fh.write(_csir_records(series.times_s, series.values, series.rssi_db).tobytes())


def write_csir_blocks(path, radio: RadioParams, blocks) -> int:
    """Stream (times, values, rssi) blocks to a CSIR-v1 file; returns the count.

    The snapshot count in the header is patched once the stream ends.
    """
    count = 0
    with atomic_open(path) as fh:
        head = _csir_header(radio, 0)
        # reserve room for the final count
        pad = len(_csir_header(radio, 10**12)) - len(head)
        fh.write(head[:-1] + b" " * pad + b"\n")
        for times, values, rssi in blocks:
            fh.write(_csir_records(times, values, rssi).tobytes())
            count += len(times)
        final = _csir_header(radio, count)
        fh.seek(0)
        fh.write(final[:-1] + b" " * (len(head) + pad - len(final)) + b"\n")
    return count


def read_csir(path) -> CfrSeries:
    path = Path(path)
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        meta = _read_header(fh, CSIR_MAGIC)
        try:
            radio = from_dict(RadioParams, meta["radio"])
            count = int(meta["snapshot_count"])
            indices = np.asarray(meta["subcarrier_indices"], dtype=np.int64)
        except (KeyError, ConfigError, TypeError, ValueError) as exc:
            raise DataError(f"bad CSIR-v1 metadata: {exc}") from None
        if not np.array_equal(indices, radio.indices):
            raise DataError("CSIR-v1 index list disagrees with radio parameters")
        dtype = _csir_dtype(indices.size)
        raw = fh.read()
    if len(raw) != count * dtype.itemsize:
        raise DataError(f"expected {count} records, payload has {len(raw) / dtype.itemsize:g}")
    rec = np.frombuffer(raw, dtype=dtype)
    iq = rec["iq"].astype(np.float64)
    values = iq[..., 0] + 1j * iq[..., 1]
    return CfrSeries(radio, rec["time_s"].astype(float), values,
                     rec["rssi_db"].astype(float), indices)


# ---------------------------------------------------------------------------
# MAT1
# ---------------------------------------------------------------------------

def write_matrix(path, data, axes: dict, meta: dict | None = None, csv: bool = False) -> None:
    """Write ``data`` with named axis grids (one per dimension, in order)."""
    data = np.asarray(data)
    names = list(axes)
    grids = [np.asarray(axes[n], dtype="<f8").ravel() for n in names]
    if len(grids) != data.ndim or any(g.size != s for g, s in zip(grids, data.shape)):
        raise DataError("axis grids do not match the matrix shape")
    is_complex = np.iscomplexobj(data)
    header = {"format": "MAT1", "shape": list(data.shape), "axes": names,
              "complex": bool(is_complex), "meta": meta or {}}
    payload = np.stack([data.real, data.imag], -1) if is_complex else data
    with atomic_open(path) as fh:
        fh.write(MAT_MAGIC + json.dumps(header, separators=(",", ":")).encode() + b"\n")
        for g in grids:
            fh.write(g.tobytes())
        fh.write(np.ascontiguousarray(payload, dtype="<f4").tobytes())
    if csv:
        write_csv_mirror(Path(path).with_suffix(".csv"), data, axes)


def read_matrix(path):
    """Returns (data, axes dict, meta)."""
    with open(path, "rb") as fh:
        header = _read_header(fh, MAT_MAGIC)
        shape = tuple(header["shape"])
        axes = {}
        for name, n in zip(header["axes"], shape):
            axes[name] = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(float)
        payload = np.frombuffer(fh.read(), dtype="<f4")
    if header["complex"]:
        arr = payload.reshape(shape + (2,)).astype(float)
        data = arr[..., 0] + 1j * arr[..., 1]
    else:
        data = payload.reshape(shape).astype(float)
    return data, axes, header.get("meta", {})


def write_csv_mirror(path, data, axes: dict) -> None:
    """Plain-text view of a 1-D or 2-D matrix (first axis down, second across)."""
    data = np.asarray(data)
    if data.ndim > 2:
        raise DataError("CSV mirror supports at most two dimensions")
    names = list(axes)
    with atomic_open(path, "w") as fh:
        if data.ndim == 1:
            fh.write(f"{names[0]},value\n")
            for x, v in zip(axes[names[0]], data):
                fh.write(f"{x!r},{v!r}\n")
            return
        cols = ",".join(repr(float(x)) for x in axes[names[1]])
        fh.write(f"{names[0]}\\{names[1]},{cols}\n")
        for x, row in zip(axes[names[0]], data):
            fh.write(repr(float(x)) + "," + ",".join(repr(v) for v in row.tolist()) + "\n")


def write_table(path, columns: dict, meta: dict | None = None) -> None:
    """CSV table with a commented JSON metadata line."""
    names = list(columns)
    n = len(next(iter(columns.values()))) if columns else 0
    with atomic_open(path, "w") as fh:
        fh.write("# " + json.dumps(meta or {}, separators=(",", ":")) + "\n")
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join("" if columns[c][i] is None else repr(float(columns[c][i]))
                              for c in names) + "\n")


class CsirReader:
    """Memory-mapped CSIR-v1 file: times and RSSI up front, CFR rows on demand."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            with open(self.path, "rb") as fh:
                meta = _read_header(fh, CSIR_MAGIC)
                offset = fh.tell()
        except OSError as exc:
            raise DataError(f"cannot read {self.path}: {exc}") from None
        try:
            self.radio = from_dict(RadioParams, meta["radio"])
            count = int(meta["snapshot_count"])
            indices = np.asarray(meta["subcarrier_indices"], dtype=np.int64)
        except (KeyError, ConfigError, TypeError, ValueError) as exc:
            raise DataError(f"bad CSIR-v1 metadata: {exc}") from None
        if not np.array_equal(indices, self.radio.indices):
            raise DataError("CSIR-v1 index list disagrees with radio parameters")
        dtype = _csir_dtype(indices.size)
        size = self.path.stat().st_size - offset
        if size != count * dtype.itemsize:
            raise DataError(f"expected {count} records, payload has {size / dtype.itemsize:g}")
        self.subcarrier_indices = indices
        self._rec = (np.memmap(self.path, dtype=dtype, mode="r", offset=offset, shape=(count,))
                     if count else np.empty(0, dtype=dtype))
        self.times_s = np.array(self._rec["time_s"], dtype=float)
        self.rssi_db = np.array(self._rec["rssi_db"], dtype=float)

    def __len__(self):
        return self.times_s.size

    def values(self, idx) -> np.ndarray:
        iq = np.asarray(self._rec["iq"][idx], dtype=np.float64)
        return iq[..., 0] + 1j * iq[..., 1]
