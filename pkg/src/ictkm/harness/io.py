"""File formats for dictionaries and signal batches.

Dictionary checkpoint (``.dic``), all little-endian::

    8 bytes   magic  b"ICTKMDIC"
    uint32    format version (1)
    uint64    d
    uint64    K
    float64   d*K atom entries, column-major (atom 0 first)

Signal batch (``.sig``), all little-endian::

    8 bytes   magic  b"ICTKMSIG"
    uint32    format version (1)
    uint64    d
    uint64    N
    uint64    S      (0 when no oracle metadata is stored)
    float64   d*N signal entries, column-major (signal 0 first)
    int64     S*N oracle support indices, signal-major
    float64   S*N signed oracle coefficients, same order

CSV exports carry a header row. Dictionaries are written one row per
coordinate with columns ``atom_0 .. atom_{K-1}``; batches one row per
signal with columns ``y_0 .. y_{d-1}`` followed by ``support_j`` and
``coef_j`` when oracle data is present.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from ..signal_model import SignalBatch

DICT_MAGIC = b"ICTKMDIC"
BATCH_MAGIC = b"ICTKMSIG"
VERSION = 1


class FormatError(ValueError):
    pass


def save_dictionary(path, dico):
    dico = np.asarray(dico, dtype="<f8")
    d, K = dico.shape
    with open(path, "wb") as fh:
        fh.write(DICT_MAGIC + struct.pack("<IQQ", VERSION, d, K))
        fh.write(dico.tobytes(order="F"))


def load_dictionary(path):
    raw = Path(path).read_bytes()
    if raw[:8] != DICT_MAGIC:
        raise FormatError(f"{path}: not a dictionary checkpoint")
    version, d, K = struct.unpack_from("<IQQ", raw, 8)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = 8 + struct.calcsize("<IQQ")
    body = np.frombuffer(raw, dtype="<f8", offset=offset)
    if body.size != d * K:
        raise FormatError(f"{path}: truncated payload")
    return body.reshape((d, K), order="F").astype(float)


def save_dictionary_csv(path, dico):
    dico = np.asarray(dico)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"atom_{k}" for k in range(dico.shape[1])])
        w.writerows(dico.tolist())


def load_dictionary_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def save_batch(path, batch: SignalBatch):
    Y = np.asarray(batch.Y, dtype="<f8")
    d, N = Y.shape
    S = 0 if batch.supports is None else batch.supports.shape[1]
    with open(path, "wb") as fh:
        fh.write(BATCH_MAGIC + struct.pack("<IQQQ", VERSION, d, N, S))
        fh.write(Y.tobytes(order="F"))
        if S:
            fh.write(np.asarray(batch.supports, dtype="<i8").tobytes(order="C"))
            fh.write(np.asarray(batch.coefficients, dtype="<f8").tobytes(order="C"))


def load_batch(path) -> SignalBatch:
    raw = Path(path).read_bytes()
    if raw[:8] != BATCH_MAGIC:
        raise FormatError(f"{path}: not a signal batch")
    version, d, N, S = struct.unpack_from("<IQQQ", raw, 8)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = 8 + struct.calcsize("<IQQQ")
    expected = offset + 8 * (d * N + 2 * S * N)
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    Y = np.frombuffer(raw, "<f8", d * N, offset).reshape((d, N), order="F").astype(float)
    if not S:
        return SignalBatch(Y)
    offset += 8 * d * N
    supports = np.frombuffer(raw, "<i8", S * N, offset).reshape(N, S).astype(np.int64)
    coefs = np.frombuffer(raw, "<f8", S * N, offset + 8 * S * N).reshape(N, S).astype(float)
    return SignalBatch(Y, supports, np.sign(coefs), coefs)


def save_batch_csv(path, batch: SignalBatch):
    Y = np.asarray(batch.Y)
    d, N = Y.shape
    S = 0 if batch.supports is None else batch.supports.shape[1]
    header = [f"y_{i}" for i in range(d)]
    header += [f"support_{j}" for j in range(S)] + [f"coef_{j}" for j in range(S)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for n in range(N):
            row = [repr(float(v)) for v in Y[:, n]]
            if S:
                row += [int(i) for i in batch.supports[n]]
                row += [repr(float(c)) for c in batch.coefficients[n]]
            w.writerow(row)


def write_rows(path, rows, fieldnames=None):
    """Write a list of dicts as CSV."""
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        w.writerows(rows)
