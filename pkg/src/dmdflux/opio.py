"""Binary persistence of flux operators, plus the training manifest.

File layout (little-endian throughout):

    magic   4 bytes  b"DMDF"
    u32     format version (currently 1)
    u32     payload kind: 1 = factored (P then Q), 2 = dense (A)
    u32     n_gamma
    u32     n_fs
    u32     rank k
    u32     patch size K
    u32     grid N
    f64 x2  parameter pair (kappa1, kappa2)
    f64     energy threshold epsilon
    ...     matrix payload(s), column-major float64
    u64     FNV-1a checksum of all preceding bytes

The format is self-describing and bit-exact: saving a loaded operator
reproduces the file byte for byte.
"""

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import OperatorFormatError
from .surrogate import DmdFluxOperator, StaggeredLayout

MAGIC = b"DMDF"
VERSION = 1
KIND_FACTORED = 1
KIND_DENSE = 2

_HEADER = struct.Struct("<4sIIIIIIIddd")
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def _matrix_bytes(a: np.ndarray) -> bytes:
    return np.asarray(a, dtype="<f8").tobytes(order="F")


def _read_matrix(buf: memoryview, offset: int, rows: int, cols: int):
    nbytes = rows * cols * 8
    if offset + nbytes > len(buf):
        raise OperatorFormatError("operator file is truncated")
    flat = np.frombuffer(buf[offset : offset + nbytes], dtype="<f8")
    return flat.reshape((rows, cols), order="F").copy(), offset + nbytes


def operator_bytes(op: DmdFluxOperator) -> bytes:
    """Serialize an operator, checksum included."""
    kind = KIND_FACTORED if op.kind == "factored" else KIND_DENSE
    lay = op.layout
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        kind,
        lay.n_gamma,
        lay.n_fs,
        op.rank,
        lay.patch_size,
        lay.grid_n,
        float(op.mu[0]),
        float(op.mu[1]),
        float(op.epsilon),
    )
    if kind == KIND_FACTORED:
        payload = _matrix_bytes(op.p) + _matrix_bytes(op.q)
    else:
        payload = _matrix_bytes(op.a)
    body = header + payload
    return body + struct.pack("<Q", fnv1a64(body))


def save_operator(op: DmdFluxOperator, path) -> Path:
    path = Path(path)
    path.write_bytes(operator_bytes(op))
    return path


def load_operator(path) -> DmdFluxOperator:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size + 8:
        raise OperatorFormatError("operator file is truncated")
    if data[:4] != MAGIC:
        raise OperatorFormatError("not an operator file (bad magic)")
    (
        _,
        version,
        kind,
        n_gamma,
        n_fs,
        rank,
        patch_size,
        grid_n,
        mu1,
        mu2,
        epsilon,
    ) = _HEADER.unpack_from(data)
    if version != VERSION:
        raise OperatorFormatError(f"unsupported format version {version}")
    (stored,) = struct.unpack_from("<Q", data, len(data) - 8)
    if fnv1a64(data[:-8]) != stored:
        raise OperatorFormatError("checksum mismatch (corrupt operator file)")
    layout = StaggeredLayout(n_gamma=n_gamma, patch_size=patch_size, grid_n=grid_n)
    if layout.n_fs != n_fs:
        raise OperatorFormatError("inconsistent layout fields in header")
    buf = memoryview(data)[: len(data) - 8]
    offset = _HEADER.size
    if kind == KIND_FACTORED:
        p, offset = _read_matrix(buf, offset, n_gamma, rank)
        q, offset = _read_matrix(buf, offset, rank, n_fs)
        op = DmdFluxOperator(
            layout=layout, epsilon=epsilon, rank=rank, mu=(mu1, mu2), p=p, q=q
        )
    elif kind == KIND_DENSE:
        a, offset = _read_matrix(buf, offset, n_gamma, n_fs)
        op = DmdFluxOperator(
            layout=layout, epsilon=epsilon, rank=rank, mu=(mu1, mu2), a=a
        )
    else:
        raise OperatorFormatError(f"unknown payload kind {kind}")
    if offset != len(buf):
        raise OperatorFormatError("trailing bytes after operator payload")
    return op


MANIFEST_FIELDS = [
    "file",
    "kappa1",
    "kappa2",
    "rank",
    "epsilon",
    "n_gamma",
    "n_fs",
    "patch_size",
    "grid_n",
]


def write_manifest(path, operators):
    """Record one row per trained operator file."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_FIELDS)
        for fname, op in operators:
            writer.writerow(
                [
                    fname,
                    f"{op.mu[0]:.8e}",
                    f"{op.mu[1]:.8e}",
                    op.rank,
                    f"{op.epsilon:.8e}",
                    op.layout.n_gamma,
                    op.layout.n_fs,
                    op.layout.patch_size,
                    op.layout.grid_n,
                ]
            )
    return path


def load_operator_set(directory):
    """Load every operator file in a directory, keyed by parameter pair."""
    directory = Path(directory)
    ops = []
    for path in sorted(directory.glob("*.dmdf")):
        op = load_operator(path)
        ops.append((op.mu, op))
    if not ops:
        raise OperatorFormatError(f"no operator files found in {directory}")
    return ops
