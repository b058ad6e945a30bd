"""Row streams: generators, the doubling-clique lower-bound input, and file I/O.

Two on-disk formats are supported.

Text::

    d=3
    1.0,0.0,-2.5
    ...
    #weights          (kept-row files only)
    1.0
    ...

Binary: ``b"ORSS"``, ``u32 version = 1``, ``u32 d``, then rows as row-major
little-endian float64. Kept-row files append ``b"WGHT"`` followed by one
float64 weight per row. The 4-byte tag keeps the payload length odd modulo 8,
which is how a reader tells the two layouts apart.
"""
from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DimensionMismatchError, StreamFormatError
from .linalg import as_row

MAGIC = b"ORSS"
WEIGHT_TAG = b"WGHT"
VERSION = 1
_HEADER = struct.Struct("<4sII")
WEIGHTS_MARKER = "#weights"


class RowStream:
    """A single-pass stream of ``d``-dimensional rows.

    Iterating validates every row (length and finiteness) and names the
    offending row index on failure.
    """

    def __init__(self, d: int, rows: Iterable, source: str = "generator"):
        if d < 1:
            raise ValueError(f"stream dimension must be positive, got {d}")
        self.d = int(d)
        self.source = source
        self._rows = rows

    @classmethod
    def from_array(cls, a, source: str = "generator") -> RowStream:
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionMismatchError(f"expected a 2-d array of rows, got shape {a.shape}")
        return cls(a.shape[1], iter(a), source=source)

    def __iter__(self) -> Iterator[np.ndarray]:
        for i, row in enumerate(self._rows):
            yield as_row(row, self.d, index=i)

    def to_array(self) -> np.ndarray:
        rows = list(self)
        if not rows:
            return np.zeros((0, self.d))
        return np.vstack(rows)


def as_stream(rows) -> RowStream:
    """Accept a RowStream or anything array-like."""
    if isinstance(rows, RowStream):
        return rows
    return RowStream.from_array(rows)


def gen_gaussian(n: int, d: int, seed=None) -> RowStream:
    """``n`` i.i.d. standard normal rows, produced lazily."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")

    def rows():
        rng = np.random.default_rng(seed)
        for _ in range(n):
            yield rng.standard_normal(d)

    return RowStream(d, rows())


@dataclass(frozen=True)
class GraphStreamSpec:
    """``N`` copies of the complete graph ``K_d`` streamed as weighted incidence rows."""

    d: int
    N: int
    base_edge_weight: float
    doubling: bool = True

    @classmethod
    def for_accuracy(cls, d: int, N: int, eps: float, delta: float, doubling: bool = True):
        """Base weight ``delta / (d * eps)``: the first copy's Laplacian then has
        every nonzero eigenvalue equal to ``delta / eps``."""
        return cls(d=d, N=N, base_edge_weight=delta / (d * eps), doubling=doubling)

    def validate(self) -> None:
        if self.d < 2:
            raise ValueError(f"complete graphs need d >= 2 vertices, got {self.d}")
        if self.N < 1:
            raise ValueError(f"need at least one graph copy, got N={self.N}")
        if not (math.isfinite(self.base_edge_weight) and self.base_edge_weight > 0):
            raise ValueError(f"edge weight must be positive, got {self.base_edge_weight}")

    def copy_weight(self, k: int) -> float:
        """Edge weight of copy ``k`` (0-based)."""
        return self.base_edge_weight * (2.0**k if self.doubling else 1.0)

    @property
    def n_rows(self) -> int:
        return self.N * self.d * (self.d - 1) // 2


def incidence_row(d: int, u: int, v: int, weight: float = 1.0) -> np.ndarray:
    row = np.zeros(d)
    s = math.sqrt(weight)
    row[u] = s
    row[v] = -s
    return row


def gen_doubling_cliques(spec: GraphStreamSpec) -> RowStream:
    spec.validate()
    d = spec.d

    def rows():
        for k in range(spec.N):
            w = spec.copy_weight(k)
            for u in range(d):
                for v in range(u + 1, d):
                    yield incidence_row(d, u, v, w)

    return RowStream(d, rows())


def permute_stream(stream, seed=None) -> RowStream:
    """Materialize ``stream`` and replay it in a uniformly random order."""
    stream = as_stream(stream)
    a = stream.to_array()
    order = np.random.default_rng(seed).permutation(a.shape[0])
    return RowStream(stream.d, iter(a[order]), source=stream.source)


def laplacian_complete(d: int) -> np.ndarray:
    return d * np.eye(d) - np.ones((d, d))


# ---------------------------------------------------------------- file I/O


def infer_format(path, fmt: str | None = None) -> str:
    if fmt is not None:
        fmt = fmt.lower()
        if fmt in ("bin", "binary"):
            return "bin"
        if fmt in ("csv", "text", "txt"):
            return "text"
        raise ValueError(f"unknown row format {fmt!r}")
    return "bin" if str(path).endswith((".bin", ".orss")) else "text"


def _parse_header(line: str) -> int:
    line = line.strip()
    if not line.startswith("d="):
        raise StreamFormatError(f"line 1: expected header 'd=<int>', got {line!r}")
    try:
        d = int(line[2:])
    except ValueError:
        raise StreamFormatError(f"line 1: bad dimension in header {line!r}") from None
    if d < 1:
        raise StreamFormatError(f"line 1: dimension must be positive, got {d}")
    return d


def _text_rows(path: Path, d: int) -> Iterator[np.ndarray]:
    with open(path) as fh:
        fh.readline()
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            if line == WEIGHTS_MARKER:
                return
            try:
                row = np.array([float(x) for x in line.split(",")])
            except ValueError:
                raise StreamFormatError(f"line {lineno}: malformed row {line!r}") from None
            if row.shape[0] != d:
                raise DimensionMismatchError(
                    f"line {lineno}: expected {d} values, got {row.shape[0]}"
                )
            yield row


def _binary_layout(path: Path) -> tuple[int, int, bool]:
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise StreamFormatError(f"{path}: truncated header")
    magic, version, d = _HEADER.unpack(head)
    if magic != MAGIC:
        raise StreamFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise StreamFormatError(f"{path}: unsupported version {version}")
    if d < 1:
        raise StreamFormatError(f"{path}: dimension must be positive, got {d}")
    payload = size - _HEADER.size
    if payload % 8 == 0:
        weighted, n, rem = False, *divmod(payload, 8 * d)
    elif payload % 8 == 4:
        weighted, n, rem = True, *divmod(payload - len(WEIGHT_TAG), 8 * (d + 1))
    else:
        rem = 1
    if rem:
        raise StreamFormatError(f"{path}: payload of {payload} bytes is not a whole number of rows")
    return d, n, weighted


def _binary_rows(path: Path, d: int, n: int) -> Iterator[np.ndarray]:
    rowbytes = 8 * d
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        for _ in range(n):
            yield np.frombuffer(fh.read(rowbytes), dtype="<f8").astype(np.float64)


def read_rows(path, fmt: str | None = None) -> RowStream:
    """Open a row file as a lazy stream (weights, if any, are skipped)."""
    path = Path(path)
    if infer_format(path, fmt) == "bin":
        d, n, _ = _binary_layout(path)
        return RowStream(d, _binary_rows(path, d, n), source="file")
    with open(path) as fh:
        d = _parse_header(fh.readline())
    return RowStream(d, _text_rows(path, d), source="file")


def read_weighted_rows(path, fmt: str | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Load a whole row file; returns ``(rows, weights)`` with ``weights=None``
    when the file carries no weight section."""
    path = Path(path)
    if infer_format(path, fmt) == "bin":
        d, n, weighted = _binary_layout(path)
        with open(path, "rb") as fh:
            fh.seek(_HEADER.size)
            rows = np.frombuffer(fh.read(8 * d * n), dtype="<f8").reshape(n, d).astype(np.float64)
            if not weighted:
                return rows, None
            if fh.read(len(WEIGHT_TAG)) != WEIGHT_TAG:
                raise StreamFormatError(f"{path}: missing weight section tag")
            weights = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(np.float64)
        return rows, weights

    stream = read_rows(path, "text")
    rows = stream.to_array()
    weights = None
    with open(path) as fh:
        lines = fh.read().splitlines()
    if WEIGHTS_MARKER in (ln.strip() for ln in lines):
        start = [ln.strip() for ln in lines].index(WEIGHTS_MARKER) + 1
        vals = []
        for lineno, line in enumerate(lines[start:], start=start + 1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise StreamFormatError(f"line {lineno}: malformed weight {line!r}") from None
        weights = np.array(vals)
        if weights.shape[0] != rows.shape[0]:
            raise StreamFormatError(
                f"{path}: {rows.shape[0]} rows but {weights.shape[0]} weights"
            )
    return rows, weights


class RowWriter:
    """Incremental writer; rows go to disk as they arrive, weights are held
    until :meth:`close` writes the parallel weight section."""

    def __init__(self, path, d: int, fmt: str | None = None, weighted: bool = False):
        self.path = Path(path)
        self.d = int(d)
        self.fmt = infer_format(self.path, fmt)
        self.weighted = weighted
        self.weights: list[float] = []
        self.count = 0
        if self.fmt == "bin":
            self._fh = open(self.path, "wb")
            self._fh.write(_HEADER.pack(MAGIC, VERSION, self.d))
        else:
            self._fh = open(self.path, "w")
            self._fh.write(f"d={self.d}\n")

    def write(self, row, weight: float | None = None) -> None:
        row = as_row(row, self.d, index=self.count)
        if self.fmt == "bin":
            self._fh.write(row.astype("<f8").tobytes())
        else:
            self._fh.write(",".join(repr(float(x)) for x in row) + "\n")
        if self.weighted:
            if weight is None:
                raise ValueError("weighted writer needs a weight for every row")
            self.weights.append(float(weight))
        self.count += 1

    def close(self) -> None:
        if self._fh.closed:
            return
        if self.weighted:
            if self.fmt == "bin":
                self._fh.write(WEIGHT_TAG)
                self._fh.write(np.asarray(self.weights, dtype="<f8").tobytes())
            else:
                self._fh.write(WEIGHTS_MARKER + "\n")
                self._fh.writelines(repr(w) + "\n" for w in self.weights)
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_rows(path, rows, weights=None, fmt: str | None = None, d: int | None = None) -> int:
    """Write ``rows`` (and optionally ``weights``) to ``path``; returns the row count."""
    if isinstance(rows, RowStream):
        d = rows.d if d is None else d
    else:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2:
            raise DimensionMismatchError(f"expected a 2-d array of rows, got shape {rows.shape}")
        d = rows.shape[1] if d is None else d
    with RowWriter(path, d, fmt=fmt, weighted=weights is not None) as out:
        if weights is None:
            for row in rows:
                out.write(row)
        else:
            for row, w in zip(rows, weights, strict=True):
                out.write(row, w)
        return out.count
