"""Dataset files, response vectors and result tables.

Binary dataset layout (all little-endian)::

    offset  size      field
    0       4         magic b"FDS1"
    4       2         version (u16, currently 1)
    6       2         flags (u16, bit 0 = centered)
    8       8         N (u64)
    16      8         L (u64)
    24      8 L       grid points (f64)
    24+8L   8 L       quadrature weights (f64)
    24+16L  8 N L     values, row-major (f64)

CSV datasets carry a header ``t_0,...,t_{L-1}``, one row of grid points and
then one row per function.  Optional leading ``#`` lines record the
quadrature weights (``# weights: w_0,...``) and the centered flag
(``# centered: 1``); without them the weights are the Voronoi cell lengths
of the grid.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ParameterError
from .fda import FunctionalDataset, Grid, center

MAGIC = b"FDS1"
VERSION = 1
_HEADER = struct.Struct("<4sHHQQ")
FLAG_CENTERED = 1


# ---------------------------------------------------------------------------
# binary format


def write_binary(path, dataset: FunctionalDataset) -> None:
    flags = FLAG_CENTERED if dataset.centered else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, flags, dataset.N, dataset.L))
        fh.write(dataset.grid.points.astype("<f8").tobytes())
        fh.write(dataset.grid.weights.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.values, dtype="<f8").tobytes())


def read_binary(path) -> FunctionalDataset:
    raw = Path(path).read_bytes()
    size = len(raw)
    if size < _HEADER.size:
        raise FormatError(f"{path}: truncated header, file ends at byte {size} "
                          f"but the header needs {_HEADER.size} bytes")
    magic, version, flags, N, L = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte 0, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    if N < 1 or L < 2:
        raise FormatError(f"{path}: header at byte 8 declares N={N}, L={L}")
    need = _HEADER.size + 8 * (2 * L + N * L)
    if size != need:
        what = "truncated" if size < need else "trailing bytes"
        raise FormatError(f"{path}: {what}; header declares N={N}, L={L} so the payload "
                          f"ends at byte {need}, file ends at byte {size}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    points = body[:L].astype(np.float64)
    weights = body[L:2 * L].astype(np.float64)
    values = body[2 * L:].astype(np.float64).reshape(N, L)
    _check_grid(points, weights, lambda i, part: f"byte {_HEADER.size + 8 * (part * L + i)}", path)
    if not np.all(np.isfinite(values)):
        k = int(np.argmax(~np.isfinite(values.ravel())))
        raise FormatError(f"{path}: non-finite value at byte {_HEADER.size + 8 * (2 * L + k)}")
    return FunctionalDataset(Grid(points, weights), values, centered=bool(flags & FLAG_CENTERED))


def _check_grid(points, weights, where, path):
    if not np.all(np.isfinite(points)):
        raise FormatError(f"{path}: non-finite grid point at {where(int(np.argmax(~np.isfinite(points))), 0)}")
    bad = np.flatnonzero(np.diff(points) <= 0)
    if bad.size:
        raise FormatError(f"{path}: grid not strictly increasing at {where(int(bad[0]) + 1, 0)}")
    badw = np.flatnonzero(~(weights > 0) | ~np.isfinite(weights))
    if badw.size:
        raise FormatError(f"{path}: nonpositive quadrature weight at {where(int(badw[0]), 1)}")


# ---------------------------------------------------------------------------
# CSV format


def voronoi_weights(points) -> np.ndarray:
    """Cell lengths around each point; the end cells mirror their neighbours."""
    t = np.asarray(points, dtype=np.float64)
    if t.size < 2:
        raise ParameterError("need at least two grid points")
    w = np.empty_like(t)
    w[1:-1] = 0.5 * (t[2:] - t[:-2])
    w[0] = t[1] - t[0]
    w[-1] = t[-1] - t[-2]
    return w


def _fmt(a) -> str:
    return ",".join(repr(float(x)) for x in a)


def write_csv(path, dataset: FunctionalDataset) -> None:
    L = dataset.L
    with open(path, "w", newline="") as fh:
        fh.write(f"# weights: {_fmt(dataset.grid.weights)}\n")
        if dataset.centered:
            fh.write("# centered: 1\n")
        fh.write(",".join(f"t_{i}" for i in range(L)) + "\n")
        fh.write(_fmt(dataset.grid.points) + "\n")
        for row in dataset.values:
            fh.write(_fmt(row) + "\n")


def _parse_row(text: str, L: int, lineno: int, path) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != L:
        raise FormatError(f"{path}: line {lineno} has {len(parts)} fields, expected {L}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise FormatError(f"{path}: line {lineno}: {exc}") from None


def read_csv(path) -> FunctionalDataset:
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    weights = None
    centered = False
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        key, _, val = lines[k][1:].partition(":")
        key = key.strip().lower()
        if key == "weights":
            weights = val.strip()
            weights_line = k + 1
        elif key == "centered":
            centered = val.strip() in {"1", "true", "yes"}
        k += 1
    if k >= len(lines) or not lines[k].strip():
        raise FormatError(f"{path}: line {k + 1}: missing header row")
    header = [h.strip() for h in lines[k].split(",")]
    L = len(header)
    if header != [f"t_{i}" for i in range(L)]:
        raise FormatError(f"{path}: line {k + 1}: header must read t_0,...,t_{L - 1}")
    if L < 2:
        raise FormatError(f"{path}: line {k + 1}: need at least two grid points")
    if k + 1 >= len(lines):
        raise FormatError(f"{path}: line {k + 2}: missing grid row")
    points = _parse_row(lines[k + 1], L, k + 2, path)
    if weights is None:
        w = None
    else:
        w = _parse_row(weights, L, weights_line, path)
    bad = np.flatnonzero(np.diff(points) <= 0)
    if bad.size or not np.all(np.isfinite(points)):
        raise FormatError(f"{path}: line {k + 2}: grid not strictly increasing "
                          f"(field {int(bad[0]) + 1 if bad.size else 0})")
    if w is None:
        w = voronoi_weights(points)
    elif np.any(~(w > 0)):
        raise FormatError(f"{path}: line {weights_line}: quadrature weights must be positive")
    rows = [_parse_row(line, L, k + 3 + i, path)
            for i, line in enumerate(lines[k + 2:]) if line.strip()]
    if not rows:
        raise FormatError(f"{path}: line {k + 3}: no value rows")
    values = np.vstack(rows)
    if not np.all(np.isfinite(values)):
        i = int(np.argmax(~np.all(np.isfinite(values), axis=1)))
        raise FormatError(f"{path}: line {k + 3 + i}: non-finite value")
    return FunctionalDataset(Grid(points, w), values, centered=centered)


# ---------------------------------------------------------------------------
# dispatch


def _is_csv(path) -> bool:
    return Path(path).suffix.lower() in {".csv", ".txt"}


def write_dataset(path, dataset: FunctionalDataset) -> None:
    """Write ``dataset``; ``.csv`` paths get the text format, others binary."""
    (write_csv if _is_csv(path) else write_binary)(path, dataset)


def read_dataset(path) -> FunctionalDataset:
    p = Path(path)
    if not p.exists():
        raise DataError(f"{path}: no such file")
    if p.stat().st_size == 0:
        raise FormatError(f"{path}: empty file (byte 0)")
    return read_csv(p) if _is_csv(p) else read_binary(p)


def write_response(path, y) -> None:
    with open(path, "w") as fh:
        fh.write("y\n")
        for v in np.asarray(y, dtype=np.float64):
            fh.write(repr(float(v)) + "\n")


def read_response(path) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a text file (byte {exc.start})") from None
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "y":
        raise FormatError(f"{path}: line 1: header must read 'y'")
    out = []
    for i, ln in enumerate(lines[1:], start=2):
        try:
            out.append(float(ln))
        except ValueError:
            raise FormatError(f"{path}: line {i}: not a number: {ln!r}") from None
    if not out:
        raise FormatError(f"{path}: line 2: no values")
    return np.array(out)


# ---------------------------------------------------------------------------
# preprocessing


def preprocess_spectra(dataset: FunctionalDataset, unit_norm: bool = True,
                       center_rows: bool = True) -> FunctionalDataset:
    """Optionally scale rows to unit norm, then optionally subtract the mean function."""
    out = dataset
    if unit_norm:
        nrm = np.sqrt(dataset.sqnorms)
        zero = np.flatnonzero(nrm == 0.0)
        if zero.size:
            raise DataError(f"cannot normalize zero rows: {zero[:10].tolist()}"
                            + (" ..." if zero.size > 10 else ""))
        out = FunctionalDataset(dataset.grid, dataset.values / nrm[:, None])
    if center_rows:
        out = center(out)
    return out


# ---------------------------------------------------------------------------
# result tables


COLUMNS = ("method", "C", "replicate", "metric", "value", "reason")


@dataclass
class ResultTable:
    """Tidy rows ``(method, C, replicate, metric, value, reason)`` plus metadata."""

    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self._keys = set()
        rows, self.rows = self.rows, []
        for r in rows:
            self.add(*r)

    def add(self, method: str, C: int, replicate: int, metric: str, value: float,
            reason: str = "") -> None:
        key = (str(method), int(C), int(replicate), str(metric))
        if key in self._keys:
            raise ParameterError(f"duplicate result row {key}")
        self._keys.add(key)
        self.rows.append((*key, float(value), str(reason)))

    def extend(self, other: "ResultTable") -> None:
        for r in other.rows:
            self.add(*r)

    def sort(self) -> None:
        self.rows.sort(key=lambda r: r[:4])

    def __len__(self):
        return len(self.rows)

    def values(self, method: str, C: int, metric: str) -> np.ndarray:
        return np.array([r[4] for r in self.rows
                         if r[0] == method and r[1] == C and r[3] == metric])

    def methods(self) -> list:
        return sorted({r[0] for r in self.rows})

    def metrics(self) -> list:
        return sorted({r[3] for r in self.rows})

    def sizes(self) -> list:
        return sorted({r[1] for r in self.rows})

    def write(self, path) -> None:
        """CSV rows plus a JSON sidecar next to them holding the metadata."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for m, C, rep, metric, v, reason in self.rows:
                w.writerow([m, C, rep, metric, repr(v), reason])
        with open(sidecar_path(path), "w") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path) -> "ResultTable":
        path = Path(path)
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd, None)
            if header is None or tuple(header) != COLUMNS:
                raise FormatError(f"{path}: line 1: expected header {','.join(COLUMNS)}")
            rows = []
            for i, rec in enumerate(rd, start=2):
                if len(rec) != len(COLUMNS):
                    raise FormatError(f"{path}: line {i}: expected {len(COLUMNS)} fields")
                try:
                    rows.append((rec[0], int(rec[1]), int(rec[2]), rec[3], float(rec[4]), rec[5]))
                except ValueError as exc:
                    raise FormatError(f"{path}: line {i}: {exc}") from None
        meta = {}
        side = sidecar_path(path)
        if side.exists():
            meta = json.loads(side.read_text())
        return cls(rows, meta)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def summarize(table: ResultTable) -> list[dict]:
    """Per (method, C, metric): mean, standard error and median over finite replicates."""
    groups: dict = {}
    for m, C, _, metric, v, _ in table.rows:
        groups.setdefault((m, C, metric), []).append(v)
    out = []
    for (m, C, metric), vals in sorted(groups.items()):
        a = np.asarray(vals)
        ok = a[np.isfinite(a)]
        n = ok.size
        mean = float(ok.mean()) if n else math.nan
        se = float(ok.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        med = float(np.median(ok)) if n else math.nan
        out.append({"method": m, "C": C, "metric": metric, "n": n,
                    "n_failed": int(a.size - n), "mean": mean, "se": se, "median": med})
    return out


def write_summary(path, summary: list[dict]) -> None:
    keys = ("method", "C", "metric", "n", "n_failed", "mean", "se", "median")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for s in summary:
            w.writerow([repr(s[k]) if isinstance(s[k], float) else s[k] for k in keys])


def write_gnuplot(path, summary: list[dict]) -> None:
    """One data block per (method, metric), columns ``C mean se median``.

    Blocks are separated by two blank lines so gnuplot's ``index`` selects them.
    """
    blocks: dict = {}
    for s in summary:
        blocks.setdefault((s["method"], s["metric"]), []).append(s)
    with open(path, "w") as fh:
        first = True
        for (m, metric), rows in sorted(blocks.items()):
            if not first:
                fh.write("\n\n")
            first = False
            fh.write(f"# method={m} metric={metric}\n# C mean se median\n")
            for s in sorted(rows, key=lambda s: s["C"]):
                fh.write(f"{s['C']} {s['mean']!r} {s['se']!r} {s['median']!r}\n")
