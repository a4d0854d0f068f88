"""Readers and writers: MatrixMarket, label files, HSI cubes, PPM maps, CSV reports."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .types import UNASSIGNED, OrthogonalH, SparseMatrix, as_dense, check_labels


class FormatError(ValueError):
    """Malformed or inconsistent input file."""


# MatrixMarket ----------------------------------------------------------------

_MM_FIELDS = {"real", "integer", "pattern"}


def _data_lines(lines):
    for lineno, line in lines:
        s = line.strip()
        if s and not s.startswith("%"):
            yield lineno, s


def read_matrix_market(path) -> SparseMatrix:
    """Parse a ``coordinate`` (real/integer/pattern, general) or ``array`` file.

    Indices are 1-based on disk; duplicate coordinates are summed.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.strip().split()
        if len(parts) != 5 or parts[0].lower() != "%%matrixmarket" or parts[1].lower() != "matrix":
            raise FormatError(f"{path}: bad MatrixMarket header {header.strip()!r}")
        layout, fld, sym = (p.lower() for p in parts[2:])
        if layout not in ("coordinate", "array"):
            raise FormatError(f"{path}: unsupported layout {layout!r}")
        if fld not in _MM_FIELDS or (layout == "array" and fld == "pattern"):
            raise FormatError(f"{path}: unsupported field {fld!r}")
        if sym != "general":
            raise FormatError(f"{path}: only 'general' symmetry is supported, got {sym!r}")
        body = _data_lines(enumerate(fh, start=2))
        try:
            lineno, size = next(body)
        except StopIteration:
            raise FormatError(f"{path}: missing size line") from None
        try:
            dims = [int(t) for t in size.split()]
        except ValueError:
            raise FormatError(f"{path}:{lineno}: bad size line {size!r}") from None

        if layout == "array":
            if len(dims) != 2:
                raise FormatError(f"{path}:{lineno}: array size line needs 2 integers")
            m, n = dims
            vals = []
            for lineno, s in body:
                try:
                    vals.append(float(s.split()[0]))
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad value {s!r}") from None
            if len(vals) != m * n:
                raise FormatError(f"{path}: expected {m * n} values, found {len(vals)}")
            dense = np.array(vals, dtype=np.float64).reshape((n, m)).T
            return SparseMatrix.from_dense(dense)

        if len(dims) != 3:
            raise FormatError(f"{path}:{lineno}: coordinate size line needs 3 integers")
        m, n, nnz = dims
        if min(dims) < 0:
            raise FormatError(f"{path}:{lineno}: negative size")
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.ones(nnz, dtype=np.float64)
        want = 2 if fld == "pattern" else 3
        count = 0
        for lineno, s in body:
            toks = s.split()
            if count >= nnz:
                raise FormatError(f"{path}:{lineno}: more entries than declared ({nnz})")
            if len(toks) != want:
                raise FormatError(f"{path}:{lineno}: expected {want} fields, got {len(toks)}")
            try:
                i, j = int(toks[0]), int(toks[1])
                if want == 3:
                    vals[count] = float(toks[2])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad entry {s!r}") from None
            if not (1 <= i <= m and 1 <= j <= n):
                raise FormatError(f"{path}:{lineno}: index ({i}, {j}) outside {m}x{n}")
            if not math.isfinite(vals[count]):
                raise FormatError(f"{path}:{lineno}: non-finite value")
            rows[count], cols[count] = i - 1, j - 1
            count += 1
        if count != nnz:
            raise FormatError(f"{path}: declared {nnz} entries, found {count}")
    return SparseMatrix.from_triples((m, n), rows, cols, vals)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_matrix_market(path, x: SparseMatrix) -> None:
    """Write stored entries column by column at full precision."""
    m, n = x.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{m} {n} {x.nnz}\n")
        cols = x.col_of_entry + 1
        rows = x.indices + 1
        fh.writelines(f"{i} {j} {_fmt(v)}\n" for i, j, v in zip(rows.tolist(), cols.tolist(), x.data.tolist()))


def write_dense_matrix_market(path, w) -> None:
    """Write every entry of a dense matrix (zeros included) as coordinates."""
    w = as_dense(w)
    m, r = w.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{m} {r} {m * r}\n")
        for j in range(r):
            for i in range(m):
                fh.write(f"{i + 1} {j + 1} {_fmt(w[i, j])}\n")


def read_dense_matrix_market(path) -> np.ndarray:
    return read_matrix_market(path).toarray()


# label files -----------------------------------------------------------------


def read_labels(path) -> np.ndarray:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                out.append(int(s))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: not an integer label: {s!r}") from None
    try:
        return check_labels(np.array(out, dtype=np.int64))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


# hyperspectral cubes ---------------------------------------------------------

_DTYPES = {"f32": "f4", "f64": "f8"}
_ORDERS = {"le": "<", "be": ">"}


@dataclass
class HsiCube:
    """Band-sequential cube; ``values`` has shape ``(bands, height * width)``."""

    bands: int
    width: int
    height: int
    values: np.ndarray
    wavelengths: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.bands, self.width * self.height):
            raise ValueError(
                f"values shape {self.values.shape} != ({self.bands}, {self.width * self.height})"
            )
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("cube values must be finite and nonnegative")
        if self.wavelengths is not None:
            self.wavelengths = np.asarray(self.wavelengths, dtype=np.float64)
            if self.wavelengths.shape != (self.bands,):
                raise ValueError("need one wavelength per band")

    @property
    def n(self) -> int:
        return self.width * self.height

    def matrix(self) -> SparseMatrix:
        return SparseMatrix.from_dense(self.values)


def _parse_header(path: Path) -> dict[str, str]:
    keys = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if ":" not in s:
                raise FormatError(f"{path}:{lineno}: expected 'key: value', got {s!r}")
            k, v = s.split(":", 1)
            keys[k.strip().lower()] = v.strip()
    return keys


def read_hsi_cube(header_path) -> HsiCube:
    header_path = Path(header_path)
    keys = _parse_header(header_path)
    for k in ("bands", "width", "height", "dtype", "byteorder", "data"):
        if k not in keys:
            raise FormatError(f"{header_path}: missing key {k!r}")
    try:
        bands, width, height = int(keys["bands"]), int(keys["width"]), int(keys["height"])
    except ValueError:
        raise FormatError(f"{header_path}: bands/width/height must be integers") from None
    if min(bands, width, height) < 1:
        raise FormatError(f"{header_path}: dimensions must be positive")
    if keys["dtype"] not in _DTYPES:
        raise FormatError(f"{header_path}: dtype must be f32 or f64")
    if keys["byteorder"] not in _ORDERS:
        raise FormatError(f"{header_path}: byteorder must be le or be")
    if keys.get("layout", "bsq").lower() not in ("bsq", "band-sequential"):
        raise FormatError(f"{header_path}: only band-sequential layout is supported")
    dtype = np.dtype(_ORDERS[keys["byteorder"]] + _DTYPES[keys["dtype"]])
    data_path = header_path.parent / keys["data"]
    raw = data_path.read_bytes()
    expected = bands * width * height * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"{data_path}: {len(raw)} bytes, header implies {expected} "
            f"({bands} bands x {width} x {height} x {dtype.itemsize})"
        )
    values = np.frombuffer(raw, dtype=dtype).astype(np.float64).reshape(bands, height * width)
    wl = None
    if "wavelengths" in keys:
        try:
            wl = np.array([float(t) for t in keys["wavelengths"].replace(",", " ").split()])
        except ValueError:
            raise FormatError(f"{header_path}: bad wavelengths list") from None
    try:
        return HsiCube(bands, width, height, values, wl)
    except ValueError as exc:
        raise FormatError(f"{header_path}: {exc}") from None


def write_hsi_cube(header_path, cube: HsiCube, dtype: str = "f64", byteorder: str = "le") -> None:
    header_path = Path(header_path)
    data_name = header_path.with_suffix(".raw").name
    lines = [
        f"bands: {cube.bands}",
        f"width: {cube.width}",
        f"height: {cube.height}",
        f"dtype: {dtype}",
        f"byteorder: {byteorder}",
        "layout: bsq",
        f"data: {data_name}",
    ]
    if cube.wavelengths is not None:
        lines.append("wavelengths: " + ",".join(_fmt(v) for v in cube.wavelengths))
    header_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    np_dtype = np.dtype(_ORDERS[byteorder] + _DTYPES[dtype])
    (header_path.parent / data_name).write_bytes(cube.values.astype(np_dtype).tobytes())


# cluster maps ----------------------------------------------------------------

PALETTE = np.array(
    [
        (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
        (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
        (188, 189, 34), (23, 190, 207), (174, 199, 232), (255, 187, 120),
        (152, 223, 138), (255, 152, 150), (197, 176, 213), (255, 255, 255),
    ],
    dtype=np.uint8,
)
UNASSIGNED_COLOR = np.array((0, 0, 0), dtype=np.uint8)


def write_cluster_map(path, assignment, width: int, height: int) -> None:
    """Binary PPM with one palette color per cluster, pixels in row-major order."""
    if isinstance(assignment, OrthogonalH):
        r, labels = assignment.r, assignment.assignment
    else:
        labels = np.asarray(assignment, dtype=np.int64)
        r = int(labels.max()) + 1 if labels.size else 0
    if r > len(PALETTE):
        raise ValueError(f"at most {len(PALETTE)} clusters can be drawn, got {r}")
    if labels.size != width * height:
        raise ValueError(f"{labels.size} labels for a {width}x{height} image")
    if np.any(labels >= len(PALETTE)) or np.any(labels < UNASSIGNED):
        raise ValueError("label out of palette range")
    pixels = np.where((labels == UNASSIGNED)[:, None], UNASSIGNED_COLOR, PALETTE[np.maximum(labels, 0)])
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.astype(np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    """Decode a P6 file into a ``(height, width, 3)`` uint8 array."""
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PPM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace before the raster
    if tokens[0] != b"P6":
        raise FormatError(f"{path}: not a P6 file")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PPM supported")
    body = raw[pos:]
    if len(body) != width * height * 3:
        raise FormatError(f"{path}: raster has {len(body)} bytes, expected {width * height * 3}")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)


def decode_cluster_map(path) -> np.ndarray:
    """Recover per-pixel labels from a map written by :func:`write_cluster_map`."""
    img = read_ppm(path).reshape(-1, 3)
    lut = {tuple(c): k for k, c in enumerate(PALETTE.tolist())}
    lut[tuple(UNASSIGNED_COLOR.tolist())] = UNASSIGNED
    try:
        return np.array([lut[tuple(p)] for p in img.tolist()], dtype=np.int64)
    except KeyError as exc:
        raise FormatError(f"{path}: color {exc.args[0]} is not in the palette") from None


# run reports -----------------------------------------------------------------

REPORT_HEADER = ["dataset", "algorithm", "r", "seed", "metric_name", "metric_value", "iterations", "time_s"]
TRACE_HEADER = ["iter", "objective", "h_change"]


@dataclass
class RunReport:
    dataset: str
    algorithm: str
    r: int
    seed: int
    iterations: int = 0
    time_s: float = 0.0
    metric_name: str = ""
    metric_value: float = float("nan")
    objective: list[float] = field(default_factory=list)
    h_change: list[float] = field(default_factory=list)
    n: int = 0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def trace_name(self) -> str:
        return f"{self.dataset}_{self.algorithm}_{self.seed}.trace.csv"


def write_trace_csv(path, objective, h_change) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(TRACE_HEADER)
        for t, (f, dh) in enumerate(zip(objective, h_change), start=1):
            out.writerow([t, repr(float(f)), repr(float(dh))])


def read_trace_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [float(r["objective"]) for r in rows], [float(r["h_change"]) for r in rows]


def write_report_csv(path, reports) -> list[Path]:
    """Write the run table plus one trace file per run next to it.

    Failed runs keep their row with ``metric_name`` set to ``failed``.
    Returns the paths written.
    """
    path = Path(path)
    folder = path.parent
    written = [path]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(REPORT_HEADER)
        for rep in reports:
            name = "failed" if rep.failed else rep.metric_name
            out.writerow([
                rep.dataset, rep.algorithm, rep.r, rep.seed, name,
                "" if math.isnan(rep.metric_value) else repr(float(rep.metric_value)),
                rep.iterations, repr(float(rep.time_s)),
            ])
    for rep in reports:
        if rep.failed:
            continue
        trace = folder / rep.trace_name()
        write_trace_csv(trace, rep.objective, rep.h_change)
        written.append(trace)
    return written


def read_report_csv(path) -> list[RunReport]:
    path = Path(path)
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_HEADER:
            raise FormatError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            rep = RunReport(
                dataset=row["dataset"],
                algorithm=row["algorithm"],
                r=int(row["r"]),
                seed=int(row["seed"]),
                iterations=int(row["iterations"]),
                time_s=float(row["time_s"]),
                metric_name=row["metric_name"],
                metric_value=float(row["metric_value"]) if row["metric_value"] else float("nan"),
            )
            if rep.metric_name == "failed":
                rep.error = "failed"
            else:
                trace = path.parent / rep.trace_name()
                if os.path.exists(trace):
                    rep.objective, rep.h_change = read_trace_csv(trace)
            out.append(rep)
    return out
