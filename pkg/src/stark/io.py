"""Readers and writers for counts, coordinates, labels, reports and plots."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.spatial import cKDTree

REPORT_FORMAT = "stark-report/1"


class FormatError(ValueError):
    pass


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(f"{path}: empty file")
    return rows


def _parse_number(text, path, lineno, kind=float):
    try:
        value = kind(text)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: cannot parse {text!r} as {kind.__name__}") from None
    return value


def load_counts(path) -> sp.csr_matrix:
    """Pixels-by-genes integer counts from Matrix Market or headered CSV."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_counts_csv(path)
    try:
        M = scipy.io.mmread(path)
    except (ValueError, OSError) as exc:
        raise FormatError(f"{path}: not a readable Matrix Market file ({exc})") from None
    M = sp.csr_matrix(M)
    if M.dtype.kind == "f":
        if not np.all(M.data == np.round(M.data)):
            bad = np.flatnonzero(M.data != np.round(M.data))[0]
            raise FormatError(f"{path}: non-integer count {M.data[bad]!r}")
    if M.dtype.kind not in "iuf":
        raise FormatError(f"{path}: counts must be real integers, got {M.dtype}")
    M = M.astype(np.int64)
    if np.any(M.data < 0):
        r, c = M.nonzero()
        neg = np.flatnonzero(M.data < 0)[0]
        raise FormatError(f"{path}: negative count at row {r[neg] + 1}, column {c[neg] + 1}")
    M.sort_indices()
    return M


def _load_counts_csv(path) -> sp.csr_matrix:
    rows = _read_csv(path)
    _, header = rows[0]
    if any(_looks_numeric(h) for h in header):
        raise FormatError(f"{path}:{rows[0][0]}: expected a header row of gene names")
    d = len(header)
    data = []
    for lineno, r in rows[1:]:
        if len(r) != d:
            raise FormatError(f"{path}:{lineno}: expected {d} fields, got {len(r)}")
        vals = [_parse_number(v, path, lineno, int) for v in r]
        if any(v < 0 for v in vals):
            raise FormatError(f"{path}:{lineno}: negative count")
        data.append(vals)
    return sp.csr_matrix(np.array(data, dtype=np.int64).reshape(len(data), d))


def _looks_numeric(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def write_counts(path, C) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(C), field="integer")


def write_matrix(path, X) -> None:
    """Real matrix in Matrix Market coordinate format, full double precision."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(np.asarray(X)), field="real", precision=17)


def load_matrix(path) -> np.ndarray:
    return np.asarray(sp.csr_matrix(scipy.io.mmread(str(path))).toarray(), dtype=float)


def load_coordinates(path) -> np.ndarray:
    """``(m, 2)`` array from a CSV with ``x`` and ``y`` header columns."""
    rows = _read_csv(path)
    header = [h.strip().lower() for h in rows[0][1]]
    if "x" not in header or "y" not in header:
        raise FormatError(f"{path}:{rows[0][0]}: header must contain columns 'x' and 'y'")
    ix, iy = header.index("x"), header.index("y")
    out = []
    for lineno, r in rows[1:]:
        if len(r) != len(header):
            raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        x, y = (_parse_number(r[i], path, lineno) for i in (ix, iy))
        if not (np.isfinite(x) and np.isfinite(y)):
            raise FormatError(f"{path}:{lineno}: non-finite coordinate")
        out.append((x, y))
    return np.array(out, dtype=float).reshape(-1, 2)


def _load_column(path):
    rows = _read_csv(path)
    for lineno, r in rows:
        if len(r) != 1:
            raise FormatError(f"{path}:{lineno}: expected a single column, got {len(r)}")
    return [(lineno, r[0].strip()) for lineno, r in rows[1:]]


def load_labels(path) -> np.ndarray:
    """One label per pixel from a single-column CSV whose first row is a header."""
    return np.array([v for _, v in _load_column(path)], dtype=object).astype(str)


def load_reads(path) -> np.ndarray:
    vals = [(_parse_number(v, path, n, int), n) for n, v in _load_column(path)]
    for v, n in vals:
        if v < 0:
            raise FormatError(f"{path}:{n}: negative read count")
    return np.array([v for v, _ in vals], dtype=np.int64)


def write_coordinates(path, pixels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in np.asarray(pixels, dtype=float):
            w.writerow([repr(float(x)), repr(float(y))])


def write_column(path, name, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([name])
        for v in values:
            w.writerow([v])


def check_dimensions(C, pixels, labels=None, reads=None) -> None:
    m = C.shape[0]
    if pixels.shape[0] != m:
        raise FormatError(f"coordinates have {pixels.shape[0]} rows but counts have {m}")
    if labels is not None and len(labels) != m:
        raise FormatError(f"labels have {len(labels)} rows but counts have {m}")
    if reads is not None and len(reads) != m:
        raise FormatError(f"reads have {len(reads)} rows but counts have {m}")


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(path, report: dict) -> None:
    Path(path).write_text(dump_report(report))


PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
    "#8c6d31", "#843c39", "#7b4173", "#3182bd", "#e6550d", "#31a354",
]


def write_label_svg(path, pixels, labels, size: float = 400.0, title: str | None = None) -> None:
    """One coloured dot per pixel at its coordinate; colours indexed by label."""
    P = np.asarray(pixels, dtype=float)
    labels = np.asarray(labels).astype(str)
    classes = sorted(set(labels.tolist()))
    colour = {c: PALETTE[i % len(PALETTE)] for i, c in enumerate(classes)}
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    scale = (size - 20.0) / span
    radius = max(scale * 0.45 * _spacing(P), 0.5)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:g}" height="{size:g}" '
        f'viewBox="0 0 {size:g} {size:g}">'
    ]
    if title:
        parts.append(f"<title>{title}</title>")
    for (x, y), lab in zip(P, labels):
        cx = 10.0 + (x - lo[0]) * scale
        cy = size - 10.0 - (y - lo[1]) * scale
        parts.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{radius:.3f}" fill="{colour[lab]}"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def _spacing(P):
    if P.shape[0] < 2:
        return 1.0
    d, _ = cKDTree(P).query(P, k=2)
    nz = d[:, 1][d[:, 1] > 0]
    return float(np.median(nz)) if nz.size else 1.0
