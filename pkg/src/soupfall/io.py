"""Soup persistence (JSON Lines) and CSV tables."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from .exceptions import SoupfallError, SoupParseError
from .geom import CurveArray, from_record, to_record
from .soup import Soup, SoupSpec


def soup_lines(soup: Soup):
    header = {"spec": soup.spec.to_record(), "seed": soup.seed, "count": len(soup),
              "n_candidates": soup.n_candidates}
    if soup.marks is not None:
        header["marks"] = [float(t) for t in soup.marks]
    yield json.dumps(header, separators=(",", ":"))
    if soup.curves.kind == "circle":
        for (x, y), r in zip(soup.curves.xy.tolist(), soup.curves.r.tolist()):
            yield json.dumps({"kind": "circle", "center": [x, y], "diam": 2.0 * r},
                             separators=(",", ":"))
    else:
        for c in soup.curves:
            yield json.dumps(to_record(c), separators=(",", ":"))


def save_soup(soup: Soup, path) -> None:
    """Write the soup as JSON Lines: a header object, then one curve per line."""
    write_text_atomic(path, "".join(line + "\n" for line in soup_lines(soup)))


def load_soup(path) -> Soup:
    """Inverse of :func:`save_soup`; raises :class:`SoupParseError` naming the bad line."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SoupParseError("empty file, expected a header line", 1)
    try:
        header = json.loads(lines[0])
        spec = SoupSpec.from_record(header["spec"])
        seed = int(header["seed"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SoupParseError(f"bad header: {exc}", 1) from exc
    curves = []
    for k, line in enumerate(lines[1:], start=2):
        try:
            curves.append(from_record(json.loads(line)))
        except (json.JSONDecodeError, SoupfallError, TypeError) as exc:
            raise SoupParseError(str(exc), k) from exc
    count = header.get("count", len(curves))
    if count != len(curves):
        raise SoupParseError(f"header announces {count} curves but {len(curves)} were found",
                             len(lines) + 1)
    marks = header.get("marks")
    if marks is not None:
        marks = np.asarray(marks, dtype=float)
        if len(marks) != len(curves):
            raise SoupParseError("marks do not match the curve count", 1)
    arr = CurveArray.from_curves(curves)
    if not curves:
        arr = CurveArray.empty("circle" if spec.shape.kind == "circle" else "mixed")
    return Soup(spec, arr, seed, marks, int(header.get("n_candidates", 0)))


def write_text_atomic(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    write_text_atomic(path, csv_text(header, rows))
