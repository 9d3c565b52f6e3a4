"""Text formats: instance files, factor files and result documents.

Instance file (1-based indices)::

    # psdcomplete-instance v1
    n m
    i j value          (m lines, i <= j, '#' comment lines allowed)

Factor file::

    # psdcomplete-factor v1
    n q
    lam_1 ... lam_q
    U[0, 0] ... U[0, q-1]
    ...                (n rows, row-major)

Reals are written with 17 significant digits so a write/read round trip is
bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

from .completion import CompletionInstance

INSTANCE_TAG = "# psdcomplete-instance v1"
FACTOR_TAG = "# psdcomplete-factor v1"
RESULT_FORMAT = "psdcomplete-result/1"
BENCH_TAG = "# psdcomplete-bench v1"


class FormatError(ValueError):
    """Malformed input file; the message names the offending line."""


def _fmt(x):
    return format(float(x), ".17g")


def _content_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def parse_instance(text, source="<string>"):
    lines = _content_lines(text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise FormatError(f"{source}: empty instance file") from None
    parts = header.split()
    try:
        n, m = (int(p) for p in parts)
    except ValueError:
        raise FormatError(f"{source}:{lineno}: expected header 'n m', got {header!r}") from None
    if n < 1 or m < 0:
        raise FormatError(f"{source}:{lineno}: invalid sizes n={n}, m={m}")
    rows, cols, vals = [], [], []
    seen = {}
    for lineno, line in lines:
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"{source}:{lineno}: expected 'i j value', got {line!r}")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(f"{source}:{lineno}: cannot parse {line!r}") from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise FormatError(f"{source}:{lineno}: index out of range 1..{n}")
        if i > j:
            raise FormatError(f"{source}:{lineno}: entries must satisfy i <= j, got ({i}, {j})")
        if not np.isfinite(v):
            raise FormatError(f"{source}:{lineno}: value must be finite")
        if (i, j) in seen:
            raise FormatError(f"{source}:{lineno}: duplicate entry ({i}, {j}), first given on line {seen[i, j]}")
        seen[i, j] = lineno
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if len(vals) != m:
        raise FormatError(f"{source}: header announces m={m} entries but {len(vals)} were found")
    present = {r for r, c in zip(rows, cols) if r == c}
    missing = [d + 1 for d in range(n) if d not in present]
    if missing:
        raise FormatError(f"{source}: diagonal entries missing for indices {missing[:10]}")
    return CompletionInstance(n, np.array(rows), np.array(cols), np.array(vals), {"source": source})


def read_instance(path):
    with open(path) as fh:
        return parse_instance(fh.read(), str(path))


def format_instance(inst):
    out = [INSTANCE_TAG, f"{inst.n} {inst.m}"]
    for i, j, v in inst.entries():
        out.append(f"{i + 1} {j + 1} {_fmt(v)}")
    return "\n".join(out) + "\n"


def write_instance(inst, path):
    with open(path, "w") as fh:
        fh.write(format_instance(inst))


def write_factor(U, lam, path):
    U = np.asarray(U, dtype=float)
    lam = np.asarray(lam, dtype=float)
    n, q = U.shape
    with open(path, "w") as fh:
        fh.write(f"{FACTOR_TAG}\n{n} {q}\n")
        fh.write(" ".join(_fmt(x) for x in lam) + "\n")
        for row in U:
            fh.write(" ".join(_fmt(x) for x in row) + "\n")


def read_factor(path):
    with open(path) as fh:
        lines = list(_content_lines(fh.read()))
    if not lines:
        raise FormatError(f"{path}: empty factor file")
    try:
        n, q = (int(p) for p in lines[0][1].split())
    except ValueError:
        raise FormatError(f"{path}:{lines[0][0]}: expected header 'n q'") from None
    body = lines[1:]
    if q == 0:
        return np.zeros((n, 0)), np.zeros(0)
    if len(body) != n + 1:
        raise FormatError(f"{path}: expected {n + 1} data lines, found {len(body)}")
    lam = np.array([float(x) for x in body[0][1].split()])
    U = np.array([[float(x) for x in line.split()] for _, line in body[1:]])
    if lam.size != q or U.shape != (n, q):
        raise FormatError(f"{path}: factor shape does not match header n={n}, q={q}")
    return U, lam


def write_result(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path is None:
        return text
    with open(path, "w") as fh:
        fh.write(text + "\n")
    return text


def read_result(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != RESULT_FORMAT:
        raise FormatError(f"{path}: not a {RESULT_FORMAT} document")
    return doc
