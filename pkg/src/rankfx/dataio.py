"""CSV ingestion, the bundled leucocyte data and custom contrast files."""

from __future__ import annotations

import csv
import itertools
from importlib import resources

import numpy as np

from .errors import InsufficientReplicationError, InvalidContrastError, InvalidDataError, LayoutError
from .ranks import Dataset

__all__ = ["load_csv", "load_leucocytes", "read_contrast", "parse_levels", "LEUCOCYTE_LEVELS"]

# Normal food before reduced food, placebo as the first treatment level.
LEUCOCYTE_LEVELS = {"food": ["normal", "reduced"], "treatment": ["placebo", "drug"]}


def parse_levels(specs) -> dict:
    """Parse ``["factor=lev1,lev2", ...]`` into ``{factor: [lev1, lev2]}``."""
    out = {}
    for spec in specs or ():
        name, sep, rest = spec.partition("=")
        if not sep or not name.strip() or not rest.strip():
            raise LayoutError(f"level order must look like factor=level1,level2; got {spec!r}")
        out[name.strip()] = [v.strip() for v in rest.split(",")]
    return out


def _read_rows(handle, response, factors):
    reader = csv.DictReader(handle)
    if reader.fieldnames is None:
        raise InvalidDataError("CSV file is empty; a header row is required")
    missing = [c for c in [response, *factors] if c not in reader.fieldnames]
    if missing:
        raise InvalidDataError(f"missing column(s) {missing}; header has {reader.fieldnames}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        raw = (rec.get(response) or "").strip()
        try:
            value = float(raw)
        except ValueError:
            raise InvalidDataError(f"row {lineno}: response {response!r} is not numeric ({raw!r})") from None
        if not np.isfinite(value):
            raise InvalidDataError(f"row {lineno}: response {response!r} is not finite ({raw!r})")
        key = []
        for f in factors:
            level = (rec.get(f) or "").strip()
            if not level:
                raise InvalidDataError(f"row {lineno}: factor {f!r} is empty")
            key.append(level)
        rows.append((tuple(key), value))
    if not rows:
        raise InvalidDataError("CSV file has no data rows")
    return rows


def _ordered_levels(rows, factors, levels):
    out = []
    for j, f in enumerate(factors):
        seen = sorted({key[j] for key, _ in rows})
        if f in levels:
            wanted = list(levels[f])
            if sorted(wanted) != seen or len(set(wanted)) != len(wanted):
                raise LayoutError(f"level order for {f!r} must list exactly the levels {seen}, got {wanted}")
            seen = wanted
        out.append(seen)
    unknown = set(levels) - set(factors)
    if unknown:
        raise LayoutError(f"level order given for unknown factor(s) {sorted(unknown)}")
    return out


def load_csv(path, response: str, factors, levels: dict | None = None) -> Dataset:
    """Read a long-format CSV into a Dataset.

    Parameters
    ----------
    path : str or path-like or file object
    response : str
        Name of the numeric response column.
    factors : sequence of str
        One or two factor column names.
    levels : dict, optional
        Explicit level order per factor; the default is lexicographic.

    Cells are ordered row-major by the factor levels.
    """
    factors = [factors] if isinstance(factors, str) else list(factors)
    if len(factors) not in (1, 2):
        raise LayoutError(f"one or two factors are supported, got {len(factors)}")
    if hasattr(path, "read"):
        rows = _read_rows(path, response, factors)
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = _read_rows(fh, response, factors)
    order = _ordered_levels(rows, factors, levels or {})
    cells = {}
    for key, value in rows:
        cells.setdefault(key, []).append(value)
    keys = list(itertools.product(*order))
    empty = [k for k in keys if k not in cells]
    if empty:
        names = ", ".join("(" + ", ".join(k) + ")" for k in empty)
        raise LayoutError(f"no observations for factor combination(s) {names}")
    small = [k for k in keys if len(cells[k]) < 2]
    if small:
        names = ", ".join(":".join(k) for k in small)
        raise InsufficientReplicationError(
            f"cell(s) {names} have fewer than 2 observations",
            groups=[keys.index(k) + 1 for k in small],
        )
    return Dataset(
        groups=tuple(cells[k] for k in keys),
        labels=tuple(keys),
        factors=tuple(factors),
        shape=tuple(len(o) for o in order),
        levels=tuple(tuple(o) for o in order),
    )


def load_leucocytes() -> Dataset:
    """The 2x2 leucocyte data (food x treatment, 10 animals per cell)."""
    ref = resources.files("rankfx") / "data" / "leucocytes.csv"
    with ref.open("r", encoding="utf-8", newline="") as fh:
        return load_csv(fh, "leucocytes", ["food", "treatment"], LEUCOCYTE_LEVELS)


def read_contrast(path, d: int | None = None) -> np.ndarray:
    """Read a headerless numeric matrix with one contrast per row."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                rows.append([float(c) for c in rec])
            except ValueError:
                raise InvalidContrastError(f"contrast file row {lineno} is not numeric: {rec}") from None
    if not rows:
        raise InvalidContrastError("contrast file is empty")
    if len({len(r) for r in rows}) != 1:
        raise InvalidContrastError("contrast rows have different lengths")
    C = np.array(rows)
    if d is not None and C.shape[1] != d:
        raise InvalidContrastError(f"contrast has {C.shape[1]} columns but the data have {d} cells")
    return C
