"""Reading and writing measures, closed sets, couplings, barriers and samples.

JSON files carry ``"format_version": 1``. Floats are written with ``repr`` so a
write followed by a read gives back the same numbers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .measures import ClosedSet, DiscreteMeasure, MeasureError
from .shadows import Coupling
from .solvers import Barrier, GridSpec, TimeChangeSpec

FORMAT_VERSION = 1


class InputError(ValueError):
    """Malformed input file; the message names the offending field."""


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise InputError(f"{path}: not valid JSON ({err})") from err


def _num(v, where):
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise InputError(f"{where}: expected a number, got {v!r}") from None
    if not math.isfinite(out):
        raise InputError(f"{where}: expected a finite number, got {v!r}")
    return out


def measure_from_dict(d: dict, where: str = "measure") -> DiscreteMeasure:
    """Measure from ``{"atoms": [{"x":..,"w":..}, ...]}`` or a quantile description.

    A quantile description ``{"quantile_of": "normal", "params": {...}, "n": 64}``
    expands to ``n`` equal atoms at the mid-quantiles of the scipy distribution.
    """
    if not isinstance(d, dict):
        raise InputError(f"{where}: expected a JSON object")
    _check_version(d, where)
    if "quantile_of" in d:
        n = d.get("n", 64)
        if not isinstance(n, int) or n < 1:
            raise InputError(f"{where}.n: expected a positive integer, got {n!r}")
        params = d.get("params", {})
        if not isinstance(params, dict):
            raise InputError(f"{where}.params: expected an object")
        try:
            return DiscreteMeasure.from_quantiles(d["quantile_of"], n, **params)
        except (AttributeError, TypeError) as err:
            raise InputError(f"{where}.quantile_of: cannot build {d['quantile_of']!r} ({err})") from err
    if "atoms" not in d:
        raise InputError(f"{where}: missing field 'atoms'")
    atoms = d["atoms"]
    if not isinstance(atoms, list):
        raise InputError(f"{where}.atoms: expected a list")
    xs, ws = [], []
    for i, a in enumerate(atoms):
        if not isinstance(a, dict) or "x" not in a or "w" not in a:
            raise InputError(f"{where}.atoms[{i}]: expected an object with 'x' and 'w'")
        xs.append(_num(a["x"], f"{where}.atoms[{i}].x"))
        ws.append(_num(a["w"], f"{where}.atoms[{i}].w"))
    try:
        return DiscreteMeasure(xs, ws)
    except MeasureError as err:
        raise InputError(f"{where}.atoms: {err}") from err


def measure_to_dict(m: DiscreteMeasure) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "atoms": [{"x": float(x), "w": float(w)} for x, w in zip(m.atoms, m.weights)],
    }


def _check_version(d, where):
    v = d.get("format_version", FORMAT_VERSION)
    if v != FORMAT_VERSION:
        raise InputError(f"{where}.format_version: unsupported version {v!r}")


def _read_csv_rows(path):
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    return rows


def read_measure(path) -> DiscreteMeasure:
    """Measure from a ``.json`` file or a CSV file of ``x,w`` rows (header optional)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        rows = _read_csv_rows(path)
        if rows and rows[0][:2] == ["x", "w"]:
            rows = rows[1:]
        xs, ws = [], []
        for i, r in enumerate(rows, start=1):
            if len(r) < 2:
                raise InputError(f"{path}: row {i}: expected 'x,w'")
            xs.append(_num(r[0], f"{path}: row {i} x"))
            ws.append(_num(r[1], f"{path}: row {i} w"))
        try:
            return DiscreteMeasure(xs, ws)
        except MeasureError as err:
            raise InputError(f"{path}: {err}") from err
    return measure_from_dict(_load_json(path), where=str(path))


def write_measure(m: DiscreteMeasure, path=None, fmt: str = "json") -> str:
    if fmt == "csv":
        lines = ["x,w"] + [f"{float(x)!r},{float(w)!r}" for x, w in zip(m.atoms, m.weights)]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(measure_to_dict(m), indent=1) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_closed_set(path) -> ClosedSet:
    d = _load_json(path)
    if not isinstance(d, dict) or "components" not in d:
        raise InputError(f"{path}: missing field 'components'")
    _check_version(d, str(path))
    comps = []
    for i, c in enumerate(d["components"]):
        if not isinstance(c, (list, tuple)) or len(c) != 2:
            raise InputError(f"{path}: components[{i}]: expected [lo, hi]")
        comps.append((_num(c[0], f"components[{i}][0]"), _num(c[1], f"components[{i}][1]")))
    try:
        return ClosedSet(comps)
    except MeasureError as err:
        raise InputError(f"{path}: components: {err}") from err


def write_closed_set(F: ClosedSet, path=None) -> str:
    text = json.dumps({"format_version": FORMAT_VERSION, **F.to_dict()}) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def write_coupling(c: Coupling, path=None) -> str:
    lines = ["source_x,source_w,target_x,mass"]
    lines += [",".join(repr(float(v)) for v in r) for r in c.to_records()]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_coupling(path) -> Coupling:
    return read_coupling_text(Path(path).read_text(), str(path))


def read_coupling_text(text: str, path: str = "<coupling>") -> Coupling:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    if rows and rows[0][0] == "source_x":
        rows = rows[1:]
    recs = []
    for i, r in enumerate(rows, start=1):
        if len(r) != 4:
            raise InputError(f"{path}: row {i}: expected source_x,source_w,target_x,mass")
        recs.append(tuple(_num(v, f"{path}: row {i} {k}") for v, k in zip(r, ("source_x", "source_w", "target_x", "mass"))))
    return Coupling.from_records(recs)


def _grid_comment(grid: GridSpec, **extra) -> str:
    return "# " + json.dumps({"format_version": FORMAT_VERSION, "grid": grid.to_dict(), **extra})


def _grid_from_comment(path) -> tuple[GridSpec, dict]:
    first = Path(path).read_text().split("\n", 1)[0]
    if not first.startswith("#"):
        raise InputError(f"{path}: missing '# {{...}}' header line with the grid")
    try:
        meta = json.loads(first[1:])
        g = meta["grid"]
        h = float(g["h"])
        grid = GridSpec(h, int(round(g["x_min"] / h)), int(round(g["x_max"] / h)), int(g["n_levels"]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        raise InputError(f"{path}: bad header line ({err})") from err
    return grid, meta


def write_barrier(b: Barrier, path=None) -> str:
    """Barrier CSV: a grid header line, then ``level_index,interval_lo,interval_hi`` rows."""
    lines = [_grid_comment(b.grid), "level_index,interval_lo,interval_hi"]
    lines += [f"{lev},{float(a)!r},{float(c)!r}" for lev, a, c in b.to_records()]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_barrier(path) -> Barrier:
    grid, _ = _grid_from_comment(path)
    rows = _read_csv_rows(path)
    if rows and rows[0][0] == "level_index":
        rows = rows[1:]
    recs = []
    for i, r in enumerate(rows, start=1):
        if len(r) != 3:
            raise InputError(f"{path}: row {i}: expected level_index,interval_lo,interval_hi")
        try:
            lev = int(r[0])
        except ValueError:
            raise InputError(f"{path}: row {i} level_index: expected an integer, got {r[0]!r}") from None
        recs.append((lev, _num(r[1], f"row {i} interval_lo"), _num(r[2], f"row {i} interval_hi")))
    return Barrier.from_records(recs, grid)


def write_surface(surface, path=None, every: int = 1) -> str:
    lines = ["level,x,u,v"] + [f"{l},{x!r},{u!r},{v!r}" for l, x, u, v in surface.to_records(every)]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def write_samples(samples, path=None) -> str:
    head = _grid_comment(samples.grid, spec=samples.spec.to_dict(), seed=samples.seed,
                         levels=[float(l) for l in samples.levels], capped=int(samples.capped.sum()))
    buf = io.StringIO()
    buf.write(head + "\n")
    csv.writer(buf, lineterminator="\n").writerows(samples.to_records())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_samples(path):
    from .montecarlo import StoppedSamples

    grid, meta = _grid_from_comment(path)
    rows = _read_csv_rows(path)[1:]
    levels = np.asarray(meta.get("levels", []), dtype=float)
    spec_d = meta.get("spec", {"variant": "root"})
    spec = TimeChangeSpec(spec_d["variant"], spec_d.get("lam"), spec_d.get("n_stages", 1))
    try:
        arr = np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(len(rows), 3 + levels.size)
    except ValueError as err:
        raise InputError(f"{path}: malformed sample rows ({err})") from err
    n = arr.shape[0]
    capped = np.zeros(n, dtype=bool)
    return StoppedSamples(grid, spec, levels, arr[:, 0], arr[:, 1].astype(np.int64), arr[:, 2], arr[:, 3:],
                          capped, int(meta.get("seed", 0)))
