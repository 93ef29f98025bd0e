"""Run manifests, flat key=value config files, snapshot and step-record files."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from .driver import Observer, StepRecord, Variant
from .mesh_state import FlowState, Grid1D

SNAPSHOT_COLUMNS = ("x", "z", "h", "hu", "u", "h+z")
AUDITS = ("entropy", "wb", "conservation", "whitham")
FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


@dataclass
class RunManifest:
    scenario: str = "dam_break"
    scheme: str = "exex-loc"
    cells: int | None = None
    cfl: float | None = None
    g: float | None = None
    kappa: float = 1.01
    t_end: float | None = None
    dt_limit_factor: float | None = None
    dt_limit_set: bool = False  # distinguishes "none" from "scenario default"
    out: str | None = None
    snapshot_times: list[float] = field(default_factory=list)
    audit: list[str] = field(default_factory=list)
    backend: str = "auto"
    seed: int = 0

    def validate(self) -> None:
        try:
            Variant(self.scheme)
        except ValueError:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from "
                              f"{', '.join(v.value for v in Variant)}") from None
        bad = [a for a in self.audit if a not in AUDITS]
        if bad:
            raise ConfigError(f"unknown audit(s) {bad}; choose from {', '.join(AUDITS)}")
        if self.cells is not None and self.cells < 1:
            raise ConfigError("cells must be >= 1")
        if self.backend not in ("auto", "characteristic", "coupled"):
            raise ConfigError(f"unknown implicit backend {self.backend!r}")

    def echo(self) -> dict:
        return asdict(self)


def _parse_float_list(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _parse_optional_factor(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "off") else float(text)


# config keys mirror the long CLI flags; both dash and underscore spellings are accepted
_CONFIG_PARSERS = {
    "scenario": str,
    "scheme": str,
    "cells": int,
    "cfl": float,
    "g": float,
    "kappa": float,
    "t_end": float,
    "dt_limit_factor": _parse_optional_factor,
    "out": str,
    "snapshot_times": _parse_float_list,
    "audit": lambda s: [a.strip() for a in s.split(",") if a.strip()],
    "backend": str,
    "seed": int,
}


def read_config(path: str | Path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in _CONFIG_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](value)
        except ValueError as err:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {err}") from None
    return values


def build_manifest(file_values: dict, cli_values: dict) -> RunManifest:
    """Merge config-file and CLI values (CLI wins; ``None`` means unset)."""
    merged = dict(file_values)
    merged.update({k: v for k, v in cli_values.items() if v is not None})
    known = {f.name for f in fields(RunManifest)}
    manifest = RunManifest(**{k: v for k, v in merged.items() if k in known})
    manifest.dt_limit_set = "dt_limit_factor" in merged
    manifest.validate()
    return manifest


def _fmt(v) -> str:
    return FLOAT_FMT % v


def snapshot_array(state: FlowState, grid: Grid1D) -> np.ndarray:
    return np.column_stack([grid.cell_centers, grid.z, state.h, state.hu, state.u, state.h + grid.z])


def write_snapshot(path: str | Path, state: FlowState, grid: Grid1D, header: dict | None = None) -> None:
    data = snapshot_array(state, grid)
    if not np.all(np.isfinite(data)):
        raise SnapshotError("refusing to write non-finite snapshot columns")
    lines = [f"# {k} = {json.dumps(v, sort_keys=True)}" for k, v in (header or {}).items()]
    lines.append(f"# t = {_fmt(state.time)}")
    lines.append(f"# x_min = {_fmt(grid.x_min)}")
    lines.append(f"# x_max = {_fmt(grid.x_max)}")
    lines.append("# " + ",".join(SNAPSHOT_COLUMNS))
    for row in data:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class Snapshot:
    header: dict
    data: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.data[:, SNAPSHOT_COLUMNS.index(name)]

    @property
    def t(self) -> float:
        return float(self.header["t"])

    def state(self) -> FlowState:
        return FlowState(self.column("h").copy(), self.column("hu").copy(), self.t)

    def grid(self) -> Grid1D:
        return Grid1D(float(self.header["x_min"]), float(self.header["x_max"]), self.data.shape[0],
                      self.column("z").copy())


def read_snapshot(path: str | Path) -> Snapshot:
    header: dict = {}
    rows = []
    for raw in Path(path).read_text().splitlines():
        if raw.startswith("#"):
            body = raw[1:].strip()
            if "=" in body:
                k, v = (s.strip() for s in body.split("=", 1))
                header[k] = v
            continue
        if raw.startswith("FAILED"):
            raise SnapshotError(f"{path}: run failed ({raw})")
        if raw.strip():
            rows.append([float(t) for t in raw.split(",")])
    if not rows:
        raise SnapshotError(f"{path}: no data rows")
    data = np.array(rows)
    if data.shape[1] != len(SNAPSHOT_COLUMNS):
        raise SnapshotError(f"{path}: expected {len(SNAPSHOT_COLUMNS)} columns, got {data.shape[1]}")
    return Snapshot(header, data)


def snapshot_name(t: float) -> str:
    return f"snapshot_t{t:.6g}.csv"


class SnapshotWriter(Observer):
    def __init__(self, out_dir: Path, grid: Grid1D, header: dict):
        self.out_dir = out_dir
        self.grid = grid
        self.header = header
        self.paths: list[Path] = []

    def on_snapshot(self, state: FlowState) -> None:
        path = self.out_dir / snapshot_name(state.time)
        write_snapshot(path, state, self.grid, self.header)
        self.paths.append(path)


class StepRecordWriter(Observer):
    """Streams step records as CSV; ``fail`` appends a FAILED marker row."""

    def __init__(self, path: Path, flush_every: int = 1000):
        self.path = path
        self._fh = open(path, "w")
        self._fh.write(",".join(StepRecord.FIELDS) + "\n")
        self._count = 0
        self._flush_every = flush_every

    def on_step(self, state, record, data) -> None:
        self._fh.write(",".join(_record_cell(getattr(record, f)) for f in StepRecord.FIELDS) + "\n")
        self._count += 1
        if self._count % self._flush_every == 0:
            self._fh.flush()

    def fail(self, reason: str) -> None:
        self._fh.write(f"FAILED,{reason.replace(',', ';').replace(chr(10), ' ')}\n")
        self.close()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def _record_cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return _fmt(v)


def read_step_records(path: str | Path) -> tuple[list[dict], bool]:
    """Rows as dicts plus a flag telling whether the run completed."""
    lines = Path(path).read_text().splitlines()
    names = lines[0].split(",")
    rows, ok = [], True
    for raw in lines[1:]:
        if raw.startswith("FAILED"):
            ok = False
            break
        rows.append({k: float(v) for k, v in zip(names, raw.split(","))})
    return rows, ok


def write_summary(path: str | Path, summary: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def difference_norms(a: Snapshot, b: Snapshot, columns: Iterable[str] = ("h", "u", "h+z")) -> dict:
    """L1 (dx-weighted), relative L1 and Linf differences; the finer grid is
    averaged onto the coarser one when the cell counts have an integer ratio."""
    na, nb = a.data.shape[0], b.data.shape[0]
    coarse, fine = (a, b) if na <= nb else (b, a)
    nc, nf = coarse.data.shape[0], fine.data.shape[0]
    if nf % nc:
        raise ConfigError(f"incompatible grids: {na} and {nb} cells")
    ratio = nf // nc
    xa = (float(a.header.get("x_min", "nan")), float(a.header.get("x_max", "nan")))
    xb = (float(b.header.get("x_min", "nan")), float(b.header.get("x_max", "nan")))
    if all(map(math.isfinite, xa + xb)) and not np.allclose(xa, xb):
        raise ConfigError(f"incompatible domains {xa} and {xb}")
    dx = (xa[1] - xa[0]) / nc if all(map(math.isfinite, xa)) else 1.0 / nc
    out = {"ratio": ratio}
    for name in columns:
        c = coarse.column(name)
        f = fine.column(name).reshape(nc, ratio).mean(axis=1)
        diff = np.abs(c - f)
        ref = np.abs(f).sum()
        out[name] = {
            "l1": float(diff.sum() * dx),
            "l1_rel": float(diff.sum() / ref) if ref > 0 else float(diff.sum()),
            "linf": float(diff.max()),
        }
    return out
