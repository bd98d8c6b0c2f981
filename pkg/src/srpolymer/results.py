"""Result tables, CSV serialisation and run manifests."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def add(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"{self.name}: expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(list(values))


def format_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def table_to_csv(table: Table, config_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_table(table: Table, out_dir: Path, config_hash: str) -> Path:
    path = out_dir / f"{table.name}.csv"
    atomic_write(path, table_to_csv(table, config_hash))
    return path


def read_table(path: Path) -> Table:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return Table(path.stem, header, [row for row in reader])


def write_manifest(path: Path, manifest: dict) -> None:
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def render_text(table: Table, columns: Sequence[str] | None = None) -> str:
    cols = list(columns) if columns is not None else table.columns
    idx = [table.columns.index(c) for c in cols]

    def short(s: str) -> str:
        try:
            f = float(s)
        except ValueError:
            return s
        if s.lstrip("-").isdigit():
            return s
        return f"{f:.6g}"

    cells = [[short(str(row[i])) for i in idx] for row in table.rows]
    widths = [max([len(c)] + [len(r[k]) for r in cells]) for k, c in enumerate(cols)]
    out = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    out += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(out)
