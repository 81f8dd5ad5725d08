"""Deterministic report serialization.

Every float is written with six decimals, keys are sorted, and rows keep the
order the experiment produced them in, so equal results give equal bytes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

log = logging.getLogger(__name__)

FLOAT_DIGITS = 6


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    summary: bool = True  # include in the markdown report

    def add(self, *row: Any) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"{self.name}: expected {len(self.columns)} cells, got {len(row)}")
        self.rows.append(tuple(row))


def fmt(v: Any) -> str:
    """Plain-text cell used by csv and md."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.{FLOAT_DIGITS}f}" if math.isfinite(v) else str(v)
    return str(v)


def to_json(obj: Any, indent: int = 0) -> str:
    """JSON text with sorted keys and fixed-precision floats."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return f"{obj:.{FLOAT_DIGITS}f}" if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{inner}{to_json(str(k))}: {to_json(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(x, (Mapping, list, tuple)) for x in obj):
            return "[" + ", ".join(to_json(x) for x in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json(x, indent + 1) for x in obj) + f"\n{pad}]"
    if hasattr(obj, "item"):  # numpy scalar
        return to_json(obj.item(), indent)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def table_csv(t: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t.columns)
    for r in t.rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def table_md(t: Table) -> str:
    lines = [f"### {t.name}", "", "| " + " | ".join(t.columns) + " |",
             "|" + "|".join("---" for _ in t.columns) + "|"]
    lines += ["| " + " | ".join(fmt(v) for v in r) + " |" for r in t.rows]
    return "\n".join(lines) + "\n"


def render(tables: Sequence[Table], meta: Mapping[str, Any], fmt_name: str) -> dict[str, str]:
    """File name -> text for one format."""
    if fmt_name == "json":
        doc = {"meta": dict(meta),
               "tables": [{"name": t.name, "columns": list(t.columns), "rows": [list(r) for r in t.rows],
                           "summary": t.summary}
                          for t in tables]}
        return {"report.json": to_json(doc) + "\n"}
    if fmt_name == "csv":
        return {f"{t.name}.csv": table_csv(t) for t in tables}
    if fmt_name == "md":
        title = meta.get("title", "Report")
        parts = [f"# {title}", ""]
        parts += [f"- {k}: {fmt(meta[k]) if not isinstance(meta[k], (list, tuple, dict)) else to_json(meta[k])}"
                  for k in sorted(meta) if k != "title"]
        parts.append("")
        parts += [table_md(t) for t in tables if t.summary]
        return {"report.md": "\n".join(parts)}
    raise ValueError(f"unknown format {fmt_name!r}")


def emit_report(tables: Sequence[Table], out_dir: str | Path, formats: Sequence[str] = ("json", "csv", "md"),
                meta: Mapping[str, Any] | None = None) -> list[Path]:
    """Write the report files; returns their paths in writing order.

    Tables without rows still produce header-only files, with a warning.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    empty = [t.name for t in tables if not t.rows]
    if empty or not tables:
        msg = f"report has no rows for: {', '.join(empty) or 'all tables'}"
        warnings.warn(msg, stacklevel=2)
        log.warning(msg)
    written = []
    for f in formats:
        for name, text in render(tables, meta or {}, f).items():
            path = out / name
            path.write_bytes(text.encode("utf-8"))
            written.append(path)
    return written


def load_json_report(path: str | Path) -> tuple[list[Table], dict]:
    """Tables and meta back from a ``report.json``, for re-rendering."""
    doc = json.loads(Path(path).read_text("utf-8"))
    tables = [Table(t["name"], tuple(t["columns"]), [tuple(r) for r in t["rows"]], t.get("summary", True))
              for t in doc["tables"]]
    return tables, doc.get("meta", {})
