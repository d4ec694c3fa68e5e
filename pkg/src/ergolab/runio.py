"""CSV and manifest emission.

Every CSV starts with the schema comment line `# ergolab-csv v1 <name>`
followed by an RFC-4180 body: CRLF line endings, header row, '.' decimal
separator, floats at 17 significant digits.  The manifest is one JSON
object per run carrying the config echo and per-output checksums.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Dict, Iterable, List, Sequence

CSV_VERSION = "v1"


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _quote(cell: str) -> str:
    if any(ch in cell for ch in (",", '"', "\r", "\n")):
        return '"' + cell.replace('"', '""') + '"'
    return cell


def write_csv(path: str, name: str, header: Sequence[str],
              rows: Iterable[Sequence]) -> None:
    lines = [f"# ergolab-csv {CSV_VERSION} {name}"]
    lines.append(",".join(_quote(h) for h in header))
    for row in rows:
        lines.append(",".join(_quote(format_cell(c)) for c in row))
    data = ("\r\n".join(lines) + "\r\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)


def read_csv(path: str):
    """(schema name, header, string rows); the inverse of write_csv."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        prefix = f"# ergolab-csv {CSV_VERSION} "
        name = first[len(prefix):] if first.startswith(prefix) else None
        import csv as _csv
        rows = list(_csv.reader(fh))
    if not rows:
        return name, [], []
    return name, rows[0], rows[1:]


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path: str, manifest: Dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def remove_outputs(paths: List[str]) -> None:
    """Best-effort cleanup of partial outputs after a failed run."""
    for p in paths:
        try:
            os.remove(p)
        except OSError:
            pass
