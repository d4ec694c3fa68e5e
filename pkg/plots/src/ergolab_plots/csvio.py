"""Reader for the lab's CSV interchange format.

Every file opens with the magic line '# ergolab-csv v1 <name>' followed
by an RFC 4180 body.  Values come back as strings; each renderer
converts exactly the columns it draws.
"""

import csv
import json
import os
from typing import Dict, List, Optional, Tuple

from .errors import EmptyInput, SchemaMismatch

MAGIC_PREFIX = "# ergolab-csv v1 "


def read_table(path: str) -> Tuple[str, List[str], List[List[str]]]:
    """(schema name, header, data rows) of one interchange file."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.startswith(MAGIC_PREFIX):
            raise SchemaMismatch(f"{path}: missing the '# ergolab-csv v1' magic line")
        name = first[len(MAGIC_PREFIX):].strip()
        body = [row for row in csv.reader(fh) if row]
    if not body:
        raise SchemaMismatch(f"{path}: header row missing")
    return name, body[0], body[1:]


def load_columns(path: str, want_name: str, required: List[str]) -> Dict[str, List[str]]:
    """Column dict of a table whose schema name and columns are checked."""
    name, header, rows = read_table(path)
    if name != want_name:
        raise SchemaMismatch(f"{path}: schema '{name}', this plot needs '{want_name}'")
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaMismatch(f"{path}: header lacks columns {missing}")
    if not rows:
        raise EmptyInput(f"{path}: no data rows")
    return {c: [row[k] for row in rows] for k, c in enumerate(header)}


def run_seed(csv_path: str) -> Optional[int]:
    """Seed recorded in the manifest sitting next to the CSV, if any."""
    mpath = os.path.join(os.path.dirname(os.path.abspath(csv_path)), "manifest.json")
    try:
        with open(mpath, "r", encoding="utf-8") as fh:
            return int(json.load(fh)["config"]["seed"])
    except (OSError, ValueError, KeyError, TypeError):
        return None
