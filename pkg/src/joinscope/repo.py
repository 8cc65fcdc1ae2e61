"""CSV ingestion: repository/table/column model plus value normalization and tokenization."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

MISSING_MARKERS = {"", "null", "na", "n/a", "none"}

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def normalize_value(raw: str) -> str | None:
    """Trim whitespace; map common missing markers to None, else return the trimmed value."""
    v = raw.strip()
    if v.lower() in MISSING_MARKERS:
        return None
    return v


def tokenize(value: str) -> list[str]:
    """Lowercase and split on maximal runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(value.lower())


@dataclass
class Column:
    node_id: int
    table_id: str
    name: str
    values: list[str]          # non-missing cells, source order
    distinct_values: set[str]
    n_raw: int = 0             # raw cell count including missing, for missing-rate stats

    @property
    def n_missing(self) -> int:
        return self.n_raw - len(self.values)


@dataclass
class Table:
    id: str
    column_names: list[str]
    rows: list[list[str]]


@dataclass
class Repository:
    tables: list[Table] = field(default_factory=list)
    columns: list[Column] = field(default_factory=list)
    column_index: dict[tuple[str, int], int] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.columns)

    def column(self, node_id: int) -> Column:
        return self.columns[node_id]

    def table(self, table_id: str) -> Table:
        for t in self.tables:
            if t.id == table_id:
                return t
        raise KeyError(table_id)


class RepositoryError(Exception):
    pass


def _is_numeric(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _detect_header(rows: list[list[str]]) -> bool:
    # First row is a header iff it contains a non-numeric cell and there is data below it.
    if len(rows) < 2:
        return False
    return any(not _is_numeric(c) for c in rows[0])


def _read_table(path: Path, delimiter: str) -> Table:
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f, delimiter=delimiter))
    except OSError as e:
        raise RepositoryError(f"cannot read table file {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise RepositoryError(f"cannot decode table file {path}: {e}") from e

    rows = [r for r in rows if r]
    if not rows:
        return Table(id=path.stem, column_names=[], rows=[])

    width = len(rows[0])
    for idx, r in enumerate(rows):
        if len(r) != width:
            raise RepositoryError(f"ragged row {idx} in {path}: expected {width} cells, got {len(r)}")

    if _detect_header(rows):
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
    else:
        names = [f"col_{i}" for i in range(width)]
        body = rows
    return Table(id=path.stem, column_names=names, rows=body)


def build_repository(tables: list[Table]) -> Repository:
    """Assemble a repository from in-memory tables, assigning dense node ids in table order."""
    repo = Repository(tables=tables)
    for t in tables:
        for ci, name in enumerate(t.column_names):
            raw_cells = [row[ci] for row in t.rows]
            values = []
            for cell in raw_cells:
                v = normalize_value(cell)
                if v is not None:
                    values.append(v)
            node_id = len(repo.columns)
            repo.columns.append(Column(
                node_id=node_id,
                table_id=t.id,
                name=name,
                values=values,
                distinct_values=set(values),
                n_raw=len(raw_cells),
            ))
            repo.column_index[(t.id, ci)] = node_id
    return repo


def load_repository(path: str | Path, delimiter: str = ",") -> Repository:
    """Load every .csv file under `path` (lexicographic order) into a repository."""
    root = Path(path)
    if not root.is_dir():
        raise RepositoryError(f"repository path is not a directory: {root}")
    files = sorted(root.glob("*.csv"))
    if not files:
        raise RepositoryError(f"no tables found in {root}")
    tables = [_read_table(p, delimiter) for p in files]
    return build_repository(tables)
