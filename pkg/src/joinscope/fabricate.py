"""Self-supervised training data: split each table into a pair of joinable halves.

Shared columns become positive join examples, every other cross pair becomes a negative.
Half of the pairs get fuzzy perturbations (keyboard typos, format variants) on the right
side's shared columns, so the model sees joins of varying overlap and noise.
"""

from __future__ import annotations

import csv
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from joinscope.repo import Repository, Table, build_repository, normalize_value

QWERTY_ROWS = [
    "1234567890",
    "qwertyuiop",
    "asdfghjkl",
    "zxcvbnm",
]


def _build_adjacency() -> dict[str, str]:
    adj: dict[str, set[str]] = {}
    for ri, row in enumerate(QWERTY_ROWS):
        for ci, ch in enumerate(row):
            near = adj.setdefault(ch, set())
            if ci > 0:
                near.add(row[ci - 1])
            if ci + 1 < len(row):
                near.add(row[ci + 1])
            for other in (ri - 1, ri + 1):
                if 0 <= other < len(QWERTY_ROWS):
                    orow = QWERTY_ROWS[other]
                    if ci < len(orow):
                        near.add(orow[ci])
    return {ch: "".join(sorted(near)) for ch, near in adj.items()}


KEYBOARD_ADJACENCY = _build_adjacency()

_ISO_DATE_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_US_DATE_RE = re.compile(r"^(\d{2})/(\d{2})/(\d{4})$")
_DOLLAR_RE = re.compile(r"^\$([\d,]+(?:\.\d+)?)$")
_USD_RE = re.compile(r"^([\d.]+) USD$")
_STREET_WORDS = {
    "street": "st", "avenue": "ave", "road": "rd", "boulevard": "blvd",
    "st": "street", "ave": "avenue", "rd": "road", "blvd": "boulevard",
}
_STREET_RE = re.compile(r"\b(" + "|".join(_STREET_WORDS) + r")\b", re.IGNORECASE)


def _match_case(template: str, word: str) -> str:
    if template.isupper():
        return word.upper()
    if template[:1].isupper():
        return word.capitalize()
    return word


def format_variant(v: str) -> str | None:
    """Rewrite dates, money amounts, and street suffixes into a common alternative format."""
    m = _ISO_DATE_RE.match(v)
    if m:
        return f"{m.group(2)}/{m.group(3)}/{m.group(1)}"
    m = _US_DATE_RE.match(v)
    if m:
        return f"{m.group(3)}-{m.group(1)}-{m.group(2)}"
    m = _DOLLAR_RE.match(v)
    if m:
        return f"{m.group(1).replace(',', '')} USD"
    m = _USD_RE.match(v)
    if m:
        return f"${float(m.group(1)):,.2f}"
    if _STREET_RE.search(v):
        return _STREET_RE.sub(lambda w: _match_case(w.group(0), _STREET_WORDS[w.group(0).lower()]), v)
    return None


def _keyboard_edit(v: str, rng: np.random.RandomState) -> str:
    editable = [i for i, ch in enumerate(v) if ch.lower() in KEYBOARD_ADJACENCY]
    ops = ["substitute", "insert"]
    if len(v) > 1:
        ops.append("delete")
    op = ops[rng.randint(len(ops))]
    if op == "delete":
        pos = rng.randint(len(v))
        return v[:pos] + v[pos + 1:]
    if not editable:
        # no key-mappable character; fall back to inserting a random letter
        pos = rng.randint(len(v) + 1)
        ch = "qwertyuiopasdfghjklzxcvbnm"[rng.randint(26)]
        return v[:pos] + ch + v[pos:]
    pos = editable[rng.randint(len(editable))]
    near = KEYBOARD_ADJACENCY[v[pos].lower()]
    ch = near[rng.randint(len(near))]
    if v[pos].isupper():
        ch = ch.upper()
    if op == "substitute":
        return v[:pos] + ch + v[pos + 1:]
    return v[:pos] + ch + v[pos:]


def perturb_value(v: str, rng: np.random.RandomState) -> str:
    """One typo or format change; never produces a missing marker."""
    for _ in range(8):
        if rng.rand() < 0.5:
            variant = format_variant(v)
            out = variant if variant is not None else _keyboard_edit(v, rng)
        else:
            out = _keyboard_edit(v, rng)
        if normalize_value(out) is not None:
            return out
    return v + "x"


@dataclass
class FabricationConfig:
    shared_cols_max: int = 4
    overlap_fraction_range: tuple[float, float] = (0.1, 0.7)
    p_fuzzy_pair: float = 0.5
    p_perturb_value: float = 0.3
    seed: int = 0


@dataclass
class JoinExample:
    node_a: int
    node_b: int
    label: int  # 1 positive, 0 negative
    source_table: str


@dataclass
class ColumnPairLabel:
    """Fabricated-pair label keyed by (table id, column ordinal), before node id resolution."""
    table_a: str
    col_a: int
    table_b: str
    col_b: int
    label: int
    source_table: str


def fabricate_pair(t: Table, cfg: FabricationConfig,
                   rng: np.random.RandomState) -> tuple[Table, Table, list[ColumnPairLabel]] | None:
    """Split `t` into two overlapping halves with known shared columns."""
    n_cols = len(t.column_names)
    n_rows = len(t.rows)
    if n_rows < 2 or n_cols < 1:
        warnings.warn(f"table {t.id} too small to fabricate a join pair, skipping")
        return None

    s = rng.randint(1, min(cfg.shared_cols_max, n_cols) + 1)
    shared = sorted(rng.choice(n_cols, size=s, replace=False).tolist())
    left_cols, right_cols = list(shared), list(shared)
    for ci in range(n_cols):
        if ci in shared:
            continue
        side = rng.randint(3)  # L-only / R-only / dropped
        if side == 0:
            left_cols.append(ci)
        elif side == 1:
            right_cols.append(ci)
    left_cols.sort()
    right_cols.sort()

    order = rng.permutation(n_rows)
    lo, hi = cfg.overlap_fraction_range
    rho = lo + (hi - lo) * rng.rand()
    n_overlap = math.ceil(rho * n_rows)
    left_rows = [t.rows[i] for i in order[:n_overlap]]
    right_rows = [t.rows[i] for i in order[:n_overlap]]
    for pos, i in enumerate(order[n_overlap:]):
        (left_rows if pos % 2 == 0 else right_rows).append(t.rows[i])

    fuzzy = rng.rand() < cfg.p_fuzzy_pair
    lt = Table(id=f"{t.id}__L",
               column_names=[t.column_names[c] for c in left_cols],
               rows=[[row[c] for c in left_cols] for row in left_rows])
    shared_set = set(shared)
    rt_rows = []
    for row in right_rows:
        out = []
        for c in right_cols:
            cell = row[c]
            if fuzzy and c in shared_set and rng.rand() < cfg.p_perturb_value:
                if normalize_value(cell) is not None:
                    cell = perturb_value(cell, rng)
            out.append(cell)
        rt_rows.append(out)
    rt = Table(id=f"{t.id}__R",
               column_names=[t.column_names[c] for c in right_cols],
               rows=rt_rows)

    labels = []
    for li, lc in enumerate(left_cols):
        for ri, rc in enumerate(right_cols):
            positive = lc == rc and lc in shared_set
            labels.append(ColumnPairLabel(lt.id, li, rt.id, ri, int(positive), t.id))
    return lt, rt, labels


def generate_training_set(repo: Repository,
                          cfg: FabricationConfig) -> tuple[Repository, list[JoinExample]]:
    """One fabricated joinable pair per original table, with labeled cross-column pairs."""
    tables: list[Table] = []
    all_labels: list[ColumnPairLabel] = []
    eligible = 0
    for idx, t in enumerate(repo.tables):
        rng = np.random.RandomState((cfg.seed ^ (idx * 0x9E3779B1)) % (2**32))
        result = fabricate_pair(t, cfg, rng)
        if result is None:
            continue
        eligible += 1
        lt, rt, labels = result
        tables.extend([lt, rt])
        all_labels.extend(labels)
    if not eligible:
        raise ValueError("no table is large enough to fabricate join examples")

    tables.sort(key=lambda t: t.id)
    fab_repo = build_repository(tables)
    examples = [
        JoinExample(
            node_a=fab_repo.column_index[(lab.table_a, lab.col_a)],
            node_b=fab_repo.column_index[(lab.table_b, lab.col_b)],
            label=lab.label,
            source_table=lab.source_table,
        )
        for lab in all_labels
    ]
    return fab_repo, examples


def save_examples(repo: Repository, examples: list[JoinExample], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["table_a", "column_a", "table_b", "column_b", "label"])
        for ex in examples:
            ca, cb = repo.columns[ex.node_a], repo.columns[ex.node_b]
            w.writerow([ca.table_id, ca.name, cb.table_id, cb.name,
                        "positive" if ex.label else "negative"])


def write_tables(repo: Repository, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for t in repo.tables:
        with open(out / f"{t.id}.csv", "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(t.column_names)
            w.writerows(t.rows)
