"""Shared fixtures and small builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from joinscope.repo import Column, Repository, Table, build_repository


def column(values, node_id=0, table_id="t", name="c", n_raw=None):
    """Build a Column directly from already-normalized values."""
    values = list(values)
    return Column(
        node_id=node_id,
        table_id=table_id,
        name=name,
        values=values,
        distinct_values=set(values),
        n_raw=len(values) if n_raw is None else n_raw,
    )


def repo_from_columns(table_values: dict[str, dict[str, list[str]]]) -> Repository:
    """table id -> {column name -> values}; all columns of a table must share a length."""
    tables = []
    for tid, cols in table_values.items():
        names = list(cols)
        n_rows = len(next(iter(cols.values())))
        rows = [[cols[name][r] for name in names] for r in range(n_rows)]
        tables.append(Table(id=tid, column_names=names, rows=rows))
    return build_repository(tables)


@pytest.fixture
def rng():
    return np.random.RandomState(0)


def gradient_max_rel_err(analytic: dict, numeric: dict) -> float:
    """Worst relative disagreement across all parameters; near-zero entries skipped."""
    worst = 0.0
    for name, ga in analytic.items():
        gn = numeric[name]
        mag = np.maximum(np.abs(ga), np.abs(gn))
        mask = mag > 1e-6
        if not np.any(mask):
            continue
        err = np.abs(ga - gn)[mask] / mag[mask]
        worst = max(worst, float(err.max()))
    return worst
