"""Seeded synthetic mini-benchmark: a small repository with known equi- and fuzzy-joins.

Generates 10 tables whose key columns are drawn from shared vocabularies (overlapping
subsets give equi-joins; typo/format-perturbed copies give fuzzy joins) plus deliberately
confusable non-join columns (small-integer columns with heavy value overlap but different
domains), so that no single similarity signal separates joins from non-joins on its own.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from joinscope.fabricate import format_variant, perturb_value
from joinscope.repo import Repository, Table, build_repository

_CONSONANTS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"


def _word(rng: np.random.RandomState, syllables: int) -> str:
    return "".join(_CONSONANTS[rng.randint(len(_CONSONANTS))] + _VOWELS[rng.randint(len(_VOWELS))]
                   for _ in range(syllables))


def _vocabulary(rng: np.random.RandomState, size: int, syllables: int = 3) -> list[str]:
    words = set()
    while len(words) < size:
        words.add(_word(rng, syllables).capitalize())
    return sorted(words)


def _sample(rng: np.random.RandomState, pool: list[str], n: int) -> list[str]:
    idx = rng.choice(len(pool), size=min(n, len(pool)), replace=False)
    return [pool[i] for i in sorted(idx)]


def _fuzzify(values: list[str], rng: np.random.RandomState, p: float = 0.35) -> list[str]:
    return [perturb_value(v, rng) if rng.rand() < p else v for v in values]


def _reformat(values: list[str], rng: np.random.RandomState, p: float = 0.35) -> list[str]:
    return [(format_variant(v) or v) if rng.rand() < p else v for v in values]


@dataclass
class Benchmark:
    repo: Repository
    truth_rows: list[tuple[str, str, str, str, str]]  # table_a, col_a, table_b, col_b, kind


def generate_benchmark(seed: int = 0, n_rows: int = 120) -> Benchmark:
    rng = np.random.RandomState(seed)

    # a few names appear in both pools (as with real places), giving the value-overlap
    # signals a nonzero noise floor on country/city cross pairs
    shared_names = _vocabulary(rng, 8)
    countries = sorted(set(_vocabulary(rng, 60)) | set(shared_names))
    cities = sorted(set(_vocabulary(rng, 60, syllables=4)) | set(shared_names))
    streets = _vocabulary(rng, 60, syllables=2)
    people = [f"{_word(rng, 2).capitalize()} {_word(rng, 3).capitalize()}" for _ in range(80)]
    dates = [f"{rng.randint(2000, 2024)}-{rng.randint(1, 13):02d}-{rng.randint(1, 29):02d}"
             for _ in range(90)]

    def col(values):
        out = list(values)
        while len(out) < n_rows:
            out.append(values[rng.randint(len(values))])
        rng.shuffle(out)
        return out[:n_rows]

    def addresses(street_pool):
        return [f"{rng.randint(1, 999)} {s} Street" for s in street_pool]

    def money():
        return [f"${rng.randint(1, 9000)},{rng.randint(100, 999)}.{rng.randint(10, 99)}"
                for _ in range(n_rows)]

    def code(prefix, lo=10000, hi=99999):
        return [f"{prefix}-{rng.randint(lo, hi)}" for _ in range(n_rows)]

    def ints(lo, hi):
        return [str(rng.randint(lo, hi)) for _ in range(n_rows)]

    def decimals(lo, hi):
        return [f"{rng.randint(lo, hi)}.{rng.randint(0, 10)}" for _ in range(n_rows)]

    def categories(weights):
        # identical category set and frequencies wherever used: a universal trap
        labels = ["active", "closed", "pending", "review"]
        out = []
        for label, count in zip(labels, weights):
            out += [label] * count
        out += [labels[0]] * (n_rows - len(out))
        rng.shuffle(out)
        return out

    def skewed_digits(weights):
        # same distinct set 1..9 for every caller, caller-specific frequencies
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        out = [str(d) for d in range(1, 10)]
        out += [str(rng.choice(9, p=w) + 1) for _ in range(n_rows - 9)]
        rng.shuffle(out)
        return out

    country_a = _sample(rng, countries, 54)
    country_b = _sample(rng, countries, 54)
    country_c = _sample(rng, countries, 50)
    country_d = _sample(rng, countries, 50)
    city_a = _sample(rng, cities, 54)
    city_b = _sample(rng, cities, 54)
    city_c = _sample(rng, cities, 50)
    city_d = _sample(rng, cities, 50)
    people_a = _sample(rng, people, 55)
    people_b = _sample(rng, people, 55)
    people_c = _sample(rng, people, 50)
    date_a = _sample(rng, dates, 60)
    date_b = _sample(rng, dates, 60)
    date_c = _sample(rng, dates, 55)

    base_addresses = addresses(streets)
    addr_a = _sample(rng, base_addresses, 45)
    addr_b = _reformat(_sample(rng, base_addresses, 45), rng)  # partly "... St"
    addr_c = _sample(rng, base_addresses, 40)

    tables = []

    def table(tid, cols):
        names = [name for name, _ in cols]
        data = [col(values) for _, values in cols]
        rows = [[data[c][r] for c in range(len(cols))] for r in range(n_rows)]
        tables.append(Table(id=tid, column_names=names, rows=rows))

    # The digit-valued columns (rating, quantity, units, priority, score) share one
    # distinct set {1..9} with column-specific frequencies, and outlook/status share one
    # category distribution: heavy value overlap across unrelated domains, absent from
    # the ground truth. All other numeric columns use disjoint ranges or formats.
    table("t0_nations", [("country", country_a), ("capital", city_c),
                         ("population", ints(100000, 999999)),
                         ("area", ints(100000, 999999)), ("nation_code", code("NA", 100, 999))])
    table("t1_economy", [("country", country_b), ("gdp", decimals(10000, 99999)),
                         ("outlook", categories([48, 36, 24, 12])),
                         ("currency_code", code("CU", 1000, 9999))])
    table("t2_members", [("country", _fuzzify(country_c, rng, p=0.9)),
                         ("joined", col(date_a)[:n_rows])])
    table("t3_events", [("city", city_a), ("event_date", date_a),
                        ("attendance", ints(100, 999)), ("organizer", people_c)])
    table("t4_budgets", [("city", city_b), ("budget", money()),
                         ("priority", skewed_digits([1, 2, 5, 12, 20, 12, 5, 2, 1])),
                         ("dept_code", code("DP", 10, 99))])
    table("t5_sites", [("address", addr_a), ("site_city", city_d), ("site_id", code("ST"))])
    table("t6_permits", [("address", addr_b),
                         ("rating", skewed_digits([1, 1, 1, 2, 3, 5, 9, 14, 20]))])
    table("t7_shipments", [("ship_date", date_b), ("destination", addr_c),
                           ("quantity", skewed_digits([9] * 9)),
                           ("units", skewed_digits([20, 14, 9, 5, 3, 2, 1, 1, 1]))])
    table("t8_leaders", [("person", people_a), ("country", country_d)])
    table("t9_contacts", [("person", people_b), ("contact_id", code("CT", 1000000, 9999999)),
                          ("status", categories([48, 36, 24, 12])),
                          ("score", skewed_digits([14, 2, 14, 2, 14, 2, 14, 2, 14])),
                          ("last_contacted", date_c)])

    country_cols = [("t0_nations", "country", False), ("t1_economy", "country", False),
                    ("t2_members", "country", True), ("t8_leaders", "country", False)]
    city_cols = [("t0_nations", "capital", False), ("t3_events", "city", False),
                 ("t4_budgets", "city", False), ("t5_sites", "site_city", False)]
    person_cols = [("t3_events", "organizer", False), ("t8_leaders", "person", False),
                   ("t9_contacts", "person", False)]
    date_cols = [("t2_members", "joined", False), ("t3_events", "event_date", False),
                 ("t7_shipments", "ship_date", False), ("t9_contacts", "last_contacted", False)]
    address_cols = [("t5_sites", "address", False), ("t6_permits", "address", True),
                    ("t7_shipments", "destination", False)]

    truth = []
    for group in (country_cols, city_cols, person_cols, date_cols, address_cols):
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                ta, ca, fa = group[i]
                tb, cb, fb = group[j]
                truth.append((ta, ca, tb, cb, "fuzzy" if fa or fb else "equi"))
    return Benchmark(repo=build_repository(tables), truth_rows=truth)


def write_benchmark(out_dir: str | Path, seed: int = 0, n_rows: int = 120) -> Benchmark:
    """Write benchmark tables under out_dir/tables and its ground_truth.csv."""
    bench = generate_benchmark(seed=seed, n_rows=n_rows)
    out = Path(out_dir)
    tables_dir = out / "tables"
    tables_dir.mkdir(parents=True, exist_ok=True)
    for t in bench.repo.tables:
        with open(tables_dir / f"{t.id}.csv", "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(t.column_names)
            w.writerows(t.rows)
    with open(out / "ground_truth.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["table_a", "column_a", "table_b", "column_b", "kind"])
        w.writerows(bench.truth_rows)
    return bench
