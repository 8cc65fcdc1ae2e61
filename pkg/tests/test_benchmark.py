from joinscope.benchmark import generate_benchmark, write_benchmark
from joinscope.repo import load_repository


class TestGenerateBenchmark:
    def test_shape(self):
        bench = generate_benchmark(seed=0)
        assert len(bench.repo.tables) == 10
        assert all(len(t.rows) == 120 for t in bench.repo.tables)
        assert len(bench.truth_rows) == 24

    def test_truth_references_existing_columns(self):
        bench = generate_benchmark(seed=0)
        names = {(c.table_id, c.name) for c in bench.repo.columns}
        for ta, ca, tb, cb, kind in bench.truth_rows:
            assert (ta, ca) in names and (tb, cb) in names
            assert kind in ("equi", "fuzzy")

    def test_contains_fuzzy_joins(self):
        bench = generate_benchmark(seed=0)
        kinds = {row[4] for row in bench.truth_rows}
        assert kinds == {"equi", "fuzzy"}

    def test_deterministic_per_seed(self):
        a = generate_benchmark(seed=3)
        b = generate_benchmark(seed=3)
        assert [t.rows for t in a.repo.tables] == [t.rows for t in b.repo.tables]
        assert a.truth_rows == b.truth_rows

    def test_seed_changes_data(self):
        a = generate_benchmark(seed=0)
        b = generate_benchmark(seed=1)
        assert [t.rows for t in a.repo.tables] != [t.rows for t in b.repo.tables]


class TestWriteBenchmark:
    def test_written_files_reload_identically(self, tmp_path):
        bench = write_benchmark(tmp_path, seed=0)
        repo = load_repository(tmp_path / "tables")
        assert {t.id for t in repo.tables} == {t.id for t in bench.repo.tables}
        for t in repo.tables:
            orig = bench.repo.table(t.id)
            assert t.column_names == orig.column_names
            assert t.rows == orig.rows
        truth_lines = (tmp_path / "ground_truth.csv").read_text().splitlines()
        assert truth_lines[0] == "table_a,column_a,table_b,column_b,kind"
        assert len(truth_lines) == 25
