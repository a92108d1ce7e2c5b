import csv
import io
import statistics

import numpy as np
import pytest

from bdltree.bench import (
    SECTIONS,
    BenchConfig,
    BenchResult,
    cmd_build,
    cmd_delete,
    cmd_insert,
    cmd_knn,
    cmd_mixed,
    emit_csv,
    make_index,
    read_csv,
)
from bdltree.cli import main, parse_int_list
from bdltree.datagen_io import gen_uniform, read_points
from bdltree.oracle import brute_knn

FAST = dict(runs=1, warmup=0)


@pytest.fixture(scope="module")
def points():
    return gen_uniform(4000, 3, seed=7)


def test_parse_int_list():
    assert parse_int_list("5") == [5]
    assert parse_int_list("1,5,11") == [1, 5, 11]
    assert parse_int_list("2-11") == list(range(2, 12))


def test_make_index_rejects_unknown():
    with pytest.raises(ValueError):
        make_index("b3")
    with pytest.raises(ValueError):
        make_index("bdl", heuristic="mean")


def test_build_smoke_and_thread_independence(points):
    rows = [cmd_build(points, BenchConfig(impl=impl, threads=t, **FAST)) for impl in ("bdl", "b1") for t in (1, 3)]
    assert {r.live_after for r in rows} == {4000}
    assert len({r.checksum for r in rows}) == 1


def test_insert_batches_and_final_state(points):
    r = cmd_insert(points, BenchConfig(validate=True, **FAST), batch_pct=10)
    assert r.batch_size == 400 and r.live_after == 4000
    assert r.checksum == cmd_build(points, BenchConfig(**FAST)).checksum


def test_delete_full_and_partial(points):
    assert cmd_delete(points, BenchConfig(**FAST), batch_pct=10).live_after == 0
    part = cmd_delete(points, BenchConfig(impl="b2", validate=True, **FAST), batch_pct=10, total_pct=30)
    assert part.live_after == 2800


def test_knn_k_sweep(points):
    rows = cmd_knn(points, BenchConfig(validate=True, **FAST), ks=range(2, 12))
    assert [r.k for r in rows] == list(range(2, 12))
    assert all(r.batch_size == 400 for r in rows)


def test_mixed_sections_and_cross_impl_checksums(points):
    by_impl = {impl: cmd_mixed(points, BenchConfig(impl=impl, buffer_size=64, validate=True, **FAST))
               for impl in ("bdl", "b1", "b2")}
    rows = by_impl["bdl"]
    assert [r.section for r in rows[::2]] == list(SECTIONS)
    live = {r.section: r.live_after for r in rows}
    assert live["INS3"] == 4000 and live["DEL2"] == 1000
    for impl in ("b1", "b2"):
        assert [r.checksum for r in by_impl[impl]] == [r.checksum for r in rows]


def test_emit_csv_round_trip(tmp_path):
    results = [BenchResult("bdl", "build", "d", "object", 2, runs=[0.3, 0.1, 0.2], warmup=1, checksum="ab"),
               BenchResult("b2", "knn", "d", "spatial", 1, k=5, runs=[0.5])]
    path = tmp_path / "out.csv"
    emit_csv(results, path)
    rows = read_csv(path)
    assert [r["impl"] for r in rows] == ["bdl", "b2"]
    first = rows[0]
    runs = [float(first[f"run_{i}"]) for i in (1, 2, 3)]
    assert float(first["median_s"]) == statistics.median(runs) == 0.2
    assert rows[1]["run_2"] == ""
    header = next(csv.reader(io.StringIO(emit_csv([]))))
    assert header[:3] == ["impl", "operation", "section"] and emit_csv([]).count("\n") == 1


def test_cli_gen_and_bench(tmp_path, capsys):
    data = tmp_path / "pts.bin"
    assert main(["gen", "--kind", "visualvar", "--n", "3000", "--d", "2", "--seed", "4", "--out", str(data)]) == 0
    pts = read_points(data)
    assert pts.shape == (3000, 2)
    out = tmp_path / "ins.csv"
    assert main(["insert", "--input", str(data), "--impl", "all", "--batch-pct", "10,50", "--runs", "2",
                 "--warmup", "0", "--validate", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 6 and {r["live_after"] for r in rows} == {"3000"}
    assert {r["n_runs"] for r in rows} == {"2"}
    assert main(["knn", "--n", "2000", "--k", "2-4", "--runs", "1", "--warmup", "0"]) == 0
    printed = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["k"] for r in printed] == ["2", "3", "4"]


def test_cli_rejects_unknown_impl(capsys):
    with pytest.raises(SystemExit):
        main(["build", "--impl", "b9"])


def test_validation_gate_catches_wrong_answers(points, monkeypatch):
    import bdltree.bench as bench

    def wrong(pts, ids, q, k):
        res = brute_knn(pts, ids, q, k)
        res.ids[:, 0] += 1
        return res

    monkeypatch.setattr(bench, "brute_knn", wrong)
    with pytest.raises(bench.ValidationError):
        cmd_build(points, BenchConfig(validate=True, **FAST))
    np.testing.assert_equal(cmd_build(points, BenchConfig(**FAST)).live_after, 4000)
