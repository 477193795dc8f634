"""End-to-end CLI: solve, generate, verify, bench."""

import csv
import json

import pytest

from tdmcfg.cli import main
from tdmcfg.model import Schedule
from tdmcfg.serialize import save_instance, save_schedule


@pytest.fixture
def golden_path(tmp_path, golden_instance):
    path = tmp_path / "golden.json"
    save_instance(golden_instance, path)
    return path


def test_solve_bnp_writes_result(tmp_path, golden_path):
    out = tmp_path / "result.json"
    code = main(
        ["solve", str(golden_path), "--method", "bnp", "--time-limit", "60",
         "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["status"] == "optimal"
    assert doc["objective"] == "0.8"
    names = {entry["name"] for entry in doc["clients"]}
    assert names == {"c1", "c2"}
    for entry in doc["clients"]:
        assert entry["allocated_rate"] is not None


def test_solve_ilp_stdout(capsys, golden_path):
    code = main(["solve", str(golden_path), "--method", "ilp"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["objective"] == "0.8"


def test_solve_infeasible_exit_code(tmp_path):
    from fractions import Fraction

    from tdmcfg.model import ClientRequirement, ProblemInstance

    inst = ProblemInstance(
        4,
        tuple(
            ClientRequirement(i, f"c{i}", Fraction(1, 2), None) for i in (1, 2, 3)
        ),
    )
    path = tmp_path / "over.json"
    save_instance(inst, path)
    assert main(["solve", str(path), "--method", "ilp"]) == 2


def test_solve_missing_file_exit_code(tmp_path):
    assert main(["solve", str(tmp_path / "nope.json")]) == 1


def test_generate_writes_instances_and_manifest(tmp_path):
    out = tmp_path / "gen"
    code = main(
        ["generate", "BD", "--n", "8", "--count", "3", "--seed", "5",
         "--out", str(out)]
    )
    assert code == 0
    with open(out / "manifest.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    for row in rows:
        assert (out / row["instance"]).exists()
        assert row["class"] == "BD"
        assert row["n"] == "8"


def test_verify_detects_infeasible_schedule(tmp_path, golden_path, golden_instance):
    sched_path = tmp_path / "sched.json"
    # all of c1 bunched at the front violates its latency bound
    schedule = Schedule((1, 1, 1, 1, 1, 2, 2, 2, None, None))
    save_schedule(schedule, golden_instance, sched_path)
    assert main(["verify", str(golden_path), str(sched_path)]) == 2


def test_verify_accepts_feasible_schedule(
    capsys, tmp_path, golden_path, golden_instance
):
    sched_path = tmp_path / "sched.json"
    schedule = Schedule((2, 1, 1, 2, 1, 1, 2, None, 1, None))
    save_schedule(schedule, golden_instance, sched_path)
    assert main(["verify", str(golden_path), str(sched_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["feasible"] is True


def test_verify_frame_mismatch_exit_code(tmp_path, golden_path, golden_instance):
    sched_path = tmp_path / "sched.json"
    doc = {"frame_size": 8, "slots": [None] * 8}
    sched_path.write_text(json.dumps(doc))
    assert main(["verify", str(golden_path), str(sched_path)]) == 1


def test_bench_produces_well_formed_csv(tmp_path):
    gen_dir = tmp_path / "bench_in"
    assert (
        main(["generate", "BD", "--n", "8", "--count", "2", "--seed", "7",
              "--out", str(gen_dir)])
        == 0
    )
    out_csv = tmp_path / "bench.csv"
    code = main(
        ["bench", str(gen_dir / "manifest.csv"),
         "--methods", "heuristic,continuous", "--time-limit", "60",
         "--out", str(out_csv)]
    )
    assert code == 0
    with open(out_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    data_rows = [r for r in rows if r["instance"] != "SUMMARY"]
    summary_rows = [r for r in rows if r["instance"] == "SUMMARY"]
    assert len(data_rows) == 4  # 2 instances x 2 methods
    assert {r["method"] for r in summary_rows} == {"heuristic", "continuous"}
    for row in data_rows:
        assert row["status"]
        assert row["runtime"]
