"""CLI behavior: golden outputs, exit codes, determinism across workers."""

from __future__ import annotations

import json

import pytest

from jitminer.cli import main
from jitminer.dataset import CSV_HEADER, export_csv
from tests.conftest import ALICE, BOB, DAY, T0
from tests.test_model import labeled_matrix

TICKETS_CSV = (
    "id,time,changetime,status,type,summary\n"
    f"1,{T0 + DAY},{T0 + 4 * DAY},closed,defect,crash on save\n"
    f"2,{T0 + DAY},,new,enhancement,wishlist\n"
)


@pytest.fixture
def mined_repo(repo_builder, tmp_path):
    builder = repo_builder()
    builder.commit(
        {"app.py": "a\nb\nbuggy\nd\n", "lib/util.py": "x\ny\n"},
        "add feature", author=ALICE, ts=T0,
    )
    builder.commit(
        {"app.py": "a\nb\nfixed\nd\nextra\n"},
        "fixes #1: repair crash", author=BOB, ts=T0 + 2 * DAY,
    )
    builder.commit(
        {"docs/readme.md": "hello\n", "lib/util.py": "x\ny\nz\n"},
        "docs and util tweak", author=ALICE, ts=T0 + 3 * DAY,
    )
    tickets = tmp_path / "tickets.csv"
    tickets.write_text(TICKETS_CSV, encoding="utf-8")
    return builder, tickets


def expected_golden_csv(hashes: list[str]) -> str:
    """The dataset for the fixture above, every value computed by hand.

    c1: two added files (4+2 lines) in subsystems ''/lib -> ns=nd=2,
        entropy of (4,2) modified lines, la=6, tracked files 2 -> nf=1,
        root commit so lt=0 and no history; SZZ blames the fix's deleted
        line back to it -> defective.
    c2: single-file edit (+2/-1 on the 4-line app.py), ticket-linked fix,
        app.py previously touched once by alice 2 days earlier.
    c3: adds docs/readme.md, appends to lib/util.py (last touched 3 days
        ago); alice's second commit, one prior commit in subsystem lib;
        tracked files now 3 -> nf=2/3.
    """
    c1, c2, c3 = hashes
    rows = [
        ",".join(CSV_HEADER),
        f"{c1},2.000000,2.000000,1.000000,0.918296,6.000000,0.000000,"
        "0.000000,0,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,1",
        f"{c2},1.000000,1.000000,0.500000,0.000000,2.000000,1.000000,"
        "4.000000,1,1.000000,2.000000,1.000000,0.000000,0.000000,0.000000,0",
        f"{c3},2.000000,2.000000,0.666667,1.000000,2.000000,0.000000,"
        "1.000000,0,1.000000,3.000000,1.000000,1.000000,1.000000,1.000000,0",
    ]
    return "\n".join(rows) + "\n"


def test_mine_golden_dataset(mined_repo, tmp_path, capsys):
    builder, tickets = mined_repo
    out = tmp_path / "out"
    code = main([
        "mine", "--repo", str(builder.root), "--tickets", str(tickets),
        "--out", str(out),
    ])
    assert code == 0
    produced = (out / "dataset.csv").read_text()
    assert produced == expected_golden_csv(builder.hashes)

    pairs = [json.loads(l) for l in (out / "pairs.jsonl").read_text().splitlines()]
    assert pairs == [
        {
            "evidence": [{"line_no": 3, "path": "app.py", "side": "old"}],
            "fix_hash": builder.hashes[1],
            "inducing_hash": builder.hashes[0],
            "partial_fix": False,
            "ticket_id": "1",
        }
    ]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 42
    assert summary["summary"]["row_count"] == 3
    assert summary["summary"]["defective_count"] == 1
    assert summary["summary"]["fix_count"] == 1
    assert summary["summary"]["period"] == [T0, T0 + 3 * DAY]
    assert "note" in summary
    assert "generated_at" not in summary  # only with --stamp


def test_mine_missing_tickets_is_usage_error(mined_repo, capsys):
    builder, _ = mined_repo
    assert main(["mine", "--repo", str(builder.root)]) == 2


def test_mine_empty_repo_exits_zero(tmp_path, capsys):
    import subprocess

    root = tmp_path / "empty"
    root.mkdir()
    subprocess.run(["git", "-C", str(root), "init", "-q", "-b", "main"], check=True)
    tickets = tmp_path / "t.csv"
    tickets.write_text("id,time,changetime,status,type,summary\n")
    out = tmp_path / "out"
    code = main(["mine", "--repo", str(root), "--tickets", str(tickets), "--out", str(out)])
    assert code == 0
    assert (out / "dataset.csv").read_text() == ",".join(CSV_HEADER) + "\n"
    assert json.loads((out / "summary.json").read_text())["summary"]["row_count"] == 0


def test_mine_jobs_byte_identical(mined_repo, tmp_path):
    builder, tickets = mined_repo
    outputs = {}
    for jobs in ("1", "8"):
        out = tmp_path / f"out{jobs}"
        code = main([
            "mine", "--repo", str(builder.root), "--tickets", str(tickets),
            "--out", str(out), "--jobs", jobs,
        ])
        assert code == 0
        outputs[jobs] = tuple(
            (out / name).read_bytes()
            for name in ("dataset.csv", "pairs.jsonl", "summary.json")
        )
    assert outputs["1"] == outputs["8"]


def test_stats_json_golden(mined_repo, tmp_path, capsys):
    builder, tickets = mined_repo
    out = tmp_path / "out"
    main(["mine", "--repo", str(builder.root), "--tickets", str(tickets), "--out", str(out)])
    capsys.readouterr()
    code = main(["stats", str(out / "dataset.csv"), "--json", "--repo", str(builder.root)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    summary = payload["summary"]
    assert summary["row_count"] == 3
    assert summary["defective_pct"] == pytest.approx(100 / 3, abs=1e-3)
    # Hand check: la over rows (6, 2, 2) -> min 2, max 6, mean 10/3.
    assert summary["features"]["la"]["min"] == 2.0
    assert summary["features"]["la"]["max"] == 6.0
    assert summary["features"]["la"]["mean"] == pytest.approx(10 / 3, rel=1e-9)
    # Defective commit c1 changed app.py + lib/util.py: all .py.
    ext = payload["extensions"]
    assert ext["mean_files_per_defective_commit"] == 2.0
    assert ext["extensions"][0] == {"extension": "py", "mean_files_changed": 2.0}


def test_stats_empty_dataset_fails(tmp_path, capsys):
    path = tmp_path / "empty.csv"
    path.write_text(",".join(CSV_HEADER) + "\n")
    assert main(["stats", str(path)]) == 1
    assert "EmptyDataset" in capsys.readouterr().err


def test_stats_schema_mismatch_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("commit,oops\nx,1\n")
    assert main(["stats", str(path)]) == 1
    assert "SchemaMismatch" in capsys.readouterr().err


def test_normalize_round_trip(tmp_path, capsys):
    src = tmp_path / "in.csv"
    export_csv(labeled_matrix(6, 6, seed=1), src)
    dst = tmp_path / "norm.csv"
    assert main(["normalize", str(src), "--out", str(dst)]) == 0
    from jitminer.dataset import import_csv

    normalized = import_csv(dst)
    for name in ("la", "ld"):
        values = normalized.column(name)
        assert min(values) >= 0.0 and max(values) <= 1.0


def _training_csv(tmp_path):
    path = tmp_path / "train.csv"
    export_csv(labeled_matrix(40, 40, seed=2), path)
    return path


def test_train_eval_round_trip(tmp_path, capsys):
    data = _training_csv(tmp_path)
    model = tmp_path / "model.json"
    code = main([
        "train", str(data), "--model-out", str(model), "--epochs", "200",
        "--features", "la,ld", "--hidden-width", "8", "--layers", "3",
        "--seed", "7", "--json",
    ])
    assert code == 0
    train_out = json.loads(capsys.readouterr().out)
    assert train_out["test"]["recall"] >= 0.9
    assert model.exists()

    code = main(["eval", str(data), "--model", str(model), "--json"])
    assert code == 0
    eval_out = json.loads(capsys.readouterr().out)
    assert eval_out["recall"] >= 0.9
    assert sum(eval_out["confusion"].values()) == 80


def test_train_deterministic_across_jobs_and_runs(tmp_path):
    data = _training_csv(tmp_path)
    blobs = []
    for jobs in ("1", "8"):
        model = tmp_path / f"model{jobs}.json"
        code = main([
            "train", str(data), "--model-out", str(model), "--epochs", "60",
            "--features", "la,ld", "--hidden-width", "4", "--layers", "2",
            "--seed", "5", "--jobs", jobs,
        ])
        assert code == 0
        blobs.append(model.read_bytes())
    assert blobs[0] == blobs[1]


def test_train_usage_error_without_model_out(tmp_path):
    data = _training_csv(tmp_path)
    assert main(["train", str(data)]) == 2


def test_ablate_json(tmp_path, capsys):
    data = _training_csv(tmp_path)
    code = main([
        "ablate", str(data), "--features", "la,ld,lt", "--epochs", "30",
        "--hidden-width", "4", "--layers", "2", "--seed", "3", "--json",
    ])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["rows"]) == 4
    assert {r["subset"] for r in payload["rows"]} == {"full", "-la", "-ld", "-lt"}


def test_lines_prints_planted_defect_line(mined_repo, tmp_path, capsys):
    builder, tickets = mined_repo
    out = tmp_path / "out"
    main(["mine", "--repo", str(builder.root), "--tickets", str(tickets), "--out", str(out)])
    capsys.readouterr()
    pair_id = f"{builder.hashes[0][:8]}:{builder.hashes[1][:8]}"
    code = main([
        "lines", pair_id, "--repo", str(builder.root),
        "--pairs", str(out / "pairs.jsonl"),
    ])
    assert code == 0
    output = capsys.readouterr().out
    assert "app.py:3" in output
    assert "buggy" in output


def test_lines_pure_addition_pair_notice(repo_builder, tmp_path, capsys):
    builder = repo_builder()
    builder.commit({"a.py": "x\n"}, "base")
    builder.commit({"a.py": "x\ny\n"}, "fix by addition")
    from jitminer.gitrepo import LineRef
    from jitminer.szz import InducingPair, write_pairs_jsonl

    # A pair whose evidence no longer traces to the claimed inducing commit.
    bogus = InducingPair(
        inducing_hash=builder.hashes[1], fix_hash=builder.hashes[1],
        ticket_id=None, evidence=[LineRef("a.py", 1, "old")],
    )
    pairs_path = tmp_path / "pairs.jsonl"
    write_pairs_jsonl([bogus], pairs_path)
    code = main([
        "lines", "0", "--repo", str(builder.root), "--pairs", str(pairs_path),
    ])
    assert code == 0
    assert "no defect lines attributable" in capsys.readouterr().out


def test_lines_unknown_pair(mined_repo, tmp_path, capsys):
    builder, tickets = mined_repo
    out = tmp_path / "out"
    main(["mine", "--repo", str(builder.root), "--tickets", str(tickets), "--out", str(out)])
    code = main([
        "lines", "dead:beef", "--repo", str(builder.root),
        "--pairs", str(out / "pairs.jsonl"),
    ])
    assert code == 1
    assert "UnknownPair" in capsys.readouterr().err


def test_config_file_supplies_defaults(mined_repo, tmp_path):
    builder, tickets = mined_repo
    config = tmp_path / "run.conf"
    config.write_text("la_ld_norm=by_new_file_size\nseed=9\n")
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    main([
        "mine", "--repo", str(builder.root), "--tickets", str(tickets),
        "--out", str(out_a), "--config", str(config),
    ])
    main([
        "mine", "--repo", str(builder.root), "--tickets", str(tickets),
        "--out", str(out_b), "--la-ld-norm", "by_new_file_size", "--seed", "9",
    ])
    assert (out_a / "dataset.csv").read_bytes() == (out_b / "dataset.csv").read_bytes()
    assert json.loads((out_a / "summary.json").read_text())["seed"] == 9


def test_stamp_embeds_timestamp(mined_repo, tmp_path):
    builder, tickets = mined_repo
    out = tmp_path / "out"
    main([
        "mine", "--repo", str(builder.root), "--tickets", str(tickets),
        "--out", str(out), "--stamp",
    ])
    assert "generated_at" in json.loads((out / "summary.json").read_text())
