"""Feature metrics: worked examples, fixtures with hand-computed values,
and invariant properties."""

from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jitminer.diffparse import FileDelta, Hunk
from jitminer.errors import InvalidConfig
from jitminer.gitrepo import CommitRecord, list_commits, open_repository
from jitminer.metrics import (
    YEAR_SECONDS,
    FeatureExtractor,
    HistoryIndex,
    MetricsConfig,
    apply_min_max,
    change_entropy,
    diffusion_metrics,
    directory_of,
    experience_metrics,
    history_metrics,
    min_max_normalize,
    rexp_weight,
    size_metrics,
    subsystem_of,
    window_entropy,
)
from jitminer.szz import CommitLabel
from jitminer.tickets import FixLink
from tests.conftest import ALICE, BOB, DAY, T0, make_matrix


def make_delta(
    path: str,
    added: int = 0,
    deleted: int = 0,
    kind: str = "modified",
    old_path: str | None = None,
    new_file_lines: int = 0,
) -> FileDelta:
    body = [("-", f"d{i}") for i in range(deleted)]
    body += [("+", f"a{i}") for i in range(added)]
    hunks = [Hunk(1, deleted, 1, added, body=body)] if body else []
    return FileDelta(
        path=path, kind=kind, old_path=old_path, hunks=hunks,
        new_file_lines=new_file_lines,
    )


def make_commit(h: str, author: str = "a <a@x>", ts: int = T0) -> CommitRecord:
    return CommitRecord(hash=h, author_id=author, timestamp=ts, message="")


# --- diffusion ---------------------------------------------------------------

def test_path_helpers():
    assert subsystem_of("src/a/x.py") == "src"
    assert subsystem_of("README") == ""
    assert directory_of("src/a/x.py") == "src/a"
    assert directory_of("README") == ""


def test_diffusion_three_files():
    deltas = [make_delta("src/a/x.py"), make_delta("src/a/y.py"), make_delta("docs/r.txt")]
    assert diffusion_metrics(deltas) == (2, 2, 3)


def test_diffusion_root_level_file():
    assert diffusion_metrics([make_delta("README")]) == (1, 1, 1)


def test_diffusion_empty():
    assert diffusion_metrics([]) == (0, 0, 0)


def test_diffusion_root_and_nested_distinct_subsystems():
    deltas = [make_delta("README"), make_delta("src/x.py")]
    ns, nd, nf = diffusion_metrics(deltas)
    assert ns == 2 and nd == 2 and nf == 2


# --- entropy -------------------------------------------------------------------

def test_entropy_two_equal_files():
    deltas = [make_delta("a", added=10), make_delta("b", added=5, deleted=5)]
    assert change_entropy(deltas) == 1.0


def test_entropy_single_file():
    assert change_entropy([make_delta("a", added=7)]) == 0.0


def test_entropy_four_equal_files():
    deltas = [make_delta(f"f{i}", added=3) for i in range(4)]
    assert change_entropy(deltas) == 2.0


def test_entropy_ignores_untouched_files():
    deltas = [make_delta("a", added=10), make_delta("b")]
    assert change_entropy(deltas) == 0.0


def test_window_entropy_worked_example():
    # Touch counts 2,1,1 give p = (0.5, 0.25, 0.25); the entropy formula
    # yields exactly 1.5 bits.
    assert window_entropy({"A": 2, "B": 1, "C": 1}) == 1.5


def test_window_entropy_degenerate():
    assert window_entropy({"A": 1}) == 0.0
    assert window_entropy([1, 1]) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=500), min_size=1, max_size=20))
def test_entropy_bounds_property(counts):
    deltas = [make_delta(f"f{i}", added=c) for i, c in enumerate(counts)]
    h = change_entropy(deltas)
    k = sum(1 for c in counts if c > 0)
    assert h >= 0.0
    assert h <= math.log2(k) + 1e-9 if k > 1 else h == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=2, max_value=24), st.integers(min_value=1, max_value=60))
def test_entropy_uniform_hits_log2k(k, per_file):
    deltas = [make_delta(f"f{i}", added=per_file) for i in range(k)]
    assert change_entropy(deltas) == pytest.approx(math.log2(k), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(min_value=0, max_value=99), min_size=1, max_size=12),
    st.randoms(use_true_random=False),
)
def test_entropy_and_diffusion_permutation_invariant(counts, rng):
    deltas = [make_delta(f"d{i % 3}/f{i}", added=c) for i, c in enumerate(counts)]
    shuffled = deltas[:]
    rng.shuffle(shuffled)
    assert change_entropy(shuffled) == change_entropy(deltas)
    assert diffusion_metrics(shuffled) == diffusion_metrics(deltas)


def test_diffusion_monotone_under_added_file():
    deltas = [make_delta("src/a.py"), make_delta("docs/б.txt")]
    ns0, nd0, nf0 = diffusion_metrics(deltas)
    ns1, nd1, nf1 = diffusion_metrics(deltas + [make_delta("newdir/new.py")])
    assert ns1 >= ns0 and nd1 >= nd0 and nf1 > nf0


# --- size ---------------------------------------------------------------------

def _sized_repo(repo_builder):
    builder = repo_builder()
    content = "".join(f"l{i}\n" for i in range(10))
    builder.commit({"ten.txt": content}, "base")
    # +3 / -1 leaves 12 lines.
    edited = "".join(f"l{i}\n" for i in range(1, 10)) + "n1\nn2\nn3\n"
    builder.commit({"ten.txt": edited}, "edit")
    return builder


def test_size_metrics_raw(repo_builder):
    builder = _sized_repo(repo_builder)
    handle = open_repository(builder.root)
    commits = list_commits(handle)
    from jitminer.gitrepo import commit_diff

    deltas = commit_diff(handle, commits[1].hash)
    la, ld, lt = size_metrics(handle, commits[1], deltas, MetricsConfig())
    assert (la, ld, lt) == (3.0, 1.0, 10.0)


def test_size_metrics_by_new_file_size(repo_builder):
    builder = _sized_repo(repo_builder)
    handle = open_repository(builder.root)
    commits = list_commits(handle)
    from jitminer.gitrepo import commit_diff

    deltas = commit_diff(handle, commits[1].hash)
    config = MetricsConfig(la_ld_norm="by_new_file_size")
    la, ld, _ = size_metrics(handle, commits[1], deltas, config)
    assert la == pytest.approx(3 / 12)
    assert ld == pytest.approx(1 / 12)


def test_size_metrics_deleted_file_denominator_guard():
    # Deleted file: new side is empty, so the raw counts pass through.
    handle = None
    commit = make_commit("x" * 40)
    deltas = [make_delta("gone.py", deleted=4, kind="deleted", old_path="gone.py")]
    config = MetricsConfig(la_ld_norm="by_new_file_size")
    la, ld, lt = size_metrics(handle, commit, deltas, config)
    assert (la, ld, lt) == (0.0, 4.0, 0.0)


def test_size_metrics_by_lt_and_lt_by_nf(repo_builder):
    builder = _sized_repo(repo_builder)
    handle = open_repository(builder.root)
    commits = list_commits(handle)
    from jitminer.gitrepo import commit_diff

    deltas = commit_diff(handle, commits[1].hash)
    la, ld, lt = size_metrics(
        handle, commits[1], deltas, MetricsConfig(la_ld_norm="by_lt")
    )
    assert la == pytest.approx(0.3) and ld == pytest.approx(0.1) and lt == 10.0
    _, _, lt_by_nf = size_metrics(
        handle, commits[1], deltas, MetricsConfig(lt_norm="by_nf")
    )
    assert lt_by_nf == 10.0  # one file: unchanged by the division


# --- history -------------------------------------------------------------------

def _index_for_age_example():
    """Three files last changed 3, 5 and 4 days before the probe commit."""
    cur_ts = T0 + 10 * DAY
    commits = [
        make_commit("1" * 40, ts=cur_ts - 3 * DAY),
        make_commit("2" * 40, ts=cur_ts - 5 * DAY),
        make_commit("3" * 40, ts=cur_ts - 4 * DAY),
        make_commit("9" * 40, ts=cur_ts),
    ]
    deltas = {
        "1" * 40: [make_delta("fa", added=1)],
        "2" * 40: [make_delta("fb", added=1)],
        "3" * 40: [make_delta("fc", added=1)],
        "9" * 40: [make_delta("fa", added=1), make_delta("fb", added=1), make_delta("fc", added=1)],
    }
    index = HistoryIndex.build(commits, deltas)
    return index, commits[-1], deltas["9" * 40]


def test_age_worked_example_is_exactly_four_days():
    index, probe, deltas = _index_for_age_example()
    ndev, age, nuc = history_metrics(index, probe, deltas)
    assert age == 4.0
    assert ndev == 1.0  # same author throughout
    assert nuc == 3.0


def test_history_all_new_files_zero():
    commits = [make_commit("1" * 40, ts=T0)]
    deltas = {"1" * 40: [make_delta("new.py", added=5, kind="added")]}
    index = HistoryIndex.build(commits, deltas)
    ndev, age, nuc = history_metrics(index, commits[0], deltas["1" * 40])
    assert (ndev, age, nuc) == (0.0, 0.0, 0.0)


def test_history_union_fixture():
    # f1 touched by c1 (author A); f2 touched by c2 (author B); current
    # commit touches both: ndev and nuc are unions, not sums.
    commits = [
        make_commit("1" * 40, author="a <a@x>", ts=T0),
        make_commit("2" * 40, author="b <b@x>", ts=T0 + DAY),
        make_commit("3" * 40, author="a <a@x>", ts=T0 + 2 * DAY),
    ]
    deltas = {
        "1" * 40: [make_delta("f1", added=1), make_delta("f2", added=1)],
        "2" * 40: [make_delta("f2", added=1)],
        "3" * 40: [make_delta("f1", added=1), make_delta("f2", added=1)],
    }
    index = HistoryIndex.build(commits, deltas)
    ndev, _, nuc = history_metrics(index, commits[2], deltas["3" * 40])
    assert ndev == 2.0
    assert nuc == 2.0
    config = MetricsConfig(nuc_norm="by_nf")
    _, _, nuc_norm = history_metrics(index, commits[2], deltas["3" * 40], config)
    assert nuc_norm == 1.0


def test_history_rename_carries_history():
    commits = [
        make_commit("1" * 40, author="a <a@x>", ts=T0),
        make_commit("2" * 40, author="b <b@x>", ts=T0 + DAY),
        make_commit("3" * 40, author="a <a@x>", ts=T0 + 2 * DAY),
    ]
    deltas = {
        "1" * 40: [make_delta("old.py", added=3, kind="added")],
        "2" * 40: [make_delta("new.py", kind="renamed", old_path="old.py")],
        "3" * 40: [make_delta("new.py", added=1)],
    }
    index = HistoryIndex.build(commits, deltas)
    ndev, age, nuc = history_metrics(index, commits[2], deltas["3" * 40])
    assert ndev == 2.0  # both the creator and the renamer
    assert nuc == 2.0
    assert age == 1.0   # last touch was the rename, one day before


# --- experience -----------------------------------------------------------------

def test_experience_first_commit_zero():
    commits = [make_commit("1" * 40)]
    deltas = {"1" * 40: [make_delta("src/x.py", added=1)]}
    index = HistoryIndex.build(commits, deltas)
    assert experience_metrics(index, commits[0], deltas["1" * 40]) == (0.0, 0.0, 0.0)


def test_rexp_five_recent_commits():
    author = "a <a@x>"
    cur_ts = T0 + 300 * DAY
    commits = [
        make_commit(f"{i}{'0' * 39}", author=author, ts=cur_ts - (i + 1) * DAY)
        for i in range(5)
    ]
    probe = make_commit("f" * 40, author=author, ts=cur_ts)
    deltas = {c.hash: [make_delta("src/m.py", added=1)] for c in commits}
    deltas[probe.hash] = [make_delta("src/m.py", added=1)]
    index = HistoryIndex.build(commits + [probe], deltas)
    exp, rexp, sexp = experience_metrics(index, probe, deltas[probe.hash])
    assert exp == 5.0
    assert rexp == 5.0  # all less than a year old: weight 1 each
    assert sexp == 5.0


def _three_year_history():
    author = "a <a@x>"
    cur_ts = int(T0 + 10 * YEAR_SECONDS)
    prior_ts = int(cur_ts - 3 * YEAR_SECONDS)
    commits = [
        make_commit(f"{i}{'0' * 39}", author=author, ts=prior_ts) for i in range(5)
    ]
    probe = make_commit("f" * 40, author=author, ts=cur_ts)
    deltas = {c.hash: [make_delta("src/m.py", added=1)] for c in commits}
    deltas[probe.hash] = [make_delta("docs/d.md", added=1)]
    index = HistoryIndex.build(commits + [probe], deltas)
    return index, probe, deltas[probe.hash]


def test_rexp_three_year_old_commits_offset_zero():
    index, probe, deltas = _three_year_history()
    _, rexp, sexp = experience_metrics(index, probe, deltas, MetricsConfig())
    assert rexp == 1.25  # five times 1/(3+1)
    assert sexp == 0.0   # disjoint subsystems (src vs docs)


def test_rexp_three_year_old_commits_offset_minus_one():
    index, probe, deltas = _three_year_history()
    config = MetricsConfig(rexp_year_offset=-1)
    _, rexp, _ = experience_metrics(index, probe, deltas, config)
    assert rexp == pytest.approx(5 / 3, abs=1e-12)


def test_rexp_weight_clamps_at_zero_years():
    assert rexp_weight(0.0, year_offset=-1) == 1.0
    assert rexp_weight(0.5 * YEAR_SECONDS, year_offset=-1) == 1.0
    assert rexp_weight(3.0 * YEAR_SECONDS, year_offset=0) == 0.25
    assert rexp_weight(3.0 * YEAR_SECONDS, year_offset=-1) == pytest.approx(1 / 3)


def test_sexp_counts_subsystem_overlap():
    author = "a <a@x>"
    commits = [
        make_commit("1" * 40, author=author, ts=T0),
        make_commit("2" * 40, author=author, ts=T0 + DAY),
        make_commit("3" * 40, author=author, ts=T0 + 2 * DAY),
    ]
    deltas = {
        "1" * 40: [make_delta("src/a.py", added=1)],
        "2" * 40: [make_delta("docs/b.md", added=1)],
        "3" * 40: [make_delta("src/c.py", added=1)],
    }
    index = HistoryIndex.build(commits, deltas)
    exp, _, sexp = experience_metrics(index, commits[2], deltas["3" * 40])
    assert exp == 2.0
    assert sexp == 1.0  # only the first commit touched src


def test_exp_matches_brute_force_oracle():
    rng = random.Random(7)
    authors = ["a <a@x>", "b <b@x>", "c <c@x>"]
    commits = []
    deltas = {}
    for i in range(60):
        h = f"{i:040x}"
        commits.append(make_commit(h, author=rng.choice(authors), ts=T0 + i * 3600))
        deltas[h] = [make_delta(f"p{rng.randrange(4)}/f.py", added=1)]
    index = HistoryIndex.build(commits, deltas)
    for i, commit in enumerate(commits):
        brute = sum(1 for c in commits[:i] if c.author_id == commit.author_id)
        exp, _, _ = experience_metrics(index, commit, deltas[commit.hash])
        assert exp == float(brute)


# --- config ----------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(InvalidConfig):
        MetricsConfig(entropy_mode="weekly")
    with pytest.raises(InvalidConfig):
        MetricsConfig(window_days=0)
    with pytest.raises(InvalidConfig):
        MetricsConfig(rexp_year_offset=2)


def test_config_from_mapping():
    config = MetricsConfig.from_mapping(
        {"la_ld_norm": "by_lt", "window_days": "7", "rexp_year_offset": "-1"}
    )
    assert config.la_ld_norm == "by_lt"
    assert config.window_days == 7.0
    assert config.rexp_year_offset == -1


# --- extract_features golden ------------------------------------------------------

def _golden_repo(repo_builder):
    builder = repo_builder()
    c1 = builder.commit(
        {"app.py": "a\nb\nbuggy\nd\n", "lib/util.py": "x\ny\n"},
        "add feature", author=ALICE, ts=T0,
    )
    c2 = builder.commit(
        {"app.py": "a\nb\nfixed\nd\nextra\n"},
        "fixes #1: repair crash", author=BOB, ts=T0 + 2 * DAY,
    )
    c3 = builder.commit(
        {"docs/readme.md": "hello\n", "lib/util.py": "x\ny\nz\n"},
        "docs and util tweak", author=ALICE, ts=T0 + 3 * DAY,
    )
    return builder, (c1, c2, c3)


# Hand-computed expectations for the three commits above under the default
# config (raw sizes, nf normalized by the tracked-file count).
GOLDEN = {
    0: dict(
        ns=2.0, nd=2.0, nf=1.0, entropy=0.9182958340544896,
        la=6.0, ld=0.0, lt=0.0, fix=False,
        ndev=0.0, age=0.0, nuc=0.0, exp=0.0, rexp=0.0, sexp=0.0,
        defective=True,
    ),
    1: dict(
        ns=1.0, nd=1.0, nf=0.5, entropy=0.0,
        la=2.0, ld=1.0, lt=4.0, fix=True,
        ndev=1.0, age=2.0, nuc=1.0, exp=0.0, rexp=0.0, sexp=0.0,
        defective=False,
    ),
    2: dict(
        ns=2.0, nd=2.0, nf=2 / 3, entropy=1.0,
        la=2.0, ld=0.0, lt=1.0, fix=False,
        ndev=1.0, age=3.0, nuc=1.0, exp=1.0, rexp=1.0, sexp=1.0,
        defective=False,
    ),
}


def test_extract_features_matches_hand_computation(repo_builder):
    builder, (c1, c2, c3) = _golden_repo(repo_builder)
    handle = open_repository(builder.root)
    commits = list_commits(handle)
    labels = [
        CommitLabel(c1, defective=True, fix=False),
        CommitLabel(c2, defective=False, fix=True),
        CommitLabel(c3, defective=False, fix=False),
    ]
    fix_links = [FixLink(c2, "1", "ticket_id_match", "#1")]
    extractor = FeatureExtractor(handle, commits, labels, fix_links)
    matrix = extractor.extract_all()
    assert [r.commit_hash for r in matrix.rows] == [c1, c2, c3]
    assert matrix.timestamps == [T0, T0 + 2 * DAY, T0 + 3 * DAY]
    for i, expected in GOLDEN.items():
        row = matrix.rows[i]
        for column, value in expected.items():
            got = row.value(column)
            if isinstance(value, bool):
                assert got is value, (i, column)
            else:
                assert got == pytest.approx(value, abs=1e-12), (i, column)


def test_extract_empty_commit_row_retained(repo_builder):
    builder = repo_builder()
    builder.commit({"a.txt": "x\n"}, "base")
    c2 = builder.commit({}, "empty merge-like commit")
    handle = open_repository(builder.root)
    commits = list_commits(handle)
    extractor = FeatureExtractor(handle, commits, [], [])
    matrix = extractor.extract_all()
    assert len(matrix.rows) == 2
    row = matrix.rows[1]
    assert row.commit_hash == c2
    for column in ("ns", "nd", "nf", "entropy", "la", "ld", "lt"):
        assert row.value(column) == 0.0


def test_nf_raw_passthrough_when_tree_wiped(repo_builder):
    builder = repo_builder()
    builder.commit({"a.txt": "x\n", "b.txt": "y\n"}, "base")
    builder.commit({"a.txt": None, "b.txt": None}, "wipe the tree")
    handle = open_repository(builder.root)
    commits = list_commits(handle)
    extractor = FeatureExtractor(handle, commits, [], [])
    matrix = extractor.extract_all()
    # The wipe commit leaves zero tracked files: nf stays raw (2 files).
    assert matrix.rows[1].nf == 2.0
    # The base commit normalizes: 2 changed / 2 tracked.
    assert matrix.rows[0].nf == 1.0


def test_windowed_entropy_mode(repo_builder):
    builder = repo_builder()
    builder.commit({"a.py": "1\n"}, "t1", ts=T0)
    builder.commit({"a.py": "1\n2\n"}, "t2", ts=T0 + DAY)
    builder.commit({"b.py": "1\n"}, "t3", ts=T0 + 2 * DAY)
    builder.commit({"c.py": "1\n"}, "t4", ts=T0 + 3 * DAY)
    handle = open_repository(builder.root)
    commits = list_commits(handle)
    config = MetricsConfig(entropy_mode="windowed", window_days=14)
    extractor = FeatureExtractor(handle, commits, [], [], config)
    matrix = extractor.extract_all()
    # At the last commit the window holds touches a:2, b:1, c:1.
    assert matrix.rows[3].entropy == 1.5


# --- min-max -----------------------------------------------------------------------

def test_min_max_worked_example():
    matrix = make_matrix({"la": [2.0, 4.0, 6.0]})
    result = min_max_normalize(matrix, ["la"])
    assert result.column("la") == [0.0, 0.5, 1.0]
    assert result.norm_bounds["la"] == (2.0, 6.0)


def test_min_max_constant_column_maps_to_zero():
    matrix = make_matrix({"lt": [7.0, 7.0]})
    result = min_max_normalize(matrix, ["lt"])
    assert result.column("lt") == [0.0, 0.0]


def test_min_max_unit_span_unchanged():
    matrix = make_matrix({"entropy": [0.0, 1.0, 0.25]})
    result = min_max_normalize(matrix, ["entropy"])
    assert result.column("entropy") == [0.0, 1.0, 0.25]


def test_min_max_idempotent_and_bounded():
    matrix = make_matrix({"la": [3.0, 9.0, 4.5, 7.1], "ld": [0.0, 0.0, 0.0, 0.0]})
    once = min_max_normalize(matrix)
    twice = min_max_normalize(once)
    for name in ("la", "ld"):
        assert all(0.0 <= v <= 1.0 for v in once.column(name))
        assert once.column(name) == twice.column(name)


def test_min_max_leaves_booleans_and_hash(repo_builder):
    matrix = make_matrix({"la": [1.0, 5.0]}, defective=[True, False])
    matrix.rows[0].fix = True
    result = min_max_normalize(matrix)
    assert result.rows[0].fix is True
    assert result.rows[0].defective is True
    assert result.rows[0].commit_hash == matrix.rows[0].commit_hash


def test_apply_min_max_replays_bounds_on_unseen_data():
    train = make_matrix({"la": [0.0, 10.0]})
    fitted = min_max_normalize(train, ["la"])
    unseen = make_matrix({"la": [5.0, 20.0]})
    replayed = apply_min_max(unseen, fitted.norm_bounds)
    assert replayed.column("la") == [0.5, 2.0]  # out-of-range stays unclipped


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=1e6), min_size=1, max_size=30))
def test_min_max_range_property(values):
    matrix = make_matrix({"age": values})
    result = min_max_normalize(matrix, ["age"])
    normalized = result.column("age")
    assert all(0.0 <= v <= 1.0 for v in normalized)
    lo, hi = result.norm_bounds["age"]
    if hi > lo:
        assert max(normalized) == 1.0 and min(normalized) == 0.0
