"""Command-line front end.

Subcommands mirror the workflow stages: mine, stats, normalize, train,
eval, ablate, lines. Exit codes: 0 success, 1 runtime failure, 2 usage
error. All randomness funnels through --seed and is echoed in outputs;
outputs embed no timestamp unless --stamp is given, so reruns are
byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import dataset as dataset_io
from . import model as model_api
from .errors import JitMinerError, UnknownPair
from .gitrepo import file_lines_at, list_commits, open_repository
from .metrics import FeatureExtractor, MetricsConfig, min_max_normalize
from .szz import CommitLabel, defect_lines, read_pairs_jsonl, run_szz, write_pairs_jsonl
from .tickets import LinkConfig, link_fixes, parse_ticket_export

logger = logging.getLogger(__name__)

SZZ_VARIANT_NOTE = (
    "Counts depend on the labeling variant in use; figures produced by "
    "other SZZ implementations are not guaranteed to reproduce exactly."
)


def _load_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    mapping: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise JitMinerError(f"config line is not key=value: {line!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip().strip('"')
    return mapping


def _pick(args_value, file_config: dict, key: str, default, convert=str):
    """CLI value wins, then the config file, then the built-in default."""
    if args_value is not None:
        return args_value
    if key in file_config:
        return convert(file_config[key])
    return default


def _bool_of(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jitminer",
        description="Mine a git repository and a bug-tracker export into a "
        "labeled change-level defect dataset; train and probe the baseline "
        "classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mine = sub.add_parser("mine", help="repository + tickets -> dataset.csv, pairs.jsonl, summary.json")
    mine.add_argument("--repo", required=True, help="path to a local git clone")
    mine.add_argument("--tickets", required=True, help="bug tracker export file")
    mine.add_argument("--tickets-format", choices=("csv", "json"), default=None)
    mine.add_argument("--out", default=None, help="output directory (default .)")
    mine.add_argument("--pairs-out", default=None, help="pairs JSONL path (default <out>/pairs.jsonl)")
    mine.add_argument("--links", choices=("id+keyword", "id-only"), default=None)
    mine.add_argument("--require-defect-type", action="store_true", default=None)
    mine.add_argument("--no-partial-fix", action="store_true", default=None)
    mine.add_argument("--entropy-mode", choices=("per_commit", "windowed"), default=None)
    mine.add_argument("--window-days", type=float, default=None)
    mine.add_argument("--la-ld-norm", choices=("raw", "by_new_file_size", "by_lt"), default=None)
    mine.add_argument("--lt-norm", choices=("raw", "by_nf"), default=None)
    mine.add_argument("--nf-norm", choices=("raw", "by_repo_file_count"), default=None)
    mine.add_argument("--nuc-norm", choices=("raw", "by_nf"), default=None)
    mine.add_argument("--rexp-year-offset", type=int, choices=(0, -1), default=None)
    mine.add_argument("--since", type=int, default=None, help="epoch seconds lower bound")
    mine.add_argument("--until", type=int, default=None, help="epoch seconds upper bound")
    _common_flags(mine)
    mine.set_defaults(func=cmd_mine)

    stats = sub.add_parser("stats", help="dataset overview, per-feature table, extension report")
    stats.add_argument("dataset", help="dataset CSV path")
    stats.add_argument("--repo", default=None, help="repository for the extension report")
    stats.add_argument("--json", action="store_true")
    _common_flags(stats)
    stats.set_defaults(func=cmd_stats)

    norm = sub.add_parser("normalize", help="min-max normalize a dataset CSV")
    norm.add_argument("dataset")
    norm.add_argument("--out", required=True)
    norm.add_argument("--columns", default=None, help="comma list (default: all numeric)")
    _common_flags(norm)
    norm.set_defaults(func=cmd_normalize)

    train = sub.add_parser("train", help="train the classifier on a dataset CSV")
    _train_flags(train)
    train.add_argument("--model-out", required=True)
    train.add_argument("--json", action="store_true")
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("eval", help="evaluate a saved model on a dataset CSV")
    evaluate.add_argument("dataset")
    evaluate.add_argument("--model", required=True)
    evaluate.add_argument("--threshold", type=float, default=None)
    evaluate.add_argument("--json", action="store_true")
    _common_flags(evaluate)
    evaluate.set_defaults(func=cmd_eval)

    ablate = sub.add_parser("ablate", help="leave-one-out feature ablation")
    _train_flags(ablate)
    ablate.add_argument("--json", action="store_true")
    ablate.set_defaults(func=cmd_ablate)

    lines = sub.add_parser("lines", help="defect-inducing lines of one (inducing, fix) pair")
    lines.add_argument("pair", help="'<inducing>:<fix>' (hash prefixes) or row index into the JSONL")
    lines.add_argument("--repo", required=True)
    lines.add_argument("--pairs", required=True, help="pairs JSONL from mine")
    _common_flags(lines)
    lines.set_defaults(func=cmd_lines)

    return parser


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="master seed (default 42)")
    sub.add_argument("--jobs", type=int, default=None, help="worker count (default 1)")
    sub.add_argument("--config", default=None, help="key=value config file")
    sub.add_argument("--stamp", action="store_true", help="embed a timestamp in reports")


def _train_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("dataset")
    sub.add_argument("--features", default=None, help="comma list (default: all 14)")
    sub.add_argument("--epochs", type=int, default=None)
    sub.add_argument("--lr", type=float, default=None)
    sub.add_argument("--split", type=float, default=None)
    sub.add_argument("--hidden-width", type=int, default=None)
    sub.add_argument("--layers", type=int, default=None, help="weight layer count (default 9)")
    sub.add_argument("--norm-fit", choices=("train", "full", "none"), default=None)
    sub.add_argument("--threshold", type=float, default=None)
    _common_flags(sub)


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("JITMINER_LOG", "WARNING").upper()
    if level not in ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except JitMinerError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _metrics_config(args, file_config: dict) -> MetricsConfig:
    return MetricsConfig(
        entropy_mode=_pick(args.entropy_mode, file_config, "entropy_mode", "per_commit"),
        window_days=_pick(args.window_days, file_config, "window_days", 14.0, float),
        la_ld_norm=_pick(args.la_ld_norm, file_config, "la_ld_norm", "raw"),
        lt_norm=_pick(args.lt_norm, file_config, "lt_norm", "raw"),
        nf_norm=_pick(args.nf_norm, file_config, "nf_norm", "by_repo_file_count"),
        nuc_norm=_pick(args.nuc_norm, file_config, "nuc_norm", "raw"),
        rexp_year_offset=_pick(args.rexp_year_offset, file_config, "rexp_year_offset", 0, int),
    )


def cmd_mine(args) -> int:
    file_config = _load_config_file(args.config)
    seed = _pick(args.seed, file_config, "seed", 42, int)
    jobs = max(1, _pick(args.jobs, file_config, "jobs", 1, int))
    out_dir = Path(_pick(args.out, file_config, "out", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs_path = Path(args.pairs_out) if args.pairs_out else out_dir / "pairs.jsonl"
    metrics_config = _metrics_config(args, file_config)
    link_config = LinkConfig(
        require_defect_type=bool(
            _pick(args.require_defect_type, file_config, "require_defect_type", False, _bool_of)
        ),
        keyword_fallback=_pick(args.links, file_config, "links", "id+keyword") != "id-only",
    )
    partial_fix = not _pick(args.no_partial_fix, file_config, "no_partial_fix", False, _bool_of)

    handle = open_repository(_pick(args.repo, file_config, "repo", args.repo))
    commits = list_commits(handle, since=args.since, until=args.until)

    tickets_format = _pick(args.tickets_format, file_config, "tickets_format", "csv")
    with open(args.tickets, "rb") as fh:
        tickets = parse_ticket_export(fh, tickets_format)

    if not commits:
        logger.warning("repository has no commits on %s", handle.default_branch)
        dataset_io.export_csv(dataset_io.FeatureMatrix(rows=[]), out_dir / "dataset.csv")
        write_pairs_jsonl([], pairs_path)
        _write_summary(out_dir / "summary.json", None, seed, metrics_config, args.stamp)
        print("mined 0 commits (empty repository)")
        return 0

    links = link_fixes(commits, tickets, link_config)
    pairs, labels = run_szz(
        handle, commits, links, tickets, jobs=jobs, partial_fix_detection=partial_fix
    )
    extractor = FeatureExtractor(
        handle, commits, labels, links, metrics_config, jobs=jobs
    )
    matrix = extractor.extract_all(jobs=jobs)

    rows = dataset_io.export_csv(matrix, out_dir / "dataset.csv")
    write_pairs_jsonl(pairs, pairs_path)
    summary = dataset_io.summarize(matrix)
    _write_summary(out_dir / "summary.json", summary, seed, metrics_config, args.stamp)
    print(
        f"mined {rows} commits: {summary.defective_count} defective "
        f"({summary.defective_pct:.2f}%), {summary.fix_count} fixes, "
        f"{len(pairs)} inducing pairs"
    )
    return 0


def _write_summary(path: Path, summary, seed: int, config: MetricsConfig, stamp: bool) -> None:
    payload = {
        "seed": seed,
        "note": SZZ_VARIANT_NOTE,
        "metrics_config": {
            "entropy_mode": config.entropy_mode,
            "window_days": config.window_days,
            "la_ld_norm": config.la_ld_norm,
            "lt_norm": config.lt_norm,
            "nf_norm": config.nf_norm,
            "nuc_norm": config.nuc_norm,
            "rexp_year_offset": config.rexp_year_offset,
        },
        "summary": summary.to_dict() if summary else {"row_count": 0},
    }
    if stamp:
        import time

        payload["generated_at"] = int(time.time())
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def cmd_stats(args) -> int:
    matrix = dataset_io.import_csv(args.dataset)
    summary = dataset_io.summarize(matrix)
    report = None
    if args.repo:
        handle = open_repository(args.repo)
        labels = [
            CommitLabel(commit_hash=r.commit_hash, defective=r.defective, fix=r.fix)
            for r in matrix.rows
        ]
        report = dataset_io.extension_report(handle, labels)
    if args.json:
        payload = {"note": SZZ_VARIANT_NOTE, "summary": summary.to_dict()}
        if report is not None:
            payload["extensions"] = report.to_dict()
        print(json.dumps(payload, sort_keys=True, indent=1))
        return 0

    print(f"rows: {summary.row_count}")
    print(f"defective: {summary.defective_count} ({summary.defective_pct:.2f}%)")
    print(f"fixes: {summary.fix_count}")
    if summary.period:
        print(f"period: {summary.period[0]}..{summary.period[1]} (epoch seconds)")
    print(f"note: {SZZ_VARIANT_NOTE}")
    print()
    print(f"{'feature':>8} {'min':>12} {'max':>12} {'mean':>12} {'stddev':>12}")
    for name, s in summary.stats.items():
        print(f"{name:>8} {s.min:>12.4f} {s.max:>12.4f} {s.mean:>12.4f} {s.stddev:>12.4f}")
    if report is not None:
        print()
        print(f"defective commits: {report.defective_commits}")
        print(f"mean files changed per defective commit: {report.mean_files_per_defective_commit:.2f}")
        print(f"mean distinct extensions per defective commit: {report.mean_distinct_extensions:.2f}")
        print(f"{'extension':>16} {'mean #changed':>14}")
        for ext, mean in report.rows:
            print(f"{ext:>16} {mean:>14.2f}")
    elif not args.json:
        print("extension report omitted (pass --repo to compute it)")
    return 0


def cmd_normalize(args) -> int:
    matrix = dataset_io.import_csv(args.dataset)
    columns = tuple(args.columns.split(",")) if args.columns else None
    normalized = min_max_normalize(matrix, columns)
    rows = dataset_io.export_csv(normalized, args.out)
    print(f"normalized {rows} rows -> {args.out}")
    return 0


def _train_config(args, file_config: dict) -> model_api.TrainConfig:
    features = _pick(args.features, file_config, "features", None)
    subset = tuple(f.strip() for f in features.split(",")) if features else None
    return model_api.TrainConfig(
        epochs=_pick(args.epochs, file_config, "epochs", 3500, int),
        learning_rate=_pick(args.lr, file_config, "learning_rate", 0.001, float),
        split_ratio=_pick(args.split, file_config, "split_ratio", 0.7, float),
        seed=_pick(args.seed, file_config, "seed", 42, int),
        feature_subset=subset,
        hidden_width=_pick(args.hidden_width, file_config, "hidden_width", 32, int),
        weight_layers=_pick(args.layers, file_config, "weight_layers", 9, int),
        norm_fit=_pick(args.norm_fit, file_config, "norm_fit", "train"),
        threshold=_pick(args.threshold, file_config, "threshold", 0.5, float),
    )


def cmd_train(args) -> int:
    file_config = _load_config_file(args.config)
    config = _train_config(args, file_config)
    matrix = dataset_io.import_csv(args.dataset)
    result = model_api.train(matrix, config)
    model_api.save_model(args.model_out, result, config)
    metrics = model_api.evaluate_matrix(
        result.params, result.test, result.features, config.threshold,
        config.smooth_l1_beta,
    )
    if args.json:
        print(json.dumps({
            "backend": result.backend,
            "final_loss": result.loss_history[-1],
            "train_size": result.train_size,
            "test_size": result.test_size,
            "test": metrics.to_dict(),
            "model": str(args.model_out),
        }, sort_keys=True, indent=1))
    else:
        print(f"backend: {result.backend}")
        print(f"trained {config.epochs} epochs on {result.train_size} rows "
              f"(balanced), final loss {result.loss_history[-1]:.6f}")
        print(f"test ({result.test_size} rows): recall {metrics.recall:.4f}, "
              f"precision {metrics.precision:.4f}, loss {metrics.mean_loss:.4f}")
        print(f"model written to {args.model_out}")
    return 0


def cmd_eval(args) -> int:
    loaded = model_api.load_model(args.model)
    matrix = dataset_io.import_csv(args.dataset)
    from .metrics import apply_min_max

    if loaded.norm_bounds:
        matrix = apply_min_max(matrix, loaded.norm_bounds)
    threshold = args.threshold if args.threshold is not None else loaded.threshold
    metrics = model_api.evaluate_matrix(
        loaded.params, matrix, loaded.features, threshold
    )
    if args.json:
        print(json.dumps(metrics.to_dict(), sort_keys=True, indent=1))
    else:
        tp, fp, tn, fn = metrics.confusion
        print(f"recall {metrics.recall:.4f}  precision {metrics.precision:.4f}  "
              f"f1 {metrics.f1:.4f}  loss {metrics.mean_loss:.4f}")
        print(f"confusion: tp={tp} fp={fp} tn={tn} fn={fn} @ threshold {threshold}")
    return 0


def cmd_ablate(args) -> int:
    file_config = _load_config_file(args.config)
    config = _train_config(args, file_config)
    jobs = max(1, _pick(args.jobs, file_config, "jobs", 1, int))
    matrix = dataset_io.import_csv(args.dataset)
    report = model_api.ablate(matrix, config.features, config, jobs=jobs)
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True, indent=1))
    else:
        print(f"{'subset':>12} {'recall':>8} {'loss':>10}")
        for row in report.rows:
            print(f"{row.label:>12} {row.recall:>8.4f} {row.mean_loss:>10.6f}")
    return 0


def cmd_lines(args) -> int:
    handle = open_repository(args.repo)
    pairs = read_pairs_jsonl(args.pairs)
    pair = _find_pair(pairs, args.pair)
    refs = defect_lines(handle, pair)
    if not refs:
        print(
            f"no defect lines attributable for {pair.inducing_hash[:12]} -> "
            f"{pair.fix_hash[:12]} (pure-addition fix or moved lines)"
        )
        return 0
    print(f"defect-inducing lines of {pair.inducing_hash[:12]} "
          f"(fixed by {pair.fix_hash[:12]}):")
    for ref in refs:
        content = file_lines_at(handle, pair.inducing_hash, ref.path)
        print(f"\n{ref.path}:{ref.line_no}")
        lo = max(1, ref.line_no - 2)
        hi = min(len(content), ref.line_no + 2)
        for no in range(lo, hi + 1):
            marker = ">" if no == ref.line_no else " "
            print(f" {marker} {no:>5} | {content[no - 1]}")
    return 0


def _find_pair(pairs, token: str):
    if ":" in token:
        ind_prefix, fix_prefix = token.split(":", 1)
        matches = [
            p for p in pairs
            if p.inducing_hash.startswith(ind_prefix)
            and p.fix_hash.startswith(fix_prefix)
        ]
    elif token.isdigit():
        idx = int(token)
        matches = [pairs[idx]] if 0 <= idx < len(pairs) else []
    else:
        matches = []
    if not matches:
        raise UnknownPair(f"no pair matches {token!r} in the audit file")
    if len(matches) > 1:
        raise UnknownPair(f"{token!r} is ambiguous ({len(matches)} pairs match)")
    return matches[0]


def entry() -> None:
    """Console-script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    entry()
