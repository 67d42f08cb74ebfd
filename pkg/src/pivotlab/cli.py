"""Command-line pipeline: one subcommand per engine operation, plus a run manifest.

Every subcommand reads its inputs, writes fixed-name tabular outputs into
``--output-dir``, and records a ``manifest.json`` with the configuration and
sha256 hashes of inputs and outputs (file basenames only, so reruns in
different directories produce identical manifests). Exit codes: 0 success,
1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import traceback
from pathlib import Path

from . import __version__
from .careers import (
    MATCHING_HEADER,
    PROFILE_HEADER,
    UNMATCHED_HEADER,
    COLLAB_HEADER,
    career_profile,
    collaborator_rows,
    established_authors,
    match_controls,
    profile_rows,
)
from .corpus import CorpusError, IngestConfig, filter_min_references, ingest_path, parse_pub_date, summary_rows
from .metrics import (
    GROUP_TABLE_HEADER,
    HIT_TABLE_HEADER,
    PLACEMENT_HEADER,
    PROXIMITY_HEADER,
    hit_flags,
    journal_placement,
    proximity_rows,
)
from .pipeline import build_paper_frame, residualized_bins, residualized_slope, restrict_years
from .pivot import AUTHOR_TABLE_HEADER, PAPER_TABLE_HEADER, PivotWindow, author_pivot_rows, paper_pivot_rows
from .stats import AnalysisFrame, BinTable, OlsResult, field_slope_table, ols, slope_trend
from .synth import GroundTruth, config_from_dict, generate
from .tagger import WordScoreTable, author_title_proximity, build_relfreq, parse_query, tag
from .tables import read_table, write_table


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class Run:
    """Collects inputs, outputs, and config values for the run manifest."""

    def __init__(self, subcommand: str, output_dir: str):
        self.subcommand = subcommand
        self.dir = Path(output_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.inputs: list[Path] = []
        self.config: dict = {}
        self.outputs: list[Path] = []

    def input(self, path: str | Path) -> Path:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"input not found: {path}")
        self.inputs.append(path)
        return path

    def out(self, name: str) -> Path:
        path = self.dir / name
        if any(path.resolve() == p.resolve() for p in self.inputs):
            raise CorpusError(f"output {path} would overwrite an input; choose another --output-dir")
        self.outputs.append(path)
        return path

    def write_manifest(self) -> None:
        manifest = {
            "tool": "pivotlab",
            "version": __version__,
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": {p.name: _sha256(p) for p in self.inputs},
            "outputs": {p.name: _sha256(p) for p in self.outputs},
        }
        with (self.dir / "manifest.json").open("w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _load_corpus(run: Run, args, apply_min_refs: bool = False):
    path = run.input(args.input)
    config = IngestConfig()
    corpus, report = ingest_path(path, config)
    if apply_min_refs and args.min_references > 0:
        corpus = filter_min_references(corpus, args.min_references)
    return corpus, report


def _read_ids(run: Run, path: str) -> list[str]:
    text = run.input(path).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def _query_from_args(run: Run, args):
    if getattr(args, "query_string", None):
        return parse_query(args.query_string)
    if getattr(args, "query", None):
        return parse_query(run.input(args.query).read_text(encoding="utf-8"))
    raise _value_error("a query is required: pass --query FILE or --query-string TEXT")


def _value_error(message: str) -> ValueError:
    return ValueError(message)


def _year_filter(args) -> tuple[int, int] | None:
    lo = getattr(args, "year_from", None)
    hi = getattr(args, "year_to", None)
    if lo is None and hi is None:
        return None
    return (lo if lo is not None else 1500, hi if hi is not None else 2100)


def _topic_set(run: Run, corpus, args) -> set[str]:
    if getattr(args, "topic", None):
        ids = _read_ids(run, args.topic)
        unknown = [i for i in ids if i not in corpus]
        if unknown:
            raise _value_error(f"topic file names papers outside the corpus: {unknown[:5]}")
        return set(ids)
    query = _query_from_args(run, args)
    return tag(corpus, query, _year_filter(args))


def _window(args) -> PivotWindow:
    return PivotWindow.from_flag(args.window)


def _horizon(args):
    if getattr(args, "horizon", None) is None:
        return None
    return parse_pub_date(args.horizon)[0]


def _fe_list(args) -> list[str]:
    raw = getattr(args, "fe", None)
    if not raw:
        return []
    return [f.strip() for f in raw.split(",") if f.strip()]


def cmd_ingest(args) -> Run:
    run = Run("ingest", args.output_dir)
    path = run.input(args.input)
    corpus, report = ingest_path(path, IngestConfig(min_references=args.min_references))
    run.config = {"input": path.name, "min_references": args.min_references}
    corpus.save(run.out("corpus.jsonl"))
    write_table(run.out("report.tsv"), ("metric", "value"), summary_rows(corpus, report))
    return run


def cmd_validate(args) -> Run:
    run = Run("validate", args.output_dir)
    path = run.input(args.input)
    corpus, report = ingest_path(path, IngestConfig(min_references=args.min_references))
    run.config = {"input": path.name, "min_references": args.min_references}
    write_table(run.out("report.tsv"), ("metric", "value"), summary_rows(corpus, report))
    return run


def cmd_tag(args) -> Run:
    run = Run("tag", args.output_dir)
    corpus, _ = _load_corpus(run, args)
    query = _query_from_args(run, args)
    tagged = tag(corpus, query, _year_filter(args))
    run.config = {
        "input": Path(args.input).name,
        "year_from": args.year_from,
        "year_to": args.year_to,
    }
    write_table(run.out("tagged.tsv"), ("paper_id",), [(pid,) for pid in sorted(tagged)])
    return run


def cmd_relfreq(args) -> Run:
    run = Run("relfreq", args.output_dir)
    corpus, _ = _load_corpus(run, args)
    topic = _topic_set(run, corpus, args)
    exclusions: list[str] = []
    if args.exclusions:
        exclusions = _read_ids(run, args.exclusions)
    table = build_relfreq(
        corpus,
        topic,
        min_topic_papers=args.min_topic_papers,
        top_k=args.top_k,
        exclusions=exclusions,
        year=args.year,
    )
    run.config = {
        "input": Path(args.input).name,
        "min_topic_papers": args.min_topic_papers,
        "top_k": args.top_k,
        "year": args.year,
        "n_topic_papers": len(topic),
    }
    write_table(run.out("wordscores.tsv"), ("word", "score"), table.rows())
    return run


def cmd_pivot(args) -> Run:
    run = Run("pivot", args.output_dir)
    corpus, _ = _load_corpus(run, args)
    window = _window(args)
    # thread count is an execution detail: outputs are identical for any value
    run.config = {"input": Path(args.input).name, "window": window.value}
    write_table(run.out("author_pivots.tsv"), AUTHOR_TABLE_HEADER, author_pivot_rows(corpus, window, args.threads))
    write_table(run.out("paper_pivots.tsv"), PAPER_TABLE_HEADER, paper_pivot_rows(corpus, window, args.threads))
    return run


def cmd_impact(args) -> Run:
    run = Run("impact", args.output_dir)
    corpus, _ = _load_corpus(run, args)
    horizon = _horizon(args)
    hits = hit_flags(corpus, horizon, args.percentile, args.min_group)
    placement = journal_placement(
        corpus, hits, (args.placement_from, args.placement_to), args.min_year_papers
    )
    run.config = {
        "input": Path(args.input).name,
        "horizon": args.horizon,
        "percentile": args.percentile,
        "min_group": args.min_group,
        "placement_from": args.placement_from,
        "placement_to": args.placement_to,
        "min_year_papers": args.min_year_papers,
    }
    write_table(run.out("hits.tsv"), HIT_TABLE_HEADER, hits.rows())
    write_table(run.out("hit_groups.tsv"), GROUP_TABLE_HEADER, hits.group_rows())
    write_table(
        run.out("journal_placement.tsv"),
        PLACEMENT_HEADER,
        [(e.venue_id, e.score, e.years_used, e.papers_used) for e in placement],
    )
    return run


def _scores_from_file(run: Run, path: str) -> WordScoreTable:
    header, rows = read_table(run.input(path))
    if header[:2] != ["word", "score"]:
        raise _value_error(f"{path} is not a word-score table (columns {header})")
    scores = {row[0]: float(row[1]) for row in rows}
    return WordScoreTable(scores=scores, min_topic_papers=0, top_k=len(scores), exclusions=())


def cmd_proximity(args) -> Run:
    run = Run("proximity", args.output_dir)
    corpus, _ = _load_corpus(run, args)
    run.config = {
        "input": Path(args.input).name,
        "mode": args.mode,
        "cutoff_year": args.cutoff_year,
    }
    if args.mode == "title":
        if not args.scores:
            raise _value_error("--mode title requires --scores WORDSCORES_FILE")
        table = _scores_from_file(run, args.scores)
        rows = []
        for author in corpus.author_ids():
            value = author_title_proximity(corpus, author, table, args.cutoff_year)
            rows.append((author, value))
        write_table(run.out("proximity.tsv"), ("author_id", "title_score"), rows)
    else:
        topic = _topic_set(run, corpus, args)
        run.config["n_topic_papers"] = len(topic)
        rows = proximity_rows(corpus, topic, args.cutoff_year)
        if args.mode == "total-citations":
            rows = [(a, t) for a, t, _ in rows]
            write_table(run.out("proximity.tsv"), ("author_id", "total_citations"), rows)
        elif args.mode == "distinct-papers":
            rows = [(a, d) for a, _, d in rows]
            write_table(run.out("proximity.tsv"), ("author_id", "distinct_papers"), rows)
        else:
            write_table(run.out("proximity.tsv"), PROXIMITY_HEADER, rows)
    return run


def cmd_careers(args) -> Run:
    run = Run("careers", args.output_dir)
    corpus, _ = _load_corpus(run, args)
    established = established_authors(corpus, args.min_pubs, args.cutoff_year)
    window = (args.window_start, args.window_end)
    run.config = {
        "input": Path(args.input).name,
        "min_pubs": args.min_pubs,
        "cutoff_year": args.cutoff_year,
        "window_start": args.window_start,
        "window_end": args.window_end,
    }
    write_table(run.out("profiles.tsv"), PROFILE_HEADER, profile_rows(corpus, established, window))
    return run


def cmd_match(args) -> Run:
    run = Run("match", args.output_dir)
    corpus, _ = _load_corpus(run, args)
    treated = set(_read_ids(run, args.treated))
    pool = set(_read_ids(run, args.pool))
    window = (args.window_start, args.window_end)
    profiles = {a: career_profile(corpus, a, window) for a in sorted(treated | pool)}
    matching = match_controls(treated, pool, profiles)
    run.config = {
        "input": Path(args.input).name,
        "n_treated": len(treated),
        "n_pool": len(pool),
        "window_start": args.window_start,
        "window_end": args.window_end,
    }
    write_table(run.out("matching.tsv"), MATCHING_HEADER, matching.rows())
    write_table(run.out("unmatched.tsv"), UNMATCHED_HEADER, matching.unmatched_rows())
    return run


def cmd_collab(args) -> Run:
    run = Run("collab", args.output_dir)
    corpus, _ = _load_corpus(run, args)
    established = established_authors(corpus, args.min_pubs, args.cutoff_year)
    run.config = {
        "input": Path(args.input).name,
        "min_pubs": args.min_pubs,
        "cutoff_year": args.cutoff_year,
        "min_prior_pubs": args.min_prior_pubs,
    }
    rows = collaborator_rows(corpus, established, established, args.min_prior_pubs)
    write_table(run.out("collaborators.tsv"), COLLAB_HEADER, rows)
    return run


def cmd_binscatter(args) -> Run:
    run = Run("binscatter", args.output_dir)
    frame = AnalysisFrame.read(run.input(args.input))
    factors = _fe_list(args)
    table = residualized_bins(frame, args.x, args.y, factors, args.bins)
    run.config = {
        "input": Path(args.input).name,
        "x": args.x,
        "y": args.y,
        "bins": args.bins,
        "fe": factors,
        "fe_tolerance": 1e-10,
        "n_dropped": table.n_dropped,
    }
    table.write(run.out("bins.tsv"))
    return run


def cmd_regress(args) -> Run:
    run = Run("regress", args.output_dir)
    frame = AnalysisFrame.read(run.input(args.input))
    run.config = {"input": Path(args.input).name, "y": args.y, "x": args.x}
    if args.by_field:
        table = field_slope_table(frame, args.y, args.x[0], args.by_field, args.min_papers)
        run.config.update({"by_field": args.by_field, "min_papers": args.min_papers})
        write_table(run.out("field_slopes.tsv"), table.HEADER, table.rows())
        summary = [
            ("n_fields", len(table.slopes)),
            ("n_skipped", len(table.skipped)),
            ("share_negative", table.share_negative if table.slopes else None),
        ]
        write_table(run.out("regress_summary.tsv"), ("metric", "value"), summary)
    elif args.trend_year:
        result = slope_trend(frame, args.y, args.x[0], args.trend_year)
        run.config.update({"trend_year": args.trend_year})
        write_table(run.out("trend.tsv"), result.HEADER, result.rows())
    else:
        result = ols(frame, args.y, list(args.x))
        write_table(run.out("coefficients.tsv"), OlsResult.HEADER, result.rows())
    return run


def cmd_synth(args) -> Run:
    run = Run("synth", args.output_dir)
    overrides: dict = {}
    if args.config:
        overrides = json.loads(run.input(args.config).read_text(encoding="utf-8"))
    for name, flag in (
        ("n_authors", "authors"),
        ("n_venues", "venues"),
        ("n_l1_fields", "fields"),
        ("start_year", "start_year"),
        ("warmup_years", "warmup_years"),
        ("cohort_years", "cohort_years"),
        ("papers_per_author_year", "rate"),
        ("beta", "beta"),
        ("home_mix_prob", "home_mix"),
    ):
        value = getattr(args, flag)
        if value is not None:
            overrides[name] = value
    config = config_from_dict(overrides, seed=args.seed)
    lines, truth = generate(config)
    run.config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(config).items()}
    with run.out("corpus.jsonl").open("w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")
    write_table(run.out("truth_papers.tsv"), GroundTruth.PAPER_HEADER, truth.paper_rows())
    write_table(run.out("truth_authors.tsv"), GroundTruth.AUTHOR_HEADER, truth.author_rows())
    return run


def cmd_report(args) -> Run:
    """Composition: pivot + impact + frame + residualized binscatter + slopes."""
    run = Run("report", args.output_dir)
    corpus, _ = _load_corpus(run, args, apply_min_refs=True)
    window = _window(args)
    horizon = _horizon(args)
    factors = _fe_list(args) or ["field_year"]
    frame = build_paper_frame(corpus, window, horizon, args.percentile, args.min_group, args.threads)
    year_filter = _year_filter(args)
    if year_filter is not None:
        frame = restrict_years(frame, year_filter)
    run.config = {
        "input": Path(args.input).name,
        "window": window.value,
        "min_references": args.min_references,
        "percentile": args.percentile,
        "min_group": args.min_group,
        "bins": args.bins,
        "fe": factors,
        "fe_tolerance": 1e-10,
        "year_from": args.year_from,
        "year_to": args.year_to,
    }
    frame.write(run.out("frame.tsv"))
    bins = residualized_bins(frame, "pivot_size", "hit", factors, args.bins)
    bins.write(run.out("bins.tsv"))
    fit = residualized_slope(frame, "hit", "pivot_size", factors)
    write_table(run.out("slope.tsv"), OlsResult.HEADER, fit.rows())
    table = field_slope_table(frame, "hit", "pivot_size", args.field_col, args.min_papers)
    write_table(run.out("field_slopes.tsv"), table.HEADER, table.rows())
    summary = [
        ("papers", len(corpus)),
        ("frame_rows", frame.n),
        ("slope", fit["pivot_size"]),
        ("slope_se", fit.std_error("pivot_size")),
        ("n_fields", len(table.slopes)),
        ("share_negative", table.share_negative if table.slopes else None),
    ]
    write_table(run.out("report_summary.tsv"), ("metric", "value"), summary)
    return run


COMMANDS = {
    "ingest": cmd_ingest,
    "validate": cmd_validate,
    "tag": cmd_tag,
    "relfreq": cmd_relfreq,
    "pivot": cmd_pivot,
    "impact": cmd_impact,
    "proximity": cmd_proximity,
    "careers": cmd_careers,
    "match": cmd_match,
    "collab": cmd_collab,
    "binscatter": cmd_binscatter,
    "regress": cmd_regress,
    "synth": cmd_synth,
    "report": cmd_report,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="pivotlab", description="Pivot measurement over bibliographic corpora")
    parser.add_argument("--version", action="version", version=f"pivotlab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def common(p, input_help="line-delimited corpus records"):
        p.add_argument("--input", required=True, help=input_help)
        p.add_argument("--output-dir", default=".", help="directory for outputs and manifest")
        p.add_argument("--threads", type=int, default=1, help="worker threads (outputs are identical for any value)")

    def query_flags(p):
        p.add_argument("--query", help="file holding a boolean phrase query")
        p.add_argument("--query-string", help="boolean phrase query given inline")
        p.add_argument("--topic", help="file of topic paper ids, one per line")
        p.add_argument("--year-from", type=int)
        p.add_argument("--year-to", type=int)

    p = sub.add_parser("ingest", help="ingest, merge preprints, and write the normalized corpus")
    common(p)
    p.add_argument("--min-references", type=int, default=0)

    p = sub.add_parser("validate", help="ingest and write only the validation report")
    common(p)
    p.add_argument("--min-references", type=int, default=0)

    p = sub.add_parser("tag", help="tag papers matching a boolean query")
    common(p)
    query_flags(p)

    p = sub.add_parser("relfreq", help="score topic-indicative title words")
    common(p)
    query_flags(p)
    p.add_argument("--exclusions", help="file of words to remove, one per line")
    p.add_argument("--min-topic-papers", type=int, default=20)
    p.add_argument("--top-k", type=int, default=500)
    p.add_argument("--year", type=int, help="analysis year (inferred from the topic set when omitted)")

    p = sub.add_parser("pivot", help="author-paper and paper-level pivot sizes")
    common(p)
    p.add_argument("--window", choices=[w.value for w in PivotWindow], default="three-year")

    p = sub.add_parser("impact", help="hit flags, group diagnostics, journal placement")
    common(p)
    p.add_argument("--horizon", help="citation horizon date (ISO-8601)")
    p.add_argument("--percentile", type=float, default=0.95)
    p.add_argument("--min-group", type=int, default=20)
    p.add_argument("--placement-from", type=int, default=2000)
    p.add_argument("--placement-to", type=int, default=2019)
    p.add_argument("--min-year-papers", type=int, default=10)

    p = sub.add_parser("proximity", help="author proximity to a topic corpus")
    common(p)
    query_flags(p)
    p.add_argument("--cutoff-year", type=int, default=2020)
    p.add_argument(
        "--mode",
        choices=["total-citations", "distinct-papers", "both", "title"],
        default="both",
    )
    p.add_argument("--scores", help="word-score table for --mode title")

    p = sub.add_parser("careers", help="career profiles of established authors")
    common(p)
    p.add_argument("--min-pubs", type=int, default=5)
    p.add_argument("--cutoff-year", type=int, default=2019)
    p.add_argument("--window-start", type=int, default=2015)
    p.add_argument("--window-end", type=int, default=2019)

    p = sub.add_parser("match", help="greedy nearest-neighbor controls without replacement")
    common(p)
    p.add_argument("--treated", required=True, help="file of treated author ids")
    p.add_argument("--pool", required=True, help="file of candidate control author ids")
    p.add_argument("--window-start", type=int, default=2015)
    p.add_argument("--window-end", type=int, default=2019)

    p = sub.add_parser("collab", help="new-collaborator events for established authors")
    common(p)
    p.add_argument("--min-pubs", type=int, default=5)
    p.add_argument("--cutoff-year", type=int, default=2019)
    p.add_argument("--min-prior-pubs", type=int, default=5)

    p = sub.add_parser("binscatter", help="binned means of y over the x-order")
    common(p, input_help="analysis frame (tabular text)")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--fe", help="comma-separated factor columns to residualize on")

    p = sub.add_parser("regress", help="least squares: plain, trend interaction, or per-field")
    common(p, input_help="analysis frame (tabular text)")
    p.add_argument("--y", required=True)
    p.add_argument("--x", nargs="+", required=True)
    p.add_argument("--trend-year", help="year column: report the x*year interaction")
    p.add_argument("--by-field", help="factor column: per-field slopes and negative share")
    p.add_argument("--min-papers", type=int, default=20)

    p = sub.add_parser("synth", help="deterministic synthetic corpus with ground truth")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output-dir", default=".")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--config", help="JSON file of generator settings")
    p.add_argument("--authors", type=int)
    p.add_argument("--venues", type=int)
    p.add_argument("--fields", type=int)
    p.add_argument("--start-year", type=int)
    p.add_argument("--warmup-years", type=int)
    p.add_argument("--cohort-years", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--home-mix", type=float)

    p = sub.add_parser("report", help="pivot + impact + residualized binscatter + slopes")
    common(p)
    p.add_argument("--window", choices=[w.value for w in PivotWindow], default="three-year")
    p.add_argument("--min-references", type=int, default=5)
    p.add_argument("--horizon")
    p.add_argument("--percentile", type=float, default=0.95)
    p.add_argument("--min-group", type=int, default=20)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--fe", help="comma-separated factor columns (default field_year)")
    p.add_argument("--field-col", default="field_key")
    p.add_argument("--min-papers", type=int, default=20)
    p.add_argument("--year-from", type=int)
    p.add_argument("--year-to", type=int)

    return parser


USER_ERRORS = (
    CorpusError,
    ValueError,  # includes QueryParseError, RankDeficiencyError, config errors
    KeyError,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    json.JSONDecodeError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        print("pivotlab: error: a subcommand is required", file=sys.stderr)
        return 1
    try:
        run = COMMANDS[args.subcommand](args)
        run.write_manifest()
        return 0
    except _UsageError:
        return 1
    except USER_ERRORS as exc:
        message = exc.args[0] if exc.args else str(exc)
        print(f"pivotlab {args.subcommand}: error: {message}", file=sys.stderr)
        return 1
    except Exception:
        print(f"pivotlab {args.subcommand}: internal error", file=sys.stderr)
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
