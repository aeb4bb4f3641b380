"""``newspop`` command-line entry point.

Commands: validate, featurize, train, predict, backtest, ablate, synth, report.
Settings come from an optional ``--config`` file (see :mod:`newspop.config`);
command-line flags override file values.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import sys
import traceback
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .backtest import (
    ALL_GROUPS,
    BacktestData,
    FoldSpec,
    InsufficientHistory,
    MissingFolds,
    ablation_csv,
    ablation_markdown,
    aggregate,
    date_range,
    earliest_test_month,
    fit_fold_model,
    make_folds,
    month_days,
    prepare_fold,
    read_folds_csv,
    report_markdown,
    run_backtest,
    train_window,
    write_reports,
)
from .bundle import BundleError, load_bundle, save_bundle
from .corpus import CorpusError, EntityRegistry, load_news, load_registry, load_social, write_rejects
from .config import ConfigError, RunConfig, load_config, parse_float_list, parse_int_list, parse_str_list
from .featurize import GROUP_NAMES, SentimentLexicon, load_lexicon, write_feature_csv
from .synthgen import SynthConfig, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

logger = logging.getLogger("newspop")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# argument handling


def _month(text: str) -> tuple[int, int]:
    try:
        d = dt.date.fromisoformat(f"{text}-01")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM, got {text!r}") from None
    return d.year, d.month


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _add_data_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--config", type=Path, help="INI config file; flags override its values")
    g.add_argument("--news", type=Path)
    g.add_argument("--social", type=Path)
    g.add_argument("--registry", type=Path)
    g.add_argument("--lexicon", type=Path)
    g.add_argument("--output", type=Path, help="output directory")
    g.add_argument("--entities", help="comma-separated entity ids (default: all in the registry)")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run")
    g.add_argument("--test-year", type=int)
    g.add_argument("--months", help="test months, e.g. '1-12' or '1,2,3'")
    g.add_argument("--tp-grid", help="comma-separated t_p values")
    g.add_argument("--k-grid", help="comma-separated k values")
    g.add_argument("--feature-groups", help=f"comma-separated subset of {','.join(GROUP_NAMES)}")
    g.add_argument("--workers", type=int, help="worker processes (0 = available parallelism)")
    g.add_argument("--C", dest="C", type=float, help="inverse regularization strength")
    g.add_argument("--lda-topics", type=int)
    g.add_argument("--lda-train-sweeps", type=int)
    g.add_argument("--lda-infer-sweeps", type=int)
    g.add_argument("--seed", type=int, help="seed for LDA and randomized SVD")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="newspop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"newspop {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("validate", help="load the corpus, list rejects and print a summary")
    _add_data_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("featurize", help="write feature vectors for one entity, t_p and test month")
    _add_data_args(p)
    _add_run_args(p)
    p.add_argument("--entity")
    p.add_argument("--t-p", type=int, default=None)
    p.add_argument("--month", type=_month, required=True, help="test month YYYY-MM; features are fitted on the 24 months before it")
    p.add_argument("--out", type=Path, help="CSV path (default: <output>/features.csv)")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="fit one fold's model and save it as a bundle")
    _add_data_args(p)
    _add_run_args(p)
    p.add_argument("--entity")
    p.add_argument("--t-p", type=int, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--month", type=_month, required=True, help="test month YYYY-MM; training uses the 24 months before it")
    p.add_argument("--model", type=Path, required=True, help="bundle path to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a date range with a saved bundle")
    _add_data_args(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--entity", help="must match the bundle's entity")
    p.add_argument("--start", type=_date, help="first day (default: month after the training window)")
    p.add_argument("--end", type=_date, help="last day (default: end of that month)")
    p.add_argument("--out", type=Path, help="CSV path (default: standard output)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("backtest", help="run the monthly sliding-window evaluation over the full grid")
    _add_data_args(p)
    _add_run_args(p)
    p.add_argument("--no-ablation", action="store_true", help="skip the single-group runs at t_p=12, k=0.5")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("ablate", help="single-feature-group runs at one (t_p, k)")
    _add_data_args(p)
    _add_run_args(p)
    p.add_argument("--t-p", type=int, default=12)
    p.add_argument("--k", type=float, default=0.5)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="write a synthetic corpus with a planted news signal")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="signal strength in [0, 1]")
    p.add_argument("--n-entities", type=int, default=3)
    p.add_argument("--months", type=int, default=30)
    p.add_argument("--start", type=_date, default=dt.date(2013, 1, 1))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="re-render Markdown tables from a backtest's folds.csv")
    p.add_argument("--output", type=Path, required=True, help="backtest output directory")
    p.set_defaults(func=cmd_report)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file values overridden by any flag that was given."""
    cfg = load_config(getattr(args, "config", None))
    for key in ("news", "social", "registry", "lexicon", "output"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    try:
        if getattr(args, "entities", None):
            cfg.entities = parse_str_list(args.entities)
        if getattr(args, "test_year", None) is not None:
            cfg.test_year = args.test_year
        if getattr(args, "months", None) and isinstance(args.months, str):
            cfg.months = parse_int_list(args.months)
        if getattr(args, "tp_grid", None):
            cfg.tp_grid = parse_int_list(args.tp_grid)
        if getattr(args, "k_grid", None):
            cfg.k_grid = parse_float_list(args.k_grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if getattr(args, "feature_groups", None):
        cfg.feature_groups = parse_str_list(args.feature_groups)
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "C", None) is not None:
        cfg.train = replace(cfg.train, C=args.C)
    lda = {}
    for flag, name in (("lda_topics", "n_topics"), ("lda_train_sweeps", "train_sweeps"),
                       ("lda_infer_sweeps", "infer_sweeps"), ("seed", "seed")):
        if getattr(args, flag, None) is not None:
            lda[name] = getattr(args, flag)
    feats = {"svd_seed": args.seed} if getattr(args, "seed", None) is not None else {}
    cfg.features = replace(cfg.features, lda=replace(cfg.features.lda, **lda), **feats)
    try:
        cfg.validate()
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    return cfg


# ---------------------------------------------------------------------------
# loading


def _require(cfg: RunConfig, *keys: str) -> None:
    for key in keys:
        path = getattr(cfg, key)
        if path is None:
            raise UsageError(f"no {key} path given (use --{key} or the [paths] section)")
        if not Path(path).exists():
            raise DataError(f"{key} file not found: {path}")


def load_inputs(cfg: RunConfig) -> tuple[EntityRegistry, BacktestData]:
    _require(cfg, "registry", "news", "social")
    registry = load_registry(cfg.registry)
    index = load_news(cfg.news, registry)
    social = load_social(cfg.social, registry)
    if cfg.lexicon is not None:
        _require(cfg, "lexicon")
        lexicon = load_lexicon(cfg.lexicon)
    else:
        logger.warning("no lexicon given; sentiment counts will be zero")
        lexicon = SentimentLexicon()
    n_rej = len(index.rejects) + len(social.rejects)
    if n_rej:
        logger.warning("%d input records rejected (see `newspop validate`)", n_rej)
    return registry, BacktestData(index, social, lexicon)


def _entities(cfg: RunConfig, registry: EntityRegistry) -> list[str]:
    if not cfg.entities:
        return registry.ids
    unknown = [e for e in cfg.entities if e not in registry]
    if unknown:
        raise DataError(f"entities not in the registry: {', '.join(unknown)}")
    return list(cfg.entities)


def _one_entity(args, cfg: RunConfig, registry: EntityRegistry) -> str:
    if args.entity:
        if args.entity not in registry:
            raise DataError(f"entity {args.entity!r} is not in the registry")
        return args.entity
    ents = _entities(cfg, registry)
    if len(ents) != 1:
        raise UsageError("choose one entity with --entity")
    return ents[0]


def coverage_start(data: BacktestData) -> dt.date | None:
    starts = [r[0] for r in (data.index.date_range, data.social.date_range) if r is not None]
    return max(starts) if starts else None


def _check_history(data: BacktestData, year: int, month: int) -> None:
    start = coverage_start(data)
    if start is None:
        raise DataError("the corpus is empty")
    need, _ = train_window(year, month)
    if start > need:
        ey, em = earliest_test_month(start)
        raise InsufficientHistory(
            f"test month {year}-{month:02d} needs data from {need} but the corpus starts {start}; "
            f"earliest feasible test month is {ey}-{em:02d}"
        )


def _single_fold(args, cfg: RunConfig, registry: EntityRegistry, data: BacktestData, k: float) -> FoldSpec:
    entity = _one_entity(args, cfg, registry)
    year, month = args.month
    t_p = args.t_p if args.t_p is not None else cfg.tp_grid[0]
    if t_p not in (0, 4, 8, 12, 16, 20):
        raise UsageError(f"t_p must be one of 0, 4, 8, 12, 16, 20, got {t_p}")
    if not 0 < k < 1:
        raise UsageError(f"k must lie in (0, 1), got {k}")
    _check_history(data, year, month)
    start, end = train_window(year, month)
    return FoldSpec(entity, t_p, float(k), year, month, start, end)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    cfg = resolve_config(args)
    _require(cfg, "registry")
    registry = load_registry(cfg.registry)
    print(f"registry: {len(registry)} entities")
    rejects = []
    if cfg.news is not None:
        _require(cfg, "news")
        index = load_news(cfg.news, registry)
        rng = index.date_range
        span = f"{rng[0]} .. {rng[1]}" if rng else "empty"
        print(f"news: {len(index)} documents ({span}), {len(index.rejects)} rejected")
        for eid in registry.ids:
            print(f"  {eid}: {index.n_entity_docs(eid)} documents")
        rejects += [("news", r) for r in index.rejects]
    if cfg.social is not None:
        _require(cfg, "social")
        social = load_social(cfg.social, registry)
        rng = social.date_range
        span = f"{rng[0]} .. {rng[1]}" if rng else "empty"
        print(f"social: {social.n_records} records ({span}), {len(social.rejects)} rejected")
        for eid in registry.ids:
            print(f"  {eid}: {sum(social[eid].counts.values())} mentions")
        rejects += [("social", r) for r in social.rejects]
    if cfg.lexicon is not None:
        _require(cfg, "lexicon")
        print(f"lexicon: {len(load_lexicon(cfg.lexicon))} terms")
    for source, r in rejects:
        tag = "" if r.severity == "error" else "warning: "
        print(f"reject {source}:{r.line_number}: {tag}{r.reason}")
    if args.output is not None or (cfg.output and rejects):
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        for source in ("news", "social"):
            write_rejects([r for s, r in rejects if s == source], out / f"rejects_{source}.csv")
    return EXIT_OK


def cmd_featurize(args) -> int:
    cfg = resolve_config(args)
    registry, data = load_inputs(cfg)
    fold = _single_fold(args, cfg, registry, data, cfg.k_grid[0])
    prepared = prepare_fold(fold, data, cfg.features)
    out = args.out or Path(cfg.output) / "features.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        (fold.entity_id, d, x, ("train", fold.t_p, int(p)))
        for d, x, p in zip(prepared.train_days, prepared.X_train, prepared.pop_train)
    ] + [
        (fold.entity_id, d, x, ("test", fold.t_p, int(p)))
        for d, x, p in zip(prepared.test_days, prepared.X_test, prepared.pop_test)
    ]
    write_feature_csv(out, rows, extra=("split", "t_p", "f_p"))
    print(f"wrote {len(rows)} feature rows to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    registry, data = load_inputs(cfg)
    k = args.k if args.k is not None else cfg.k_grid[0]
    fold = _single_fold(args, cfg, registry, data, k)
    prepared = prepare_fold(fold, data, cfg.features)
    tm = fit_fold_model(fold, prepared, cfg.feature_groups, cfg.backtest_config())
    args.model.parent.mkdir(parents=True, exist_ok=True)
    save_bundle(tm, args.model)
    for w in tm.model.warnings:
        logger.warning(w)
    print(
        f"trained {tm.entity_id} t_p={tm.t_p} k={tm.policy.k} delta={tm.policy.delta} "
        f"on {tm.train_start}..{tm.train_end} ({tm.model.n_iterations} iterations); saved {args.model}"
    )
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = resolve_config(args)
    tm = load_bundle(args.model)
    if args.entity and args.entity != tm.entity_id:
        raise DataError(f"bundle was trained for entity {tm.entity_id!r}, not {args.entity!r}")
    if cfg.entities and cfg.entities != [tm.entity_id]:
        raise DataError(f"bundle was trained for entity {tm.entity_id!r}, not {','.join(cfg.entities)!r}")
    _require(cfg, "registry", "news")
    registry = load_registry(cfg.registry)
    if tm.entity_id not in registry:
        raise DataError(f"bundle entity {tm.entity_id!r} is not in the registry")
    index = load_news(cfg.news, registry)
    nxt = tm.train_end + dt.timedelta(days=1)
    start = args.start or nxt
    end = args.end or month_days(start.year, start.month)[-1]
    if end < start:
        raise UsageError("--end is before --start")
    days = date_range(start, end)
    probs = tm.predict_proba(index, days)
    header = "entity,date,t_p,k,delta,probability,prediction"
    lines = [header] + [
        f"{tm.entity_id},{d.isoformat()},{tm.t_p},{tm.policy.k},{tm.policy.delta},{float(p)!r},{int(p >= 0.5)}"
        for d, p in zip(days, probs)
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _folds(cfg: RunConfig, registry: EntityRegistry, data: BacktestData, tp_grid, k_grid) -> list[FoldSpec]:
    ends = [r[1] for r in (data.index.date_range, data.social.date_range) if r is not None]
    beyond = [m for m in cfg.months if ends and dt.date(cfg.test_year, m, 1) > min(ends)]
    if beyond:
        logger.warning(
            "test months %s of %d lie after the end of the corpus (%s); restrict them with --months",
            ",".join(map(str, beyond)), cfg.test_year, min(ends),
        )
    return make_folds(
        cfg.test_year,
        tp_grid,
        k_grid,
        _entities(cfg, registry),
        months=cfg.months,
        coverage_start=coverage_start(data),
    )


def cmd_backtest(args) -> int:
    cfg = resolve_config(args)
    registry, data = load_inputs(cfg)
    folds = _folds(cfg, registry, data, cfg.tp_grid, cfg.k_grid)
    groups = tuple(g for g in GROUP_NAMES if g in cfg.feature_groups)
    with_ablation = not args.no_ablation and groups == ALL_GROUPS
    results = run_backtest(folds, data, cfg.backtest_config(), group_sets=(groups,), with_ablation=with_ablation)
    report = aggregate(results, folds)
    has_ablation = with_ablation and 12 in cfg.tp_grid and 0.5 in cfg.k_grid
    paths = write_reports(cfg.output, report, results, groups, ablation=(12, 0.5) if has_ablation else None)
    print(f"F1 (high class), feature groups: {'+'.join(groups)}")
    print(report_markdown(report, groups), end="")
    if has_ablation:
        print("\nSingle-group ablation at t_p=12, k=0.50")
        print(ablation_markdown(report, 12, 0.5), end="")
    logger.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = resolve_config(args)
    registry, data = load_inputs(cfg)
    if args.t_p not in (0, 4, 8, 12, 16, 20):
        raise UsageError(f"t_p must be one of 0, 4, 8, 12, 16, 20, got {args.t_p}")
    folds = _folds(cfg, registry, data, [args.t_p], [args.k])
    groups = [g for g in GROUP_NAMES if g in cfg.feature_groups]
    sets = [(g,) for g in groups] + [ALL_GROUPS]
    results = run_backtest(folds, data, cfg.backtest_config(), group_sets=sets, with_ablation=False)
    report = aggregate(results, folds)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.csv").write_text(ablation_csv(report, args.t_p, args.k), encoding="utf-8")
    md = ablation_markdown(report, args.t_p, args.k)
    (out / "ablation.md").write_text(md, encoding="utf-8")
    print(f"Single-group ablation at t_p={args.t_p}, k={args.k:.2f}")
    print(md, end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        scfg = SynthConfig(seed=args.seed, n_entities=args.n_entities, start=args.start,
                           months=args.months, signal_strength=args.lam)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    paths = generate(scfg).write(args.out)
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def cmd_report(args) -> int:
    folds_path = args.output / "folds.csv"
    if not folds_path.exists():
        raise DataError(f"{folds_path} not found; run `newspop backtest` first")
    report = read_folds_csv(folds_path.read_text(encoding="utf-8"))
    if not report.main_rows(ALL_GROUPS):
        groups = max({r.groups for r in report.rows}, key=len)
    else:
        groups = ALL_GROUPS
    md = report_markdown(report, groups)
    (args.output / "report.md").write_text(md, encoding="utf-8")
    print(f"F1 (high class), feature groups: {'+'.join(groups)}")
    print(md, end="")
    ablation = {(r.t_p, r.k) for r in report.rows if len(r.groups) == 1 and r.groups != groups}
    for t_p, k in sorted(ablation):
        print(f"\nSingle-group ablation at t_p={t_p}, k={k:.2f}")
        print(ablation_markdown(report, t_p, k), end="")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"newspop: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientHistory as exc:
        print(f"newspop: insufficient history: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, CorpusError, BundleError, MissingFolds, OSError, ValueError) as exc:
        print(f"newspop: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
