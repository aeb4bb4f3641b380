"""Monthly sliding-window evaluation: folds, per-fold training, pooled metrics, reports.

Each fold tests one calendar month with a model trained on the 24 calendar
months before it. Work is organised in jobs of one (entity, test month,
t_p): the feature context and feature matrices depend only on those three,
so every k and every feature-group subset of a job reuses them.
"""

from __future__ import annotations

import calendar
import csv
import datetime as dt
import io
import logging
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bundle import TrainedModel
from .classifier import TrainConfig, train
from .corpus import CorpusIndex, SocialStream
from .featurize import (
    GROUP_NAMES,
    FeatureConfig,
    FeatureContext,
    SentimentLexicon,
    feature_matrix,
    fit_context,
    group_columns,
)
from .labeling import K_GRID, LabelPolicy, fit_threshold, label_many
from .mentions import TP_GRID, MentionSeries, PredictionWindow, window_popularity

logger = logging.getLogger(__name__)

TRAIN_MONTHS = 24
ALL_GROUPS: tuple[str, ...] = GROUP_NAMES


class InsufficientHistory(ValueError):
    pass


class MissingFolds(ValueError):
    pass


def _add_months(year: int, month: int, delta: int) -> tuple[int, int]:
    m = year * 12 + (month - 1) + delta
    return m // 12, m % 12 + 1


def month_days(year: int, month: int) -> list[dt.date]:
    n = calendar.monthrange(year, month)[1]
    return [dt.date(year, month, d) for d in range(1, n + 1)]


def date_range(start: dt.date, end: dt.date) -> list[dt.date]:
    return [start + dt.timedelta(days=i) for i in range((end - start).days + 1)]


@dataclass(frozen=True)
class FoldSpec:
    entity_id: str
    t_p: int
    k: float
    test_year: int
    test_month: int
    train_start: dt.date
    train_end: dt.date

    @property
    def month_key(self) -> str:
        return f"{self.test_year:04d}-{self.test_month:02d}"

    @property
    def test_days(self) -> list[dt.date]:
        return month_days(self.test_year, self.test_month)

    @property
    def train_days(self) -> list[dt.date]:
        return date_range(self.train_start, self.train_end)

    @property
    def setting(self) -> tuple[str, int, float]:
        return (self.entity_id, self.t_p, self.k)


def train_window(year: int, month: int, months: int = TRAIN_MONTHS) -> tuple[dt.date, dt.date]:
    sy, sm = _add_months(year, month, -months)
    return dt.date(sy, sm, 1), dt.date(year, month, 1) - dt.timedelta(days=1)


def earliest_test_month(coverage_start: dt.date, months: int = TRAIN_MONTHS) -> tuple[int, int]:
    y, m = coverage_start.year, coverage_start.month
    if coverage_start.day != 1:
        y, m = _add_months(y, m, 1)
    return _add_months(y, m, months)


def make_folds(
    test_year: int,
    tp_grid: Sequence[int] = TP_GRID,
    k_grid: Sequence[float] = K_GRID,
    entities: Sequence[str] = (),
    months: Sequence[int] = tuple(range(1, 13)),
    coverage_start: dt.date | None = None,
) -> list[FoldSpec]:
    """One fold per (entity, t_p, k, test month); ordered by entity, t_p, k, month."""
    if not tp_grid or not k_grid:
        raise ValueError("t_p and k grids must be non-empty")
    for t in tp_grid:
        if t not in TP_GRID:
            raise ValueError(f"t_p must be one of {TP_GRID}, got {t}")
    months = sorted(set(months))
    if coverage_start is not None:
        first_start, _ = train_window(test_year, months[0])
        if coverage_start > first_start:
            ey, em = earliest_test_month(coverage_start)
            raise InsufficientHistory(
                f"test month {test_year}-{months[0]:02d} needs data from {first_start} but the corpus "
                f"starts {coverage_start} ({(coverage_start - first_start).days} days missing); "
                f"earliest feasible test month is {ey}-{em:02d}"
            )
    folds = []
    for entity in entities:
        for t_p in tp_grid:
            for k in k_grid:
                for m in months:
                    start, end = train_window(test_year, m)
                    folds.append(FoldSpec(entity, t_p, float(k), test_year, m, start, end))
    return folds


def f1_positive(tp: int, fp: int, fn: int) -> float:
    if tp == 0:
        return 0.0
    p = tp / (tp + fp)
    r = tp / (tp + fn)
    return 2 * p * r / (p + r)


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @classmethod
    def from_labels(cls, y_true, y_pred) -> "Confusion":
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        return cls(
            tp=int(np.sum((y_true == 1) & (y_pred == 1))),
            fp=int(np.sum((y_true == 0) & (y_pred == 1))),
            fn=int(np.sum((y_true == 1) & (y_pred == 0))),
            tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        )

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        return f1_positive(self.tp, self.fp, self.fn)

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n if self.n else 0.0

    @property
    def positive_rate(self) -> float:
        return (self.tp + self.fn) / self.n if self.n else 0.0


@dataclass(frozen=True)
class DayPrediction:
    day: dt.date
    popularity: int
    label: int
    probability: float
    prediction: int


@dataclass
class FoldResult:
    fold: FoldSpec
    groups: tuple[str, ...]
    delta: int
    days: list[DayPrediction]
    confusion: Confusion
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class BacktestData:
    index: CorpusIndex
    social: SocialStream
    lexicon: SentimentLexicon

    def series(self, entity_id: str) -> MentionSeries:
        s = self.social.series.get(entity_id)
        return s if s is not None else MentionSeries(entity_id, {})


@dataclass(frozen=True)
class BacktestConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    ablation_tp: int | None = 12
    ablation_k: float | None = 0.5
    workers: int = 1


@dataclass
class PreparedFold:
    """Fitted context and feature matrices for one (entity, month, t_p)."""

    entity_id: str
    t_p: int
    train_days: list[dt.date]
    test_days: list[dt.date]
    context: FeatureContext
    X_train: np.ndarray
    X_test: np.ndarray
    pop_train: np.ndarray
    pop_test: np.ndarray


def popularities(series: MentionSeries, days: Sequence[dt.date], t_p: int) -> np.ndarray:
    return np.array([window_popularity(series, PredictionWindow(d, t_p)) for d in days], dtype=np.int64)


def prepare_fold(fold: FoldSpec, data: BacktestData, config: FeatureConfig = FeatureConfig()) -> PreparedFold:
    train_days, test_days = fold.train_days, fold.test_days
    ctx = fit_context(data.index, fold.entity_id, train_days, fold.t_p, data.lexicon, config)
    series = data.series(fold.entity_id)
    return PreparedFold(
        entity_id=fold.entity_id,
        t_p=fold.t_p,
        train_days=train_days,
        test_days=test_days,
        context=ctx,
        X_train=feature_matrix(fold.entity_id, train_days, fold.t_p, data.index, ctx),
        X_test=feature_matrix(fold.entity_id, test_days, fold.t_p, data.index, ctx),
        pop_train=popularities(series, train_days, fold.t_p),
        pop_test=popularities(series, test_days, fold.t_p),
    )


def fit_fold_model(
    fold: FoldSpec,
    prepared: PreparedFold,
    groups: Iterable[str] = ALL_GROUPS,
    config: BacktestConfig = BacktestConfig(),
    permute_seed: int | None = None,
) -> TrainedModel:
    groups = tuple(g for g in GROUP_NAMES if g in set(groups))
    cols = group_columns(groups)
    policy = fit_threshold(prepared.pop_train, fold.k)
    y = label_many(prepared.pop_train, policy)
    if permute_seed is not None:
        y = np.random.default_rng(permute_seed).permutation(y)
    model = train(prepared.X_train[:, cols], y, config.train)
    return TrainedModel(
        entity_id=fold.entity_id,
        t_p=fold.t_p,
        train_start=fold.train_start,
        train_end=fold.train_end,
        groups=groups,
        columns=tuple(int(c) for c in cols),
        policy=policy,
        model=model,
        context=prepared.context,
        feature_config=config.features,
    )


def evaluate_fold(
    fold: FoldSpec,
    prepared: PreparedFold,
    groups: Iterable[str] = ALL_GROUPS,
    config: BacktestConfig = BacktestConfig(),
    permute_seed: int | None = None,
) -> tuple[FoldResult, TrainedModel]:
    tm = fit_fold_model(fold, prepared, groups, config, permute_seed)
    probs = tm.model.predict_proba(prepared.X_test[:, list(tm.columns)])
    preds = (probs >= 0.5).astype(np.int64)
    y_test = label_many(prepared.pop_test, tm.policy)
    days = [
        DayPrediction(d, int(p), int(l), float(pr), int(pd))
        for d, p, l, pr, pd in zip(prepared.test_days, prepared.pop_test, y_test, probs, preds)
    ]
    result = FoldResult(
        fold=fold,
        groups=tm.groups,
        delta=tm.policy.delta,
        days=days,
        confusion=Confusion.from_labels(y_test, preds),
        warnings=list(tm.model.warnings),
    )
    return result, tm


def run_fold(
    fold: FoldSpec,
    data: BacktestData,
    groups: Iterable[str] = ALL_GROUPS,
    config: BacktestConfig = BacktestConfig(),
    permute_seed: int | None = None,
) -> FoldResult:
    prepared = prepare_fold(fold, data, config.features)
    return evaluate_fold(fold, prepared, groups, config, permute_seed)[0]


# ---------------------------------------------------------------------------
# whole-grid runner


def _group_sets_for(fold: FoldSpec, group_sets: Sequence[tuple[str, ...]], config: BacktestConfig):
    sets = list(group_sets)
    if fold.t_p == config.ablation_tp and config.ablation_k is not None and abs(fold.k - config.ablation_k) < 1e-12:
        for g in GROUP_NAMES:
            if (g,) not in sets:
                sets.append((g,))
    return sets


_STATE: dict = {}


def _init_worker(data: BacktestData, config: BacktestConfig) -> None:
    _STATE["data"] = data
    _STATE["config"] = config


def _run_job(job: tuple[list[FoldSpec], list[tuple[str, ...]], bool, int | None]) -> list[FoldResult]:
    folds, group_sets, with_ablation, permute_seed = job
    data: BacktestData = _STATE["data"]
    config: BacktestConfig = _STATE["config"]
    prepared = prepare_fold(folds[0], data, config.features)
    out = []
    for fold in folds:
        sets = _group_sets_for(fold, group_sets, config) if with_ablation else group_sets
        for groups in sets:
            out.append(evaluate_fold(fold, prepared, groups, config, permute_seed)[0])
    return out


def run_backtest(
    folds: Sequence[FoldSpec],
    data: BacktestData,
    config: BacktestConfig = BacktestConfig(),
    group_sets: Sequence[Sequence[str]] = (ALL_GROUPS,),
    with_ablation: bool = True,
    permute_seed: int | None = None,
) -> list[FoldResult]:
    """Run every fold; results come back in fold order regardless of worker count."""
    group_sets = [tuple(g for g in GROUP_NAMES if g in set(gs)) for gs in group_sets]
    jobs: dict[tuple[str, int, int, int], list[FoldSpec]] = defaultdict(list)
    for f in folds:
        jobs[(f.entity_id, f.test_year, f.test_month, f.t_p)].append(f)
    job_list = [(fs, group_sets, with_ablation, permute_seed) for fs in jobs.values()]
    workers = max(1, min(config.workers, len(job_list)))
    if workers == 1:
        _init_worker(data, config)
        chunks = [_run_job(j) for j in job_list]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(data, config)) as ex:
            chunks = list(ex.map(_run_job, job_list))
    order = {f: i for i, f in enumerate(folds)}
    results = [r for chunk in chunks for r in chunk]
    results.sort(key=lambda r: (order[r.fold], GROUP_NAMES.index(r.groups[0]) if len(r.groups) == 1 else -1))
    return results


def default_workers() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# aggregation and reports


@dataclass(frozen=True)
class SettingRow:
    entity_id: str
    t_p: int
    k: float
    groups: tuple[str, ...]
    confusion: Confusion
    folds: tuple[tuple[str, Confusion], ...]

    @property
    def f1(self) -> float:
        return self.confusion.f1


@dataclass
class BacktestReport:
    rows: list[SettingRow]

    def main_rows(self, groups: tuple[str, ...] = ALL_GROUPS) -> list[SettingRow]:
        return [r for r in self.rows if r.groups == groups]

    def row(self, entity_id: str, t_p: int, k: float, groups: tuple[str, ...] = ALL_GROUPS) -> SettingRow:
        for r in self.rows:
            if r.entity_id == entity_id and r.t_p == t_p and abs(r.k - k) < 1e-12 and r.groups == groups:
                return r
        raise KeyError((entity_id, t_p, k, groups))


def aggregate(results: Sequence[FoldResult], expected: Sequence[FoldSpec] | None = None) -> BacktestReport:
    """Pool confusion counts over the months of each (entity, t_p, k, groups)."""
    cells: dict[tuple, list[FoldResult]] = defaultdict(list)
    for r in results:
        cells[(r.fold.entity_id, r.fold.t_p, r.fold.k, r.groups)].append(r)
    if expected is not None:
        want: dict[tuple, set[str]] = defaultdict(set)
        for f in expected:
            want[f.setting].add(f.month_key)
        missing = []
        for (e, t, k, g), rs in cells.items():
            have = {r.fold.month_key for r in rs}
            missing += [f"{e} t_p={t} k={k} groups={'+'.join(g)} month={m}" for m in sorted(want[(e, t, k)] - have)]
        for setting, months in want.items():
            if not any(key[:3] == setting for key in cells):
                missing += [f"{setting[0]} t_p={setting[1]} k={setting[2]} month={m}" for m in sorted(months)]
        if missing:
            raise MissingFolds("missing folds: " + "; ".join(missing))
    rows = []
    for (e, t, k, g), rs in cells.items():
        rs = sorted(rs, key=lambda r: r.fold.month_key)
        total = Confusion()
        for r in rs:
            total = total + r.confusion
        rows.append(SettingRow(e, t, k, g, total, tuple((r.fold.month_key, r.confusion) for r in rs)))
    rows.sort(key=lambda r: (r.entity_id, r.t_p, r.k, len(r.groups) == 1, [GROUP_NAMES.index(x) for x in r.groups]))
    return BacktestReport(rows)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


REPORT_COLUMNS = ("entity", "t_p", "k", "tp_count", "fp_count", "fn_count", "tn_count", "precision", "recall", "f1", "accuracy")


def report_csv(report: BacktestReport, groups: tuple[str, ...] = ALL_GROUPS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in report.main_rows(groups):
        c = r.confusion
        w.writerow([r.entity_id, r.t_p, r.k, c.tp, c.fp, c.fn, c.tn, _fmt(c.precision), _fmt(c.recall), _fmt(c.f1), _fmt(c.accuracy)])
    return buf.getvalue()


def folds_csv(report: BacktestReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entity", "t_p", "k", "feature_groups", "month", "tp_count", "fp_count", "fn_count", "tn_count", "f1"])
    for r in report.rows:
        for month, c in r.folds:
            w.writerow([r.entity_id, r.t_p, r.k, "+".join(r.groups), month, c.tp, c.fp, c.fn, c.tn, _fmt(c.f1)])
    return buf.getvalue()


ABLATION_COLUMNS = ("entity", "t_p", "k", *GROUP_NAMES, "all")


def ablation_csv(report: BacktestReport, t_p: int = 12, k: float = 0.5) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ABLATION_COLUMNS)
    entities = sorted({r.entity_id for r in report.rows})
    for e in entities:
        vals = []
        for gs in [(g,) for g in GROUP_NAMES] + [ALL_GROUPS]:
            try:
                vals.append(_fmt(report.row(e, t_p, k, gs).f1))
            except KeyError:
                vals.append("")
        if any(vals):
            w.writerow([e, t_p, k, *vals])
    return buf.getvalue()


def predictions_csv(results: Sequence[FoldResult], groups: tuple[str, ...] = ALL_GROUPS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entity", "date", "t_p", "k", "f_p", "delta", "label", "probability", "prediction"])
    for r in results:
        if r.groups != groups:
            continue
        for d in r.days:
            w.writerow([r.fold.entity_id, d.day.isoformat(), r.fold.t_p, r.fold.k, d.popularity, r.delta, d.label, repr(d.probability), d.prediction])
    return buf.getvalue()


def report_markdown(report: BacktestReport, groups: tuple[str, ...] = ALL_GROUPS) -> str:
    """F1 of the high class, one block per k, entities by t_p."""
    rows = report.main_rows(groups)
    tps = sorted({r.t_p for r in rows})
    ks = sorted({r.k for r in rows})
    entities = sorted({r.entity_id for r in rows})
    lookup = {(r.entity_id, r.t_p, r.k): r for r in rows}
    out = ["| Entity \\ t_p | " + " | ".join(str(t) for t in tps) + " |", "|---|" + "---|" * len(tps)]
    for k in ks:
        out.append(f"| **k = {k:.2f}** |" + " |" * len(tps))
        for e in entities:
            cells = [f"{lookup[(e, t, k)].f1:.2f}" if (e, t, k) in lookup else "" for t in tps]
            out.append(f"| {e} | " + " | ".join(cells) + " |")
    return "\n".join(out) + "\n"


def ablation_markdown(report: BacktestReport, t_p: int = 12, k: float = 0.5) -> str:
    text = ablation_csv(report, t_p, k).strip().splitlines()
    rows = list(csv.reader(text))
    head = ["entity", *GROUP_NAMES, "all"]
    out = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for r in rows[1:]:
        e, vals = r[0], r[3:]
        out.append("| " + " | ".join([e] + [f"{float(v):.2f}" if v else "" for v in vals]) + " |")
    return "\n".join(out) + "\n"


def write_reports(out_dir: str | Path, report: BacktestReport, results: Sequence[FoldResult],
                  groups: tuple[str, ...] = ALL_GROUPS, ablation: tuple[int, float] | None = (12, 0.5)) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report.csv": report_csv(report, groups),
        "folds.csv": folds_csv(report),
        "predictions.csv": predictions_csv(results, groups),
        "report.md": report_markdown(report, groups),
    }
    if ablation is not None:
        files["ablation.csv"] = ablation_csv(report, *ablation)
    paths = {}
    for name, text in files.items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths[name] = p
    return paths


def read_folds_csv(text: str) -> BacktestReport:
    """Rebuild a report from :func:`folds_csv` output (the inverse of writing it)."""
    cells: dict[tuple, list[tuple[str, Confusion]]] = defaultdict(list)
    reader = csv.DictReader(io.StringIO(text))
    need = {"entity", "t_p", "k", "feature_groups", "month", "tp_count", "fp_count", "fn_count", "tn_count"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise ValueError(f"folds CSV must have columns {sorted(need)}")
    for row in reader:
        groups = tuple(row["feature_groups"].split("+"))
        if set(groups) - set(GROUP_NAMES):
            raise ValueError(f"unknown feature groups {row['feature_groups']!r}")
        c = Confusion(int(row["tp_count"]), int(row["fp_count"]), int(row["fn_count"]), int(row["tn_count"]))
        cells[(row["entity"], int(row["t_p"]), float(row["k"]), groups)].append((row["month"], c))
    rows = []
    for (e, t, k, g), folds in cells.items():
        total = Confusion()
        for _, c in folds:
            total = total + c
        rows.append(SettingRow(e, t, k, g, total, tuple(sorted(folds, key=lambda mc: mc[0]))))
    rows.sort(key=lambda r: (r.entity_id, r.t_p, r.k, len(r.groups) == 1, [GROUP_NAMES.index(x) for x in r.groups]))
    return BacktestReport(rows)
