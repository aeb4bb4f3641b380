"""Run configuration: an INI-style file with sections, overridden by CLI flags.

Example::

    [paths]
    news = data/news.jsonl
    social = data/social.csv
    registry = data/registry.json
    lexicon = data/lexicon.csv
    output = out

    [run]
    entities = e1, e2
    test_year = 2015
    months = 1-12
    tp_grid = 0, 4, 8, 12, 16, 20
    k_grid = 0.5, 0.65, 0.8
    feature_groups = signal, textual, sentiment, semantic
    workers = 4

    [classifier]
    C = 1.0
    tolerance = 1e-6
    max_iterations = 5000

    [lda]
    topics = 10
    beta = 0.01
    train_sweeps = 1000
    infer_sweeps = 100
    seed = 0

    [features]
    max_terms = 10000
    svd_seed = 0

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .backtest import BacktestConfig, default_workers
from .classifier import TrainConfig
from .featurize import GROUP_NAMES, FeatureConfig
from .labeling import K_GRID
from .mentions import TP_GRID


class ConfigError(ValueError):
    pass


def parse_int_list(text: str) -> list[int]:
    """``"1-3, 7"`` -> ``[1, 2, 3, 7]``."""
    out: list[int] = []
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(p) for p in text.replace(";", ",").split(",") if p.strip()]


def parse_str_list(text: str) -> list[str]:
    return [p.strip() for p in text.replace(";", ",").split(",") if p.strip()]


@dataclass
class RunConfig:
    news: Path | None = None
    social: Path | None = None
    registry: Path | None = None
    lexicon: Path | None = None
    output: Path = Path("out")
    entities: list[str] = field(default_factory=list)
    test_year: int = 2015
    months: list[int] = field(default_factory=lambda: list(range(1, 13)))
    tp_grid: list[int] = field(default_factory=lambda: list(TP_GRID))
    k_grid: list[float] = field(default_factory=lambda: list(K_GRID))
    feature_groups: list[str] = field(default_factory=lambda: list(GROUP_NAMES))
    workers: int = 0  # 0 -> available parallelism
    train: TrainConfig = field(default_factory=TrainConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)

    def validate(self) -> None:
        if not self.tp_grid or not self.k_grid:
            raise ConfigError("tp_grid and k_grid must be non-empty")
        bad_tp = [t for t in self.tp_grid if t not in TP_GRID]
        if bad_tp:
            raise ConfigError(f"t_p values must come from {TP_GRID}: {bad_tp}")
        bad_k = [k for k in self.k_grid if not 0 < k < 1]
        if bad_k:
            raise ConfigError(f"k values must lie in (0, 1): {bad_k}")
        bad_m = [m for m in self.months if not 1 <= m <= 12]
        if bad_m or not self.months:
            raise ConfigError(f"months must be a non-empty subset of 1..12: {self.months}")
        bad_g = set(self.feature_groups) - set(GROUP_NAMES)
        if bad_g or not self.feature_groups:
            raise ConfigError(f"feature groups must be a non-empty subset of {GROUP_NAMES}")

    def backtest_config(self) -> BacktestConfig:
        return BacktestConfig(
            train=self.train,
            features=self.features,
            workers=self.workers or default_workers(),
        )


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    base = path.parent

    def get(section: str, key: str):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return None

    try:
        for key in ("news", "social", "registry", "lexicon", "output"):
            v = get("paths", key)
            if v:
                setattr(cfg, key, (base / v) if not Path(v).is_absolute() else Path(v))
        if (v := get("run", "entities")) is not None:
            cfg.entities = parse_str_list(v)
        if (v := get("run", "test_year")) is not None:
            cfg.test_year = int(v)
        if (v := get("run", "months")) is not None:
            cfg.months = parse_int_list(v)
        if (v := get("run", "tp_grid")) is not None:
            cfg.tp_grid = parse_int_list(v)
        if (v := get("run", "k_grid")) is not None:
            cfg.k_grid = parse_float_list(v)
        if (v := get("run", "feature_groups")) is not None:
            cfg.feature_groups = parse_str_list(v)
        if (v := get("run", "workers")) is not None:
            cfg.workers = int(v)

        t = {}
        for key, conv in (("C", float), ("tolerance", float), ("max_iterations", int)):
            if (v := get("classifier", key)) is not None:
                t[key] = conv(v)
        if (v := get("classifier", "fit_intercept")) is not None:
            t["fit_intercept"] = parser.getboolean("classifier", "fit_intercept")
        cfg.train = replace(cfg.train, **t)

        lda = {}
        for key, name, conv in (
            ("topics", "n_topics", int),
            ("alpha", "alpha", float),
            ("beta", "beta", float),
            ("train_sweeps", "train_sweeps", int),
            ("infer_sweeps", "infer_sweeps", int),
            ("seed", "seed", int),
        ):
            if (v := get("lda", key)) is not None:
                lda[name] = conv(v)
        feats = {}
        for key in ("max_terms", "svd_seed"):
            if (v := get("features", key)) is not None:
                feats[key] = int(v)
        cfg.features = replace(cfg.features, lda=replace(cfg.features.lda, **lda), **feats)
    except ValueError as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from exc
    return cfg

