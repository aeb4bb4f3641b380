"""Per-entity trained model plus its on-disk bundle.

A bundle is a zip archive holding ``manifest.json`` (scalars, vocabularies,
lexicon, configs) and one ``.npy`` member per array. Members are written in
a fixed order with fixed timestamps and no compression, so the same model
always serializes to the same bytes.
"""

from __future__ import annotations

import datetime as dt
import io
import json
import zipfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifier import LogisticModel, Standardizer, TrainConfig
from .corpus import CorpusIndex
from .featurize import (
    FEATURE_NAMES,
    FeatureConfig,
    FeatureContext,
    SentimentLexicon,
    TextPipeline,
    assemble,
)
from .labeling import LabelPolicy
from .topics import LdaConfig, LdaModel
from .vectorize import SvdProjector, TfidfModel, Vocabulary

FORMAT = "newspop-bundle"
FORMAT_VERSION = 1


class BundleError(Exception):
    pass


@dataclass(frozen=True)
class TrainedModel:
    """Everything needed to score a day for one entity at one t_p."""

    entity_id: str
    t_p: int
    train_start: dt.date
    train_end: dt.date
    groups: tuple[str, ...]
    columns: tuple[int, ...]
    policy: LabelPolicy
    model: LogisticModel
    context: FeatureContext
    feature_config: FeatureConfig

    def features(self, index: CorpusIndex, days: Sequence[dt.date]) -> np.ndarray:
        if not days:
            return np.zeros((0, len(self.columns)))
        X = np.vstack([assemble(self.entity_id, d, self.t_p, index, self.context) for d in days])
        return X[:, list(self.columns)]

    def predict_proba(self, index: CorpusIndex, days: Sequence[dt.date]) -> np.ndarray:
        return self.model.predict_proba(self.features(index, days))


def _npy(a: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(a), allow_pickle=False)
    return buf.getvalue()


def _pipeline_manifest(name: str, p: TextPipeline, arrays: dict) -> dict:
    arrays[f"{name}.idf"] = p.tfidf.idf
    arrays[f"{name}.V"] = p.svd.V
    arrays[f"{name}.singular_values"] = p.svd.singular_values
    v = p.tfidf.vocabulary
    return {"terms": list(v.terms), "df": list(v.df), "n_train_docs": v.n_train_docs}


def _pipeline_from(name: str, meta: dict, arrays: dict) -> TextPipeline:
    vocab = Vocabulary(tuple(meta["terms"]), tuple(meta["df"]), meta["n_train_docs"])
    return TextPipeline(
        TfidfModel(vocab, arrays[f"{name}.idf"]),
        SvdProjector(arrays[f"{name}.V"], arrays[f"{name}.singular_values"]),
    )


def bundle_bytes(tm: TrainedModel) -> bytes:
    arrays: dict[str, np.ndarray] = {
        "w": tm.model.w,
        "mean": tm.model.standardizer.mean,
        "scale": tm.model.standardizer.scale,
    }
    ctx = tm.context
    fc = tm.feature_config
    manifest = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "entity_id": tm.entity_id,
        "t_p": tm.t_p,
        "train_start": tm.train_start.isoformat(),
        "train_end": tm.train_end.isoformat(),
        "groups": list(tm.groups),
        "columns": list(tm.columns),
        "feature_names": [FEATURE_NAMES[c] for c in tm.columns],
        "label_policy": {"k": tm.policy.k, "delta": tm.policy.delta},
        "label_mapping": {"0": -1, "1": 1},
        "classifier": {
            "config": asdict(tm.model.config),
            "fit_intercept": tm.model.fit_intercept,
            "n_iterations": tm.model.n_iterations,
            "converged": tm.model.converged,
            "warnings": list(tm.model.warnings),
        },
        "feature_config": {
            "max_terms": fc.max_terms,
            "latent_dim": fc.latent_dim,
            "svd_seed": fc.svd_seed,
            "lda": asdict(fc.lda),
        },
        "pipelines": {
            name: _pipeline_manifest(name, getattr(ctx, name), arrays)
            for name in ("titles", "subjective", "entities", "tags")
        },
        "lda": None,
        "n_topics": ctx.n_topics,
        "lexicon": sorted(ctx.lexicon.items()),
    }
    if ctx.lda is not None:
        arrays["lda.phi"] = ctx.lda.phi
        manifest["lda"] = {
            "alpha": ctx.lda.alpha,
            "beta": ctx.lda.beta,
            "infer_sweeps": ctx.lda.infer_sweeps,
            "seed": ctx.lda.seed,
            "terms": list(ctx.lda.terms),
        }
    manifest["arrays"] = sorted(arrays)

    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        members = [("manifest.json", json.dumps(manifest, sort_keys=True, indent=1).encode("utf-8"))]
        members += [(f"arrays/{name}.npy", _npy(arrays[name])) for name in sorted(arrays)]
        for name, data in members:
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.external_attr = 0o644 << 16
            zf.writestr(info, data)
    return buf.getvalue()


def save_bundle(tm: TrainedModel, path: str | Path) -> None:
    Path(path).write_bytes(bundle_bytes(tm))


def load_bundle(path: str | Path) -> TrainedModel:
    try:
        zf = zipfile.ZipFile(Path(path))
    except (OSError, zipfile.BadZipFile) as exc:
        raise BundleError(f"cannot open model bundle {path}: {exc}") from exc
    with zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest.get("format") != FORMAT:
            raise BundleError(f"{path} is not a {FORMAT} archive")
        if manifest.get("format_version") != FORMAT_VERSION:
            raise BundleError(
                f"bundle format version {manifest.get('format_version')} is not supported "
                f"(expected {FORMAT_VERSION})"
            )
        arrays = {
            name: np.load(io.BytesIO(zf.read(f"arrays/{name}.npy")), allow_pickle=False)
            for name in manifest["arrays"]
        }
    lex = SentimentLexicon(dict(manifest["lexicon"]))
    lda_meta = manifest["lda"]
    lda = None
    if lda_meta is not None:
        lda = LdaModel(
            phi=arrays["lda.phi"],
            alpha=lda_meta["alpha"],
            beta=lda_meta["beta"],
            infer_sweeps=lda_meta["infer_sweeps"],
            seed=lda_meta["seed"],
            terms=tuple(lda_meta["terms"]),
        )
    pipes = {name: _pipeline_from(name, meta, arrays) for name, meta in manifest["pipelines"].items()}
    ctx = FeatureContext(
        titles=pipes["titles"],
        lda=lda,
        subjective=pipes["subjective"],
        entities=pipes["entities"],
        tags=pipes["tags"],
        lexicon=lex,
        n_topics=manifest["n_topics"],
    )
    cls_meta = manifest["classifier"]
    model = LogisticModel(
        w=arrays["w"],
        standardizer=Standardizer(arrays["mean"], arrays["scale"]),
        fit_intercept=cls_meta["fit_intercept"],
        config=TrainConfig(**cls_meta["config"]),
        n_iterations=cls_meta["n_iterations"],
        converged=cls_meta["converged"],
        warnings=tuple(cls_meta["warnings"]),
    )
    fc = manifest["feature_config"]
    return TrainedModel(
        entity_id=manifest["entity_id"],
        t_p=manifest["t_p"],
        train_start=dt.date.fromisoformat(manifest["train_start"]),
        train_end=dt.date.fromisoformat(manifest["train_end"]),
        groups=tuple(manifest["groups"]),
        columns=tuple(manifest["columns"]),
        policy=LabelPolicy(**manifest["label_policy"]),
        model=model,
        context=ctx,
        feature_config=FeatureConfig(
            max_terms=fc["max_terms"],
            latent_dim=fc["latent_dim"],
            svd_seed=fc["svd_seed"],
            lda=LdaConfig(**fc["lda"]),
        ),
    )
