import json
import zipfile

import numpy as np
import pytest
from conftest import FAST_BACKTEST

from newspop.backtest import BacktestData, fit_fold_model, make_folds, prepare_fold
from newspop.bundle import FORMAT_VERSION, BundleError, bundle_bytes, load_bundle, save_bundle
from newspop.corpus import load_news, load_social


@pytest.fixture(scope="module")
def fold_and_model(synth_data):
    _, data = synth_data
    (fold,) = make_folds(2015, [12], [0.65], ["e2"], months=[1])
    prep = prepare_fold(fold, data, FAST_BACKTEST.features)
    return fold, prep, fit_fold_model(fold, prep, config=FAST_BACKTEST)


def test_round_trip_predictions_bit_identical(tmp_path, fold_and_model, synth_data):
    fold, prep, tm = fold_and_model
    path = tmp_path / "m.zip"
    save_bundle(tm, path)
    back = load_bundle(path)
    p0 = tm.predict_proba(synth_data[1].index, fold.test_days)
    p1 = back.predict_proba(synth_data[1].index, fold.test_days)
    assert p0.tobytes() == p1.tobytes()
    assert np.array_equal(p0, tm.model.predict_proba(prep.X_test))
    assert back.policy == tm.policy and back.columns == tm.columns
    assert bundle_bytes(back) == path.read_bytes()


def test_bundle_is_deterministic(fold_and_model):
    _, _, tm = fold_and_model
    assert bundle_bytes(tm) == bundle_bytes(tm)


def _rewrite(src, dst, edit):
    with zipfile.ZipFile(src) as zin, zipfile.ZipFile(dst, "w") as zout:
        for info in zin.infolist():
            data = zin.read(info.filename)
            if info.filename == "manifest.json":
                data = json.dumps(edit(json.loads(data))).encode()
            zout.writestr(info, data)


def test_version_mismatch_rejected(tmp_path, fold_and_model):
    _, _, tm = fold_and_model
    good = tmp_path / "good.zip"
    save_bundle(tm, good)
    bad = tmp_path / "bad.zip"
    _rewrite(good, bad, lambda m: {**m, "format_version": FORMAT_VERSION + 1})
    with pytest.raises(BundleError, match="version"):
        load_bundle(bad)
    other = tmp_path / "other.zip"
    _rewrite(good, other, lambda m: {**m, "format": "something-else"})
    with pytest.raises(BundleError):
        load_bundle(other)
    (tmp_path / "junk.zip").write_bytes(b"not a zip")
    with pytest.raises(BundleError):
        load_bundle(tmp_path / "junk.zip")


def test_test_period_edits_leave_bundle_unchanged(tmp_path, synth_dir, synth_data, fold_and_model):
    reg, data = synth_data
    fold, _, tm = fold_and_model
    test_prefix = "2015-01"
    lines = (synth_dir / "news.jsonl").read_text().splitlines()
    edited = []
    changed = 0
    for line in lines:
        rec = json.loads(line)
        if rec["timestamp"].startswith(test_prefix) and "e2" in rec["entities"]:
            rec["title"] = rec["title"] + " Queiroz totally new words here"
            rec["tags"] = ["leak tag"]
            changed += 1
        edited.append(json.dumps(rec))
    assert changed > 0
    (tmp_path / "news.jsonl").write_text("\n".join(edited) + "\n")
    social = (synth_dir / "social.csv").read_text().splitlines()
    social = [
        r if not (r.startswith("e2,") and test_prefix in r) else r.rsplit(",", 1)[0] + ",9999" for r in social
    ]
    (tmp_path / "social.csv").write_text("\n".join(social) + "\n")
    mutated = BacktestData(load_news(tmp_path / "news.jsonl", reg), load_social(tmp_path / "social.csv", reg), data.lexicon)
    tm2 = fit_fold_model(fold, prepare_fold(fold, mutated, FAST_BACKTEST.features), config=FAST_BACKTEST)
    assert bundle_bytes(tm2) == bundle_bytes(tm)
