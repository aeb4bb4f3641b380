import datetime as dt
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from newspop.backtest import BacktestConfig, BacktestData  # noqa: E402
from newspop.corpus import load_news, load_registry, load_social  # noqa: E402
from newspop.featurize import FeatureConfig, load_lexicon  # noqa: E402
from newspop.synthgen import SynthConfig, generate  # noqa: E402
from newspop.topics import LdaConfig  # noqa: E402

# fewer Gibbs sweeps keep unit-level pipeline tests quick; acceptance uses defaults
FAST_FEATURES = FeatureConfig(lda=LdaConfig(train_sweeps=60, infer_sweeps=20))
FAST_BACKTEST = BacktestConfig(features=FAST_FEATURES)


def write_registry(path: Path, entries) -> Path:
    path.write_text(json.dumps(entries), encoding="utf-8")
    return path


def write_jsonl(path: Path, records) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def news_record(i, ts, title="", body="", source="Daily", tags=(), entities=None, title_entities=None):
    rec = {"id": f"n{i}", "timestamp": ts, "source": source, "title": title, "body": body, "tags": list(tags)}
    if entities is not None:
        rec["entities"] = list(entities)
    if title_entities is not None:
        rec["title_entities"] = list(title_entities)
    return rec


@pytest.fixture
def ronaldo_registry(tmp_path):
    return write_registry(
        tmp_path / "registry.json",
        [
            {"id": "cr7", "canonical": "Cristiano Ronaldo", "surface_forms": ["Cristiano Ronaldo", "Ronaldo", "#CR7"]},
            {"id": "pc", "canonical": "Paulo Costa", "surface_forms": ["Paulo Costa", "Costa"]},
        ],
    )


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """A small 26-month, 2-entity corpus shared by the pipeline tests."""
    out = tmp_path_factory.mktemp("synth")
    cfg = SynthConfig(seed=3, n_entities=2, start=dt.date(2013, 1, 1), months=26)
    generate(cfg).write(out)
    return out


@pytest.fixture(scope="session")
def synth_data(synth_dir):
    reg = load_registry(synth_dir / "registry.json")
    return reg, BacktestData(
        load_news(synth_dir / "news.jsonl", reg),
        load_social(synth_dir / "social.csv", reg),
        load_lexicon(synth_dir / "lexicon.csv"),
    )


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} -- {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
