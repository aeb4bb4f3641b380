import csv
import datetime as dt
import json
import random

import pytest
from conftest import news_record, write_jsonl, write_registry
from hypothesis import given, settings
from hypothesis import strategies as st

from newspop.corpus import (
    CorpusError,
    CorpusIndex,
    dump_news,
    load_news,
    load_registry,
    load_social,
    parse_timestamp,
    write_rejects,
)

UTC = dt.timezone.utc


# --- registry ---------------------------------------------------------------


def test_registry_one_entity_two_forms(tmp_path):
    p = write_registry(tmp_path / "r.json", [{"id": "a", "canonical": "Alpha Beta", "surface_forms": ["Alpha Beta", "Beta"]}])
    reg = load_registry(p)
    assert len(reg) == 1
    assert reg["a"].surface_forms == ("Alpha Beta", "Beta")


def test_registry_duplicate_id_is_named(tmp_path):
    p = write_registry(
        tmp_path / "r.json",
        [{"id": "dup", "canonical": "X", "surface_forms": ["X"]}, {"id": "dup", "canonical": "Y", "surface_forms": ["Y"]}],
    )
    with pytest.raises(CorpusError, match="dup"):
        load_registry(p)


@pytest.mark.parametrize("forms", [[], ["  "], ["ok", ""]])
def test_registry_rejects_missing_or_blank_forms(tmp_path, forms):
    p = write_registry(tmp_path / "r.json", [{"id": "a", "canonical": "A", "surface_forms": forms}])
    with pytest.raises(CorpusError):
        load_registry(p)


def test_registry_keeps_case_variant_of_canonical(tmp_path):
    p = write_registry(tmp_path / "r.json", [{"id": "a", "canonical": "Ronaldo", "surface_forms": ["Ronaldo", "RONALDO"]}])
    reg = load_registry(p)
    assert reg["a"].surface_forms == ("Ronaldo", "RONALDO")
    assert reg.match("ronaldo scores") == ["a"]


def test_registry_missing_file(tmp_path):
    with pytest.raises(CorpusError):
        load_registry(tmp_path / "nope.json")


def test_match_is_word_anchored_and_case_insensitive(ronaldo_registry):
    reg = load_registry(ronaldo_registry)
    assert reg.match("RONALDO wins") == ["cr7"]
    assert reg.match("Ronaldinho wins") == []
    assert reg.match("fans chant #cr7!") == ["cr7"]
    assert reg.match("Costa and Ronaldo") == ["cr7", "pc"]
    assert reg.match("Acosta") == []


# --- timestamps -------------------------------------------------------------


def test_parse_timestamp_normalizes_to_utc():
    ts, naive = parse_timestamp("2015-03-10T08:30:15+02:00")
    assert ts == dt.datetime(2015, 3, 10, 6, 30, 15, tzinfo=UTC)
    assert not naive
    ts, naive = parse_timestamp("2015-03-10T08:30:15.75Z")
    assert ts == dt.datetime(2015, 3, 10, 8, 30, 15, tzinfo=UTC)
    ts, naive = parse_timestamp("2015-03-10 08:30:15")
    assert naive and ts.tzinfo == UTC


# --- news -------------------------------------------------------------------


def test_empty_news_file(tmp_path, ronaldo_registry):
    p = tmp_path / "news.jsonl"
    p.write_text("")
    idx = load_news(p, load_registry(ronaldo_registry))
    assert len(idx) == 0
    assert idx.date_range is None


def test_title_count_matches_linear_scan(tmp_path, ronaldo_registry):
    recs = [
        news_record(1, "2015-01-05T09:00:00Z", "Ronaldo wins", "match report", entities=["cr7"], title_entities=["cr7"]),
        news_record(2, "2015-01-05T10:00:00Z", "Ronaldo again", "x", entities=["cr7"], title_entities=["cr7"]),
        news_record(3, "2015-01-05T11:00:00Z", "Weather", "Ronaldo was seen", entities=["cr7"], title_entities=[]),
    ]
    idx = load_news(write_jsonl(tmp_path / "n.jsonl", recs), load_registry(ronaldo_registry))
    day = dt.date(2015, 1, 5)
    oracle = sum(1 for r in recs if "cr7" in r["title_entities"] and r["timestamp"].startswith("2015-01-05"))
    assert idx.title_count("cr7", day) == oracle == 2
    assert idx.count("cr7", day) == 3


def test_missing_annotations_filled_by_matching(tmp_path, ronaldo_registry):
    recs = [
        news_record(1, "2015-01-05T09:00:00Z", "Ronaldo signs", "Costa comments on the deal"),
        news_record(2, "2015-01-05T09:30:00Z", "Nothing here", "no names"),
    ]
    idx = load_news(write_jsonl(tmp_path / "n.jsonl", recs), load_registry(ronaldo_registry))
    d1 = next(d for d in idx.docs if d.id == "n1")
    assert d1.entity_ids == ("cr7", "pc")
    assert d1.title_entity_ids == ("cr7",)
    assert idx.n_entity_docs("cr7") == 1
    assert next(d for d in idx.docs if d.id == "n2").entity_ids == ()


def test_rejects_collected_with_line_numbers(tmp_path, ronaldo_registry):
    good = json.dumps(news_record(1, "2015-01-05T09:00:00Z", "Ronaldo", "b"))
    lines = [
        good,
        "{not json",
        json.dumps(news_record(2, "yesterday", "t", "b")),
        json.dumps(news_record(3, "2015-01-05T09:00:00Z", "t", "b", source=" ")),
        json.dumps(news_record(4, "2015-01-05T09:00:00Z", "t", "b", entities=["cr7"], title_entities=["pc"])),
        json.dumps(news_record(1, "2015-01-06T09:00:00Z", "dup", "b")),
        json.dumps(news_record(5, "2015-01-05T09:00:00", "naive", "b")),
    ]
    p = tmp_path / "n.jsonl"
    p.write_text("\n".join(lines) + "\n")
    idx = load_news(p, load_registry(ronaldo_registry))
    errors = {r.line_number: r.reason for r in idx.rejects if r.severity == "error"}
    warnings = {r.line_number for r in idx.rejects if r.severity == "warning"}
    assert sorted(errors) == [2, 3, 4, 5, 6]
    assert "timestamp" in errors[3]
    assert "duplicate" in errors[6]
    assert warnings == {7}
    assert sorted(d.id for d in idx.docs) == ["n1", "n5"]

    out = tmp_path / "rejects.csv"
    write_rejects(idx.rejects, out)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["line_number", "reason"]
    assert len(rows) == 1 + len(idx.rejects)
    assert rows[-1][1].startswith("warning: ")


def _random_records(rng: random.Random, n: int):
    recs = []
    for i in range(n):
        day = dt.date(2015, 1, 1) + dt.timedelta(days=rng.randrange(5))
        ts = f"{day.isoformat()}T{rng.randrange(24):02d}:{rng.randrange(60):02d}:{rng.randrange(60):02d}Z"
        ents = rng.sample(["cr7", "pc"], rng.randrange(3))
        title_ents = [e for e in ents if rng.random() < 0.5]
        recs.append(news_record(i, ts, f"title {i}", "body " * rng.randrange(5), source=f"s{rng.randrange(3)}",
                                tags=[f"t{rng.randrange(4)}"], entities=ents, title_entities=title_ents))
    return recs


def test_index_counts_equal_brute_force_scan(tmp_path, ronaldo_registry):
    rng = random.Random(11)
    recs = _random_records(rng, 300)
    idx = load_news(write_jsonl(tmp_path / "n.jsonl", recs), load_registry(ronaldo_registry))
    for _ in range(200):
        ent = rng.choice(["cr7", "pc"])
        day = dt.date(2015, 1, 1) + dt.timedelta(days=rng.randrange(5))
        h0 = rng.randrange(25)
        h1 = rng.randrange(h0, 25)
        raw = [
            r for r in recs
            if ent in r["entities"] and r["timestamp"][:10] == day.isoformat() and h0 <= int(r["timestamp"][11:13]) < h1
        ]
        assert idx.count(ent, day, h0, h1) == len(raw)
        assert idx.title_count(ent, day, h0, h1) == sum(ent in r["title_entities"] for r in raw)
        start = dt.datetime.combine(day, dt.time(0), tzinfo=UTC) + dt.timedelta(hours=h0)
        end = dt.datetime.combine(day, dt.time(0), tzinfo=UTC) + dt.timedelta(hours=h1)
        assert sorted(d.id for d in idx.docs_between(ent, start, end)) == sorted(r["id"] for r in raw)


def test_round_trip_preserves_fields(tmp_path, ronaldo_registry):
    recs = _random_records(random.Random(5), 50)
    reg = load_registry(ronaldo_registry)
    idx = load_news(write_jsonl(tmp_path / "n.jsonl", recs), reg)
    dump_news(idx.docs, tmp_path / "again.jsonl")
    again = load_news(tmp_path / "again.jsonl", reg)
    assert again.docs == idx.docs
    by_id = {r["id"]: r for r in recs}
    for d in again.docs:
        r = by_id[d.id]
        assert d.to_json() == {**r, "entities": r["entities"], "title_entities": r["title_entities"]}


def test_loading_twice_is_identical(tmp_path, ronaldo_registry):
    recs = _random_records(random.Random(9), 80)
    p = write_jsonl(tmp_path / "n.jsonl", recs)
    reg = load_registry(ronaldo_registry)
    a, b = load_news(p, reg), load_news(p, reg)
    assert a.docs == b.docs and a.rejects == b.rejects
    assert a._hourly == b._hourly


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 23), st.booleans()), max_size=40))
def test_index_consistency_property(cells):
    from newspop.corpus import NewsDoc

    docs = [
        NewsDoc(f"d{i}", dt.datetime(2015, 2, 1 + d, h, 0, tzinfo=UTC), "src", "t", "b",
                entity_ids=("e",), title_entity_ids=("e",) if t else ())
        for i, (d, h, t) in enumerate(cells)
    ]
    idx = CorpusIndex(docs)
    for d in range(4):
        day = dt.date(2015, 2, 1 + d)
        assert idx.count("e", day) == sum(1 for dd, _, _ in cells if dd == d)
        assert idx.title_count("e", day, 0, 12) == sum(1 for dd, h, t in cells if dd == d and h < 12 and t)
    assert [x.timestamp for x in idx.docs] == sorted(x.timestamp for x in idx.docs)


# --- social -----------------------------------------------------------------


def test_social_posts_counted_per_hour(tmp_path, ronaldo_registry):
    posts = [{"id": f"p{i}", "timestamp": "2015-01-05T13:%02d:00Z" % i, "text": "go Ronaldo"} for i in range(4)]
    posts.append({"id": "p9", "timestamp": "2015-01-05T14:05:00Z", "text": "RONALDO!!"})
    s = load_social(write_jsonl(tmp_path / "s.jsonl", posts), load_registry(ronaldo_registry))
    day = dt.date(2015, 1, 5)
    oracle = [0] * 24
    for p in posts:
        oracle[int(p["timestamp"][11:13])] += 1
    assert s["cr7"].hourly(day).tolist() == oracle
    assert s["cr7"].counts[(day, 13)] == 4 and s["cr7"].counts[(day, 14)] == 1


def test_social_post_with_two_entities_increments_both(tmp_path, ronaldo_registry):
    posts = [{"id": "p1", "timestamp": "2015-01-05T10:00:00Z", "text": "Ronaldo vs Costa"}]
    s = load_social(write_jsonl(tmp_path / "s.jsonl", posts), load_registry(ronaldo_registry))
    day = dt.date(2015, 1, 5)
    assert s["cr7"].counts[(day, 10)] == 1
    assert s["pc"].counts[(day, 10)] == 1


def test_social_post_counted_once_per_entity(tmp_path, ronaldo_registry):
    posts = [{"id": "p1", "timestamp": "2015-01-05T10:00:00Z", "text": "Ronaldo Ronaldo #CR7"}]
    s = load_social(write_jsonl(tmp_path / "s.jsonl", posts), load_registry(ronaldo_registry))
    assert s["cr7"].counts[(dt.date(2015, 1, 5), 10)] == 1


def test_empty_social_stream(tmp_path, ronaldo_registry):
    p = tmp_path / "s.jsonl"
    p.write_text("")
    s = load_social(p, load_registry(ronaldo_registry))
    assert s["cr7"].hourly(dt.date(2015, 1, 5)).sum() == 0
    assert s.date_range is None


def test_social_csv_rejects(tmp_path, ronaldo_registry):
    p = tmp_path / "s.csv"
    p.write_text(
        "entity_id,date,hour,count\n"
        "cr7,2015-01-05,13,4\n"
        "cr7,2015-01-05,14,-1\n"
        "ghost,2015-01-05,14,2\n"
        "cr7,2015-01-05,24,2\n"
        "cr7,not-a-date,1,2\n"
        "pc,2015-01-05,0,3\n"
    )
    s = load_social(p, load_registry(ronaldo_registry))
    assert [r.line_number for r in s.rejects] == [3, 4, 5, 6]
    assert "negative" in s.rejects[0].reason
    assert "unknown" in s.rejects[1].reason
    assert s["cr7"].counts == {(dt.date(2015, 1, 5), 13): 4}
    assert s["pc"].counts == {(dt.date(2015, 1, 5), 0): 3}


def test_social_csv_brute_force_recount(tmp_path, ronaldo_registry):
    rng = random.Random(2)
    rows = [("cr7", f"2015-01-0{rng.randrange(1, 4)}", rng.randrange(24), rng.randrange(10)) for _ in range(200)]
    p = tmp_path / "s.csv"
    p.write_text("entity_id,date,hour,count\n" + "".join(f"{e},{d},{h},{c}\n" for e, d, h, c in rows))
    s = load_social(p, load_registry(ronaldo_registry))
    for d in ("2015-01-01", "2015-01-02", "2015-01-03"):
        day = dt.date.fromisoformat(d)
        oracle = [sum(c for e, dd, hh, c in rows if dd == d and hh == h) for h in range(24)]
        assert s["cr7"].hourly(day).tolist() == oracle


def test_news_missing_file(tmp_path, ronaldo_registry):
    with pytest.raises(CorpusError):
        load_news(tmp_path / "none.jsonl", load_registry(ronaldo_registry))
