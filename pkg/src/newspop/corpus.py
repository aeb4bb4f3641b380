"""Loading, validation and indexing of the news stream, the social stream
and the entity registry.

File formats
------------
news JSONL, one object per line::

    {"id", "timestamp", "source", "title", "body", "tags": [...],
     "entities": [...], "title_entities": [...]}

``entities`` and ``title_entities`` are optional; missing annotations are
filled by surface-form matching (title and body scanned separately).

social input is either JSONL of ``{"id", "timestamp", "text"}`` posts or a
pre-aggregated CSV with header ``entity_id,date,hour,count``.

registry JSON: ``[{"id", "canonical", "surface_forms": [...]}]``.

Bad records never abort a load; they are collected as :class:`Reject` rows
(``line_number,reason``) so they can be reported.
"""

from __future__ import annotations

import bisect
import csv
import datetime as dt
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .mentions import MentionSeries

UTC = dt.timezone.utc
_FRACTION = re.compile(r"(?<=:\d\d)[.,]\d+")


class CorpusError(Exception):
    """Structural problem with an input file (missing file, bad registry)."""


@dataclass(frozen=True)
class Reject:
    line_number: int
    reason: str
    severity: str = "error"  # "error" drops the record, "warning" keeps it


@dataclass(frozen=True)
class RegistryEntry:
    entity_id: str
    canonical: str
    surface_forms: tuple[str, ...]


class EntityRegistry:
    """Validated set of entities with their surface forms.

    Matching is case-insensitive and anchored at word boundaries; no fuzzy
    matching is attempted.
    """

    def __init__(self, entries: Iterable[RegistryEntry]):
        self.entries: tuple[RegistryEntry, ...] = tuple(entries)
        seen: set[str] = set()
        for e in self.entries:
            if e.entity_id in seen:
                raise CorpusError(f"duplicate entity id {e.entity_id!r}")
            seen.add(e.entity_id)
            if not e.surface_forms:
                raise CorpusError(f"entity {e.entity_id!r} has no surface forms")
            if any(not s.strip() for s in e.surface_forms):
                raise CorpusError(f"entity {e.entity_id!r} has an empty surface form")
        self._by_id = {e.entity_id: e for e in self.entries}
        self._patterns = {e.entity_id: _surface_pattern(e.surface_forms) for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, entity_id: object) -> bool:
        return entity_id in self._by_id

    def __getitem__(self, entity_id: str) -> RegistryEntry:
        return self._by_id[entity_id]

    @property
    def ids(self) -> list[str]:
        return [e.entity_id for e in self.entries]

    def match(self, text: str) -> list[str]:
        """Entity ids (registry order) with at least one surface form in ``text``."""
        if not text:
            return []
        return [eid for eid, pat in self._patterns.items() if pat.search(text)]

    def to_json(self) -> list[dict]:
        return [
            {"id": e.entity_id, "canonical": e.canonical, "surface_forms": list(e.surface_forms)}
            for e in self.entries
        ]


def _surface_pattern(forms: Iterable[str]) -> re.Pattern:
    alts = sorted({f.strip() for f in forms}, key=lambda s: (-len(s), s))
    body = "|".join(re.escape(a) for a in alts)
    return re.compile(rf"(?<!\w)(?:{body})(?!\w)", re.IGNORECASE)


def load_registry(path: str | Path) -> EntityRegistry:
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"registry file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"registry is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise CorpusError("registry must be a JSON list of entries")
    entries = []
    for i, item in enumerate(raw):
        try:
            eid = str(item["id"])
            forms = tuple(str(s) for s in item.get("surface_forms", []))
            canonical = str(item.get("canonical", eid))
        except (KeyError, TypeError, AttributeError) as exc:
            raise CorpusError(f"registry entry {i} is malformed: {exc}") from exc
        entries.append(RegistryEntry(eid, canonical, forms))
    return EntityRegistry(entries)


def parse_timestamp(value: str) -> tuple[dt.datetime, bool]:
    """Parse an ISO-8601 timestamp into an aware UTC datetime (seconds precision).

    Returns ``(timestamp, was_naive)``; naive inputs are taken as UTC.
    """
    if not isinstance(value, str):
        raise ValueError(f"timestamp must be a string, got {type(value).__name__}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    # fromisoformat only takes 3 or 6 fractional digits; seconds precision is all we keep
    text = _FRACTION.sub("", text)
    ts = dt.datetime.fromisoformat(text)
    naive = ts.tzinfo is None
    ts = ts.replace(tzinfo=UTC) if naive else ts.astimezone(UTC)
    return ts.replace(microsecond=0), naive


@dataclass(frozen=True)
class NewsDoc:
    id: str
    timestamp: dt.datetime
    source: str
    title: str
    body: str
    tags: tuple[str, ...] = ()
    entity_ids: tuple[str, ...] = ()
    title_entity_ids: tuple[str, ...] = ()

    @property
    def day(self) -> dt.date:
        return self.timestamp.date()

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "timestamp": self.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "source": self.source,
            "title": self.title,
            "body": self.body,
            "tags": list(self.tags),
            "entities": list(self.entity_ids),
            "title_entities": list(self.title_entity_ids),
        }


@dataclass(frozen=True)
class SocialPost:
    id: str
    timestamp: dt.datetime
    text: str


class CorpusIndex:
    """Time-sorted news with per-entity lookups.

    Documents are ordered by ``(timestamp, id)``. Per entity, the timestamps
    of mentioning documents are kept sorted so interval queries are two
    bisections.
    """

    def __init__(self, docs: Iterable[NewsDoc], rejects: Iterable[Reject] = ()):
        self.docs: tuple[NewsDoc, ...] = tuple(sorted(docs, key=lambda d: (d.timestamp, d.id)))
        self.rejects: tuple[Reject, ...] = tuple(rejects)
        by_entity: dict[str, list[int]] = defaultdict(list)
        for i, d in enumerate(self.docs):
            for eid in d.entity_ids:
                by_entity[eid].append(i)
        self._by_entity = dict(by_entity)
        self._times = {
            eid: [self.docs[i].timestamp for i in idx] for eid, idx in self._by_entity.items()
        }
        self._hourly = {}
        for eid, idx in self._by_entity.items():
            counts: dict[tuple[dt.date, int], list[int]] = defaultdict(lambda: [0, 0])
            for i in idx:
                d = self.docs[i]
                cell = counts[(d.day, d.timestamp.hour)]
                cell[0] += 1
                if eid in d.title_entity_ids:
                    cell[1] += 1
            self._hourly[eid] = dict(counts)

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def date_range(self) -> tuple[dt.date, dt.date] | None:
        if not self.docs:
            return None
        return self.docs[0].day, self.docs[-1].day

    @property
    def entity_ids(self) -> list[str]:
        return sorted(self._by_entity)

    def n_entity_docs(self, entity_id: str) -> int:
        return len(self._by_entity.get(entity_id, ()))

    def docs_between(self, entity_id: str, start: dt.datetime, end: dt.datetime) -> list[NewsDoc]:
        """News mentioning ``entity_id`` with ``start <= timestamp < end``."""
        times = self._times.get(entity_id)
        if not times:
            return []
        lo = bisect.bisect_left(times, start)
        hi = bisect.bisect_left(times, end)
        idx = self._by_entity[entity_id]
        return [self.docs[i] for i in idx[lo:hi]]

    def count(self, entity_id: str, day: dt.date, start_hour: int = 0, end_hour: int = 24) -> int:
        """Articles mentioning the entity on ``day`` in hours ``[start_hour, end_hour)``."""
        cells = self._hourly.get(entity_id, {})
        return sum(cells.get((day, h), (0, 0))[0] for h in range(start_hour, end_hour))

    def title_count(self, entity_id: str, day: dt.date, start_hour: int = 0, end_hour: int = 24) -> int:
        cells = self._hourly.get(entity_id, {})
        return sum(cells.get((day, h), (0, 0))[1] for h in range(start_hour, end_hour))


def _iter_lines(path: Path) -> Iterator[tuple[int, str]]:
    with path.open(encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if line.strip():
                yield n, line


def _str_list(value, name: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ValueError(f"{name} must be a list of strings")
    return tuple(value)


def parse_news_record(obj: Mapping, registry: EntityRegistry | None) -> tuple[NewsDoc, bool]:
    """Build a NewsDoc from one decoded JSON object; raises ValueError on bad input."""
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    for key in ("id", "timestamp", "source", "title", "body"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    for key in ("id", "source", "title", "body"):
        if not isinstance(obj[key], str):
            raise ValueError(f"field {key!r} must be a string")
    if not obj["source"].strip():
        raise ValueError("empty source")
    try:
        ts, naive = parse_timestamp(obj["timestamp"])
    except ValueError as exc:
        raise ValueError(f"unparseable timestamp {obj['timestamp']!r}") from exc
    tags = _str_list(obj.get("tags", []), "tags")

    if "entities" in obj:
        entities = _str_list(obj["entities"], "entities")
        if "title_entities" in obj:
            title_entities = _str_list(obj["title_entities"], "title_entities")
        elif registry is not None:
            title_entities = tuple(e for e in registry.match(obj["title"]) if e in entities)
        else:
            title_entities = ()
    else:
        if registry is None:
            raise ValueError("no entity annotations and no registry to match against")
        title_entities = tuple(registry.match(obj["title"]))
        body_entities = registry.match(obj["body"])
        entities = title_entities + tuple(e for e in body_entities if e not in title_entities)
        if "title_entities" in obj:
            raise ValueError("title_entities given without entities")
    if len(set(entities)) != len(entities):
        entities = tuple(dict.fromkeys(entities))
    if not set(title_entities) <= set(entities):
        raise ValueError("title_entities is not a subset of entities")
    doc = NewsDoc(
        id=obj["id"],
        timestamp=ts,
        source=obj["source"],
        title=obj["title"],
        body=obj["body"],
        tags=tags,
        entity_ids=tuple(entities),
        title_entity_ids=tuple(title_entities),
    )
    return doc, naive


def load_news(path: str | Path, registry: EntityRegistry | None = None) -> CorpusIndex:
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"news file not found: {path}")
    docs: list[NewsDoc] = []
    rejects: list[Reject] = []
    seen: set[str] = set()
    for n, line in _iter_lines(path):
        try:
            obj = json.loads(line)
            doc, naive = parse_news_record(obj, registry)
        except (ValueError, TypeError) as exc:
            rejects.append(Reject(n, str(exc)))
            continue
        if doc.id in seen:
            rejects.append(Reject(n, f"duplicate news id {doc.id!r}"))
            continue
        seen.add(doc.id)
        if naive:
            rejects.append(Reject(n, "timestamp without timezone read as UTC", "warning"))
        docs.append(doc)
    return CorpusIndex(docs, rejects)


def dump_news(docs: Iterable[NewsDoc], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(d.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


@dataclass
class SocialStream:
    """Per-entity hourly mention series plus the rejects from loading."""

    series: dict[str, MentionSeries]
    rejects: list[Reject] = field(default_factory=list)
    n_records: int = 0

    def __getitem__(self, entity_id: str) -> MentionSeries:
        return self.series[entity_id]

    @property
    def date_range(self) -> tuple[dt.date, dt.date] | None:
        days = [day for s in self.series.values() for (day, _h) in s.counts]
        return (min(days), max(days)) if days else None


def _is_csv(path: Path) -> bool:
    if path.suffix.lower() == ".csv":
        return True
    with path.open(encoding="utf-8") as fh:
        head = fh.readline().strip().lower()
    return head.replace(" ", "") == "entity_id,date,hour,count"


def load_social(path: str | Path, registry: EntityRegistry) -> SocialStream:
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"social file not found: {path}")
    counts: dict[str, dict[tuple[dt.date, int], int]] = {eid: defaultdict(int) for eid in registry.ids}
    rejects: list[Reject] = []
    n_ok = 0
    if _is_csv(path):
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return SocialStream({eid: MentionSeries(eid, {}) for eid in registry.ids})
            if [h.strip() for h in header] != ["entity_id", "date", "hour", "count"]:
                raise CorpusError(f"unexpected social CSV header {header!r}")
            for n, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    eid, day_s, hour_s, count_s = (c.strip() for c in row)
                    day = dt.date.fromisoformat(day_s)
                    hour = int(hour_s)
                    count = int(count_s)
                except ValueError as exc:
                    rejects.append(Reject(n, f"malformed row: {exc}"))
                    continue
                if eid not in registry:
                    rejects.append(Reject(n, f"unknown entity_id {eid!r}"))
                elif not 0 <= hour <= 23:
                    rejects.append(Reject(n, f"hour out of range: {hour}"))
                elif count < 0:
                    rejects.append(Reject(n, f"negative count: {count}"))
                else:
                    counts[eid][(day, hour)] += count
                    n_ok += 1
    else:
        for n, line in _iter_lines(path):
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
                    raise ValueError("post needs a string 'text' field")
                ts, naive = parse_timestamp(obj["timestamp"])
            except (ValueError, KeyError, TypeError) as exc:
                rejects.append(Reject(n, f"bad post: {exc}"))
                continue
            if naive:
                rejects.append(Reject(n, "timestamp without timezone read as UTC", "warning"))
            for eid in registry.match(obj["text"]):
                counts[eid][(ts.date(), ts.hour)] += 1
            n_ok += 1
    series = {
        eid: MentionSeries(eid, {k: v for k, v in c.items() if v}) for eid, c in counts.items()
    }
    return SocialStream(series, rejects, n_ok)


def write_rejects(rejects: Iterable[Reject], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["line_number", "reason"])
        for r in rejects:
            reason = r.reason if r.severity == "error" else f"warning: {r.reason}"
            w.writerow([r.line_number, reason])
