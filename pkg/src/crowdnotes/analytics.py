"""Note-dynamics analytics: daily flagged-post series, rolling-baseline
spike detection, trending-term extraction around spikes, and note-latency
percentile tables.

Spike convention (documented in every report header): the trailing window
excludes the current day, uses sample (n-1) standard deviation, and needs
at least MIN_HISTORY prior days before a day can be flagged.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import re
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from ._stopwords import STOPWORDS, STOPWORDS_VERSION
from .domain import FlaggedPost, parse_timestamp
from .errors import EmptyInput

SPIKE_WINDOW = 28
SPIKE_Z = 2.5
MIN_HISTORY = 14
DELAY_PERCENTILES = (25, 50, 75, 90)

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _to_date(epoch_seconds: int) -> _dt.date:
    return _dt.datetime.fromtimestamp(epoch_seconds, _dt.timezone.utc).date()


@dataclass(frozen=True)
class DailySeries:
    """Contiguous per-day counts with explicit zeros."""

    start: _dt.date
    counts: tuple[int, ...]

    def __post_init__(self):
        if not self.counts:
            raise ValueError("series is empty")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")

    def day(self, index: int) -> _dt.date:
        return self.start + _dt.timedelta(days=index)

    @property
    def end(self) -> _dt.date:
        return self.day(len(self.counts) - 1)


@dataclass(frozen=True)
class Spike:
    day: _dt.date
    count: int
    rolling_mean: float
    rolling_std: float
    z_value: float


@dataclass(frozen=True)
class SpikeReport:
    spikes: tuple[Spike, ...]
    window: int = SPIKE_WINDOW
    z_threshold: float = SPIKE_Z
    min_history: int = MIN_HISTORY


@dataclass(frozen=True)
class DelayTable:
    """Hours from post to first note, and first note to first status, at
    fixed percentiles. The status column covers only pairs that ever
    reached a status."""

    post_to_first_note: dict[int, float]
    first_note_to_first_status: dict[int, Optional[float]]
    n_pairs: int
    n_with_status: int


def daily_counts(
    posts: Sequence[FlaggedPost],
    start: Optional[_dt.date] = None,
    end: Optional[_dt.date] = None,
) -> DailySeries:
    """Counts by UTC calendar date, zero-filled over [start, end]."""
    days = [_to_date(p.created_at) for p in posts]
    if start is None or end is None:
        if not days:
            raise EmptyInput("no posts and no explicit date range")
        start = start or min(days)
        end = end or max(days)
    if end < start:
        raise ValueError("end date precedes start date")
    n = (end - start).days + 1
    counts = [0] * n
    for day in days:
        if day < start or day > end:
            raise ValueError(f"post on {day} outside range [{start}, {end}]")
        counts[(day - start).days] += 1
    return DailySeries(start=start, counts=tuple(counts))


def detect_spikes(
    series: DailySeries,
    window: int = SPIKE_WINDOW,
    z: float = SPIKE_Z,
    min_history: int = MIN_HISTORY,
) -> SpikeReport:
    """Flag days whose count exceeds the trailing rolling mean by more than
    z sample standard deviations. Flat windows (sigma = 0) never flag."""
    if not (window >= min_history >= 2):
        raise ValueError("require window >= min_history >= 2")
    spikes: list[Spike] = []
    counts = series.counts
    for i, count in enumerate(counts):
        prior = counts[max(0, i - window):i]
        if len(prior) < min_history:
            continue
        mean = statistics.fmean(prior)
        std = statistics.stdev(prior)
        if std == 0:
            continue
        z_value = (count - mean) / std
        if z_value > z:
            spikes.append(
                Spike(
                    day=series.day(i),
                    count=count,
                    rolling_mean=mean,
                    rolling_std=std,
                    z_value=z_value,
                )
            )
    return SpikeReport(
        spikes=tuple(spikes), window=window, z_threshold=z, min_history=min_history
    )


def trending_terms(
    posts: Sequence[FlaggedPost],
    center_day: _dt.date,
    stopwords: frozenset[str] = STOPWORDS,
) -> list[tuple[str, int]]:
    """Term frequencies in the three-day window centered on center_day,
    ranked by count descending with lexicographic tie-break. Tokens are
    case-folded, punctuation-stripped, minimum length 3."""
    lo = center_day - _dt.timedelta(days=1)
    hi = center_day + _dt.timedelta(days=1)
    counts: dict[str, int] = {}
    for post in posts:
        day = _to_date(post.created_at)
        if not (lo <= day <= hi):
            continue
        for token in _WORD_RE.findall(post.text.casefold()):
            if len(token) < 3 or token in stopwords:
                continue
            counts[token] = counts.get(token, 0) + 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def percentile(values: Sequence[float], p: float) -> float:
    """Linear interpolation between order statistics (inclusive method)."""
    if not values:
        raise EmptyInput("no values")
    ordered = sorted(values)
    if len(ordered) == 1:
        return ordered[0]
    rank = (p / 100.0) * (len(ordered) - 1)
    lo = math.floor(rank)
    hi = math.ceil(rank)
    if lo == hi:
        return ordered[lo]
    frac = rank - lo
    return ordered[lo] * (1 - frac) + ordered[hi] * frac


def delay_percentiles(
    pairs: Sequence[tuple[int, int, Optional[int]]],
) -> DelayTable:
    """Hour-delay percentiles over (post_time, first_note_time,
    first_status_time) triples; status time may be absent."""
    if not pairs:
        raise EmptyInput("no delay pairs")
    note_delays: list[float] = []
    status_delays: list[float] = []
    for post_time, note_time, status_time in pairs:
        if note_time < post_time:
            raise ValueError("first note precedes its post")
        note_delays.append((note_time - post_time) / 3600.0)
        if status_time is not None:
            status_delays.append((status_time - note_time) / 3600.0)
    note_col = {p: percentile(note_delays, p) for p in DELAY_PERCENTILES}
    status_col: dict[int, Optional[float]] = {
        p: (percentile(status_delays, p) if status_delays else None)
        for p in DELAY_PERCENTILES
    }
    return DelayTable(
        post_to_first_note=note_col,
        first_note_to_first_status=status_col,
        n_pairs=len(pairs),
        n_with_status=len(status_delays),
    )


# ---------------------------------------------------------------------------
# File interfaces: public-dump-style TSV (millisecond epochs) or JSONL posts,
# CSV/JSON report emission.

def load_posts(path: str | Path) -> list[FlaggedPost]:
    """Load flagged posts from JSONL ({post_id, text, created_at}) or from a
    tab-separated dump with header columns including a post id, text, and a
    millisecond-epoch creation time."""
    path = Path(path)
    posts: list[FlaggedPost] = []
    if path.suffix.lower() == ".tsv":
        with path.open(encoding="utf-8") as fh:
            reader = csv.DictReader(fh, delimiter="\t")
            for row in reader:
                post_id = row.get("postId") or row.get("tweetId") or row.get("post_id")
                text = row.get("text") or row.get("summary") or row.get("post_text")
                millis = row.get("createdAtMillis")
                created = millis or row.get("created_at") or row.get("createdAt")
                if not post_id or not text or not created:
                    continue
                # the millis column is epoch milliseconds by contract,
                # regardless of magnitude
                created_at = int(millis) // 1000 if millis else parse_timestamp(created)
                posts.append(
                    FlaggedPost(post_id=post_id, text=text, created_at=created_at)
                )
    else:
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                posts.append(
                    FlaggedPost(
                        post_id=str(obj["post_id"]),
                        text=obj["text"],
                        created_at=parse_timestamp(obj["created_at"]),
                    )
                )
    return posts


def load_delay_pairs(path: str | Path) -> list[tuple[int, int, Optional[int]]]:
    """JSONL records {post_created_at, first_note_at, first_status_at?}."""
    pairs: list[tuple[int, int, Optional[int]]] = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            status = obj.get("first_status_at")
            pairs.append(
                (
                    parse_timestamp(obj["post_created_at"]),
                    parse_timestamp(obj["first_note_at"]),
                    parse_timestamp(status) if status is not None else None,
                )
            )
    return pairs


def write_series_csv(series: DailySeries, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "count"])
        for i, count in enumerate(series.counts):
            writer.writerow([series.day(i).isoformat(), count])


def write_spike_report(report: SpikeReport, path: str | Path) -> None:
    payload = {
        "convention": {
            "window_days": report.window,
            "z_threshold": report.z_threshold,
            "min_history": report.min_history,
            "std": "sample (n-1)",
            "window_includes_spike_day": False,
            "stopwords_version": STOPWORDS_VERSION,
        },
        "spikes": [
            {
                "day": s.day.isoformat(),
                "count": s.count,
                "rolling_mean": s.rolling_mean,
                "rolling_std": s.rolling_std,
                "z_value": s.z_value,
            }
            for s in report.spikes
        ],
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8"
    )


def write_delay_csv(table: DelayTable, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["percentile", "post_to_first_note_hours", "first_note_to_first_status_hours"])
        for p in DELAY_PERCENTILES:
            status = table.first_note_to_first_status[p]
            writer.writerow(
                [
                    p,
                    f"{table.post_to_first_note[p]:.1f}",
                    "" if status is None else f"{status:.1f}",
                ]
            )
