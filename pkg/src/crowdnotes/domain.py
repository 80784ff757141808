"""Core value types shared by every pipeline stage, plus canonicalization helpers.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

from .errors import MalformedUrl, UnknownStatus

# Query parameters stripped during URL canonicalization. Fixed list: stable
# dedup keys without over-normalizing semantically meaningful queries.
TRACKING_PARAMS = ("fbclid", "gclid")
TRACKING_PREFIXES = ("utm_",)


class NoteStatus(str, Enum):
    HELPFUL = "HELPFUL"
    NOT_HELPFUL = "NOT_HELPFUL"


class Provenance(str, Enum):
    HUMAN = "HUMAN"
    AUGMENTED = "AUGMENTED"
    AUTOMATED = "AUTOMATED"


class RunMode(str, Enum):
    HUMAN_BASELINE = "HUMAN_BASELINE"
    AUGMENT = "AUGMENT"
    AUTOMATE = "AUTOMATE"
    AUTOMATE_NO_DIVERSITY = "AUTOMATE_NO_DIVERSITY"
    AUTOMATE_NO_UTILITY = "AUTOMATE_NO_UTILITY"


class TimeCutoff(str, Enum):
    NOTE_CREATION = "NOTE_CREATION"
    NONE = "NONE"


def normalize_url(raw: str) -> str:
    """Canonicalize an absolute http(s) URL.

    Lowercases scheme and host, drops the fragment, strips known tracking
    parameters (utm_*, fbclid, gclid), sorts the surviving query parameters
    by key, and normalizes an empty path to "/". Idempotent.
    """
    if not isinstance(raw, str) or not raw.strip():
        raise MalformedUrl(f"not a URL: {raw!r}")
    try:
        parts = urlsplit(raw.strip())
    except ValueError as exc:
        raise MalformedUrl(f"unparseable URL: {raw!r}") from exc
    if parts.scheme.lower() not in ("http", "https") or not parts.netloc:
        raise MalformedUrl(f"not an absolute http(s) URL: {raw!r}")

    host = parts.hostname or ""
    netloc = host.lower()
    if parts.port is not None:
        netloc += f":{parts.port}"
    if parts.username:
        auth = parts.username
        if parts.password:
            auth += f":{parts.password}"
        netloc = f"{auth}@{netloc}"

    params = [
        (k, v)
        for k, v in parse_qsl(parts.query, keep_blank_values=True)
        if k not in TRACKING_PARAMS and not k.startswith(TRACKING_PREFIXES)
    ]
    params.sort()
    query = urlencode(params)
    path = parts.path or "/"
    return urlunsplit((parts.scheme.lower(), netloc, path, query, ""))


_STATUS_ALIASES = {
    "helpful": NoteStatus.HELPFUL,
    "currently_rated_helpful": NoteStatus.HELPFUL,
    "not_helpful": NoteStatus.NOT_HELPFUL,
    "currently_rated_not_helpful": NoteStatus.NOT_HELPFUL,
}


def parse_status(label: str) -> NoteStatus:
    """Map a status label to its enum; unrated labels are rejected."""
    status = _STATUS_ALIASES.get(str(label).strip().lower())
    if status is None:
        raise UnknownStatus(f"unknown or excluded status label: {label!r}")
    return status


def render_status(status: NoteStatus) -> str:
    return status.value.lower()


def parse_timestamp(value) -> int:
    """Parse a timestamp into UTC epoch seconds.

    Accepts epoch seconds, epoch milliseconds (values >= 1e12, as in the
    public Community Notes dump), or an ISO-8601 string (naive = UTC).
    """
    if isinstance(value, bool):
        raise ValueError(f"not a timestamp: {value!r}")
    if isinstance(value, (int, float)):
        ts = float(value)
        if abs(ts) >= 1e12:
            ts /= 1000.0
        return int(ts)
    if isinstance(value, str):
        text = value.strip()
        if text.replace(".", "", 1).lstrip("-").isdigit():
            return parse_timestamp(float(text))
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        dt = _dt.datetime.fromisoformat(text)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=_dt.timezone.utc)
        return int(dt.timestamp())
    raise ValueError(f"not a timestamp: {value!r}")


@dataclass(frozen=True)
class FlaggedPost:
    """A post flagged as potentially misleading; the pipeline's input."""

    post_id: str
    text: str
    created_at: int  # UTC epoch seconds

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("post text is empty after trimming")


@dataclass(frozen=True)
class EvidenceRef:
    """A source URL plus optional search provenance."""

    url: str
    title: Optional[str] = None
    snippet: Optional[str] = None
    source_query: Optional[str] = None
    search_rank: Optional[int] = None

    def __post_init__(self):
        if self.search_rank is not None and self.search_rank < 1:
            raise ValueError("search_rank must be >= 1")


@dataclass(frozen=True)
class NoteRecord:
    """A community note as stored in the benchmark or the public dump."""

    note_id: str
    post_id: str
    text: str
    urls: tuple[EvidenceRef, ...]
    created_at: int
    provenance: Provenance = Provenance.HUMAN
    status: Optional[NoteStatus] = None

    def __post_init__(self):
        if self.status is not None and self.provenance is not Provenance.HUMAN:
            raise ValueError("crowd status is only defined for human notes")
        if not self.urls and self.provenance is not Provenance.HUMAN:
            raise ValueError("machine notes must carry evidence URLs")


@dataclass(frozen=True)
class EvidenceChunk:
    """A scored passage extracted from one fetched source."""

    url: str
    chunk_index: int
    text: str
    token_span: tuple[int, int]
    score: Optional[float] = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("chunk text is empty")
        if self.chunk_index < 0:
            raise ValueError("chunk_index must be >= 0")


AUTO_QUOTA = None  # tau = |human URLs| per sample


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one benchmark run."""

    mode: RunMode = RunMode.HUMAN_BASELINE
    tau: Optional[int] = AUTO_QUOTA  # None = match human URL count per sample
    num_queries: int = 3
    top_k: int = 10
    chunk_size: int = 512
    chunk_overlap: int = 128
    char_limit: int = 280
    url_char_cost: int = 1
    time_cutoff: TimeCutoff = TimeCutoff.NOTE_CREATION

    def __post_init__(self):
        if self.chunk_overlap >= self.chunk_size:
            raise ValueError("chunk_overlap must be < chunk_size")
        if self.char_limit <= 0:
            raise ValueError("char_limit must be positive")
        if self.tau is not None and self.tau < 1:
            raise ValueError("tau must be >= 1 or AUTO")
        if self.num_queries < 1 or self.top_k < 1:
            raise ValueError("num_queries and top_k must be >= 1")
