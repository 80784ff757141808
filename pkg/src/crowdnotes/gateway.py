"""Provider gateways with a record/replay cassette layer.

Three external providers (chat completion, web search, page fetch) sit
behind one Gateway. In REPLAY mode every response comes from a cassette
keyed by a canonical request digest, so pipeline runs are deterministic
and fully offline. RECORD performs live calls and appends them; LIVE
calls through without recording.

Also hosts the deterministic lexical similarity scorer used as the
default passage-matching backend.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol, Sequence

from ._stopwords import STOPWORDS
from .errors import CassetteMiss, ParseError, ProviderError

CHAT_RESPONSE_CAP = 64 * 1024  # chat replies above this are stored truncated


class GatewayMode(str, Enum):
    REPLAY = "REPLAY"
    RECORD = "RECORD"
    LIVE = "LIVE"


class ProviderKind(str, Enum):
    CHAT = "CHAT"
    SEARCH = "SEARCH"
    FETCH = "FETCH"
    SCORE = "SCORE"


class FetchStatus(str, Enum):
    OK = "OK"
    UNREACHABLE = "UNREACHABLE"
    NON_TEXT = "NON_TEXT"


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    model_tag: str
    temperature: float = 0.0
    max_output_chars: Optional[int] = None


@dataclass(frozen=True)
class SearchRequest:
    query: str
    top_k: int
    before: Optional[int] = None  # UTC epoch seconds upper bound

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass(frozen=True)
class SearchResult:
    title: str
    snippet: str
    url: str


@dataclass(frozen=True)
class FetchedDocument:
    url: str
    raw: Optional[str]
    fetched_at: int
    status: FetchStatus

    def __post_init__(self):
        if (self.raw is not None) != (self.status is FetchStatus.OK):
            raise ValueError("raw must be present exactly when status is OK")


def _squash_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def canonical_request_key(request) -> str:
    """Stable digest of a provider request.

    Serialization uses sorted field names; prompt/query whitespace runs are
    normalized so cosmetic reformatting does not invalidate cassettes.
    """
    if isinstance(request, ChatRequest):
        kind = ProviderKind.CHAT
        payload = {
            "max_output_chars": request.max_output_chars,
            "model_tag": request.model_tag,
            "system_prompt": _squash_ws(request.system_prompt),
            "temperature": request.temperature,
            "user_prompt": _squash_ws(request.user_prompt),
        }
    elif isinstance(request, SearchRequest):
        kind = ProviderKind.SEARCH
        payload = {
            "before": request.before,
            "query": _squash_ws(request.query),
            "top_k": request.top_k,
        }
    elif isinstance(request, str):  # fetch requests are bare canonical URLs
        kind = ProviderKind.FETCH
        payload = {"url": request}
    else:
        raise TypeError(f"not a provider request: {request!r}")
    body = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    req_digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return hashlib.sha256(f"{kind.value}\x1f{req_digest}".encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CassetteEntry:
    key: str
    provider: ProviderKind
    response: object  # JSON-serializable payload
    recorded_at: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "key": self.key,
                "provider": self.provider.value,
                "recorded_at": self.recorded_at,
                "response": self.response,
            },
            sort_keys=True,
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "CassetteEntry":
        obj = json.loads(line)
        return cls(
            key=obj["key"],
            provider=ProviderKind(obj["provider"]),
            response=obj["response"],
            recorded_at=obj["recorded_at"],
        )


class Cassette:
    """Keyed store of recorded provider responses.

    Reads are lock-free over the in-memory index; appends are serialized
    through a single writer lock and flushed line-by-line when a path is
    attached.
    """

    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path else None
        self._entries: dict[str, CassetteEntry] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            for line in self.path.read_text("utf-8").splitlines():
                if line.strip():
                    entry = CassetteEntry.from_json(line)
                    self._entries[entry.key] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> Optional[CassetteEntry]:
        return self._entries.get(key)

    def append(self, entry: CassetteEntry) -> None:
        with self._lock:
            if entry.key in self._entries:
                return
            self._entries[entry.key] = entry
            if self.path:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(entry.to_json() + "\n")

    def save(self, path: str | Path) -> None:
        target = Path(path)
        with self._lock:
            lines = [e.to_json() for e in self._entries.values()]
        target.write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")

    def entries(self) -> list[CassetteEntry]:
        return list(self._entries.values())


class Transport(Protocol):
    """Live provider calls; swapped for fakes in tests."""

    def chat(self, request: ChatRequest) -> str: ...

    def search(self, request: SearchRequest) -> list[SearchResult]: ...

    def fetch(self, url: str) -> FetchedDocument: ...


class HttpTransport:
    """requests-backed transport for OpenAI-style chat and custom-search-style
    search endpoints. Endpoints and credentials come from environment-driven
    config; retry policy is 3 attempts with exponential backoff."""

    RETRIES = 3

    def __init__(
        self,
        chat_endpoint: Optional[str] = None,
        chat_api_key: Optional[str] = None,
        search_endpoint: Optional[str] = None,
        search_api_key: Optional[str] = None,
        timeout: float = 30.0,
    ):
        self.chat_endpoint = chat_endpoint
        self.chat_api_key = chat_api_key
        self.search_endpoint = search_endpoint
        self.search_api_key = search_api_key
        self.timeout = timeout

    @classmethod
    def from_env(cls) -> "HttpTransport":
        import os

        return cls(
            chat_endpoint=os.environ.get("CROWDNOTES_CHAT_ENDPOINT"),
            chat_api_key=os.environ.get("CROWDNOTES_CHAT_API_KEY"),
            search_endpoint=os.environ.get("CROWDNOTES_SEARCH_ENDPOINT"),
            search_api_key=os.environ.get("CROWDNOTES_SEARCH_API_KEY"),
        )

    def _with_retries(self, fn, what: str):
        import requests

        last = None
        for attempt in range(self.RETRIES):
            try:
                return fn()
            except requests.RequestException as exc:
                last = exc
                time.sleep(0.5 * (2**attempt))
        raise ProviderError(f"{what} failed after {self.RETRIES} attempts: {last}")

    def chat(self, request: ChatRequest) -> str:
        import requests

        if not self.chat_endpoint:
            raise ProviderError("no chat endpoint configured")

        def call():
            headers = {"Content-Type": "application/json"}
            if self.chat_api_key:
                headers["Authorization"] = f"Bearer {self.chat_api_key}"
            resp = requests.post(
                self.chat_endpoint,
                json={
                    "model": request.model_tag,
                    "temperature": request.temperature,
                    "messages": [
                        {"role": "system", "content": request.system_prompt},
                        {"role": "user", "content": request.user_prompt},
                    ],
                },
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp

        resp = self._with_retries(call, "chat call")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ParseError(f"malformed chat response: {exc}") from exc

    def search(self, request: SearchRequest) -> list[SearchResult]:
        import requests

        if not self.search_endpoint:
            raise ProviderError("no search endpoint configured")

        def call():
            params = {"q": request.query, "num": request.top_k}
            if self.search_api_key:
                params["key"] = self.search_api_key
            if request.before is not None:
                # date-restrict upper bound; the provider contract must honor it
                params["before"] = request.before
            resp = requests.get(self.search_endpoint, params=params, timeout=self.timeout)
            resp.raise_for_status()
            return resp

        resp = self._with_retries(call, "search call")
        try:
            items = resp.json().get("items", [])
            return [
                SearchResult(
                    title=i.get("title", ""),
                    snippet=i.get("snippet", ""),
                    url=i["link" if "link" in i else "url"],
                )
                for i in items[: request.top_k]
            ]
        except (KeyError, ValueError) as exc:
            raise ParseError(f"malformed search response: {exc}") from exc

    def fetch(self, url: str) -> FetchedDocument:
        import requests

        now = int(time.time())
        try:

            def call():
                resp = requests.get(url, timeout=self.timeout)
                resp.raise_for_status()
                return resp

            resp = self._with_retries(call, f"fetch {url}")
        except ProviderError:
            return FetchedDocument(url=url, raw=None, fetched_at=now, status=FetchStatus.UNREACHABLE)
        ctype = resp.headers.get("Content-Type", "")
        if ctype and not any(t in ctype for t in ("text", "html", "xml", "json")):
            return FetchedDocument(url=url, raw=None, fetched_at=now, status=FetchStatus.NON_TEXT)
        return FetchedDocument(url=url, raw=resp.text, fetched_at=now, status=FetchStatus.OK)


class Gateway:
    """Mode-aware front door for all provider calls."""

    def __init__(
        self,
        mode: GatewayMode = GatewayMode.REPLAY,
        transport: Optional[Transport] = None,
        cassette: Optional[Cassette] = None,
    ):
        if mode is GatewayMode.REPLAY and cassette is None:
            raise ValueError("REPLAY mode requires a cassette")
        if mode in (GatewayMode.RECORD, GatewayMode.LIVE) and transport is None:
            raise ValueError(f"{mode.value} mode requires a transport")
        if mode is GatewayMode.RECORD and cassette is None:
            cassette = Cassette()
        self.mode = mode
        self.transport = transport
        self.cassette = cassette

    def _resolve(self, kind: ProviderKind, request, call, encode, decode):
        key = canonical_request_key(request)
        if self.mode is GatewayMode.LIVE:
            return call()
        if self.mode is GatewayMode.REPLAY:
            entry = self.cassette.get(key)
            if entry is None:
                raise CassetteMiss(key)
            return decode(entry.response)
        # RECORD: serve repeats from the cassette, one live call per key
        entry = self.cassette.get(key)
        if entry is not None:
            return decode(entry.response)
        response = call()
        self.cassette.append(
            CassetteEntry(
                key=key,
                provider=kind,
                response=encode(response),
                recorded_at=int(time.time()),
            )
        )
        return response

    def chat(self, request: ChatRequest) -> str:
        return self._resolve(
            ProviderKind.CHAT,
            request,
            lambda: self.transport.chat(request),
            lambda text: text[:CHAT_RESPONSE_CAP],
            lambda payload: str(payload),
        )

    def search(self, request: SearchRequest) -> list[SearchResult]:
        return self._resolve(
            ProviderKind.SEARCH,
            request,
            lambda: self.transport.search(request),
            lambda results: [
                {"snippet": r.snippet, "title": r.title, "url": r.url} for r in results
            ],
            lambda payload: [
                SearchResult(title=i["title"], snippet=i["snippet"], url=i["url"])
                for i in payload
            ],
        )

    def fetch(self, url: str) -> FetchedDocument:
        return self._resolve(
            ProviderKind.FETCH,
            url,
            lambda: self.transport.fetch(url),
            lambda doc: {
                "fetched_at": doc.fetched_at,
                "raw": doc.raw,
                "status": doc.status.value,
                "url": doc.url,
            },
            lambda payload: FetchedDocument(
                url=payload["url"],
                raw=payload["raw"],
                fetched_at=payload["fetched_at"],
                status=FetchStatus(payload["status"]),
            ),
        )


_TOKEN_RE = re.compile(r"[a-z0-9']+")


def _tf_vector(text: str) -> Counter:
    return Counter(
        t for t in _TOKEN_RE.findall(text.casefold()) if t not in STOPWORDS
    )


def score_similarity(query: str, passages: Sequence[str]) -> list[float]:
    """Deterministic lexical similarity: cosine over case-folded
    term-frequency vectors with stopwords removed. One score per passage,
    order-aligned, each in [-1, 1]. Pure function."""
    if not passages:
        raise ValueError("passages must be non-empty")
    qv = _tf_vector(query)
    qnorm = math.sqrt(sum(v * v for v in qv.values()))
    scores = []
    for passage in passages:
        pv = _tf_vector(passage)
        pnorm = math.sqrt(sum(v * v for v in pv.values()))
        if qnorm == 0 or pnorm == 0:
            scores.append(0.0)
            continue
        dot = sum(qv[t] * pv[t] for t in qv if t in pv)
        scores.append(min(1.0, dot / (qnorm * pnorm)))
    return scores
