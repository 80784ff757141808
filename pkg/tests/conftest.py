"""Shared fakes: a scripted offline transport that emulates the three
providers deterministically, plus fixture builders."""

from __future__ import annotations

import hashlib
import re

import pytest

from crowdnotes import prompts
from crowdnotes.domain import (
    EvidenceRef,
    FlaggedPost,
    NoteRecord,
    NoteStatus,
    Provenance,
)
from crowdnotes.gateway import (
    ChatRequest,
    FetchedDocument,
    FetchStatus,
    Gateway,
    GatewayMode,
    SearchRequest,
    SearchResult,
)

ITEM_COUNT_RE = re.compile(r"\(1\.\.(\d+)\)")


def classify_request(request) -> str:
    """Name the prompt asset behind a chat request.

    The two inspector stages share a system prompt, so those are told apart
    by the opening line of the user prompt.
    """
    matches = [n for n, s in prompts.SYSTEM_PROMPTS.items() if s == request.system_prompt]
    if not matches:
        return "freeform"
    if len(matches) == 1:
        return matches[0]
    if request.user_prompt.startswith("You are given a Community note"):
        return "correctness"
    return "relevance"


def _stable_words(seed: str, n: int) -> list[str]:
    digest = hashlib.sha256(seed.encode()).hexdigest()
    return [f"w{digest[i * 2:i * 2 + 4]}" for i in range(n)]


class ScriptedTransport:
    """Deterministic provider behavior keyed off request content.

    Chat routing is by system prompt; search fabricates stable URLs per
    query; fetch serves pages whose text shares vocabulary with the query
    that surfaced them. Counts every live call for replay-isolation
    assertions.
    """

    def __init__(self, chat_overrides=None):
        self.calls = {"chat": 0, "search": 0, "fetch": 0}
        self.chat_overrides = chat_overrides or {}
        self._page_words: dict[str, str] = {}

    @property
    def total_calls(self) -> int:
        return sum(self.calls.values())

    def chat(self, request: ChatRequest) -> str:
        self.calls["chat"] += 1
        name = classify_request(request)
        if name in self.chat_overrides:
            return self.chat_overrides[name](request)
        if name == "query_gen":
            tag = hashlib.sha256(request.user_prompt.encode()).hexdigest()[:6]
            return "\n".join(f"query {tag} variant {i}" for i in range(1, 4))
        if name == "utility_select":
            return "1"
        if name == "note_generate":
            tag = hashlib.sha256(request.user_prompt.encode()).hexdigest()[:8]
            return f"Context note {tag}: the cited sources clarify the claim."
        if name == "relevance":
            return "The snippets add background. Final decision: yes"
        if name == "correctness":
            return "No distortion found. Final decision: no"
        if name == "helpfulness":
            return "Clear and sourced. Final decision: yes"
        if name == "evidence_compare":
            return "Both sets are factual.\nTIE"
        # unrecognized prompts get a stable content-keyed reply
        tag = hashlib.sha256(f"{request.system_prompt}\x1f{request.user_prompt}".encode()).hexdigest()[:8]
        return f"reply {tag}"

    def search(self, request: SearchRequest) -> list[SearchResult]:
        self.calls["search"] += 1
        tag = hashlib.sha256(request.query.encode()).hexdigest()[:8]
        results = []
        for rank in range(1, request.top_k + 1):
            url = f"https://example.org/{tag}/{rank}"
            self._page_words[url] = request.query
            results.append(
                SearchResult(
                    title=f"Result {rank} for {tag}",
                    snippet=f"Snippet {rank} about {request.query}",
                    url=url,
                )
            )
        return results

    def fetch(self, url: str) -> FetchedDocument:
        self.calls["fetch"] += 1
        topic = self._page_words.get(url, url)
        body = " ".join(
            f"{topic} fact{i} " + " ".join(_stable_words(f"{url}:{i}", 5))
            for i in range(12)
        )
        html = f"<html><nav>site menu</nav><p>{body}</p><footer>legal</footer></html>"
        return FetchedDocument(url=url, raw=html, fetched_at=1_700_000_000, status=FetchStatus.OK)


def live_gateway(transport=None) -> tuple[Gateway, ScriptedTransport]:
    transport = transport or ScriptedTransport()
    return Gateway(mode=GatewayMode.LIVE, transport=transport), transport


def make_post(post_id="p1", text="flu vaccine reduces hospitalization risk", created_at=1_600_000_000):
    return FlaggedPost(post_id=post_id, text=text, created_at=created_at)


def make_refs(*urls):
    return tuple(EvidenceRef(url=u) for u in urls)


def make_sample(note_id="n1", status=NoteStatus.HELPFUL, urls=("https://example.org/a/1",),
                post_text="flu vaccine reduces hospitalization risk"):
    from crowdnotes.bench import BenchSample

    post = make_post(post_id=f"post-{note_id}", text=post_text)
    note = NoteRecord(
        note_id=note_id,
        post_id=post.post_id,
        text="The claim is supported by public health data.",
        urls=make_refs(*urls),
        created_at=post.created_at + 3600,
        provenance=Provenance.HUMAN,
        status=status,
    )
    return BenchSample(note_id=note_id, post=post, human_note=note, subset=status)


@pytest.fixture
def scripted():
    return ScriptedTransport()
