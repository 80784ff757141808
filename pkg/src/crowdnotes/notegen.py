"""Note composition from matched evidence chunks, plus the platform
character budget: URLs cost one character each, and note text is truncated
at extended-grapheme boundaries so the total stays within the limit."""

from __future__ import annotations

import re as _stdlib_re
from dataclasses import dataclass
from typing import Sequence

import regex

from . import prompts
from .domain import EvidenceChunk, EvidenceRef, FlaggedPost, Provenance
from .errors import BudgetExhausted, EmptyGeneration
from .gateway import ChatRequest, Gateway

_GRAPHEME_RE = regex.compile(r"\X")
# Absolute-URL grammar; the generation prompt forbids URLs but models
# occasionally emit them anyway.
_URL_RE = _stdlib_re.compile(r"https?://[^\s]+", _stdlib_re.IGNORECASE)


def graphemes(text: str) -> list[str]:
    """Split text into extended grapheme clusters (user-perceived characters)."""
    return _GRAPHEME_RE.findall(text)


def grapheme_count(text: str) -> int:
    return len(graphemes(text))


@dataclass(frozen=True)
class GeneratedNote:
    post_id: str
    text: str
    urls: tuple[EvidenceRef, ...]
    provenance: Provenance
    budget_chars: int
    truncated: bool

    def __post_init__(self):
        if "\n" in self.text or "\r" in self.text:
            raise ValueError("note text must be single-line")
        if _URL_RE.search(self.text):
            raise ValueError("note text must not contain URLs")


def compute_budget(char_limit: int, url_count: int, url_char_cost: int = 1) -> int:
    """Characters left for note text once each URL is billed url_char_cost."""
    if url_count < 0:
        raise ValueError("url_count must be >= 0")
    budget = char_limit - url_count * url_char_cost
    if budget <= 0:
        raise BudgetExhausted(
            f"{url_count} URLs leave no room under a {char_limit}-char limit"
        )
    return budget


def _cleanup_reply(reply: str) -> str:
    text = _URL_RE.sub(" ", reply)
    return " ".join(text.split())


def generate_note(
    post: FlaggedPost,
    chunks: Sequence[EvidenceChunk],
    budget: int,
    gateway: Gateway,
    model_tag: str,
) -> str:
    """Chat-generated note text: single line, URL-free, untruncated."""
    if not chunks:
        raise ValueError("chunks must be non-empty")
    if budget <= 0:
        raise ValueError("budget must be positive")
    reply = gateway.chat(
        ChatRequest(
            system_prompt=prompts.SYSTEM_PROMPTS["note_generate"],
            user_prompt=prompts.render_note_generate(post.text, chunks, budget),
            model_tag=model_tag,
            max_output_chars=budget,
        )
    )
    text = _cleanup_reply(reply)
    if not text:
        raise EmptyGeneration(f"blank generation for post {post.post_id}")
    return text


def truncate_to_budget(text: str, budget: int) -> tuple[str, bool]:
    """Cut text to at most budget graphemes, never inside a cluster."""
    clusters = graphemes(text)
    if len(clusters) <= budget:
        return text, False
    return "".join(clusters[:budget]), True


def finalize_note(
    text: str,
    urls: Sequence[EvidenceRef],
    char_limit: int,
    post_id: str = "",
    provenance: Provenance = Provenance.AUGMENTED,
    url_char_cost: int = 1,
) -> GeneratedNote:
    """Attach URLs and enforce the character budget.

    Over-budget text is cut at the last grapheme boundary at or below the
    budget; the cut never lands inside a multi-unit grapheme. Idempotent.
    """
    if provenance is not Provenance.HUMAN and not urls:
        raise ValueError("machine notes must carry evidence URLs")
    budget = compute_budget(char_limit, len(urls), url_char_cost)
    text, truncated = truncate_to_budget(text, budget)
    return GeneratedNote(
        post_id=post_id,
        text=text,
        urls=tuple(urls),
        provenance=provenance,
        budget_chars=budget,
        truncated=truncated,
    )
