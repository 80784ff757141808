"""Versioned prompt templates and their render helpers.

Templates are plain-text assets with str.format placeholders. Rendering is
deterministic; every rendered prompt is covered by golden-file tests, so
any template edit must bump its version here.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from typing import Sequence

from ..domain import EvidenceChunk, EvidenceRef

VERSIONS = {
    "utility_select": "1",
    "note_generate": "1",
    "relevance": "1",
    "correctness": "1",
    "helpfulness": "1",
    "query_gen": "1",
    "evidence_compare": "1",
}

SYSTEM_PROMPTS = {
    "utility_select": "You are a careful selector. Output exactly ONE integer as instructed.",
    "note_generate": (
        "Community notes is a collaborative way to add helpful context to posts "
        "and keep people better informed. Now you are a highly experienced "
        "community note writer."
    ),
    "relevance": "You are a very meticulous inspector",
    "correctness": "You are a very meticulous inspector",
    "helpfulness": "You are a precise text classifier.",
    "query_gen": (
        "You generate web search queries. Output only the queries, one per line."
    ),
    "evidence_compare": (
        "You are a careful evidence assessor. End your reply with a single line "
        "containing exactly A, B, or TIE."
    ),
}


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    if name not in VERSIONS:
        raise KeyError(f"unknown prompt asset: {name}")
    return resources.files(__package__).joinpath(f"{name}.txt").read_text("utf-8")


def format_snippets(chunks: Sequence[EvidenceChunk]) -> str:
    """Source-snippet blocks shared by generation and evaluation prompts."""
    blocks = [
        f"[S{i}] {c.url} (chunk {c.chunk_index})\n{c.text}"
        for i, c in enumerate(chunks, start=1)
    ]
    return "\n\n".join(blocks)


def format_candidates(items: Sequence[EvidenceRef]) -> str:
    """Numbered search-result blocks for utility selection."""
    blocks = [
        f"[{i}] Title: {e.title or ''}\n"
        f"        Snippet: {e.snippet or ''}\n"
        f"        URL: {e.url}"
        for i, e in enumerate(items, start=1)
    ]
    return "\n".join(blocks)


def format_source_list(items: Sequence[EvidenceRef]) -> str:
    return "\n".join(
        f"- {e.url}" + (f" ({e.title})" if e.title else "") for e in items
    )


def render_utility_select(round_no: int, tweet: str, items: Sequence[EvidenceRef]) -> str:
    return load_template("utility_select").format(
        round_no=round_no,
        item_count=len(items),
        tweet=tweet,
        candidates=format_candidates(items),
    )


def render_note_generate(query: str, chunks: Sequence[EvidenceChunk], budget_chars: int) -> str:
    return load_template("note_generate").format(
        budget_chars=budget_chars,
        query=query,
        snippets=format_snippets(chunks),
    )


def render_relevance(query: str, chunks: Sequence[EvidenceChunk]) -> str:
    return load_template("relevance").format(
        query=query, snippets=format_snippets(chunks)
    )


def render_correctness(note: str, chunks: Sequence[EvidenceChunk]) -> str:
    return load_template("correctness").format(
        note=note, snippets=format_snippets(chunks)
    )


def render_helpfulness(tweet_text: str, note_text: str) -> str:
    return load_template("helpfulness").format(
        tweet_text=tweet_text, note_text=note_text
    )


def render_query_gen(tweet: str, n: int) -> str:
    return load_template("query_gen").format(n=n, tweet=tweet)


def render_evidence_compare(tweet: str, list_a: Sequence[EvidenceRef], list_b: Sequence[EvidenceRef]) -> str:
    return load_template("evidence_compare").format(
        tweet=tweet,
        list_a=format_source_list(list_a),
        list_b=format_source_list(list_b),
    )
