"""Turn evidence URLs into scored passages.

fetch -> clean -> segment into overlapping token windows -> match the best
window against the flagged post, keeping exactly one chunk per source.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from html.parser import HTMLParser
from typing import Callable, Optional, Sequence

from .domain import EvidenceChunk, EvidenceRef, FlaggedPost, RunConfig, normalize_url
from .errors import AllSourcesFailed, EmptyAfterClean
from .gateway import FetchedDocument, FetchStatus, Gateway, score_similarity

# Whitespace-delimited words are the default token unit; pass a subword
# tokenizer for parity with embedding-model token counts if needed.
Tokenizer = Callable[[str], list[str]]
Scorer = Callable[[str, Sequence[str]], list[float]]

_BOILERPLATE_CATEGORIES = {
    "nav": "header",
    "header": "header",
    "footer": "footer",
    "aside": "sidebar",
    "script": "script",
    "style": "script",
}
_REFERENCE_HEADINGS = {"references", "bibliography", "citations", "footnotes"}
_HEADING_RE = re.compile(r"h([1-6])$")
_MARKUP_RE = re.compile(r"<\s*(!doctype|/?[a-zA-Z][a-zA-Z0-9]*)[\s>/]", re.IGNORECASE)
_BLOCK_TAGS = {
    "p", "div", "li", "ul", "ol", "table", "tr", "td", "th", "br", "hr",
    "section", "article", "main", "blockquote", "pre", "figure",
}


@dataclass(frozen=True)
class CleanedText:
    url: str
    text: str
    removed_regions: dict[str, int] = field(default_factory=dict)


class _ContentExtractor(HTMLParser):
    """Collects body text while dropping boilerplate regions by tag and
    reference sections by heading."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self.removed: dict[str, int] = {}
        self._skip_depth = 0
        self._skip_tag: Optional[str] = None
        self._heading_level: Optional[int] = None
        self._heading_buf: list[str] = []
        self._ref_skip_level: Optional[int] = None

    def _count(self, category: str) -> None:
        self.removed[category] = self.removed.get(category, 0) + 1

    def handle_starttag(self, tag, attrs):
        if self._skip_tag is not None:
            if tag == self._skip_tag:
                self._skip_depth += 1
            return
        if tag in _BOILERPLATE_CATEGORIES:
            self._skip_tag = tag
            self._skip_depth = 1
            self._count(_BOILERPLATE_CATEGORIES[tag])
            return
        m = _HEADING_RE.match(tag)
        if m:
            level = int(m.group(1))
            if self._ref_skip_level is not None and level <= self._ref_skip_level:
                self._ref_skip_level = None  # reference section ended
            self._heading_level = level
            self._heading_buf = []
        elif tag in _BLOCK_TAGS:
            self.parts.append(" ")

    def handle_endtag(self, tag):
        if self._skip_tag is not None:
            if tag == self._skip_tag:
                self._skip_depth -= 1
                if self._skip_depth == 0:
                    self._skip_tag = None
            return
        if _HEADING_RE.match(tag) and self._heading_level is not None:
            heading = " ".join("".join(self._heading_buf).split()).casefold()
            if heading in _REFERENCE_HEADINGS:
                self._ref_skip_level = self._heading_level
                self._count("references")
            elif self._ref_skip_level is None:
                self.parts.append(" " + "".join(self._heading_buf) + " ")
            self._heading_level = None
            self._heading_buf = []
        elif tag in _BLOCK_TAGS:
            self.parts.append(" ")

    def handle_data(self, data):
        if self._skip_tag is not None:
            return
        if self._heading_level is not None:
            self._heading_buf.append(data)
            return
        if self._ref_skip_level is not None:
            return
        self.parts.append(data)


def clean_document(doc: FetchedDocument) -> CleanedText:
    """Strip markup and boilerplate from a fetched page.

    Plain-text inputs pass through with whitespace normalization.
    """
    if doc.status is not FetchStatus.OK:
        raise ValueError(f"cannot clean document with status {doc.status.value}")
    raw = doc.raw or ""
    if _MARKUP_RE.search(raw):
        extractor = _ContentExtractor()
        extractor.feed(raw)
        extractor.close()
        text = " ".join("".join(extractor.parts).split())
        removed = extractor.removed
    else:
        text = " ".join(raw.split())
        removed = {}
    if not text:
        raise EmptyAfterClean(f"no body text survives cleaning: {doc.url}")
    return CleanedText(url=doc.url, text=text, removed_regions=removed)


def segment_passages(
    text: str,
    chunk_size: int,
    overlap: int,
    url: str = "",
    tokenizer: Tokenizer = str.split,
) -> list[EvidenceChunk]:
    """Cut text into overlapping token windows with stride chunk_size - overlap.

    Every chunk except possibly the last has exactly chunk_size tokens; the
    final chunk ends at the last token; every token lands in at least one
    chunk.
    """
    if not (0 <= overlap < chunk_size):
        raise ValueError("require 0 <= overlap < chunk_size")
    tokens = tokenizer(text)
    if not tokens:
        raise ValueError("text has no tokens")
    stride = chunk_size - overlap
    chunks: list[EvidenceChunk] = []
    start = 0
    index = 0
    while True:
        end = min(start + chunk_size, len(tokens))
        chunks.append(
            EvidenceChunk(
                url=url,
                chunk_index=index,
                text=" ".join(tokens[start:end]),
                token_span=(start, end),
            )
        )
        if end == len(tokens):
            break
        start += stride
        index += 1
    return chunks


def match_best_chunk(
    post_text: str,
    chunks: Sequence[EvidenceChunk],
    scorer: Scorer = score_similarity,
) -> EvidenceChunk:
    """Chunk with maximal similarity to the post; ties break to the lowest
    chunk_index. The returned chunk carries its score."""
    if not chunks:
        raise ValueError("chunks must be non-empty")
    scores = scorer(post_text, [c.text for c in chunks])
    best_pos = 0
    for i in range(1, len(chunks)):
        better = scores[i] > scores[best_pos]
        same_but_earlier = (
            scores[i] == scores[best_pos]
            and chunks[i].chunk_index < chunks[best_pos].chunk_index
        )
        if better or same_but_earlier:
            best_pos = i
    return replace(chunks[best_pos], score=scores[best_pos])


@dataclass(frozen=True)
class SkipEntry:
    url: str
    reason: str


@dataclass(frozen=True)
class RetrievalResult:
    chunks: tuple[EvidenceChunk, ...]
    skipped: tuple[SkipEntry, ...]


def retrieve_evidence_chunks(
    post: FlaggedPost,
    evidence: Sequence[EvidenceRef],
    config: RunConfig,
    gateway: Gateway,
    scorer: Scorer = score_similarity,
    tokenizer: Tokenizer = str.split,
) -> RetrievalResult:
    """One best chunk per reachable source, in evidence order.

    Unreachable or empty sources are skipped and reported; duplicate
    canonical URLs are processed once.
    """
    chunks: list[EvidenceChunk] = []
    skipped: list[SkipEntry] = []
    seen: set[str] = set()
    for ref in evidence:
        url = normalize_url(ref.url)
        if url in seen:
            continue
        seen.add(url)
        doc = gateway.fetch(url)
        if doc.status is not FetchStatus.OK:
            skipped.append(SkipEntry(url=url, reason=doc.status.value))
            continue
        try:
            cleaned = clean_document(doc)
        except EmptyAfterClean:
            skipped.append(SkipEntry(url=url, reason="EMPTY_AFTER_CLEAN"))
            continue
        passage_chunks = segment_passages(
            cleaned.text, config.chunk_size, config.chunk_overlap,
            url=url, tokenizer=tokenizer,
        )
        chunks.append(match_best_chunk(post.text, passage_chunks, scorer=scorer))
    if not chunks:
        raise AllSourcesFailed(
            f"no evidence source yielded a chunk for post {post.post_id}"
        )
    return RetrievalResult(chunks=tuple(chunks), skipped=tuple(skipped))
