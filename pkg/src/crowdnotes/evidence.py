"""Automated evidence acquisition: diverse query generation, a deduplicated
candidate pool across searches, and iterative utility-guided selection of a
fixed quota of sources."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import prompts
from .domain import EvidenceRef, FlaggedPost, normalize_url
from .errors import DegenerateQueries, EmptyPool
from .gateway import ChatRequest, Gateway, SearchRequest

log = logging.getLogger(__name__)

_INT_RE = re.compile(r"-?\d+")


@dataclass(frozen=True)
class QueryPlan:
    post_id: str
    queries: tuple[str, ...]
    generator_tag: str

    def __post_init__(self):
        if not self.queries:
            raise ValueError("query plan is empty")
        folded = [q.strip().casefold() for q in self.queries]
        if len(set(folded)) != len(folded):
            raise ValueError("queries must be pairwise distinct after case-fold/trim")


@dataclass(frozen=True)
class CandidatePool:
    items: tuple[EvidenceRef, ...]

    def __post_init__(self):
        urls = [e.url for e in self.items]
        if len(set(urls)) != len(urls):
            raise ValueError("pool URLs must be pairwise distinct")


@dataclass(frozen=True)
class SelectionRound:
    round_no: int
    shown_urls: tuple[str, ...]
    raw_reply: str
    chosen_url: str
    fallback: bool = False


@dataclass(frozen=True)
class SelectionResult:
    items: tuple[EvidenceRef, ...]
    shortfall: bool  # quota exceeded pool size
    audit: tuple[SelectionRound, ...]


def single_query_plan(post: FlaggedPost, generator_tag: str = "none") -> QueryPlan:
    """Degraded plan for the no-diversity variant: the raw post text is the
    only query and no chat call is made."""
    return QueryPlan(post_id=post.post_id, queries=(post.text,), generator_tag=generator_tag)


def generate_queries(
    post: FlaggedPost, n: int, gateway: Gateway, model_tag: str
) -> QueryPlan:
    """Ask the chat provider for n diverse queries, one per line.

    Lines are deduplicated case-insensitively; a shortfall is padded with
    the raw post text as a final query.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    reply = gateway.chat(
        ChatRequest(
            system_prompt=prompts.SYSTEM_PROMPTS["query_gen"],
            user_prompt=prompts.render_query_gen(post.text, n),
            model_tag=model_tag,
        )
    )
    queries: list[str] = []
    seen: set[str] = set()
    for line in reply.splitlines():
        q = line.strip()
        if q and q.casefold() not in seen:
            seen.add(q.casefold())
            queries.append(q)
        if len(queries) == n:
            break
    if len(queries) < n and post.text.casefold() not in seen:
        queries.append(post.text)
    if not queries:
        raise DegenerateQueries(f"no usable queries for post {post.post_id}")
    return QueryPlan(post_id=post.post_id, queries=tuple(queries), generator_tag=model_tag)


def build_pool(
    plan: QueryPlan,
    top_k: int,
    gateway: Gateway,
    cutoff: Optional[int] = None,
) -> CandidatePool:
    """Merge per-query search results in (query order, rank order), dropping
    URLs already admitted. Every search carries the time cutoff when set."""
    items: list[EvidenceRef] = []
    admitted: set[str] = set()
    for query in plan.queries:
        results = gateway.search(SearchRequest(query=query, top_k=top_k, before=cutoff))
        for rank, result in enumerate(results, start=1):
            try:
                url = normalize_url(result.url)
            except Exception:
                continue
            if url in admitted:
                continue
            admitted.add(url)
            items.append(
                EvidenceRef(
                    url=url,
                    title=result.title or None,
                    snippet=result.snippet or None,
                    source_query=query,
                    search_rank=rank,
                )
            )
    if not items:
        raise EmptyPool(f"all searches empty for post {plan.post_id}")
    return CandidatePool(items=tuple(items))


def take_first(pool: CandidatePool, quota: int) -> SelectionResult:
    """Degraded selection for the no-utility variant: first quota items in
    merged order, no chat calls."""
    if quota < 1:
        raise ValueError("quota must be >= 1")
    n = min(quota, len(pool.items))
    return SelectionResult(
        items=pool.items[:n], shortfall=quota > len(pool.items), audit=()
    )


def _parse_index(reply: str, upper: int) -> Optional[int]:
    ints = _INT_RE.findall(reply)
    if len(ints) != 1:
        return None
    value = int(ints[0])
    return value if 1 <= value <= upper else None


def select_by_utility(
    post: FlaggedPost,
    pool: CandidatePool,
    quota: int,
    gateway: Gateway,
    model_tag: str,
) -> SelectionResult:
    """min(quota, |pool|) sequential rounds; each round the judge picks one
    remaining item by 1-based index, which is removed and appended to the
    selection. An unparseable index gets one reprompt, then falls back to
    index 1 (logged in the audit trail)."""
    if quota < 1:
        raise ValueError("quota must be >= 1")
    if not pool.items:
        raise ValueError("pool is empty")
    remaining = list(pool.items)
    selected: list[EvidenceRef] = []
    audit: list[SelectionRound] = []
    rounds = min(quota, len(remaining))
    for round_no in range(1, rounds + 1):
        shown = tuple(e.url for e in remaining)
        prompt = prompts.render_utility_select(round_no, post.text, remaining)
        request = ChatRequest(
            system_prompt=prompts.SYSTEM_PROMPTS["utility_select"],
            user_prompt=prompt,
            model_tag=model_tag,
        )
        reply = gateway.chat(request)
        index = _parse_index(reply, len(remaining))
        fallback = False
        if index is None:
            reply = gateway.chat(
                ChatRequest(
                    system_prompt=request.system_prompt,
                    user_prompt=prompt
                    + "\n\nReminder: output EXACTLY one integer, nothing else.",
                    model_tag=model_tag,
                )
            )
            index = _parse_index(reply, len(remaining))
            if index is None:
                index = 1
                fallback = True
                log.warning(
                    "utility judge reply unparseable twice for post %s round %d; "
                    "falling back to index 1", post.post_id, round_no,
                )
        chosen = remaining.pop(index - 1)
        selected.append(chosen)
        audit.append(
            SelectionRound(
                round_no=round_no,
                shown_urls=shown,
                raw_reply=reply,
                chosen_url=chosen.url,
                fallback=fallback,
            )
        )
    return SelectionResult(
        items=tuple(selected), shortfall=quota > len(pool.items), audit=tuple(audit)
    )
