"""Gated three-stage note evaluation (relevance -> correctness ->
helpfulness) plus pairwise evidence-utility comparison.

A later stage is NOT_EVALUATED whenever an earlier stage did not pass, so
verdicts factorize exactly like the conditional pass-rate chain the
benchmark reports. Relevance is a property of the evidence set and is
cached per (post, evidence digest)."""

from __future__ import annotations

import hashlib
import logging
import random
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from . import prompts
from .domain import EvidenceChunk, EvidenceRef, FlaggedPost
from .errors import UnparseableDecision
from .gateway import ChatRequest, Gateway

log = logging.getLogger(__name__)

_DECISION_RE = re.compile(r"final\s+decision\s*:\s*(yes|no)\b", re.IGNORECASE)
_REPROMPT_SUFFIX = (
    '\n\nReminder: end your reply with "Final decision: yes" or '
    '"Final decision: no".'
)


class Decision(str, Enum):
    YES = "YES"
    NO = "NO"


class StageVerdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    NOT_EVALUATED = "NOT_EVALUATED"


def parse_decision(reply: str) -> Decision:
    """Last 'Final decision: yes|no' marker wins, case-insensitively."""
    matches = _DECISION_RE.findall(reply)
    if not matches:
        raise UnparseableDecision(f"no final decision in reply: {reply[:120]!r}")
    return Decision.YES if matches[-1].lower() == "yes" else Decision.NO


@dataclass(frozen=True)
class EvalOutcome:
    sample_id: str
    relevance: StageVerdict
    correctness: StageVerdict
    helpfulness: StageVerdict
    stage_transcripts: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.relevance is StageVerdict.NOT_EVALUATED:
            raise ValueError("relevance is always evaluated")
        rel_failed = self.relevance is not StageVerdict.PASS
        if rel_failed != (self.correctness is StageVerdict.NOT_EVALUATED):
            raise ValueError("correctness must be evaluated iff relevance passed")
        corr_failed = self.correctness is not StageVerdict.PASS
        if corr_failed != (self.helpfulness is StageVerdict.NOT_EVALUATED):
            raise ValueError("helpfulness must be evaluated iff correctness passed")


@dataclass(frozen=True)
class EvalSample:
    """One note ready for evaluation: untruncated text for the correctness
    stage, budget-truncated display text for the helpfulness stage."""

    sample_id: str
    post: FlaggedPost
    chunks: tuple[EvidenceChunk, ...]
    note_text_full: str
    note_text_display: str


def evidence_digest(chunks: Sequence[EvidenceChunk]) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(f"{c.url}\x1f{c.chunk_index}\x1f{c.text}\x1e".encode("utf-8"))
    return h.hexdigest()


class JudgeChain:
    """Three independently configurable chat endpoints, one per stage."""

    def __init__(
        self,
        relevance_gateway: Gateway,
        correctness_gateway: Optional[Gateway] = None,
        helpfulness_gateway: Optional[Gateway] = None,
        relevance_model: str = "judge",
        correctness_model: Optional[str] = None,
        helpfulness_model: Optional[str] = None,
    ):
        self.relevance_gateway = relevance_gateway
        self.correctness_gateway = correctness_gateway or relevance_gateway
        self.helpfulness_gateway = helpfulness_gateway or relevance_gateway
        self.relevance_model = relevance_model
        self.correctness_model = correctness_model or relevance_model
        self.helpfulness_model = helpfulness_model or relevance_model
        self._relevance_cache: dict[tuple[str, str], tuple[StageVerdict, str]] = {}
        self._cache_lock = threading.Lock()

    def _decide(
        self, gateway: Gateway, name: str, user_prompt: str, model_tag: str
    ) -> tuple[Optional[Decision], str]:
        request = ChatRequest(
            system_prompt=prompts.SYSTEM_PROMPTS[name],
            user_prompt=user_prompt,
            model_tag=model_tag,
        )
        reply = gateway.chat(request)
        try:
            return parse_decision(reply), reply
        except UnparseableDecision:
            pass
        reply = gateway.chat(
            ChatRequest(
                system_prompt=request.system_prompt,
                user_prompt=user_prompt + _REPROMPT_SUFFIX,
                model_tag=model_tag,
            )
        )
        try:
            return parse_decision(reply), reply
        except UnparseableDecision:
            log.warning("judge reply unparseable twice at stage %s", name)
            return None, reply

    def judge_relevance(
        self, post: FlaggedPost, chunks: Sequence[EvidenceChunk]
    ) -> tuple[StageVerdict, str]:
        """PASS iff at least one snippet adds meaningful factual background.
        Cached per (post, evidence digest); first writer wins."""
        if not chunks:
            raise ValueError("chunks must be non-empty")
        key = (post.post_id, evidence_digest(chunks))
        cached = self._relevance_cache.get(key)
        if cached is not None:
            return cached
        decision, reply = self._decide(
            self.relevance_gateway,
            "relevance",
            prompts.render_relevance(post.text, chunks),
            self.relevance_model,
        )
        verdict = StageVerdict.PASS if decision is Decision.YES else StageVerdict.FAIL
        with self._cache_lock:
            result = self._relevance_cache.setdefault(key, (verdict, reply))
        return result

    def judge_correctness(
        self, note_text: str, chunks: Sequence[EvidenceChunk]
    ) -> tuple[StageVerdict, str]:
        """The prompt asks whether the note DISTORTS the sources, so the
        parsed decision is inverted: no distortion -> PASS."""
        decision, reply = self._decide(
            self.correctness_gateway,
            "correctness",
            prompts.render_correctness(note_text, chunks),
            self.correctness_model,
        )
        verdict = StageVerdict.PASS if decision is Decision.NO else StageVerdict.FAIL
        return verdict, reply

    def judge_helpfulness(
        self, post_text: str, note_text: str
    ) -> tuple[StageVerdict, str]:
        decision, reply = self._decide(
            self.helpfulness_gateway,
            "helpfulness",
            prompts.render_helpfulness(post_text, note_text),
            self.helpfulness_model,
        )
        verdict = StageVerdict.PASS if decision is Decision.YES else StageVerdict.FAIL
        return verdict, reply

    def evaluate(self, sample: EvalSample) -> EvalOutcome:
        """Run the chain with strict gating; at most 3 chat-backed stages,
        only 1 when relevance fails."""
        transcripts: list[tuple[str, str]] = []
        relevance, reply = self.judge_relevance(sample.post, sample.chunks)
        transcripts.append(("relevance", reply))
        correctness = StageVerdict.NOT_EVALUATED
        helpfulness = StageVerdict.NOT_EVALUATED
        if relevance is StageVerdict.PASS:
            correctness, reply = self.judge_correctness(
                sample.note_text_full, sample.chunks
            )
            transcripts.append(("correctness", reply))
            if correctness is StageVerdict.PASS:
                helpfulness, reply = self.judge_helpfulness(
                    sample.post.text, sample.note_text_display
                )
                transcripts.append(("helpfulness", reply))
        return EvalOutcome(
            sample_id=sample.sample_id,
            relevance=relevance,
            correctness=correctness,
            helpfulness=helpfulness,
            stage_transcripts=tuple(transcripts),
        )


class PairwiseResult(str, Enum):
    WIN = "WIN"    # machine evidence preferred
    LOSE = "LOSE"  # human evidence preferred
    TIE = "TIE"


@dataclass(frozen=True)
class PairwiseOutcome:
    post_id: str
    result: PairwiseResult
    rationale: str
    machine_shown_as: str  # "A" or "B"
    seed: int


_VERDICT_LINE_RE = re.compile(r"^\W*(A|B|TIE)\W*$", re.IGNORECASE)


def _parse_pairwise(reply: str) -> Optional[str]:
    for line in reversed(reply.splitlines()):
        if not line.strip():
            continue
        m = _VERDICT_LINE_RE.match(line.strip())
        return m.group(1).upper() if m else None
    return None


def compare_evidence(
    post: FlaggedPost,
    human: Sequence[EvidenceRef],
    machine: Sequence[EvidenceRef],
    gateway: Gateway,
    model_tag: str,
    seed: int = 0,
) -> PairwiseOutcome:
    """Pairwise utility comparison of machine vs human evidence.

    Presentation order of the two lists is randomized from the recorded
    seed to counter position bias; an unparseable verdict gets one
    reprompt, then degrades to TIE."""
    if not human or not machine:
        raise ValueError("both evidence lists must be non-empty")
    order_key = hashlib.sha256(f"{seed}\x1f{post.post_id}".encode("utf-8")).digest()
    machine_is_a = random.Random(order_key).random() < 0.5
    list_a, list_b = (machine, human) if machine_is_a else (human, machine)
    user_prompt = prompts.render_evidence_compare(post.text, list_a, list_b)
    request = ChatRequest(
        system_prompt=prompts.SYSTEM_PROMPTS["evidence_compare"],
        user_prompt=user_prompt,
        model_tag=model_tag,
    )
    reply = gateway.chat(request)
    verdict = _parse_pairwise(reply)
    if verdict is None:
        reply = gateway.chat(
            ChatRequest(
                system_prompt=request.system_prompt,
                user_prompt=user_prompt
                + "\n\nReminder: the final line must be exactly A, B, or TIE.",
                model_tag=model_tag,
            )
        )
        verdict = _parse_pairwise(reply)
        if verdict is None:
            log.warning("pairwise verdict unparseable twice for post %s", post.post_id)
            verdict = "TIE"
    if verdict == "TIE":
        result = PairwiseResult.TIE
    elif (verdict == "A") == machine_is_a:
        result = PairwiseResult.WIN
    else:
        result = PairwiseResult.LOSE
    return PairwiseOutcome(
        post_id=post.post_id,
        result=result,
        rationale=reply,
        machine_shown_as="A" if machine_is_a else "B",
        seed=seed,
    )
