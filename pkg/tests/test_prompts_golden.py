"""Byte-for-byte golden checks for every rendered prompt.

Regenerate with: CROWDNOTES_REGEN_GOLDENS=1 python3 -m pytest tests/test_prompts_golden.py
Any intentional template change must also bump its entry in prompts.VERSIONS.
"""

import os
from pathlib import Path

import pytest

from crowdnotes import prompts
from crowdnotes.domain import EvidenceChunk, EvidenceRef

GOLDEN_DIR = Path(__file__).parent / "goldens"

CHUNKS = (
    EvidenceChunk(
        url="https://health.example.org/flu-report",
        chunk_index=0,
        text="Seasonal influenza vaccination reduced hospitalization by 40% among adults.",
        token_span=(0, 10),
    ),
    EvidenceChunk(
        url="https://stats.example.org/coverage",
        chunk_index=2,
        text="Coverage rose to 52% in the 2023 season, the highest on record.",
        token_span=(768, 900),
    ),
)

REFS = (
    EvidenceRef(
        url="https://health.example.org/flu-report",
        title="Flu Season Report",
        snippet="Vaccination reduced hospitalization by 40%.",
    ),
    EvidenceRef(
        url="https://stats.example.org/coverage",
        title="Coverage Statistics",
        snippet="Coverage rose to 52% in 2023.",
    ),
    EvidenceRef(url="https://bare.example.org/page"),
)

TWEET = "Flu shots don't actually keep anyone out of the hospital."
NOTE = "Public-health data shows flu vaccination cut hospitalization risk by 40% in adults."

RENDERED = {
    "utility_select": lambda: prompts.render_utility_select(2, TWEET, REFS),
    "note_generate": lambda: prompts.render_note_generate(TWEET, CHUNKS, 278),
    "relevance": lambda: prompts.render_relevance(TWEET, CHUNKS),
    "correctness": lambda: prompts.render_correctness(NOTE, CHUNKS),
    "helpfulness": lambda: prompts.render_helpfulness(TWEET, NOTE),
    "query_gen": lambda: prompts.render_query_gen(TWEET, 3),
    "evidence_compare": lambda: prompts.render_evidence_compare(TWEET, REFS[:2], REFS[2:]),
}


@pytest.mark.parametrize("name", sorted(RENDERED))
def test_prompt_matches_golden(name):
    rendered = RENDERED[name]()
    path = GOLDEN_DIR / f"{name}.txt"
    if os.environ.get("CROWDNOTES_REGEN_GOLDENS"):
        GOLDEN_DIR.mkdir(exist_ok=True)
        path.write_bytes(rendered.encode("utf-8"))
    assert path.exists(), f"golden missing: regenerate with CROWDNOTES_REGEN_GOLDENS=1 ({path})"
    assert rendered.encode("utf-8") == path.read_bytes()


def test_every_asset_has_a_version_and_golden():
    assert sorted(RENDERED) == sorted(prompts.VERSIONS)
