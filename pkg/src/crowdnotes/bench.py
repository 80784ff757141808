"""Benchmark orchestration: dataset loading, run modes over samples,
cumulative stage-metric aggregation, and deterministic report emission.

Reported percentages are cumulative survival rates: C counts samples
passing relevance AND correctness, H all three stages. Denominators stay
fixed at subset size; per-sample failures gate to relevance FAIL instead
of being excluded.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Optional, Sequence

from . import prompts
from .domain import (
    EvidenceRef,
    FlaggedPost,
    NoteRecord,
    NoteStatus,
    Provenance,
    RunConfig,
    RunMode,
    TimeCutoff,
    normalize_url,
    parse_status,
    parse_timestamp,
)
from .errors import CrowdNotesError, EmptyDataset, SchemaError
from .evidence import (
    build_pool,
    generate_queries,
    select_by_utility,
    single_query_plan,
    take_first,
)
from .gateway import Gateway
from .judge import EvalOutcome, EvalSample, JudgeChain, PairwiseOutcome, StageVerdict
from .notegen import compute_budget, finalize_note, generate_note, truncate_to_budget
from .retrieval import retrieve_evidence_chunks


@dataclass(frozen=True)
class BenchSample:
    note_id: str
    post: FlaggedPost
    human_note: NoteRecord
    subset: NoteStatus
    topic: str = ""

    def __post_init__(self):
        if self.human_note.status is not self.subset:
            raise ValueError("human note status must match subset")
        if not self.human_note.urls:
            raise ValueError("benchmark samples retain all valid evidence URLs")


@dataclass(frozen=True)
class DatasetLoadResult:
    samples: tuple[BenchSample, ...]
    errors: tuple[tuple[int, str], ...]  # (line number, message)


def load_dataset(path: str | Path) -> DatasetLoadResult:
    """Read line-delimited benchmark records, validating each line.

    Schema per line: {note_id, post_id, post_text, post_created_at,
    note_text, note_created_at, urls[], status, topic?}. Invalid lines are
    reported with their line numbers; valid samples still load.
    """
    path = Path(path)
    samples: list[BenchSample] = []
    errors: list[tuple[int, str]] = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                samples.append(_parse_record(line))
            except (SchemaError, CrowdNotesError, ValueError, KeyError) as exc:
                errors.append((line_no, str(exc)))
    if not samples:
        raise EmptyDataset(f"no valid samples in {path}")
    return DatasetLoadResult(samples=tuple(samples), errors=tuple(errors))


def _parse_record(line: str) -> BenchSample:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    for key in ("note_id", "post_id", "post_text", "post_created_at",
                "note_text", "note_created_at", "urls", "status"):
        if key not in obj:
            raise SchemaError(f"missing field {key!r}")
    status = parse_status(obj["status"])
    urls = tuple(EvidenceRef(url=normalize_url(u)) for u in obj["urls"])
    if not urls:
        raise SchemaError("urls must be non-empty")
    post = FlaggedPost(
        post_id=str(obj["post_id"]),
        text=obj["post_text"],
        created_at=parse_timestamp(obj["post_created_at"]),
    )
    note = NoteRecord(
        note_id=str(obj["note_id"]),
        post_id=post.post_id,
        text=obj["note_text"],
        urls=urls,
        created_at=parse_timestamp(obj["note_created_at"]),
        provenance=Provenance.HUMAN,
        status=status,
    )
    return BenchSample(
        note_id=note.note_id,
        post=post,
        human_note=note,
        subset=status,
        topic=str(obj.get("topic", "")),
    )


@dataclass(frozen=True)
class LedgerEntry:
    note_id: str
    stage: str
    error: str


@dataclass(frozen=True)
class RunResult:
    outcomes: tuple[EvalOutcome, ...]  # sorted by sample id
    ledger: tuple[LedgerEntry, ...]


@dataclass
class ModelRoles:
    """Model tags for the generation-side chat calls."""

    generator: str = "generator"
    query_planner: str = "query-planner"
    utility_selector: str = "utility-selector"


def _failed_outcome(sample_id: str) -> EvalOutcome:
    return EvalOutcome(
        sample_id=sample_id,
        relevance=StageVerdict.FAIL,
        correctness=StageVerdict.NOT_EVALUATED,
        helpfulness=StageVerdict.NOT_EVALUATED,
    )


def _acquire_evidence(
    sample: BenchSample, config: RunConfig, gateway: Gateway, models: ModelRoles
) -> tuple[EvidenceRef, ...]:
    mode = config.mode
    if mode in (RunMode.HUMAN_BASELINE, RunMode.AUGMENT):
        return sample.human_note.urls
    if mode is RunMode.AUTOMATE:
        plan = generate_queries(sample.post, config.num_queries, gateway, models.query_planner)
    else:  # both degraded variants drop query diversity
        plan = single_query_plan(sample.post)
    cutoff = (
        sample.human_note.created_at
        if config.time_cutoff is TimeCutoff.NOTE_CREATION
        else None
    )
    pool = build_pool(plan, config.top_k, gateway, cutoff=cutoff)
    quota = config.tau if config.tau is not None else len(sample.human_note.urls)
    if mode is RunMode.AUTOMATE_NO_UTILITY:
        selection = take_first(pool, quota)
    else:
        selection = select_by_utility(
            sample.post, pool, quota, gateway, models.utility_selector
        )
    return selection.items


def _run_sample(
    sample: BenchSample,
    config: RunConfig,
    gateway: Gateway,
    judges: JudgeChain,
    models: ModelRoles,
) -> tuple[EvalOutcome, list[LedgerEntry]]:
    ledger: list[LedgerEntry] = []
    try:
        refs = _acquire_evidence(sample, config, gateway, models)
        result = retrieve_evidence_chunks(sample.post, refs, config, gateway)
        for skip in result.skipped:
            ledger.append(LedgerEntry(sample.note_id, "retrieval", f"skipped {skip.url}: {skip.reason}"))
        chunks = result.chunks

        if config.mode is RunMode.HUMAN_BASELINE:
            full_text = sample.human_note.text
            budget = compute_budget(
                config.char_limit, len(sample.human_note.urls), config.url_char_cost
            )
            display_text, _ = truncate_to_budget(full_text, budget)
        else:
            provenance = (
                Provenance.AUGMENTED
                if config.mode is RunMode.AUGMENT
                else Provenance.AUTOMATED
            )
            budget = compute_budget(config.char_limit, len(refs), config.url_char_cost)
            full_text = generate_note(
                sample.post, chunks, budget, gateway, models.generator
            )
            note = finalize_note(
                full_text,
                refs,
                config.char_limit,
                post_id=sample.post.post_id,
                provenance=provenance,
                url_char_cost=config.url_char_cost,
            )
            display_text = note.text

        outcome = judges.evaluate(
            EvalSample(
                sample_id=sample.note_id,
                post=sample.post,
                chunks=chunks,
                note_text_full=full_text,
                note_text_display=display_text,
            )
        )
        return outcome, ledger
    except CrowdNotesError as exc:
        ledger.append(LedgerEntry(sample.note_id, "pipeline", f"{type(exc).__name__}: {exc}"))
        return _failed_outcome(sample.note_id), ledger


def run_mode(
    samples: Sequence[BenchSample],
    config: RunConfig,
    gateway: Gateway,
    judges: JudgeChain,
    models: Optional[ModelRoles] = None,
    parallelism: int = 1,
) -> RunResult:
    """Evaluate every sample under one run mode; never aborts the batch."""
    models = models or ModelRoles()
    ordered = sorted(samples, key=lambda s: s.note_id)
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(
                pool.map(
                    lambda s: _run_sample(s, config, gateway, judges, models), ordered
                )
            )
    else:
        results = [_run_sample(s, config, gateway, judges, models) for s in ordered]
    outcomes = tuple(outcome for outcome, _ in results)
    ledger = tuple(entry for _, entries in results for entry in entries)
    return RunResult(outcomes=outcomes, ledger=ledger)


@dataclass(frozen=True)
class SubsetMetrics:
    n: int
    r_pct: float
    c_pct: float
    h_pct: float

    def __post_init__(self):
        if not self.r_pct >= self.c_pct >= self.h_pct:
            raise ValueError("cumulative rates must be non-increasing")


@dataclass(frozen=True)
class StageMetrics:
    per_subset: dict[NoteStatus, SubsetMetrics]
    overall_h: float


def _pct(k: int, n: int) -> float:
    if n == 0:
        return 0.0
    value = (Decimal(k) * 100) / Decimal(n)
    return float(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def aggregate(
    outcomes: Sequence[EvalOutcome], samples: Sequence[BenchSample]
) -> StageMetrics:
    """Cumulative survival rates per subset, rounded half-up to 2 decimals;
    overall helpfulness is the macro mean of the subset rates."""
    subset_of = {s.note_id: s.subset for s in samples}
    tallies: dict[NoteStatus, list[int]] = {}
    counts: dict[NoteStatus, int] = {}
    for outcome in outcomes:
        subset = subset_of[outcome.sample_id]
        counts[subset] = counts.get(subset, 0) + 1
        t = tallies.setdefault(subset, [0, 0, 0])
        r = outcome.relevance is StageVerdict.PASS
        c = r and outcome.correctness is StageVerdict.PASS
        h = c and outcome.helpfulness is StageVerdict.PASS
        t[0] += r
        t[1] += c
        t[2] += h
    per_subset = {
        subset: SubsetMetrics(
            n=counts[subset],
            r_pct=_pct(t[0], counts[subset]),
            c_pct=_pct(t[1], counts[subset]),
            h_pct=_pct(t[2], counts[subset]),
        )
        for subset, t in tallies.items()
    }
    if per_subset:
        total = sum(Decimal(str(m.h_pct)) for m in per_subset.values())
        overall = float(
            (total / len(per_subset)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
        )
    else:
        overall = 0.0
    return StageMetrics(per_subset=per_subset, overall_h=overall)


_SUBSET_ORDER = (NoteStatus.HELPFUL, NoteStatus.NOT_HELPFUL)


def emit_report(
    metrics: StageMetrics,
    result: RunResult,
    config: RunConfig,
    out_dir: str | Path,
    cassette_path: Optional[str | Path] = None,
    seed: int = 0,
    pairwise: Optional[Sequence[PairwiseOutcome]] = None,
) -> dict[str, Path]:
    """Write metrics CSV, run manifest, error ledger, and (optionally) the
    pairwise-comparison CSV. Output bytes depend only on the inputs, so
    replayed runs produce identical files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, Path] = {}

    metrics_path = out / "metrics.csv"
    with metrics_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subset", "n", "relevance_pct", "correctness_pct", "helpfulness_pct"])
        for subset in _SUBSET_ORDER:
            m = metrics.per_subset.get(subset)
            if m is None:
                continue
            writer.writerow(
                [subset.value, m.n, f"{m.r_pct:.2f}", f"{m.c_pct:.2f}", f"{m.h_pct:.2f}"]
            )
        writer.writerow(["OVERALL", "", "", "", f"{metrics.overall_h:.2f}"])
    files["metrics"] = metrics_path

    ledger_path = out / "ledger.jsonl"
    with ledger_path.open("w", encoding="utf-8") as fh:
        for entry in result.ledger:
            fh.write(
                json.dumps(
                    {"note_id": entry.note_id, "stage": entry.stage, "error": entry.error},
                    sort_keys=True,
                    ensure_ascii=False,
                )
                + "\n"
            )
    files["ledger"] = ledger_path

    cassette_digest = None
    if cassette_path is not None and Path(cassette_path).exists():
        cassette_digest = hashlib.sha256(Path(cassette_path).read_bytes()).hexdigest()
    manifest = {
        "config": {
            "mode": config.mode.value,
            "tau": "auto" if config.tau is None else config.tau,
            "num_queries": config.num_queries,
            "top_k": config.top_k,
            "chunk_size": config.chunk_size,
            "chunk_overlap": config.chunk_overlap,
            "char_limit": config.char_limit,
            "url_char_cost": config.url_char_cost,
            "time_cutoff": config.time_cutoff.value,
        },
        "seed": seed,
        "cassette_digest": cassette_digest,
        "prompt_versions": dict(sorted(prompts.VERSIONS.items())),
        "n_outcomes": len(result.outcomes),
        "n_ledger_entries": len(result.ledger),
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    files["manifest"] = manifest_path

    if pairwise is not None:
        pairwise_path = out / "pairwise.csv"
        n = len(pairwise)
        wins = sum(p.result.value == "WIN" for p in pairwise)
        loses = sum(p.result.value == "LOSE" for p in pairwise)
        ties = sum(p.result.value == "TIE" for p in pairwise)
        with pairwise_path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["win_pct", "lose_pct", "tie_pct", "n"])
            writer.writerow(
                [f"{_pct(wins, n):.2f}", f"{_pct(loses, n):.2f}", f"{_pct(ties, n):.2f}", n]
            )
        files["pairwise"] = pairwise_path

    return files
