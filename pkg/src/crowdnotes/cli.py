"""Command-line entry point.

One binary with subcommands; config precedence is flags > environment >
defaults. Exit codes: 0 success, 1 fatal config/IO error, 2 completed with
per-sample failures (non-empty error ledger).
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click

from . import analytics
from .bench import (
    ModelRoles,
    aggregate,
    emit_report,
    load_dataset,
    run_mode,
)
from .domain import RunConfig, RunMode, TimeCutoff
from .errors import ConfigError, CrowdNotesError
from .evidence import build_pool, generate_queries, select_by_utility
from .gateway import Cassette, Gateway, GatewayMode, HttpTransport
from .judge import JudgeChain, compare_evidence

_MODE_NAMES = {
    "baseline": RunMode.HUMAN_BASELINE,
    "augment": RunMode.AUGMENT,
    "automate": RunMode.AUTOMATE,
    "automate-no-diversity": RunMode.AUTOMATE_NO_DIVERSITY,
    "automate-no-utility": RunMode.AUTOMATE_NO_UTILITY,
}


def _build_gateway(replay: Optional[str], record: Optional[str], live: bool) -> Gateway:
    if replay:
        path = Path(replay)
        if not path.exists():
            raise ConfigError(f"cassette not found: {replay}")
        return Gateway(mode=GatewayMode.REPLAY, cassette=Cassette(path))
    transport = HttpTransport.from_env()
    if record:
        return Gateway(
            mode=GatewayMode.RECORD, transport=transport, cassette=Cassette(record)
        )
    if live:
        return Gateway(mode=GatewayMode.LIVE, transport=transport)
    raise ConfigError("choose one of --replay CASSETTE, --record CASSETTE, or --live")


def _parse_tau(value: str) -> Optional[int]:
    if value.lower() == "auto":
        return None
    try:
        tau = int(value)
    except ValueError:
        raise ConfigError(f"--tau must be a positive integer or 'auto', got {value!r}")
    if tau < 1:
        raise ConfigError("--tau must be >= 1")
    return tau


def _make_config(mode: RunMode, tau, queries, top_k, char_limit, no_cutoff) -> RunConfig:
    return RunConfig(
        mode=mode,
        tau=tau,
        num_queries=queries,
        top_k=top_k,
        char_limit=char_limit,
        time_cutoff=TimeCutoff.NONE if no_cutoff else TimeCutoff.NOTE_CREATION,
    )


def _run_one_mode(ctx_params, mode: RunMode) -> int:
    data = load_dataset(ctx_params["dataset"])
    for line_no, message in data.errors:
        click.echo(f"dataset line {line_no}: {message}", err=True)
    gateway = _build_gateway(
        ctx_params["replay"], ctx_params["record"], ctx_params["live"]
    )
    config = _make_config(
        mode,
        _parse_tau(ctx_params["tau"]),
        ctx_params["queries"],
        ctx_params["top_k"],
        ctx_params["char_limit"],
        ctx_params["no_cutoff"],
    )
    judges = JudgeChain(
        relevance_gateway=gateway,
        relevance_model=ctx_params["judge_model"],
        helpfulness_model=ctx_params["helpfulness_model"],
    )
    models = ModelRoles(generator=ctx_params["model"])
    result = run_mode(
        data.samples, config, gateway, judges, models,
        parallelism=ctx_params["parallelism"],
    )
    metrics = aggregate(result.outcomes, data.samples)
    out_dir = Path(ctx_params["out"]) / mode.value.lower()
    files = emit_report(
        metrics,
        result,
        config,
        out_dir,
        cassette_path=ctx_params["replay"] or ctx_params["record"],
        seed=ctx_params["seed"],
    )
    click.echo(f"{mode.value}: overall H = {metrics.overall_h:.2f} -> {files['metrics']}")
    return 2 if result.ledger else 0


_shared_options = [
    click.option("--dataset", required=True, type=click.Path(), help="benchmark JSONL file"),
    click.option("--replay", default=None, type=click.Path(), help="replay from this cassette"),
    click.option("--record", default=None, type=click.Path(), help="record live calls into this cassette"),
    click.option("--live", is_flag=True, help="call providers without recording"),
    click.option("--tau", default="auto", show_default=True, help="evidence quota (int or 'auto' = match human URL count)"),
    click.option("--queries", default=3, show_default=True, type=int, help="diverse queries per post"),
    click.option("--top-k", default=10, show_default=True, type=int, help="search results per query"),
    click.option("--char-limit", default=280, show_default=True, type=int),
    click.option("--no-cutoff", is_flag=True, help="drop the note-creation-time search cutoff"),
    click.option("--seed", default=0, show_default=True, type=int),
    click.option("--parallelism", default=1, show_default=True, type=int),
    click.option("--out", default="out", show_default=True, type=click.Path()),
    click.option("--model", default="generator", show_default=True, help="note-generator model tag"),
    click.option("--judge-model", default="judge", show_default=True, help="relevance/correctness judge model tag"),
    click.option("--helpfulness-model", default="helpfulness-judge", show_default=True),
]


def _with_shared(f):
    for option in reversed(_shared_options):
        f = option(f)
    return f


@click.group()
def main():
    """Evidence-grounded community-note pipelines, offline-replayable."""


def _mode_command(name: str, mode: RunMode):
    @main.command(name=name, help=f"Run the {mode.value} pipeline over a dataset.")
    @_with_shared
    def _cmd(**params):
        try:
            code = _run_one_mode(params, mode)
        except (ConfigError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except CrowdNotesError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        sys.exit(code)


_mode_command("baseline", RunMode.HUMAN_BASELINE)
_mode_command("augment", RunMode.AUGMENT)
_mode_command("automate", RunMode.AUTOMATE)


@main.command(name="bench", help="Run several modes back to back.")
@click.option(
    "--mode", "modes", multiple=True,
    type=click.Choice(sorted(_MODE_NAMES)), default=("baseline",),
    show_default=True,
)
@_with_shared
def bench_cmd(modes, **params):
    worst = 0
    try:
        for name in modes:
            worst = max(worst, _run_one_mode(params, _MODE_NAMES[name]))
    except (ConfigError, OSError, CrowdNotesError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    sys.exit(worst)


@main.command(name="compare", help="Pairwise machine-vs-human evidence utility over a dataset.")
@_with_shared
def compare_cmd(**params):
    import csv as _csv

    try:
        data = load_dataset(params["dataset"])
        gateway = _build_gateway(params["replay"], params["record"], params["live"])
        config = _make_config(
            RunMode.AUTOMATE,
            _parse_tau(params["tau"]),
            params["queries"],
            params["top_k"],
            params["char_limit"],
            params["no_cutoff"],
        )
        models = ModelRoles()
        outcomes = []
        failures = 0
        for sample in sorted(data.samples, key=lambda s: s.note_id):
            try:
                plan = generate_queries(
                    sample.post, config.num_queries, gateway, models.query_planner
                )
                cutoff = (
                    sample.human_note.created_at
                    if config.time_cutoff.value == "NOTE_CREATION"
                    else None
                )
                pool = build_pool(plan, config.top_k, gateway, cutoff=cutoff)
                quota = config.tau or len(sample.human_note.urls)
                selection = select_by_utility(
                    sample.post, pool, quota, gateway, models.utility_selector
                )
                outcomes.append(
                    compare_evidence(
                        sample.post,
                        sample.human_note.urls,
                        selection.items,
                        gateway,
                        params["judge_model"],
                        seed=params["seed"],
                    )
                )
            except CrowdNotesError as exc:
                failures += 1
                click.echo(f"{sample.note_id}: {type(exc).__name__}: {exc}", err=True)
        out = Path(params["out"])
        out.mkdir(parents=True, exist_ok=True)
        path = out / "pairwise.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["post_id", "result", "machine_shown_as", "seed"])
            for o in outcomes:
                writer.writerow([o.post_id, o.result.value, o.machine_shown_as, o.seed])
        click.echo(f"wrote {path} ({len(outcomes)} comparisons)")
    except (ConfigError, OSError, CrowdNotesError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    sys.exit(2 if failures else 0)


@main.command(name="analyze", help="Spike, trending-term, and delay analytics over a post dump.")
@click.option("--posts", required=True, type=click.Path(exists=True), help="posts JSONL or dump TSV")
@click.option("--delays", default=None, type=click.Path(exists=True), help="delay-pairs JSONL")
@click.option("--window", default=analytics.SPIKE_WINDOW, show_default=True, type=int)
@click.option("--z", default=analytics.SPIKE_Z, show_default=True, type=float)
@click.option("--min-history", default=analytics.MIN_HISTORY, show_default=True, type=int)
@click.option("--out", default="out", show_default=True, type=click.Path())
def analyze_cmd(posts, delays, window, z, min_history, out):
    try:
        loaded = analytics.load_posts(posts)
        series = analytics.daily_counts(loaded)
        report = analytics.detect_spikes(
            series, window=window, z=z, min_history=min_history
        )
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        analytics.write_series_csv(series, out_dir / "daily_counts.csv")
        analytics.write_spike_report(report, out_dir / "spikes.json")
        for spike in report.spikes:
            terms = analytics.trending_terms(loaded, spike.day)[:10]
            click.echo(
                f"spike {spike.day} (z={spike.z_value:.2f}): "
                + ", ".join(t for t, _ in terms)
            )
        if delays:
            table = analytics.delay_percentiles(analytics.load_delay_pairs(delays))
            analytics.write_delay_csv(table, out_dir / "delays.csv")
        click.echo(f"wrote analytics to {out_dir}")
    except (CrowdNotesError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    sys.exit(0)


@main.command(name="record", help="Build a cassette by running a mode against live providers.")
@click.option("--mode", "mode_name", type=click.Choice(sorted(_MODE_NAMES)), default="automate", show_default=True)
@_with_shared
def record_cmd(mode_name, **params):
    if not params["record"]:
        click.echo("error: record requires --record CASSETTE", err=True)
        sys.exit(1)
    params["replay"] = None
    params["live"] = False
    try:
        code = _run_one_mode(params, _MODE_NAMES[mode_name])
    except (ConfigError, OSError, CrowdNotesError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    sys.exit(code)


if __name__ == "__main__":
    main()
