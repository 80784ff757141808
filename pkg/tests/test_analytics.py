import datetime as dt
import json
import random
import statistics

import pytest

from crowdnotes.analytics import (
    DailySeries,
    daily_counts,
    delay_percentiles,
    detect_spikes,
    load_delay_pairs,
    load_posts,
    percentile,
    trending_terms,
    write_delay_csv,
    write_series_csv,
    write_spike_report,
)
from crowdnotes.domain import FlaggedPost
from crowdnotes.errors import EmptyInput

DAY = 86400
EPOCH = dt.date(1970, 1, 1)


def post_on(day_index, text="some flagged claim", pid=None):
    return FlaggedPost(
        post_id=pid or f"p{day_index}-{random.random()}",
        text=text,
        created_at=day_index * DAY + 3600,
    )


class TestDailyCounts:
    def test_counts_and_zero_neighbors(self):
        posts = [post_on(10, pid=f"a{i}") for i in range(3)]
        series = daily_counts(posts, start=EPOCH + dt.timedelta(9), end=EPOCH + dt.timedelta(11))
        assert series.counts == (0, 3, 0)

    def test_empty_range_zero_filled(self):
        series = daily_counts([], start=EPOCH, end=EPOCH + dt.timedelta(4))
        assert series.counts == (0,) * 5

    def test_month_boundary_contiguous(self):
        jan31 = dt.date(2024, 1, 31)
        feb1 = dt.date(2024, 2, 1)
        posts = [post_on((jan31 - EPOCH).days), post_on((feb1 - EPOCH).days)]
        series = daily_counts(posts)
        assert series.start == jan31
        assert series.counts == (1, 1)


def oracle_spikes(counts, window, z, min_history):
    # independent recomputation of mean/std/z per day
    flagged = []
    for i in range(len(counts)):
        prior = counts[max(0, i - window):i]
        if len(prior) < min_history:
            continue
        mu = sum(prior) / len(prior)
        var = sum((x - mu) ** 2 for x in prior) / (len(prior) - 1)
        sigma = var**0.5
        if sigma > 0 and (counts[i] - mu) / sigma > z:
            flagged.append(i)
    return flagged


class TestDetectSpikes:
    def test_single_spike_flagged(self):
        counts = [10] * 20 + [100] + [10] * 5
        counts[3] = 11  # tiny jitter so sigma > 0
        series = DailySeries(start=EPOCH, counts=tuple(counts))
        report = detect_spikes(series)
        assert [s.day for s in report.spikes] == [EPOCH + dt.timedelta(20)]
        spike = report.spikes[0]
        prior = counts[0:20]
        assert spike.rolling_mean == pytest.approx(statistics.fmean(prior))
        assert spike.rolling_std == pytest.approx(statistics.stdev(prior))
        assert spike.z_value == pytest.approx(
            (100 - statistics.fmean(prior)) / statistics.stdev(prior)
        )

    def test_flat_series_no_spikes(self):
        series = DailySeries(start=EPOCH, counts=(10,) * 40)
        assert detect_spikes(series).spikes == ()

    def test_min_history_guard(self):
        counts = [1] * 13 + [1000]
        series = DailySeries(start=EPOCH, counts=tuple(counts))
        assert detect_spikes(series).spikes == ()

    def test_matches_oracle_on_random_series(self):
        rng = random.Random(5)
        for _ in range(50):
            counts = tuple(rng.randint(0, 30) for _ in range(rng.randint(5, 90)))
            series = DailySeries(start=EPOCH, counts=counts)
            got = [(s.day - EPOCH).days for s in detect_spikes(series).spikes]
            assert got == oracle_spikes(counts, 28, 2.5, 14)

    def test_parameter_validation(self):
        series = DailySeries(start=EPOCH, counts=(1, 2))
        with pytest.raises(ValueError):
            detect_spikes(series, window=5, min_history=10)


class TestTrendingTerms:
    def test_counts(self):
        posts = [post_on(10, text="flu flu shot")]
        assert trending_terms(posts, EPOCH + dt.timedelta(10), frozenset()) == [
            ("flu", 2), ("shot", 1),
        ]

    def test_stopwords_filtered_out(self):
        posts = [post_on(10, text="the and was")]
        assert trending_terms(posts, EPOCH + dt.timedelta(10)) == []

    def test_tie_breaks_lexicographically(self):
        posts = [post_on(10, text="beta alpha")]
        assert trending_terms(posts, EPOCH + dt.timedelta(10), frozenset()) == [
            ("alpha", 1), ("beta", 1),
        ]

    def test_three_day_window(self):
        posts = [
            post_on(9, text="inside window"),
            post_on(11, text="inside window"),
            post_on(12, text="outside entirely"),
        ]
        terms = dict(trending_terms(posts, EPOCH + dt.timedelta(10), frozenset()))
        assert terms == {"inside": 2, "window": 2}

    def test_short_tokens_dropped(self):
        posts = [post_on(10, text="flu is ok xy")]
        assert trending_terms(posts, EPOCH + dt.timedelta(10), frozenset()) == [("flu", 1)]

    def test_order_invariant(self):
        posts = [post_on(10, text="alpha beta"), post_on(10, text="beta gamma")]
        assert trending_terms(posts, EPOCH + dt.timedelta(10), frozenset()) == \
            trending_terms(posts[::-1], EPOCH + dt.timedelta(10), frozenset())


HOUR = 3600


class TestDelayPercentiles:
    def test_linear_interpolation_median(self):
        pairs = [(0, h * HOUR, None) for h in (1, 2, 3, 4)]
        table = delay_percentiles(pairs)
        assert table.post_to_first_note[50] == pytest.approx(2.5)

    def test_degenerate_single_value(self):
        table = delay_percentiles([(0, int(7.2 * HOUR), None)])
        for p in (25, 50, 75, 90):
            assert table.post_to_first_note[p] == pytest.approx(7.2)

    def test_table_shape(self):
        table = delay_percentiles([(0, HOUR, 2 * HOUR), (0, 2 * HOUR, None)])
        assert sorted(table.post_to_first_note) == [25, 50, 75, 90]
        assert sorted(table.first_note_to_first_status) == [25, 50, 75, 90]
        assert table.n_pairs == 2
        assert table.n_with_status == 1

    def test_monotone_in_percentile(self):
        rng = random.Random(3)
        pairs = [(0, rng.randint(1, 10**6), None) for _ in range(50)]
        table = delay_percentiles(pairs)
        values = [table.post_to_first_note[p] for p in (25, 50, 75, 90)]
        assert values == sorted(values)

    def test_permutation_invariant(self):
        rng = random.Random(9)
        pairs = [(0, rng.randint(1, 10**6), None) for _ in range(20)]
        shuffled = pairs[:]
        rng.shuffle(shuffled)
        assert delay_percentiles(pairs) == delay_percentiles(shuffled)

    def test_note_before_post_rejected(self):
        with pytest.raises(ValueError):
            delay_percentiles([(100, 50, None)])

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            delay_percentiles([])


class TestPercentile:
    def test_against_statistics_quantiles(self):
        rng = random.Random(1)
        values = [rng.random() * 100 for _ in range(101)]
        qs = statistics.quantiles(values, n=4, method="inclusive")
        assert percentile(values, 25) == pytest.approx(qs[0])
        assert percentile(values, 50) == pytest.approx(qs[1])
        assert percentile(values, 75) == pytest.approx(qs[2])


class TestFileInterfaces:
    def test_posts_jsonl_round_trip(self, tmp_path):
        path = tmp_path / "posts.jsonl"
        path.write_text(
            json.dumps({"post_id": "p1", "text": "hello claim", "created_at": 864000})
            + "\n",
            "utf-8",
        )
        posts = load_posts(path)
        assert posts[0].post_id == "p1"
        assert posts[0].created_at == 864000

    def test_dump_tsv_with_millis(self, tmp_path):
        path = tmp_path / "notes.tsv"
        path.write_text(
            "tweetId\tsummary\tcreatedAtMillis\n"
            "t1\tsome claim text\t864000000000\n",
            "utf-8",
        )
        posts = load_posts(path)
        assert posts[0].created_at == 864000000

    def test_writers(self, tmp_path):
        series = DailySeries(start=EPOCH, counts=(1, 2))
        write_series_csv(series, tmp_path / "s.csv")
        assert "1970-01-01,1" in (tmp_path / "s.csv").read_text()

        report = detect_spikes(DailySeries(start=EPOCH, counts=(10,) * 40))
        write_spike_report(report, tmp_path / "r.json")
        payload = json.loads((tmp_path / "r.json").read_text())
        assert payload["convention"]["window_days"] == 28
        assert payload["spikes"] == []

        table = delay_percentiles([(0, int(10.4 * HOUR), int(17.6 * HOUR))])
        write_delay_csv(table, tmp_path / "d.csv")
        lines = (tmp_path / "d.csv").read_text().splitlines()
        assert lines[0] == "percentile,post_to_first_note_hours,first_note_to_first_status_hours"
        assert lines[2].startswith("50,10.4,7.2")

    def test_delay_pairs_loader(self, tmp_path):
        path = tmp_path / "delays.jsonl"
        path.write_text(
            json.dumps({"post_created_at": 0, "first_note_at": 3600}) + "\n", "utf-8"
        )
        assert load_delay_pairs(path) == [(0, 3600, None)]
