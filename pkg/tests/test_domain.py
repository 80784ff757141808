import pytest
from hypothesis import given, strategies as st

from crowdnotes.domain import (
    EvidenceRef,
    FlaggedPost,
    NoteRecord,
    NoteStatus,
    Provenance,
    RunConfig,
    normalize_url,
    parse_status,
    parse_timestamp,
    render_status,
)
from crowdnotes.errors import MalformedUrl, UnknownStatus


class TestNormalizeUrl:
    def test_case_and_fragment(self):
        assert normalize_url("HTTPS://CDC.gov/flu#sec2") == "https://cdc.gov/flu"

    def test_tracking_strip_and_sort(self):
        assert (
            normalize_url("https://a.org/p?utm_source=x&b=2&a=1")
            == "https://a.org/p?a=1&b=2"
        )

    def test_fbclid_gclid(self):
        assert normalize_url("https://a.org/p?fbclid=1&gclid=2&x=3") == "https://a.org/p?x=3"

    def test_empty_path_gets_slash(self):
        assert normalize_url("http://a.org") == "http://a.org/"

    def test_malformed(self):
        with pytest.raises(MalformedUrl):
            normalize_url("notaurl")

    @pytest.mark.parametrize("bad", ["", "ftp://a.org/x", "//nohost", "https://"])
    def test_rejects_non_http(self, bad):
        with pytest.raises(MalformedUrl):
            normalize_url(bad)

    @given(
        st.builds(
            lambda host, path, params: "https://"
            + host
            + "/"
            + path
            + ("?" + "&".join(f"{k}={v}" for k, v in params) if params else ""),
            host=st.from_regex(r"[a-z]{1,8}\.(org|com)", fullmatch=True),
            path=st.from_regex(r"[a-z0-9/]{0,12}", fullmatch=True),
            params=st.lists(
                st.tuples(
                    st.from_regex(r"[a-z]{1,5}", fullmatch=True),
                    st.from_regex(r"[a-z0-9]{0,4}", fullmatch=True),
                ),
                max_size=4,
            ),
        )
    )
    def test_idempotent(self, url):
        once = normalize_url(url)
        assert normalize_url(once) == once


class TestStatus:
    @pytest.mark.parametrize(
        "label,expected",
        [
            ("HELPFUL", NoteStatus.HELPFUL),
            ("currently_rated_helpful", NoteStatus.HELPFUL),
            ("currently_rated_not_helpful", NoteStatus.NOT_HELPFUL),
            ("Not_Helpful", NoteStatus.NOT_HELPFUL),
        ],
    )
    def test_aliases(self, label, expected):
        assert parse_status(label) is expected

    def test_needs_more_ratings_excluded(self):
        with pytest.raises(UnknownStatus):
            parse_status("needs_more_ratings")

    @pytest.mark.parametrize("status", list(NoteStatus))
    def test_roundtrip(self, status):
        assert parse_status(render_status(status)) is status


class TestTimestamps:
    def test_epoch_seconds(self):
        assert parse_timestamp(1_600_000_000) == 1_600_000_000

    def test_millisecond_epoch_truncated(self):
        assert parse_timestamp(1_600_000_000_123) == 1_600_000_000

    def test_iso(self):
        assert parse_timestamp("1970-01-01T00:01:00Z") == 60

    def test_numeric_string(self):
        assert parse_timestamp("1600000000123") == 1_600_000_000


class TestTypes:
    def test_post_rejects_blank_text(self):
        with pytest.raises(ValueError):
            FlaggedPost(post_id="p", text="   ", created_at=0)

    def test_status_only_for_human(self):
        with pytest.raises(ValueError):
            NoteRecord(
                note_id="n",
                post_id="p",
                text="t",
                urls=(EvidenceRef(url="https://a.org/"),),
                created_at=0,
                provenance=Provenance.AUGMENTED,
                status=NoteStatus.HELPFUL,
            )

    def test_machine_note_needs_urls(self):
        with pytest.raises(ValueError):
            NoteRecord(
                note_id="n", post_id="p", text="t", urls=(),
                created_at=0, provenance=Provenance.AUTOMATED,
            )

    def test_config_validates_overlap(self):
        with pytest.raises(ValueError):
            RunConfig(chunk_size=128, chunk_overlap=128)

    def test_search_rank_positive(self):
        with pytest.raises(ValueError):
            EvidenceRef(url="https://a.org/", search_rank=0)
