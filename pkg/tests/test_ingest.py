import numpy as np
import pytest

from truerating import (
    MOVIELENS_FORMAT,
    DelimitedFormat,
    IngestError,
    RatingGraph,
    RatingScale,
    ingest_ground_truth,
    ingest_ratings,
    write_ratings_csv,
    write_scores_csv,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestIngestRatings:
    def test_movielens_star_scale(self, tmp_path):
        path = write(tmp_path / "r.dat", "u1::m1::5\nu1::m2::1\nu2::m1::3\n")
        g = ingest_ratings(path, scale=RatingScale(1, 5))
        weights = {(u, i): w for u, i, w in g.edges()}
        assert weights == {("u1", "m1"): 1.0, ("u1", "m2"): 0.0, ("u2", "m1"): 0.5}

    def test_timestamp_field_ignored(self, tmp_path):
        path = write(tmp_path / "r.dat", "u1::m1::5::978300760\n")
        g = ingest_ratings(path, scale=RatingScale(1, 5))
        assert list(g.edges()) == [("u1", "m1", 1.0)]

    def test_empty_file(self, tmp_path):
        g = ingest_ratings(write(tmp_path / "r.dat", ""))
        assert g.num_users == 0 and g.num_items == 0

    def test_duplicate_strict_names_line(self, tmp_path):
        path = write(tmp_path / "r.dat", "u1::m1::5\nu2::m1::3\nu1::m1::4\n")
        with pytest.raises(IngestError, match=r"r\.dat:3: duplicate"):
            ingest_ratings(path, scale=RatingScale(1, 5))

    def test_duplicate_keep_first(self, tmp_path):
        path = write(tmp_path / "r.dat", "u1::m1::5\nu1::m1::1\n")
        g = ingest_ratings(path, scale=RatingScale(1, 5), duplicate_policy="keep_first")
        assert list(g.edges()) == [("u1", "m1", 1.0)]

    def test_malformed_record_names_line(self, tmp_path):
        path = write(tmp_path / "r.dat", "u1::m1::5\nu2::m2\n")
        with pytest.raises(IngestError, match=r"r\.dat:2: expected at least 3"):
            ingest_ratings(path, scale=RatingScale(1, 5))

    def test_rating_outside_scale(self, tmp_path):
        path = write(tmp_path / "r.dat", "u1::m1::9\n")
        with pytest.raises(IngestError, match=r"r\.dat:1:.*outside scale"):
            ingest_ratings(path, scale=RatingScale(1, 5))

    def test_non_numeric_rating(self, tmp_path):
        path = write(tmp_path / "r.dat", "u1::m1::five\n")
        with pytest.raises(IngestError, match="bad rating value"):
            ingest_ratings(path, scale=RatingScale(1, 5))

    def test_unscaled_input_must_be_normalized(self, tmp_path):
        path = write(tmp_path / "r.dat", "u1::m1::3\n")
        with pytest.raises(IngestError, match=r"outside \[0, 1\]"):
            ingest_ratings(path)  # no scale given, 3 is not a weight

    def test_custom_delimiter(self, tmp_path):
        path = write(tmp_path / "r.tsv", "u1\tm1\t4\n")
        g = ingest_ratings(path, fmt=DelimitedFormat("\t"), scale=RatingScale(1, 5))
        assert list(g.edges()) == [("u1", "m1", 0.75)]

    def test_error_carries_path_and_line(self, tmp_path):
        path = write(tmp_path / "weird.dat", "u1::m1::bad\n")
        with pytest.raises(IngestError) as info:
            ingest_ratings(path, scale=RatingScale(1, 5))
        assert info.value.path.endswith("weird.dat")
        assert info.value.line == 1


class TestCanonicalCsv:
    def test_round_trip(self, tmp_path):
        g = RatingGraph.from_edges(
            [("u1", "m1", 1.0), ("u1", "m2", 0.25), ("u2", "m1", 0.5)]
        )
        path = tmp_path / "edges.csv"
        write_ratings_csv(g, path)
        again = ingest_ratings(path)
        assert set(g.edges()) == set(again.edges())

    def test_header_and_digits(self, tmp_path):
        g = RatingGraph.from_edges([("u1", "m1", 1 / 3)])
        path = tmp_path / "edges.csv"
        write_ratings_csv(g, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "user_id,item_id,weight"
        assert lines[1] == "u1,m1,0.333333333"

    def test_header_sniff_skips_scale(self, tmp_path):
        # Canonical CSV is already normalized; a stale scale flag must not
        # reinterpret the weights.
        path = write(tmp_path / "e.csv", "user_id,item_id,weight\nu1,m1,0.5\n")
        g = ingest_ratings(path, scale=RatingScale(1, 5))
        assert list(g.edges()) == [("u1", "m1", 0.5)]

    def test_write_is_deterministic(self, tmp_path):
        g = RatingGraph.from_edges([("u2", "m1", 0.5), ("u1", "m2", 0.25), ("u1", "m1", 1.0)])
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_ratings_csv(g, a)
        write_ratings_csv(g, b)
        assert a.read_bytes() == b.read_bytes()


class TestGroundTruth:
    def test_percent_scale(self, tmp_path):
        path = write(tmp_path / "t.csv", "m1,80\n")
        truth = ingest_ground_truth(path, scale=RatingScale(0, 100))
        assert truth["m1"] == pytest.approx(0.8)

    def test_header_skipped(self, tmp_path):
        path = write(tmp_path / "t.csv", "item_id,true_rating\nm1,0.4\n")
        truth = ingest_ground_truth(path)
        assert len(truth) == 1 and truth["m1"] == 0.4

    def test_empty_file(self, tmp_path):
        assert len(ingest_ground_truth(write(tmp_path / "t.csv", ""))) == 0

    def test_duplicate_id(self, tmp_path):
        path = write(tmp_path / "t.csv", "m1,0.4\nm1,0.5\n")
        with pytest.raises(IngestError, match="duplicate id"):
            ingest_ground_truth(path)

    def test_bad_value_mid_file(self, tmp_path):
        path = write(tmp_path / "t.csv", "m1,0.4\nm2,oops\n")
        with pytest.raises(IngestError, match=r"t\.csv:2"):
            ingest_ground_truth(path)

    def test_unmatched_items_retained_and_flagged(self, tmp_path):
        path = write(tmp_path / "t.csv", "m1,0.4\nghost,0.9\n")
        truth = ingest_ground_truth(path)
        assert "ghost" in truth
        assert truth.unmatched(["m1", "m2"]) == ["ghost"]

    def test_aligned_with_missing(self, tmp_path):
        truth = ingest_ground_truth(write(tmp_path / "t.csv", "m1,0.4\n"))
        values = truth.aligned(["m1", "m2"])
        assert values[0] == 0.4 and np.isnan(values[1])


class TestScoresCsv:
    def test_format(self, tmp_path):
        path = tmp_path / "bias.csv"
        write_scores_csv(path, ("user_id", "bias"), [("u1", 0.5), ("u2", -0.5)])
        assert path.read_text() == "user_id,bias\nu1,0.500000000\nu2,-0.500000000\n"

    def test_round_trips_through_truth_reader(self, tmp_path):
        path = tmp_path / "scores.csv"
        write_scores_csv(path, ("item_id", "true_rating"), [("m1", 0.123456789)])
        truth = ingest_ground_truth(path)
        assert truth["m1"] == pytest.approx(0.123456789)


class TestFormats:
    def test_default_delimiter(self):
        assert MOVIELENS_FORMAT.delimiter == "::"

    def test_empty_delimiter_rejected(self):
        with pytest.raises(ValueError):
            DelimitedFormat("")
