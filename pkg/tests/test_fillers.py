from __future__ import annotations

import pytest

from semifact.errors import ProtocolError, TransportError
from semifact.fillers import (
    FillCandidate,
    MaskQuery,
    build_unigram_filler,
    connect_external_filler,
)

from helpers import BIO2_SCHEME, http_stub, make_dataset, random_dataset


def all_outside(*texts: str):
    return [(t, "O") for t in texts]


class TestMaskQuery:
    def test_rejects_bad_top_k(self):
        with pytest.raises(ValueError):
            MaskQuery(("a", "b"), (0,), top_k=0)

    def test_rejects_out_of_bounds(self):
        with pytest.raises(ValueError):
            MaskQuery(("a", "b"), (2,), top_k=1)

    def test_rejects_non_increasing(self):
        with pytest.raises(ValueError):
            MaskQuery(("a", "b", "c"), (1, 1), top_k=1)

    def test_two_positions_must_be_contiguous(self):
        with pytest.raises(ValueError):
            MaskQuery(("a", "b", "c"), (0, 2), top_k=1)
        MaskQuery(("a", "b", "c"), (1, 2), top_k=1)

    def test_exclude_must_align(self):
        with pytest.raises(ValueError):
            MaskQuery(("a", "b"), (0,), top_k=1, exclude=("a", "b"))

    def test_candidate_rejects_whitespace(self):
        with pytest.raises(ValueError):
            FillCandidate("two words", 1.0)


class TestUnigramFiller:
    def test_equal_scores_from_symmetric_corpus(self):
        # bigram counts by hand: cat and dog both score
        # count(the,w)=1 + count(w,sat)=1 + 0.1*count(w)=0.1 -> 2.1
        d = make_dataset(
            "x",
            [all_outside("the", "cat", "sat"), all_outside("the", "dog", "sat")],
            BIO2_SCHEME,
        )
        filler = build_unigram_filler(d)
        query = MaskQuery(("the", "unseen", "sat"), (1,), top_k=4)
        candidates = filler.fill(query)[0]
        by_token = {c.token: c.score for c in candidates}
        assert by_token["cat"] == pytest.approx(2.1)
        assert by_token["dog"] == pytest.approx(2.1)
        assert candidates[0].token == "cat"  # lexicographic among equals
        assert candidates[1].token == "dog"

    def test_top_one_follows_bigram_evidence(self):
        # "rate" is the only O token ever following "heart"
        d = make_dataset(
            "x",
            [
                all_outside("the", "heart", "rate"),
                all_outside("a", "heart", "rate"),
                all_outside("the", "beat", "is"),
            ],
            BIO2_SCHEME,
        )
        filler = build_unigram_filler(d)
        query = MaskQuery(("my", "heart", "beat"), (2,), top_k=1, exclude=("beat",))
        candidates = filler.fill(query)[0]
        assert candidates[0].token == "rate"

    def test_masked_token_never_returned(self):
        d = random_dataset(BIO2_SCHEME, 30, seed=8)
        filler = build_unigram_filler(d)
        for s in d.sentences[:10]:
            texts = tuple(s.texts())
            for i in range(len(texts)):
                for per_position in filler.fill(MaskQuery(texts, (i,), top_k=5)):
                    assert all(c.token != texts[i] for c in per_position)

    def test_exclusion_list_respected(self):
        d = make_dataset(
            "x", [all_outside("a", "b"), all_outside("a", "c")], BIO2_SCHEME
        )
        filler = build_unigram_filler(d)
        query = MaskQuery(("a", "b"), (1,), top_k=5, exclude=("c",))
        tokens = [c.token for c in filler.fill(query)[0]]
        assert "c" not in tokens
        assert "b" not in tokens  # current token is always excluded

    def test_candidates_restricted_to_outside_vocabulary(self):
        d = make_dataset(
            "x", [[("Jane", "B-PER"), ("sat", "O"), ("down", "O")]], BIO2_SCHEME
        )
        filler = build_unigram_filler(d)
        tokens = [c.token for c in filler.fill(MaskQuery(("Jane", "sat", "down"), (1,), top_k=10))[0]]
        assert "Jane" not in tokens
        assert set(tokens) <= {"sat", "down"}

    def test_entity_only_corpus_yields_empty_candidates(self):
        d = make_dataset("x", [[("Jane", "B-PER"), ("Doe", "I-PER")]], BIO2_SCHEME)
        filler = build_unigram_filler(d)
        assert filler.fill(MaskQuery(("Jane", "Doe"), (0,), top_k=3)) == [[]]

    def test_top_k_caps_output(self):
        d = random_dataset(BIO2_SCHEME, 40, seed=3)
        filler = build_unigram_filler(d)
        out = filler.fill(MaskQuery(("alpha", "bravo", "carbon"), (1,), top_k=1))
        assert len(out[0]) <= 1

    def test_sorted_by_non_increasing_score(self):
        d = random_dataset(BIO2_SCHEME, 40, seed=3)
        filler = build_unigram_filler(d)
        for i in range(3):
            for per_position in filler.fill(MaskQuery(("alpha", "bravo", "carbon"), (i,), top_k=50)):
                scores = [c.score for c in per_position]
                assert scores == sorted(scores, reverse=True)

    def test_deterministic(self):
        d = random_dataset(BIO2_SCHEME, 40, seed=3)
        query = MaskQuery(("alpha", "bravo", "carbon"), (1,), top_k=10)
        assert build_unigram_filler(d).fill(query) == build_unigram_filler(d).fill(query)

    def test_two_position_query_fills_both(self):
        d = random_dataset(BIO2_SCHEME, 40, seed=3)
        filler = build_unigram_filler(d)
        out = filler.fill(MaskQuery(("alpha", "bravo", "carbon", "delta"), (1, 2), top_k=2))
        assert len(out) == 2

    def test_wider_context_window_counts_longer_pairs(self):
        d = make_dataset(
            "x",
            [all_outside("sun", "warm", "sand"), all_outside("sun", "cool", "rock")],
            BIO2_SCHEME,
        )
        narrow = build_unigram_filler(d, context_window=1)
        wide = build_unigram_filler(d, context_window=2)
        # at distance 2 from "sun", sand/rock gain a pair count under the
        # wide window that the narrow window cannot see
        query = MaskQuery(("sun", "warm", "unseen"), (2,), top_k=6)
        narrow_scores = {c.token: c.score for c in narrow.fill(query)[0]}
        wide_scores = {c.token: c.score for c in wide.fill(query)[0]}
        assert wide_scores["sand"] > narrow_scores["sand"]

    def test_empty_dataset_rejected(self):
        from semifact.corpus import Dataset

        with pytest.raises(ValueError):
            build_unigram_filler(Dataset("x", (), BIO2_SCHEME))


class TestExternalFiller:
    def test_well_formed_response(self):
        def handler(path, payload):
            assert path == "/fill"
            assert payload["tokens"] == ["sheep", "graze"]
            return 200, {"candidates": [[{"token": "coffee", "score": 9.1}]]}

        with http_stub(handler) as url:
            filler = connect_external_filler(url)
            out = filler.fill(MaskQuery(("sheep", "graze"), (0,), top_k=1))
        assert out == [[FillCandidate("coffee", 9.1)]]

    def test_whitespace_token_is_protocol_error(self):
        def handler(path, payload):
            return 200, {"candidates": [[{"token": "two words", "score": 1.0}]]}

        with http_stub(handler) as url:
            with pytest.raises(ProtocolError):
                connect_external_filler(url).fill(MaskQuery(("a",), (0,), top_k=1))

    def test_misaligned_candidates_is_protocol_error(self):
        def handler(path, payload):
            return 200, {"candidates": []}

        with http_stub(handler) as url:
            with pytest.raises(ProtocolError):
                connect_external_filler(url).fill(MaskQuery(("a",), (0,), top_k=1))

    def test_non_json_response_is_protocol_error(self):
        def handler(path, payload):
            return 200, b"not json"

        with http_stub(handler) as url:
            with pytest.raises(ProtocolError):
                connect_external_filler(url).fill(MaskQuery(("a",), (0,), top_k=1))

    def test_http_error_status_is_protocol_error(self):
        def handler(path, payload):
            return 500, {"oops": True}

        with http_stub(handler) as url:
            with pytest.raises(ProtocolError):
                connect_external_filler(url).fill(MaskQuery(("a",), (0,), top_k=1))

    def test_connection_refused_is_transport_error(self):
        filler = connect_external_filler("http://127.0.0.1:1", timeout=0.5)
        with pytest.raises(TransportError) as err:
            filler.fill(MaskQuery(("a",), (0,), top_k=1))
        assert "127.0.0.1" in str(err.value)

    def test_excluded_token_filtered_from_response(self):
        def handler(path, payload):
            return 200, {
                "candidates": [
                    [{"token": "original", "score": 5.0}, {"token": "fresh", "score": 1.0}]
                ]
            }

        with http_stub(handler) as url:
            out = connect_external_filler(url).fill(
                MaskQuery(("original", "x"), (0,), top_k=2, exclude=("original",))
            )
        assert [c.token for c in out[0]] == ["fresh"]

    def test_results_sorted_and_capped(self):
        def handler(path, payload):
            return 200, {
                "candidates": [
                    [
                        {"token": "low", "score": 0.1},
                        {"token": "high", "score": 2.0},
                        {"token": "mid", "score": 1.0},
                    ]
                ]
            }

        with http_stub(handler) as url:
            out = connect_external_filler(url).fill(MaskQuery(("a",), (0,), top_k=2))
        assert [c.token for c in out[0]] == ["high", "mid"]
