from __future__ import annotations

import logging
import random

import pytest

from semifact.corpus import (
    Dataset,
    LabelScheme,
    SchemeKind,
    Sentence,
    Token,
    convert_scheme,
    detect_scheme,
    extract_spans,
    extract_spans_from_tags,
    load_stopwords,
    parse_conll,
    remap_unseen_labels,
    sample_few_shot,
    vocab_overlap,
    write_conll,
)
from semifact.errors import LabelError, ParseError, SchemeViolationError

from helpers import (
    BIO2_SCHEME,
    BIOES_SCHEME,
    SMALL_BIO2,
    SMALL_BIOES,
    enumerate_valid_sequences,
    make_dataset,
    random_dataset,
)


class TestLabelScheme:
    def test_full_tags_order_o_first(self):
        scheme = LabelScheme(SchemeKind.BIO2, ("PER", "LOC"))
        assert scheme.full_tags == ("O", "B-PER", "I-PER", "B-LOC", "I-LOC")

    def test_bioes_prefixes(self):
        scheme = LabelScheme(SchemeKind.BIOES, ("PER",))
        assert scheme.full_tags == ("O", "B-PER", "I-PER", "E-PER", "S-PER")

    def test_rejects_duplicate_types(self):
        with pytest.raises(ValueError):
            LabelScheme(SchemeKind.BIO2, ("PER", "PER"))

    @pytest.mark.parametrize(
        "tags,valid",
        [
            (["O", "B-PER", "I-PER"], True),
            (["I-PER"], False),
            (["O", "I-PER"], False),
            (["B-PER", "I-LOC"], False),
            (["B-PER", "B-LOC"], True),
        ],
    )
    def test_bio2_validity(self, tags, valid):
        assert (SMALL_BIO2.first_violation(tags) is None) is valid

    @pytest.mark.parametrize(
        "tags,valid",
        [
            (["S-PER"], True),
            (["B-PER"], False),  # never closed
            (["B-PER", "E-PER"], True),
            (["B-PER", "I-PER", "E-PER"], True),
            (["B-PER", "O"], False),
            (["B-PER", "E-LOC"], False),
            (["O", "E-PER"], False),
            (["I-PER", "E-PER"], False),
        ],
    )
    def test_bioes_validity(self, tags, valid):
        assert (SMALL_BIOES.first_violation(tags) is None) is valid


class TestParseConll:
    def test_empty_input(self):
        d = parse_conll(b"", BIO2_SCHEME)
        assert len(d) == 0

    def test_two_block_fixture(self):
        # hand-parse: block one is a single token, block two has two tokens
        d = parse_conll(b"EU B-ORG\n\nrejects O\nGerman B-MISC\n", BIO2_SCHEME, name="fix")
        assert len(d) == 2
        assert [len(s) for s in d.sentences] == [1, 2]
        assert d.sentences[0].id == "fix-0"
        assert d.sentences[1].id == "fix-1"
        assert d.sentences[0].tokens[0] == Token("EU", "B-ORG")

    def test_docstart_skipped(self):
        data = b"-DOCSTART- -X- -X- O\n\nEU NNP I-NP B-ORG\n\n"
        d = parse_conll(data, BIO2_SCHEME)
        assert len(d) == 1
        assert d.sentences[0].tokens[0].text == "EU"

    def test_extra_columns_ignored_tag_is_last(self):
        d = parse_conll(b"EU NNP I-NP B-ORG\n", BIO2_SCHEME)
        assert d.sentences[0].tokens[0].tag == "B-ORG"

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(ParseError) as err:
            parse_conll(b"EU B-ORG\n\nlonely\n", BIO2_SCHEME)
        assert err.value.line == 3

    def test_unknown_tag_reports_line_number(self):
        with pytest.raises(LabelError) as err:
            parse_conll(b"EU B-GPE\n", BIO2_SCHEME)
        assert err.value.line == 1
        assert err.value.tag == "B-GPE"

    def test_invalid_transition_names_sentence_and_position(self):
        with pytest.raises(SchemeViolationError) as err:
            parse_conll(b"He O\nsaw O\nParis I-LOC\n", BIO2_SCHEME, name="bad")
        assert err.value.sentence_id == "bad-0"
        assert err.value.position == 2


class TestWriteConll:
    def test_empty_dataset(self):
        assert write_conll(Dataset("x", (), BIO2_SCHEME)) == b""

    def test_single_sentence_canonical_form(self):
        d = make_dataset("x", [[("EU", "B-ORG")]], BIO2_SCHEME)
        assert write_conll(d) == b"EU B-ORG\n"

    def test_write_parse_write_fixpoint(self):
        first = write_conll(parse_conll(b"EU B-ORG\n\nrejects O\nGerman B-MISC\n", BIO2_SCHEME))
        second = write_conll(parse_conll(first, BIO2_SCHEME))
        assert first == second

    def test_parse_write_round_trip_on_random_corpora(self):
        for seed in range(5):
            d = random_dataset(BIO2_SCHEME, 40, seed)
            back = parse_conll(write_conll(d), BIO2_SCHEME, name="rand")
            assert [s.texts() for s in back] == [s.texts() for s in d]
            assert [s.tags() for s in back] == [s.tags() for s in d]


class TestExtractSpans:
    def test_all_outside(self):
        d = make_dataset("x", [[("a", "O"), ("b", "O")]], BIO2_SCHEME)
        assert extract_spans(d.sentences[0]) == []

    def test_hand_chunked_fixture(self):
        tags = ["B-ORG", "O", "B-MISC", "I-MISC"]
        spans = extract_spans_from_tags(tags)
        assert [(s.entity_type, s.start, s.end) for s in spans] == [
            ("ORG", 0, 1),
            ("MISC", 2, 4),
        ]

    def test_bioes_single(self):
        assert [(s.entity_type, s.start, s.end) for s in extract_spans_from_tags(["S-LOC"])] == [
            ("LOC", 0, 1)
        ]

    def test_entity_at_sentence_end(self):
        spans = extract_spans_from_tags(["O", "B-PER", "I-PER"])
        assert [(s.entity_type, s.start, s.end) for s in spans] == [("PER", 1, 3)]


class TestConvertScheme:
    def test_single_token_becomes_s(self):
        d = make_dataset("x", [[("Paris", "B-LOC")]], SMALL_BIO2)
        out = convert_scheme(d, SMALL_BIOES)
        assert out.sentences[0].tags() == ["S-LOC"]

    def test_pair_becomes_b_e(self):
        d = make_dataset("x", [[("Jane", "B-PER"), ("Doe", "I-PER")]], SMALL_BIO2)
        out = convert_scheme(d, SMALL_BIOES)
        assert out.sentences[0].tags() == ["B-PER", "E-PER"]

    def test_round_trip_identity_over_enumerated_sequences(self):
        # every valid BIOES sequence up to length 6 survives BIOES->BIO2->BIOES
        for length in range(1, 7):
            for tags in enumerate_valid_sequences(SMALL_BIOES, length):
                d = make_dataset("x", [[(f"w{i}", t) for i, t in enumerate(tags)]], SMALL_BIOES)
                back = convert_scheme(convert_scheme(d, SMALL_BIO2), SMALL_BIOES)
                assert back.sentences[0].tags() == tags

    def test_spans_preserved_over_enumerated_sequences(self):
        for length in range(1, 7):
            for tags in enumerate_valid_sequences(SMALL_BIO2, length):
                d = make_dataset("x", [[(f"w{i}", t) for i, t in enumerate(tags)]], SMALL_BIO2)
                out = convert_scheme(d, SMALL_BIOES)
                assert extract_spans(out.sentences[0]) == extract_spans(d.sentences[0])
                out.sentences[0].validate(SMALL_BIOES)


class TestRemapUnseenLabels:
    def test_unknown_type_goes_outside(self):
        science = LabelScheme(SchemeKind.BIO2, ("protein", "PER"))
        d = make_dataset(
            "sci", [[("p53", "B-protein"), ("binds", "O"), ("Jane", "B-PER")]], science
        )
        out = remap_unseen_labels(d, BIO2_SCHEME)
        assert out.sentences[0].tags() == ["O", "O", "B-PER"]

    def test_identity_when_all_types_known(self):
        d = make_dataset("x", [[("Jane", "B-PER"), ("sat", "O")]], BIO2_SCHEME)
        out = remap_unseen_labels(d, BIO2_SCHEME)
        assert out.sentences[0].tags() == d.sentences[0].tags()

    def test_hand_case_whole_span_atomically(self):
        weird = LabelScheme(SchemeKind.BIO2, ("X", "LOC"))
        d = make_dataset(
            "x", [[("a", "B-X"), ("b", "I-X"), ("c", "O"), ("Paris", "B-LOC")]], weird
        )
        out = remap_unseen_labels(d, BIO2_SCHEME)
        assert out.sentences[0].tags() == ["O", "O", "O", "B-LOC"]

    def test_idempotent_and_never_adds_spans(self):
        rng = random.Random(11)
        mixed = LabelScheme(SchemeKind.BIO2, ("PER", "LOC", "GENE", "DRUG"))
        for i in range(30):
            d = random_dataset(mixed, 5, seed=rng.randrange(10**6), name=f"r{i}")
            once = remap_unseen_labels(d, BIO2_SCHEME)
            twice = remap_unseen_labels(once, BIO2_SCHEME)
            for a, b in zip(once.sentences, twice.sentences):
                assert a.tags() == b.tags()
            before = sum(len(extract_spans(s)) for s in d.sentences)
            after = sum(len(extract_spans(s)) for s in once.sentences)
            assert after <= before


class TestSampleFewShot:
    def test_minimal_cover_single_sentence(self):
        rows = [
            [("Jane", "B-PER"), ("Paris", "B-LOC"), ("EU", "B-ORG"), ("x", "B-MISC")],
            [("the", "O"), ("end", "O")],
        ]
        d = make_dataset("x", rows, BIO2_SCHEME)
        out = sample_few_shot(d, 1, seed=3)
        assert [s.id for s in out.sentences] == ["x-0"]

    def test_deterministic_per_seed(self):
        d = random_dataset(BIO2_SCHEME, 60, seed=5)
        a = sample_few_shot(d, 3, seed=42)
        b = sample_few_shot(d, 3, seed=42)
        assert [s.id for s in a.sentences] == [s.id for s in b.sentences]

    def test_subsequence_and_coverage(self):
        d = random_dataset(BIO2_SCHEME, 120, seed=9, min_len=4, max_len=10)
        out = sample_few_shot(d, 4, seed=1)
        original_order = [s.id for s in d.sentences]
        sampled_order = [s.id for s in out.sentences]
        assert sampled_order == [i for i in original_order if i in set(sampled_order)]
        for etype in BIO2_SCHEME.entity_types:
            support_in_pool = sum(
                1 for s in d.sentences if any(sp.entity_type == etype for sp in extract_spans(s))
            )
            support = sum(
                1 for s in out.sentences if any(sp.entity_type == etype for sp in extract_spans(s))
            )
            assert support >= min(4, support_in_pool)

    def test_unsupported_type_warns(self, caplog):
        d = make_dataset("x", [[("Jane", "B-PER"), ("sat", "O")]], BIO2_SCHEME)
        with caplog.at_level(logging.WARNING):
            out = sample_few_shot(d, 1, seed=0)
        assert len(out) == 1
        assert any("no sentence supports" in r.message for r in caplog.records)

    def test_k_must_be_positive(self):
        d = make_dataset("x", [[("Jane", "B-PER")]], BIO2_SCHEME)
        with pytest.raises(ValueError):
            sample_few_shot(d, 0, seed=0)


class TestVocabOverlap:
    def test_identical_corpora(self):
        d = random_dataset(BIO2_SCHEME, 30, seed=2)
        assert vocab_overlap(d, d, top_n=10, stopwords=frozenset()) == 1.0

    def test_disjoint_corpora(self):
        a = make_dataset("a", [[("aa", "O"), ("bb", "O")]], BIO2_SCHEME)
        b = make_dataset("b", [[("cc", "O"), ("dd", "O")]], BIO2_SCHEME)
        assert vocab_overlap(a, b, top_n=10, stopwords=frozenset()) == 0.0

    def test_symmetric(self):
        a = random_dataset(BIO2_SCHEME, 25, seed=3, name="a")
        b = random_dataset(BIO2_SCHEME, 25, seed=4, name="b")
        left = vocab_overlap(a, b, top_n=8, stopwords=frozenset())
        right = vocab_overlap(b, a, top_n=8, stopwords=frozenset())
        assert left == right

    def test_duplication_invariant(self):
        a = random_dataset(BIO2_SCHEME, 25, seed=3, name="a")
        b = random_dataset(BIO2_SCHEME, 25, seed=4, name="b")
        doubled = Dataset(
            "a2",
            tuple(
                Sentence(f"{s.id}+{rep}", s.tokens)
                for rep in range(2)
                for s in a.sentences
            ),
            BIO2_SCHEME,
        )
        base = vocab_overlap(a, b, top_n=8, stopwords=frozenset())
        assert vocab_overlap(doubled, b, top_n=8, stopwords=frozenset()) == base

    def test_stopwords_excluded_and_lowercased(self):
        a = make_dataset("a", [[("The", "O"), ("sea", "O")]], BIO2_SCHEME)
        b = make_dataset("b", [[("the", "O"), ("sky", "O")]], BIO2_SCHEME)
        with_stop = vocab_overlap(a, b, top_n=5, stopwords=frozenset({"the"}))
        without = vocab_overlap(a, b, top_n=5, stopwords=frozenset())
        assert with_stop == 0.0
        assert without > 0.0

    def test_ties_break_lexicographically(self):
        # all counts equal: top-1 must be the lexicographically first word
        a = make_dataset("a", [[("zz", "O"), ("aa", "O")]], BIO2_SCHEME)
        b = make_dataset("b", [[("aa", "O"), ("zz", "O")]], BIO2_SCHEME)
        assert vocab_overlap(a, b, top_n=1, stopwords=frozenset()) == 1.0

    def test_all_stopwords_errors(self):
        a = make_dataset("a", [[("the", "O")]], BIO2_SCHEME)
        with pytest.raises(ValueError):
            vocab_overlap(a, a, top_n=5, stopwords=frozenset({"the"}))

    def test_designed_ordering(self):
        # c shares more of a's vocabulary than b does; the ratios must order
        shared = [("rock", "O"), ("tide", "O"), ("wind", "O")]
        a = make_dataset("a", [shared + [("ash", "O"), ("bay", "O")]], BIO2_SCHEME)
        near = make_dataset("n", [shared + [("cliff", "O"), ("dune", "O")]], BIO2_SCHEME)
        far = make_dataset("f", [[("rock", "O"), ("ox", "O"), ("pine", "O"), ("quartz", "O"), ("realm", "O")]], BIO2_SCHEME)
        overlap_near = vocab_overlap(a, near, top_n=5, stopwords=frozenset())
        overlap_far = vocab_overlap(a, far, top_n=5, stopwords=frozenset())
        assert overlap_near > overlap_far


class TestStopwordsAndDetect:
    def test_load_stopwords(self, tmp_path):
        path = tmp_path / "stop.txt"
        path.write_text("The\n\nand\n", "utf-8")
        assert load_stopwords(path) == frozenset({"the", "and"})

    def test_detect_scheme_bio2(self):
        scheme = detect_scheme(b"a O\nb B-GENE\nc I-GENE\n")
        assert scheme.scheme_kind == SchemeKind.BIO2
        assert scheme.entity_types == ("GENE",)

    def test_detect_scheme_bioes(self):
        scheme = detect_scheme(b"a S-LOC\nb O\nc B-PER\nd E-PER\n")
        assert scheme.scheme_kind == SchemeKind.BIOES
        assert scheme.entity_types == ("LOC", "PER")
