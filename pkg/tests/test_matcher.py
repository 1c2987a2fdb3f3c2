import json

import numpy as np
import pytest

from neuropheno.corpus import Note, split_sentences, tokenize
from neuropheno.labels import PhenotypeLabel
from neuropheno.lexicon import Lexicon
from neuropheno.matcher import (Match, NegationConfig, PhraseMatcher,
                                apply_negation, dump_matches, find_matches,
                                note_label_vector)

GAIT = PhenotypeLabel.GAIT
PAIN = PhenotypeLabel.PAIN
WEAK = PhenotypeLabel.WEAKNESS
PARE = PhenotypeLabel.PARESTHESIAS


def analyzed(note: Note):
    return split_sentences(tokenize(note.text), note.text)


# --------------------------------------------------------------------------
# independent brute-force reference: test every phrase at every position,
# re-implementing selection and negation scoping without the automaton
# --------------------------------------------------------------------------


def brute_force(note: Note, lexicon: Lexicon, config: NegationConfig):
    tokens = analyzed(note)
    surfaces = [t.surface for t in tokens]
    sentences = [t.sentence_index for t in tokens]

    candidates = []
    for simclin in lexicon.active_simclins():
        parts = simclin.phrase.split("_")
        span = len(parts)
        for i in range(len(surfaces) - span + 1):
            if surfaces[i:i + span] == parts:
                candidates.append((i, i + span, simclin.phrase, simclin.label))

    selected = []
    for label in {c[3] for c in candidates}:
        group = [c for c in candidates if c[3] == label]
        while group:
            best = min(group, key=lambda c: (-(c[1] - c[0]), c[0]))
            selected.append(best)
            group = [c for c in group if c[1] <= best[0] or c[0] >= best[1]]

    cues = []
    for negation in lexicon.negations():
        parts = negation.phrase.split(" ")
        span = len(parts)
        for i in range(len(surfaces) - span + 1):
            if surfaces[i:i + span] == parts:
                cues.append((i, i + span, negation.position))

    out = set()
    for start_tok, end_tok, phrase, label in selected:
        negated = False
        for cue_start, cue_end, position in cues:
            if position == "pre":
                gap = start_tok - cue_end
                if 0 <= gap < config.pre_window and \
                        sentences[cue_end - 1] == sentences[start_tok]:
                    negated = True
            else:
                gap = cue_start - end_tok
                if 0 <= gap < config.post_window and \
                        sentences[cue_start] == sentences[end_tok - 1]:
                    negated = True
        out.add((tokens[start_tok].start, tokens[end_tok - 1].end,
                 label.value, phrase, negated))
    return out


def matcher_output(note: Note, lexicon: Lexicon, config: NegationConfig):
    matches, _ = PhraseMatcher(lexicon, config).match_note(note)
    return {(m.start, m.end, m.label.value, m.phrase, m.negated) for m in matches}


class TestFindMatches:
    def test_seed_phrase_covers_both_tokens(self, weakness_pain_lexicon):
        lex = weakness_pain_lexicon
        lex.add_seed("gait instability", GAIT)
        note = Note("n1", "Gait instability noted today")
        matches = find_matches(note, lex)
        gait = [m for m in matches if m.label == GAIT]
        assert len(gait) == 1
        assert note.text[gait[0].start:gait[0].end] == "Gait instability"

    def test_accepted_simclin_matches(self):
        lex = Lexicon()
        lex.decide("burning sensation", PARE, "accept")
        note = Note("n1", "complains of burning sensation in their feet")
        matches = find_matches(note, lex)
        assert len(matches) == 1
        assert matches[0].label == PARE
        assert note.text[matches[0].start:matches[0].end] == "burning sensation"

    def test_rejected_simclins_do_not_match(self):
        lex = Lexicon()
        lex.decide("burning sensation", PARE, "reject")
        assert find_matches(Note("n1", "burning sensation here"), lex) == []

    def test_longest_match_wins(self):
        lex = Lexicon()
        lex.add_seed("weakness", WEAK)
        lex.add_seed("right sided weakness", WEAK)
        matches = find_matches(Note("n1", "right sided weakness"), lex)
        assert [m.phrase for m in matches] == ["right_sided_weakness"]

    def test_longest_then_leftmost(self):
        lex = Lexicon()
        lex.add_seed("arm pain", PAIN)
        lex.add_seed("pain flare", PAIN)
        matches = find_matches(Note("n1", "arm pain flare"), lex)
        assert [m.phrase for m in matches] == ["arm_pain"]

    def test_labels_resolve_overlaps_independently(self):
        lex = Lexicon()
        lex.add_seed("burning pain", PAIN)
        lex.add_seed("burning", PARE)
        matches = find_matches(Note("n1", "burning pain"), lex)
        assert {(m.label.value, m.phrase) for m in matches} == \
            {("pain", "burning_pain"), ("paresthesias", "burning")}

    def test_token_boundaries_prevent_substring_hits(self):
        lex = Lexicon()
        lex.add_seed("pain", PAIN)
        assert find_matches(Note("n1", "Trip to Spain was painless"), lex) == []

    def test_case_insensitive(self):
        lex = Lexicon()
        lex.add_seed("weakness", WEAK)
        assert len(find_matches(Note("n1", "WEAKNESS"), lex)) == 1

    def test_underscore_matches_across_any_separator(self):
        lex = Lexicon()
        lex.add_seed("gait instability", GAIT)
        assert len(find_matches(Note("n1", "gait, instability"), lex)) == 1

    def test_matches_reported_in_text_order(self):
        lex = Lexicon()
        lex.add_seed("pain", PAIN)
        lex.add_seed("weakness", WEAK)
        matches = find_matches(Note("n1", "weakness then pain then weakness"), lex)
        assert [m.start for m in matches] == sorted(m.start for m in matches)

    def test_insertion_order_does_not_change_output(self):
        phrases = [("weakness", WEAK), ("right sided weakness", WEAK),
                   ("pain", PAIN), ("arm pain", PAIN)]
        note = Note("n1", "right sided weakness with arm pain and pain")
        results = []
        for ordering in (phrases, phrases[::-1]):
            lex = Lexicon()
            for phrase, label in ordering:
                lex.add_seed(phrase, label)
            results.append({(m.start, m.end, m.label.value, m.phrase)
                            for m in find_matches(note, lex)})
        assert results[0] == results[1]

    def test_find_matches_reports_unnegated(self, weakness_pain_lexicon):
        matches = find_matches(Note("n1", "no weakness"), weakness_pain_lexicon)
        assert [m.negated for m in matches] == [False]


class TestNegation:
    def assert_negated(self, text, lexicon, expectations):
        note = Note("n1", text)
        matches = find_matches(note, lexicon)
        negated = apply_negation(matches, analyzed(note), lexicon, NegationConfig())
        got = {(m.phrase, m.negated) for m in negated}
        assert got == expectations

    def test_pre_negation_phrase(self, weakness_pain_lexicon):
        self.assert_negated("no sign of weakness", weakness_pain_lexicon,
                            {("weakness", True)})

    def test_post_negation(self, weakness_pain_lexicon):
        self.assert_negated("weakness negative", weakness_pain_lexicon,
                            {("weakness", True)})

    def test_plain_report_not_negated(self, weakness_pain_lexicon):
        self.assert_negated("patient reports weakness", weakness_pain_lexicon,
                            {("weakness", False)})

    def test_sentence_boundary_blocks_scope(self, weakness_pain_lexicon):
        self.assert_negated("no pain. weakness persists", weakness_pain_lexicon,
                            {("pain", True), ("weakness", False)})

    def test_pre_window_is_token_bounded(self, weakness_pain_lexicon):
        # 5 intervening tokens > pre_window-1 = 4 -> out of scope
        self.assert_negated("no history at all of any weakness",
                            weakness_pain_lexicon, {("weakness", False)})
        # 4 intervening tokens -> in scope
        self.assert_negated("no history at all of weakness",
                            weakness_pain_lexicon, {("weakness", True)})

    def test_post_window_is_token_bounded(self, weakness_pain_lexicon):
        self.assert_negated("weakness was at baseline absent",
                            weakness_pain_lexicon, {("weakness", False)})
        self.assert_negated("weakness was currently absent",
                            weakness_pain_lexicon, {("weakness", True)})

    def test_windows_configurable(self, weakness_pain_lexicon):
        note = Note("n1", "no history of arm weakness")
        matches = find_matches(note, weakness_pain_lexicon)
        tight = apply_negation(matches, analyzed(note), weakness_pain_lexicon,
                               NegationConfig(pre_window=2, post_window=1))
        assert tight[0].negated is False
        wide = apply_negation(matches, analyzed(note), weakness_pain_lexicon,
                              NegationConfig(pre_window=4, post_window=1))
        assert wide[0].negated is True

    def test_negation_only_flips_flags(self, weakness_pain_lexicon):
        note = Note("n1", "no weakness and no pain")
        matches = find_matches(note, weakness_pain_lexicon)
        negated = apply_negation(matches, analyzed(note), weakness_pain_lexicon,
                                 NegationConfig())
        assert [(m.start, m.end, m.label) for m in matches] == \
            [(m.start, m.end, m.label) for m in negated]
        assert all(m.negated for m in negated)

    def test_cue_in_next_sentence_does_not_reach_back(self, weakness_pain_lexicon):
        self.assert_negated("weakness persists. negative review otherwise",
                            weakness_pain_lexicon, {("weakness", False)})


class TestVector:
    def test_no_matches_zero_vector(self):
        assert note_label_vector([]).sum() == 0

    def test_multiplicity_collapses_to_one(self):
        matches = [Match("n", WEAK, "weakness", i, i + 8) for i in (0, 20, 40)]
        vec = note_label_vector(matches)
        assert vec[WEAK.ordinal] == 1 and vec.sum() == 1

    def test_only_negated_matches_stay_zero(self):
        matches = [Match("n", WEAK, "weakness", 0, 8, negated=True)]
        assert note_label_vector(matches).sum() == 0

    def test_vector_length_and_dtype(self):
        vec = note_label_vector([])
        assert vec.shape == (19,) and vec.dtype == np.int8


class TestPlusTokens:
    def test_seed_with_plus_run_matches(self):
        lex = Lexicon()
        lex.add_seed("Numbness or tingling +", PARE)
        note = Note("n1", "Reports numbness or tingling + in both feet")
        matches = find_matches(note, lex)
        assert len(matches) == 1
        assert note.text[matches[0].start:matches[0].end] == "numbness or tingling +"

    def test_reflex_grading_phrase(self):
        lex = Lexicon()
        lex.add_seed("biceps +++", PhenotypeLabel.HYPERREFLEXIA)
        assert len(find_matches(Note("n1", "exam: biceps +++, triceps +++"), lex)) == 1
        # a longer plus-run is a different token, so no match
        assert find_matches(Note("n2", "biceps ++++"), lex) == []


class TestOracleEquivalence:
    def random_lexicon(self, rng):
        vocab = [f"word{i}" for i in range(12)]
        lex = Lexicon()
        labels = list(PhenotypeLabel)
        used = set()
        for _ in range(14):
            length = int(rng.integers(1, 4))
            phrase = " ".join(rng.choice(vocab, size=length))
            label = labels[int(rng.integers(0, len(labels)))]
            if (phrase, label) in used:
                continue
            used.add((phrase, label))
            lex.add_seed(phrase, label)
        lex.add_negation("word0", "pre")
        lex.add_negation("word1 word2", "pre")
        lex.add_negation("word3", "post")
        return vocab, lex

    def test_matches_brute_force_on_random_corpora(self):
        rng = np.random.default_rng(99)
        config = NegationConfig()
        for trial in range(25):
            vocab, lex = self.random_lexicon(rng)
            words = rng.choice(vocab + ["zetaa", "yotta"], size=int(rng.integers(5, 400)))
            text_words = []
            for w in words:
                text_words.append(w)
                if rng.random() < 0.08:
                    text_words.append(".")
            note = Note(f"trial{trial}", " ".join(text_words))
            assert matcher_output(note, lex, config) == brute_force(note, lex, config), \
                f"divergence on trial {trial}: {note.text[:120]}"

    def test_matches_brute_force_on_dense_overlaps(self):
        # two-letter alphabet: nearly every position overlaps some pattern
        from hypothesis import given, settings
        from hypothesis import strategies as st

        phrases = ["a", "b", "a b", "b a", "a b a", "b b", "a a b"]
        lex = Lexicon()
        labels = list(PhenotypeLabel)
        for i, phrase in enumerate(phrases):
            lex.add_seed(phrase, labels[i % 3])
        lex.add_negation("b b", "pre")
        lex.add_negation("a", "post")
        config = NegationConfig(pre_window=2, post_window=2)

        @given(st.lists(st.sampled_from(["a", "b", "."]), max_size=60))
        @settings(max_examples=150, deadline=None)
        def check(symbols):
            note = Note("dense", " ".join(symbols))
            assert matcher_output(note, lex, config) == brute_force(note, lex, config)

        check()


class TestCorpusApi:
    def test_rows_ordered_by_note_id(self, weakness_pain_lexicon):
        notes = [Note("b", "weakness"), Note("a", "pain"), Note("c", "nothing")]
        result = PhraseMatcher(weakness_pain_lexicon).match_corpus(notes)
        assert result.note_ids == ["a", "b", "c"]
        assert result.matrix[0, PAIN.ordinal] == 1
        assert result.matrix[1, WEAK.ordinal] == 1
        assert result.matrix[2].sum() == 0

    def test_parallel_equals_serial(self, weakness_pain_lexicon):
        rng = np.random.default_rng(3)
        words = ["weakness", "pain", "no", "negative", "stable", "exam"]
        notes = [Note(f"n{i:03d}", " ".join(rng.choice(words, size=30)))
                 for i in range(40)]
        matcher = PhraseMatcher(weakness_pain_lexicon)
        serial = matcher.match_corpus(notes, workers=1)
        parallel = matcher.match_corpus(notes, workers=3)
        assert serial.note_ids == parallel.note_ids
        assert np.array_equal(serial.matrix, parallel.matrix)
        assert serial.matches == parallel.matches

    def test_dump_matches_jsonl_schema(self, tmp_path, weakness_pain_lexicon):
        note = Note("n1", "no weakness today")
        matches, _ = PhraseMatcher(weakness_pain_lexicon).match_note(note)
        path = tmp_path / "matches.jsonl"
        with open(path, "w") as fh:
            dump_matches(matches, fh)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert rows == [{"note_id": "n1", "label": "weakness", "phrase": "weakness",
                         "start": 3, "end": 11, "negated": True}]


def test_negation_config_validates():
    with pytest.raises(Exception):
        NegationConfig(pre_window=0)


def test_matching_cost_linear_in_note_length(weakness_pain_lexicon):
    # fixed lexicon; per-token cost at 100k tokens stays within 2x of the
    # per-token cost at 1k tokens
    import time

    from neuropheno import kernels

    kernels.warmup()
    matcher = PhraseMatcher(weakness_pain_lexicon)
    rng = np.random.default_rng(12)
    words = ["alpha", "beta", "gamma", "weakness", "pain", "no", "delta"]

    def per_token_cost(n_tokens):
        text = " ".join(rng.choice(words, size=n_tokens))
        note = Note(f"len{n_tokens}", text)
        matcher.match_note(note)  # warm any lazy state
        best = min(_timed(matcher, note) for _ in range(5))
        return best / n_tokens

    def _timed(m, note):
        start = time.perf_counter()
        m.match_note(note)
        return time.perf_counter() - start

    small = per_token_cost(1_000)
    medium = per_token_cost(10_000)
    large = per_token_cost(100_000)
    assert medium <= 2.0 * small, f"10k per-token cost {medium:.2e} vs 1k {small:.2e}"
    assert large <= 2.0 * small, f"100k per-token cost {large:.2e} vs 1k {small:.2e}"
