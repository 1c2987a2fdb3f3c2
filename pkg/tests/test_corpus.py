import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuropheno.corpus import Note, ingest_csv, split_sentences, tokenize, tokenize_arrays
from neuropheno.errors import ConfigurationError, IngestionError


def write_csv(path, rows, header="note_id,text"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")


class TestIngest:
    def test_two_rows_in_order(self, tmp_path):
        path = tmp_path / "notes.csv"
        write_csv(path, ['1,"first note"', '2,"second note"'])
        notes = ingest_csv(str(path))
        assert [n.note_id for n in notes] == ["1", "2"]
        assert notes[0].text == "first note"

    def test_meta_holds_remaining_columns(self, tmp_path):
        path = tmp_path / "notes.csv"
        write_csv(path, ["7,G35,hello,extra"], header="note_id,icd10,text,comment")
        notes = ingest_csv(str(path))
        assert notes[0].meta == {"icd10": "G35", "comment": "extra"}

    def test_duplicate_id_names_offender(self, tmp_path):
        path = tmp_path / "notes.csv"
        write_csv(path, ["170,once", "170,twice"])
        with pytest.raises(IngestionError, match="170"):
            ingest_csv(str(path))

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "notes.csv"
        write_csv(path, ["1,x"], header="id,text")
        with pytest.raises(ConfigurationError, match="note_id"):
            ingest_csv(str(path))

    def test_empty_text_row_skipped_with_warning(self, tmp_path, caplog):
        path = tmp_path / "notes.csv"
        write_csv(path, ["1,real text", '2,""', "3,more text"])
        with caplog.at_level("WARNING"):
            notes = ingest_csv(str(path))
        assert [n.note_id for n in notes] == ["1", "3"]
        assert any("empty note text" in r.message for r in caplog.records)

    def test_corpus_scale_row_count(self, tmp_path):
        path = tmp_path / "big.csv"
        write_csv(path, [f"{i},note number {i}" for i in range(547)])
        assert len(ingest_csv(str(path))) == 547

    def test_rfc4180_quoting(self, tmp_path):
        path = tmp_path / "notes.csv"
        write_csv(path, ['1,"comma, inside, text"', '2,"quote "" inside"'])
        notes = ingest_csv(str(path))
        assert notes[0].text == "comma, inside, text"
        assert notes[1].text == 'quote " inside'

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            ingest_csv("/nonexistent/notes.csv")


class TestTokenize:
    def test_basic_split(self):
        assert [t.surface for t in tokenize("No sign of weakness.")] == \
            ["no", "sign", "of", "weakness"]

    def test_reflex_plus_runs(self):
        tokens = tokenize("biceps +++")
        assert [t.surface for t in tokens] == ["biceps", "+++"]
        assert (tokens[1].start, tokens[1].end) == (7, 10)

    def test_empty_input(self):
        assert tokenize("") == []

    def test_separator_only_input(self):
        assert tokenize("?!,;--") == []

    def test_plus_and_alnum_are_distinct_runs(self):
        assert [t.surface for t in tokenize("1+ 1+")] == ["1", "+", "1", "+"]

    def test_offsets_are_byte_offsets(self):
        # é is two bytes in UTF-8; the following token shifts accordingly
        tokens = tokenize("é pain")
        assert [(t.surface, t.start, t.end) for t in tokens] == [("pain", 3, 7)]

    @given(st.text(max_size=200))
    @settings(max_examples=200, deadline=None)
    def test_offset_fidelity_and_ordering(self, text):
        data = text.encode("utf-8")
        tokens = tokenize(text)
        previous_end = 0
        for t in tokens:
            assert t.start < t.end
            assert t.start >= previous_end
            previous_end = t.end
            assert data[t.start:t.end].lower() == t.surface.encode("ascii")

    @given(st.text(max_size=200))
    @settings(max_examples=100, deadline=None)
    def test_matches_regex_reference(self, text):
        # independent reference implementation of the token rules
        shadow = text.encode("utf-8").lower().decode("latin-1")
        expected = [(m.group(), m.start(), m.end())
                    for m in re.finditer(r"[a-z0-9]+|\++", shadow)]
        got = [(t.surface, t.start, t.end) for t in tokenize(text)]
        assert got == expected

    @given(st.text(max_size=200))
    @settings(max_examples=100, deadline=None)
    def test_idempotent_on_own_surfaces(self, text):
        surfaces = [t.surface for t in tokenize(text)]
        again = [t.surface for t in tokenize(" ".join(surfaces))]
        assert again == surfaces


class TestSentences:
    def test_period_boundary(self):
        tokens = split_sentences(tokenize("A. B"), "A. B")
        assert [(t.surface, t.sentence_index) for t in tokens] == [("a", 0), ("b", 1)]

    def test_newline_boundary(self):
        tokens = split_sentences(tokenize("line1\nline2"), "line1\nline2")
        assert [t.sentence_index for t in tokens] == [0, 1]

    def test_no_terminator_single_sentence(self):
        tokens = split_sentences(tokenize("all one clause here"), "all one clause here")
        assert {t.sentence_index for t in tokens} == {0}

    def test_indices_contiguous_despite_repeated_terminators(self):
        text = "A!!... B?? C"
        tokens = split_sentences(tokenize(text), text)
        assert [t.sentence_index for t in tokens] == [0, 1, 2]

    def test_leading_terminator_still_starts_at_zero(self):
        text = ". first"
        tokens = split_sentences(tokenize(text), text)
        assert tokens[0].sentence_index == 0

    @given(st.text(max_size=300))
    @settings(max_examples=100, deadline=None)
    def test_monotone_nondecreasing(self, text):
        tokens = split_sentences(tokenize(text), text)
        indices = [t.sentence_index for t in tokens]
        assert all(b - a in (0, 1) for a, b in zip(indices, indices[1:]))
        if indices:
            assert indices[0] == 0

    def test_arrays_variant_agrees(self):
        text = "No pain. Gait instability noted!\nBalance off"
        tokens = split_sentences(tokenize(text), text)
        surfaces, starts, ends, sentences = tokenize_arrays(text)
        assert surfaces == [t.surface for t in tokens]
        assert starts.tolist() == [t.start for t in tokens]
        assert ends.tolist() == [t.end for t in tokens]
        assert sentences.tolist() == [t.sentence_index for t in tokens]


def test_note_is_plain_data():
    note = Note(note_id="n1", text="hello", meta={"k": "v"})
    assert note.note_id == "n1" and note.meta["k"] == "v"
