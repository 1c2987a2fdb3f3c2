"""Note ingestion and tokenization with byte-accurate offsets.

Notes come in as CSV (UTF-8, RFC-4180, header row required). Tokenization is
deliberately minimal: lower-casing is the only normalization, runs of ASCII
letters/digits form tokens, runs of ``+`` form single tokens (reflex grading
like "biceps +++" is a real signal), everything else separates. Offsets are
byte offsets into the UTF-8 encoding of the note text so that span
annotations stay bit-exact across tools.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, IngestionError

logger = logging.getLogger(__name__)

# Byte classes over the lower-cased UTF-8 bytes: 1 = ASCII letter/digit,
# 2 = '+', 0 = separator (including all non-ASCII bytes). A token is a
# maximal run of one non-zero class, so "biceps +++" yields [biceps, +++].
_BYTE_CLASS = np.zeros(256, dtype=np.int8)
_BYTE_CLASS[ord("a"):ord("z") + 1] = 1
_BYTE_CLASS[ord("0"):ord("9") + 1] = 1
_BYTE_CLASS[ord("+")] = 2

_SENTENCE_BREAK_BYTES = np.frombuffer(b".!?\n", dtype=np.uint8)


@dataclass(frozen=True, slots=True)
class Token:
    """One token with its byte span.

    ``start``/``end`` index the UTF-8 encoding of the source text;
    ``text.encode("utf-8")[start:end]`` lower-cases to ``surface``.
    """

    surface: str
    start: int
    end: int
    sentence_index: int = 0


@dataclass(slots=True)
class Note:
    """One physician note: identifier, raw text, remaining CSV columns."""

    note_id: str
    text: str
    meta: dict[str, str] = field(default_factory=dict)


def ingest_csv(path: str, id_column: str = "note_id", text_column: str = "text") -> list[Note]:
    """Read a note corpus from a CSV file.

    One Note per data row, in file order; all columns other than the id and
    text columns land in ``meta``. Rows with empty text (or an empty id) are
    rejected with a warning. A duplicate note id aborts ingestion.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for required in (id_column, text_column):
            if required not in fields:
                raise ConfigurationError(f"CSV is missing required column {required!r}")
        meta_columns = [c for c in fields if c not in (id_column, text_column)]

        notes: list[Note] = []
        seen: set[str] = set()
        for row_number, row in enumerate(reader, start=2):
            note_id = (row.get(id_column) or "").strip()
            text = row.get(text_column) or ""
            if not note_id:
                logger.warning("row %d: empty %s, row skipped", row_number, id_column)
                continue
            if not text.strip():
                logger.warning("row %d (id %s): empty note text, row skipped", row_number, note_id)
                continue
            if note_id in seen:
                raise IngestionError(f"duplicate note_id {note_id!r} at row {row_number}")
            seen.add(note_id)
            meta = {c: row.get(c) or "" for c in meta_columns}
            notes.append(Note(note_id=note_id, text=text, meta=meta))
    return notes


def tokenize(text: str) -> list[Token]:
    """Tokenize text into lower-cased tokens with byte offsets.

    Sentence indices are left at 0; run split_sentences to assign them.
    """
    surfaces, starts, ends, _ = tokenize_arrays(text)
    return [
        Token(surface, int(start), int(end))
        for surface, start, end in zip(surfaces, starts, ends)
    ]


def split_sentences(tokens: list[Token], text: str) -> list[Token]:
    """Assign sentence indices to tokens produced by tokenize on ``text``.

    The sentence counter advances after '.', '!', '?' or a newline; indices
    are renumbered to be contiguous from 0 even when terminators repeat.
    """
    if not tokens:
        return []
    data = text.encode("utf-8")
    starts = np.fromiter((t.start for t in tokens), dtype=np.int64, count=len(tokens))
    sentence_idx = _sentence_indices(data, starts)
    return [
        Token(t.surface, t.start, t.end, int(idx))
        for t, idx in zip(tokens, sentence_idx)
    ]


def tokenize_arrays(text: str) -> tuple[list[str], np.ndarray, np.ndarray, np.ndarray]:
    """Array-based tokenizer for hot paths.

    Returns (surfaces, starts, ends, sentence_index) where the numeric parts
    are numpy arrays. Equivalent to tokenize + split_sentences but avoids
    building Token objects.
    """
    data = text.encode("utf-8").lower()
    empty = np.zeros(0, dtype=np.int64)
    if not data:
        return [], empty, empty.copy(), empty.copy()
    arr = np.frombuffer(data, dtype=np.uint8)
    cls = _BYTE_CLASS[arr]
    prev = np.empty_like(cls)
    prev[0] = 0
    prev[1:] = cls[:-1]
    nxt = np.empty_like(cls)
    nxt[-1] = 0
    nxt[:-1] = cls[1:]
    inside = cls != 0
    starts_arr = np.nonzero(inside & (cls != prev))[0]
    ends_arr = np.nonzero(inside & (cls != nxt))[0] + 1
    if len(starts_arr) == 0:
        return [], empty, empty.copy(), empty.copy()
    # latin-1 decoding is byte-transparent, so str indices == byte offsets.
    shadow = data.decode("latin-1")
    surfaces = [shadow[s:e] for s, e in zip(starts_arr.tolist(), ends_arr.tolist())]
    sentence_idx = _sentence_indices(data, starts_arr)
    return surfaces, starts_arr, ends_arr, sentence_idx


def _sentence_indices(data: bytes, token_starts: np.ndarray) -> np.ndarray:
    """Contiguous sentence index per token from terminator counts."""
    arr = np.frombuffer(data, dtype=np.uint8)
    breaks = np.isin(arr, _SENTENCE_BREAK_BYTES)
    # terminators strictly before each token start
    cumulative = np.concatenate(([0], np.cumsum(breaks)))
    raw = cumulative[token_starts]
    if len(raw) == 0:
        return raw
    return np.concatenate(([0], np.cumsum(np.diff(raw) > 0)))
