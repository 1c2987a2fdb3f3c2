"""Find simclin occurrences in notes and apply negation scoping.

Matching is token-sequence based and case-insensitive: a simclin phrase
"gait_instability" matches the consecutive tokens [gait, instability], so a
pattern can never fire inside a longer word ("pain" never matches "Spain").
Per label, overlapping candidate spans are resolved longest-match-first,
then leftmost. A match is negated when a pre-negation phrase ends within
``pre_window`` tokens before it, or a post-negation phrase starts within
``post_window`` tokens after it, in the same sentence.

The scan itself is a rolling n-gram code lookup per pattern length (see
``kernels.scan_codes``), verified against actual token ids, which keeps the
per-note cost linear in note length for a fixed lexicon.
"""

from __future__ import annotations

import json
import multiprocessing
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .corpus import Note, Token, tokenize_arrays
from .errors import ValidationError
from .labels import N_LABELS, PhenotypeLabel
from .lexicon import POSITION_PRE, Lexicon, normalize_phrase


@dataclass(frozen=True)
class Match:
    """One simclin occurrence; offsets are byte offsets into the note text."""

    note_id: str
    label: PhenotypeLabel
    phrase: str
    start: int
    end: int
    negated: bool = False


@dataclass(frozen=True)
class NegationConfig:
    """Token windows for negation scoping (both sentence-bounded).

    A pre-negation may leave up to ``pre_window - 1`` tokens between its end
    and the match start; post-negations analogously after the match.
    """

    pre_window: int = 5
    post_window: int = 3

    def __post_init__(self) -> None:
        if self.pre_window < 1 or self.post_window < 1:
            raise ValidationError("negation windows must be >= 1 tokens")


@dataclass
class MatchResult:
    """Corpus-level matching output, rows ordered by note_id."""

    note_ids: list[str]
    matrix: np.ndarray
    matches: list[Match]


class _PatternIndex:
    """Token patterns grouped by length with sorted code tables."""

    def __init__(self, phrases: Iterable[tuple[str, object]], vocab: dict[str, int]):
        # payloads[i] = (phrase, extra); token_ids[i] aligned
        self.payloads: list[tuple[str, object]] = []
        self.token_ids: list[tuple[int, ...]] = []
        by_length: dict[int, dict[int, list[int]]] = {}
        for phrase, extra in phrases:
            parts = phrase.split("_")
            ids = tuple(vocab[p] for p in parts)
            idx = len(self.payloads)
            self.payloads.append((phrase, extra))
            self.token_ids.append(ids)
            code = kernels.ngram_code(ids)
            by_length.setdefault(len(ids), {}).setdefault(code, []).append(idx)
        self.groups: list[tuple[int, np.ndarray, dict[int, list[int]]]] = []
        for length in sorted(by_length):
            code_map = by_length[length]
            codes = np.array(sorted(code_map), dtype=np.int64)
            self.groups.append((length, codes, code_map))

    def scan(self, ids: np.ndarray) -> list[tuple[int, int, int]]:
        """All pattern occurrences as (start_token, end_token, pattern_idx)."""
        hits: list[tuple[int, int, int]] = []
        for length, codes, code_map in self.groups:
            positions = kernels.scan_codes(ids, length, codes)
            for pos in positions:
                pos = int(pos)
                window = ids[pos:pos + length]
                code = kernels.ngram_code(window)
                for pattern_idx in code_map.get(code, ()):
                    if tuple(window.tolist()) == self.token_ids[pattern_idx]:
                        hits.append((pos, pos + length, pattern_idx))
        return hits


def _build_vocab(token_lists: Iterable[Sequence[str]]) -> dict[str, int]:
    vocab: dict[str, int] = {}
    for tokens in token_lists:
        for token in tokens:
            if token not in vocab:
                vocab[token] = len(vocab)
    return vocab


class PhraseMatcher:
    """Reusable matcher compiled from a lexicon snapshot."""

    def __init__(self, lexicon: Lexicon, negation: NegationConfig | None = None):
        self.negation = negation or NegationConfig()
        active = lexicon.active_simclins()
        cue_specs = [(normalize_phrase(n.phrase), n.position) for n in lexicon.negations()]
        self.vocab = _build_vocab(
            [s.phrase.split("_") for s in active] + [c[0].split("_") for c in cue_specs])
        self.patterns = _PatternIndex(((s.phrase, s.label) for s in active), self.vocab)
        self.cues = _PatternIndex(cue_specs, self.vocab)
        self.n_active = len(active)

    def token_ids(self, surfaces: Sequence[str]) -> np.ndarray:
        vocab = self.vocab
        return np.fromiter((vocab.get(s, -1) for s in surfaces),
                           dtype=np.int64, count=len(surfaces))

    def match_note(self, note: Note) -> tuple[list[Match], np.ndarray]:
        """Matches (negation applied) and the 19-component binary vector."""
        surfaces, starts, ends, sentences = tokenize_arrays(note.text)
        if not surfaces:
            return [], np.zeros(N_LABELS, dtype=np.int8)
        ids = self.token_ids(surfaces)
        selected = _select_matches(self.patterns.scan(ids), self.patterns)
        cue_index = _CueIndex(self.cues.scan(ids), self.cues, sentences)
        matches: list[Match] = []
        vector = np.zeros(N_LABELS, dtype=np.int8)
        for tok_start, tok_end, pattern_idx in selected:
            phrase, label = self.patterns.payloads[pattern_idx]
            negated = cue_index.is_negated(tok_start, tok_end, sentences,
                                           self.negation)
            matches.append(Match(note_id=note.note_id, label=label, phrase=phrase,
                                 start=int(starts[tok_start]), end=int(ends[tok_end - 1]),
                                 negated=negated))
            if not negated:
                vector[label.ordinal] = 1
        return matches, vector

    def match_corpus(self, notes: Sequence[Note], workers: int = 1) -> MatchResult:
        """Match every note; rows ordered by note_id, deterministic output."""
        ordered = sorted(notes, key=lambda n: n.note_id)
        if workers <= 1 or len(ordered) < 2 * workers:
            rows = [self.match_note(note) for note in ordered]
            matrix = (np.stack([vec for _, vec in rows])
                      if rows else np.zeros((0, N_LABELS), dtype=np.int8))
            matches = [m for note_matches, _ in rows for m in note_matches]
        else:
            matrix, matches = _match_parallel(self, ordered, workers)
        return MatchResult(note_ids=[n.note_id for n in ordered],
                           matrix=matrix, matches=matches)


def _select_matches(hits: list[tuple[int, int, int]],
                    patterns: _PatternIndex) -> list[tuple[int, int, int]]:
    """Per-label longest-match-first, then leftmost, overlap resolution."""
    by_label: dict[PhenotypeLabel, list[tuple[int, int, int]]] = {}
    for hit in hits:
        label = patterns.payloads[hit[2]][1]
        by_label.setdefault(label, []).append(hit)
    kept_all: list[tuple[int, int, int]] = []
    for label in by_label:
        candidates = sorted(by_label[label],
                            key=lambda h: (-(h[1] - h[0]), h[0]))
        # kept spans are disjoint, so sorted starts imply sorted ends and a
        # candidate only needs to be checked against its two neighbors
        kept_starts: list[int] = []
        kept_ends: list[int] = []
        for start, end, idx in candidates:
            at = bisect_right(kept_starts, start)
            if at > 0 and kept_ends[at - 1] > start:
                continue
            if at < len(kept_starts) and kept_starts[at] < end:
                continue
            kept_starts.insert(at, start)
            kept_ends.insert(at, end)
            kept_all.append((start, end, idx))
    kept_all.sort(key=lambda h: (h[0], h[1], patterns.payloads[h[2]][1].ordinal))
    return kept_all


class _CueIndex:
    """Negation-cue occurrences, binary-searchable by token position.

    Keeps the per-match negation test O(window) instead of scanning every
    cue occurrence in the note.
    """

    def __init__(self, cue_hits: list[tuple[int, int, int]], cues: _PatternIndex,
                 sentences: np.ndarray):
        pre: list[tuple[int, int]] = []
        post: list[tuple[int, int]] = []
        for cue_start, cue_end, cue_idx in cue_hits:
            if cues.payloads[cue_idx][1] == POSITION_PRE:
                pre.append((cue_end, int(sentences[cue_end - 1])))
            else:
                post.append((cue_start, int(sentences[cue_start])))
        pre.sort()
        post.sort()
        self.pre_ends = [p[0] for p in pre]
        self.pre_sentences = [p[1] for p in pre]
        self.post_starts = [p[0] for p in post]
        self.post_sentences = [p[1] for p in post]

    def is_negated(self, tok_start: int, tok_end: int, sentences: np.ndarray,
                   config: NegationConfig) -> bool:
        # pre-negation: cue ends within the window before the match start
        lo = bisect_left(self.pre_ends, tok_start - config.pre_window + 1)
        hi = bisect_right(self.pre_ends, tok_start)
        sentence = sentences[tok_start]
        for k in range(lo, hi):
            if self.pre_sentences[k] == sentence:
                return True
        # post-negation: cue starts within the window after the match end
        lo = bisect_left(self.post_starts, tok_end)
        hi = bisect_right(self.post_starts, tok_end + config.post_window - 1)
        sentence = sentences[tok_end - 1]
        for k in range(lo, hi):
            if self.post_sentences[k] == sentence:
                return True
        return False


# ---------------------------------------------------------------------------
# module-level operations (convenience wrappers over PhraseMatcher)
# ---------------------------------------------------------------------------


def find_matches(note: Note, lexicon: Lexicon) -> list[Match]:
    """All simclin occurrences in text order with negated=False."""
    matcher = PhraseMatcher(lexicon)
    matches, _ = matcher.match_note(note)
    return [replace(m, negated=False) for m in matches]


def apply_negation(matches: list[Match], tokens: list[Token], lexicon: Lexicon,
                   config: NegationConfig | None = None) -> list[Match]:
    """Set negated flags; offsets and labels are never changed.

    ``tokens`` must come from tokenize + split_sentences on the same note
    text the matches were found in.
    """
    config = config or NegationConfig()
    if not matches:
        return []
    starts = [t.start for t in tokens]
    ends = [t.end for t in tokens]
    sentences = np.asarray([t.sentence_index for t in tokens], dtype=np.int64)
    surfaces = [t.surface for t in tokens]

    cue_specs = [(normalize_phrase(n.phrase), n.position) for n in lexicon.negations()]
    vocab = _build_vocab(c[0].split("_") for c in cue_specs)
    cues = _PatternIndex(cue_specs, vocab)
    ids = np.fromiter((vocab.get(s, -1) for s in surfaces), dtype=np.int64,
                      count=len(surfaces))
    cue_index = _CueIndex(cues.scan(ids), cues, sentences)

    out: list[Match] = []
    for m in matches:
        tok_start = bisect_left(starts, m.start)
        if tok_start >= len(starts) or starts[tok_start] != m.start:
            raise ValidationError(f"match at byte {m.start} does not align to a token start")
        tok_end_idx = bisect_left(ends, m.end)
        if tok_end_idx >= len(ends) or ends[tok_end_idx] != m.end:
            raise ValidationError(f"match at byte {m.end} does not align to a token end")
        negated = cue_index.is_negated(tok_start, tok_end_idx + 1, sentences, config)
        out.append(replace(m, negated=negated))
    return out


def note_label_vector(matches: list[Match]) -> np.ndarray:
    """Binary presence vector: 1 iff a label has a non-negated match."""
    vector = np.zeros(N_LABELS, dtype=np.int8)
    for m in matches:
        if not m.negated:
            vector[m.label.ordinal] = 1
    return vector


def dump_matches(matches: Iterable[Match], fh) -> None:
    """Write matches as JSON-lines for debugging and UI contexts."""
    for m in matches:
        fh.write(json.dumps({
            "note_id": m.note_id, "label": m.label.value, "phrase": m.phrase,
            "start": m.start, "end": m.end, "negated": m.negated,
        }, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# data-parallel corpus matching (fork workers share the compiled matcher)
# ---------------------------------------------------------------------------
#
# The compiled matcher and the note list are inherited through fork, so the
# only traffic is the span arguments out and compact result tuples back.

_WORKER_CTX: tuple[PhraseMatcher, list[Note]] | None = None


def _match_span(span: tuple[int, int]):
    matcher, notes = _WORKER_CTX
    vectors = np.zeros((span[1] - span[0], N_LABELS), dtype=np.int8)
    match_rows: list[tuple] = []
    for k, i in enumerate(range(span[0], span[1])):
        note_matches, vectors[k] = matcher.match_note(notes[i])
        match_rows.extend(
            (m.note_id, m.label.ordinal, m.phrase, m.start, m.end, m.negated)
            for m in note_matches)
    return vectors.tobytes(), match_rows


def _match_parallel(matcher: PhraseMatcher, ordered: list[Note], workers: int):
    global _WORKER_CTX
    n = len(ordered)
    chunk = max(1, (n + workers * 4 - 1) // (workers * 4))
    spans = [(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    _WORKER_CTX = (matcher, ordered)
    try:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=workers) as pool:
            chunks = pool.map(_match_span, spans)
    finally:
        _WORKER_CTX = None
    matrix = np.concatenate([
        np.frombuffer(raw, dtype=np.int8).reshape(-1, N_LABELS) for raw, _ in chunks
    ]) if chunks else np.zeros((0, N_LABELS), dtype=np.int8)
    labels = list(PhenotypeLabel)
    matches = [
        Match(note_id=r[0], label=labels[r[1]], phrase=r[2],
              start=r[3], end=r[4], negated=r[5])
        for _, rows in chunks for r in rows
    ]
    return matrix, matches
