"""Synthetic corpora with known planted truth.

Used by the test suite and the benchmarks: notes are built from a neutral
filler vocabulary, and phenotype mentions are planted with known phrases,
optionally wrapped in known negation patterns. Because filler words never
collide with the planted phrase tokens, the expected matcher output is the
planted truth itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Note
from .evaluation import PhenotypeMatrix
from .labels import LABELS, N_LABELS, PhenotypeLabel
from .lexicon import Lexicon, default_lexicon

_FILLER = (
    "clinic visit patient stable followup today review status exam noted chart "
    "plan continue therapy routine baseline records summary impression course "
    "history session update findings overall condition monitor schedule return "
    "months clinical progress routine stable week interval report discussed "
    "reviewed general unremarkable"
).split()

_PRE_WRAPPERS = ("no {}", "no sign of {}", "denies {}", "without {}")
_POST_WRAPPERS = ("{} negative", "{} absent")


def label_phrases(label: PhenotypeLabel) -> list[str]:
    """The planted surface phrases for one label."""
    return [f"{label.value}osis", f"{label.value}itis flare"]


def planted_lexicon(threshold: float = 0.6) -> Lexicon:
    """Lexicon seeded with every planted phrase plus the stock negations."""
    lex = Lexicon(threshold=threshold)
    for negation in default_lexicon().negations():
        lex.add_negation(negation.phrase, negation.position)
    for label in LABELS:
        for phrase in label_phrases(label):
            lex.add_seed(phrase, label, provenance="planted")
    return lex


@dataclass
class PlantedCorpus:
    notes: list[Note]
    lexicon: Lexicon
    truth: PhenotypeMatrix  # rows ordered by note_id


def make_planted_corpus(n_notes: int = 500, seed: int = 0,
                        p_present: float = 0.3,
                        p_negated: float = 0.15) -> PlantedCorpus:
    """Notes with per-label planted mentions and negated decoys.

    Each label is present (non-negated mention planted) with probability
    p_present; otherwise a negated mention is planted with probability
    p_negated. Sentences are shuffled, so mentions appear anywhere in the
    note. Truth is 1 exactly where a non-negated mention was planted.
    """
    rng = np.random.default_rng(seed)
    lex = planted_lexicon()
    notes: list[Note] = []
    truth = np.zeros((n_notes, N_LABELS), dtype=np.int8)
    filler = np.array(_FILLER)
    for i in range(n_notes):
        sentences = []
        for _ in range(int(rng.integers(3, 7))):
            words = filler[rng.integers(0, len(filler), size=int(rng.integers(5, 10)))]
            sentences.append(" ".join(words) + ".")
        for label in LABELS:
            roll = rng.random()
            phrase = label_phrases(label)[int(rng.integers(0, 2))]
            if roll < p_present:
                sentences.append(phrase + " observed.")
                truth[i, label.ordinal] = 1
            elif roll < p_present + p_negated:
                wrappers = _PRE_WRAPPERS + _POST_WRAPPERS
                wrapper = wrappers[int(rng.integers(0, len(wrappers)))]
                sentences.append(wrapper.format(phrase) + ".")
        order = rng.permutation(len(sentences))
        text = " ".join(sentences[j] for j in order)
        notes.append(Note(note_id=f"note_{i:05d}", text=text, meta={}))
    matrix = PhenotypeMatrix(note_ids=[n.note_id for n in notes], values=truth)
    return PlantedCorpus(notes=notes, lexicon=lex, truth=matrix)


def make_throughput_corpus(n_notes: int = 10_000, tokens_per_note: int = 500,
                           n_phrases: int = 500, seed: int = 0
                           ) -> tuple[list[Note], Lexicon]:
    """Large filler corpus plus an n-phrase lexicon for timing runs."""
    rng = np.random.default_rng(seed)
    filler = [f"w{i:03d}" for i in range(800)]
    phrase_tokens = [
        [f"p{i:03d}{suffix}" for suffix in "abc"[: 1 + i % 3]]
        for i in range(n_phrases)
    ]
    lex = Lexicon(threshold=0.6)
    for negation in default_lexicon().negations():
        lex.add_negation(negation.phrase, negation.position)
    for i, tokens in enumerate(phrase_tokens):
        lex.add_seed(" ".join(tokens), LABELS[i % N_LABELS], provenance="throughput")

    filler_arr = np.array(filler)
    word_idx = rng.integers(0, len(filler), size=(n_notes, tokens_per_note))
    mention_count = rng.integers(1, 4, size=n_notes)
    notes: list[Note] = []
    for i in range(n_notes):
        words = filler_arr[word_idx[i]].tolist()
        for _ in range(int(mention_count[i])):
            tokens = phrase_tokens[int(rng.integers(0, n_phrases))]
            pos = int(rng.integers(0, tokens_per_note - len(tokens)))
            words[pos:pos + len(tokens)] = tokens
        notes.append(Note(note_id=f"n{i:06d}", text=" ".join(words), meta={}))
    return notes, lex
