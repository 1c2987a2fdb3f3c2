import numpy as np
import pytest

from neuropheno.embedding import EmbeddingConfig, EmbeddingModel
from neuropheno.labels import PhenotypeLabel
from neuropheno.lexicon import Lexicon


def injected_model(cosines: dict[str, float], anchor: str = "anchor") -> EmbeddingModel:
    """2-D model where each token's cosine to `anchor` is exactly as given."""
    vocab = {anchor: 0}
    rows = [(1.0, 0.0)]
    for token in sorted(cosines):
        c = cosines[token]
        vocab[token] = len(rows)
        rows.append((c, float(np.sqrt(1.0 - c * c))))
    return EmbeddingModel(vocab=vocab, vectors=np.array(rows, dtype=np.float64),
                          dim=2, config=EmbeddingConfig(dim=2), seed=0)


def basic_lexicon(threshold: float = 0.6) -> Lexicon:
    """Weakness/pain seeds plus the stock negation terms."""
    lex = Lexicon(threshold=threshold)
    lex.add_seed("weakness", PhenotypeLabel.WEAKNESS)
    lex.add_seed("pain", PhenotypeLabel.PAIN)
    for phrase, position in [("no", "pre"), ("no sign of", "pre"), ("denies", "pre"),
                             ("without", "pre"), ("negative", "post"), ("absent", "post")]:
        lex.add_negation(phrase, position)
    return lex


def synonym_corpus() -> tuple[list[list[str]], tuple[str, str], tuple[str, ...]]:
    """Corpus where two synonyms share context templates and distractors do not."""
    contexts = [("exam", "shows"), ("patient", "reports"), ("severe", "today"),
                ("mild", "bilateral"), ("progressive", "noted"), ("new", "onset")]
    distractor_ctx = {
        "insurance": [("billing", "office"), ("claim", "form"), ("paperwork", "filed")],
        "parking": [("garage", "lot"), ("street", "meter"), ("valet", "ticket")],
        "lunch": [("cafeteria", "menu"), ("salad", "ordered"), ("soup", "served")],
    }
    notes = []
    for _ in range(20):
        for synonym in ("ataxia", "dysmetria"):
            for a, b in contexts:
                notes.append([a, synonym, b])
        for word, ctxs in distractor_ctx.items():
            for a, b in ctxs:
                notes.append([a, word, b])
    return notes, ("ataxia", "dysmetria"), tuple(distractor_ctx)


@pytest.fixture
def weakness_pain_lexicon() -> Lexicon:
    return basic_lexicon()
