"""Word/phrase vectors trained on the note corpus.

Training is skip-gram with negative sampling over per-note token streams,
with a linearly decaying learning rate and a unigram^0.75 negative-sampling
distribution. Multi-word phrases are merged up front by count-based bigram
scoring so that phrases like "gait_instability" receive vectors of their
own. Nearest-neighbor queries over cosine similarity drive lexicon
candidate generation.

Determinism contract: for a fixed (corpus, config, seed) the single-threaded
trainer is a pure function. All stochastic choices (vector init, negative
draws) come from one seeded numpy Generator and are precomputed outside the
hot kernel, so the numba and numpy backends follow identical update
schedules.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import OutOfVocabularyError, SchemaError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingConfig:
    """Training hyperparameters. Defaults suit small clinical corpora."""

    dim: int = 100
    window: int = 5
    negative_samples: int = 5
    epochs: int = 5
    min_count: int = 2
    initial_learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    phrase_min_count: int = 3
    phrase_score_threshold: float = 10.0

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValidationError("embedding dim must be >= 2")
        for name in ("window", "negative_samples", "min_count", "phrase_min_count"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if not 0.0 < self.min_learning_rate <= self.initial_learning_rate:
            raise ValidationError("learning rate must decay from a positive initial value")
        if self.phrase_score_threshold <= 0.0:
            raise ValidationError("phrase_score_threshold must be positive")


@dataclass(eq=False)
class EmbeddingModel:
    """Trained vocabulary and dense vectors (one row per vocab entry)."""

    vocab: dict[str, int]
    vectors: np.ndarray
    dim: int
    config: EmbeddingConfig
    seed: int
    epoch_losses: list[float] = field(default_factory=list)
    _norms: np.ndarray | None = field(default=None, repr=False)

    @property
    def tokens(self) -> list[str]:
        order = sorted(self.vocab, key=self.vocab.get)
        return order

    @property
    def norms(self) -> np.ndarray:
        if self._norms is None:
            self._norms = np.linalg.norm(self.vectors, axis=1)
        return self._norms

    def vector(self, token: str) -> np.ndarray:
        idx = self.vocab.get(token)
        if idx is None:
            raise OutOfVocabularyError(f"token not in vocabulary: {token!r}")
        return self.vectors[idx]


def detect_phrases(corpus_tokens: list[list[str]],
                   config: EmbeddingConfig | None = None) -> list[list[str]]:
    """Merge high-scoring adjacent bigrams into single '_'-joined tokens.

    A bigram (a, b) is merged when it occurs at least phrase_min_count times
    and (count(a,b) - phrase_min_count) * N / (count(a) * count(b)) exceeds
    phrase_score_threshold, N being the corpus token total. The rewrite is a
    single greedy left-to-right pass per note.
    """
    config = config or EmbeddingConfig()
    unigrams: Counter[str] = Counter()
    bigrams: Counter[tuple[str, str]] = Counter()
    for note_tokens in corpus_tokens:
        unigrams.update(note_tokens)
        bigrams.update(zip(note_tokens, note_tokens[1:]))
    total = sum(unigrams.values())
    if total == 0:
        return [[] for _ in corpus_tokens]

    discount = config.phrase_min_count
    merges: set[tuple[str, str]] = set()
    for pair, count in bigrams.items():
        if count < config.phrase_min_count:
            continue
        score = (count - discount) * total / (unigrams[pair[0]] * unigrams[pair[1]])
        if score > config.phrase_score_threshold:
            merges.add(pair)

    merged_corpus: list[list[str]] = []
    for note_tokens in corpus_tokens:
        out: list[str] = []
        i = 0
        n = len(note_tokens)
        while i < n:
            if i + 1 < n and (note_tokens[i], note_tokens[i + 1]) in merges:
                out.append(note_tokens[i] + "_" + note_tokens[i + 1])
                i += 2
            else:
                out.append(note_tokens[i])
                i += 1
        merged_corpus.append(out)
    return merged_corpus


def train(corpus_tokens: list[list[str]],
          config: EmbeddingConfig | None = None,
          seed: int = 0) -> EmbeddingModel:
    """Train skip-gram/negative-sampling vectors over per-note token lists.

    Tokens occurring fewer than min_count times are dropped before context
    windows are formed. Raises ValidationError when nothing survives the
    frequency cut.
    """
    config = config or EmbeddingConfig()
    counts: Counter[str] = Counter()
    for note_tokens in corpus_tokens:
        counts.update(note_tokens)
    kept = [t for t, c in counts.items() if c >= config.min_count]
    if not kept:
        raise ValidationError(
            f"embedding training needs at least one token with count >= {config.min_count}")
    kept.sort(key=lambda t: (-counts[t], t))
    vocab = {t: i for i, t in enumerate(kept)}

    id_streams = []
    for note_tokens in corpus_tokens:
        ids = [vocab[t] for t in note_tokens if t in vocab]
        if ids:
            id_streams.append(np.asarray(ids, dtype=np.int32))
    centers, contexts = _enumerate_pairs(id_streams, config.window)

    rng = np.random.default_rng(seed)
    v_size = len(kept)
    syn0 = (rng.random((v_size, config.dim)) - 0.5) / config.dim
    syn1 = np.zeros((v_size, config.dim))

    weights = np.array([counts[t] for t in kept], dtype=np.float64) ** 0.75
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]

    n_pairs = centers.shape[0]
    total_updates = max(1, n_pairs * config.epochs)
    losses: list[float] = []
    for epoch in range(config.epochs):
        negatives = _draw_negatives(rng, cdf, contexts, config.negative_samples)
        loss_sum = kernels.sgns_epoch(
            syn0, syn1, centers, contexts, negatives,
            config.initial_learning_rate, config.min_learning_rate,
            epoch * n_pairs, total_updates)
        losses.append(float(loss_sum) / n_pairs if n_pairs else 0.0)
    logger.debug("trained %d vectors over %d pairs x %d epochs (backend %s)",
                 v_size, n_pairs, config.epochs, kernels.BACKEND)
    return EmbeddingModel(vocab=vocab, vectors=syn0, dim=config.dim,
                          config=config, seed=seed, epoch_losses=losses)


def _enumerate_pairs(id_streams: list[np.ndarray], window: int) -> tuple[np.ndarray, np.ndarray]:
    """Canonical (center, context) enumeration.

    Per note, for each distance d in 1..window: all forward pairs
    (t[i] -> t[i+d]) in position order, then the reversed pairs. Every
    center/context combination inside the window appears exactly once per
    epoch; only the update order differs from a position-major walk.
    """
    cs: list[np.ndarray] = []
    xs: list[np.ndarray] = []
    for ids in id_streams:
        n = ids.shape[0]
        for d in range(1, window + 1):
            if n <= d:
                break
            a = ids[:-d]
            b = ids[d:]
            cs.append(a)
            xs.append(b)
            cs.append(b)
            xs.append(a)
    if not cs:
        empty = np.empty(0, dtype=np.int32)
        return empty, empty.copy()
    return np.concatenate(cs), np.concatenate(xs)


def _draw_negatives(rng: np.random.Generator, cdf: np.ndarray,
                    contexts: np.ndarray, k: int) -> np.ndarray:
    """Sample k negatives per pair from the unigram^0.75 distribution.

    Accidental draws of the positive target and duplicate draws within one
    row are disabled with -1 (the kernels skip them).
    """
    n = contexts.shape[0]
    if n == 0:
        return np.empty((0, k), dtype=np.int32)
    u = rng.random((n, k))
    ids = np.searchsorted(cdf, u, side="right").astype(np.int32)
    ids[ids == contexts[:, None]] = -1
    for j in range(1, k):
        dup = (ids[:, j:j + 1] == ids[:, :j]).any(axis=1)
        ids[dup & (ids[:, j] >= 0), j] = -1
    return ids


def similarity(model: EmbeddingModel, a: str, b: str) -> float:
    """Cosine similarity of two vocabulary tokens (exactly symmetric)."""
    va = model.vector(a)
    vb = model.vector(b)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


def neighbors(model: EmbeddingModel, term: str, min_similarity: float,
              limit: int) -> list[tuple[str, float]]:
    """All vocab tokens (excluding term) with cosine >= min_similarity.

    Sorted by similarity descending, ties broken lexicographically, then
    truncated to ``limit``.
    """
    if limit < 1:
        raise ValidationError("neighbor limit must be positive")
    idx = model.vocab.get(term)
    if idx is None:
        raise OutOfVocabularyError(f"token not in vocabulary: {term!r}")
    v = model.vectors[idx]
    nv = model.norms[idx]
    if nv == 0.0:
        return []
    denom = model.norms * nv
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0.0, model.vectors @ v / denom, 0.0)
    order = [t for t in model.vocab if model.vocab[t] != idx and sims[model.vocab[t]] >= min_similarity]
    order.sort(key=lambda t: (-sims[model.vocab[t]], t))
    return [(t, float(sims[model.vocab[t]])) for t in order[:limit]]


def pair_loss(center: np.ndarray, context_out: np.ndarray,
              negative_outs: np.ndarray) -> float:
    """Negative-sampling loss of one (center, context, negatives) triple."""
    loss = -float(kernels.log_sigmoid(float(np.dot(center, context_out))))
    for row in negative_outs:
        loss -= float(kernels.log_sigmoid(-float(np.dot(center, row))))
    return loss


def pair_gradients(center: np.ndarray, context_out: np.ndarray,
                   negative_outs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of pair_loss w.r.t. each participating vector.

    Returns (d_center, d_context_out, d_negative_outs).
    """
    f_pos = float(kernels.sigmoid(float(np.dot(center, context_out))))
    d_center = (f_pos - 1.0) * context_out
    d_context = (f_pos - 1.0) * center
    d_negs = np.zeros_like(negative_outs)
    for i, row in enumerate(negative_outs):
        f_neg = float(kernels.sigmoid(float(np.dot(center, row))))
        d_center = d_center + f_neg * row
        d_negs[i] = f_neg * center
    return d_center, d_context, d_negs


def save_vectors(model: EmbeddingModel, path: str) -> None:
    """Write the text vector file: ``<vocab> <dim>`` header then one token
    line each, floats in shortest round-trip form."""
    order = sorted(model.vocab, key=model.vocab.get)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(order)} {model.dim}\n")
        for token in order:
            row = model.vectors[model.vocab[token]]
            fh.write(token + " " + " ".join(repr(float(x)) for x in row) + "\n")


def load_vectors(path: str) -> EmbeddingModel:
    """Read a text vector file written by save_vectors (exact round-trip)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise SchemaError(f"{path}: expected '<vocab_size> <dim>' header")
        try:
            v_size, dim = int(header[0]), int(header[1])
        except ValueError:
            raise SchemaError(f"{path}: non-numeric header fields") from None
        if dim < 2:
            raise SchemaError(f"{path}: dim must be >= 2, got {dim}")
        vocab: dict[str, int] = {}
        vectors = np.empty((v_size, dim), dtype=np.float64)
        for i in range(v_size):
            line = fh.readline()
            if not line:
                raise SchemaError(f"{path}: expected {v_size} vector lines, found {i}")
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise SchemaError(f"{path} line {i + 2}: expected {dim + 1} fields, got {len(parts)}")
            token = parts[0]
            if token in vocab:
                raise SchemaError(f"{path} line {i + 2}: duplicate token {token!r}")
            try:
                vectors[i] = [float(x) for x in parts[1:]]
            except ValueError:
                raise SchemaError(f"{path} line {i + 2}: malformed float") from None
            vocab[token] = i
    if not np.all(np.isfinite(vectors)):
        raise SchemaError(f"{path}: non-finite vector component")
    return EmbeddingModel(vocab=vocab, vectors=vectors, dim=dim,
                          config=EmbeddingConfig(dim=dim), seed=0)
