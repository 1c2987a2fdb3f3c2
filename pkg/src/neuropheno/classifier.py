"""Per-label linear SVM trained with a positive-only labeling strategy.

Positives for a label are the notes the matcher flags (non-negated match
present); provisional negatives are a seeded uniform sample of the
remaining notes. Features are binary: one indicator per active simclin that
matched (non-negated) plus one indicator per distinct token, hashed with
FNV-1a into a 2^18 block that follows the simclin block. Weights are fit by
deterministic epoch-ordered Pegasos (subgradient descent on the
L2-regularized hinge loss, step 1/(lambda*t)).

Labels with zero matcher positives stay untrained: they always predict
false and report a margin of -inf.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corpus import Note, tokenize_arrays
from .errors import SchemaError, ValidationError
from .labels import LABEL_NAMES, LABELS, N_LABELS
from .lexicon import Lexicon
from .matcher import NegationConfig, PhraseMatcher

logger = logging.getLogger(__name__)

HASH_BITS = 18
HASH_DIM = 1 << HASH_BITS

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1

_MODEL_MAGIC = b"neuropheno-linear-model v1\n"


def fnv1a_64(data: bytes) -> int:
    """FNV-1a 64-bit hash (fixed offset basis, no external seed)."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class ClassifierConfig:
    regularization: float = 1e-4
    epochs: int = 20
    seed: int = 0
    negative_sample_ratio: float = 1.0

    def __post_init__(self) -> None:
        if self.regularization <= 0.0:
            raise ValidationError("regularization must be positive")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.negative_sample_ratio <= 0.0:
            raise ValidationError("negative_sample_ratio must be positive")


class FeatureSpace:
    """Maps notes to sparse binary indices over simclins + hashed tokens."""

    def __init__(self, lexicon: Lexicon, negation: NegationConfig | None = None):
        self.matcher = PhraseMatcher(lexicon, negation)
        active = lexicon.active_simclins()
        ordered = sorted((s.label.ordinal, s.phrase) for s in active)
        self.simclin_index: dict[tuple[int, str], int] = {
            key: i for i, key in enumerate(ordered)}
        self.n_simclins = len(ordered)
        self.dim = self.n_simclins + HASH_DIM
        self._token_cache: dict[str, int] = {}

    def fingerprint(self) -> list[list]:
        return [[LABELS[ordinal].value, phrase]
                for ordinal, phrase in sorted(self.simclin_index,
                                              key=self.simclin_index.get)]

    def _token_feature(self, surface: str) -> int:
        cached = self._token_cache.get(surface)
        if cached is None:
            cached = self.n_simclins + (fnv1a_64(surface.encode("utf-8")) & (HASH_DIM - 1))
            self._token_cache[surface] = cached
        return cached

    def featurize_note(self, note: Note) -> tuple[np.ndarray, np.ndarray]:
        """(sorted unique feature indices, matcher label vector) for a note."""
        matches, vector = self.matcher.match_note(note)
        indices = {
            self.simclin_index[(m.label.ordinal, m.phrase)]
            for m in matches if not m.negated
        }
        surfaces = tokenize_arrays(note.text)[0]
        indices.update(self._token_feature(s) for s in set(surfaces))
        return np.asarray(sorted(indices), dtype=np.int64), vector


def featurize(note: Note, lexicon: Lexicon,
              negation: NegationConfig | None = None) -> np.ndarray:
    """Sparse binary feature indices of one note under a lexicon."""
    return FeatureSpace(lexicon, negation).featurize_note(note)[0]


@dataclass
class LinearModel:
    """Per-label dense weights and bias, plus the training configuration."""

    weights: np.ndarray  # (19, dim) float64
    bias: np.ndarray  # (19,) float64
    untrained: np.ndarray  # (19,) bool
    config: ClassifierConfig
    simclin_block: list[list]  # ordered (label, phrase) pairs of the feature space
    # per label: mean instantaneous regularized objective of each epoch
    epoch_objectives: dict[str, list[float]] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def train_pu(notes: list[Note], lexicon: Lexicon,
             config: ClassifierConfig | None = None,
             negation: NegationConfig | None = None) -> LinearModel:
    """Fit one linear model per label from matcher-derived positives."""
    config = config or ClassifierConfig()
    if not notes:
        raise ValidationError("cannot train a classifier on an empty corpus")
    space = FeatureSpace(lexicon, negation)
    if space.n_simclins == 0:
        raise ValidationError("lexicon has no active simclins; nothing to featurize")

    rows = [space.featurize_note(note) for note in notes]
    label_matrix = np.stack([vec for _, vec in rows])
    if int(label_matrix.sum()) == 0:
        raise ValidationError("no note has a non-negated match for any label")

    index_lists = [idx for idx, _ in rows]
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(ix) for ix in index_lists])
    indices = (np.concatenate(index_lists) if indptr[-1]
               else np.empty(0, dtype=np.int64))

    weights = np.zeros((N_LABELS, space.dim))
    bias = np.zeros(N_LABELS)
    untrained = np.zeros(N_LABELS, dtype=bool)
    objectives: dict[str, list[float]] = {}

    for label in LABELS:
        col = label.ordinal
        positives = np.nonzero(label_matrix[:, col])[0]
        if len(positives) == 0:
            untrained[col] = True
            logger.info("label %s has no positive notes; model flagged untrained",
                        label.value)
            continue
        pool = np.nonzero(label_matrix[:, col] == 0)[0]
        rng = np.random.default_rng([config.seed, col])
        n_neg = min(len(pool), int(round(config.negative_sample_ratio * len(positives))))
        negatives = (np.sort(rng.choice(pool, size=n_neg, replace=False))
                     if n_neg else np.empty(0, dtype=np.int64))
        sample_rows = np.concatenate([positives, negatives])
        y = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])

        # augment every row with a constant intercept feature at index dim,
        # so the bias shares the L2 penalty and the Pegasos schedule
        intercept = space.dim
        sub_lists = [np.append(index_lists[r], intercept) for r in sample_rows]
        sub_indptr = np.zeros(len(sample_rows) + 1, dtype=np.int64)
        sub_indptr[1:] = np.cumsum([len(ix) for ix in sub_lists])
        sub_indices = np.concatenate(sub_lists)

        v = np.zeros(space.dim + 1)
        s = 1.0
        t = 0
        per_epoch: list[float] = []
        w_avg = np.zeros(space.dim + 1)
        for _ in range(config.epochs):
            order = rng.permutation(len(sample_rows)).astype(np.int64)
            correction = np.zeros(space.dim + 1)
            s, c = kernels.pegasos_epoch(v, correction, sub_indices, sub_indptr,
                                         y, order, config.regularization, s, t)
            t += len(order)
            w_avg = (c * v - correction) / len(order)
            per_epoch.append(svm_objective_csr(w_avg, 0.0, sub_indices, sub_indptr,
                                               y, config.regularization))
        # the shipped model is the last epoch's averaged iterate
        weights[col] = w_avg[:space.dim]
        bias[col] = w_avg[intercept]
        objectives[label.value] = per_epoch

    return LinearModel(weights=weights, bias=bias, untrained=untrained,
                       config=config, simclin_block=space.fingerprint(),
                       epoch_objectives=objectives)


def predict(model: LinearModel, note: Note, lexicon: Lexicon,
            negation: NegationConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(binary vector, margins) for one note."""
    space = _validated_space(model, lexicon, negation)
    return _predict_row(model, space.featurize_note(note)[0])


def predict_corpus(model: LinearModel, notes: list[Note], lexicon: Lexicon,
                   negation: NegationConfig | None = None
                   ) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Predictions for a corpus, rows ordered by note_id."""
    space = _validated_space(model, lexicon, negation)
    ordered = sorted(notes, key=lambda n: n.note_id)
    matrix = np.zeros((len(ordered), N_LABELS), dtype=np.int8)
    margins = np.zeros((len(ordered), N_LABELS))
    for i, note in enumerate(ordered):
        matrix[i], margins[i] = _predict_row(model, space.featurize_note(note)[0])
    return [n.note_id for n in ordered], matrix, margins


def _predict_row(model: LinearModel, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    margins = model.weights[:, indices].sum(axis=1) + model.bias
    margins[model.untrained] = -np.inf
    return (margins > 0.0).astype(np.int8), margins


def _validated_space(model: LinearModel, lexicon: Lexicon,
                     negation: NegationConfig | None) -> FeatureSpace:
    space = FeatureSpace(lexicon, negation)
    if space.fingerprint() != model.simclin_block:
        raise ValidationError(
            "lexicon does not match the one the model was trained with "
            f"({space.n_simclins} active simclins vs {len(model.simclin_block)} at training)")
    return space


# ---------------------------------------------------------------------------
# objective / gradient helpers (training diagnostics and test oracles)
# ---------------------------------------------------------------------------


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                  regularization: float) -> float:
    """L2-regularized mean hinge loss on a dense design matrix."""
    margins = y * (X @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(0.5 * regularization * np.dot(w, w) + hinge.mean())


def svm_gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                 regularization: float) -> tuple[np.ndarray, float]:
    """Subgradient of svm_objective; exact gradient away from hinge kinks."""
    margins = y * (X @ w + b)
    active = margins < 1.0
    gw = regularization * w - (y[active, None] * X[active]).sum(axis=0) / len(y)
    gb = -float(y[active].sum()) / len(y)
    return gw, gb


def svm_objective_csr(w: np.ndarray, b: float, indices: np.ndarray,
                      indptr: np.ndarray, y: np.ndarray,
                      regularization: float) -> float:
    """Same objective over a binary CSR matrix."""
    dots = _csr_row_sums(w, indices, indptr)
    hinge = np.maximum(0.0, 1.0 - y * (dots + b))
    return float(0.5 * regularization * np.dot(w, w) + hinge.mean())


def _csr_row_sums(w: np.ndarray, indices: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    n_rows = len(indptr) - 1
    if len(indices) == 0:
        return np.zeros(n_rows)
    counts = np.diff(indptr)
    starts = np.minimum(indptr[:-1], len(indices) - 1)
    sums = np.add.reduceat(w[indices], starts)
    return np.where(counts > 0, sums, 0.0)


# ---------------------------------------------------------------------------
# persistence (versioned binary container, deterministic bytes)
# ---------------------------------------------------------------------------


def save_model(model: LinearModel, path: str) -> None:
    """Write the model file: magic line, JSON header, raw weight buffers.

    Weights are stored sparsely (indices of nonzero entries per label), so
    identical training inputs yield byte-identical files.
    """
    nz = [np.nonzero(model.weights[i])[0] for i in range(N_LABELS)]
    header = {
        "labels": list(LABEL_NAMES),
        "dim": int(model.dim),
        "hash_dim": HASH_DIM,
        "simclin_block": model.simclin_block,
        "config": {
            "regularization": model.config.regularization,
            "epochs": model.config.epochs,
            "seed": model.config.seed,
            "negative_sample_ratio": model.config.negative_sample_ratio,
        },
        "bias": [float(x) for x in model.bias],
        "untrained": [bool(x) for x in model.untrained],
        "nnz": [int(len(ix)) for ix in nz],
        "epoch_objectives": model.epoch_objectives,
    }
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for i in range(N_LABELS):
            fh.write(nz[i].astype(np.int64).tobytes())
            fh.write(model.weights[i, nz[i]].tobytes())


def load_model(path: str) -> LinearModel:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != _MODEL_MAGIC:
            raise SchemaError(f"{path}: not a neuropheno linear model file")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SchemaError(f"{path}: malformed model header: {exc}") from None
        if header.get("labels") != list(LABEL_NAMES):
            raise SchemaError(f"{path}: label set does not match the canonical 19 labels")
        dim = int(header["dim"])
        weights = np.zeros((N_LABELS, dim))
        for i in range(N_LABELS):
            nnz = int(header["nnz"][i])
            idx = np.frombuffer(fh.read(8 * nnz), dtype=np.int64)
            vals = np.frombuffer(fh.read(8 * nnz), dtype=np.float64)
            if len(idx) != nnz or len(vals) != nnz:
                raise SchemaError(f"{path}: truncated weight buffers")
            weights[i, idx] = vals
    cfg = header["config"]
    config = ClassifierConfig(regularization=cfg["regularization"], epochs=cfg["epochs"],
                              seed=cfg["seed"],
                              negative_sample_ratio=cfg["negative_sample_ratio"])
    return LinearModel(
        weights=weights,
        bias=np.asarray(header["bias"], dtype=np.float64),
        untrained=np.asarray(header["untrained"], dtype=bool),
        config=config,
        simclin_block=[list(pair) for pair in header["simclin_block"]],
        epoch_objectives={k: list(v) for k, v in header.get("epoch_objectives", {}).items()},
    )
