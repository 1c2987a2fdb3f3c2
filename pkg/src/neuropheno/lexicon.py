"""Phenotype lexicon: seed phrases, reviewed simclins and negation terms.

A lexicon holds, per (phrase, label) pair, exactly one entry with a status
of ``seed``, ``accepted`` or ``rejected``. Seeds are immutable; rejected
phrases are remembered forever so a reviewer never sees the same candidate
twice. Phrases are normalized through the corpus tokenizer and '_'-joined,
which makes them directly matchable as token sequences.

Persistence is a single human-inspectable JSON document.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from importlib import resources

from .corpus import tokenize
from .errors import SchemaError, ValidationError
from .labels import PhenotypeLabel, parse_label

logger = logging.getLogger(__name__)

STATUS_SEED = "seed"
STATUS_ACCEPTED = "accepted"
STATUS_REJECTED = "rejected"
_STATUSES = (STATUS_SEED, STATUS_ACCEPTED, STATUS_REJECTED)

POSITION_PRE = "pre"
POSITION_POST = "post"
_POSITIONS = (POSITION_PRE, POSITION_POST)


def normalize_phrase(phrase: str) -> str:
    """Canonical phrase form: lower-cased tokens joined by '_'."""
    surfaces = [t.surface for t in tokenize(phrase)]
    if not surfaces:
        raise ValidationError(f"phrase has no tokens: {phrase!r}")
    return "_".join(surfaces)


@dataclass(frozen=True)
class Simclin:
    """One lexicon entry: a phrase bound to a label with a review status."""

    phrase: str
    label: PhenotypeLabel
    similarity: float | None
    status: str
    provenance: str


@dataclass(frozen=True)
class NegationTerm:
    """A negating phrase and whether it acts before or after a span."""

    phrase: str
    position: str


@dataclass(frozen=True)
class Candidate:
    """A proposed simclin awaiting human review."""

    phrase: str
    label: PhenotypeLabel
    similarity: float
    nearest_seed: str


class Lexicon:
    """Mutable registry of simclins and negation terms."""

    def __init__(self, threshold: float = 0.6):
        if not 0.0 < threshold <= 1.0:
            raise ValidationError(f"threshold must be in (0, 1], got {threshold}")
        self.threshold = threshold
        self._simclins: dict[tuple[str, PhenotypeLabel], Simclin] = {}
        self._negations: dict[tuple[str, str], NegationTerm] = {}

    # -- simclins -----------------------------------------------------------

    def simclins(self) -> list[Simclin]:
        return [self._simclins[k] for k in sorted(self._simclins, key=_simclin_key)]

    def active_simclins(self) -> list[Simclin]:
        """Seeds plus accepted entries, the ones that participate in matching."""
        return [s for s in self.simclins() if s.status in (STATUS_SEED, STATUS_ACCEPTED)]

    def get(self, phrase: str, label: PhenotypeLabel) -> Simclin | None:
        return self._simclins.get((normalize_phrase(phrase), label))

    def add_seed(self, phrase: str, label: PhenotypeLabel,
                 provenance: str = "seed-list") -> None:
        """Register a human-supplied seed phrase for a label.

        Re-adding an existing seed is a no-op. A previously accepted phrase
        is promoted to seed. A rejected phrase raises: un-reject explicitly
        by deciding it again before seeding.
        """
        norm = normalize_phrase(phrase)
        existing = self._simclins.get((norm, label))
        if existing is not None:
            if existing.status == STATUS_SEED:
                return
            if existing.status == STATUS_REJECTED:
                raise ValidationError(
                    f"phrase {norm!r} was rejected for label {label.value!r}; "
                    "decide it as accept before seeding")
        self._simclins[(norm, label)] = Simclin(
            phrase=norm, label=label, similarity=None,
            status=STATUS_SEED, provenance=provenance)

    def decide(self, phrase: str, label: PhenotypeLabel, decision: str,
               similarity: float | None = None,
               provenance: str = "review") -> Simclin:
        """Accept or reject a candidate phrase; seeds are immutable."""
        if decision not in ("accept", "reject"):
            raise ValidationError(f"decision must be 'accept' or 'reject', got {decision!r}")
        norm = normalize_phrase(phrase)
        existing = self._simclins.get((norm, label))
        if existing is not None and existing.status == STATUS_SEED:
            raise ValidationError(
                f"phrase {norm!r} is a seed for label {label.value!r} and cannot be re-decided")
        if similarity is None and existing is not None:
            similarity = existing.similarity
        status = STATUS_ACCEPTED if decision == "accept" else STATUS_REJECTED
        entry = Simclin(phrase=norm, label=label, similarity=similarity,
                        status=status, provenance=provenance)
        self._simclins[(norm, label)] = entry
        return entry

    # -- negations ----------------------------------------------------------

    def negations(self) -> list[NegationTerm]:
        return [self._negations[k] for k in sorted(self._negations, key=lambda k: (k[1], k[0]))]

    def negation_phrases(self, position: str) -> list[str]:
        return [n.phrase for n in self.negations() if n.position == position]

    def add_negation(self, phrase: str, position: str) -> None:
        if position not in _POSITIONS:
            raise ValidationError(f"negation position must be 'pre' or 'post', got {position!r}")
        if not phrase.strip():
            raise ValidationError("negation phrase must be non-empty")
        key = (phrase.strip().lower(), position)
        if key in self._negations:
            raise ValidationError(f"negation {key[0]!r} ({position}) already present")
        self._negations[key] = NegationTerm(phrase=key[0], position=position)

    def remove_negation(self, phrase: str, position: str) -> None:
        key = (phrase.strip().lower(), position)
        if key not in self._negations:
            raise ValidationError(f"negation {key[0]!r} ({position}) not present")
        del self._negations[key]

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "simclins": [
                {
                    "phrase": s.phrase,
                    "label": s.label.value,
                    "similarity": s.similarity,
                    "status": s.status,
                    "provenance": s.provenance,
                }
                for s in self.simclins()
            ],
            "negations": [
                {"phrase": n.phrase, "position": n.position} for n in self.negations()
            ],
        }

    def save(self, path: str) -> None:
        """Write the lexicon JSON atomically (write to temp, then rename)."""
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)

    @classmethod
    def from_dict(cls, doc: dict, source: str = "<dict>") -> "Lexicon":
        if not isinstance(doc, dict):
            raise SchemaError(f"{source}: lexicon document must be a JSON object")
        if "threshold" not in doc:
            raise SchemaError(f"{source}: missing required field 'threshold'")
        try:
            lex = cls(threshold=float(doc["threshold"]))
        except (TypeError, ValueError):
            raise SchemaError(f"{source}: 'threshold' must be a number") from None
        for i, row in enumerate(doc.get("simclins", [])):
            where = f"{source}: simclins[{i}]"
            for fld in ("phrase", "label", "status"):
                if fld not in row:
                    raise SchemaError(f"{where}: missing field {fld!r}")
            try:
                label = parse_label(row["label"])
            except ValidationError as exc:
                raise SchemaError(f"{where}: {exc}") from None
            if row["status"] not in _STATUSES:
                raise SchemaError(f"{where}: bad status {row['status']!r}")
            phrase = normalize_phrase(row["phrase"])
            key = (phrase, label)
            if key in lex._simclins:
                raise SchemaError(f"{where}: duplicate (phrase, label) {key!r}")
            sim = row.get("similarity")
            lex._simclins[key] = Simclin(
                phrase=phrase, label=label,
                similarity=None if sim is None else float(sim),
                status=row["status"], provenance=str(row.get("provenance", "")))
        for i, row in enumerate(doc.get("negations", [])):
            where = f"{source}: negations[{i}]"
            try:
                lex.add_negation(row["phrase"], row["position"])
            except KeyError as exc:
                raise SchemaError(f"{where}: missing field {exc}") from None
            except ValidationError as exc:
                raise SchemaError(f"{where}: {exc}") from None
        return lex

    @classmethod
    def load(cls, path: str) -> "Lexicon":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(doc, source=path)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lexicon):
            return NotImplemented
        return (self.threshold == other.threshold
                and self._simclins == other._simclins
                and self._negations == other._negations)


def _simclin_key(key: tuple[str, PhenotypeLabel]):
    phrase, label = key
    return (label.ordinal, phrase)


def default_lexicon() -> Lexicon:
    """The shipped starter lexicon: seed phrases plus stock negation terms."""
    data = resources.files("neuropheno").joinpath("data/default_lexicon.json")
    return Lexicon.from_dict(json.loads(data.read_text(encoding="utf-8")),
                             source="default_lexicon.json")


def generate_candidates(lex: Lexicon, model, limit_per_seed: int = 50) -> list[Candidate]:
    """Propose new simclins near the lexicon's anchors.

    Anchors are seeds and accepted simclins. Every vocabulary token with
    cosine similarity >= lex.threshold to an anchor is emitted unless the
    (phrase, label) pair already carries any status. Duplicates across
    anchors keep the maximum similarity. Anchors missing from the model
    vocabulary are skipped with a warning.
    """
    from .embedding import neighbors  # local import to avoid a cycle at module load

    if limit_per_seed < 1:
        raise ValidationError("limit_per_seed must be positive")
    anchors = lex.active_simclins()
    if not anchors:
        raise ValidationError("lexicon has no seeds; nothing to expand")
    best: dict[tuple[str, PhenotypeLabel], Candidate] = {}
    for anchor in anchors:
        if anchor.phrase not in model.vocab:
            logger.warning("anchor %r (%s) not in embedding vocabulary, skipped",
                           anchor.phrase, anchor.label.value)
            continue
        for token, sim in neighbors(model, anchor.phrase, lex.threshold, limit_per_seed):
            key = (token, anchor.label)
            if key in lex._simclins:
                continue
            cur = best.get(key)
            if cur is None or sim > cur.similarity or (
                    sim == cur.similarity and anchor.phrase < cur.nearest_seed):
                best[key] = Candidate(phrase=token, label=anchor.label,
                                      similarity=sim, nearest_seed=anchor.phrase)
    out = list(best.values())
    out.sort(key=lambda c: (-c.similarity, c.label.ordinal, c.phrase))
    return out
