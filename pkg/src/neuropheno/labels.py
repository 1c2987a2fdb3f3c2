"""The closed set of 19 neurological phenotype labels.

The ordering below is canonical: it fixes matrix column order, CSV headers
and binary-vector layout everywhere in the package.
"""

from __future__ import annotations

from enum import Enum

from .errors import ValidationError


class PhenotypeLabel(str, Enum):
    """One neurological sign/symptom category."""

    BEHAVIOR = "behavior"
    COGNITIVE = "cognitive"
    EOM = "eom"
    FATIGUE = "fatigue"
    GAIT = "gait"
    HYPERREFLEXIA = "hyperreflexia"
    HYPERTONIA = "hypertonia"
    HYPOREFLEXIA = "hyporeflexia"
    SPHINCTER = "sphincter"
    INCOORDINATION = "incoordination"
    ON = "on"
    PAIN = "pain"
    PARESTHESIAS = "paresthesias"
    SEIZURE = "seizure"
    SLEEP = "sleep"
    SPEECH = "speech"
    TREMOR = "tremor"
    VISION = "vision"
    WEAKNESS = "weakness"

    @property
    def ordinal(self) -> int:
        """Column index of this label in the canonical order."""
        return _ORDINALS[self]

    @property
    def display(self) -> str:
        """Human-facing spelling: acronym labels upper-cased, others title-cased."""
        if self in (PhenotypeLabel.EOM, PhenotypeLabel.ON):
            return self.value.upper()
        return self.value.capitalize()


LABELS: tuple[PhenotypeLabel, ...] = tuple(PhenotypeLabel)
LABEL_NAMES: tuple[str, ...] = tuple(label.value for label in LABELS)
N_LABELS: int = len(LABELS)

_ORDINALS: dict[PhenotypeLabel, int] = {label: i for i, label in enumerate(LABELS)}


def parse_label(name: str) -> PhenotypeLabel:
    """Resolve a label name case-insensitively ("EOM" and "eom" both work).

    Raises ValidationError for anything outside the closed 19-label set.
    """
    try:
        return PhenotypeLabel(name.strip().lower())
    except ValueError:
        raise ValidationError(f"unknown phenotype label: {name!r}") from None
