"""Gold-span ingestion, note x label matrices, and macro-averaged metrics.

Gold annotations arrive as JSON-lines (one object per note with byte-offset
spans). Presence is binary per (note, label) regardless of how many spans
support it. Metrics follow the standard confusion decomposition; any 0/0
ratio is defined as 0.0 by default (configurable), and macro values are
unweighted means over the 19 labels. Micro-pooled values are computed as a
complementary view.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError, ValidationError
from .labels import LABEL_NAMES, LABELS, N_LABELS, PhenotypeLabel, parse_label

METRIC_NAMES = ("accuracy", "precision", "recall", "specificity", "f1")


@dataclass(frozen=True)
class SpanAnnotation:
    """One gold span: byte offsets into the note text plus its label."""

    note_id: str
    start: int
    end: int
    label: PhenotypeLabel


@dataclass
class PhenotypeMatrix:
    """Binary notes x 19-labels matrix with an ordered note_id row index."""

    note_ids: list[str]
    values: np.ndarray  # (n, 19) int8

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.int8)
        if self.values.shape != (len(self.note_ids), N_LABELS):
            raise ValidationError(
                f"matrix shape {self.values.shape} does not fit "
                f"{len(self.note_ids)} notes x {N_LABELS} labels")
        if len(set(self.note_ids)) != len(self.note_ids):
            raise ValidationError("matrix note_ids must be unique")
        if not np.isin(self.values, (0, 1)).all():
            raise ValidationError("matrix cells must be 0 or 1")

    def save_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(to_csv(self))

    @classmethod
    def load_csv(cls, path: str) -> "PhenotypeMatrix":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\r\n")
            expected = ",".join(("note_id",) + LABEL_NAMES)
            if header != expected:
                raise SchemaError(f"{path}: header must be {expected!r}")
            note_ids: list[str] = []
            rows: list[list[int]] = []
            for lineno, line in enumerate(fh, start=2):
                line = line.rstrip("\r\n")
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != N_LABELS + 1:
                    raise SchemaError(f"{path} line {lineno}: expected {N_LABELS + 1} cells")
                note_ids.append(parts[0])
                try:
                    row = [int(x) for x in parts[1:]]
                except ValueError:
                    raise SchemaError(f"{path} line {lineno}: non-integer cell") from None
                if any(x not in (0, 1) for x in row):
                    raise SchemaError(f"{path} line {lineno}: cells must be 0 or 1")
                rows.append(row)
        values = (np.asarray(rows, dtype=np.int8) if rows
                  else np.zeros((0, N_LABELS), dtype=np.int8))
        try:
            return cls(note_ids=note_ids, values=values)
        except ValidationError as exc:
            raise SchemaError(f"{path}: {exc}") from None


def to_csv(matrix: PhenotypeMatrix) -> str:
    out = io.StringIO()
    out.write(",".join(("note_id",) + LABEL_NAMES) + "\n")
    for note_id, row in zip(matrix.note_ids, matrix.values):
        out.write(note_id + "," + ",".join(str(int(x)) for x in row) + "\n")
    return out.getvalue()


@dataclass
class ConfusionCounts:
    """Per-label tp/fp/fn/tn over notes; each label sums to the note count."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    def total(self) -> np.ndarray:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class MetricsReport:
    """Per-label and averaged accuracy/precision/recall/specificity/F1."""

    per_label: dict[str, dict[str, float]]
    macro: dict[str, float]
    micro: dict[str, float] = field(default_factory=dict)


def load_annotations(path: str) -> list[SpanAnnotation]:
    """Read gold spans from JSON-lines.

    Each line: {"text": ..., "spans": [{"start", "end", "label"}, ...],
    "meta": {"note_id": ...}}. Labels are case-folded to the canonical set;
    anything else, and any span outside the text's byte range, is an error
    naming the offending line.
    """
    annotations: list[SpanAnnotation] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path} line {lineno}: invalid JSON: {exc.msg}") from None
            meta = doc.get("meta") or {}
            note_id = meta.get("note_id")
            if not note_id:
                raise SchemaError(f"{path} line {lineno}: missing meta.note_id")
            text = doc.get("text")
            if not isinstance(text, str):
                raise SchemaError(f"{path} line {lineno}: missing text field")
            byte_len = len(text.encode("utf-8"))
            for span in doc.get("spans", []):
                try:
                    start, end = int(span["start"]), int(span["end"])
                    raw_label = span["label"]
                except (KeyError, TypeError, ValueError):
                    raise SchemaError(
                        f"{path} line {lineno}: span needs integer start/end and a label"
                    ) from None
                try:
                    label = parse_label(str(raw_label))
                except ValidationError:
                    raise SchemaError(
                        f"{path} line {lineno}: unknown label {raw_label!r}") from None
                if not 0 <= start < end <= byte_len:
                    raise SchemaError(
                        f"{path} line {lineno}: span [{start}, {end}) outside text "
                        f"of {byte_len} bytes")
                annotations.append(SpanAnnotation(note_id=str(note_id), start=start,
                                                  end=end, label=label))
    return annotations


def spans_to_matrix(annotations: list[SpanAnnotation],
                    note_ids: list[str]) -> PhenotypeMatrix:
    """Binarize spans: cell = 1 iff the note has >= 1 span with that label."""
    index = {nid: i for i, nid in enumerate(note_ids)}
    if len(index) != len(note_ids):
        raise ValidationError("note_ids must be unique")
    values = np.zeros((len(note_ids), N_LABELS), dtype=np.int8)
    for ann in annotations:
        row = index.get(ann.note_id)
        if row is None:
            raise ValidationError(
                f"annotation references unknown note_id {ann.note_id!r}")
        values[row, ann.label.ordinal] = 1
    return PhenotypeMatrix(note_ids=list(note_ids), values=values)


def confusion(gold: PhenotypeMatrix, pred: PhenotypeMatrix) -> ConfusionCounts:
    """Per-label confusion counts; both matrices must align exactly."""
    if gold.note_ids != pred.note_ids:
        raise ValidationError("gold and prediction matrices have different note rows")
    g = gold.values.astype(bool)
    p = pred.values.astype(bool)
    return ConfusionCounts(
        tp=(g & p).sum(axis=0).astype(np.int64),
        fp=(~g & p).sum(axis=0).astype(np.int64),
        fn=(g & ~p).sum(axis=0).astype(np.int64),
        tn=(~g & ~p).sum(axis=0).astype(np.int64),
    )


def _ratio(num: float, den: float, zero_division: float) -> float:
    return num / den if den > 0 else zero_division


def _metric_block(tp: float, fp: float, fn: float, tn: float,
                  zero_division: float) -> dict[str, float]:
    precision = _ratio(tp, tp + fp, zero_division)
    recall = _ratio(tp, tp + fn, zero_division)
    return {
        "accuracy": _ratio(tp + tn, tp + fp + fn + tn, zero_division),
        "precision": precision,
        "recall": recall,
        "specificity": _ratio(tn, tn + fp, zero_division),
        "f1": _ratio(2.0 * precision * recall, precision + recall, zero_division),
    }


def metrics(counts: ConfusionCounts, zero_division: float = 0.0) -> MetricsReport:
    """Per-label metrics plus unweighted macro means and micro-pooled values."""
    per_label: dict[str, dict[str, float]] = {}
    for label in LABELS:
        i = label.ordinal
        per_label[label.value] = _metric_block(
            float(counts.tp[i]), float(counts.fp[i]),
            float(counts.fn[i]), float(counts.tn[i]), zero_division)
    macro = {
        name: float(np.mean([per_label[l][name] for l in LABEL_NAMES]))
        for name in METRIC_NAMES
    }
    micro = _metric_block(float(counts.tp.sum()), float(counts.fp.sum()),
                          float(counts.fn.sum()), float(counts.tn.sum()),
                          zero_division)
    return MetricsReport(per_label=per_label, macro=macro, micro=micro)


def frequency_report(matrix: PhenotypeMatrix) -> list[tuple[PhenotypeLabel, int]]:
    """Per-label presence counts, sorted descending (ties by column order)."""
    counts = matrix.values.sum(axis=0)
    pairs = [(label, int(counts[label.ordinal])) for label in LABELS]
    pairs.sort(key=lambda p: (-p[1], p[0].ordinal))
    return pairs


def frequency_csv(matrix: PhenotypeMatrix) -> str:
    out = ["label,count"]
    out.extend(f"{label.value},{count}" for label, count in frequency_report(matrix))
    return "\n".join(out) + "\n"


def metrics_table(rows: list[tuple[str, MetricsReport]]) -> str:
    """Aligned text table, one row per implementation, macro metric columns."""
    headers = ("Implementation", "Accuracy", "Precision", "Recall", "Specificity", "F1")
    cells = [headers]
    for name, report in rows:
        cells.append((name,) + tuple(f"{report.macro[m]:.2f}" for m in METRIC_NAMES))
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = ["  ".join(row[i].ljust(widths[i]) for i in range(len(headers))).rstrip()
             for row in cells]
    return "\n".join(lines) + "\n"


def metrics_csv(name: str, report: MetricsReport) -> str:
    """Full-precision CSV: per-label rows plus macro and micro rows."""
    lines = ["implementation,label," + ",".join(METRIC_NAMES)]
    for label in LABEL_NAMES:
        block = report.per_label[label]
        lines.append(f"{name},{label}," + ",".join(repr(block[m]) for m in METRIC_NAMES))
    lines.append(f"{name},macro," + ",".join(repr(report.macro[m]) for m in METRIC_NAMES))
    lines.append(f"{name},micro," + ",".join(repr(report.micro[m]) for m in METRIC_NAMES))
    return "\n".join(lines) + "\n"


def metrics_json(name: str, report: MetricsReport) -> str:
    doc = {"implementation": name, "per_label": report.per_label,
           "macro": report.macro, "micro": report.micro}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
