"""High-throughput phenotyping of physician notes.

Two pipelines share one evaluation harness: a hybrid model (embedding-grown
lexicon, negation-aware matching, positive-only linear SVM) and an adapter
for chat-style LLM endpoints, both scored against gold span annotations
over 19 neurological phenotype labels.
"""

from .labels import LABEL_NAMES, LABELS, N_LABELS, PhenotypeLabel

__version__ = "0.1.0"

__all__ = ["LABELS", "LABEL_NAMES", "N_LABELS", "PhenotypeLabel", "__version__"]
