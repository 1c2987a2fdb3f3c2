"""Acceptance suite: one test per primary criterion, at stated tolerances.

Each test prints one PASS line on success (run with -s to see them inline);
a failing test reports the measured values in its assertion message.
"""

import pathlib
import time

import numpy as np
import pytest

from neuropheno import kernels
from neuropheno.classifier import ClassifierConfig, predict_corpus, train_pu
from neuropheno.corpus import Note, split_sentences, tokenize
from neuropheno.embedding import EmbeddingConfig, pair_gradients, pair_loss, train
from neuropheno.errors import ResponseFormatError
from neuropheno.evaluation import (METRIC_NAMES, PhenotypeMatrix, confusion,
                                   load_annotations, metrics, metrics_csv,
                                   spans_to_matrix)
from neuropheno.labels import LABELS, N_LABELS, PhenotypeLabel
from neuropheno.lexicon import generate_candidates
from neuropheno.llm import LlmConfig, parse_response, render_response, rescore_audit, run_corpus
from neuropheno.matcher import NegationConfig, PhraseMatcher, apply_negation, find_matches
from neuropheno.synthetic import make_planted_corpus, make_throughput_corpus

from conftest import basic_lexicon, injected_model, synonym_corpus
from mock_llm import MockLlm
from test_cli import write_gold_jsonl
from test_evaluation import brute_force_macro, random_matrix_pair

SAMPLE_RESPONSE = (pathlib.Path(__file__).parent / "data"
                   / "sample_response.txt").read_text()


def announce(name):
    print(f"\nACCEPTANCE PASS: {name}")


def f1_per_label(gold: np.ndarray, pred: np.ndarray) -> np.ndarray:
    g = gold.astype(bool)
    p = pred.astype(bool)
    tp = (g & p).sum(axis=0)
    fp = (~g & p).sum(axis=0)
    fn = (g & ~p).sum(axis=0)
    denom = 2 * tp + fp + fn
    return np.where(denom > 0, 2 * tp / np.maximum(denom, 1), 0.0)


def test_metrics_oracle_equivalence_200_pairs():
    """200 seeded 30x19 pairs: macro metrics match the cell-iteration oracle
    within 1e-12, in under 5 seconds."""
    started = time.perf_counter()
    worst = 0.0
    for seed in range(200):
        gold, pred = random_matrix_pair(seed, n=30)
        report = metrics(confusion(gold, pred))
        oracle = brute_force_macro(gold, pred)
        for name in METRIC_NAMES:
            worst = max(worst, abs(report.macro[name] - oracle[name]))
    elapsed = time.perf_counter() - started
    assert worst < 1e-12, f"max macro deviation {worst:.3e}"
    assert elapsed < 5.0, f"took {elapsed:.2f}s (budget 5s)"
    announce(f"metrics oracle equivalence (max dev {worst:.1e}, {elapsed:.2f}s)")


def test_hand_computed_metrics_fixture():
    """tp=2 fp=1 fn=1 tn=6 yields the hand-computed metric values +-1e-4."""
    from neuropheno.evaluation import ConfusionCounts
    counts = ConfusionCounts(tp=np.full(N_LABELS, 2), fp=np.full(N_LABELS, 1),
                             fn=np.full(N_LABELS, 1), tn=np.full(N_LABELS, 6))
    block = metrics(counts).per_label["weakness"]
    expected = {"accuracy": 0.8, "precision": 0.6667, "recall": 0.6667,
                "specificity": 0.8571, "f1": 0.6667}
    for name, value in expected.items():
        assert block[name] == pytest.approx(value, abs=1e-4), name
    announce("hand-computed confusion fixture")


def test_negation_fixtures():
    """The four documented negation cases behave exactly as specified."""
    lex = basic_lexicon()
    cases = {
        "no sign of weakness": {("weakness", True)},
        "weakness negative": {("weakness", True)},
        "patient reports weakness": {("weakness", False)},
        "no pain. weakness persists": {("pain", True), ("weakness", False)},
    }
    for text, expected in cases.items():
        note = Note("n", text)
        matches = find_matches(note, lex)
        tokens = split_sentences(tokenize(text), text)
        flagged = apply_negation(matches, tokens, lex, NegationConfig())
        got = {(m.phrase, m.negated) for m in flagged}
        assert got == expected, f"{text!r}: {got}"
    announce("negation fixtures")


def test_structured_response_parse():
    """The sample structured response parses to exactly five present labels;
    dropping any line raises an error naming the missing label."""
    parsed = parse_response(SAMPLE_RESPONSE)
    present = {label.value for label, flag in parsed.present.items() if flag}
    assert present == {"cognitive", "gait", "sphincter", "seizure", "weakness"}
    for label in LABELS:
        lines = [line for line in SAMPLE_RESPONSE.splitlines()
                 if not line.lower().startswith(label.value + ":")
                 and not line.startswith(label.display + ":")]
        with pytest.raises(ResponseFormatError, match=label.value):
            parse_response("\n".join(lines))
    announce("structured response parse (5 present, 19 hard-missing checks)")


def test_candidate_generation_oracle():
    """Candidates at threshold 0.6 equal a brute-force cosine scan and
    exclude every previously decided phrase."""
    from neuropheno.embedding import similarity

    cosines = {"imbalance": 0.92, "unsteady": 0.75, "wobbly": 0.61,
               "nearmiss": 0.59, "offtopic": 0.2, "veryfar": -0.4,
               "decided1": 0.9, "decided2": 0.88}
    model = injected_model(cosines)
    lex = basic_lexicon()
    lex.add_seed("anchor", PhenotypeLabel.GAIT)
    # rejected phrases stay out of the anchor set but must stay excluded
    lex.decide("decided1", PhenotypeLabel.GAIT, "reject")
    lex.decide("decided2", PhenotypeLabel.GAIT, "reject")

    got = generate_candidates(lex, model, limit_per_seed=100)
    got_phrases = {(c.phrase, c.label) for c in got}

    brute = set()
    for anchor in [s for s in lex.active_simclins() if s.phrase in model.vocab]:
        for token in model.vocab:
            if token == anchor.phrase:
                continue
            if similarity(model, anchor.phrase, token) >= lex.threshold:
                if lex.get(token, anchor.label) is None:
                    brute.add((token, anchor.label))
    assert got_phrases == brute
    decided = {"decided1", "decided2"}
    assert not decided & {c.phrase for c in got}
    assert "nearmiss" not in {c.phrase for c in got}
    announce(f"candidate generation oracle ({len(got)} candidates)")


def test_embedding_properties():
    """(a) bit-deterministic training, (b) synonyms beat every distractor,
    (c) gradient matches finite differences at 1e-5 relative; under 60s."""
    started = time.perf_counter()
    corpus, (syn_a, syn_b), _ = synonym_corpus()
    config = EmbeddingConfig(dim=16, window=2, epochs=15)

    first = train(corpus, config, seed=3)
    second = train(corpus, config, seed=3)
    assert first.vocab == second.vocab
    assert np.array_equal(first.vectors, second.vectors), "training not bit-deterministic"

    from neuropheno.embedding import similarity
    mutual = similarity(first, syn_a, syn_b)
    for token in first.vocab:
        if token not in (syn_a, syn_b):
            assert mutual > similarity(first, syn_a, token), token

    rng = np.random.default_rng(41)
    center = rng.normal(scale=0.4, size=5)
    context = rng.normal(scale=0.4, size=5)
    negatives = rng.normal(scale=0.4, size=(2, 5))
    d_center, _, _ = pair_gradients(center, context, negatives)
    eps = 1e-6
    for i in range(5):
        up, down = center.copy(), center.copy()
        up[i] += eps
        down[i] -= eps
        numeric = (pair_loss(up, context, negatives)
                   - pair_loss(down, context, negatives)) / (2 * eps)
        assert d_center[i] == pytest.approx(numeric, rel=1e-5, abs=1e-10)

    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"took {elapsed:.1f}s (budget 60s)"
    announce(f"embedding properties (determinism, synonyms, gradients; {elapsed:.1f}s)")


def test_planted_corpus_end_to_end():
    """500 planted notes: match -> train_pu -> predict reaches per-label
    F1 >= 0.95 against planted truth in under 120 seconds."""
    started = time.perf_counter()
    planted = make_planted_corpus(500, seed=42)

    matcher = PhraseMatcher(planted.lexicon)
    match_result = matcher.match_corpus(planted.notes)
    assert match_result.note_ids == planted.truth.note_ids
    assert np.array_equal(match_result.matrix, planted.truth.values), \
        "matcher must recover the planted truth exactly"

    model = train_pu(planted.notes, planted.lexicon,
                     ClassifierConfig(regularization=1e-2, epochs=20, seed=0))
    note_ids, predictions, _ = predict_corpus(model, planted.notes, planted.lexicon)
    assert note_ids == planted.truth.note_ids

    scores = f1_per_label(planted.truth.values, predictions)
    elapsed = time.perf_counter() - started
    worst = float(scores.min())
    assert (scores >= 0.95).all(), \
        f"per-label F1 floor {worst:.4f} < 0.95: " + ", ".join(
            f"{label.value}={scores[label.ordinal]:.3f}"
            for label in LABELS if scores[label.ordinal] < 0.95)
    assert elapsed < 120.0, f"took {elapsed:.1f}s (budget 120s)"
    announce(f"planted end-to-end (min F1 {worst:.3f}, {elapsed:.1f}s)")


@pytest.fixture(scope="module")
def throughput_corpus():
    kernels.warmup()
    return make_throughput_corpus(10_000, 500, 500, seed=7)


def test_matching_throughput_single_threaded(throughput_corpus):
    """10k notes x ~500 tokens against 500 simclins in < 10s single-threaded."""
    notes, lexicon = throughput_corpus
    matcher = PhraseMatcher(lexicon)
    started = time.perf_counter()
    result = matcher.match_corpus(notes, workers=1)
    elapsed = time.perf_counter() - started
    assert len(result.note_ids) == 10_000
    assert result.matrix.sum() > 0
    assert elapsed < 10.0, f"single-threaded matching took {elapsed:.2f}s (budget 10s)"
    announce(f"throughput single-threaded ({elapsed:.2f}s for 10k notes)")


def test_matching_throughput_parallel_speedup(throughput_corpus):
    """4 workers must be >= 2.5x faster than single-threaded."""
    notes, lexicon = throughput_corpus
    matcher = PhraseMatcher(lexicon)
    started = time.perf_counter()
    serial = matcher.match_corpus(notes, workers=1)
    serial_time = time.perf_counter() - started
    started = time.perf_counter()
    parallel = matcher.match_corpus(notes, workers=4)
    parallel_time = time.perf_counter() - started
    assert np.array_equal(serial.matrix, parallel.matrix)
    speedup = serial_time / parallel_time
    print(f"\nthroughput: serial {serial_time:.2f}s, 4 workers {parallel_time:.2f}s, "
          f"speedup {speedup:.2f}x")
    assert speedup >= 2.5, \
        f"4-worker speedup {speedup:.2f}x < 2.5x (serial {serial_time:.2f}s, " \
        f"parallel {parallel_time:.2f}s)"
    announce(f"throughput parallel ({speedup:.2f}x with 4 workers)")


def test_llm_adapter_against_mock(tmp_path, monkeypatch):
    """Instructions sent once per session; 429 retried exactly once; audit
    log re-scores to bit-identical metrics."""
    monkeypatch.setenv("PHENO_LLM_TOKEN", "acceptance-token")
    planted = make_planted_corpus(12, seed=5)
    gold_path = tmp_path / "gold.jsonl"
    write_gold_jsonl(planted, gold_path)

    truth_by_text = {}
    for note, row in zip(planted.notes, planted.truth.values):
        noisy = row.copy()
        flip = (note.note_id.encode()[-1] + np.arange(N_LABELS)) % 6 == 0
        noisy[flip] = 1 - noisy[flip]
        truth_by_text[note.text] = noisy

    def responder(payload):
        return render_response(truth_by_text[payload["messages"][-1]["content"]])

    audit_path = tmp_path / "audit.jsonl"
    with MockLlm(responder) as mock:
        mock.script = [429]  # first request gets a transient failure
        config = LlmConfig(endpoint=mock.url, model="mock", max_retries=3,
                           backoff_base=0.01, session_mode=True)
        live = run_corpus(planted.notes, config, audit_path=str(audit_path))
        requests_seen = list(mock.requests)

    assert len(requests_seen) == len(planted.notes) + 1, "429 must be retried exactly once"
    final_messages = requests_seen[-1]["messages"]
    assert sum(m["role"] == "system" for m in final_messages) == 1, \
        "instruction block must appear once per session"
    assert sum(m["role"] == "user" for m in final_messages) == len(planted.notes)
    assert not live.failures

    gold = spans_to_matrix(load_annotations(str(gold_path)), live.note_ids)
    live_metrics = metrics_csv("llm", metrics(confusion(
        gold, PhenotypeMatrix(live.note_ids, live.matrix))))

    rescored_ids, rescored_matrix, rescore_failures = rescore_audit(str(audit_path))
    assert rescored_ids == live.note_ids
    assert np.array_equal(rescored_matrix, live.matrix)
    assert not rescore_failures
    rescored_metrics = metrics_csv("llm", metrics(confusion(
        gold, PhenotypeMatrix(rescored_ids, rescored_matrix))))
    assert rescored_metrics == live_metrics, "offline re-scoring must be bit-identical"
    announce("llm adapter (session instructions once, retry once, audit re-scoring)")
