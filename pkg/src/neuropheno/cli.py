"""Command-line entry point: the full pipeline as subcommands.

Every stage reads and writes plain files so each step can be re-run in
isolation. Exit codes: 0 success, 1 validation problem, 2 runtime failure;
errors print a single machine-parsable line ``ERROR <code>: <detail>`` on
stderr. All randomness is pinned by --seed flags.
"""

from __future__ import annotations

import errno
import json
import logging
import os
import sys

import click

from . import classifier as clf
from . import embedding as emb
from . import evaluation as ev
from . import kernels, llm
from .corpus import Note, ingest_csv, tokenize_arrays
from .errors import PhenoError, SchemaError, ValidationError
from .labels import LABEL_NAMES
from .lexicon import Lexicon, default_lexicon, generate_candidates
from .matcher import NegationConfig, PhraseMatcher, dump_matches
from .server import ReviewState, make_server

logger = logging.getLogger(__name__)

_corpus_options = [
    click.option("--id-column", default="note_id", show_default=True,
                 help="CSV column holding the note identifier."),
    click.option("--text-column", default="text", show_default=True,
                 help="CSV column holding the note text."),
]

_negation_options = [
    click.option("--pre-window", default=5, show_default=True,
                 help="Token window for pre-negations (sentence-bounded)."),
    click.option("--post-window", default=3, show_default=True,
                 help="Token window for post-negations (sentence-bounded)."),
]


def _add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


def load_corpus(path: str, id_column: str = "note_id",
                text_column: str = "text") -> list[Note]:
    """Notes from a CSV file or an ingested JSON-lines corpus."""
    if path.endswith(".jsonl"):
        notes: list[Note] = []
        seen: set[str] = set()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"{path} line {lineno}: invalid JSON: {exc.msg}") from None
                note_id = doc.get("note_id")
                text = doc.get("text")
                if not note_id or not isinstance(text, str) or not text.strip():
                    raise SchemaError(f"{path} line {lineno}: needs note_id and non-empty text")
                if note_id in seen:
                    raise SchemaError(f"{path} line {lineno}: duplicate note_id {note_id!r}")
                seen.add(note_id)
                notes.append(Note(note_id=note_id, text=text,
                                  meta=dict(doc.get("meta") or {})))
        return notes
    return ingest_csv(path, id_column=id_column, text_column=text_column)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def cli(verbose: bool) -> None:
    """High-throughput phenotyping of physician notes."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command("ingest")
@click.option("--csv", "csv_path", required=True, help="Input CSV file.")
@_add_options(_corpus_options)
@click.option("--out", required=True, help="Output corpus JSON-lines file.")
def cmd_ingest(csv_path: str, id_column: str, text_column: str, out: str) -> None:
    """Normalize a CSV note export into the canonical corpus format."""
    notes = ingest_csv(csv_path, id_column=id_column, text_column=text_column)
    with open(out, "w", encoding="utf-8") as fh:
        for note in notes:
            fh.write(json.dumps({"note_id": note.note_id, "text": note.text,
                                 "meta": note.meta}, sort_keys=True) + "\n")
    click.echo(f"ingested {len(notes)} notes -> {out}")


@cli.command("init-lexicon")
@click.option("--out", required=True, help="Path for the new lexicon JSON.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
def cmd_init_lexicon(out: str, force: bool) -> None:
    """Write the shipped starter lexicon (seed phrases + stock negations)."""
    if os.path.exists(out) and not force:
        raise ValidationError(f"{out} already exists (use --force to overwrite)")
    default_lexicon().save(out)
    click.echo(f"wrote starter lexicon -> {out}")


@cli.command("train-embeddings")
@click.option("--corpus", "corpus_path", required=True)
@_add_options(_corpus_options)
@click.option("--out", required=True, help="Output vector file (text format).")
@click.option("--dim", default=100, show_default=True)
@click.option("--window", default=5, show_default=True)
@click.option("--epochs", default=5, show_default=True)
@click.option("--min-count", default=2, show_default=True)
@click.option("--negative", default=5, show_default=True,
              help="Negative samples per context pair.")
@click.option("--learning-rate", default=0.025, show_default=True)
@click.option("--min-learning-rate", default=1e-4, show_default=True)
@click.option("--phrases/--no-phrases", default=True, show_default=True,
              help="Merge frequent bigrams before training.")
@click.option("--phrase-min-count", default=3, show_default=True)
@click.option("--phrase-threshold", default=10.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_train_embeddings(corpus_path: str, id_column: str, text_column: str,
                         out: str, dim: int, window: int, epochs: int,
                         min_count: int, negative: int, learning_rate: float,
                         min_learning_rate: float, phrases: bool,
                         phrase_min_count: int, phrase_threshold: float,
                         seed: int) -> None:
    """Train skip-gram vectors on the note corpus."""
    notes = load_corpus(corpus_path, id_column, text_column)
    config = emb.EmbeddingConfig(
        dim=dim, window=window, epochs=epochs, min_count=min_count,
        negative_samples=negative, initial_learning_rate=learning_rate,
        min_learning_rate=min_learning_rate, phrase_min_count=phrase_min_count,
        phrase_score_threshold=phrase_threshold)
    corpus_tokens = [tokenize_arrays(note.text)[0] for note in notes]
    if phrases:
        corpus_tokens = emb.detect_phrases(corpus_tokens, config)
    model = emb.train(corpus_tokens, config, seed=seed)
    emb.save_vectors(model, out)
    click.echo(f"trained {len(model.vocab)} vectors (dim {model.dim}, "
               f"backend {kernels.BACKEND}) -> {out}")


@cli.command("expand")
@click.option("--lexicon", "lexicon_path", required=True)
@click.option("--embeddings", "embeddings_path", required=True)
@click.option("--threshold", type=float, default=None,
              help="Override the lexicon's similarity threshold.")
@click.option("--limit-per-seed", default=50, show_default=True)
@click.option("--out", required=True, help="Output candidates JSON-lines file.")
def cmd_expand(lexicon_path: str, embeddings_path: str, threshold: float | None,
               limit_per_seed: int, out: str) -> None:
    """Generate review candidates near the lexicon's seed/accepted phrases."""
    lex = Lexicon.load(lexicon_path)
    if threshold is not None:
        lex.threshold = threshold
    model = emb.load_vectors(embeddings_path)
    candidates = generate_candidates(lex, model, limit_per_seed=limit_per_seed)
    with open(out, "w", encoding="utf-8") as fh:
        for c in candidates:
            fh.write(json.dumps({"phrase": c.phrase, "label": c.label.value,
                                 "similarity": c.similarity,
                                 "nearest_seed": c.nearest_seed},
                                sort_keys=True) + "\n")
    click.echo(f"{len(candidates)} candidates at threshold {lex.threshold} -> {out}")


@cli.command("match")
@click.option("--corpus", "corpus_path", required=True)
@_add_options(_corpus_options)
@click.option("--lexicon", "lexicon_path", required=True)
@_add_options(_negation_options)
@click.option("--workers", default=1, show_default=True)
@click.option("--out-matrix", required=True, help="Output phenotype matrix CSV.")
@click.option("--out-matches", default=None, help="Optional matches JSON-lines dump.")
def cmd_match(corpus_path: str, id_column: str, text_column: str,
              lexicon_path: str, pre_window: int, post_window: int,
              workers: int, out_matrix: str, out_matches: str | None) -> None:
    """Match lexicon phrases against every note and emit binary vectors."""
    notes = load_corpus(corpus_path, id_column, text_column)
    lex = Lexicon.load(lexicon_path)
    matcher = PhraseMatcher(lex, NegationConfig(pre_window=pre_window,
                                                post_window=post_window))
    result = matcher.match_corpus(notes, workers=workers)
    ev.PhenotypeMatrix(note_ids=result.note_ids, values=result.matrix).save_csv(out_matrix)
    if out_matches:
        with open(out_matches, "w", encoding="utf-8") as fh:
            dump_matches(result.matches, fh)
    negated = sum(1 for m in result.matches if m.negated)
    click.echo(f"matched {len(notes)} notes: {len(result.matches)} spans "
               f"({negated} negated) -> {out_matrix}")


@cli.command("train-classifier")
@click.option("--corpus", "corpus_path", required=True)
@_add_options(_corpus_options)
@click.option("--lexicon", "lexicon_path", required=True)
@_add_options(_negation_options)
@click.option("--regularization", default=1e-4, show_default=True)
@click.option("--epochs", default=20, show_default=True)
@click.option("--negative-ratio", default=1.0, show_default=True,
              help="Sampled negatives per positive note.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, help="Output model file.")
def cmd_train_classifier(corpus_path: str, id_column: str, text_column: str,
                         lexicon_path: str, pre_window: int, post_window: int,
                         regularization: float, epochs: int,
                         negative_ratio: float, seed: int, out: str) -> None:
    """Train the per-label positive-only SVM from matcher-derived labels."""
    notes = load_corpus(corpus_path, id_column, text_column)
    lex = Lexicon.load(lexicon_path)
    config = clf.ClassifierConfig(regularization=regularization, epochs=epochs,
                                  seed=seed, negative_sample_ratio=negative_ratio)
    negation = NegationConfig(pre_window=pre_window, post_window=post_window)
    model = clf.train_pu(notes, lex, config, negation)
    clf.save_model(model, out)
    trained = int((~model.untrained).sum())
    click.echo(f"trained {trained}/{len(LABEL_NAMES)} labels on {len(notes)} notes -> {out}")


@cli.command("predict")
@click.option("--corpus", "corpus_path", required=True)
@_add_options(_corpus_options)
@click.option("--lexicon", "lexicon_path", required=True)
@click.option("--model", "model_path", required=True)
@_add_options(_negation_options)
@click.option("--out-matrix", required=True)
@click.option("--out-margins", default=None, help="Optional margins CSV.")
def cmd_predict(corpus_path: str, id_column: str, text_column: str,
                lexicon_path: str, model_path: str, pre_window: int,
                post_window: int, out_matrix: str, out_margins: str | None) -> None:
    """Run the trained classifier over a corpus."""
    notes = load_corpus(corpus_path, id_column, text_column)
    lex = Lexicon.load(lexicon_path)
    if not lex.active_simclins():
        raise ValidationError("lexicon has no active simclins; cannot featurize")
    model = clf.load_model(model_path)
    negation = NegationConfig(pre_window=pre_window, post_window=post_window)
    note_ids, matrix, margins = clf.predict_corpus(model, notes, lex, negation)
    ev.PhenotypeMatrix(note_ids=note_ids, values=matrix).save_csv(out_matrix)
    if out_margins:
        with open(out_margins, "w", encoding="utf-8") as fh:
            fh.write(",".join(("note_id",) + LABEL_NAMES) + "\n")
            for note_id, row in zip(note_ids, margins):
                fh.write(note_id + "," + ",".join(repr(float(x)) for x in row) + "\n")
    click.echo(f"predicted {len(note_ids)} notes -> {out_matrix}")


@cli.command("llm-run")
@click.option("--corpus", "corpus_path", required=True)
@_add_options(_corpus_options)
@click.option("--endpoint", default=None, help="Chat-completions endpoint URL.")
@click.option("--model-name", default=None, help="Model identifier to request.")
@click.option("--auth-env", default=llm.DEFAULT_AUTH_ENV, show_default=True,
              help="Environment variable holding the bearer token.")
@click.option("--timeout", default=60.0, show_default=True)
@click.option("--max-retries", default=3, show_default=True)
@click.option("--backoff-base", default=2.0, show_default=True)
@click.option("--temperature", default=0.0, show_default=True)
@click.option("--session/--stateless", "session_mode", default=True, show_default=True,
              help="Keep one conversation per run vs. independent requests.")
@click.option("--concurrency", default=4, show_default=True,
              help="Parallel in-flight requests (stateless mode only).")
@click.option("--min-interval", default=0.0, show_default=True,
              help="Minimum seconds between request starts (rate limit).")
@click.option("--instructions", "instructions_path", default=None,
              help="Override the shipped instruction prompt file.")
@click.option("--audit", "audit_path", default=None,
              help="Audit JSON-lines output (required for live runs).")
@click.option("--from-audit", "from_audit", default=None,
              help="Re-score a previous run's audit log instead of calling out.")
@click.option("--out-matrix", required=True)
def cmd_llm_run(corpus_path: str, id_column: str, text_column: str,
                endpoint: str | None, model_name: str | None, auth_env: str,
                timeout: float, max_retries: int, backoff_base: float,
                temperature: float, session_mode: bool, concurrency: int,
                min_interval: float, instructions_path: str | None,
                audit_path: str | None, from_audit: str | None,
                out_matrix: str) -> None:
    """Phenotype notes through an external LLM endpoint (or re-score an audit log)."""
    if from_audit:
        note_ids, matrix, failures = llm.rescore_audit(from_audit)
        ev.PhenotypeMatrix(note_ids=note_ids, values=matrix).save_csv(out_matrix)
        click.echo(f"re-scored {len(note_ids)} notes from {from_audit} "
                   f"({len(failures)} failures) -> {out_matrix}")
        return
    if not endpoint or not model_name:
        raise ValidationError("--endpoint and --model-name are required for live runs")
    if not audit_path:
        raise ValidationError("--audit is required for live runs (offline re-scoring)")
    notes = load_corpus(corpus_path, id_column, text_column)
    config = llm.LlmConfig(endpoint=endpoint, model=model_name, auth_env=auth_env,
                           timeout=timeout, max_retries=max_retries,
                           backoff_base=backoff_base, temperature=temperature,
                           session_mode=session_mode, concurrency=concurrency,
                           min_request_interval=min_interval)
    instructions_text = None
    if instructions_path:
        with open(instructions_path, encoding="utf-8") as fh:
            instructions_text = fh.read()
    result = llm.run_corpus(notes, config, audit_path=audit_path,
                            instructions_text=instructions_text)
    ev.PhenotypeMatrix(note_ids=result.note_ids, values=result.matrix).save_csv(out_matrix)
    click.echo(f"queried {len(result.note_ids)} notes "
               f"({len(result.failures)} failures) -> {out_matrix}; audit {audit_path}")
    for note_id, failure in sorted(result.failures.items()):
        click.echo(f"  failed {note_id}: {failure}", err=True)


@cli.command("evaluate")
@click.option("--gold", "gold_path", required=True,
              help="Gold span annotations (JSON-lines).")
@click.option("--pred", "pred_path", required=True,
              help="Prediction matrix CSV.")
@click.option("--name", default="model", show_default=True,
              help="Implementation name for the report row.")
@click.option("--per-label", is_flag=True, help="Also print per-label metrics.")
@click.option("--out-csv", default=None, help="Full-precision metrics CSV.")
@click.option("--out-json", default=None, help="Metrics JSON (for `report`).")
def cmd_evaluate(gold_path: str, pred_path: str, name: str, per_label: bool,
                 out_csv: str | None, out_json: str | None) -> None:
    """Score a prediction matrix against gold span annotations."""
    pred = ev.PhenotypeMatrix.load_csv(pred_path)
    annotations = ev.load_annotations(gold_path)
    gold = ev.spans_to_matrix(annotations, pred.note_ids)
    report = ev.metrics(ev.confusion(gold, pred))
    click.echo(ev.metrics_table([(name, report)]), nl=False)
    if per_label:
        for label in LABEL_NAMES:
            block = report.per_label[label]
            cells = "  ".join(f"{metric}={block[metric]:.4f}" for metric in ev.METRIC_NAMES)
            click.echo(f"{label:>14}  {cells}")
    if out_csv:
        with open(out_csv, "w", encoding="utf-8") as fh:
            fh.write(ev.metrics_csv(name, report))
    if out_json:
        with open(out_json, "w", encoding="utf-8") as fh:
            fh.write(ev.metrics_json(name, report))


@cli.command("report")
@click.option("--matrix", "matrix_path", default=None,
              help="Phenotype matrix CSV for the frequency report.")
@click.option("--metrics", "metrics_paths", multiple=True,
              help="Metrics JSON files (from evaluate --out-json); repeatable.")
@click.option("--out-dir", default=None, help="Directory for report files.")
def cmd_report(matrix_path: str | None, metrics_paths: tuple[str, ...],
               out_dir: str | None) -> None:
    """Render label-frequency and combined metrics reports."""
    if not matrix_path and not metrics_paths:
        raise ValidationError("nothing to report: pass --matrix and/or --metrics")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    if matrix_path:
        matrix = ev.PhenotypeMatrix.load_csv(matrix_path)
        click.echo("label frequencies (descending):")
        for label, count in ev.frequency_report(matrix):
            click.echo(f"  {label.value:>14}  {count}")
        if out_dir:
            with open(os.path.join(out_dir, "frequency.csv"), "w", encoding="utf-8") as fh:
                fh.write(ev.frequency_csv(matrix))
    if metrics_paths:
        rows = []
        for path in metrics_paths:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            report = ev.MetricsReport(per_label=doc["per_label"], macro=doc["macro"],
                                      micro=doc.get("micro", {}))
            rows.append((doc.get("implementation", path), report))
        table = ev.metrics_table(rows)
        click.echo(table, nl=False)
        if out_dir:
            with open(os.path.join(out_dir, "metrics_table.txt"), "w", encoding="utf-8") as fh:
                fh.write(table)


@cli.command("review-serve")
@click.option("--lexicon", "lexicon_path", required=True)
@click.option("--embeddings", "embeddings_path", required=True)
@click.option("--corpus", "corpus_path", required=True)
@_add_options(_corpus_options)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True)
@click.option("--limit-per-seed", default=50, show_default=True)
@click.option("--ui-dir", default=None, help="Directory of built UI assets.")
def cmd_review_serve(lexicon_path: str, embeddings_path: str, corpus_path: str,
                     id_column: str, text_column: str, host: str, port: int,
                     limit_per_seed: int, ui_dir: str | None) -> None:
    """Serve the candidate-review JSON API (and UI assets, when built)."""
    notes = load_corpus(corpus_path, id_column, text_column)
    model = emb.load_vectors(embeddings_path)
    state = ReviewState(lexicon_path, model, notes, limit_per_seed=limit_per_seed)
    try:
        server = make_server(state, host=host, port=port, ui_dir=ui_dir)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise PhenoError(f"port {port} is already in use") from None
        raise
    click.echo(f"review service on http://{host}:{server.server_address[1]}/ "
               f"({len(state.candidates)} candidates)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def run(argv: list[str] | None = None) -> int:
    """Execute the CLI and map errors to exit codes without raising."""
    try:
        cli.main(args=argv, prog_name="neuropheno", standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        click.echo("ERROR usage: aborted", err=True)
        return 1
    except click.ClickException as exc:
        click.echo(f"ERROR usage: {exc.format_message()}", err=True)
        return 1
    except FileNotFoundError as exc:
        click.echo(f"ERROR missing-file: {exc}", err=True)
        return 1
    except PhenoError as exc:
        click.echo(f"ERROR {exc.code}: {exc}", err=True)
        return exc.exit_code
    except OSError as exc:
        click.echo(f"ERROR runtime: {exc}", err=True)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
