"""Chat-endpoint adapter: one request per note, strict per-label parsing.

The instruction prompt ships as a package resource and is sent as the
system message. In session mode the conversation transcript accumulates, so
the instruction block is transmitted once per session while each note adds
one user turn; on a session-less run every request carries the instruction
block again. Responses must contain exactly one "<Label>: <value>" line per
phenotype label; "None" (case-insensitive) means absent, anything else
counts as present, qualified findings included.

Every note's request, raw response, parsed vector and error are persisted
to a JSON-lines audit log so a run can be re-scored offline without
re-querying the endpoint.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import requests

from .corpus import Note
from .errors import (ConfigurationError, ProtocolError, ResponseFormatError,
                     TransportError, ValidationError)
from .labels import LABELS, N_LABELS, PhenotypeLabel

logger = logging.getLogger(__name__)

DEFAULT_AUTH_ENV = "PHENO_LLM_TOKEN"

_RETRYABLE_STATUS = frozenset({429}) | frozenset(range(500, 600))
_AUTH_STATUS = frozenset({401, 403})


@dataclass(frozen=True)
class LlmConfig:
    """Endpoint, decoding and retry settings for one run."""

    endpoint: str
    model: str
    auth_env: str = DEFAULT_AUTH_ENV
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 2.0
    temperature: float = 0.0
    session_mode: bool = True
    concurrency: int = 4
    min_request_interval: float = 0.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValidationError("timeout must be positive")
        if self.concurrency < 1:
            raise ValidationError("concurrency must be >= 1")


@dataclass
class ParsedPhenotype:
    """Per-label presence plus the evidence text after each label heading."""

    present: dict[PhenotypeLabel, bool]
    evidence: dict[PhenotypeLabel, str]


def instructions() -> str:
    """The shipped phenotyping instruction prompt."""
    res = resources.files("neuropheno").joinpath("data/instructions.txt")
    return res.read_text(encoding="utf-8")


class ChatSession:
    """Accumulated conversation turns for session-mode runs."""

    def __init__(self) -> None:
        self.turns: list[dict[str, str]] = []

    def record(self, note_text: str, response_text: str) -> None:
        self.turns.append({"role": "user", "content": note_text})
        self.turns.append({"role": "assistant", "content": response_text})


def build_request(note: Note, config: LlmConfig,
                  session: ChatSession | None = None,
                  instructions_text: str | None = None) -> dict:
    """Chat-completion payload for one note. Pure, no network access."""
    if not note.text.strip():
        raise ValidationError(f"note {note.note_id!r} has empty text")
    system_text = instructions_text if instructions_text is not None else instructions()
    messages = [{"role": "system", "content": system_text}]
    if session is not None:
        messages.extend(session.turns)
    messages.append({"role": "user", "content": note.text})
    return {"model": config.model, "temperature": config.temperature,
            "messages": messages}


def resolve_token(config: LlmConfig) -> str:
    token = os.environ.get(config.auth_env)
    if not token:
        raise ConfigurationError(
            f"environment variable {config.auth_env} is not set (LLM auth token)")
    return token


def call(config: LlmConfig, payload: dict, token: str | None = None) -> str:
    """POST the payload; return the assistant message text.

    Transient failures (HTTP 429, 5xx, timeouts, connection drops) are
    retried up to max_retries with exponential backoff and jitter. Auth
    failures are fatal immediately.
    """
    if token is None:
        token = resolve_token(config)
    headers = {"Authorization": f"Bearer {token}", "Content-Type": "application/json"}
    attempts = 0
    last_failure = ""
    while True:
        attempts += 1
        try:
            response = requests.post(config.endpoint, json=payload,
                                     headers=headers, timeout=config.timeout)
        except (requests.Timeout, requests.ConnectionError) as exc:
            last_failure = f"{type(exc).__name__}"
        else:
            status = response.status_code
            if status == 200:
                return _extract_content(response)
            if status in _AUTH_STATUS:
                raise TransportError(f"authentication failed (HTTP {status}); not retried")
            if status not in _RETRYABLE_STATUS:
                raise TransportError(f"HTTP {status} from endpoint; not retried")
            last_failure = f"HTTP {status}"
        if attempts > config.max_retries:
            raise TransportError(
                f"request failed after {attempts} attempts (last: {last_failure})")
        delay = config.backoff_base * (2 ** (attempts - 1))
        delay *= 1.0 + 0.25 * random.random()
        logger.warning("transient failure (%s), retrying in %.2fs (attempt %d/%d)",
                       last_failure, delay, attempts, config.max_retries + 1)
        time.sleep(delay)


def _extract_content(response) -> str:
    try:
        body = response.json()
    except ValueError:
        raise ProtocolError("response body is not JSON") from None
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ProtocolError("response lacks choices[0].message.content") from None
    if not isinstance(content, str):
        raise ProtocolError("assistant content is not text")
    return content


_LABEL_BY_NAME = {label.value: label for label in LABELS}


def parse_response(raw: str) -> ParsedPhenotype:
    """Parse the per-label line grammar; strict about the full 19-label set.

    Missing labels, unknown label lines, duplicates and empty values are
    all hard errors so a silently dropped label can never corrupt metrics.
    """
    present: dict[PhenotypeLabel, bool] = {}
    evidence: dict[PhenotypeLabel, str] = {}
    for lineno, line in enumerate(raw.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        head, sep, value = stripped.partition(":")
        if not sep:
            raise ResponseFormatError(
                f"line {lineno}: expected '<Label>: <value>', got {stripped!r}")
        label = _LABEL_BY_NAME.get(head.strip().lower())
        if label is None:
            raise ResponseFormatError(f"line {lineno}: unknown label {head.strip()!r}")
        if label in present:
            raise ResponseFormatError(f"line {lineno}: duplicate label {label.value!r}")
        value = value.strip()
        if not value:
            raise ResponseFormatError(f"line {lineno}: empty value for {label.value!r}")
        present[label] = value.lower() != "none"
        evidence[label] = value
    missing = [label.value for label in LABELS if label not in present]
    if missing:
        raise ResponseFormatError(f"missing labels: {', '.join(missing)}")
    return ParsedPhenotype(present=present, evidence=evidence)


def to_vector(parsed: ParsedPhenotype) -> np.ndarray:
    """Binary vector in canonical label order."""
    vector = np.zeros(N_LABELS, dtype=np.int8)
    for label, flag in parsed.present.items():
        vector[label.ordinal] = 1 if flag else 0
    return vector


def render_response(present, evidence: dict[PhenotypeLabel, str] | None = None) -> str:
    """Emit the response grammar from a vector or per-label mapping.

    Inverse of parse_response up to evidence text; used by tests and mock
    endpoints.
    """
    evidence = evidence or {}
    lines = []
    for label in LABELS:
        if isinstance(present, dict):
            flag = bool(present.get(label))
        else:
            flag = bool(present[label.ordinal])
        if flag:
            text = evidence.get(label, "Documented finding")
        else:
            text = "None"
        lines.append(f"{label.display}: {text}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# corpus runs and offline re-scoring
# ---------------------------------------------------------------------------


@dataclass
class LlmRunResult:
    note_ids: list[str]
    matrix: np.ndarray
    failures: dict[str, str]
    audit_records: list[dict] = field(default_factory=list)


class _RateLimiter:
    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_at - now
            self._next_at = max(now, self._next_at) + self.min_interval
        if delay > 0:
            time.sleep(delay)


def run_corpus(notes: list[Note], config: LlmConfig,
               audit_path: str | None = None,
               instructions_text: str | None = None) -> LlmRunResult:
    """Query the endpoint for every note and collect binary vectors.

    Per-note failures (transport, protocol, malformed responses) are
    recorded and leave an all-zero row; the run itself never aborts on a
    single bad response. Session mode runs sequentially so the transcript
    stays coherent; stateless mode fans out over a thread pool.
    """
    token = resolve_token(config)
    system_text = instructions_text if instructions_text is not None else instructions()
    ordered = sorted(notes, key=lambda n: n.note_id)
    limiter = _RateLimiter(config.min_request_interval)

    results: dict[str, dict] = {}

    def run_one(note: Note, session: ChatSession | None) -> None:
        record: dict = {"note_id": note.note_id, "request": None, "response": None,
                        "parsed": None, "error": None, "ts": time.time()}
        try:
            payload = build_request(note, config, session=session,
                                    instructions_text=system_text)
            record["request"] = payload
            limiter.wait()
            raw = call(config, payload, token=token)
            record["response"] = raw
            parsed = parse_response(raw)
            record["parsed"] = {
                "vector": [int(x) for x in to_vector(parsed)],
                "evidence": {l.value: e for l, e in parsed.evidence.items()},
            }
            if session is not None:
                session.record(note.text, raw)
        except (ValidationError, TransportError, ProtocolError) as exc:
            record["error"] = f"{exc.code}: {exc}"
            logger.warning("note %s failed: %s", note.note_id, record["error"])
        results[note.note_id] = record

    if config.session_mode:
        session = ChatSession()
        for note in ordered:
            run_one(note, session)
    else:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            list(pool.map(lambda n: run_one(n, None), ordered))

    matrix = np.zeros((len(ordered), N_LABELS), dtype=np.int8)
    failures: dict[str, str] = {}
    records = []
    for i, note in enumerate(ordered):
        record = results[note.note_id]
        records.append(record)
        if record["error"] is not None:
            failures[note.note_id] = record["error"]
        elif record["parsed"] is not None:
            matrix[i] = record["parsed"]["vector"]
    if audit_path is not None:
        with open(audit_path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    return LlmRunResult(note_ids=[n.note_id for n in ordered], matrix=matrix,
                        failures=failures, audit_records=records)


def rescore_audit(path: str) -> tuple[list[str], np.ndarray, dict[str, str]]:
    """Rebuild (note_ids, matrix, failures) from an audit log, offline.

    Raw responses are re-parsed, so the result matches the live run
    bit-for-bit without touching the network.
    """
    note_ids: list[str] = []
    vectors: list[np.ndarray] = []
    failures: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path} line {lineno}: invalid JSON: {exc.msg}") from None
            note_id = record.get("note_id")
            if not note_id:
                raise ValidationError(f"{path} line {lineno}: missing note_id")
            note_ids.append(note_id)
            raw = record.get("response")
            if record.get("error") is not None or raw is None:
                failures[note_id] = record.get("error") or "no response recorded"
                vectors.append(np.zeros(N_LABELS, dtype=np.int8))
                continue
            try:
                vectors.append(to_vector(parse_response(raw)))
            except ResponseFormatError as exc:
                failures[note_id] = f"{exc.code}: {exc}"
                vectors.append(np.zeros(N_LABELS, dtype=np.int8))
    matrix = (np.stack(vectors) if vectors
              else np.zeros((0, N_LABELS), dtype=np.int8))
    return note_ids, matrix, failures
