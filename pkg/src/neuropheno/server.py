"""Review service: JSON API over the lexicon plus static UI assets.

The service exposes the candidate-review workflow: list candidates sorted
by similarity, accept/reject each, edit negation lists, trigger
regeneration, and inspect corpus contexts for a phrase. Every mutation is
persisted to the lexicon file before the HTTP response is sent (write to a
temp file, then rename), so an acknowledged decision survives a crash or
restart. A global version counter increments on every mutation;
concurrent decisions on the same candidate are last-write-wins.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .corpus import Note, tokenize_arrays
from .embedding import EmbeddingModel
from .errors import PhenoError, ValidationError
from .labels import LABEL_NAMES, parse_label
from .lexicon import (STATUS_SEED, Candidate, Lexicon, generate_candidates,
                      normalize_phrase)

logger = logging.getLogger(__name__)


class ReviewState:
    """Lexicon, candidates and corpus shared by all request threads."""

    def __init__(self, lexicon_path: str, model: EmbeddingModel,
                 notes: list[Note], limit_per_seed: int = 50):
        self.lexicon_path = lexicon_path
        self.lexicon = Lexicon.load(lexicon_path)
        self.model = model
        self.notes = notes
        self.limit_per_seed = limit_per_seed
        self.version = 0
        self.lock = threading.RLock()
        self.candidates: list[Candidate] = []
        self._token_table: list[tuple[Note, list[str], object, object]] | None = None
        self.regenerate()

    # -- candidate lifecycle --------------------------------------------------

    def regenerate(self) -> int:
        with self.lock:
            self.candidates = generate_candidates(
                self.lexicon, self.model, self.limit_per_seed)
            self.version += 1
            return len(self.candidates)

    def candidate_page(self, label: str | None, offset: int, limit: int) -> dict:
        with self.lock:
            rows = self.candidates
            if label is not None:
                wanted = parse_label(label)
                rows = [c for c in rows if c.label == wanted]
            page = rows[offset:offset + limit]
            payload = []
            for c in page:
                entry = self.lexicon.get(c.phrase, c.label)
                payload.append({
                    "phrase": c.phrase,
                    "label": c.label.value,
                    "similarity": c.similarity,
                    "nearest_seed": c.nearest_seed,
                    "status": entry.status if entry else "undecided",
                })
            return {"total": len(rows), "offset": offset,
                    "candidates": payload, "version": self.version}

    def decide(self, phrase: str, label_name: str, decision: str) -> dict:
        label = parse_label(label_name)
        with self.lock:
            existing = self.lexicon.get(phrase, label)
            if existing is not None and existing.status == STATUS_SEED:
                raise _Conflict(f"{existing.phrase!r} is a seed and cannot be decided")
            similarity = next(
                (c.similarity for c in self.candidates
                 if c.phrase == normalize_phrase(phrase) and c.label == label), None)
            entry = self.lexicon.decide(phrase, label, decision,
                                        similarity=similarity, provenance="review-ui")
            self._persist()
            return {"ok": True, "phrase": entry.phrase, "label": entry.label.value,
                    "status": entry.status, "version": self.version}

    def edit_negation(self, phrase: str, position: str, action: str) -> dict:
        with self.lock:
            if action == "add":
                self.lexicon.add_negation(phrase, position)
            elif action == "remove":
                self.lexicon.remove_negation(phrase, position)
            else:
                raise ValidationError(f"unknown negation action {action!r}")
            self._persist()
            return {"ok": True, "version": self.version}

    def _persist(self) -> None:
        self.lexicon.save(self.lexicon_path)
        self.version += 1

    # -- corpus contexts -------------------------------------------------------

    def contexts(self, phrase: str, limit: int = 20, window: int = 10) -> list[dict]:
        parts = normalize_phrase(phrase).split("_")
        table = self._tokens()
        out: list[dict] = []
        for note, surfaces, starts, ends in table:
            n = len(surfaces)
            span = len(parts)
            for i in range(n - span + 1):
                if surfaces[i:i + span] == parts:
                    lo = max(0, i - window)
                    hi = min(n - 1, i + span - 1 + window)
                    raw = note.text.encode("utf-8")[starts[lo]:ends[hi]]
                    out.append({"note_id": note.note_id,
                                "snippet": raw.decode("utf-8", "replace")})
                    if len(out) >= limit:
                        return out
        return out

    def _tokens(self):
        if self._token_table is None:
            table = []
            for note in self.notes:
                surfaces, starts, ends, _ = tokenize_arrays(note.text)
                table.append((note, surfaces, starts, ends))
            self._token_table = table
        return self._token_table


class _Conflict(ValidationError):
    code = "conflict"


_FALLBACK_PAGE = """<!doctype html>
<html><head><title>neuropheno review</title></head>
<body><h1>neuropheno review service</h1>
<p>No UI build directory was configured. The JSON API is live under
<code>/api/</code>: labels, lexicon, candidates, decision, regenerate,
contexts, negations.</p></body></html>
"""


class ReviewApiHandler(BaseHTTPRequestHandler):
    server_version = "neuropheno-review/0.1"

    def log_message(self, fmt, *args):  # route HTTP chatter to logging
        logger.debug("%s %s", self.address_string(), fmt % args)

    @property
    def state(self) -> ReviewState:
        return self.server.state  # type: ignore[attr-defined]

    @property
    def ui_dir(self) -> str | None:
        return self.server.ui_dir  # type: ignore[attr-defined]

    # -- plumbing -------------------------------------------------------------

    def _send_json(self, payload: dict | list, status: int = 200) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, code: str, message: str, status: int) -> None:
        self._send_json({"error": {"code": code, "message": message}}, status=status)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ValidationError("request body must be a JSON object")
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise ValidationError("request body is not valid JSON") from None
        if not isinstance(doc, dict):
            raise ValidationError("request body must be a JSON object")
        return doc

    def _require(self, doc: dict, *fields: str) -> list[str]:
        missing = [f for f in fields if f not in doc]
        if missing:
            raise ValidationError(f"missing fields: {', '.join(missing)}")
        return [str(doc[f]) for f in fields]

    # -- routing ---------------------------------------------------------------

    def do_GET(self) -> None:  # noqa: N802 (stdlib handler naming)
        url = urlsplit(self.path)
        query = parse_qs(url.query)
        try:
            if url.path == "/api/labels":
                self._send_json({"labels": list(LABEL_NAMES)})
            elif url.path == "/api/lexicon":
                with self.state.lock:
                    doc = self.state.lexicon.to_dict()
                    doc["version"] = self.state.version
                self._send_json(doc)
            elif url.path == "/api/candidates":
                label = query.get("label", [None])[0]
                offset = int(query.get("offset", ["0"])[0])
                limit = int(query.get("limit", ["50"])[0])
                self._send_json(self.state.candidate_page(label, offset, limit))
            elif url.path == "/api/contexts":
                phrase = query.get("phrase", [""])[0]
                if not phrase:
                    raise ValidationError("query parameter 'phrase' is required")
                self._send_json({"contexts": self.state.contexts(phrase)})
            elif url.path == "/api/negations":
                with self.state.lock:
                    rows = [{"phrase": n.phrase, "position": n.position}
                            for n in self.state.lexicon.negations()]
                    self._send_json({"negations": rows, "version": self.state.version})
            elif url.path.startswith("/api/"):
                self._send_error_json("not-found", f"no such endpoint: {url.path}", 404)
            else:
                self._serve_static(url.path)
        except _Conflict as exc:
            self._send_error_json(exc.code, str(exc), 409)
        except (ValidationError, ValueError) as exc:
            self._send_error_json(getattr(exc, "code", "schema"), str(exc), 400)
        except PhenoError as exc:
            self._send_error_json(exc.code, str(exc), 500)

    def do_POST(self) -> None:  # noqa: N802
        url = urlsplit(self.path)
        try:
            if url.path == "/api/decision":
                doc = self._read_body()
                phrase, label, decision = self._require(doc, "phrase", "label", "decision")
                self._send_json(self.state.decide(phrase, label, decision))
            elif url.path == "/api/negations":
                doc = self._read_body()
                phrase, position = self._require(doc, "phrase", "position")
                action = str(doc.get("action", "add"))
                self._send_json(self.state.edit_negation(phrase, position, action))
            elif url.path == "/api/regenerate":
                count = self.state.regenerate()
                self._send_json({"ok": True, "count": count,
                                 "version": self.state.version})
            else:
                self._send_error_json("not-found", f"no such endpoint: {url.path}", 404)
        except _Conflict as exc:
            self._send_error_json(exc.code, str(exc), 409)
        except (ValidationError, ValueError) as exc:
            self._send_error_json(getattr(exc, "code", "schema"), str(exc), 400)
        except PhenoError as exc:
            self._send_error_json(exc.code, str(exc), 500)

    # -- static assets -----------------------------------------------------------

    def _serve_static(self, path: str) -> None:
        if self.ui_dir is None:
            body = _FALLBACK_PAGE.encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "text/html; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        rel = path.lstrip("/") or "index.html"
        base = os.path.realpath(self.ui_dir)
        target = os.path.realpath(os.path.join(base, rel))
        if not target.startswith(base + os.sep) and target != base:
            self._send_error_json("not-found", "path outside UI directory", 404)
            return
        if os.path.isdir(target):
            target = os.path.join(target, "index.html")
        if not os.path.isfile(target):
            self._send_error_json("not-found", f"no such asset: {path}", 404)
            return
        ctype = mimetypes.guess_type(target)[0] or "application/octet-stream"
        with open(target, "rb") as fh:
            body = fh.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def make_server(state: ReviewState, host: str = "127.0.0.1", port: int = 8765,
                ui_dir: str | None = None) -> ThreadingHTTPServer:
    """Bind the review service; raises OSError when the port is taken."""
    server = ThreadingHTTPServer((host, port), ReviewApiHandler)
    server.state = state  # type: ignore[attr-defined]
    server.ui_dir = ui_dir  # type: ignore[attr-defined]
    return server
