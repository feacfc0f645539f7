"""Human-annotation sessions and the embedded HTTP service.

A session serves a stratified sample of test stimuli (50 per type by
default) behind practice items drawn from the validation split. Served
payloads never contain the odd cell or any perturbation field, and no
correctness feedback exists anywhere in the protocol. Every session is an
append-only jsonl event log, so a crash loses at most the in-flight
response.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .gridsynth import StimulusRecord, record_type_label
from .perturb import TYPE_LABELS

SCORED_PER_TYPE = 50
DEFAULT_PRACTICE = 5

# every key the /next endpoint may emit; the schema test pins this
NEXT_PAYLOAD_KEYS = {
    "session_id", "stimulus_id", "rows", "cols", "block_px", "margin_px",
    "image_url", "practice", "progress", "done",
}


class InsufficientSamples(ValueError):
    def __init__(self, what: str):
        self.what = what
        super().__init__(f"not enough stimuli available: {what}")


class OutOfOrder(ValueError):
    pass


class DuplicateResponse(ValueError):
    pass


class OutOfBoundsCell(ValueError):
    pass


class IncompleteSession(ValueError):
    pass


@dataclass
class AnnotationResponse:
    stimulus_id: str
    row: int
    col: int
    latency_ms: float
    timestamp: float


@dataclass
class SessionState:
    session_id: str
    annotator_id: str
    items: list[tuple[str, bool]]  # (stimulus_id, is_practice)
    cursor: int = 0
    responses: list[AnnotationResponse] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.items)

    @property
    def completed(self) -> bool:
        return self.cursor >= len(self.items)

    def scored_ids(self) -> list[str]:
        return [sid for sid, practice in self.items if not practice]


def create_session(
    records: list[StimulusRecord],
    annotator_id: str,
    seed: int,
    session_id: str | None = None,
    per_type: int = SCORED_PER_TYPE,
    practice_count: int = DEFAULT_PRACTICE,
) -> SessionState:
    """Stratified scored sample (per_type of each of the 7 types from the
    test split) shuffled by seed, with practice items from the validation
    split prepended.

    The sample depends on the seed only, never the annotator: every
    annotator given the same seed judges the same stimuli in the same
    order, which the cross-annotator report requires.
    """
    rng = np.random.default_rng(seed)
    test = [r for r in records if r.split == "test"]
    val = [r for r in records if r.split == "val"]

    by_type: dict[str, list[StimulusRecord]] = {t: [] for t in TYPE_LABELS}
    for r in test:
        by_type[record_type_label(r)].append(r)

    scored: list[str] = []
    for t in TYPE_LABELS:
        pool = by_type[t]
        if len(pool) < per_type:
            raise InsufficientSamples(f"{t}: need {per_type}, have {len(pool)}")
        picks = rng.choice(len(pool), size=per_type, replace=False)
        scored.extend(pool[int(i)].id for i in sorted(picks.tolist()))
    order = rng.permutation(len(scored))
    scored = [scored[int(i)] for i in order]

    practice: list[str] = []
    if practice_count > 0:
        if len(val) < practice_count:
            raise InsufficientSamples(
                f"practice: need {practice_count} validation records, have {len(val)}"
            )
        picks = rng.choice(len(val), size=practice_count, replace=False)
        practice = [val[int(i)].id for i in sorted(picks.tolist())]

    items = [(sid, True) for sid in practice] + [(sid, False) for sid in scored]
    sid = session_id or f"s-{annotator_id}-{seed}"
    return SessionState(session_id=sid, annotator_id=annotator_id, items=items)


def record_response(
    session: SessionState,
    response: AnnotationResponse,
    records_by_id: dict[str, StimulusRecord],
) -> int:
    """Append one response, validate ordering and bounds, advance the cursor.

    Returns the new cursor. Raises DuplicateResponse for an already-answered
    stimulus, OutOfOrder for anything else off-cursor, and OutOfBoundsCell
    for a cell outside the stimulus grid.
    """
    if session.completed:
        raise OutOfOrder("session already completed")
    answered = {r.stimulus_id for r in session.responses}
    if response.stimulus_id in answered:
        raise DuplicateResponse(f"{response.stimulus_id} already answered")
    expected = session.items[session.cursor][0]
    if response.stimulus_id != expected:
        raise OutOfOrder(f"expected {expected}, got {response.stimulus_id}")
    rec = records_by_id[response.stimulus_id]
    if not (1 <= response.row <= rec.grid.rows and 1 <= response.col <= rec.grid.cols):
        raise OutOfBoundsCell(
            f"({response.row}, {response.col}) outside {rec.grid.rows}x{rec.grid.cols}"
        )
    session.responses.append(response)
    session.cursor += 1
    return session.cursor


@dataclass
class HumanReport:
    per_annotator: dict[str, dict]
    mean_per_type: dict[str, float | None]
    mean_total: float

    def to_obj(self) -> dict:
        return {
            "per_annotator": self.per_annotator,
            "mean_per_type": self.mean_per_type,
            "mean_total": self.mean_total,
        }


def human_report(
    sessions: list[SessionState], records_by_id: dict[str, StimulusRecord]
) -> HumanReport:
    """Per-annotator strict accuracy by type plus the cross-annotator mean.

    Practice items are excluded. All sessions must be complete and cover the
    same scored stimulus set.
    """
    if not sessions:
        raise IncompleteSession("no sessions given")
    universe = None
    for s in sessions:
        if not s.completed:
            raise IncompleteSession(f"{s.session_id} at {s.cursor}/{s.total}")
        ids = frozenset(s.scored_ids())
        if universe is None:
            universe = ids
        elif ids != universe:
            raise ValueError("sessions cover different stimulus sets")

    per_annotator: dict[str, dict] = {}
    sums: dict[str, list[float]] = {t: [] for t in TYPE_LABELS}
    totals: list[float] = []
    for s in sessions:
        answers = {r.stimulus_id: (r.row, r.col) for r in s.responses}
        hit: dict[str, int] = {t: 0 for t in TYPE_LABELS}
        cnt: dict[str, int] = {t: 0 for t in TYPE_LABELS}
        for sid in s.scored_ids():
            rec = records_by_id[sid]
            t = record_type_label(rec)
            cnt[t] += 1
            if answers.get(sid) == (rec.odd_row, rec.odd_col):
                hit[t] += 1
        per_type = {t: (hit[t] / cnt[t] if cnt[t] else None) for t in TYPE_LABELS}
        n = sum(cnt.values())
        total = sum(hit.values()) / n if n else 0.0
        per_annotator[s.annotator_id] = {"per_type": per_type, "total": total}
        totals.append(total)
        for t in TYPE_LABELS:
            if per_type[t] is not None:
                sums[t].append(per_type[t])
    mean_per_type = {
        t: (sum(v) / len(v) if v else None) for t, v in sums.items()
    }
    return HumanReport(
        per_annotator=per_annotator,
        mean_per_type=mean_per_type,
        mean_total=sum(totals) / len(totals),
    )


# --- persistence: one append-only jsonl event log per session


def _log_path(sessions_dir: Path, session_id: str) -> Path:
    return sessions_dir / f"{session_id}.jsonl"


def append_event(sessions_dir: Path, session_id: str, event: dict) -> None:
    sessions_dir.mkdir(parents=True, exist_ok=True)
    with open(_log_path(sessions_dir, session_id), "a") as f:
        f.write(json.dumps(event, separators=(",", ":")) + "\n")
        f.flush()
        os.fsync(f.fileno())


def persist_created(sessions_dir: Path, session: SessionState) -> None:
    append_event(
        sessions_dir,
        session.session_id,
        {
            "event": "created",
            "session_id": session.session_id,
            "annotator_id": session.annotator_id,
            "items": [[sid, p] for sid, p in session.items],
        },
    )


def persist_response(sessions_dir: Path, session_id: str, r: AnnotationResponse) -> None:
    append_event(
        sessions_dir,
        session_id,
        {
            "event": "response",
            "stimulus_id": r.stimulus_id,
            "row": r.row,
            "col": r.col,
            "latency_ms": r.latency_ms,
            "timestamp": r.timestamp,
        },
    )


def load_session(path: Path) -> SessionState:
    session = None
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj["event"] == "created":
            session = SessionState(
                session_id=obj["session_id"],
                annotator_id=obj["annotator_id"],
                items=[(sid, bool(p)) for sid, p in obj["items"]],
            )
        elif obj["event"] == "response" and session is not None:
            session.responses.append(
                AnnotationResponse(
                    stimulus_id=obj["stimulus_id"],
                    row=obj["row"],
                    col=obj["col"],
                    latency_ms=obj["latency_ms"],
                    timestamp=obj["timestamp"],
                )
            )
            session.cursor += 1
    if session is None:
        raise ValueError(f"no created event in {path}")
    return session


def load_sessions(sessions_dir: Path) -> dict[str, SessionState]:
    out: dict[str, SessionState] = {}
    if not sessions_dir.is_dir():
        return out
    for path in sorted(sessions_dir.glob("*.jsonl")):
        s = load_session(path)
        out[s.session_id] = s
    return out


# --- HTTP layer


class AnnotationService:
    """Owns sessions, their locks, and the stimulus universe."""

    def __init__(
        self,
        records: list[StimulusRecord],
        data_dir: str | Path,
        sessions_dir: str | Path,
        static_dir: str | Path | None = None,
    ):
        self.records = records
        self.records_by_id = {r.id: r for r in records}
        self.data_dir = Path(data_dir)
        self.sessions_dir = Path(sessions_dir)
        self.static_dir = Path(static_dir) if static_dir else None
        self.sessions = load_sessions(self.sessions_dir)
        self._locks: dict[str, threading.Lock] = {}
        self._global = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._global:
            return self._locks.setdefault(session_id, threading.Lock())

    def create(self, annotator_id: str, seed: int, practice_count: int = DEFAULT_PRACTICE,
               per_type: int = SCORED_PER_TYPE) -> SessionState:
        with self._global:
            n = sum(
                1 for s in self.sessions.values()
                if s.annotator_id == annotator_id
            )
            sid = f"s-{annotator_id}-{seed}-{n:02d}"
        session = create_session(
            self.records, annotator_id, seed,
            session_id=sid, per_type=per_type, practice_count=practice_count,
        )
        persist_created(self.sessions_dir, session)
        with self._global:
            self.sessions[session.session_id] = session
        return session

    def next_payload(self, session_id: str) -> dict:
        s = self.sessions[session_id]
        if s.completed:
            return {"session_id": s.session_id, "done": True}
        sid, practice = s.items[s.cursor]
        rec = self.records_by_id[sid]
        return {
            "session_id": s.session_id,
            "stimulus_id": sid,
            "rows": rec.grid.rows,
            "cols": rec.grid.cols,
            "block_px": rec.grid.block_px,
            "margin_px": rec.grid.margin_px,
            "image_url": f"/images/{sid}.png",
            "practice": practice,
            "progress": {"done": s.cursor, "total": s.total},
        }

    def submit(self, session_id: str, body: dict) -> dict:
        s = self.sessions[session_id]
        with self._lock(session_id):
            r = AnnotationResponse(
                stimulus_id=body["stimulus_id"],
                row=int(body["row"]),
                col=int(body["col"]),
                latency_ms=float(body.get("latency_ms", 0.0)),
                timestamp=time.time(),
            )
            cursor = record_response(s, r, self.records_by_id)
            persist_response(self.sessions_dir, session_id, r)
        return {"ok": True, "cursor": cursor, "done": s.completed}

    def status(self, session_id: str) -> dict:
        s = self.sessions[session_id]
        return {
            "session_id": s.session_id,
            "annotator_id": s.annotator_id,
            "cursor": s.cursor,
            "total": s.total,
            "completed": s.completed,
        }

    def image_bytes(self, stimulus_id: str) -> bytes:
        rec = self.records_by_id[stimulus_id]
        path = self.data_dir / rec.image_path
        return path.read_bytes()


_SESSION_NEXT = re.compile(r"^/sessions/([^/]+)/next$")
_SESSION_RESP = re.compile(r"^/sessions/([^/]+)/responses$")
_SESSION_STATUS = re.compile(r"^/sessions/([^/]+)/status$")
_IMAGE = re.compile(r"^/images/([^/]+)\.png$")

_ERROR_STATUS = {
    OutOfOrder: 409,
    DuplicateResponse: 409,
    OutOfBoundsCell: 422,
    InsufficientSamples: 422,
    KeyError: 404,
}


def make_handler(service: AnnotationService):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet
            pass

        def _json(self, status: int, obj: dict) -> None:
            data = json.dumps(obj).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            if length == 0:
                return {}
            return json.loads(self.rfile.read(length))

        def _static(self, rel: str) -> None:
            if service.static_dir is None:
                self._json(404, {"error": "no static assets configured"})
                return
            target = (service.static_dir / rel.lstrip("/")).resolve()
            if not str(target).startswith(str(service.static_dir.resolve())) or not target.is_file():
                self._json(404, {"error": "not found"})
                return
            ctype = {
                ".html": "text/html", ".js": "text/javascript",
                ".css": "text/css", ".png": "image/png",
            }.get(target.suffix, "application/octet-stream")
            data = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            try:
                m = _SESSION_NEXT.match(self.path)
                if m:
                    self._json(200, service.next_payload(m.group(1)))
                    return
                m = _SESSION_STATUS.match(self.path)
                if m:
                    self._json(200, service.status(m.group(1)))
                    return
                m = _IMAGE.match(self.path)
                if m:
                    data = service.image_bytes(m.group(1))
                    self.send_response(200)
                    self.send_header("Content-Type", "image/png")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                    return
                if self.path == "/" or self.path == "/index.html":
                    self._static("index.html")
                    return
                if self.path.startswith("/static/"):
                    self._static(self.path[len("/static/") :])
                    return
                self._json(404, {"error": "not found"})
            except Exception as exc:
                self._error(exc)

        def do_POST(self):
            try:
                if self.path == "/sessions":
                    body = self._body()
                    s = service.create(
                        annotator_id=str(body["annotator_id"]),
                        seed=int(body.get("seed", 0)),
                        practice_count=int(body.get("practice_count", DEFAULT_PRACTICE)),
                        per_type=int(body.get("per_type", SCORED_PER_TYPE)),
                    )
                    self._json(
                        201,
                        {
                            "session_id": s.session_id,
                            "total": s.total,
                            "practice_count": sum(1 for _, p in s.items if p),
                        },
                    )
                    return
                m = _SESSION_RESP.match(self.path)
                if m:
                    self._json(200, service.submit(m.group(1), self._body()))
                    return
                self._json(404, {"error": "not found"})
            except Exception as exc:
                self._error(exc)

        def _error(self, exc: Exception) -> None:
            status = _ERROR_STATUS.get(type(exc), 500)
            self._json(status, {"error": f"{type(exc).__name__}: {exc}"})

    return Handler


def serve(service: AnnotationService, host: str = "127.0.0.1", port: int = 8765) -> ThreadingHTTPServer:
    """Build the HTTP server; caller decides between serve_forever and a thread."""
    return ThreadingHTTPServer((host, port), make_handler(service))
