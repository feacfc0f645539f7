"""Chat-completions gateway: prompt templates, retries, caching, batch runs.

Auth tokens are read from a named environment variable at call time and
never serialized. Responses are cached by (stimulus id, prompt hash,
endpoint fingerprint); a warm cache replays without any network traffic,
which also makes run_benchmark resumable.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .gridsynth import SequenceStimulus, StimulusRecord
from .perturb import Attribute

DEFAULT_MAX_NEW_TOKENS = 1024

GRID_PROMPT = """You are solving an odd-one-out visual perception task.
You are given an image showing a {rows}×{cols} grid of {shape}s. All {shape}s appear the same, except one that is visually different in {odd_desc}.

This is a visual perception task that does not require lengthy logical reasoning.

Instructions
- Carefully inspect the grid.
- Identify the grid position (row and column) of the {shape} that is different.
- Counting starts from the top-left corner, i.e., Row 1, Column 1.
- Provide brief visual observations if needed (no more than 300 words).

Output Format Requirements
- Provide concise natural-language observations.
- End the response with the final answer in the following strict LaTeX format:
\\boxed{{Row X, Column Y}}
where X and Y are integers (e.g., Row 2, Column 3).
- Do not include any text after the final \\boxed{{}}.
- If no odd {shape} exists, output:
\\boxed{{Row 0, Column 0}}"""

GRID_MINIMAL_PROMPT = """Identify the object that differs from the others in the {rows}×{cols} grid.
The difference lies in {odd_desc}.
Count positions from the top-left corner as Row 1, Column 1.
Return the final answer strictly in the following format:
\\boxed{{Row X, Column Y}}"""

SEQUENCE_PROMPT = """You are presented with {n} images, labeled image1, image2, ..., image{n}. Identify all anomalous images in the set.

Output Rules:
1. You may perform observation and comparative reasoning before answering.
2. The final answer must be enclosed in exactly one \\boxed{{}} block.
3. Inside the box, list the labels of all anomalous images (e.g., image1,image3).
4. If no anomalous images are found, output \\boxed{{}}."""

SHAPE_NOUN = "icon"


class ModeMismatch(TypeError):
    pass


class AuthFailure(RuntimeError):
    pass


class RateLimited(RuntimeError):
    pass


class ModelTimeout(RuntimeError):
    pass


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelEndpoint:
    base_url: str
    model_name: str
    auth_env: str = "ODDGRID_API_KEY"
    timeout_s: float = 120.0
    max_parallel: int = 4
    temperature: float | None = None
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    max_attempts: int = 3
    retry_base_s: float = 0.5

    def fingerprint(self) -> str:
        raw = f"{self.base_url}|{self.model_name}|{self.temperature}|{self.max_new_tokens}"
        return hashlib.sha256(raw.encode()).hexdigest()[:12]

    def token(self) -> str | None:
        name = os.environ.get("ODDGRID_API_KEY_VAR", self.auth_env)
        return os.environ.get(name)


@dataclass
class QueryRecord:
    stimulus_id: str
    prompt: str
    image_refs: list[str]
    raw_text: str
    latency_ms: float
    attempts: int
    endpoint_fingerprint: str
    cached: bool = field(default=False, compare=False)


def describe_attributes(attrs: tuple[Attribute, ...]) -> str:
    names = [a.value for a in attrs]
    if len(names) == 1:
        return names[0]
    if len(names) == 2:
        return f"{names[0]} and {names[1]}"
    return ", ".join(names[:-1]) + f", and {names[-1]}"


def build_prompt(record, mode: str) -> str:
    """Instantiate the prompt template for a stimulus; byte-stable."""
    if mode in ("grid", "grid_minimal"):
        if not isinstance(record, StimulusRecord):
            raise ModeMismatch(f"{mode} mode needs a StimulusRecord")
        tpl = GRID_PROMPT if mode == "grid" else GRID_MINIMAL_PROMPT
        return tpl.format(
            rows=record.grid.rows,
            cols=record.grid.cols,
            shape=SHAPE_NOUN,
            odd_desc=describe_attributes(record.spec.attributes),
        )
    if mode == "sequence":
        if not isinstance(record, SequenceStimulus):
            raise ModeMismatch("sequence mode needs a SequenceStimulus")
        return SEQUENCE_PROMPT.format(n=record.n)
    raise ValueError(f"unknown mode {mode!r}")


def _cache_key(stimulus_id: str, prompt: str, fingerprint: str) -> str:
    p = hashlib.sha256(prompt.encode()).hexdigest()
    return hashlib.sha256(f"{stimulus_id}\n{p}\n{fingerprint}".encode()).hexdigest()


def _cache_path(cache_dir: Path, key: str) -> Path:
    return cache_dir / f"{key}.json"


def _load_cached(cache_dir: Path | None, key: str) -> QueryRecord | None:
    if cache_dir is None:
        return None
    path = _cache_path(cache_dir, key)
    if not path.exists():
        return None
    obj = json.loads(path.read_text())
    return QueryRecord(cached=True, **obj)


def _store_cached(cache_dir: Path | None, key: str, rec: QueryRecord) -> None:
    if cache_dir is None:
        return
    cache_dir.mkdir(parents=True, exist_ok=True)
    obj = {
        "stimulus_id": rec.stimulus_id,
        "prompt": rec.prompt,
        "image_refs": rec.image_refs,
        "raw_text": rec.raw_text,
        "latency_ms": rec.latency_ms,
        "attempts": rec.attempts,
        "endpoint_fingerprint": rec.endpoint_fingerprint,
    }
    tmp = _cache_path(cache_dir, key).with_suffix(".tmp")
    tmp.write_text(json.dumps(obj))
    tmp.replace(_cache_path(cache_dir, key))


def _image_part(path: Path) -> dict:
    data = base64.b64encode(path.read_bytes()).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{data}"}}


def query(
    endpoint: ModelEndpoint,
    prompt: str,
    images: list[str | Path],
    stimulus_id: str,
    cache_dir: str | Path | None = None,
) -> QueryRecord:
    """One chat request with the images attached inline.

    Retries transient failures (timeouts, 5xx, 429 honoring Retry-After)
    with exponential backoff; auth failures surface immediately.
    """
    cache = Path(cache_dir) if cache_dir is not None else None
    key = _cache_key(stimulus_id, prompt, endpoint.fingerprint())
    cached = _load_cached(cache, key)
    if cached is not None:
        return cached

    paths = [Path(p) for p in images]
    for p in paths:
        if not p.exists():
            raise FileNotFoundError(f"stimulus image missing: {p}")
    content = [{"type": "text", "text": prompt}] + [_image_part(p) for p in paths]
    payload = {
        "model": endpoint.model_name,
        "messages": [{"role": "user", "content": content}],
        "max_tokens": endpoint.max_new_tokens,
    }
    if endpoint.temperature is not None:
        payload["temperature"] = endpoint.temperature
    headers = {"Content-Type": "application/json"}
    token = endpoint.token()
    if token:
        headers["Authorization"] = f"Bearer {token}"

    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    start = time.monotonic()
    last_error: Exception | None = None
    for attempt in range(1, endpoint.max_attempts + 1):
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=endpoint.timeout_s)
        except requests.Timeout as exc:
            last_error = ModelTimeout(f"timed out after {endpoint.timeout_s}s")
            _backoff(endpoint, attempt)
            continue
        except requests.RequestException as exc:
            last_error = TransportError(str(exc))
            _backoff(endpoint, attempt)
            continue
        if resp.status_code in (401, 403):
            raise AuthFailure(f"endpoint rejected credentials ({resp.status_code})")
        if resp.status_code == 429:
            last_error = RateLimited("rate limited")
            retry_after = resp.headers.get("Retry-After")
            if retry_after is not None:
                try:
                    time.sleep(min(float(retry_after), 30.0))
                    continue
                except ValueError:
                    pass
            _backoff(endpoint, attempt)
            continue
        if resp.status_code >= 500:
            last_error = TransportError(f"server error {resp.status_code}")
            _backoff(endpoint, attempt)
            continue
        if resp.status_code != 200:
            raise TransportError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise TransportError(f"malformed response body: {resp.text[:200]}")
        rec = QueryRecord(
            stimulus_id=stimulus_id,
            prompt=prompt,
            image_refs=[str(p) for p in paths],
            raw_text=text,
            latency_ms=(time.monotonic() - start) * 1000.0,
            attempts=attempt,
            endpoint_fingerprint=endpoint.fingerprint(),
        )
        _store_cached(cache, key, rec)
        return rec
    raise last_error if last_error else TransportError("request failed")


def _backoff(endpoint: ModelEndpoint, attempt: int) -> None:
    if attempt < endpoint.max_attempts:
        time.sleep(endpoint.retry_base_s * (2 ** (attempt - 1)))


def run_benchmark(
    endpoint: ModelEndpoint,
    records: list[StimulusRecord],
    data_dir: str | Path,
    out_path: str | Path,
    mode: str = "grid",
    parallelism: int = 4,
    cache_dir: str | Path | None = None,
    allow_partial: bool = False,
    failures_path: str | Path | None = None,
) -> int:
    """Stream every record through query and write (id, raw_text) jsonl.

    Per-sample failures land in a sidecar file; the run raises unless
    allow_partial is set or no sample failed. Output order is sorted by id,
    so a warm cache reproduces the file byte for byte. Returns the failure
    count.
    """
    data = Path(data_dir)
    results: dict[str, str] = {}
    failures: dict[str, str] = {}

    def one(rec: StimulusRecord) -> None:
        prompt = build_prompt(rec, mode)
        image = data / rec.image_path
        try:
            qr = query(endpoint, prompt, [image], rec.id, cache_dir=cache_dir)
            results[rec.id] = qr.raw_text
        except Exception as exc:
            failures[rec.id] = f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        list(pool.map(one, records))

    lines = [
        json.dumps({"id": i, "raw_text": results[i]}, separators=(", ", ": "))
        for i in sorted(results)
    ]
    Path(out_path).write_text("\n".join(lines) + ("\n" if lines else ""))
    if failures_path is not None:
        flines = [
            json.dumps({"id": i, "error": failures[i]}) for i in sorted(failures)
        ]
        Path(failures_path).write_text("\n".join(flines) + ("\n" if flines else ""))
    if failures and not allow_partial:
        raise TransportError(f"{len(failures)} samples failed; rerun or pass allow_partial")
    return len(failures)
