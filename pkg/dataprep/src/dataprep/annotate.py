"""Teacher annotation over a completion API.

For each corpus item the job renders a zero-shot prompt naming the task and
its classes, requests a one-token completion with the top-k token
log-probabilities, and biases the class tokens (+100 by default) so the
answer is always one of them.  The stored label distribution keeps the
returned log-probability per class; classes absent from the provider's top-k
get the -100 filler.

Jobs are resumable: completed items are read back from the output file and
only pending items are (re)annotated; the final file is rebuilt sorted by
item id, so a resumed job converges to the same bytes.  Every request and
raw response is appended to an audit log beside the output.
"""

from __future__ import annotations

import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import yaml

from .corpus import CorpusItem, resolve_gold
from .schema import FILLER_LOGPROB, write_atomic
from .tokens import ReferenceTokenizer, Tokenizer, validate_class_tokens

ANNOTATIONS_NAME = "annotations.jsonl"
AUDIT_NAME = "audit.jsonl"


class AnnotationError(Exception):
    pass


class CompletionClient(Protocol):
    def complete(self, request: dict) -> dict:
        """POST one completion request, returning the provider response."""


@dataclass(frozen=True)
class AnnotationJob:
    task: str
    prompt_template: str          # must contain {text}
    class_names: tuple[str, ...]  # order defines label indices
    class_tokens: tuple[str, ...] # provider token per class, same order
    model: str = "text-davinci-003"
    max_tokens: int = 1
    temperature: float = 0.0
    logprob_count: int = 5
    logit_bias_value: float = 100.0
    requests_per_minute: int = 60
    concurrency: int = 1
    max_retries: int = 3
    retry_backoff: float = 0.5    # seconds, doubled per attempt
    cost_per_request: float = 0.0
    budget_cap: float | None = None  # currency; None = unlimited

    def validate(self) -> None:
        if "{text}" not in self.prompt_template:
            raise AnnotationError("prompt_template must contain a {text} placeholder")
        if len(self.class_names) < 2:
            raise AnnotationError("need at least 2 classes")
        if len(self.class_tokens) != len(self.class_names):
            raise AnnotationError("class_tokens must match class_names one to one")
        if len(set(self.class_tokens)) != len(self.class_tokens):
            raise AnnotationError("duplicate class tokens")
        if self.max_tokens < 1 or self.logprob_count < 1:
            raise AnnotationError("max_tokens and logprob_count must be >= 1")
        if self.concurrency < 1 or self.requests_per_minute < 1:
            raise AnnotationError("concurrency and requests_per_minute must be >= 1")
        if self.budget_cap is not None and self.budget_cap < 0:
            raise AnnotationError("budget_cap must be >= 0")


def load_job(path: str) -> AnnotationJob:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise AnnotationError(f"{path}: job spec must be a mapping")
    try:
        job = AnnotationJob(
            task=doc["task"],
            prompt_template=doc["prompt_template"],
            class_names=tuple(doc["class_names"]),
            class_tokens=tuple(doc["class_tokens"]),
            **{k: v for k, v in doc.items()
               if k not in ("task", "prompt_template", "class_names", "class_tokens")},
        )
    except (KeyError, TypeError) as exc:
        raise AnnotationError(f"{path}: invalid job spec: {exc}") from exc
    job.validate()
    return job


def render_request(job: AnnotationJob, item: CorpusItem,
                   tokenizer: Tokenizer | None = None) -> dict:
    """The exact provider request for one item; the logit bias covers the
    class tokens and nothing else."""
    tokenizer = tokenizer or ReferenceTokenizer()
    token_ids = validate_class_tokens(list(job.class_tokens), tokenizer)
    return {
        "model": job.model,
        "prompt": job.prompt_template.format(text=item.text),
        "max_tokens": job.max_tokens,
        "temperature": job.temperature,
        "logprobs": job.logprob_count,
        "logit_bias": {str(token_ids[t]): job.logit_bias_value for t in job.class_tokens},
        "echo": False,
    }


def parse_response(job: AnnotationJob, response: dict) -> list[float]:
    """Per-class log-probabilities from a completion response; classes
    missing from the returned top-k carry the -100 filler."""
    try:
        top = response["choices"][0]["logprobs"]["top_logprobs"][0]
    except (KeyError, IndexError, TypeError) as exc:
        raise AnnotationError(f"response missing top_logprobs: {response!r}") from exc
    if not isinstance(top, dict):
        raise AnnotationError(f"top_logprobs entry is not a mapping: {top!r}")
    out = []
    for token in job.class_tokens:
        value = top.get(token, FILLER_LOGPROB)
        if not isinstance(value, (int, float)) or value > 0.0:
            raise AnnotationError(f"invalid log-probability {value!r} for token {token!r}")
        out.append(float(value))
    return out


class _RateLimiter:
    def __init__(self, per_minute: int):
        self.interval = 60.0 / per_minute
        self.lock = threading.Lock()
        self.next_at = 0.0

    def wait(self) -> None:
        with self.lock:
            now = time.monotonic()
            delay = self.next_at - now
            self.next_at = max(now, self.next_at) + self.interval
        if delay > 0:
            time.sleep(delay)


@dataclass
class AnnotationResult:
    completed: int
    skipped_existing: int
    pending: list[str] = field(default_factory=list)
    spent: float = 0.0
    output_path: str = ""


def _load_completed(path: str) -> dict[str, dict]:
    if not os.path.isfile(path):
        return {}
    completed = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                record = json.loads(line)
                completed[record["id"]] = record
    return completed


def annotate(
    corpus: list[CorpusItem],
    job: AnnotationJob,
    client: CompletionClient,
    out_dir: str,
    tokenizer: Tokenizer | None = None,
) -> AnnotationResult:
    """Annotate all pending corpus items; see the module docstring for the
    resume, audit and budget-cap behaviour."""
    job.validate()
    tokenizer = tokenizer or ReferenceTokenizer()
    validate_class_tokens(list(job.class_tokens), tokenizer)
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, ANNOTATIONS_NAME)
    audit_path = os.path.join(out_dir, AUDIT_NAME)

    completed = _load_completed(out_path)
    pending_items = sorted(
        (item for item in corpus if item.id not in completed), key=lambda i: i.id
    )
    skipped = len(corpus) - len(pending_items)

    limiter = _RateLimiter(job.requests_per_minute)
    audit_lock = threading.Lock()
    budget_lock = threading.Lock()
    spent = 0.0

    def audit(entry: dict) -> None:
        with audit_lock, open(audit_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def reserve_budget() -> bool:
        nonlocal spent
        with budget_lock:
            if job.budget_cap is not None and spent + job.cost_per_request > job.budget_cap:
                return False
            spent += job.cost_per_request
            return True

    def annotate_one(item: CorpusItem) -> tuple[str, dict | None]:
        if not reserve_budget():
            return item.id, None
        request = render_request(job, item, tokenizer)
        last_error = None
        for attempt in range(job.max_retries):
            limiter.wait()
            try:
                response = client.complete(request)
                logprobs = parse_response(job, response)
            except Exception as exc:  # noqa: BLE001 - provider errors vary widely
                last_error = exc
                audit({"id": item.id, "request": request, "error": str(exc),
                       "attempt": attempt + 1})
                time.sleep(job.retry_backoff * (2 ** attempt))
                continue
            audit({"id": item.id, "request": request, "response": response})
            return item.id, {
                "id": item.id,
                "text": item.text,
                "gold": resolve_gold(item.gold, list(job.class_names), item.id),
                "teacher_logprobs": logprobs,
            }
        audit({"id": item.id, "request": request,
               "error": f"gave up after {job.max_retries} attempts: {last_error}"})
        return item.id, None

    results: dict[str, dict | None] = {}
    if pending_items:
        if job.concurrency == 1:
            for item in pending_items:
                results[item.id] = annotate_one(item)[1]
        else:
            with ThreadPoolExecutor(max_workers=job.concurrency) as pool:
                for item_id, record in pool.map(annotate_one, pending_items):
                    results[item_id] = record

    for item_id, record in results.items():
        if record is not None:
            completed[item_id] = record

    lines = [json.dumps(completed[i], sort_keys=True, separators=(",", ":"))
             for i in sorted(completed)]
    write_atomic(out_path, "\n".join(lines) + ("\n" if lines else ""))

    still_pending = sorted(i.id for i in corpus if i.id not in completed)
    return AnnotationResult(
        completed=sum(1 for r in results.values() if r is not None),
        skipped_existing=skipped,
        pending=still_pending,
        spent=spent,
        output_path=out_path,
    )
