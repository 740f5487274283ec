"""Corpus-free hard-negative generation through a chat-completions endpoint.

The client speaks HTTP POST /v1/chat/completions with the sampling fields
temperature, top_p, top_k, min_p and max_tokens in the request body (top_k and
min_p are extension fields; providers that reject unknown fields can have
min_p dropped via ``send_min_p=False``). Responses are expected in the
standard ``choices[0].message.content`` shape.

Generated output must follow the "Passage 1:" .. "Passage 5:" layout; the
parser extracts the five texts and never aborts on arbitrary input, raising a
structured error instead.
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass, field

import requests

from .datamodel import HardNegativeSet, NegativeEntry, Passage, QueryPositivePair, normalize_text
from .errors import GenerationError, GenerationParseError, TransportError

log = logging.getLogger(__name__)

SYSTEM_PROMPT = (
    "You are an assistant that generates hard negative passages for information "
    "retrieval tasks. A hard negative is a passage that seems relevant to the query "
    "but does not actually answer it or provide the correct information. You will be "
    "given both a query and a positive passage (the correct answer). Use this context "
    "to generate hard negatives that are semantically similar but factually incorrect "
    "or irrelevant."
)

USER_TEMPLATE = """Generate 5 hard negative passages for the following query and positive passage pair.

The hard negatives should be similar in style and topic to the positive passage but should NOT correctly answer the query. Each passage should be max of 100 words but no less than 75.

Query: {query}

Positive Passage (correct answer): {positive}

Generate 5 hard negative passages that seem relevant but are actually incorrect or don't properly answer the query.

Provide the passages in the following format:

Passage 1: [your first passage]

Passage 2: [your second passage]

Passage 3: [your third passage]

Passage 4: [your fourth passage]

Passage 5: [your fifth passage]"""

MIN_WORDS = 75
MAX_WORDS = 100

_PLACEHOLDER = re.compile(r"\{(query|positive)\}")
# optional markdown bold/asterisks around the marker, e.g. "**Passage 1:**"
_MARKER = re.compile(r"\*{0,3}Passage\s+(\d+)\s*\*{0,3}\s*:\s*\*{0,3}")


@dataclass(frozen=True)
class GenerationConfig:
    model_id: str
    temperature: float = 0.6
    top_p: float = 0.95
    top_k: int = 20
    min_p: float = 0.0
    max_tokens: int = 1024
    max_retries: int = 3
    request_timeout: float = 30.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if not (0 < self.top_p <= 1):
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")


@dataclass(frozen=True)
class ChatPrompt:
    system: str
    user: str


@dataclass
class GenerationRecord:
    query_id: str
    model_id: str
    raw_response: str
    parsed: list[str] = field(default_factory=list)
    word_counts: list[int] = field(default_factory=list)
    attempts: int = 0
    violations: list[list[str]] = field(default_factory=list)


def render_prompt(pair: QueryPositivePair) -> ChatPrompt:
    """Substitute the pair into the fixed templates, altering nothing else.

    Substitution is a single pass, so placeholder-shaped content inside the
    query or passage is never re-expanded.
    """
    if not pair.query.strip():
        raise ValueError("empty query")
    if not pair.positive.text.strip():
        raise ValueError("empty positive passage")
    fields = {"query": pair.query, "positive": pair.positive.text}
    user = _PLACEHOLDER.sub(lambda m: fields[m.group(1)], USER_TEMPLATE)
    for name, value in fields.items():
        if "Passage 1:" in value:
            log.warning(
                "pair %r: %s contains the literal 'Passage 1:' marker; "
                "generated output may echo it and confuse parsing",
                pair.query_id,
                name,
            )
    return ChatPrompt(system=SYSTEM_PROMPT, user=user)


def parse_passages(raw: str) -> list[str]:
    """Extract the five texts following "Passage 1:" .. "Passage 5:".

    All five markers must be present, in ascending order, exactly once, each
    with a non-empty body. The first violated marker names the error.
    """
    matches = list(_MARKER.finditer(raw))
    numbers = [int(m.group(1)) for m in matches]
    for n in numbers:
        if n < 1 or n > 5:
            raise GenerationParseError(f"unexpected Passage {n}", marker=f"Passage {n}")
    seen: set[int] = set()
    for n in numbers:
        if n in seen:
            raise GenerationParseError(f"duplicate Passage {n}", marker=f"Passage {n}")
        seen.add(n)
    for i in range(1, 6):
        if i not in seen:
            raise GenerationParseError(f"missing Passage {i}", marker=f"Passage {i}")
    for pos, n in enumerate(numbers, start=1):
        if n != pos:
            raise GenerationParseError(f"out-of-order Passage {n}", marker=f"Passage {n}")
    passages = []
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(raw)
        body = raw[m.end() : end].strip()
        if not body:
            raise GenerationParseError(f"empty Passage {i + 1}", marker=f"Passage {i + 1}")
        passages.append(body)
    return passages


def validate_passages(passages: list[str], positive: str) -> list[list[str]]:
    """Per-passage constraint labels: too_short / too_long / equals_positive.

    Word counting is whitespace-delimited; length bounds are 75..100 words.
    Pure report, never raises.
    """
    norm_positive = normalize_text(positive)
    labels: list[list[str]] = []
    for text in passages:
        here = []
        words = len(text.split())
        if words < MIN_WORDS:
            here.append("too_short")
        elif words > MAX_WORDS:
            here.append("too_long")
        if normalize_text(text) == norm_positive:
            here.append("equals_positive")
        labels.append(here)
    return labels


class ChatCompletionsClient:
    """Single-shot client; retry policy lives in generate_hard_negatives so
    that attempt counting matches the number of requests on the wire."""

    def __init__(self, endpoint: str, send_min_p: bool = True, backoff: float = 0.5):
        self.endpoint = endpoint.rstrip("/")
        self.send_min_p = send_min_p
        self.backoff = backoff

    def complete(self, prompt: ChatPrompt, config: GenerationConfig) -> str:
        url = f"{self.endpoint}/v1/chat/completions"
        payload = {
            "model": config.model_id,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": config.temperature,
            "top_p": config.top_p,
            "top_k": config.top_k,
            "max_tokens": config.max_tokens,
        }
        if self.send_min_p:
            payload["min_p"] = config.min_p
        try:
            resp = requests.post(url, json=payload, timeout=config.request_timeout)
            resp.raise_for_status()
            body = resp.json()
            return body["choices"][0]["message"]["content"]
        except (requests.RequestException, ValueError, KeyError, IndexError) as exc:
            raise TransportError(f"chat completion failed: {exc}", endpoint=url) from exc


def generate_hard_negatives(
    client: ChatCompletionsClient,
    pair: QueryPositivePair,
    config: GenerationConfig,
    strict: bool = False,
) -> tuple[HardNegativeSet, GenerationRecord]:
    """Generate five negatives for the pair, retrying on failure.

    Every request counts as one attempt; at most max_retries + 1 attempts are
    made with the identical prompt and sampling parameters. Parse failures
    retry immediately, transport failures back off exponentially. In lenient
    mode (default) length violations are flagged and kept; in strict mode they
    trigger a regeneration like a parse failure.
    """
    prompt = render_prompt(pair)
    source = f"llm:{config.model_id}"
    last_raw: str | None = None
    last_error: Exception | None = None
    attempts = 0
    for attempt in range(config.max_retries + 1):
        attempts = attempt + 1
        try:
            raw = client.complete(prompt, config)
        except TransportError as exc:
            last_error = exc
            if attempt < config.max_retries:
                time.sleep(client.backoff * (2**attempt))
            continue
        last_raw = raw
        try:
            parsed = parse_passages(raw)
        except GenerationParseError as exc:
            last_error = exc
            log.warning("pair %r attempt %d: %s", pair.query_id, attempts, exc)
            continue
        violations = validate_passages(parsed, pair.positive.text)
        if strict and any("too_short" in v or "too_long" in v for v in violations):
            last_error = GenerationParseError("length constraint violated in strict mode")
            log.warning("pair %r attempt %d: length violation, regenerating", pair.query_id, attempts)
            continue
        record = GenerationRecord(
            query_id=pair.query_id,
            model_id=config.model_id,
            raw_response=raw,
            parsed=parsed,
            word_counts=[len(p.split()) for p in parsed],
            attempts=attempts,
            violations=violations,
        )
        negatives = [
            NegativeEntry(
                passage=Passage(doc_id=f"{pair.query_id}#{source}#{i + 1}", title="", text=text),
                source=source,
                score=None,
            )
            for i, text in enumerate(parsed)
        ]
        return HardNegativeSet(query_id=pair.query_id, negatives=negatives), record
    raise GenerationError(
        f"pair {pair.query_id!r}: all {attempts} attempts failed ({last_error})",
        last_response=last_raw,
        attempts=attempts,
    )


def write_llm_negatives(
    results: list[tuple[HardNegativeSet, GenerationRecord]], path: str
) -> None:
    """Export generated sets as {"query_id", "source", "negatives", "attempts"} lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for negset, record in results:
            line = {
                "query_id": negset.query_id,
                "source": negset.source,
                "negatives": [
                    {"text": entry.passage.text, "flags": record.violations[i]}
                    for i, entry in enumerate(negset.negatives)
                ],
                "attempts": record.attempts,
            }
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")


def write_generation_records(records: list[GenerationRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "query_id": r.query_id,
                        "model_id": r.model_id,
                        "attempts": r.attempts,
                        "word_counts": r.word_counts,
                        "violations": r.violations,
                        "raw_response": r.raw_response,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
