"""LLM-backed opinion engine.

Prompts are rendered from three templates (opinion, rewire, generate), sent
to a chat-completion endpoint through :class:`LlmClient` (retries plus an
append-only response cache) and the final schema line of each reply is
parsed back into a number. :class:`MockEngine` runs the same path against
an in-process transport that answers with the equation engine's values.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .engines import (Context, EngineKind, EquationEngine, EquationParams, clip_influence,
                      stance_words)
from .graph import Post, Screen, UserState, clamp, quantize

log = logging.getLogger(__name__)

PLACEHOLDERS = ("self_context", "neighbor_context", "screen", "task_instructions",
                "output_schema")
_PLACEHOLDER_RE = re.compile(r"\{(" + "|".join(PLACEHOLDERS) + r")\}")


class TemplateError(KeyError):
    def __init__(self, placeholder: str):
        super().__init__(placeholder)
        self.placeholder = placeholder

    def __str__(self):
        return f"unbound placeholder {{{self.placeholder}}}"


class TransportError(RuntimeError):
    """The endpoint could not be reached (or kept failing) after all retries."""


class ApiError(RuntimeError):
    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body[:200]


# ---------------------------------------------------------------------------
# templates
# ---------------------------------------------------------------------------

class TemplateKind(str, enum.Enum):
    OPINION = "opinion"
    REWIRE = "rewire"
    GENERATE = "generate"


@dataclass(frozen=True)
class PromptTemplate:
    kind: TemplateKind
    body: str

    def __post_init__(self):
        if "step by step" not in self.body.lower():
            raise ValueError("template must ask for step-by-step reasoning")
        if "{output_schema}" not in self.body:
            raise ValueError("template must end with an {output_schema} line")

    @property
    def placeholders(self) -> list[str]:
        return list(dict.fromkeys(_PLACEHOLDER_RE.findall(self.body)))


def escape_binding(text: str) -> str:
    """Double brace characters so bound text can never read as a placeholder."""
    return text.replace("{", "{{").replace("}", "}}")


def render(template: PromptTemplate | str, bindings: Mapping[str, str]) -> str:
    body = template.body if isinstance(template, PromptTemplate) else template
    names = _PLACEHOLDER_RE.findall(body) if isinstance(template, PromptTemplate) \
        else re.findall(r"\{(\w+)\}", body)
    for name in names:
        if name not in bindings:
            raise TemplateError(name)
    pattern = _PLACEHOLDER_RE if isinstance(template, PromptTemplate) else re.compile(r"\{(\w+)\}")
    # single pass: substituted text is never rescanned
    return pattern.sub(lambda m: escape_binding(bindings[m.group(1)]), body)


_PREAMBLE = """You are role-playing one user of a social media platform in an ongoing \
discussion. Stay in character and base your judgement only on the material below.

## About you
{self_context}

## Other users
{neighbor_context}
"""

_CLOSING = """
## Task
{task_instructions}

Think step by step. First summarise the views expressed above in one or two \
sentences, then explain how they relate to your own view, then give your answer. \
The final line of your reply must follow this format exactly, with nothing after it:
{output_schema}
"""

DEFAULT_TEMPLATES = {
    TemplateKind.OPINION: PromptTemplate(TemplateKind.OPINION, _PREAMBLE + _CLOSING),
    TemplateKind.REWIRE: PromptTemplate(TemplateKind.REWIRE, _PREAMBLE + _CLOSING),
    TemplateKind.GENERATE: PromptTemplate(
        TemplateKind.GENERATE, _PREAMBLE + "\n## Your feed\n{screen}\n" + _CLOSING),
}

TASK_INSTRUCTIONS = {
    TemplateKind.OPINION: (
        "[task:opinion] Read the other user's recent posts and decide what your stance "
        "becomes after taking their view into account. Stances range from -1 (strongly "
        "opposed) to 1 (strongly in favor)."),
    TemplateKind.REWIRE: (
        "[task:rewire] Judge how compatible your views are with the other user's, from "
        "0 (completely incompatible) to 1 (fully aligned)."),
    TemplateKind.GENERATE: (
        "[task:generate] Write your next post (one line, at most 280 characters) reacting "
        "to your feed, then report the stance your post expresses, from -1 (strongly "
        "opposed) to 1 (strongly in favor)."),
}

OUTPUT_SCHEMAS = {
    TemplateKind.OPINION: "STANCE: <number between -1 and 1>",
    TemplateKind.REWIRE: "COMPATIBILITY: <number between 0 and 1>",
    TemplateKind.GENERATE: "POST: <your post>\nSTANCE: <number between -1 and 1>",
}


def _one_line(text: str) -> str:
    return " ".join(text.split())


def format_post_line(post: Post, with_author: bool = False) -> str:
    head = f"user {post.author}, " if with_author else ""
    return f"- [{head}step {post.step}, stance {post.stance:+.6f}] {_one_line(post.text)}"


def format_self_context(ctx: Context) -> str:
    lines = [f"You are user {ctx.user}.", f"Your current stance: {ctx.opinion:+.6f}",
             "Your recent posts:"]
    lines += [format_post_line(p) for p in ctx.posts] or ["(none)"]
    return "\n".join(lines)


def format_neighbor_contexts(contexts: Sequence[Context]) -> str:
    if not contexts:
        return "(none)"
    blocks = []
    for ctx in sorted(contexts, key=lambda c: c.user):
        lines = [f"User {ctx.user} (current stance {ctx.opinion:+.6f})"]
        lines += [format_post_line(p) for p in ctx.posts] or ["(no posts)"]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def format_screen(screen: Screen) -> str:
    if not screen.posts:
        return "(empty)"
    return "\n".join(format_post_line(p, with_author=True) for p in screen.posts)


# ---------------------------------------------------------------------------
# transport, cache, client
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LlmRequest:
    model: str
    rendered_prompt: str
    temperature: float = 0.0
    max_tokens: int = 512
    seed_slot: int = 0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    @property
    def cache_key(self) -> str:
        blob = json.dumps([self.model, self.rendered_prompt, self.temperature, self.seed_slot],
                          ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def payload(self) -> dict:
        return {"model": self.model,
                "messages": [{"role": "user", "content": self.rendered_prompt}],
                "temperature": self.temperature, "max_tokens": self.max_tokens,
                "seed": self.seed_slot}


class ResponseCache:
    """cache_key -> raw response, optionally persisted as append-only JSON Lines."""

    def __init__(self, path: Optional[str | os.PathLike] = None):
        self.path = Path(path) if path else None
        self._data: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self.reload()

    def reload(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                try:
                    rec = json.loads(line)
                    self._data[rec["cache_key"]] = rec["raw"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    # a writer may be mid-line; skip torn records
                    continue

    def get(self, key: str) -> Optional[str]:
        return self._data.get(key)

    def put(self, key: str, raw: str) -> None:
        with self._lock:
            self._data[key] = raw
            if self.path:
                line = json.dumps({"cache_key": key, "timestamp": int(time.time()), "raw": raw},
                                  ensure_ascii=False) + "\n"
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line)

    def __contains__(self, key: str) -> bool:
        return key in self._data

    def __len__(self) -> int:
        return len(self._data)


def chat_completion_body(content: str, model: str = "fixture") -> dict:
    return {"id": "fixture", "object": "chat.completion", "model": model,
            "choices": [{"index": 0, "finish_reason": "stop",
                         "message": {"role": "assistant", "content": content}}]}


class HttpTransport:
    def __init__(self, url: str, api_key: Optional[str] = None, timeout: float = 60.0):
        self.url = url
        self.api_key = api_key
        self.timeout = timeout

    def post(self, payload: dict) -> tuple[int, Mapping[str, str], str]:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(self.url, json=payload, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ConnectionError(str(exc)) from exc
        return resp.status_code, resp.headers, resp.text


class FixtureTransport:
    """In-process endpoint: ``responder(prompt) -> reply text``."""

    def __init__(self, responder: Callable[[str], str]):
        self.responder = responder
        self.calls = 0

    def post(self, payload: dict) -> tuple[int, Mapping[str, str], str]:
        self.calls += 1
        prompt = payload["messages"][-1]["content"]
        return 200, {}, json.dumps(chat_completion_body(self.responder(prompt),
                                                        payload.get("model", "fixture")))


class LlmClient:
    def __init__(self, transport, cache: Optional[ResponseCache] = None, max_retries: int = 3,
                 backoff: float = 1.0, sleep: Callable[[float], None] = time.sleep):
        if max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        self.transport = transport
        self.cache = cache if cache is not None else ResponseCache()
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        self.network_calls = 0

    @classmethod
    def from_env(cls, cache_path=None, **kwargs) -> "LlmClient":
        url = os.environ.get("ECHOSIM_LLM_URL")
        if not url:
            raise TransportError("ECHOSIM_LLM_URL is not set")
        return cls(HttpTransport(url, os.environ.get("ECHOSIM_LLM_KEY")),
                   ResponseCache(cache_path), **kwargs)

    def complete(self, request: LlmRequest) -> str:
        key = request.cache_key
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        payload = request.payload()
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries):
            delay = self.backoff * (2 ** attempt)
            try:
                self.network_calls += 1
                status, headers, body = self.transport.post(payload)
            except (ConnectionError, OSError, TimeoutError) as exc:
                last_error = exc
            else:
                if 200 <= status < 300:
                    raw = _extract_content(status, body)
                    self.cache.put(key, raw)
                    return raw
                if status == 429:
                    last_error = ApiError(status, body)
                    delay = _retry_after(headers, delay)
                elif status >= 500:
                    last_error = ApiError(status, body)
                else:
                    raise ApiError(status, body)
            if attempt + 1 < self.max_retries:
                log.info("request failed (%s); retry %d in %.2fs", last_error, attempt + 1, delay)
                self.sleep(delay)
        raise TransportError(f"giving up after {self.max_retries} attempts: {last_error}")


def _extract_content(status: int, body: str) -> str:
    try:
        content = json.loads(body)["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError):
        raise ApiError(status, body) from None
    if not isinstance(content, str):
        raise ApiError(status, body)
    return content


def _retry_after(headers: Mapping[str, str], default: float) -> float:
    value = None
    for k, v in dict(headers).items():
        if k.lower() == "retry-after":
            value = v
    try:
        return max(0.0, float(value)) if value is not None else default
    except ValueError:
        return default


# ---------------------------------------------------------------------------
# response parsing
# ---------------------------------------------------------------------------

class ResponseKind(str, enum.Enum):
    STANCE = "stance"
    COMPATIBILITY = "compatibility"
    GENERATED = "generated"


class ParseStatus(str, enum.Enum):
    CLEAN = "clean"
    RECOVERED = "recovered"
    FAILED = "failed"


@dataclass(frozen=True)
class EngineResponse:
    raw: str
    kind: ResponseKind
    status: ParseStatus
    value: Optional[float] = None
    text: Optional[str] = None

    @property
    def parsed(self):
        if self.status is ParseStatus.FAILED:
            return None
        if self.kind is ResponseKind.GENERATED:
            return (self.text, self.value)
        return self.value


_NUM = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?"
_NUM_RE = re.compile(_NUM)
_GAP = r"[ \t]*(?:\r?\n)?[ \t]*"
_RANGES = {ResponseKind.STANCE: (-1.0, 1.0), ResponseKind.COMPATIBILITY: (0.0, 1.0),
           ResponseKind.GENERATED: (-1.0, 1.0)}
_KEYS = {ResponseKind.STANCE: "STANCE", ResponseKind.COMPATIBILITY: "COMPATIBILITY",
         ResponseKind.GENERATED: "STANCE"}


def _strict_re(key: str) -> re.Pattern:
    return re.compile(rf"^[ \t]*{key}:[ \t]*({_NUM})[ \t]*$", re.M)


def _loose_key(key: str) -> str:
    return r"[ \t]*(?:\r?\n)?[ \t]*".join(re.escape(c) for c in key)


def _loose_re(key: str) -> re.Pattern:
    num = rf"(?P<num>[-+]?{_GAP}[\d.](?:{_GAP}[\d.])*(?:[eE][-+]?\d+)?)"
    return re.compile(rf"(?<![A-Za-z]){_loose_key(key)}{_GAP}[:=]{_GAP}{num}", re.I)


def _loose_number(chunk: str) -> Optional[float]:
    collapsed = re.sub(r"\s+", "", chunk)
    for cand in (collapsed, chunk.split()[0] if chunk.split() else ""):
        if _NUM_RE.fullmatch(cand):
            return float(cand)
    return None


def _strict_value(raw: str, key: str):
    matches = list(_strict_re(key).finditer(raw))
    if not matches:
        return None
    m = matches[-1]
    return float(m.group(1)), m.start()


def _loose_value(raw: str, key: str):
    best = None
    for m in _loose_re(key).finditer(raw):
        val = _loose_number(m.group("num"))
        if val is not None:
            best = (val, m.start())
    return best


def _post_text(raw: str, end: int, strict: bool) -> Optional[str]:
    head = raw[:end]
    if strict:
        matches = list(re.finditer(r"^[ \t]*POST:[ \t]*", head, re.M))
    else:
        matches = list(re.finditer(rf"(?<![A-Za-z]){_loose_key('POST')}{_GAP}:", head, re.I))
    if not matches:
        return None
    text = _one_line(head[matches[-1].end():]).strip("*` ")
    return text or None


def parse_response(raw: str, expected: ResponseKind) -> EngineResponse:
    """Extract the schema line from a model reply; never invents a value."""
    expected = ResponseKind(expected)
    key = _KEYS[expected]
    lo, hi = _RANGES[expected]
    status = ParseStatus.CLEAN
    found = _strict_value(raw, key)
    text = None
    if found is not None and expected is ResponseKind.GENERATED:
        text = _post_text(raw, found[1], strict=True)
        if text is None:
            found = None
    if found is None:
        status = ParseStatus.RECOVERED
        cleaned = raw.replace("*", "").replace("`", "")
        found = _loose_value(cleaned, key)
        if found is not None and expected is ResponseKind.GENERATED:
            text = _post_text(cleaned, found[1], strict=False)
            if text is None:
                found = None
    if found is None or not math.isfinite(found[0]):
        return EngineResponse(raw, expected, ParseStatus.FAILED)
    value = found[0]
    if not lo <= value <= hi:
        value = clamp(value, lo, hi)
        status = ParseStatus.RECOVERED
    return EngineResponse(raw, expected, status, quantize(value), text)


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------

class LlmEngine(EquationEngine):
    """Engine whose f, g and posts come from a chat model.

    A reply that cannot be parsed falls back to the equation engine's value
    for that one call and bumps ``stats.fallbacks``. Transport and API
    errors propagate.
    """

    kind = EngineKind.LLM

    def __init__(self, client: Optional[LlmClient] = None,
                 params: EquationParams = EquationParams(), history_window: int = 10,
                 model: Optional[str] = None, templates=None, decision_temperature: float = 0.0,
                 generate_temperature: float = 0.7, max_tokens: int = 512, seed_slot: int = 0):
        super().__init__(params, history_window)
        self.client = client if client is not None else LlmClient.from_env()
        self.model = model or os.environ.get("ECHOSIM_LLM_MODEL", "gpt-4o-mini")
        self.templates = {**DEFAULT_TEMPLATES, **(templates or {})}
        self.decision_temperature = decision_temperature
        self.generate_temperature = generate_temperature
        self.max_tokens = max_tokens
        self.seed_slot = seed_slot
        self.responses: list[EngineResponse] = []
        self.keep_responses = False

    def _ask(self, kind: TemplateKind, expected: ResponseKind, bindings: dict,
             temperature: float) -> EngineResponse:
        bindings = {"task_instructions": TASK_INSTRUCTIONS[kind],
                    "output_schema": OUTPUT_SCHEMAS[kind], **bindings}
        prompt = render(self.templates[kind], bindings)
        raw = self.client.complete(LlmRequest(self.model, prompt, temperature, self.max_tokens,
                                              self.seed_slot))
        resp = parse_response(raw, expected)
        self.stats.calls += 1
        if resp.status is ParseStatus.CLEAN:
            self.stats.clean += 1
        elif resp.status is ParseStatus.RECOVERED:
            self.stats.recovered += 1
        else:
            self.stats.failed += 1
            self.stats.fallbacks += 1
        if self.keep_responses:
            self.responses.append(resp)
        return resp

    @staticmethod
    def _ctx(ctx: Optional[Context], user: int, opinion: float) -> Context:
        return ctx if ctx is not None else Context(user, opinion)

    def influence(self, o_j, o_i, c_j=None, c_i=None) -> float:
        c_i = self._ctx(c_i, -1, o_i)
        c_j = self._ctx(c_j, -2, o_j)
        resp = self._ask(TemplateKind.OPINION, ResponseKind.STANCE,
                         {"self_context": format_self_context(c_i),
                          "neighbor_context": format_neighbor_contexts([c_j])},
                         self.decision_temperature)
        if resp.status is ParseStatus.FAILED:
            return super().influence(o_j, o_i)
        # the model reports the stance it would move to; f is the shift
        return quantize(clip_influence(resp.value - o_i))

    def compatibility(self, o_i, o_j, c_i=None, c_j=None) -> float:
        c_i = self._ctx(c_i, -1, o_i)
        c_j = self._ctx(c_j, -2, o_j)
        resp = self._ask(TemplateKind.REWIRE, ResponseKind.COMPATIBILITY,
                         {"self_context": format_self_context(c_i),
                          "neighbor_context": format_neighbor_contexts([c_j])},
                         self.decision_temperature)
        if resp.status is ParseStatus.FAILED:
            return super().compatibility(o_i, o_j)
        return resp.value

    def generate_post(self, i: UserState, screen: Screen, step: int, rng=None,
                      neighbor_states: Sequence[UserState] = ()) -> Post:
        resp = self._ask(TemplateKind.GENERATE, ResponseKind.GENERATED,
                         {"self_context": format_self_context(self.context(i)),
                          "neighbor_context": format_neighbor_contexts(
                              [self.context(j) for j in neighbor_states]),
                          "screen": format_screen(screen)},
                         self.generate_temperature)
        if resp.status is ParseStatus.FAILED:
            return super().generate_post(i, screen, step, rng, neighbor_states)
        return Post(i.id, step, resp.text, resp.value)


_SELF_RE = re.compile(r"Your current stance: ([-+]\d+\.\d{6})")
_OTHER_RE = re.compile(r"^User -?\d+ \(current stance ([-+]\d+\.\d{6})\)", re.M)
_FEED_RE = re.compile(r"^- \[user -?\d+, step \d+, stance ([-+]\d+\.\d{6})\]", re.M)
_TASK_RE = re.compile(r"\[task:(\w+)\]")


def mock_responder(equation: EquationEngine) -> Callable[[str], str]:
    """Answer rendered prompts with the equation engine's values, as text."""

    def respond(prompt: str) -> str:
        task = _TASK_RE.search(prompt).group(1)
        o_i = float(_SELF_RE.search(prompt).group(1))
        if task == "generate":
            feed = prompt.split("\n## Your feed\n", 1)[1].split("\n## ", 1)[0]
            stances = [float(s) for s in _FEED_RE.findall(feed)]
            s = equation.opinion_from_stances(o_i, stances)
            return (f"Reasoning: my feed has {len(stances)} posts; weighing them against my "
                    f"own view.\nPOST: Feeling {stance_words(s)} about this today "
                    f"({s:+.6f}).\nSTANCE: {s:.6f}")
        o_j = float(_OTHER_RE.search(prompt).group(1))
        if task == "opinion":
            s = quantize(o_i + equation.influence(o_j, o_i))
            return f"Reasoning: comparing my stance with theirs.\nSTANCE: {s:.6f}"
        if task == "rewire":
            g = equation.compatibility(o_i, o_j)
            return f"Reasoning: comparing our views.\nCOMPATIBILITY: {g:.6f}"
        return "I cannot help with that."

    return respond


class MockEngine(LlmEngine):
    """Hermetic engine: full render/complete/parse path, equation-valued replies."""

    kind = EngineKind.MOCK

    def __init__(self, params: EquationParams = EquationParams(), history_window: int = 10,
                 cache: Optional[ResponseCache] = None, seed_slot: int = 0):
        self.transport = FixtureTransport(mock_responder(EquationEngine(params)))
        client = LlmClient(self.transport, cache if cache is not None else _NullCache())
        super().__init__(client, params, history_window, model="mock", seed_slot=seed_slot)


class _NullCache(ResponseCache):
    """Cache that stores nothing; the mock answers are cheap to recompute."""

    def get(self, key):
        return None

    def put(self, key, raw):
        pass
