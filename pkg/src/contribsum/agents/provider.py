"""Model providers: live HTTP, record/replay fixtures, deterministic mock.

All three expose one call, `send(messages, model_id) -> ProviderResponse`.
The wire format of the live provider is a JSON chat completion: POST
{model, messages:[{role, content}]}, response carrying the text plus
input/output token counts.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ProviderError

ANALYSIS_TIER = "analysis"
SYNTHESIS_TIER = "synthesis"

# Conservative estimation rule used for every budget decision: one token
# per four characters, rounded up.
def estimate_tokens(text: str) -> int:
    return (len(text) + 3) // 4


# Requests never use more than this share of a tier's context window.
BUDGET_FRACTION = 0.8


@dataclass(frozen=True)
class ModelTier:
    tier: str  # "analysis" | "synthesis"
    model_id: str
    max_input_tokens: int
    cost_per_1k_input: float
    cost_per_1k_output: float

    def __post_init__(self):
        if self.tier not in (ANALYSIS_TIER, SYNTHESIS_TIER):
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.max_input_tokens <= 0:
            raise ValueError("max_input_tokens must be positive")
        if self.cost_per_1k_input < 0 or self.cost_per_1k_output < 0:
            raise ValueError("rates must be non-negative")

    @property
    def input_budget(self) -> int:
        return int(self.max_input_tokens * BUDGET_FRACTION)


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    input_tokens: int
    output_tokens: int


def request_digest(messages: list[dict], model_id: str) -> str:
    material = json.dumps({"model": model_id, "messages": messages}, sort_keys=True)
    return hashlib.sha256(material.encode()).hexdigest()


class TokenBucket:
    """Simple token-bucket rate limiter shared by concurrent workers."""

    def __init__(self, rate_per_second: float, burst: int = 1):
        self.rate = rate_per_second
        self.capacity = max(1, burst)
        self._tokens = float(self.capacity)
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.rate
            time.sleep(wait)


class HttpProvider:
    """Live chat-completion provider over HTTP JSON."""

    def __init__(
        self,
        endpoint: str,
        api_key: str,
        timeout: float = 120.0,
        max_retries: int = 3,
        rate_limiter: TokenBucket | None = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.rate_limiter = rate_limiter

    def send(self, messages: list[dict], model_id: str) -> ProviderResponse:
        import requests

        last_error = "no attempt made"
        for attempt in range(1, self.max_retries + 1):
            if self.rate_limiter:
                self.rate_limiter.acquire()
            try:
                resp = requests.post(
                    self.endpoint,
                    json={"model": model_id, "messages": messages},
                    headers={"Authorization": f"Bearer {self.api_key}"},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = f"transport failure: {exc}"
                time.sleep(min(2.0 ** attempt, 8.0))
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                time.sleep(min(2.0 ** attempt, 8.0))
                continue
            if resp.status_code != 200:
                raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}", attempt)
            try:
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
                usage = body.get("usage", {})
                return ProviderResponse(
                    text=text,
                    input_tokens=int(usage.get("prompt_tokens", 0)),
                    output_tokens=int(usage.get("completion_tokens", 0)),
                )
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise ProviderError(f"malformed provider response: {exc}", attempt)
        raise ProviderError(last_error, self.max_retries)


class ReplayProvider:
    """Record/replay fixture provider.

    In record mode it forwards to an inner provider and writes one JSON
    file per request into the replay directory. In replay mode (no inner
    provider) a missing recording is an error, so tests never silently
    hit the network.
    """

    def __init__(self, directory: str | Path, inner=None):
        self.directory = Path(directory)
        self.inner = inner

    def _path(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def send(self, messages: list[dict], model_id: str) -> ProviderResponse:
        digest = request_digest(messages, model_id)
        path = self._path(digest)
        if path.exists():
            saved = json.loads(path.read_text(encoding="utf-8"))
            r = saved["response"]
            return ProviderResponse(r["text"], r["input_tokens"], r["output_tokens"])
        if self.inner is None:
            raise ProviderError(f"no recording for request {digest[:12]} in {self.directory}")
        response = self.inner.send(messages, model_id)
        self.directory.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(
                {
                    "request": {"model": model_id, "messages": messages},
                    "response": {
                        "text": response.text,
                        "input_tokens": response.input_tokens,
                        "output_tokens": response.output_tokens,
                    },
                },
                sort_keys=True,
                indent=2,
            ),
            encoding="utf-8",
        )
        return response


_DATA_RE = re.compile(r"\[\[DATA\]\]\n(.*)\n\[\[/DATA\]\]", re.DOTALL)


def extract_data_block(prompt: str) -> dict | None:
    match = _DATA_RE.search(prompt)
    if not match:
        return None
    try:
        return json.loads(match.group(1))
    except json.JSONDecodeError:
        return None


class MockProvider:
    """Deterministic offline provider: hashed request -> canned text.

    Responses are pure functions of the request, so the whole pipeline
    becomes reproducible byte for byte. When constructed with per-model
    budgets it asserts the documented budget rule on every call, which
    is how the acceptance suite enforces the invariant.
    """

    def __init__(self, budgets: dict[str, int] | None = None):
        self.budgets = budgets or {}
        self.canned: dict[str, str] = {}
        self.calls: list[dict] = []

    def stub(self, messages: list[dict], model_id: str, text: str) -> None:
        """Pin an exact response for one request (failure injection)."""
        self.canned[request_digest(messages, model_id)] = text

    def send(self, messages: list[dict], model_id: str) -> ProviderResponse:
        joined = "".join(m.get("content", "") for m in messages)
        if model_id in self.budgets:
            limit = int(self.budgets[model_id] * BUDGET_FRACTION)
            assert estimate_tokens(joined) <= limit, (
                f"request estimate {estimate_tokens(joined)} exceeds "
                f"{BUDGET_FRACTION:.0%} budget {limit} for {model_id}"
            )
        self.calls.append({"model": model_id, "messages": messages})
        digest = request_digest(messages, model_id)
        if digest in self.canned:
            text = self.canned[digest]
        else:
            data = extract_data_block(joined)
            text = _generate(data, digest) if data else f"[mock:{digest[:12]}]"
        return ProviderResponse(
            text=text,
            input_tokens=estimate_tokens(joined),
            output_tokens=estimate_tokens(text),
        )


# Mock text generation: keyword-driven so dry runs read plausibly and so
# deterministic fixtures can assert on meaningful phrases. Word-anchored
# patterns: "auth" must not fire inside "author".

_THEMES = (
    (r"\bflask\b|\bfastapi\b|\bserver", "server setup"),
    (r"\broute|\bendpoint", "route registration"),
    (r"\bmongo|\bsql|\bdatabase", "database initialization"),
    (r"\bredis\b|\bcache", "cache initialization"),
    (r"\bauth(?!or)|\blogin", "authentication"),
    (r"\bpassword", "password handling"),
    (r"\btoken", "token handling"),
    (r"\bsecret", "secrets handling"),
    (r"\brecover", "account recovery"),
    (r"<form|\bforms?\b", "form handling"),
    (r"\bbutton", "interface controls"),
    (r"\bparagraph", "page content"),
    (r"<html|<div|\bhtml\b", "page structure"),
    (r"\bpandas\b|\bdataframe", "data analysis"),
    (r"\bplot", "data visualization"),
    (r"\btest", "tests"),
    (r"\breadme\b", "documentation"),
)

_THEME_RES = tuple((re.compile(pattern), theme) for pattern, theme in _THEMES)

_SECURITY_THEMES = {
    "authentication",
    "password handling",
    "token handling",
    "secrets handling",
    "account recovery",
}


def _themes_of(text: str) -> list[str]:
    lower = text.lower()
    found: list[str] = []
    for pattern, theme in _THEME_RES:
        if theme not in found and pattern.search(lower):
            found.append(theme)
    return found


def _generate(data: dict, digest: str) -> str:
    task = data.get("task", "")
    if task == "summarize-file":
        return _gen_summary(data)
    if task == "describe-contribution":
        return _gen_description(data)
    if task == "synthesize":
        return _gen_synthesis(data)
    return f"[mock:{digest[:12]}]"


def _gen_summary(data: dict) -> str:
    path = data.get("path", "file")
    themes = _themes_of(data.get("content", "") + " " + path) or ["core project logic"]
    functionality = f"The file {path} implements {', '.join(themes)}."
    hardest = themes[0]
    difficulty = (
        f"Main challenges involve getting {hardest} right and keeping the "
        f"remaining parts ({', '.join(themes[1:]) or 'supporting logic'}) consistent."
    )
    return f"Functionality: {functionality}\nDifficulty: {difficulty}"


def _gen_description(data: dict) -> str:
    name = data.get("student_name", "The student")
    path = data.get("path", "the file")
    owned = data.get("lines_owned", 0)
    added = data.get("lines_added_in_window", 0)
    themes = _themes_of(
        data.get("file_functionality", "")
        + " "
        + " ".join(data.get("commit_messages", []))
        + " "
        + path
    )
    text = (
        f"{name} wrote {owned} of the surviving lines in {path}"
        f" ({added} added this window)"
    )
    if themes:
        text += f", contributing to {', '.join(themes)}"
    text += "."
    solos = data.get("solo_functions", [])
    if solos:
        listed = ", ".join(f"{n} (complexity {s})" for n, s in solos)
        text += f" Sole author of {listed}."
    return text


def _role_for(themes: list[str], paths: list[str], total_lines: int) -> str:
    seniority = "Senior" if total_lines >= 120 else "Junior"
    markup = sum(1 for p in paths if p.endswith((".html", ".htm", ".css")))
    docs = sum(1 for p in paths if p.endswith((".md", ".rst", ".txt")))
    data_files = sum(1 for p in paths if p.endswith((".ipynb", ".csv")))
    if _SECURITY_THEMES & set(themes):
        role = "Security Engineer"
    elif docs and docs >= len(paths) - docs:
        role = "Documenter"
    elif markup and markup >= len(paths) - markup:
        role = "Frontend Engineer"
    elif data_files:
        role = "Data Engineer"
    else:
        role = "Backend Engineer"
    return f"Role: {seniority} {role}"


def _gen_synthesis(data: dict) -> str:
    blocks: list[str] = []
    roles_requested = bool(data.get("roles_requested"))
    for student in data.get("students", []):
        files = student.get("files", [])
        paths = [f["path"] for f in files]
        themes = _themes_of(" ".join(f.get("description", "") + " " + f["path"] for f in files))
        total = sum(f.get("lines_owned", 0) for f in files)
        name = student.get("name", student.get("id", "student"))
        if _SECURITY_THEMES & set(themes):
            focus = "security and authentication"
        elif themes:
            focus = " and ".join(themes[:2])
        else:
            focus = "general project work"
        lines = [f"### STUDENT {student['id']}"]
        lines.append(
            f"Summary: {name} focused on {focus}, contributing {total} surviving "
            f"lines across {len(files)} file{'s' if len(files) != 1 else ''}."
        )
        lines.append("Contributions:")
        for f in files:
            desc = f.get("description") or "contributed changes"
            first = desc.split(". ")[0].rstrip(".")
            lines.append(f"- {f['path']}: {first}.")
        if roles_requested:
            lines.append(_role_for(themes, paths, total))
        blocks.append("\n".join(lines))

    team_themes = _themes_of(
        " ".join(
            f.get("description", "")
            for s in data.get("students", [])
            for f in s.get("files", [])
        )
        + " "
        + data.get("project_description", "")
    )
    narrative = (
        "This window moved the project forward: "
        + (", ".join(team_themes[:4]) if team_themes else "groundwork across the codebase")
        + " advanced in line with the project goals."
    )
    team = ["### TEAM", narrative]
    for theme in team_themes[:4] or ["initial project setup"]:
        team.append(f"- Progress on {theme}.")
    blocks.append("\n".join(team))
    return "\n\n".join(blocks)
