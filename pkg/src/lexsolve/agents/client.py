"""Client for an external chat-style text-generation service."""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from typing import Any

import httpx

from lexsolve.agents.base import DEFENSE, PROSECUTOR, ArgumentTuple, ExtractorConfig
from lexsolve.agents.extractor import ground_fact_lines
from lexsolve.agents.prompts import render
from lexsolve.case_model import CaseRecord
from lexsolve.errors import ParseError, ServiceError

log = logging.getLogger(__name__)

_ROLE_SUFFIX = {PROSECUTOR: "prosecutor", DEFENSE: "defense"}
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+(?:\.\d+)*[.)]?)\s*")


def first_json_object(text: str) -> dict[str, Any]:
    """The first decodable JSON object embedded in ``text``."""
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(text, i)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise ParseError("response contains no JSON object")


def parse_selection(text: str) -> tuple[frozenset[int], frozenset[int]]:
    obj = first_json_object(text)
    out = []
    for key in ("general_articles", "specific_articles"):
        if key not in obj:
            raise ParseError(f"response lacks {key!r}")
        items = obj[key]
        if not isinstance(items, list):
            raise ParseError(f"{key!r} must be a list")
        numbers = []
        for a in items:
            m = re.search(r"\d+", str(a))
            if m is None:
                raise ParseError(f"{key!r} holds a non-numeric article: {a!r}")
            numbers.append(int(m.group(0)))
        out.append(frozenset(numbers))
    return out[0], out[1]


def fact_lines(text: str) -> list[str]:
    lines = []
    for raw in text.splitlines():
        line = _BULLET.sub("", raw).strip()
        if line:
            lines.append(line)
    return lines


class ServiceClient:
    """Posts ``{model, messages}`` bodies with bearer auth, retrying failures
    with exponential backoff.  A semaphore caps requests in flight."""

    def __init__(self, config: ExtractorConfig, transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        self.config = config
        self._gate = threading.BoundedSemaphore(max(1, config.max_in_flight))
        self._sleep = sleep
        self._client = httpx.Client(timeout=config.timeout_seconds, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _token(self) -> str:
        token = os.environ.get(self.config.api_key_env_var, "")
        if not token:
            raise ServiceError(f"environment variable {self.config.api_key_env_var} is not set")
        return token

    def complete(self, prompt: str) -> str:
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        headers = {"Authorization": f"Bearer {self._token()}"}
        last: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(0.5 * 2 ** (attempt - 1))
            try:
                with self._gate:
                    resp = self._client.post(self.config.endpoint_url, json=body, headers=headers)
                if resp.status_code >= 500 or resp.status_code == 429:
                    last = ServiceError(f"HTTP {resp.status_code}")
                    continue
                if resp.status_code >= 400:
                    raise ServiceError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                return self._message_text(resp.json())
            except httpx.HTTPError as exc:
                last = exc
        raise ServiceError(f"request failed after {self.config.max_retries + 1} attempts: {last}")

    @staticmethod
    def _message_text(payload: Any) -> str:
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ParseError("response has no first candidate message") from exc


def external_extract(case: CaseRecord, role: str, client: ServiceClient) -> ArgumentTuple:
    suffix = _ROLE_SUFFIX[role]
    selection = client.complete(render(f"statute_selector_{suffix}", case_text=case.narrative))
    general, specific = parse_selection(selection)
    listing = client.complete(render(f"fact_extractor_{suffix}", case_text=case.narrative))
    suspect = case.suspect_ids[0] if case.suspect_ids else "s1"
    facts, dropped = ground_fact_lines(fact_lines(listing), case.narrative, role, suspect)
    for line in dropped:
        log.warning("case %s: dropped ungrounded fact %r", case.case_id, line[:80])
    return ArgumentTuple(role, tuple(facts), general, specific)
