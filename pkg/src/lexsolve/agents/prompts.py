"""Prompt template assets for the external text-generation service."""

from __future__ import annotations

from functools import lru_cache
from importlib.resources import files
from string import Template

TEMPLATE_IDS = (
    "statute_selector_prosecutor",
    "statute_selector_defense",
    "fact_extractor_prosecutor",
    "fact_extractor_defense",
    "schema_extraction",
    "fact_slicing",
    "judgment_explanation",
)


@lru_cache(maxsize=None)
def load_template(template_id: str) -> Template:
    if template_id not in TEMPLATE_IDS:
        raise KeyError(f"unknown prompt template {template_id!r}")
    text = files("lexsolve").joinpath(f"data/prompts/{template_id}.txt").read_text(encoding="utf-8")
    return Template(text)


def render(template_id: str, **values) -> str:
    """Fill a template; every placeholder must be supplied."""
    return load_template(template_id).substitute(**values)


def placeholders(template_id: str) -> set[str]:
    tpl = load_template(template_id)
    return {m.group("named") or m.group("braced") for m in tpl.pattern.finditer(tpl.template) if m.group("named") or m.group("braced")}
