"""Translation prompt specs: instruction header plus few-shot example pairs.

Specs load from JSON or YAML files so prompts can be audited and swapped
without touching code. The package ships a default English->French spec as
an asset; the reverse direction is derived by swapping the language names in
the header and mirroring the example pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Union

import yaml

from .records import DEFAULT_PLACEHOLDERS, LanguageTag

LANGUAGE_NAMES = {
    "en": "English",
    "fr": "French",
    "de": "German",
    "es": "Spanish",
    "it": "Italian",
}


@dataclass(frozen=True)
class TranslationPromptSpec:
    """Prompting recipe for one translation direction."""

    source: LanguageTag
    target: LanguageTag
    system_prompt: str
    few_shot_pairs: tuple[tuple[str, str], ...] = ()
    placeholders: tuple[str, ...] = DEFAULT_PLACEHOLDERS

    def __post_init__(self) -> None:
        if not self.system_prompt:
            raise ValueError("system_prompt must be non-empty")


def render_system_prompt(spec: TranslationPromptSpec) -> str:
    """Expand a prompt spec into the full system prompt sent to the translator."""
    blocks = [spec.system_prompt]
    for source_text, target_text in spec.few_shot_pairs:
        blocks.append(f"Example:\nSource: {source_text}\nTarget: {target_text}\n")
    return "".join(blocks)


def language_name(tag: LanguageTag) -> str:
    return LANGUAGE_NAMES.get(tag.code, tag.code)


def mirrored(spec: TranslationPromptSpec) -> TranslationPromptSpec:
    """Reverse direction: swap the language names in the header and flip
    every example pair. Headers that never mention the pair are kept as-is."""
    src_name = language_name(spec.source)
    tgt_name = language_name(spec.target)
    header = spec.system_prompt.replace(
        f"from {src_name} to {tgt_name}", f"from {tgt_name} to {src_name}"
    )
    return TranslationPromptSpec(
        source=spec.target,
        target=spec.source,
        system_prompt=header,
        few_shot_pairs=tuple((t, s) for s, t in spec.few_shot_pairs),
        placeholders=spec.placeholders,
    )


def _spec_from_mapping(data: dict) -> TranslationPromptSpec:
    pairs = tuple((str(s), str(t)) for s, t in data.get("few_shot_pairs", []))
    placeholders = tuple(data.get("placeholders", DEFAULT_PLACEHOLDERS))
    return TranslationPromptSpec(
        source=LanguageTag(data["source"]),
        target=LanguageTag(data["target"]),
        system_prompt=data["system_prompt"],
        few_shot_pairs=pairs,
        placeholders=placeholders,
    )


def load_prompt_spec(path: Union[str, Path]) -> TranslationPromptSpec:
    """Load a spec from a JSON or YAML file."""
    text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ValueError(f"prompt spec file {path} does not hold a mapping")
    return _spec_from_mapping(data)


def default_prompt_spec(
    source: Union[str, LanguageTag], target: Union[str, LanguageTag]
) -> TranslationPromptSpec:
    """Built-in spec for en<->fr; other directions need a prompt file."""
    source = source if isinstance(source, LanguageTag) else LanguageTag(source)
    target = target if isinstance(target, LanguageTag) else LanguageTag(target)
    if (source.code, target.code) == ("en", "fr"):
        return _load_asset("translation_prompt_en_fr.json")
    if (source.code, target.code) == ("fr", "en"):
        return mirrored(_load_asset("translation_prompt_en_fr.json"))
    raise KeyError(
        f"no built-in prompt for {source}->{target}; provide a prompt spec file"
    )


def _load_asset(name: str) -> TranslationPromptSpec:
    data = json.loads(
        resources.files("lingua_bridge").joinpath("assets").joinpath(name).read_text("utf-8")
    )
    return _spec_from_mapping(data)
