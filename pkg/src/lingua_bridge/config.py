"""Service configuration loading.

The config file is YAML; secrets (endpoint API keys) can be supplied or
overridden through environment variables so they never have to live on disk.
Relative paths inside the file resolve against the file's own directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .records import EndpointConfig

ENV_CONFIG_PATH = "LINGUA_BRIDGE_CONFIG"
ENV_TRANSLATOR_API_KEY = "LINGUA_BRIDGE_TRANSLATOR_API_KEY"
ENV_VLM_API_KEY = "LINGUA_BRIDGE_VLM_API_KEY"


class ConfigError(ValueError):
    """Configuration file is missing, malformed, or incomplete."""


@dataclass(frozen=True)
class GatewayConfig:
    translator: EndpointConfig
    vlm: EndpointConfig
    target_language: str = "fr"
    pivot_language: str = "en"
    # Prompt spec files; when unset the built-in language-pair default is used.
    prompt_in_path: Optional[Path] = None  # target -> pivot
    prompt_out_path: Optional[Path] = None  # pivot -> target
    audit_sample_path: Optional[Path] = None
    annotation_store_path: Optional[Path] = None
    ui_dir: Optional[Path] = None


def _endpoint(section: Any, name: str, env_api_key: str) -> EndpointConfig:
    if not isinstance(section, Mapping):
        raise ConfigError(f"config section {name!r} must be a mapping")
    try:
        base_url = section["base_url"]
        model_name = section["model_name"]
    except KeyError as exc:
        raise ConfigError(f"config section {name!r} is missing {exc}") from exc
    api_key = os.environ.get(env_api_key) or section.get("api_key")
    return EndpointConfig(
        base_url=base_url,
        model_name=model_name,
        api_key=api_key,
        timeout=float(section.get("timeout", 60.0)),
        max_retries=int(section.get("max_retries", 2)),
        max_in_flight=int(section.get("max_in_flight", 4)),
        temperature=float(section.get("temperature", 0.0)),
    )


def _optional_path(section: Mapping, key: str, base: Path) -> Optional[Path]:
    value = section.get(key)
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_config(path: Optional[Path] = None) -> GatewayConfig:
    """Load configuration from `path`, or from $LINGUA_BRIDGE_CONFIG."""
    if path is None:
        env_path = os.environ.get(ENV_CONFIG_PATH)
        if not env_path:
            raise ConfigError(
                f"no config path given and {ENV_CONFIG_PATH} is unset"
            )
        path = Path(env_path)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    for required in ("translator", "vlm"):
        if required not in data:
            raise ConfigError(f"{path}: missing required section {required!r}")

    base = path.resolve().parent
    languages = data.get("languages") or {}
    prompts = data.get("prompts") or {}
    audit = data.get("audit") or {}
    ui = data.get("ui") or {}
    return GatewayConfig(
        translator=_endpoint(data["translator"], "translator", ENV_TRANSLATOR_API_KEY),
        vlm=_endpoint(data["vlm"], "vlm", ENV_VLM_API_KEY),
        target_language=languages.get("target", "fr"),
        pivot_language=languages.get("pivot", "en"),
        prompt_in_path=_optional_path(prompts, "in", base),
        prompt_out_path=_optional_path(prompts, "out", base),
        audit_sample_path=_optional_path(audit, "sample", base),
        annotation_store_path=_optional_path(audit, "store", base),
        ui_dir=_optional_path(ui, "dir", base),
    )
