"""Configuration loading: YAML parsing, env overrides, path resolution."""

import pytest

from lingua_bridge.config import (
    ENV_CONFIG_PATH,
    ENV_TRANSLATOR_API_KEY,
    ENV_VLM_API_KEY,
    ConfigError,
    load_config,
)

MINIMAL = """\
translator:
  base_url: http://translator.test/v1
  model_name: nmt-large
vlm:
  base_url: http://vlm.test/v1
  model_name: vlm-7b
"""

FULL = """\
translator:
  base_url: http://translator.test/v1
  model_name: nmt-large
  api_key: file-translator-key
  timeout: 30
  max_retries: 5
  max_in_flight: 8
  temperature: 0.2
vlm:
  base_url: http://vlm.test/v1
  model_name: vlm-7b
  api_key: file-vlm-key
languages:
  target: de
  pivot: en
prompts:
  in: prompts/de-en.yaml
  out: /etc/prompts/en-de.yaml
audit:
  sample: audit/sample.json
  store: audit/annotations.ndjson
ui:
  dir: static
"""


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in (ENV_CONFIG_PATH, ENV_TRANSLATOR_API_KEY, ENV_VLM_API_KEY):
        monkeypatch.delenv(name, raising=False)


def write_config(tmp_path, text=MINIMAL, name="gateway.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadConfig:
    def test_minimal_file_fills_defaults(self, tmp_path):
        config = load_config(write_config(tmp_path))
        assert config.translator.base_url == "http://translator.test/v1"
        assert config.translator.model_name == "nmt-large"
        assert config.translator.api_key is None
        assert config.translator.timeout == 60.0
        assert config.translator.max_retries == 2
        assert config.translator.max_in_flight == 4
        assert config.translator.temperature == 0.0
        assert config.vlm.model_name == "vlm-7b"
        assert config.target_language == "fr"
        assert config.pivot_language == "en"
        assert config.prompt_in_path is None
        assert config.audit_sample_path is None
        assert config.ui_dir is None

    def test_full_file(self, tmp_path):
        config = load_config(write_config(tmp_path, FULL))
        assert config.translator.api_key == "file-translator-key"
        assert config.translator.timeout == 30.0
        assert config.translator.max_retries == 5
        assert config.translator.max_in_flight == 8
        assert config.translator.temperature == 0.2
        assert config.vlm.api_key == "file-vlm-key"
        assert config.target_language == "de"

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        config = load_config(write_config(tmp_path, FULL))
        base = tmp_path.resolve()
        assert config.prompt_in_path == base / "prompts" / "de-en.yaml"
        assert config.audit_sample_path == base / "audit" / "sample.json"
        assert config.annotation_store_path == base / "audit" / "annotations.ndjson"
        assert config.ui_dir == base / "static"

    def test_absolute_paths_kept(self, tmp_path):
        config = load_config(write_config(tmp_path, FULL))
        assert str(config.prompt_out_path) == "/etc/prompts/en-de.yaml"


class TestEnvOverrides:
    def test_env_api_keys_win_over_file(self, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_TRANSLATOR_API_KEY, "env-translator-key")
        monkeypatch.setenv(ENV_VLM_API_KEY, "env-vlm-key")
        config = load_config(write_config(tmp_path, FULL))
        assert config.translator.api_key == "env-translator-key"
        assert config.vlm.api_key == "env-vlm-key"

    def test_env_api_key_fills_missing_file_key(self, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_TRANSLATOR_API_KEY, "env-only-key")
        config = load_config(write_config(tmp_path))
        assert config.translator.api_key == "env-only-key"
        assert config.vlm.api_key is None

    def test_config_path_from_environment(self, tmp_path, monkeypatch):
        path = write_config(tmp_path)
        monkeypatch.setenv(ENV_CONFIG_PATH, str(path))
        config = load_config()
        assert config.translator.model_name == "nmt-large"

    def test_no_path_anywhere(self):
        with pytest.raises(ConfigError, match=ENV_CONFIG_PATH):
            load_config()


class TestErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.yaml")

    def test_invalid_yaml(self, tmp_path):
        path = write_config(tmp_path, "translator: [unclosed")
        with pytest.raises(ConfigError, match="not valid YAML"):
            load_config(path)

    def test_non_mapping_top_level(self, tmp_path):
        path = write_config(tmp_path, "- just\n- a\n- list\n")
        with pytest.raises(ConfigError, match="top level"):
            load_config(path)

    @pytest.mark.parametrize("section", ["translator", "vlm"])
    def test_missing_required_section(self, tmp_path, section):
        # MINIMAL is two three-line sections; keep only the other one.
        lines = MINIMAL.splitlines()
        kept = lines[3:] if section == "translator" else lines[:3]
        path = write_config(tmp_path, "\n".join(kept) + "\n")
        with pytest.raises(ConfigError, match=f"missing required section '{section}'"):
            load_config(path)

    def test_section_must_be_mapping(self, tmp_path):
        path = write_config(tmp_path, "translator: just-a-string\nvlm: {}\n")
        with pytest.raises(ConfigError, match="must be a mapping"):
            load_config(path)

    def test_section_missing_endpoint_fields(self, tmp_path):
        path = write_config(
            tmp_path,
            "translator:\n  base_url: http://t.test\nvlm:\n  base_url: http://v.test\n  model_name: m\n",
        )
        with pytest.raises(ConfigError, match="'translator' is missing"):
            load_config(path)

    def test_invalid_endpoint_values_propagate(self, tmp_path):
        path = write_config(
            tmp_path,
            MINIMAL.replace("  model_name: nmt-large", "  model_name: nmt-large\n  timeout: -5"),
        )
        with pytest.raises(ValueError):
            load_config(path)
