"""Experiment config files: a small TOML-style reader.

Supports the subset the config schema needs: one level of [section]
headers, key = value pairs with quoted strings, integers, floats, booleans,
and flat arrays, plus # comments. (The stdlib tomllib only exists from
3.11; this project targets 3.10.)
"""

from __future__ import annotations

import os
import re
from typing import Dict, Optional

from ..decoding import DecodeConfig
from .experiment import ExperimentConfig, ProviderSpec

SEED_ENV_VAR = "DIVERGAUGE_SEED"

_KEY_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


def _parse_scalar(raw: str, where: str):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw == "true":
        return True
    if raw == "false":
        return False
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        return [_parse_scalar(part, where) for part in inner.split(",")] if inner else []
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"{where}: cannot parse value {raw!r}")


def parse_config_text(text: str) -> Dict[str, dict]:
    """Parse TOML-style key/value text into {section: {key: value}}; top level is ''."""
    result: Dict[str, dict] = {"": {}}
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip() if not line.strip().startswith('"') else line.strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            result.setdefault(section, {})
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ValueError(f"line {lineno}: bad key {key!r}")
        result[section][key] = _parse_scalar(raw, f"line {lineno}")
    return result


def experiment_config_from_text(text: str, env: Optional[dict] = None) -> ExperimentConfig:
    """Build an ExperimentConfig; DIVERGAUGE_SEED in env overrides global_seed."""
    env = os.environ if env is None else env
    data = parse_config_text(text)
    top = data.get("", {})
    decode_kv = dict(data.get("decode", {}))
    provider_kv = dict(data.get("provider", {}))

    tau = provider_kv.get("sharpen_tau", ProviderSpec.sharpen_tau)
    if tau == 0 or tau == 0.0:
        provider_kv["sharpen_tau"] = None  # 0 disables sharpening (TOML has no null)
    decode = DecodeConfig(**{k: v for k, v in decode_kv.items()})
    provider = ProviderSpec(**{k: v for k, v in provider_kv.items()})

    global_seed = int(top.get("global_seed", 0))
    if env.get(SEED_ENV_VAR):
        global_seed = int(env[SEED_ENV_VAR])
    return ExperimentConfig(
        label=top.get("label", "run"),
        decode=decode,
        provider=provider,
        samples_per_prompt=int(top.get("samples_per_prompt", 50)),
        incipit_tokens=int(top.get("incipit_tokens", 20)),
        prompt_style=top.get("prompt_style", "completion"),
        global_seed=global_seed,
    )


def experiment_config_from_file(path, env: Optional[dict] = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        return experiment_config_from_text(f.read(), env=env)
