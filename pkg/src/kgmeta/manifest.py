"""Run manifests: resolved configuration with provenance, input digests,
and artifact paths. Written before any training starts and free of
timestamps so identical runs produce identical manifests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError, CorpusParseError

MANIFEST_VERSION = 1


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def parse_config_file(path: str) -> dict[str, str]:
    """Flat `key = value` lines; '#' starts a comment."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CorpusParseError(f"expected key = value, got {raw.strip()!r}",
                                       path=path, line=lineno)
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def resolve_config(defaults: dict, file_values: dict[str, str],
                   flag_values: dict, env_values: dict | None = None,
                   ) -> tuple[dict, dict[str, str]]:
    """Merge flag > file > env > default; returns (values, provenance).

    File values arrive as strings and are coerced to the default's type;
    unknown file keys are rejected to catch typos early.
    """
    env_values = env_values or {}
    unknown = set(file_values) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    resolved: dict = {}
    provenance: dict[str, str] = {}
    for key, default in defaults.items():
        if flag_values.get(key) is not None:
            resolved[key] = flag_values[key]
            provenance[key] = "flag"
        elif key in file_values:
            resolved[key] = _coerce(file_values[key], default, key)
            provenance[key] = "file"
        elif key in env_values and env_values[key] is not None:
            resolved[key] = env_values[key]
            provenance[key] = "env"
        else:
            resolved[key] = default
            provenance[key] = "default"
    return resolved, provenance


def _coerce(text: str, default, key: str):
    if isinstance(default, bool):
        lowered = text.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key '{key}' expects a boolean, got {text!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"config key '{key}' expects an integer, "
                              f"got {text!r}") from exc
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"config key '{key}' expects a number, "
                              f"got {text!r}") from exc
    if default is None:
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"config key '{key}' expects an integer, "
                              f"got {text!r}") from exc
    return text


@dataclass
class RunManifest:
    """Everything needed to reproduce one command invocation."""

    command: str
    seed: int
    config: dict[str, dict] = field(default_factory=dict)
    inputs: dict[str, dict] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    version: int = MANIFEST_VERSION

    @classmethod
    def build(cls, command: str, seed: int, values: dict,
              provenance: dict[str, str], inputs: dict[str, str],
              artifacts: dict[str, str]) -> "RunManifest":
        manifest = cls(command=command, seed=seed)
        for key in sorted(values):
            manifest.config[key] = {"value": values[key], "source": provenance[key]}
        for label, path in sorted(inputs.items()):
            manifest.inputs[label] = {"path": path, "sha256": sha256_file(path)}
        manifest.artifacts = dict(sorted(artifacts.items()))
        return manifest

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "artifacts": self.artifacts,
            "version": self.version,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path: str) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(command=payload["command"], seed=payload["seed"],
                   config=payload["config"], inputs=payload["inputs"],
                   artifacts=payload["artifacts"], version=payload["version"])
