"""Run configuration with flag > environment > file precedence."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .orchestrator.engine import OrchestratorConfig


class ConfigError(ValueError):
    pass


ENV_PREFIX = "TMLPREDICT_"

#: service/ingest secrets and addresses come from the environment only
ENV_SEARCH_API_KEY = "TMLPREDICT_SEARCH_API_KEY"
ENV_BACKEND_API_KEY = "TMLPREDICT_BACKEND_API_KEY"
ENV_LISTEN_ADDR = "TMLPREDICT_LISTEN_ADDR"


@dataclass(frozen=True)
class RunConfig:
    manifest: str = ""
    typology: str = ""
    registry: str = ""
    backends: str = ""
    kb_docs: str = ""
    search_fixture: str = ""
    aliases: str = ""
    out_dir: str = "out"
    seed: int = 0
    max_thoughts: int = 5
    max_nodes: int = 12
    max_rounds: int = 4
    tool_retry: int = 1
    parallelism: int = 1
    kb_threshold: float = 0.90
    kb_top_k: int = 2

    def orchestrator(self) -> OrchestratorConfig:
        return OrchestratorConfig(
            max_thoughts=self.max_thoughts,
            max_nodes=self.max_nodes,
            max_rounds=self.max_rounds,
            tool_retry=self.tool_retry,
            parallelism=self.parallelism,
            kb_threshold=self.kb_threshold,
            kb_top_k=self.kb_top_k,
            seed=self.seed,
        )

    def validate_paths(self) -> None:
        for name in ("manifest", "typology"):
            value = getattr(self, name)
            if not value:
                raise ConfigError(f"config field {name!r} is required")
            if not Path(value).exists():
                raise ConfigError(f"config {name} path does not exist: {value}")
        for name in ("registry", "backends", "kb_docs", "search_fixture", "aliases"):
            value = getattr(self, name)
            if value and not Path(value).exists():
                raise ConfigError(f"config {name} path does not exist: {value}")
        for name in ("max_thoughts", "max_nodes", "max_rounds", "parallelism"):
            if getattr(self, name) < 1:
                raise ConfigError(f"config {name} must be positive")


_INT_FIELDS = {
    "seed", "max_thoughts", "max_nodes", "max_rounds",
    "tool_retry", "parallelism", "kb_top_k",
}
_FLOAT_FIELDS = {"kb_threshold"}


def _coerce(name: str, value: Any) -> Any:
    if value is None:
        return None
    if name in _INT_FIELDS:
        return int(value)
    if name in _FLOAT_FIELDS:
        return float(value)
    return str(value)


def load_run_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
) -> RunConfig:
    """Resolve a RunConfig: CLI overrides beat env vars beat the config file.

    Env vars are TMLPREDICT_<FIELD> (upper case). Relative paths in the
    config file resolve against the file's directory.
    """
    env = env if env is not None else os.environ
    file_values: dict[str, Any] = {}
    if path:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: cannot read config: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys: {sorted(unknown)}")
        file_values = dict(raw)
        # path-like fields resolve relative to the config file
        for name in ("manifest", "typology", "registry", "backends",
                     "kb_docs", "search_fixture", "aliases", "out_dir"):
            value = file_values.get(name)
            if value:
                file_values[name] = str((path.parent / value).resolve())

    resolved: dict[str, Any] = {}
    for field_def in fields(RunConfig):
        name = field_def.name
        if overrides and overrides.get(name) is not None:
            resolved[name] = _coerce(name, overrides[name])
            continue
        env_name = ENV_PREFIX + name.upper()
        if env_name in env:
            resolved[name] = _coerce(name, env[env_name])
            continue
        if name in file_values:
            resolved[name] = _coerce(name, file_values[name])
    try:
        return RunConfig(**resolved)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config values: {exc}") from exc
