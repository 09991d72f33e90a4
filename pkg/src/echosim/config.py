"""``key = value`` run configuration covering simulation, ingest and manifest fields."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .ingest import IngestConfig
from .simulation import SimConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunManifest:
    sim: SimConfig = field(default_factory=SimConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    checkpoint_every: int = 100
    k_clusters: int = 8
    cache_path: Optional[str] = None
    llm_url: Optional[str] = None
    llm_model: Optional[str] = None
    llm_max_retries: int = 3
    llm_backoff: float = 1.0

    def __post_init__(self):
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be non-empty and distinct")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sim"].pop("seed")  # per-seed, echoed separately
        return d


_MANIFEST_KEYS = {f.name for f in dataclasses.fields(RunManifest)} - {"sim", "ingest"}
_SIM_KEYS = {f.name: f for f in dataclasses.fields(SimConfig)}
_INGEST_KEYS = {f.name: f for f in dataclasses.fields(IngestConfig)}


def _coerce(name: str, raw: str, default: Any) -> Any:
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = value
    return out


def build_manifest(values: dict[str, str]) -> RunManifest:
    sim_kw, ingest_kw, man_kw = {}, {}, {}
    defaults = RunManifest()
    for key, raw in values.items():
        if key in _SIM_KEYS:
            sim_kw[key] = _coerce(key, raw, getattr(defaults.sim, key))
        elif key in _INGEST_KEYS:
            ingest_kw[key] = _coerce(key, raw, getattr(defaults.ingest, key))
        elif key == "seeds":
            try:
                man_kw["seeds"] = [int(s) for s in raw.replace(",", " ").split()]
            except ValueError:
                raise ConfigError(f"seeds: cannot parse {raw!r}") from None
        elif key in _MANIFEST_KEYS:
            default = getattr(defaults, key)
            man_kw[key] = _coerce(key, raw, default) if default is not None else raw
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    try:
        return RunManifest(SimConfig(**sim_kw), IngestConfig(**ingest_kw), **man_kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_manifest(path=None, overrides: Optional[dict[str, str]] = None) -> RunManifest:
    values = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    values.update(overrides or {})
    return build_manifest(values)
