"""Pipeline configuration.

Values are resolved in increasing order of precedence: built-in defaults, a
JSON config file (``--config``), ``GEOPIPE_<FIELD>`` environment variables,
explicit command-line flags.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Mapping, Optional

from geopipe.instructions import DEFAULT_ROTATION_THRESHOLD, DEFAULT_TRANSLATION_THRESHOLD
from geopipe.repe import DEFAULT_GAMMA, FrequencyConfig
from geopipe.scene_graph import DEFAULT_CORRIDOR_RADIUS, DEFAULT_DISTANCE_THRESHOLD, DEFAULT_MIN_HOPS

ENV_PREFIX = "GEOPIPE_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    distance_threshold: float = DEFAULT_DISTANCE_THRESHOLD
    corridor_radius: float = DEFAULT_CORRIDOR_RADIUS
    translation_threshold: float = DEFAULT_TRANSLATION_THRESHOLD
    rotation_threshold: float = DEFAULT_ROTATION_THRESHOLD
    cut_threshold: float = 1.0
    coverage_threshold: float = 0.5
    gamma: float = DEFAULT_GAMMA
    channel_dim: int = 1024
    normalize_intrinsics: bool = False
    seed: int = 0
    min_hops: int = DEFAULT_MIN_HOPS
    trajectories_per_video: int = 8
    view_window: int = 4
    threads: Optional[int] = None

    _POSITIVE = (
        "distance_threshold",
        "corridor_radius",
        "translation_threshold",
        "rotation_threshold",
        "cut_threshold",
        "coverage_threshold",
        "channel_dim",
        "trajectories_per_video",
    )

    def validate(self) -> "PipelineConfig":
        for name in self._POSITIVE:
            value = getattr(self, name)
            if not value > 0:
                hint = " (no frame pair can be closer than that, so the graph has no edges)" if name == "distance_threshold" else ""
                raise ConfigError(f"{name} must be positive, got {value}{hint}")
        if self.coverage_threshold > 1:
            raise ConfigError(f"coverage_threshold must be at most 1, got {self.coverage_threshold}")
        if self.min_hops < 0:
            raise ConfigError(f"min_hops must be >= 0, got {self.min_hops}")
        if self.view_window < 2:
            raise ConfigError(f"view_window must be >= 2, got {self.view_window}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        FrequencyConfig(self.channel_dim, self.gamma, self.normalize_intrinsics)
        return self

    @property
    def frequency(self) -> FrequencyConfig:
        return FrequencyConfig(self.channel_dim, self.gamma, self.normalize_intrinsics)

    @property
    def worker_count(self) -> int:
        return self.threads if self.threads is not None else (os.cpu_count() or 1)

    def to_dict(self) -> dict:
        return asdict(self)


def _coerce(name: str, raw: Any) -> Any:
    kinds = {f.name: f.type for f in fields(PipelineConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown config key {name!r}")
    kind = kinds[name]
    if raw is None:
        return None
    try:
        if "bool" in kind:
            if isinstance(raw, str):
                if raw.lower() in ("1", "true", "yes", "on"):
                    return True
                if raw.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(raw)
            return bool(raw)
        if "int" in kind:
            return int(raw)
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def resolve_config(
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> PipelineConfig:
    cfg = PipelineConfig()
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{config_path}: not valid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{config_path}: config must be a JSON object")
        cfg = replace(cfg, **{k: _coerce(k, v) for k, v in data.items()})
    environ = os.environ if environ is None else environ
    from_env = {}
    for f in fields(PipelineConfig):
        key = ENV_PREFIX + f.name.upper()
        if key in environ:
            from_env[f.name] = _coerce(f.name, environ[key])
    cfg = replace(cfg, **from_env)
    if overrides:
        cfg = replace(cfg, **{k: _coerce(k, v) for k, v in overrides.items() if v is not None})
    return cfg.validate()
