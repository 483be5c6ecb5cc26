"""Versioned run configuration and model loading.

Environment variables override paths only: IPLAN_BCVAE_PATH,
IPLAN_LOCATOR_PATH, IPLAN_PARTITIONER_PATH and IPLAN_SESSION_DIR.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .core import RoomTypeRegistry
from .data import SYNTH_REGISTRY
from .errors import ConfigError
from .session import ModelBundle

CONFIG_FORMAT = "iplan-config/1"

_ENV_PATHS = {
    "bcvae": "IPLAN_BCVAE_PATH",
    "locator": "IPLAN_LOCATOR_PATH",
    "partitioner": "IPLAN_PARTITIONER_PATH",
}


@dataclass
class AppConfig:
    registry: RoomTypeRegistry = SYNTH_REGISTRY
    model_paths: dict = field(default_factory=dict)
    seed: int = 0
    session_dir: str | None = None
    locate_mode: str = "sample"
    temperature: float = 1.0

    def to_dict(self) -> dict:
        return {
            "format": CONFIG_FORMAT,
            "registry": self.registry.to_dict(),
            "models": dict(self.model_paths),
            "seed": self.seed,
            "session_dir": self.session_dir,
            "locate_mode": self.locate_mode,
            "temperature": self.temperature,
        }


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if payload.get("format") != CONFIG_FORMAT:
        raise ConfigError(f"unsupported config format {payload.get('format')!r}")
    cfg = AppConfig(
        registry=RoomTypeRegistry.from_dict(payload["registry"]),
        model_paths=dict(payload.get("models", {})),
        seed=int(payload.get("seed", 0)),
        session_dir=payload.get("session_dir"),
        locate_mode=payload.get("locate_mode", "sample"),
        temperature=float(payload.get("temperature", 1.0)),
    )
    return apply_env_overrides(cfg)


def apply_env_overrides(cfg: AppConfig) -> AppConfig:
    for key, env in _ENV_PATHS.items():
        value = os.environ.get(env)
        if value:
            cfg.model_paths[key] = value
    session_dir = os.environ.get("IPLAN_SESSION_DIR")
    if session_dir:
        cfg.session_dir = session_dir
    return cfg


def save_config(cfg: AppConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2), encoding="utf-8")


def load_models(cfg: AppConfig) -> ModelBundle:
    from . import locator as locator_mod
    from . import partitioner as partitioner_mod
    from . import typegen as typegen_mod

    missing = [k for k in ("bcvae", "locator", "partitioner") if k not in cfg.model_paths]
    if missing:
        raise ConfigError(f"config is missing model paths for: {', '.join(missing)}")
    type_vae = typegen_mod.load_checkpoint(cfg.model_paths["bcvae"], cfg.registry)
    center_net = locator_mod.load_checkpoint(cfg.model_paths["locator"], cfg.registry)
    gen, _critic = partitioner_mod.load_checkpoint(cfg.model_paths["partitioner"], cfg.registry)
    return ModelBundle(
        registry=cfg.registry,
        type_vae=type_vae,
        locator=center_net,
        partitioner=gen,
        locate_mode=cfg.locate_mode,
        temperature=cfg.temperature,
    )
