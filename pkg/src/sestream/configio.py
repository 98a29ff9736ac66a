"""TOML experiment configuration: [unet], [sde], [stft] sections.

Any key may be omitted; command-line flags override file values.
"""

from __future__ import annotations

from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, DataError
from .sde import BbedParams
from .spectral import StftConfig
from .unet import UNetConfig


def load_config(path) -> tuple[UNetConfig, BbedParams, StftConfig]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: cannot parse config ({exc})") from exc
    known = {"unet", "sde", "stft"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config sections {sorted(unknown)}")
    try:
        unet = UNetConfig(**doc.get("unet", {}))
        sde = BbedParams(**doc.get("sde", {}))
        stft = StftConfig(**doc.get("stft", {}))
    except TypeError as exc:
        raise ConfigError(f"{path}: bad config key ({exc})") from exc
    return unet, sde, stft
