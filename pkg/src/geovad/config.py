"""Pipeline configuration, benchmark presets and the flat ``key=value`` config format.

A config file holds one ``key = value`` per line; ``#`` starts a comment.  An
optional ``preset = <name>`` line loads a named preset first, and later keys
override it regardless of their position.  Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

from .attention import AttentionParams
from .errors import ConfigError, ParseError, UnknownKey
from .sgp import SgpParams


@dataclass(frozen=True)
class PipelineConfig:
    k_n: int = 12
    k_a: int = 18
    alpha_g: float = 0.5
    kappa: float = 10.0
    hsa_attention: AttentionParams = field(default_factory=AttentionParams)
    sgp: SgpParams = field(default_factory=SgpParams)
    enable_hsa: bool = True
    enable_sgp: bool = True
    frames_per_clip: int = 4
    smooth_sigma_clips: float = 1.0
    seed: int = 42
    mode: str = "offline"
    n_init: int = 10
    max_iter: int = 100
    frechet_t_max: int = 5
    frechet_eps: float = 1e-7

    def __post_init__(self):
        if self.frames_per_clip < 1:
            raise ConfigError("frames_per_clip must be >= 1")
        if self.k_n < 1 or self.k_a < 1:
            raise ConfigError("k_n and k_a must be >= 1")
        if not 0.0 <= self.alpha_g <= 1.0:
            raise ConfigError("alpha_g must lie in [0, 1]")
        if self.kappa < 0:
            raise ConfigError("kappa must be >= 0")
        if self.smooth_sigma_clips < 0:
            raise ConfigError("smooth_sigma_clips must be >= 0")
        if self.mode not in ("offline", "online"):
            raise ConfigError(f"mode must be 'offline' or 'online', got {self.mode!r}")


# flat key -> (section, field) where section is None, "hsa" or "sgp"
_TOP = {f.name for f in dataclasses.fields(PipelineConfig)} - {"hsa_attention", "sgp"}
_SGP = {f.name for f in dataclasses.fields(SgpParams)} - {"attention"}
_ATT = {f.name for f in dataclasses.fields(AttentionParams)}

KEYS: dict[str, tuple[str | None, str]] = {k: (None, k) for k in _TOP}
KEYS.update({k: ("sgp", k) for k in _SGP})
KEYS.update({f"hsa_{k}": ("hsa", k) for k in _ATT})
KEYS.update({f"sgp_{k}": ("sgp_att", k) for k in _ATT})


PRESETS: dict[str, dict[str, object]] = {
    "default": {},
    "xd": {"k_n": 10, "k_a": 12, "alpha_g": 0.80, "beta_base": 0.15},
    "ucf": {"k_n": 18, "k_a": 12, "alpha_g": 0.75, "beta_base": 0.50},
    "ubnormal": {"k_n": 12, "k_a": 20, "alpha_g": 0.35, "enable_sgp": False},
    "unified": {"k_n": 12, "k_a": 18, "alpha_g": 0.5, "beta_base": 0.5},
}


def _coerce(raw: str, like):
    if isinstance(like, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw.strip()


def _default_of(key: str):
    section, name = KEYS[key]
    base = PipelineConfig()
    if section is None:
        return getattr(base, name)
    if section == "hsa":
        return getattr(base.hsa_attention, name)
    if section == "sgp":
        return getattr(base.sgp, name)
    return getattr(base.sgp.attention, name)


def coerce_value(key: str, raw: str):
    """Parse a raw string into the type of ``key``'s default."""
    if key not in KEYS:
        raise UnknownKey(key, 0)
    return _coerce(raw, _default_of(key))


def apply_overrides(cfg: PipelineConfig, values: dict[str, object]) -> PipelineConfig:
    """Return ``cfg`` with flat-key overrides applied."""
    top, hsa, sgp, sgp_att = {}, {}, {}, {}
    for key, val in values.items():
        if key not in KEYS:
            raise UnknownKey(key, 0)
        section, name = KEYS[key]
        {None: top, "hsa": hsa, "sgp": sgp, "sgp_att": sgp_att}[section][name] = val
    try:
        att = replace(cfg.sgp.attention, **sgp_att)
        sgp_params = replace(cfg.sgp, attention=att, **sgp)
        return replace(cfg, hsa_attention=replace(cfg.hsa_attention, **hsa), sgp=sgp_params, **top)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def preset(name: str) -> PipelineConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return apply_overrides(PipelineConfig(), PRESETS[name])


def parse_config_text(text: str) -> PipelineConfig:
    values: dict[str, object] = {}
    base = "default"
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = value", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key == "preset":
            base = raw
            continue
        if key not in KEYS:
            raise UnknownKey(key, lineno)
        try:
            values[key] = _coerce(raw, _default_of(key))
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {exc}", lineno) from exc
    return apply_overrides(preset(base), values)


def parse_config(path) -> PipelineConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def config_to_text(cfg: PipelineConfig) -> str:
    lines = []
    for key in sorted(KEYS):
        section, name = KEYS[key]
        obj = {None: cfg, "hsa": cfg.hsa_attention, "sgp": cfg.sgp, "sgp_att": cfg.sgp.attention}[section]
        lines.append(f"{key} = {getattr(obj, name)}")
    return "\n".join(lines) + "\n"
