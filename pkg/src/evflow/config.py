"""Flat key-value run configuration spanning every module config.

Format: one `section.key = value` per line, `#` comments, blank lines
ignored.  Keys map onto the config dataclasses (camera.*, flow.*,
estimator.*, render.*, landing.*) plus the top-level `seed`.  Unknown
keys are rejected, values are parsed by the declared field type
(`inf` is a valid float), and a resolved config can be serialized back
out so every run log embeds the exact configuration that produced it.
"""

from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field, replace

from .camera import CameraIntrinsics
from .landing import LandingConfig
from .observables import EstimatorConfig
from .planefit import FlowConfig
from .render import RenderConfig


class ConfigError(ValueError):
    """Malformed line, unknown key, or unparseable value."""


_SECTIONS: dict = {
    "camera": CameraIntrinsics,
    "flow": FlowConfig,
    "estimator": EstimatorConfig,
    "render": RenderConfig,
    "landing": LandingConfig,
}
# set through their own sections / the top-level seed, not via landing.*
_EXCLUDED = {"landing": {"flow", "estimator", "render", "seed"}}
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _section_fields(section: str) -> dict:
    cls = _SECTIONS[section]
    hints = typing.get_type_hints(cls)
    skip = _EXCLUDED.get(section, set())
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)
            if f.name not in skip}


def _parse_value(key: str, raw: str, typ):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)  # accepts inf / -inf / nan spellings
        if typ is str:
            return raw
    except ValueError:
        raise ConfigError(f"key '{key}': cannot parse {raw!r} as {typ.__name__}")
    raise ConfigError(f"key '{key}' has unsupported type {typ!r}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration for one command invocation."""

    seed: int = 0
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    flow: FlowConfig = field(default_factory=FlowConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    landing: LandingConfig = field(default_factory=LandingConfig)

    def resolved_landing(self) -> LandingConfig:
        """Landing config with the shared sections and seed filled in."""
        return replace(self.landing, flow=self.flow, estimator=self.estimator,
                       render=self.render, seed=self.seed)


def parse_config_text(text: str) -> dict:
    """Parse config text into a {dotted_key: typed_value} dict."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {body!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key == "seed":
            out[key] = _parse_value(key, raw, int)
            continue
        if "." not in key:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        section, name = key.split(".", 1)
        fields = _section_fields(section) if section in _SECTIONS else None
        if fields is None or name not in fields:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        out[key] = _parse_value(key, raw, fields[name])
    return out


def build_run_config(values: dict) -> RunConfig:
    """Assemble a RunConfig from a dotted-key dict (e.g. parser output)."""
    per_section: dict = {s: {} for s in _SECTIONS}
    seed = 0
    for key, value in values.items():
        if key == "seed":
            seed = value
            continue
        section, name = key.split(".", 1)
        if section not in _SECTIONS or name not in _section_fields(section):
            raise ConfigError(f"unknown key '{key}'")
        per_section[section][name] = value
    built = {s: _SECTIONS[s](**kw) for s, kw in per_section.items()}
    return RunConfig(seed=seed, **built)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return build_run_config(parse_config_text(fh.read()))


def dump_config(cfg: RunConfig) -> str:
    """Serialize to the flat format; parses back to an equal config."""
    lines = [f"seed = {cfg.seed}"]
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        for name in _section_fields(section):
            lines.append(f"{section}.{name} = "
                         f"{_format_value(getattr(obj, name))}")
    return "\n".join(lines) + "\n"


def write_resolved_config(path, cfg: RunConfig) -> None:
    with open(path, "w") as fh:
        fh.write(dump_config(cfg))
