"""Key-value configuration shared by the command-line tools.

The file format is deliberately plain: one ``key = value`` pair per line,
``#`` starts a comment, blank lines are ignored. Unknown keys are rejected so
typos fail loudly. Defaults reproduce the reference operating point
(200 anchors, 36 x 12 grid, width 256, tau 0.2, queue capacity 100).

Recognized keys::

    mode             instance | semantic | panoptic
    m_anchors        outline anchors per object        (default 200)
    u                angle bins                        (default 36)
    v                radius bins                       (default 12)
    d_model          descriptor / embedding width      (default 256)
    grid_extent      object_scale | image_scale
    radius_margin    outer-ring padding factor         (default 1.25)
    negative_mode    image_bounds | target_mask | mask_union
    use_spa          true | false, add descriptors to queries when matching
    affinity_floor   minimum affinity to accept a match (default 0.0)
    new_track_policy spawn | drop
    tau              descriptor change threshold       (default 0.2)
    n_q              class queue capacity              (default 100)
    momentum         prototype update momentum         (default 0.99)
    window           evaluation window in frames       (default 4)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .association import MatchConfig
from .descriptor import DescriptorConfig
from .errors import FormatError


@dataclass
class PipelineConfig:
    mode: str = "instance"
    m_anchors: int = 200
    tau: float = 0.2
    n_q: int = 100
    momentum: float = 0.99
    window: int = 4
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    match: MatchConfig = field(default_factory=MatchConfig)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_KEY_TYPES = {
    "mode": str,
    "m_anchors": int,
    "u": int,
    "v": int,
    "d_model": int,
    "grid_extent": str,
    "radius_margin": float,
    "negative_mode": str,
    "use_spa": _parse_bool,
    "affinity_floor": float,
    "new_track_policy": str,
    "tau": float,
    "n_q": int,
    "momentum": float,
    "window": int,
}


def parse_config_text(text: str, origin: str = "<config>") -> PipelineConfig:
    values: dict[str, object] = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{origin}:{line_no}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _KEY_TYPES:
            raise FormatError(f"{origin}:{line_no}: unknown key {key!r}")
        try:
            values[key] = _KEY_TYPES[key](val)
        except ValueError as e:
            raise FormatError(f"{origin}:{line_no}: bad value for {key}: {e}") from e

    try:
        descriptor = DescriptorConfig(
            u=values.pop("u", 36),
            v=values.pop("v", 12),
            d_model=values.pop("d_model", 256),
            grid_extent=values.pop("grid_extent", "object_scale"),
            radius_margin=values.pop("radius_margin", 1.25),
            negative_mode=values.pop("negative_mode", "image_bounds"),
        )
        match = MatchConfig(
            use_spa=values.pop("use_spa", True),
            affinity_floor=values.pop("affinity_floor", 0.0),
            new_track_policy=values.pop("new_track_policy", "spawn"),
        )
        cfg = PipelineConfig(descriptor=descriptor, match=match, **values)
    except (ValueError, TypeError) as e:
        raise FormatError(f"{origin}: {e}") from e
    if cfg.mode not in ("instance", "semantic", "panoptic"):
        raise FormatError(f"{origin}: unknown mode {cfg.mode!r}")
    if cfg.m_anchors < 1:
        raise FormatError(f"{origin}: m_anchors must be positive")
    if cfg.window < 1:
        raise FormatError(f"{origin}: window must be positive")
    if cfg.n_q < 1:
        raise FormatError(f"{origin}: n_q must be positive")
    if not (0.0 <= cfg.momentum < 1.0):
        raise FormatError(f"{origin}: momentum must be in [0, 1)")
    return cfg


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise FormatError(f"cannot read config {p}: {e}") from e
    return parse_config_text(text, origin=str(p))
