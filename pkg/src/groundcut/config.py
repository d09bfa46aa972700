"""Pipeline configuration: INI file sections flattened to ``section.key`` names.

Example::

    [sensor]
    model = hdl64e

    [pipeline]
    stage = full
    rows = 0:64

    [grid]
    sectors = 360
    h_thresh = 0.3

Any key can be overridden with ``--set section.key=value`` on the CLI.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, fields, replace

from .adjacency import DEFAULT_K_DEG, DEFAULT_MARK, DEFAULT_ROW_STRIDE, DEFAULT_WINDOW, MARK_MODES
from .errors import ConfigError
from .mrf import MrfParams
from .polar import DEFAULT_H_THRESH, DEFAULT_SECTORS

STAGES = ("coarse", "adjacency", "full")


@dataclass(frozen=True)
class PipelineConfig:
    sensor: str = "hdl64e"
    stage: str = "full"
    rows: tuple[int, int] | None = None
    sectors: int = DEFAULT_SECTORS
    h_thresh: float = DEFAULT_H_THRESH
    k_deg: float = DEFAULT_K_DEG
    window: int = DEFAULT_WINDOW
    row_stride: int = DEFAULT_ROW_STRIDE
    mark: str = DEFAULT_MARK
    mrf: MrfParams = field(default_factory=MrfParams)

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ConfigError(f"stage must be one of {STAGES}, got {self.stage!r}")
        if self.sectors < 1:
            raise ConfigError("grid.sectors must be >= 1")
        if self.window < 0 or self.row_stride < 1:
            raise ConfigError("adjacency.window must be >= 0 and adjacency.row_stride >= 1")
        if self.mark not in MARK_MODES:
            raise ConfigError(f"adjacency.mark must be 'far' or 'both', got {self.mark!r}")
        if not 0 <= self.k_deg < 90:
            raise ConfigError("adjacency.K_deg must be in [0, 90)")
        if self.rows is not None and not 0 <= self.rows[0] < self.rows[1]:
            raise ConfigError(f"pipeline.rows must be lo:hi with 0 <= lo < hi, got {self.rows}")

    @property
    def k_rad(self) -> float:
        return math.radians(self.k_deg)

    def check_rows(self, laser_count: int) -> None:
        if self.rows is not None and self.rows[1] > laser_count:
            raise ConfigError(f"pipeline.rows {self.rows} exceeds laser count {laser_count}")


# flat key -> (attribute, converter); mrf.* keys go to MrfParams
_TOP_KEYS = {
    "sensor.model": ("sensor", str),
    "pipeline.stage": ("stage", str),
    "pipeline.rows": ("rows", None),
    "grid.sectors": ("sectors", int),
    "grid.h_thresh": ("h_thresh", float),
    "adjacency.k_deg": ("k_deg", float),
    "adjacency.window": ("window", int),
    "adjacency.row_stride": ("row_stride", int),
    "adjacency.mark": ("mark", str),
}
_MRF_KEYS = {
    "mrf.lambda": ("lam", float),
    "mrf.sigma": ("sigma", float),
    "mrf.scale_k": ("scale_k", float),
    "mrf.seed_window": ("seed_window", int),
    "mrf.seed_ratio": ("seed_ratio", float),
    "mrf.epsilon_prob": ("epsilon_prob", float),
    "mrf.d_min": ("d_min", float),
}
KNOWN_KEYS = tuple(_TOP_KEYS) + tuple(_MRF_KEYS)


def _parse_rows(text: str) -> tuple[int, int] | None:
    text = text.strip()
    if text in ("", "all"):
        return None
    lo, _, hi = text.partition(":")
    return int(lo), int(hi)


def apply_overrides(cfg: PipelineConfig, values: dict[str, str]) -> PipelineConfig:
    top: dict = {}
    mrf: dict = {}
    for raw_key, raw_val in values.items():
        key = raw_key.strip().lower()
        try:
            if key in _TOP_KEYS:
                attr, conv = _TOP_KEYS[key]
                top[attr] = _parse_rows(raw_val) if conv is None else conv(raw_val.strip())
            elif key in _MRF_KEYS:
                attr, conv = _MRF_KEYS[key]
                mrf[attr] = conv(raw_val.strip())
            else:
                raise ConfigError(f"unknown config key {raw_key!r}")
        except ValueError as exc:
            raise ConfigError(f"bad value for {raw_key}: {raw_val!r}") from exc
    try:
        if mrf:
            top["mrf"] = replace(cfg.mrf, **mrf)
        return replace(cfg, **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_assignments(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = val
    return out


def load_config(path: str | os.PathLike | None = None, overrides: dict[str, str] | None = None) -> PipelineConfig:
    values: dict[str, str] = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for section in parser.sections():
            for key, val in parser[section].items():
                values[f"{section}.{key}"] = val
        if "sensor.model" in values and path is not None:
            model = values["sensor.model"].strip()
            if model != "hdl64e" and not os.path.isabs(model):
                values["sensor.model"] = os.path.join(os.path.dirname(os.path.abspath(path)), model)
    values.update(overrides or {})
    return apply_overrides(PipelineConfig(), values)


def dump_config(cfg: PipelineConfig) -> str:
    rows = "all" if cfg.rows is None else f"{cfg.rows[0]}:{cfg.rows[1]}"
    lines = [
        "[sensor]", f"model = {cfg.sensor}", "",
        "[pipeline]", f"stage = {cfg.stage}", f"rows = {rows}", "",
        "[grid]", f"sectors = {cfg.sectors}", f"h_thresh = {cfg.h_thresh}", "",
        "[adjacency]", f"K_deg = {cfg.k_deg}", f"window = {cfg.window}", f"row_stride = {cfg.row_stride}",
        f"mark = {cfg.mark}", "",
        "[mrf]",
    ]
    names = {v[0]: k.split(".", 1)[1] for k, v in _MRF_KEYS.items()}
    for f in fields(cfg.mrf):
        lines.append(f"{names[f.name]} = {getattr(cfg.mrf, f.name)}")
    return "\n".join(lines) + "\n"
