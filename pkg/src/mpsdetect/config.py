"""Detector configuration: defaults, flat-file parsing, stable hashing.

The on-disk format is flat ``section.key = value`` text (``#`` starts a
comment). Every key is optional and falls back to its default; unknown
keys are rejected so typos surface immediately.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from mpsdetect.cluster import ClusteringConfig


@dataclass(frozen=True)
class IngestConfig:
    buffer_len_s: float = 10.0
    hop_s: float = 10.0  # = buffer_len_s: non-overlapping buffers


@dataclass(frozen=True)
class DspConfig:
    band_lo_hz: float = 2000.0
    band_hi_hz: float = 24000.0
    filter_order: int = 4
    superlet_freq_lo_hz: float = 1000.0
    superlet_freq_hi_hz: float = 30000.0
    superlet_freq_step_hz: float = 250.0
    superlet_base_cycles: int = 3
    superlet_order_min: int = 1
    superlet_order_max: int = 16


@dataclass(frozen=True)
class RoiConfig:
    snr_threshold_db: float = 23.0
    max_events: int = 45
    min_separation_s: float = 0.050
    pre_s: float = 0.005
    post_s: float = 0.045  # holds pulse pairs up to the 40 ms delay ceiling
    edge_exclusion_s: float = 0.001


@dataclass(frozen=True)
class MpsConfig:
    intra_min_sep_s: float = 0.0005


@dataclass(frozen=True)
class VerifyConfig:
    mps_max_s: float = 0.040
    # duration/frequency limits ship uncalibrated; run `mpsdetect calibrate`
    # on annotated data to replace them.
    duration_max_s: float = 0.001
    freq_max_hz: float = 20000.0
    calibrated: bool = False
    target_p: float = 0.05
    feature_half_window_s: float = 0.003
    single_precision: bool = True


@dataclass(frozen=True)
class DecideConfig:
    utility_threshold: float = 1.5  # the only detection threshold


@dataclass(frozen=True)
class Config:
    ingest: IngestConfig = field(default_factory=IngestConfig)
    dsp: DspConfig = field(default_factory=DspConfig)
    roi: RoiConfig = field(default_factory=RoiConfig)
    mps: MpsConfig = field(default_factory=MpsConfig)
    cluster: ClusteringConfig = field(default_factory=ClusteringConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    decide: DecideConfig = field(default_factory=DecideConfig)

    def to_flat(self) -> dict:
        flat = {}
        for section in dataclasses.fields(self):
            sub = getattr(self, section.name)
            for f in dataclasses.fields(sub):
                flat[f"{section.name}.{f.name}"] = getattr(sub, f.name)
        return flat

    def replace(self, **flat_updates) -> "Config":
        """New Config with flat ``section.key`` overrides applied."""
        staged: dict[str, dict] = {}
        valid = self.to_flat()
        for key, value in flat_updates.items():
            if key not in valid:
                raise KeyError(f"unknown config key: {key}")
            section, name = key.split(".", 1)
            staged.setdefault(section, {})[name] = value
        sections = {}
        for section, updates in staged.items():
            current = getattr(self, section)
            coerced = {k: _coerce(type(getattr(current, k)), v, f"{section}.{k}") for k, v in updates.items()}
            sections[section] = dataclasses.replace(current, **coerced)
        return dataclasses.replace(self, **sections)

    def config_hash(self) -> str:
        flat = self.to_flat()
        text = "\n".join(f"{k}={flat[k]!r}" for k in sorted(flat))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _coerce(target_type, value, key):
    if isinstance(value, target_type) and not (target_type is int and isinstance(value, bool)):
        return value
    if not isinstance(value, str):
        if target_type is float and isinstance(value, int):
            return float(value)
        raise ValueError(f"{key}: cannot convert {value!r} to {target_type.__name__}")
    text = value.strip()
    if target_type is bool:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {text!r}")
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    return text


def load_config(path) -> Config:
    """Parse a flat key-value config file into a Config."""
    path = Path(path)
    updates = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected 'section.key = value'")
            key, value = stripped.split("=", 1)
            updates[key.strip()] = value.strip()
    try:
        return Config().replace(**updates)
    except KeyError as exc:
        raise ValueError(f"{path}: {exc.args[0]}") from exc


def dump_config(cfg: Config) -> str:
    """Serialize as the flat text format (round-trips through load_config)."""
    flat = cfg.to_flat()
    return "\n".join(f"{k} = {flat[k]}" for k in sorted(flat)) + "\n"
