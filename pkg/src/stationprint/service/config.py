"""Pipeline configuration: flat `section.key = value` text files.

Every key can be overridden by an environment variable named
STATIONPRINT_<SECTION>_<KEY>. Relative paths resolve against the config
file's directory.
"""

import os
from dataclasses import dataclass, fields
from datetime import date
from pathlib import Path
from zoneinfo import ZoneInfo

from stationprint.errors import ConfigError

ENV_PREFIX = "STATIONPRINT_"


@dataclass
class PipelineConfig:
    catalog_path: Path = Path("catalog.json")
    snippet_root: Path = Path("data/snippets")
    spectrogram_archive: Path = Path("data/spectrograms.spga")
    embedding_archive: Path = Path("data/embeddings.emba")
    autoencoder_path: Path = Path("data/autoencoder.spae")
    cluster_model_path: Path = Path("data/clusters.spkm")
    fingerprint_store: Path = Path("data/fingerprints.jsonl")
    analysis_dir: Path = Path("data/analysis")
    report_path: Path = Path("data/run_report.json")
    state_path: Path = Path("data/pipeline_state.json")

    schedule_timezone: str = "UTC"
    schedule_day: str = "2020-03-15"
    schedule_hours: str = "0:24"

    spectrogram_n_mels: int = 128
    spectrogram_window_s: float = 0.08
    spectrogram_hop_s: float = 0.04
    spectrogram_clip_db: float = -60.0
    spectrogram_target_rate: int = 16000

    autoencoder_profile: str = "desk"
    autoencoder_seed: int = 0
    autoencoder_epochs: int = 0  # 0 = profile default
    autoencoder_max_samples: int = 0  # 0 = profile default

    fingerprint_k_min: int = 9
    fingerprint_k_max: int = 16
    fingerprint_seed: int = 0

    analyze_archetypes: int = 0  # 0 = pick by scree elbow
    analyze_scree: str = "2:8"  # inclusive, like the fingerprint k-range
    analyze_seed: int = 0
    analyze_daytime: bool = True

    service_bind: str = "127.0.0.1:8787"
    service_reload_token: str = ""

    def day(self) -> date:
        return date.fromisoformat(self.schedule_day)

    def hours(self) -> range:
        lo, hi = self.schedule_hours.split(":")
        return range(int(lo), int(hi))

    def timezone(self) -> ZoneInfo:
        return ZoneInfo(self.schedule_timezone)

    def scree_range(self) -> range:
        lo, hi = self.analyze_scree.split(":")
        return range(int(lo), int(hi) + 1)

    def validate(self):
        if not (2 <= self.fingerprint_k_min <= self.fingerprint_k_max <= 64):
            raise ConfigError(
                f"k-range [{self.fingerprint_k_min}, {self.fingerprint_k_max}] "
                "must sit within [2, 64]"
            )
        if not self.catalog_path.exists():
            raise ConfigError(f"catalog file not found: {self.catalog_path}")
        try:
            self.day()
        except ValueError as exc:
            raise ConfigError(f"schedule.day: {exc}") from exc
        try:
            hours = self.hours()
        except ValueError as exc:
            raise ConfigError(f"schedule.hours: {exc}") from exc
        if not (0 <= hours.start < hours.stop <= 24):
            raise ConfigError(f"schedule.hours {self.schedule_hours} outside 0:24")
        try:
            self.timezone()
        except Exception as exc:
            raise ConfigError(f"schedule.timezone: {exc}") from exc
        if self.autoencoder_profile not in ("paper", "desk"):
            raise ConfigError(f"unknown autoencoder profile {self.autoencoder_profile!r}")
        return self


# file key (section.key) -> dataclass field
FILE_KEYS = {
    "catalog.path": "catalog_path",
    "store.snippets": "snippet_root",
    "store.spectrograms": "spectrogram_archive",
    "store.embeddings": "embedding_archive",
    "store.autoencoder": "autoencoder_path",
    "store.clusters": "cluster_model_path",
    "store.fingerprints": "fingerprint_store",
    "store.analysis": "analysis_dir",
    "store.report": "report_path",
    "store.state": "state_path",
    "schedule.timezone": "schedule_timezone",
    "schedule.day": "schedule_day",
    "schedule.hours": "schedule_hours",
    "spectrogram.n_mels": "spectrogram_n_mels",
    "spectrogram.window_s": "spectrogram_window_s",
    "spectrogram.hop_s": "spectrogram_hop_s",
    "spectrogram.clip_db": "spectrogram_clip_db",
    "spectrogram.target_rate": "spectrogram_target_rate",
    "autoencoder.profile": "autoencoder_profile",
    "autoencoder.seed": "autoencoder_seed",
    "autoencoder.epochs": "autoencoder_epochs",
    "autoencoder.max_samples": "autoencoder_max_samples",
    "fingerprint.k_min": "fingerprint_k_min",
    "fingerprint.k_max": "fingerprint_k_max",
    "fingerprint.seed": "fingerprint_seed",
    "analyze.archetypes": "analyze_archetypes",
    "analyze.scree": "analyze_scree",
    "analyze.seed": "analyze_seed",
    "analyze.daytime": "analyze_daytime",
    "service.bind": "service_bind",
    "service.reload_token": "service_reload_token",
}

_KEY_MAP = {f.name: f for f in fields(PipelineConfig)}


def _coerce(field_obj, raw: str):
    kind = field_obj.type
    name = kind if isinstance(kind, str) else getattr(kind, "__name__", str(kind))
    if name == "Path":
        return Path(raw)
    if name == "int":
        return int(raw)
    if name == "float":
        return float(raw)
    if name == "bool":
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return raw


def load_config(path=None, overrides=None, env=None) -> PipelineConfig:
    """Build a config from a file (optional), env vars, then overrides."""
    values = {}
    base_dir = Path(".")
    if path is not None:
        base_dir = Path(path).resolve().parent
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'section.key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            field_name = FILE_KEYS.get(key)
            if field_name is None:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[field_name] = raw

    env = os.environ if env is None else env
    for file_key, field_name in FILE_KEYS.items():
        env_key = ENV_PREFIX + file_key.replace(".", "_").upper()
        if env_key in env:
            values[field_name] = env[env_key]

    for key, raw in (overrides or {}).items():
        values[key] = raw

    config = PipelineConfig()
    for key, raw in values.items():
        field_obj = _KEY_MAP.get(key)
        if field_obj is None:
            raise ConfigError(f"unknown config field {key!r}")
        value = _coerce(field_obj, raw) if isinstance(raw, str) else raw
        if isinstance(value, Path) and not value.is_absolute():
            value = base_dir / value
        setattr(config, key, value)
    return config
