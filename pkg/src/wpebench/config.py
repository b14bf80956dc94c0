"""Run configuration: defaults, overridden by a TOML file, overridden by command-line flags."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .losses import LossWeights
from .room import EARLY_BOUNDARY_MS
from .scoring import DcfParams
from .stft import StftConfig
from .wpe import WpeConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

JOBS_ENV = "WPEBENCH_JOBS"


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        jobs = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {raw!r}") from exc
    if jobs < 1:
        raise ConfigError(f"{JOBS_ENV} must be >= 1")
    return jobs


@dataclass(frozen=True)
class RunConfig:
    stft: StftConfig = field(default_factory=StftConfig.for_wpe)
    wpe: WpeConfig = field(default_factory=WpeConfig)
    pretrain: LossWeights = field(default_factory=LossWeights.pretrain)
    finetune: LossWeights = field(default_factory=LossWeights.finetune)
    dcf: DcfParams = field(default_factory=DcfParams)
    boundary_ms: float = EARLY_BOUNDARY_MS
    bit_depth: str = "float32"
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.boundary_ms <= 0:
            raise ConfigError("boundary_ms must be positive")
        if self.bit_depth not in ("float32", "pcm16"):
            raise ConfigError(f"bit_depth must be float32 or pcm16, got {self.bit_depth!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "stft": self.stft.to_dict(),
            "wpe": self.wpe.to_dict(),
            "loss": {"pretrain": self.pretrain.to_dict(), "finetune": self.finetune.to_dict()},
            "dcf": self.dcf.to_dict(),
            "run": {"boundary_ms": self.boundary_ms, "bit_depth": self.bit_depth, "seed": self.seed},
        }


def _build(cls, base, values: dict, section: str):
    known = {f.name for f in fields(cls)}
    extra = set(values) - known
    if extra:
        raise ConfigError(f"[{section}] has unknown keys: {', '.join(sorted(extra))}")
    try:
        return replace(base, **values)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def _read_toml(path) -> dict:
    try:
        with open(os.fspath(path), "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_run_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Layer a TOML file and then ``overrides`` (same nested layout, ``None`` values ignored) on the defaults."""
    layers = []
    if path is not None:
        layers.append(_read_toml(path))
    if overrides:
        layers.append(overrides)
    cfg = RunConfig()
    for layer in layers:
        unknown = set(layer) - {"stft", "wpe", "loss", "dcf", "run"}
        if unknown:
            raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
        clean = lambda d: {k: v for k, v in (d or {}).items() if v is not None}  # noqa: E731
        loss = layer.get("loss", {}) or {}
        cfg = replace(
            cfg,
            stft=_build(StftConfig, cfg.stft, clean(layer.get("stft")), "stft"),
            wpe=_build(WpeConfig, cfg.wpe, clean(layer.get("wpe")), "wpe"),
            pretrain=_build(LossWeights, cfg.pretrain, clean(loss.get("pretrain")), "loss.pretrain"),
            finetune=_build(LossWeights, cfg.finetune, clean(loss.get("finetune")), "loss.finetune"),
            dcf=_build(DcfParams, cfg.dcf, clean(layer.get("dcf")), "dcf"),
        )
        run = clean(layer.get("run"))
        bad = set(run) - {"boundary_ms", "bit_depth", "seed", "jobs"}
        if bad:
            raise ConfigError(f"[run] has unknown keys: {', '.join(sorted(bad))}")
        cfg = replace(cfg, **run)
    return cfg


def explicitly_set(path, overrides: dict | None, section: str, key: str) -> bool:
    """True when ``section.key`` was given in the TOML file or the overrides."""
    if overrides and (overrides.get(section) or {}).get(key) is not None:
        return True
    if path is None:
        return False
    data = _read_toml(path)
    return key in (data.get(section) or {})
