"""Run configuration, seed derivation, and the run manifest.

Configuration lives in a flat key=value text file; command-line flags override
file values.  All stage randomness derives from the single top-level seed by
hashing the stage name and task identifiers (product id, replica index) into
per-task seeds, so stages are reproducible in isolation and insensitive to
scheduling order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import InputError


@dataclass
class WindowConfig:
    input_days: int = 15
    horizon_days: int = 7


@dataclass
class TcnConfig:
    kernel: int = 3
    dilations: list[int] = field(default_factory=lambda: [1, 2])
    channels: int = 16


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 64  # 0 = full batch


@dataclass
class BootstrapConfig:
    replicas: int = 100
    min_fraction: float = 0.7
    level: float = 0.95
    # Reduced-capacity base learner; full size is a config choice away.
    channels: int = 8
    dilations: list[int] = field(default_factory=lambda: [1])
    epochs: int = 30
    lr: float = 1e-2


@dataclass
class TopsisConfig:
    top_k: int = 32


@dataclass
class GaRunConfig:
    pop: int = 200
    gens: int = 500
    tournament: int = 3
    elitism: int = 1
    crossover_rate: float = 0.9
    mutation_prob: float = 0.1
    sigma_fraction: float = 0.1
    sigma_decay: float = 0.995


@dataclass
class SynthConfig:
    products: int = 61
    days: int = 730


@dataclass
class PathsConfig:
    costs: str = "costs.csv"
    sales: str = "sales.csv"
    forecast: str = "forecast.csv"
    intervals: str = "intervals.csv"
    intervals_daily: str = "intervals_daily.csv"
    demand: str = "demand.csv"
    ranking: str = "ranking.csv"
    plan: str = "plan.csv"
    ga_trace: str = "ga_trace.csv"
    boundaries: str = ""   # optional solar-term boundary override CSV


@dataclass
class RunConfig:
    seed: int = 42
    window: WindowConfig = field(default_factory=WindowConfig)
    tcn: TcnConfig = field(default_factory=TcnConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    topsis: TopsisConfig = field(default_factory=TopsisConfig)
    ga: GaRunConfig = field(default_factory=GaRunConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def validate(self) -> None:
        checks = [
            (self.window.input_days >= 1, "window.input_days must be >= 1"),
            # the model head and the weekly decision loop are built for a 7-day horizon
            (self.window.horizon_days == 7, "window.horizon_days must be 7"),
            (self.tcn.kernel >= 1, "tcn.kernel must be >= 1"),
            (self.tcn.channels >= 1, "tcn.channels must be >= 1"),
            (self.train.epochs >= 0, "train.epochs must be >= 0"),
            (self.train.batch_size >= 0, "train.batch_size must be >= 0 (0 = full batch)"),
            (self.bootstrap.replicas >= 1, "bootstrap.replicas must be >= 1"),
            (0.0 < self.bootstrap.min_fraction <= 1.0, "bootstrap.min_fraction must be in (0, 1]"),
            (0.0 < self.bootstrap.level < 1.0, "bootstrap.level must be in (0, 1)"),
            (self.topsis.top_k >= 1, "topsis.top_k must be >= 1"),
            (self.ga.pop >= 2, "ga.pop must be >= 2"),
            (self.ga.gens >= 1, "ga.gens must be >= 1"),
            (self.ga.tournament >= 1, "ga.tournament must be >= 1"),
            (0.0 <= self.ga.crossover_rate <= 1.0, "ga.crossover_rate must be in [0, 1]"),
            (0.0 <= self.ga.mutation_prob <= 1.0, "ga.mutation_prob must be in [0, 1]"),
            (self.ga.sigma_fraction >= 0.0, "ga.sigma_fraction must be >= 0"),
            (0.0 < self.ga.sigma_decay <= 1.0, "ga.sigma_decay must be in (0, 1]"),
            (self.synth.products >= 1, "synth.products must be >= 1"),
            (self.synth.days >= 30, "synth.days must be >= 30"),
        ]
        for ok, message in checks:
            if not ok:
                raise InputError(message)

    def flat_items(self) -> list[tuple[str, str]]:
        items: list[tuple[str, str]] = [("seed", str(self.seed))]
        for section_name in ("window", "tcn", "train", "bootstrap", "topsis", "ga", "synth", "paths"):
            section = getattr(self, section_name)
            for f in dataclasses.fields(section):
                value = getattr(section, f.name)
                if isinstance(value, list):
                    text = ",".join(str(v) for v in value)
                else:
                    text = str(value)
                items.append((f"{section_name}.{f.name}", text))
        return items


def _coerce(current, text: str, key: str):
    try:
        if isinstance(current, bool):
            return text.lower() in ("1", "true", "yes")
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, list):
            return [int(v) for v in text.split(",") if v != ""]
        return text
    except ValueError as exc:
        raise InputError(f"bad value for {key}: {text!r}") from exc


def apply_setting(config: RunConfig, key: str, text: str) -> None:
    """Set one flat key (e.g. 'ga.pop') on the config, coercing to its type."""
    if key == "seed":
        config.seed = _coerce(config.seed, text, key)
        return
    if "." not in key:
        raise InputError(f"unknown config key: {key}")
    section_name, field_name = key.split(".", 1)
    if not hasattr(config, section_name):
        raise InputError(f"unknown config section: {section_name}")
    section = getattr(config, section_name)
    if not hasattr(section, field_name):
        raise InputError(f"unknown config key: {key}")
    setattr(section, field_name, _coerce(getattr(section, field_name), text, key))


def load_config(path: str | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Defaults, then the key=value file, then 'key=value' override strings."""
    config = RunConfig()
    if path:
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise InputError(f"cannot read config file {path}: {exc}") from exc
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            apply_setting(config, key.strip(), value.strip())
    for item in overrides or []:
        if "=" not in item:
            raise InputError(f"override must be key=value, got {item!r}")
        key, _, value = item.partition("=")
        apply_setting(config, key.strip(), value.strip())
    config.validate()
    return config


def derive_seed(master: int, *parts) -> int:
    """Stable per-task seed from the master seed and task identifiers."""
    text = "|".join([str(master), *[str(p) for p in parts]])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Records the config, input digests, and per-stage outputs and timings."""

    def __init__(self, config: RunConfig, out_dir: Path):
        self.out_dir = out_dir
        self.data = {
            "tool_version": __version__,
            "config": dict(config.flat_items()),
            "inputs": {},
            "stages": {},
        }

    def note_input(self, name: str, path: str | Path) -> None:
        self.data["inputs"][name] = {"path": str(path), "sha256": file_digest(path)}

    def start_stage(self, name: str) -> float:
        return time.perf_counter()

    def end_stage(self, name: str, started: float, outputs: list[str], **extra) -> None:
        self.data["stages"][name] = {
            "outputs": outputs,
            "seconds": round(time.perf_counter() - started, 3),
            **extra,
        }

    def write(self) -> Path:
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
