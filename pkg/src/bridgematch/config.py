"""Experiment configuration files (JSON) and dataset preset strings."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from bridgematch.couplings import (
    CouplingSampler, cross_mixture, entropic_shift, gaussian_corr, independent,
)
from bridgematch.sampling import SamplerConfig
from bridgematch.training import ModelConfig, TrainConfig


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


DATASETS = ("cross_mixture", "entropic_shift", "gaussian_corr", "independent")
_PRESET_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")
_POSITIONAL = {
    "cross_mixture": ("component_std",),
    "entropic_shift": ("k",),
    "gaussian_corr": ("alpha", "sigma"),
    "independent": ("dim",),
}


def parse_dataset(spec) -> dict:
    """Normalise ``"gaussian_corr(0.95,1)"`` or a dict into ``{"name": ..., **params}``."""
    if isinstance(spec, dict):
        if "name" not in spec:
            raise ConfigError("dataset.name", "missing")
        out = dict(spec)
    elif isinstance(spec, str):
        m = _PRESET_RE.match(spec)
        if not m:
            raise ConfigError("dataset", f"cannot parse preset {spec!r}")
        name, args = m.group(1), m.group(2)
        out = {"name": name}
        if args and args.strip():
            values = [a.strip() for a in args.split(",")]
            names = _POSITIONAL.get(name, ())
            if len(values) > len(names):
                raise ConfigError("dataset", f"too many arguments for {name}")
            for key, raw in zip(names, values):
                try:
                    out[key] = float(raw)
                except ValueError as exc:
                    raise ConfigError(f"dataset.{key}", f"not a number: {raw!r}") from exc
    else:
        raise ConfigError("dataset", "must be a preset string or an object")
    if out["name"] not in DATASETS:
        raise ConfigError("dataset.name", f"unknown dataset {out['name']!r}; expected one of {DATASETS}")
    return out


def build_dataset(spec) -> CouplingSampler:
    spec = parse_dataset(spec)
    name = spec["name"]
    try:
        if name == "cross_mixture":
            ds = cross_mixture(float(spec.get("component_std", 0.2)))
        elif name == "entropic_shift":
            if "k" not in spec:
                raise ConfigError("dataset.k", "missing")
            ds = entropic_shift(float(spec["k"]), spec.get("centers"), float(spec.get("component_std", 0.3)))
        elif name == "gaussian_corr":
            if "alpha" not in spec:
                raise ConfigError("dataset.alpha", "missing")
            ds = gaussian_corr(float(spec["alpha"]), float(spec.get("sigma", 1.0)))
        else:
            ds = independent(dim=int(spec.get("dim", 2)))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("dataset", str(exc)) from exc
    direction = spec.get("direction", "forward")
    if direction == "reverse":
        ds = ds.reversed()
    elif direction != "forward":
        raise ConfigError("dataset.direction", f"expected 'forward' or 'reverse', got {direction!r}")
    return ds


@dataclass
class EvalConfig:
    n_paths: int = 10_000
    n_trajectories: int = 64


@dataclass
class Variant:
    label: str
    overrides: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    name: str
    dataset: dict
    train: TrainConfig
    model: ModelConfig
    sampler: SamplerConfig
    eval: EvalConfig
    seed: int = 0
    seeds: list[int] | None = None
    variants: list[Variant] = field(default_factory=list)
    out_dir: str | None = None
    gaussian: dict | None = None

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "seed": self.seed,
            "dataset": self.dataset,
            "model": asdict(self.model),
            "train": asdict(self.train),
            "sampler": asdict(self.sampler),
            "eval": asdict(self.eval),
        }
        if self.seeds is not None:
            doc["seeds"] = self.seeds
        if self.variants:
            doc["variants"] = [{"label": v.label, **v.overrides} for v in self.variants]
        if self.out_dir is not None:
            doc["out_dir"] = self.out_dir
        if self.gaussian is not None:
            doc["gaussian"] = self.gaussian
        return doc

    def resolved_variants(self) -> list[tuple[str, "ExperimentConfig"]]:
        """One fully merged config per variant (or the base config alone)."""
        if not self.variants:
            return [("default", self)]
        out = []
        for v in self.variants:
            doc = self.to_dict()
            doc.pop("variants")
            for section, values in v.overrides.items():
                if isinstance(values, dict) and isinstance(doc.get(section), dict):
                    doc[section] = {**doc[section], **values}
                else:
                    doc[section] = values
            out.append((v.label, from_dict(doc)))
        return out


def _section(doc: dict, key: str, cls, required: bool = True):
    if key not in doc:
        if required:
            raise ConfigError(key, "missing")
        return cls()
    raw = doc[key]
    if not isinstance(raw, dict):
        raise ConfigError(key, "must be an object")
    known = {f.name for f in fields(cls)}
    for name in raw:
        if name not in known:
            raise ConfigError(f"{key}.{name}", "unknown field")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from exc


def from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    if "name" not in doc:
        raise ConfigError("name", "missing")
    gaussian = doc.get("gaussian")
    if gaussian is not None and "dataset" not in doc:
        # closed-form experiments need no dataset or training section
        return ExperimentConfig(doc["name"], {}, TrainConfig(), ModelConfig(), SamplerConfig(),
                                EvalConfig(), int(doc.get("seed", 0)), out_dir=doc.get("out_dir"),
                                gaussian=gaussian)
    if "dataset" not in doc:
        raise ConfigError("dataset", "missing")
    dataset = parse_dataset(doc["dataset"])
    build_dataset(dataset)
    variants = []
    for i, v in enumerate(doc.get("variants", [])):
        if "label" not in v:
            raise ConfigError(f"variants[{i}].label", "missing")
        variants.append(Variant(v["label"], {k: val for k, val in v.items() if k != "label"}))
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    cfg = ExperimentConfig(
        name=str(doc["name"]),
        dataset=dataset,
        train=_section(doc, "train", TrainConfig),
        model=_section(doc, "model", ModelConfig, required=False),
        sampler=_section(doc, "sampler", SamplerConfig, required=False),
        eval=_section(doc, "eval", EvalConfig, required=False),
        seed=seed,
        seeds=doc.get("seeds"),
        variants=variants,
        out_dir=doc.get("out_dir"),
        gaussian=gaussian,
    )
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError("<file>", f"{path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return from_dict(doc)


PRESET_DIR = Path(__file__).parent / "presets"


def preset_path(name: str) -> Path:
    return PRESET_DIR / f"{name}.json"
