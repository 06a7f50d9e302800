"""Run configuration: presets, canonical key-value text form and fingerprints.

The text form is one ``section.key = value`` line per field, sorted, which
is valid TOML and reads back to the same configuration.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

import tomli

from ..errors import ArgumentError
from ..generation.model import TEXT_MODES

# fields that never change results; excluded from fingerprints
NON_SEMANTIC = frozenset({"run.name", "run.log_every", "run.workers"})
WARP_SECTIONS = ("run", "data", "warp", "warp_net", "ablation.pyramid_deformable",
                 "ablation.flow_deformable")


@dataclass
class RunSection:
    name: str = "run"
    seed: int = 0
    height: int = 512
    width: int = 384
    log_every: int = 1
    workers: int = 1


@dataclass
class DataSection:
    batch_size: int = 4
    augmentation: bool = False
    clip_norm: float = 1.0


@dataclass
class WarpSection:
    lr: float = 5e-5
    beta1: float = 0.5
    beta2: float = 0.999
    epochs: int = 100
    decay_start: int = 50
    lambda_perceptual: float = 0.2
    lambda_smooth_first: float = 0.01
    lambda_smooth_second: float = 6.0
    # 0 means one full pass over the training records per epoch
    steps_per_epoch: int = 0


@dataclass
class WarpNetSection:
    channels: tuple = (16, 24, 32, 32, 32)
    cascade_depth: int = 5
    corr_radius: int = 4
    head_width: int = 32
    alpha: float = 1.0
    beta: float = 1.0


@dataclass
class MapperSection:
    steps: int = 150_000
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01


@dataclass
class DenoiserSection:
    steps: int = 150_000
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    dropout: float = 0.2
    timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    guidance_scale: float = 2.0


@dataclass
class ModelSection:
    d_text: int = 64
    max_text: int = 32
    visual_dim: int = 64
    visual_blocks: int = 2
    mapper_hidden: int = 128
    text_blocks: int = 2
    denoiser_base: int = 32
    time_dim: int = 64


@dataclass
class AblationSection:
    pyramid_deformable: bool = False
    flow_deformable: bool = True
    text_mode: str = "structured"
    use_flow_warp: bool = True
    use_semantics: bool = True

    @property
    def effective_text_mode(self):
        return self.text_mode if self.use_semantics else "none"


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    data: DataSection = field(default_factory=DataSection)
    warp: WarpSection = field(default_factory=WarpSection)
    warp_net: WarpNetSection = field(default_factory=WarpNetSection)
    mapper: MapperSection = field(default_factory=MapperSection)
    denoiser: DenoiserSection = field(default_factory=DenoiserSection)
    model: ModelSection = field(default_factory=ModelSection)
    ablation: AblationSection = field(default_factory=AblationSection)

    def __post_init__(self):
        self.validate()

    @property
    def size(self):
        return (self.run.height, self.run.width)

    def validate(self):
        for key, value in flatten(self).items():
            if isinstance(value, bool) or isinstance(value, str):
                continue
            values = value if isinstance(value, tuple) else (value,)
            if key in ("run.seed", "warp.steps_per_epoch", "denoiser.dropout"):
                ok = all(v >= 0 for v in values)
            else:
                ok = all(v > 0 for v in values)
            if not ok:
                raise ArgumentError(f"{key} must be positive, got {value!r}")
        if self.run.height % 8 or self.run.width % 8:
            raise ArgumentError("resolution must be divisible by 8")
        if not 0 <= self.denoiser.dropout <= 1:
            raise ArgumentError("denoiser.dropout must lie in [0, 1]")
        if self.warp.decay_start > self.warp.epochs:
            raise ArgumentError("warp.decay_start exceeds warp.epochs")
        if self.ablation.text_mode not in TEXT_MODES:
            raise ArgumentError(f"ablation.text_mode must be one of {TEXT_MODES}")
        if not 1 <= self.warp_net.cascade_depth <= len(self.warp_net.channels):
            raise ArgumentError("warp_net.cascade_depth exceeds the number of pyramid levels")
        return self

    def with_overrides(self, overrides):
        """Copy with ``{"section.key": value}`` overrides applied."""
        data = asdict(self)
        for key, value in overrides.items():
            section, _, name = key.partition(".")
            if section not in data or name not in data[section]:
                raise ArgumentError(f"unknown config key {key!r}")
            data[section][name] = value
        return from_dict(data)

    def to_text(self):
        return to_text(self)

    def fingerprint(self, sections=None):
        return fingerprint(self, sections)


def full_preset():
    """Full-scale hyperparameters, recorded for documentation."""
    return RunConfig()


def desk_preset():
    """CI-sized profile: small networks, short schedules, low resolution."""
    return RunConfig(
        run=RunSection(name="desk", height=64, width=48),
        data=DataSection(batch_size=4),
        warp=WarpSection(lr=3e-3, epochs=100, decay_start=50),
        warp_net=WarpNetSection(channels=(8, 16, 16, 16, 16), corr_radius=2, head_width=16),
        mapper=MapperSection(steps=20, lr=1e-3),
        denoiser=DenoiserSection(steps=200, lr=3e-3, timesteps=50, guidance_scale=1.5),
        model=ModelSection(d_text=32, visual_dim=32, visual_blocks=1, mapper_hidden=64, text_blocks=1,
                           denoiser_base=16, time_dim=32),
    )


PRESETS = {"full": full_preset, "desk": desk_preset}


def flatten(config):
    out = {}
    for sec in fields(config):
        section = getattr(config, sec.name)
        for f in fields(section):
            out[f"{sec.name}.{f.name}"] = getattr(section, f.name)
    return out


def _coerce(section_cls, name, value):
    default = next(f for f in fields(section_cls) if f.name == name).default
    if isinstance(default, tuple):
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ArgumentError(f"{section_cls.__name__}.{name} expects a boolean")
        return value
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if type(default) is not type(value):
        raise ArgumentError(f"{name} expects {type(default).__name__}, got {type(value).__name__}")
    return value


def from_dict(data, base=None):
    """Build a config from nested ``{section: {key: value}}``; missing keys come from ``base``."""
    base = base or RunConfig()
    sections = {}
    for sec in fields(RunConfig):
        current = getattr(base, sec.name)
        given = dict(data.get(sec.name, {}))
        known = {f.name for f in fields(current)}
        unknown = set(given) - known
        if unknown:
            raise ArgumentError(f"unknown keys in [{sec.name}]: {sorted(unknown)}")
        cls = type(current)
        sections[sec.name] = replace(current, **{k: _coerce(cls, k, v) for k, v in given.items()})
    unknown = set(data) - set(sections)
    if unknown:
        raise ArgumentError(f"unknown config sections: {sorted(unknown)}")
    return RunConfig(**sections)


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ArgumentError(f"cannot serialise {value!r}")


def to_text(config):
    """Canonical sorted ``section.key = value`` lines."""
    flat = flatten(config)
    return "".join(f"{k} = {_toml_value(flat[k])}\n" for k in sorted(flat))


def from_text(text, base=None):
    return from_dict(tomli.loads(text), base)


def load_config(path=None, preset="desk", overrides=None):
    """Preset, then file values, then ``key=value`` overrides."""
    if preset not in PRESETS:
        raise ArgumentError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    config = PRESETS[preset]()
    if path is not None:
        with open(path, "rb") as fh:
            config = from_dict(tomli.load(fh), config)
    if overrides:
        parsed = {}
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ArgumentError(f"override {item!r} is not key=value")
            parsed[key.strip()] = tomli.loads(f"v = {raw.strip()}")["v"]
        config = config.with_overrides(parsed)
    return config


def fingerprint(config, sections=None):
    """Stable short hash of the semantically meaningful fields.

    Args:
        sections: restrict to these section names or ``section.key`` names.
    """
    flat = {k: v for k, v in flatten(config).items() if k not in NON_SEMANTIC}
    if sections is not None:
        flat = {k: v for k, v in flat.items() if k in sections or k.split(".")[0] in sections}
    canon = json.dumps({k: list(v) if isinstance(v, tuple) else v for k, v in sorted(flat.items())},
                       sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def warp_fingerprint(config):
    """Fingerprint of the fields a warp checkpoint depends on."""
    return fingerprint(config, WARP_SECTIONS)
