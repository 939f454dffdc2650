from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class ArchConfig:
    layers: int = 2
    emb_dim: int = 64
    ffn_dim: int = 128
    heads: int = 2
    dropout: float = 0.1
    label_smoothing: float = 0.1
    max_positions: int = 256

    def __post_init__(self):
        if self.layers < 1 or self.emb_dim < 1 or self.ffn_dim < 1 or self.heads < 1:
            raise ValueError("layers, emb_dim, ffn_dim and heads must be positive")
        if self.emb_dim % self.heads:
            raise ValueError(f"emb_dim {self.emb_dim} not divisible by heads {self.heads}")
        if not 0.0 <= self.dropout < 1.0 or not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("dropout and label_smoothing must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown ArchConfig keys: {sorted(unknown)}")
        return cls(**d)


PRESETS: dict[str, ArchConfig] = {
    "base": ArchConfig(layers=5, emb_dim=512, ffn_dim=2048, heads=8, dropout=0.3,
                       label_smoothing=0.2, max_positions=1024),
    "large": ArchConfig(layers=6, emb_dim=1024, ffn_dim=4096, heads=16, dropout=0.1,
                        label_smoothing=0.2, max_positions=1024),
    "desk": ArchConfig(layers=2, emb_dim=64, ffn_dim=128, heads=2, dropout=0.1,
                       label_smoothing=0.1, max_positions=256),
    # one extra layer, standing in for the 5 -> 6 layer step of the upsample baseline
    "desk-large": ArchConfig(layers=3, emb_dim=64, ffn_dim=128, heads=2, dropout=0.1,
                             label_smoothing=0.1, max_positions=256),
}


def preset(name: str) -> ArchConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class TrainingRecipe:
    peak_lr: float = 2e-3
    init_lr: float = 1e-7
    warmup: int = 200
    betas: tuple[float, float] = (0.9, 0.98)
    max_epochs: int = 40
    patience: int = 5
    batch_tokens: int = 2048
    seed: int = 0
    clip_norm: float = 1.0
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.peak_lr <= 0 or self.init_lr < 0 or self.warmup < 1:
            raise ValueError("learning-rate settings must be positive")
        if self.patience < 1 or self.batch_tokens < 1:
            raise ValueError("patience and batch_tokens must be positive")
        if self.clip_norm < 0:
            raise ValueError("clip_norm must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingRecipe":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown TrainingRecipe keys: {sorted(unknown)}")
        d = dict(d)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return cls(**d)

    def replace(self, **kw) -> "TrainingRecipe":
        return TrainingRecipe.from_dict({**self.to_dict(), **kw})


# Settings for full-scale runs of the base preset.
FULL_SCALE_RECIPE = TrainingRecipe(peak_lr=3e-3, init_lr=1e-7, warmup=4000, betas=(0.9, 0.98),
                                   max_epochs=100, patience=5, batch_tokens=4096)
