"""Hyperparameter bundles; defaults are the large tuned configuration for rig-scale data."""

from dataclasses import asdict, dataclass, fields

from .estimators import DenseRegressor, LstmRegressor


def _validate(cfg):
    counts = [f.name for f in fields(cfg) if f.name in ("layers", "nodes", "hidden_units", "batch_size", "epochs")]
    for name in counts:
        if getattr(cfg, name) < (0 if name == "epochs" else 1):
            raise ValueError(f"{name} must be >= 1")
    if not 0 <= cfg.dropout < 1:
        raise ValueError("dropout must lie in [0, 1)")
    if cfg.weight_decay < 0:
        raise ValueError("weight_decay must be >= 0")
    if cfg.learning_rate < 0:
        raise ValueError("learning_rate must be >= 0")


@dataclass(frozen=True)
class DenseConfig:
    layers: int = 3
    nodes: int = 250
    dropout: float = 0.005
    learning_rate: float = 0.007
    batch_size: int = 32
    epochs: int = 350
    seed: int = 0
    weight_decay: float = 0.0

    architecture = "dense"

    def __post_init__(self):
        _validate(self)

    def estimator(self, seed=None, verbose=0):
        return DenseRegressor(self.layers, self.nodes, self.dropout, self.learning_rate, self.batch_size,
                              self.epochs, self.seed if seed is None else seed, verbose, self.weight_decay)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LstmConfig:
    hidden_units: int = 200
    dropout: float = 0.005
    learning_rate: float = 1e-7
    batch_size: int = 4
    epochs: int = 200
    seed: int = 0
    weight_decay: float = 0.0

    architecture = "recurrent"

    def __post_init__(self):
        _validate(self)

    def estimator(self, seed=None, verbose=0):
        return LstmRegressor(self.hidden_units, self.dropout, self.learning_rate, self.batch_size,
                             self.epochs, self.seed if seed is None else seed, verbose, self.weight_decay)

    def to_dict(self):
        return asdict(self)


def config_from_dict(architecture, d):
    cls = DenseConfig if architecture == "dense" else LstmConfig
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown {architecture} hyperparameters: {sorted(unknown)}")
    return cls(**d)


# "full" holds the large tuned defaults; "desk" is a small, fast setting that
# still fits the synthetic data well and keeps a full comparison under minutes.
PRESETS = {
    "full": {"dense": DenseConfig(), "recurrent": LstmConfig()},
    "desk": {
        "dense": DenseConfig(layers=2, nodes=32, dropout=0.0, learning_rate=0.003, batch_size=64, epochs=60),
        "recurrent": LstmConfig(hidden_units=16, dropout=0.0, learning_rate=0.005, batch_size=8, epochs=30),
    },
}


def preset(name):
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
