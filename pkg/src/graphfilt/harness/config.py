"""Experiment configuration: a strict JSON schema.

Unknown keys are errors at every level; a typo that silently fell back to
a default would corrupt an experiment.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ConfigError

TASKS = ("sbm_source_localization", "edge_list_classification",
         "ratings_regression")
FAMILIES = ("gcnn", "edge_varying", "block_varying", "hybrid", "arma",
            "gat", "gcat", "ev_gat", "hybrid_gcat")


def _take(d, key, default=None, required=False):
    if required and key not in d:
        raise ConfigError(f"missing required key {key!r}")
    return d.pop(key, default)


def _no_extras(d, where):
    if d:
        raise ConfigError(f"unknown keys in {where}: {sorted(d)}")


@dataclass
class ArchitectureConfig:
    family: str = "gcnn"
    order: int = 3
    features: int = 16
    layers: int = 1
    n_poles: int = 1
    jacobi_order: int = 1
    n_selected: int = 5
    selection: str = "degree"
    selection_k: int = 3
    phi0_mode: str = "attention"
    weighted_softmax: bool = False
    tie_attention: bool = False
    nonlinearity: str = "relu"
    readout_mode: str = "flatten"
    bias: bool = True

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        cfg = cls(
            family=_take(d, "family", "gcnn"),
            order=int(_take(d, "order", 3)),
            features=int(_take(d, "features", 16)),
            layers=int(_take(d, "layers", 1)),
            n_poles=int(_take(d, "n_poles", 1)),
            jacobi_order=int(_take(d, "jacobi_order", 1)),
            n_selected=int(_take(d, "n_selected", 5)),
            selection=_take(d, "selection", "degree"),
            selection_k=int(_take(d, "selection_k", 3)),
            phi0_mode=_take(d, "phi0_mode", "attention"),
            weighted_softmax=bool(_take(d, "weighted_softmax", False)),
            tie_attention=bool(_take(d, "tie_attention", False)),
            nonlinearity=_take(d, "nonlinearity", "relu"),
            readout_mode=_take(d, "readout_mode", "flatten"),
            bias=bool(_take(d, "bias", True)),
        )
        _no_extras(d, "architecture")
        if cfg.family not in FAMILIES:
            raise ConfigError(f"unknown family {cfg.family!r}")
        if cfg.order < 0 or cfg.features < 1 or cfg.layers < 1:
            raise ConfigError("order must be >= 0; features, layers >= 1")
        return cfg


@dataclass
class TrainingConfig:
    epochs: int = 40
    batch_size: int = 100
    learning_rate: float = 1e-3

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        cfg = cls(
            epochs=int(_take(d, "epochs", 40)),
            batch_size=int(_take(d, "batch_size", 100)),
            learning_rate=float(_take(d, "learning_rate", 1e-3)),
        )
        _no_extras(d, "training")
        if cfg.epochs < 0 or cfg.batch_size < 1 or cfg.learning_rate <= 0:
            raise ConfigError("invalid training settings")
        return cfg


_DATASET_KEYS = {
    "sbm_source_localization": {
        "block_sizes": [10, 10, 10, 10, 10],
        "p_intra": 0.8,
        "p_inter": 0.2,
        "t_max": 50,
        "n_train": 10240,
        "n_val": 2560,
        "n_test": 2560,
    },
    "edge_list_classification": {
        "graph_path": None,
        "signals_path": None,
        "normalization": "max_eigenvalue",
        "train_fraction": 0.8,
        "val_fraction": 0.1,
    },
    "ratings_regression": {
        "ratings_path": None,
        "target_node": 0,
        "top_k": 40,
        "min_co_rated": 2,
        "smooth_l1_delta": 1.0,
        "train_fraction": 0.9,
        "val_fraction": 0.05,
    },
}


@dataclass
class ExperimentConfig:
    task: str = "sbm_source_localization"
    seed: int = 0
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    dataset: dict = field(default_factory=dict)
    timing: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        merged = dict(_DATASET_KEYS[self.task])
        extras = set(self.dataset) - set(merged)
        if extras:
            raise ConfigError(f"unknown keys in dataset: {sorted(extras)}")
        merged.update(self.dataset)
        self.dataset = merged
        for key in ("p_intra", "p_inter"):
            if key in self.dataset and not 0.0 <= self.dataset[key] <= 1.0:
                raise ConfigError(f"{key} must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        cfg = cls(
            task=_take(d, "task", required=True),
            seed=int(_take(d, "seed", 0)),
            architecture=ArchitectureConfig.from_dict(_take(d, "architecture", {})),
            training=TrainingConfig.from_dict(_take(d, "training", {})),
            dataset=dict(_take(d, "dataset", {})),
            timing=bool(_take(d, "timing", False)),
        )
        _no_extras(d, "config")
        return cfg

    @classmethod
    def from_json(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    def to_dict(self):
        return {
            "task": self.task,
            "seed": self.seed,
            "architecture": vars(self.architecture).copy(),
            "training": vars(self.training).copy(),
            "dataset": dict(self.dataset),
            "timing": self.timing,
        }
