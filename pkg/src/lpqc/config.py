"""Experiment configuration: YAML in, fully-resolved dict out.

Defaults follow the reference experimental setup (Adam lr 0.001, batch 128,
entropy weight 0.01, gating MLP(d, 32^(1), E) with tanh) at desk scale
(500 epochs instead of 2000); every default is explicit in the resolved
config that lands in the run manifest.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import yaml


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Invalid or missing data file (CLI exit code 3)."""


_GENERATOR_FAMILIES = ("lpqc", "no-latent", "rd", "lmlp")
_TASKS = ("multicluster", "ensemble-file")


@dataclass
class ExperimentConfig:
    task: str = "multicluster"
    output_dir: str = "runs/experiment"
    seed: int = 0
    # layout
    n_data: int = 4
    m_anc: int = 2
    layers: int = 10
    # dataset
    dataset_count: int = 512
    angle_scale: float = 0.05
    dataset_path: str | None = None
    # generator
    family: str = "lpqc"
    experts: int = 1
    hidden_dim: int = 32
    hidden_layers: int = 2
    activation: str = "tanh"
    gating_hidden_dim: int = 32
    rd_modes: int = 1
    # prior
    prior_family: str = "gaussian"
    latent_dim: int = 4
    prior_modes: int = 1
    # optimizer
    lr: float = 0.001
    batch_size: int = 128
    epochs: int = 500
    entropy_weight: float = 0.01
    # evaluation / transport
    eval_stride: int = 1
    ot_method: str = "exact"
    sinkhorn_epsilon: float = 0.01

    def validate(self) -> None:
        checks = [
            (self.task in _TASKS, f"task must be one of {_TASKS}"),
            (self.family in _GENERATOR_FAMILIES,
             f"generator.family must be one of {_GENERATOR_FAMILIES}"),
            (self.n_data >= 1, "layout.n_data must be >= 1"),
            (self.m_anc >= 0, "layout.m_anc must be >= 0"),
            (self.layers >= 0, "layout.layers must be >= 0"),
            (self.seed >= 0, "seed must be >= 0"),
            (self.dataset_count >= 4, "dataset.count must be >= 4"),
            (self.experts >= 1, "generator.experts must be >= 1"),
            (self.prior_modes >= 1, "prior.modes must be >= 1"),
            (self.prior_family in ("gaussian", "uniform"),
             "prior.family must be gaussian or uniform"),
            (self.lr > 0, "optimizer.lr must be positive"),
            (self.batch_size >= 1, "optimizer.batch_size must be >= 1"),
            (self.epochs >= 1, "optimizer.epochs must be >= 1"),
            (self.entropy_weight >= 0, "optimizer.entropy_weight must be >= 0"),
            (self.eval_stride >= 1, "eval.stride must be >= 1"),
            (self.ot_method in ("exact", "sinkhorn"), "ot.method must be exact or sinkhorn"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if self.task == "ensemble-file" and not self.dataset_path:
            raise ConfigError("task ensemble-file requires dataset.path")
        if self.family == "rd" and self.layers % 2 != 0:
            raise ConfigError("generator.family rd requires an even layer count")

    def resolved(self) -> dict[str, Any]:
        """Nested dict with every effective value spelled out."""
        return {
            "task": self.task,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "layout": {"n_data": self.n_data, "m_anc": self.m_anc, "layers": self.layers},
            "dataset": {
                "count": self.dataset_count,
                "angle_scale": self.angle_scale,
                "path": self.dataset_path,
            },
            "generator": {
                "family": self.family,
                "experts": self.experts,
                "hidden_dim": self.hidden_dim,
                "hidden_layers": self.hidden_layers,
                "activation": self.activation,
                "gating_hidden_dim": self.gating_hidden_dim,
                "rd_modes": self.rd_modes,
            },
            "prior": {
                "family": self.prior_family,
                "dim": self.latent_dim,
                "modes": self.prior_modes,
            },
            "optimizer": {
                "lr": self.lr,
                "batch_size": self.batch_size,
                "epochs": self.epochs,
                "entropy_weight": self.entropy_weight,
            },
            "eval": {"stride": self.eval_stride},
            "ot": {"method": self.ot_method, "sinkhorn_epsilon": self.sinkhorn_epsilon},
        }


_SECTION_FIELDS = {
    ("layout", "n_data"): "n_data",
    ("layout", "m_anc"): "m_anc",
    ("layout", "layers"): "layers",
    ("dataset", "count"): "dataset_count",
    ("dataset", "angle_scale"): "angle_scale",
    ("dataset", "path"): "dataset_path",
    ("generator", "family"): "family",
    ("generator", "experts"): "experts",
    ("generator", "hidden_dim"): "hidden_dim",
    ("generator", "hidden_layers"): "hidden_layers",
    ("generator", "activation"): "activation",
    ("generator", "gating_hidden_dim"): "gating_hidden_dim",
    ("generator", "rd_modes"): "rd_modes",
    ("prior", "family"): "prior_family",
    ("prior", "dim"): "latent_dim",
    ("prior", "modes"): "prior_modes",
    ("optimizer", "lr"): "lr",
    ("optimizer", "batch_size"): "batch_size",
    ("optimizer", "epochs"): "epochs",
    ("optimizer", "entropy_weight"): "entropy_weight",
    ("eval", "stride"): "eval_stride",
    ("ot", "method"): "ot_method",
    ("ot", "sinkhorn_epsilon"): "sinkhorn_epsilon",
}
_TOP_FIELDS = ("task", "output_dir", "seed")


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    cfg = ExperimentConfig()
    seen: set[str] = set()
    for key, value in data.items():
        if key in _TOP_FIELDS:
            setattr(cfg, key, value)
            seen.add(key)
        elif isinstance(value, dict):
            for sub, subval in value.items():
                attr = _SECTION_FIELDS.get((key, sub))
                if attr is None:
                    raise ConfigError(f"unknown config field {key}.{sub}")
                setattr(cfg, attr, subval)
            seen.add(key)
        else:
            raise ConfigError(f"unknown config field {key}")
    try:
        cfg.validate()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data or {})
