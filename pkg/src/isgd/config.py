"""Flat ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored.  Lists are comma separated
(``seeds = 0,1,2``, ``hidden = 64,32``); a learning-rate schedule is a
comma-separated list of ``threshold:lr`` tiers, highest threshold first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

from .experiments import BENCHMARK
from .optim import OptimizerConfig, VARIANTS


def _ints(s):
    return tuple(int(x) for x in str(s).split(",") if x.strip())


def _schedule(s):
    tiers = []
    for part in str(s).split(","):
        if part.strip():
            th, lr = part.split(":")
            tiers.append((float(th), float(lr)))
    return tuple(tiers)


def _opt_float(s):
    return None if str(s).strip().lower() in ("", "none") else float(s)


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic"
    mnist_train_images: str = ""
    mnist_train_labels: str = ""
    mnist_test_images: str = ""
    mnist_test_labels: str = ""
    classes: int = BENCHMARK["classes"]
    per_class: int = BENCHMARK["per_class"]
    test_per_class: int = 200
    dim: int = BENCHMARK["dim"]
    spread: float = BENCHMARK["spread"]
    data_seed: int | None = None  # None: reuse each run's seed
    hidden: tuple[int, ...] = BENCHMARK["hidden"]
    activation: str = BENCHMARK["activation"]
    weight_decay: float = BENCHMARK["weight_decay"]
    batch_size: int = BENCHMARK["batch_size"]
    epochs: int = BENCHMARK["epochs"]
    seeds: tuple[int, ...] = (0,)
    workers: int = 1
    lr: float = BENCHMARK["lr"]
    lr_schedule: tuple[tuple[float, float], ...] = ()
    subproblem_lr: float | None = None
    momentum: float = 0.0
    variant: str = "plain"
    epsilon: float = BENCHMARK["epsilon"]
    stop: int = BENCHMARK["stop"]
    sigma_k: float = BENCHMARK["sigma_k"]
    eval_every: int = 200
    shuffle: bool = True
    out: str = "runs"
    # batch-dynamics scenario
    mode: str = "iid"
    dynamics_per_class: int = 200
    dynamics_batch: int = 100
    dynamics_epochs: int = 50

    _PARSERS = {
        "classes": int, "per_class": int, "test_per_class": int, "dim": int, "spread": float,
        "data_seed": lambda s: None if str(s).strip().lower() in ("", "none") else int(s),
        "hidden": _ints, "weight_decay": float, "batch_size": int, "epochs": int,
        "seeds": _ints, "workers": int, "lr": float, "lr_schedule": _schedule,
        "subproblem_lr": _opt_float, "momentum": float, "epsilon": float, "stop": int,
        "sigma_k": lambda s: math.inf if str(s).strip().lower() in ("inf", "infinity") else float(s),
        "eval_every": int, "shuffle": _bool, "dynamics_per_class": int, "dynamics_batch": int,
        "dynamics_epochs": int,
    }

    def set(self, key: str, value) -> None:
        names = {f.name for f in fields(self)}
        if key not in names:
            raise ValueError(f"unknown config key {key!r}")
        parse = self._PARSERS.get(key, str)
        setattr(self, key, parse(value) if isinstance(value, str) else value)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        cfg = cls()
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                cfg.set(key, value)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
        return cfg

    def validate(self) -> None:
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.dataset not in ("synthetic", "mnist"):
            raise ValueError("dataset must be 'synthetic' or 'mnist'")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.mode not in ("single", "iid"):
            raise ValueError("mode must be 'single' or 'iid'")
        self.optimizer()

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            base_lr=self.lr, subproblem_lr=self.subproblem_lr, momentum=self.momentum,
            epsilon=self.epsilon, stop=self.stop, sigma_k=self.sigma_k, variant=self.variant,
            lr_schedule=self.lr_schedule)

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "lr_schedule":
                v = ",".join(f"{a}:{b}" for a, b in v)
            elif isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"
