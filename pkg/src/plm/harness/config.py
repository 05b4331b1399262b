"""Experiment configuration as flat ``key=value`` text.

Grid axes use repeated ``grid.<name>=<value>`` lines; their order of first
appearance fixes the axis order. ``#`` starts a comment line.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

KINDS = ("phase_diagram", "ode_curve", "mle_vs_ode", "ld_check", "bridge_check", "cyclefind_demo",
         "posterior_oracle")


class ConfigError(ValueError):
    pass


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("PLM_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass
class ExperimentConfig:
    kind: str
    model: str = "unweighted"
    grid: dict = field(default_factory=dict)
    trials: int = 1
    seed: int = 0
    workers: int = field(default_factory=default_workers)
    out: str = "-"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            raise ConfigError("grid must be nonempty")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        self.grid = {k: [float(x) for x in v] for k, v in self.grid.items()}

    def points(self) -> list[tuple[tuple[str, float], ...]]:
        """Cartesian product of the grid, axes in declaration order."""
        keys = list(self.grid)
        return [tuple(zip(keys, vals)) for vals in itertools.product(*(self.grid[k] for k in keys))]

    def to_text(self) -> str:
        lines = [f"kind={self.kind}", f"model={self.model}", f"trials={self.trials}", f"seed={self.seed}",
                 f"workers={self.workers}", f"out={self.out}"]
        for k, vals in self.grid.items():
            lines += [f"grid.{k}={v!r}" for v in vals]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "ExperimentConfig":
        scalars: dict[str, str] = {}
        grid: dict[str, list[float]] = {}
        for num, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {num}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key.startswith("grid."):
                try:
                    grid.setdefault(key[5:], []).append(float(val))
                except ValueError:
                    raise ConfigError(f"line {num}: grid value {val!r} is not a number") from None
            elif key in ("kind", "model", "trials", "seed", "workers", "out"):
                if key in scalars:
                    raise ConfigError(f"line {num}: {key} given twice")
                scalars[key] = val
            else:
                raise ConfigError(f"line {num}: unknown key {key!r}")
        if "kind" not in scalars:
            raise ConfigError("missing kind")
        try:
            kw = {k: int(scalars[k]) for k in ("trials", "seed", "workers") if k in scalars}
        except ValueError as e:
            raise ConfigError(str(e)) from None
        return ExperimentConfig(kind=scalars["kind"], model=scalars.get("model", "unweighted"), grid=grid,
                                out=scalars.get("out", "-"), **kw)

    @staticmethod
    def load(path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return ExperimentConfig.from_text(fh.read())
