"""Synthetic uniform fruit maps."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .model import Fruit, FruitMap, write_fruit_map

GENERATOR = "numpy.random.PCG64"


@dataclass(frozen=True)
class ScenarioSpec:
    row_length: float = 50.0
    height: float = 2.0
    depth: float = 0.5
    density: float = 30.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("row_length", "height", "depth", "density"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def n_fruits(self) -> int:
        return int(math.floor(self.density * self.row_length * self.height + 0.5))


def generate_uniform(spec: ScenarioSpec) -> FruitMap:
    """Uniform fruits over the row segment; ids follow along-row order."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.n_fruits
    x = rng.random(n) * spec.row_length
    z = rng.random(n) * spec.height
    y = rng.random(n) * spec.depth
    order = np.lexsort((z, x))
    return FruitMap(tuple(Fruit(i, float(x[j]), float(y[j]), float(z[j])) for i, j in enumerate(order)))


def write_scenario(fm: FruitMap, spec: ScenarioSpec, path: str | Path) -> Path:
    """Write the fruit map plus a ``<name>.meta.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    write_fruit_map(fm, path)
    meta = path.with_name(path.stem + ".meta.json")
    meta.write_text(json.dumps({"spec": asdict(spec), "generator": GENERATOR, "n_fruits": len(fm)},
                               indent=1) + "\n", encoding="utf-8")
    return meta
