from __future__ import annotations

import pytest

from harvestplan.model import Fruit, FruitMap, HarvesterConfig, with_geometry


def make_map(*rows: tuple[float, float, float]) -> FruitMap:
    """Fruits from (x, y, z) triples; ids follow argument order."""
    return FruitMap(tuple(Fruit(i, x, y, z) for i, (x, y, z) in enumerate(rows)))


def cfg_for(rows: int = 1, cells: int = 1, **kw) -> HarvesterConfig:
    from dataclasses import replace
    return replace(with_geometry(HarvesterConfig(), rows, cells), **kw)


@pytest.fixture
def reference_cfg() -> HarvesterConfig:
    return cfg_for(3, 4)
