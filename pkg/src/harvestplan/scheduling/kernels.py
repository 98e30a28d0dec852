"""Select the cell scheduling kernel at import.

The compiled extension is used when it was built; set
``HARVESTPLAN_PURE_PYTHON=1`` to force the pure-Python fallback.
"""
from __future__ import annotations

import os

from . import _kernel_py

schedule_cell_py = _kernel_py.schedule_cell

try:
    if os.environ.get("HARVESTPLAN_PURE_PYTHON"):
        raise ImportError("pure-Python kernel requested")
    from ._kernel import schedule_cell as schedule_cell_compiled
except ImportError:
    schedule_cell_compiled = None

schedule_cell = schedule_cell_compiled or schedule_cell_py
BACKEND = "compiled" if schedule_cell_compiled is not None else "python"
