"""A small four-variable system used by the demos, the CLI fixtures and the tests.

Two configuration options (``gpu_growth``, ``swap_mem``), one system event
(``resource_use``) and one latency measurement.  The swap size follows the
GPU growth setting up to a little low-entropy noise, and latency depends on
swap and resource pressure.
"""

from __future__ import annotations

import numpy as np

from .data_model import DType, ObservationTable, Schema, VariableKind, VariableMeta

GPU_GROWTH = (0.25, 0.5, 0.66, 0.75, 1.0)
SWAP_MEM = (1.0, 2.0, 3.0, 4.0)
RESOURCE_USE = (10.0, 20.0, 40.0, 60.0)


def running_example_schema() -> Schema:
    return Schema((
        VariableMeta("gpu_growth", VariableKind.CONFIG_OPTION, DType.CONTINUOUS, (0.0, 1.0)),
        VariableMeta("swap_mem", VariableKind.CONFIG_OPTION, DType.ORDINAL, SWAP_MEM),
        VariableMeta("resource_use", VariableKind.SYSTEM_EVENT, DType.ORDINAL, RESOURCE_USE),
        VariableMeta("latency", VariableKind.NFP, DType.CONTINUOUS, (0.0, 10.0)),
    ))


def running_example(n: int = 2000, seed: int = 0) -> ObservationTable:
    """Observational samples of the four-variable system."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    g = rng.integers(len(GPU_GROWTH), size=n)
    # swap index rises with GPU growth; an occasional one-step slip
    slip = rng.choice([-1, 0, 1], size=n, p=[0.04, 0.92, 0.04])
    s = np.clip(np.minimum(g, 3) + slip, 0, 3)
    r = rng.integers(len(RESOURCE_USE), size=n)
    swap = np.asarray(SWAP_MEM)[s]
    res = np.asarray(RESOURCE_USE)[r]
    latency = np.clip(1.0 + 0.5 * s + 2.0 * r + rng.normal(0.0, 0.1, size=n), 0.0, 10.0)
    gpu = np.asarray(GPU_GROWTH)[g]
    data = np.column_stack([gpu, swap, res, latency])
    return ObservationTable.from_rows(running_example_schema(), data.tolist())
