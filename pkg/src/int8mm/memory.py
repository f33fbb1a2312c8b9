"""Memory footprint estimates for 16-bit vs int8-with-decomposition storage."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class MemoryEstimate:
    """Idealized linear-layer parameter footprints; bytes may be fractional."""

    parameter_count: int
    bytes_16bit: float
    bytes_8bit: float
    ratio: float


def estimate_memory(parameter_count: int, hidden_dim: int, outlier_dims: int) -> MemoryEstimate:
    """Footprint of parameters stored in int8 except for decomposed outlier columns.

    The fraction f = outlier_dims / hidden_dim of parameters stays in
    16-bit (2 bytes); the rest stores in 1 byte. With no outliers the
    ratio is exactly 2.0; it decreases monotonically to 1.0 as outliers
    cover the whole hidden dimension.
    """
    if parameter_count < 1 or hidden_dim < 1:
        raise ValueError("parameter_count and hidden_dim must be >= 1")
    if outlier_dims < 0 or outlier_dims > hidden_dim:
        raise ValueError(
            f"outlier_dims must lie in [0, {hidden_dim}], got {outlier_dims}"
        )
    f = outlier_dims / hidden_dim
    bytes_16 = 2.0 * parameter_count
    bytes_8 = 1.0 * parameter_count * (1.0 - f) + 2.0 * parameter_count * f
    return MemoryEstimate(parameter_count, bytes_16, bytes_8, bytes_16 / bytes_8)
