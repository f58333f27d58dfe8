"""Engine configuration shared by the scenario loader and the consensus engine."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

AUTO = "auto"
INTEGRATORS = ("trapezoid", "euler")


@dataclass(frozen=True)
class EngineConfig:
    """Controller gains and stopping rules for a distributed run.

    ``k_i`` is either a positive float or ``"auto"``; in auto mode the
    integral gain is ``safety / phi_sum`` (see :mod:`consensus_ed.analysis`).

    ``consensus_tol`` bounds the spread (max - min) of the shared mismatch
    estimate after the neighbour-averaging rounds of one iteration. ``None``
    means ``tolerance / (10 * n_dg)``.
    """

    k_i: Union[float, str] = AUTO
    k_p: float = 0.0
    dx: float = 1.0
    tolerance: float = 1e-3
    max_iterations: int = 10000
    safety: float = 1.0
    integrator: str = "trapezoid"
    consensus_tol: Optional[float] = None
    max_consensus_rounds: int = 10_000_000

    def __post_init__(self):
        if isinstance(self.k_i, str):
            if self.k_i != AUTO:
                raise ValueError(f"k_i must be a positive number or 'auto', got {self.k_i!r}")
        elif not (math.isfinite(self.k_i) and self.k_i > 0):
            raise ValueError(f"k_i must be > 0, got {self.k_i}")
        if not math.isfinite(self.k_p):
            raise ValueError("k_p must be finite")
        if not self.dx > 0:
            raise ValueError(f"dx must be > 0, got {self.dx}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be an integer >= 1, got {self.max_iterations}")
        if not 0 < self.safety < 2:
            raise ValueError(f"safety must lie in (0, 2), got {self.safety}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.consensus_tol is not None and not self.consensus_tol > 0:
            raise ValueError("consensus_tol must be > 0")
        if self.max_consensus_rounds < 0:
            raise ValueError("max_consensus_rounds must be >= 0")

    @property
    def gain_mode(self) -> str:
        return AUTO if self.k_i == AUTO else "explicit"
