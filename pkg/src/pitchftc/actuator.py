"""Per-blade pitch actuators with stuck-fault injection.

Each actuator tracks its reference through a second-order lag with a lead
zero and unit DC gain.  A stuck fault pins the measured output of one blade
at a fixed angle from the fault sample onward; the fault acts purely at the
output, so the internal healthy dynamics keep evolving and the healthy
trajectory is recovered exactly by removing the fault.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .numerics import StateSpaceModel, discretize_second_order

__all__ = [
    "ACTUATOR_OMEGA",
    "ACTUATOR_DAMPING",
    "FaultDescriptor",
    "apply_pas_fault",
    "ActuatorBank",
]

ACTUATOR_OMEGA = 6.28     # rad/s, actuator natural frequency
ACTUATOR_DAMPING = 0.7    # actuator damping ratio


@dataclass(frozen=True)
class FaultDescriptor:
    """One stuck pitch actuator: which blade, at what angle, from which sample."""

    blade: int            # 1, 2 or 3
    stuck_angle: float    # deg
    start_sample: int

    def __post_init__(self):
        if self.blade not in (1, 2, 3):
            raise ValueError("blade must be 1, 2 or 3")
        if self.start_sample < 0:
            raise ValueError("start_sample must be nonnegative")

    def active(self, k: int) -> bool:
        return k >= self.start_sample


def apply_pas_fault(u: np.ndarray, fault: FaultDescriptor | None, k: int) -> np.ndarray:
    """Replace the faulty blade's output by its stuck angle once the fault is active."""
    u = np.asarray(u, dtype=float).copy()
    if fault is not None and fault.active(k):
        u[fault.blade - 1] = fault.stuck_angle
    return u


class ActuatorBank:
    """Three identical pitch actuators plus at most one stuck fault."""

    def __init__(
        self,
        Ts: float,
        fault: FaultDescriptor | None = None,
        omega: float = ACTUATOR_OMEGA,
        damping: float = ACTUATOR_DAMPING,
    ):
        self.model: StateSpaceModel = discretize_second_order(omega, damping, Ts)
        num, den = signal.ss2tf(self.model.A, self.model.B, self.model.C, self.model.D)
        self._num = num[0]
        self._den = den
        self._zi_unit = signal.lfilter_zi(self._num, self._den)
        self.fault = fault
        self._zi = np.zeros((3, self._zi_unit.shape[0]))

    def init_steady(self, u0: float) -> None:
        """Start all actuators settled at a constant pitch angle."""
        self._zi = np.tile(self._zi_unit * u0, (3, 1))

    def get_state(self) -> np.ndarray:
        return self._zi.copy()

    def set_state(self, state: np.ndarray) -> None:
        self._zi = state.copy()

    def run_chunk(self, u_ref: np.ndarray, k_start: int) -> np.ndarray:
        """Advance all blades over u_ref[(n, 3)]; returns the physical pitch angles."""
        u_ref = np.asarray(u_ref, dtype=float)
        if u_ref.ndim != 2 or u_ref.shape[1] != 3:
            raise ValueError("u_ref must be (n, 3)")
        n = u_ref.shape[0]
        u = np.empty((n, 3))
        for blade in range(3):
            out, self._zi[blade] = signal.lfilter(
                self._num, self._den, u_ref[:, blade], zi=self._zi[blade]
            )
            u[:, blade] = out
        if self.fault is not None:
            k = k_start + np.arange(n)
            mask = k >= self.fault.start_sample
            u[mask, self.fault.blade - 1] = self.fault.stuck_angle
        return u

    def step(self, u_ref: np.ndarray, k: int) -> np.ndarray:
        return self.run_chunk(np.asarray(u_ref, dtype=float).reshape(1, 3), k)[0]
