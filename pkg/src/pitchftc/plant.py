"""Turbine surrogate: three pitch angles in, three blade-root loads out.

Each blade sees a first-order pitch-to-load response with negative gain
(pitching further into the wind unloads the blade), a once-per-revolution
sinusoidal disturbance with the blades phased 120 degrees apart, and white
measurement-like noise on the load.  Rotor speed is held constant, so the
disturbance is exactly periodic in the sample index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

__all__ = [
    "LoadCase",
    "LOAD_CASES",
    "load_case_params",
    "periodic_disturbance",
    "Plant",
]

PITCH_MIN_DEG = -5.0
PITCH_MAX_DEG = 90.0


@dataclass(frozen=True)
class LoadCase:
    """Operating point: wind speed, disturbance level, pitch schedule, fault angle."""

    id: str
    u_hub: float                 # m/s, mean hub-height wind speed
    disturbance_amplitude: float  # kN*m, 1P blade load amplitude
    collective_setpoint: float   # deg, held collective pitch demand
    stuck_angle: float           # deg, angle the faulty actuator freezes at
    noise_std: float             # kN*m, aperiodic load noise (std)


# Disturbance amplitudes, collective setpoints and load noise are surrogate
# calibration values (monotone in wind speed); wind speeds and stuck angles
# define the fault scenarios.  LC1's stuck angle lies above the whole healthy
# command range, LC2's and LC3's lie inside it.
LOAD_CASES: dict[str, LoadCase] = {
    "LC1": LoadCase("LC1", 12.0, 80.0, 4.0, 20.0, 1.6),
    "LC2": LoadCase("LC2", 16.0, 400.0, 14.0, 0.0, 8.0),
    "LC3": LoadCase("LC3", 20.0, 450.0, 19.0, 10.0, 9.0),
}


def load_case_params(case_id: str) -> LoadCase:
    try:
        return LOAD_CASES[case_id]
    except KeyError:
        raise KeyError(f"unknown load case {case_id!r}, expected one of {sorted(LOAD_CASES)}")


def periodic_disturbance(azimuth: float, blade: int, lc: LoadCase) -> float:
    """1P load disturbance on one blade at a given rotor azimuth (radians)."""
    if blade not in (1, 2, 3):
        raise ValueError("blade must be 1, 2 or 3")
    return lc.disturbance_amplitude * np.sin(azimuth + 2.0 * np.pi * (blade - 1) / 3.0)


class Plant:
    """Stateful blade-load surrogate stepped at a fixed rate.

    The pitch-to-load path is a discrete first-order lag (zero-order hold of
    gain/(tau s + 1)) applied to the deviation of each blade's pitch from the
    collective setpoint.  Pitch outside the physical range is saturated and
    counted.  Noise is injected by the caller so that runs stay reproducible.
    """

    def __init__(
        self,
        lc: LoadCase,
        Ts: float,
        period_samples: int,
        load_gain: float = -30.0,
        load_tau: float = 0.5,
    ):
        if Ts <= 0 or period_samples < 4:
            raise ValueError("need Ts > 0 and at least 4 samples per period")
        self.lc = lc
        self.Ts = float(Ts)
        self.period_samples = int(period_samples)
        self.load_gain = float(load_gain)
        self.load_tau = float(load_tau)
        pole = float(np.exp(-Ts / load_tau))
        self._num = np.array([0.0, load_gain * (1.0 - pole)])
        self._den = np.array([1.0, -pole])
        # exactly periodic disturbance table, one rotor revolution
        k = np.arange(self.period_samples)
        phase = 2.0 * np.pi * np.arange(3) / 3.0
        self.disturbance_table = lc.disturbance_amplitude * np.sin(
            2.0 * np.pi * k[:, None] / self.period_samples + phase[None, :]
        )
        self.reset()

    def reset(self) -> None:
        self._zi = np.zeros((3, 1))
        self.saturation_count = 0

    def get_state(self) -> tuple[np.ndarray, int]:
        return self._zi.copy(), self.saturation_count

    def set_state(self, state: tuple[np.ndarray, int]) -> None:
        self._zi = state[0].copy()
        self.saturation_count = state[1]

    def azimuth(self, k: int) -> float:
        """Rotor azimuth in [0, 2pi) at sample k."""
        return 2.0 * np.pi * (k % self.period_samples) / self.period_samples

    def run_chunk(self, pitch: np.ndarray, k_start: int, noise: np.ndarray | None = None) -> np.ndarray:
        """Advance the plant over pitch[(n, 3)] starting at sample index k_start."""
        pitch = np.asarray(pitch, dtype=float)
        if pitch.ndim != 2 or pitch.shape[1] != 3:
            raise ValueError("pitch must be (n, 3)")
        n = pitch.shape[0]
        clipped = np.clip(pitch, PITCH_MIN_DEG, PITCH_MAX_DEG)
        self.saturation_count += int(np.count_nonzero(clipped != pitch))

        y = np.empty((n, 3))
        dev = clipped - self.lc.collective_setpoint
        for blade in range(3):
            out, self._zi[blade] = signal.lfilter(
                self._num, self._den, dev[:, blade], zi=self._zi[blade]
            )
            y[:, blade] = out
        idx = (k_start + np.arange(n)) % self.period_samples
        y += self.disturbance_table[idx]
        if noise is not None:
            y += noise
        return y

    def step(self, pitch: np.ndarray, k: int, noise: np.ndarray | None = None) -> np.ndarray:
        """Single-sample convenience wrapper around :meth:`run_chunk`."""
        pitch = np.asarray(pitch, dtype=float).reshape(1, 3)
        noise = None if noise is None else np.asarray(noise, dtype=float).reshape(1, 3)
        return self.run_chunk(pitch, k, noise)[0]
