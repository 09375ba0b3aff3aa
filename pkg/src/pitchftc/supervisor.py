"""Pre-tuned parameter bank and fault-time controller switching.

For every anticipated stuck-actuator scenario an offline run adapts the
repetitive controller with the fault present from the start and snapshots
the converged waveform coefficients and Markov rows.  When the online
diagnosis isolates that fault, the snapshot replaces the live controller
state in one sample, the stuck blade's adaptation freezes, and the healthy
blades carry on from an already-good operating point instead of re-learning
under the fault.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .fdi import FdDecision
from .plant import LoadCase
from .sprc import MarkovIdentifier, RepetitiveLaw

__all__ = [
    "BankEntry",
    "PretunedBank",
    "compose_pitch_command",
    "on_detection",
    "offline_tune",
]

log = logging.getLogger(__name__)

BANK_SCHEMA = "pitchftc-bank-v1"


@dataclass
class BankEntry:
    """Converged controller snapshot for one fault scenario."""

    fault_blade: int
    load_case: str
    coeffs: list            # (3, 2) waveform coefficients
    markov_rows: list       # (3, 2p) identification rows
    forgetting: float
    period_samples: int
    past_window: int
    config_hash: str
    converged_period: int
    seed: int

    def coeffs_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def markov_array(self) -> np.ndarray:
        return np.asarray(self.markov_rows, dtype=float)


class PretunedBank:
    """Map from fault blade index to its offline-learned snapshot."""

    def __init__(self, entries: dict[int, BankEntry] | None = None):
        self.entries: dict[int, BankEntry] = dict(entries or {})

    def add(self, entry: BankEntry) -> None:
        self.entries[entry.fault_blade] = entry

    def get(self, fault_blade: int) -> BankEntry | None:
        return self.entries.get(fault_blade)

    def save(self, path: str | Path) -> None:
        payload = {
            "schema": BANK_SCHEMA,
            "entries": {str(k): asdict(v) for k, v in sorted(self.entries.items())},
        }
        Path(path).write_text(json.dumps(payload, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "PretunedBank":
        payload = json.loads(Path(path).read_text())
        if payload.get("schema") != BANK_SCHEMA:
            raise ValueError(f"unrecognized bank schema in {path}")
        entries = {
            int(k): BankEntry(**v) for k, v in payload["entries"].items()
        }
        return cls(entries)


def compose_pitch_command(
    lc: LoadCase, sprc_out: np.ndarray, prbs: np.ndarray
) -> np.ndarray:
    """Pitch reference: collective setpoint plus control waveform plus excitation."""
    return lc.collective_setpoint + np.asarray(sprc_out, dtype=float) + np.asarray(prbs, dtype=float)


def on_detection(
    decision: FdDecision,
    bank: PretunedBank | None,
    identifier: MarkovIdentifier,
    law: RepetitiveLaw,
    reseed_confidence: float = 1e-2,
    expected_hash: str | None = None,
) -> bool:
    """Switch the controller to the pre-tuned state for the isolated fault.

    Returns True when the switch was applied.  A healthy decision is a no-op;
    a missing or incompatible bank entry leaves the controller running
    unswitched (degraded adaptive-only operation) with a logged warning, but
    the stuck blade is still frozen since isolation itself is trusted.
    """
    if decision.d_fd == 0:
        return False
    entry = bank.get(decision.d_fd) if bank is not None else None
    if entry is None:
        log.warning(
            "no pre-tuned entry for blade %d; continuing without warm start", decision.d_fd
        )
        law.freeze_blade(decision.d_fd)
        identifier.frozen[decision.d_fd - 1] = True
        return False
    if expected_hash is not None and entry.config_hash != expected_hash:
        log.warning(
            "bank entry for blade %d was tuned under a different configuration "
            "(%s != %s); continuing without warm start",
            decision.d_fd,
            entry.config_hash,
            expected_hash,
        )
        law.freeze_blade(decision.d_fd)
        identifier.frozen[decision.d_fd - 1] = True
        return False

    law.set_coeffs(entry.coeffs_array())
    identifier.reseed(entry.markov_array(), confidence=reseed_confidence)
    law.freeze_blade(decision.d_fd)
    identifier.frozen[decision.d_fd - 1] = True
    log.info("switched to pre-tuned parameters for blade %d at sample %s", decision.d_fd, decision.k_d)
    return True


def offline_tune(cfg, convergence_eps: float | None = None):
    """Run the fault-from-start adaptation and snapshot the converged state.

    Returns (entry, report).  Raises RuntimeError when the run ends without
    meeting the convergence criterion; the report inside the exception
    arguments carries the final coefficient increment for diagnosis.
    """
    from . import harness  # local import; harness orchestrates the run

    tune_cfg = harness.replace_config(cfg, mode="offline_tune")
    result = harness.run_simulation(tune_cfg)
    report = result.report
    if report.converged_period is None:
        raise RuntimeError(
            "offline tuning did not converge within "
            f"{tune_cfg.duration_s:.0f}s (final increment {report.final_coeff_increment:.3g})"
        )
    entry = BankEntry(
        fault_blade=tune_cfg.fault_blade,
        load_case=tune_cfg.load_case,
        coeffs=result.snapshot_coeffs.tolist(),
        markov_rows=result.snapshot_markov.tolist(),
        forgetting=tune_cfg.forgetting,
        period_samples=tune_cfg.period_samples,
        past_window=tune_cfg.past_window,
        config_hash=harness.dynamics_fingerprint(tune_cfg),
        converged_period=report.converged_period,
        seed=tune_cfg.seed,
    )
    return entry, report
