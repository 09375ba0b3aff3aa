"""Adaptive repetitive control on top of periodic-difference identification.

The rotor turns at fixed speed, so the dominant blade-load disturbance
repeats every P samples.  Differencing all signals across one period removes
it exactly, and what remains is an ordinary linear regression from windows
of differenced pitch and load onto the next differenced load: its
coefficient row holds the impulse-response (Markov) terms of each blade's
pitch-to-load channel.  Stacking those terms over one rotor period and
projecting onto a sine/cosine pair at the rotor frequency yields a tiny
six-state model per blade whose input is the per-period change of the
control waveform coefficients, and a discrete LQR on that model drives the
periodic load content to zero.

Per-blade decoupling runs through the whole pipeline: three independent
regressions per sample and three independent six-state designs per period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .numerics import DareError, RlsEstimator, pseudo_inverse, solve_dare

__all__ = [
    "build_basis",
    "DeltaBuffers",
    "build_regressor_block",
    "MarkovIdentifier",
    "build_lifted",
    "update_gain",
    "GainResult",
    "RepetitiveLaw",
    "generate_prbs",
]


def build_basis(period_samples: int) -> np.ndarray:
    """Quadrature basis at the rotor frequency: columns sin and cos, P rows.

    The columns are orthogonal with squared norm P/2, so the projection of a
    period of samples onto the basis is (2/P) * basis.T @ samples.
    """
    if period_samples < 4:
        raise ValueError("need at least 4 samples per period")
    k = np.arange(period_samples)
    angle = 2.0 * np.pi * k / period_samples
    return np.column_stack([np.sin(angle), np.cos(angle)])


class DeltaBuffers:
    """Per-sample ring buffers producing period-differenced regressors.

    Holds the last P + p + 1 samples of pitch and load per blade.  Once warm,
    every new sample k yields, per blade, the stacked regressor
    [du(k-p) ... du(k-1), dy(k-p) ... dy(k-1)] and the target dy(k), where
    d is the difference across one rotor period.
    """

    def __init__(self, period_samples: int, past_window: int):
        if past_window < 1:
            raise ValueError("past_window must be positive")
        self.P = int(period_samples)
        self.p = int(past_window)
        self._cap = self.P + self.p + 1
        self._u = np.zeros((self._cap, 3))
        self._y = np.zeros((self._cap, 3))
        self._count = 0

    @property
    def warm(self) -> bool:
        return self._count >= self._cap

    def update(self, u: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
        """Push one sample; returns (regressors (3, 2p), targets (3,)) when warm."""
        slot = self._count % self._cap
        self._u[slot] = u
        self._y[slot] = y
        self._count += 1
        if not self.warm:
            return None
        # unroll the ring into chronological order ending at the newest sample
        order = (np.arange(self._cap) + self._count) % self._cap
        u_seq = self._u[order]
        y_seq = self._y[order]
        du = u_seq[self.P :] - u_seq[: self.p + 1]
        dy = y_seq[self.P :] - y_seq[: self.p + 1]
        regressors = np.concatenate([du[:-1], dy[:-1]], axis=0).T.copy()
        return regressors, dy[-1].copy()


def build_regressor_block(
    u_series: np.ndarray,
    y_series: np.ndarray,
    lo: int,
    hi: int,
    period_samples: int,
    past_window: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized equivalent of stepping :class:`DeltaBuffers` over [lo, hi).

    Returns (regressors (n, 2p, 3), targets (n, 3)) for targets lo..hi-1.
    Requires lo >= period_samples + past_window.
    """
    P, p = period_samples, past_window
    if lo < P + p:
        raise ValueError("window start precedes buffer warm-up")
    if hi <= lo:
        return np.zeros((0, 2 * p, 3)), np.zeros((0, 3))
    du = u_series[lo - p : hi - 1] - u_series[lo - p - P : hi - 1 - P]
    dy = y_series[lo - p : hi - 1] - y_series[lo - p - P : hi - 1 - P]
    win_u = np.lib.stride_tricks.sliding_window_view(du, p, axis=0)
    win_y = np.lib.stride_tricks.sliding_window_view(dy, p, axis=0)
    regressors = np.concatenate([win_u, win_y], axis=2).transpose(0, 2, 1)
    targets = y_series[lo:hi] - y_series[lo - P : hi - P]
    return regressors, targets


class MarkovIdentifier:
    """Three decoupled recursive estimators of per-blade Markov rows.

    Each row has length 2p: pitch-channel terms first, load-channel terms
    second, both oldest-sample-first to match the regressor layout.  A blade
    can be frozen (after fault isolation) so the degenerate zero-information
    stream from a stuck actuator stops touching its estimate.
    """

    def __init__(self, past_window: int, forgetting: float = 0.99999, init_scale: float = 1e-4):
        self.p = int(past_window)
        self.forgetting = float(forgetting)
        self.estimators = [
            RlsEstimator(2 * self.p, forgetting=forgetting, init_scale=init_scale)
            for _ in range(3)
        ]
        self.frozen = np.zeros(3, dtype=bool)

    def update(self, regressors: np.ndarray, targets: np.ndarray) -> None:
        """Absorb one sample: regressors (3, 2p), targets (3,)."""
        for blade in range(3):
            if not self.frozen[blade]:
                self.estimators[blade].update(regressors[blade], targets[blade])

    def update_block(self, regressors: np.ndarray, targets: np.ndarray) -> None:
        """Absorb a chronological block: regressors (n, 2p, 3), targets (n, 3)."""
        for blade in range(3):
            if not self.frozen[blade]:
                self.estimators[blade].update_block(
                    np.ascontiguousarray(regressors[:, :, blade]), targets[:, blade]
                )

    def rows(self) -> np.ndarray:
        """Current Markov row estimates, shape (3, 2p)."""
        return np.vstack([est.estimate for est in self.estimators])

    def reseed(self, rows: np.ndarray, confidence: float = 1e-2) -> None:
        for blade in range(3):
            self.estimators[blade].reseed(rows[blade], confidence)

    @property
    def degenerate(self) -> bool:
        return any(est.degenerate for est in self.estimators)


def build_lifted(
    markov_row: np.ndarray,
    period_samples: int,
    past_window: int,
    basis: np.ndarray,
    basis_pinv: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Projected one-period-ahead model for a single blade.

    The state stacks [projected load; coefficient change; projected load
    change], each a sine/cosine pair, and the input is the next coefficient
    change.  The period-to-period maps are formed by shift-stacking the
    identified impulse-response terms over one period (entries whose exponent
    reaches the past window are zero by the finite-memory truncation) and
    compressing each map through the basis.
    """
    P, p = period_samples, past_window
    row = np.asarray(markov_row, dtype=float).reshape(-1)
    if row.shape[0] != 2 * p:
        raise ValueError("markov_row must have length 2 * past_window")
    if basis_pinv is None:
        basis_pinv = pseudo_inverse(basis)

    # impulse terms by ascending step count (row stores oldest-first)
    mu = row[:p][::-1]
    my = row[p:][::-1]
    mu_pad = np.concatenate([mu, np.zeros(P)])
    my_pad = np.concatenate([my, np.zeros(P)])

    # period-transition maps: row i holds terms with exponents i+p-1 .. i
    exponents = np.arange(P)[:, None] + (p - 1 - np.arange(p))[None, :]
    trans_u = mu_pad[exponents]
    trans_y = my_pad[exponents]
    tail = basis[P - p :, :]
    s_u = basis_pinv @ (trans_u @ tail)
    s_y = basis_pinv @ (trans_y @ tail)

    # within-period response: strictly causal convolution of the impulse terms
    conv = np.empty((P, 2))
    for j in range(2):
        full = np.convolve(basis[:, j], mu)
        conv[1:, j] = full[: P - 1]
    conv[0, :] = 0.0
    s_h = basis_pinv @ conv

    eye2 = np.eye(2)
    zero2 = np.zeros((2, 2))
    a_lift = np.block(
        [
            [eye2, s_u, s_y],
            [zero2, zero2, zero2],
            [zero2, s_u, s_y],
        ]
    )
    b_lift = np.vstack([s_h, eye2, s_h])
    return a_lift, b_lift


def _stabilizable(A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> bool:
    eigvals = np.linalg.eigvals(A)
    n = A.shape[0]
    scale = max(1.0, np.abs(A).max(), np.abs(B).max())
    for lam in eigvals:
        if np.abs(lam) >= 1.0 - 1e-9:
            pencil = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
            smin = np.linalg.svd(pencil, compute_uv=False)[-1]
            if smin < tol * scale:
                return False
    return True


@dataclass
class GainResult:
    gain: np.ndarray
    riccati: np.ndarray | None
    ok: bool


def update_gain(
    a_lift: np.ndarray,
    b_lift: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    previous: GainResult | None = None,
    tol: float = 1e-9,
    max_iter: int = 5000,
) -> GainResult:
    """LQR gain for the lifted model, falling back to the previous gain.

    An early identification state can make the projected-load integrator
    uncontrollable (no pitch authority identified yet); the Riccati solve
    then has no stabilizing solution and the last usable gain is kept.
    """
    warm = previous.riccati if previous is not None else None
    try:
        if not _stabilizable(a_lift, b_lift):
            raise DareError("lifted pair is not stabilizable")
        riccati, gain = solve_dare(a_lift, b_lift, Q, R, tol=tol, max_iter=max_iter, initial=warm)
        return GainResult(gain, riccati, True)
    except DareError:
        if previous is not None:
            return GainResult(previous.gain, None, False)
        return GainResult(np.zeros((b_lift.shape[1], a_lift.shape[0])), None, False)


class RepetitiveLaw:
    """Per-blade periodic control waveform with once-per-period adaptation.

    The waveform is basis @ coeffs per blade, exactly periodic while the
    coefficients hold.  At each period boundary the coefficients move along
    the LQR feedback direction, scaled by step_gain and anchored by
    hold_gain:

        coeffs_next = hold_gain * coeffs - step_gain * K @ [load_proj, dcoeffs, dload]
    """

    def __init__(
        self,
        basis: np.ndarray,
        hold_gain: float = 1.0,
        step_gain: float = 0.3,
        lqr_q: float = 1.0,
        lqr_r: float = 0.1,
    ):
        if not 0.0 <= hold_gain <= 1.0 or not 0.0 <= step_gain <= 1.0:
            raise ValueError("hold_gain and step_gain must lie in [0, 1]")
        self.basis = basis
        self.basis_pinv = pseudo_inverse(basis)
        self.P = basis.shape[0]
        self.hold_gain = float(hold_gain)
        self.step_gain = float(step_gain)
        self.Q = lqr_q * np.eye(6)
        self.R = lqr_r * np.eye(2)
        self.coeffs = np.zeros((3, 2))
        self.frozen = np.zeros(3, dtype=bool)
        self._dcoeffs = np.zeros((3, 2))
        self._load_proj_prev: np.ndarray | None = None
        self._gains = [GainResult(np.zeros((2, 6)), None, False) for _ in range(3)]
        self.gain_failures = 0

    def project(self, period_block: np.ndarray) -> np.ndarray:
        """Project one period of per-blade samples (P, 3) onto the basis -> (3, 2)."""
        return (self.basis_pinv @ period_block).T

    def output_slice(self, k_start: int, n: int) -> np.ndarray:
        """Control waveform samples k_start .. k_start+n-1, shape (n, 3)."""
        idx = (k_start + np.arange(n)) % self.P
        return self.basis[idx] @ self.coeffs.T

    def output_at(self, k: int) -> np.ndarray:
        return self.output_slice(k, 1)[0]

    def freeze_blade(self, blade: int) -> None:
        self.frozen[blade - 1] = True

    def set_coeffs(self, coeffs: np.ndarray) -> None:
        """Replace the waveform coefficients (warm start); change memory resets."""
        self.coeffs = np.asarray(coeffs, dtype=float).reshape(3, 2).copy()
        self._dcoeffs = np.zeros((3, 2))

    def period_update(self, load_proj: np.ndarray, markov_rows: np.ndarray, past_window: int) -> None:
        """One adaptation step from the just-completed period.

        load_proj is the measured per-blade load projection (3, 2) of that
        period; markov_rows (3, 2p) is the current identification state.
        """
        load_proj = np.asarray(load_proj, dtype=float).reshape(3, 2)
        if self._load_proj_prev is None:
            dload = np.zeros((3, 2))
        else:
            dload = load_proj - self._load_proj_prev

        new_coeffs = self.coeffs.copy()
        for blade in range(3):
            if self.frozen[blade]:
                continue
            a_lift, b_lift = build_lifted(
                markov_rows[blade], self.P, past_window, self.basis, self.basis_pinv
            )
            result = update_gain(a_lift, b_lift, self.Q, self.R, previous=self._gains[blade])
            if not result.ok:
                self.gain_failures += 1
            self._gains[blade] = result
            state = np.concatenate([load_proj[blade], self._dcoeffs[blade], dload[blade]])
            new_coeffs[blade] = (
                self.hold_gain * self.coeffs[blade] - self.step_gain * (result.gain @ state)
            )

        self._dcoeffs = new_coeffs - self.coeffs
        self.coeffs = new_coeffs
        self._load_proj_prev = load_proj


def generate_prbs(
    n: int,
    rng: np.random.Generator,
    amplitude: float = 3.0,
    hold_samples: int = 10,
    filter_tau: float = 0.08,
    Ts: float = 0.01,
) -> np.ndarray:
    """Filtered binary excitation, one independent channel per blade (n, 3).

    A random two-level sequence held for hold_samples is passed through a
    unit-DC first-order low-pass; the output magnitude therefore never
    exceeds the amplitude.  Zero amplitude yields an exact zero signal.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    if amplitude == 0.0:
        return np.zeros((n, 3))
    n_holds = -(-n // hold_samples)
    levels = rng.integers(0, 2, size=(n_holds, 3)) * 2.0 - 1.0
    binary = np.repeat(levels, hold_samples, axis=0)[:n]
    pole = float(np.exp(-Ts / filter_tau))
    out = signal.lfilter([1.0 - pole], [1.0, -pole], binary, axis=0)
    return amplitude * out
