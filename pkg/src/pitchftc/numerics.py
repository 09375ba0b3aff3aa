"""Numerical kernels shared by the control and diagnosis stack.

Everything here is plain linear algebra with no knowledge of turbines:

- square-root recursive least squares (QR form, exponential forgetting),
- a fixed-point solver for the discrete algebraic Riccati equation,
- Moore-Penrose pseudo-inverse for full-column-rank matrices,
- zero-order-hold discretization of a second-order lag with a lead zero,
- averaged-periodogram power spectral density estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy import signal

__all__ = [
    "StateSpaceModel",
    "RlsEstimator",
    "DareError",
    "solve_dare",
    "pseudo_inverse",
    "discretize_second_order",
    "psd_estimate",
]


@dataclass
class StateSpaceModel:
    """Discrete-time LTI model x+ = A x + B u, y = C x + D u sampled at Ts."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Ts: float

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.B.shape[0] != n:
            raise ValueError("B row count must match A")
        if self.C.shape[1] != n:
            raise ValueError("C column count must match A")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValueError("D shape must be (outputs, inputs)")
        if self.Ts <= 0:
            raise ValueError("Ts must be positive")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def dc_gain(self) -> np.ndarray:
        return self.C @ np.linalg.solve(np.eye(self.n_states) - self.A, self.B) + self.D


class RlsEstimator:
    """Recursive least squares kept in square-root (QR) form.

    The normal-equation information matrix is never formed.  The state is an
    upper-triangular factor ``R`` and transformed right-hand side ``z`` such
    that the current estimate ``w`` solves ``R w = z``.  Absorbing data scales
    the prior by sqrt(forgetting) per sample and re-triangularizes the stacked
    system with one orthogonal factorization, which is numerically equivalent
    to the classic Givens-rotation update sequence.

    The factor is initialized to ``init_scale * I`` so the first solves are
    well posed without meaningfully biasing long-run estimates.
    """

    #: relative diagonal collapse below which the factor is flagged degenerate
    DEGENERATE_RTOL = 1e-12

    def __init__(self, dim: int, forgetting: float = 1.0, init_scale: float = 1e-4):
        if dim <= 0:
            raise ValueError("dim must be positive")
        if not 0.0 < forgetting <= 1.0:
            raise ValueError("forgetting must be in (0, 1]")
        if init_scale <= 0:
            raise ValueError("init_scale must be positive")
        self.dim = int(dim)
        self.forgetting = float(forgetting)
        self.factor = init_scale * np.eye(self.dim)
        self.rhs = np.zeros(self.dim)
        self.degenerate = False
        self.n_updates = 0

    @property
    def estimate(self) -> np.ndarray:
        """Current least-squares solution (row vector of length dim)."""
        return sla.solve_triangular(self.factor, self.rhs, check_finite=False)

    def update(self, regressor: np.ndarray, observation: float) -> None:
        """Absorb a single (regressor, observation) pair."""
        regressor = np.asarray(regressor, dtype=float).reshape(-1)
        if regressor.shape[0] != self.dim:
            raise ValueError(f"regressor must have length {self.dim}")
        self.update_block(regressor[None, :], np.array([float(observation)]))

    def update_block(self, regressors: np.ndarray, observations: np.ndarray) -> None:
        """Absorb a block of rows in chronological order.

        Equivalent to calling :meth:`update` on each row in sequence: sample i
        of a block of length B carries weight forgetting**(B-1-i) and the
        prior is scaled by forgetting**B.
        """
        phi = np.asarray(regressors, dtype=float)
        y = np.asarray(observations, dtype=float).reshape(-1)
        if phi.ndim != 2 or phi.shape[1] != self.dim:
            raise ValueError(f"regressors must be (n, {self.dim})")
        if phi.shape[0] != y.shape[0]:
            raise ValueError("row count mismatch between regressors and observations")
        b = phi.shape[0]
        if b == 0:
            return

        lam = self.forgetting
        stacked = np.empty((self.dim + b, self.dim + 1))
        prior_scale = lam ** (0.5 * b)
        stacked[: self.dim, : self.dim] = prior_scale * self.factor
        stacked[: self.dim, self.dim] = prior_scale * self.rhs
        if lam < 1.0:
            w = lam ** (0.5 * (b - 1 - np.arange(b)))
            stacked[self.dim :, : self.dim] = w[:, None] * phi
            stacked[self.dim :, self.dim] = w * y
        else:
            stacked[self.dim :, : self.dim] = phi
            stacked[self.dim :, self.dim] = y

        r = sla.qr(stacked, mode="r", check_finite=False)[0]
        # One triangular factor per information matrix; fix signs so the
        # diagonal is positive and the factor is unique.
        diag = np.diagonal(r)[: self.dim]
        flip = np.where(diag < 0.0, -1.0, 1.0)
        self.factor = flip[:, None] * r[: self.dim, : self.dim]
        self.rhs = flip * r[: self.dim, self.dim]
        self.n_updates += b

        adiag = np.abs(np.diagonal(self.factor))
        if adiag.min() < self.DEGENERATE_RTOL * adiag.max():
            self.degenerate = True

    def reseed(self, estimate: np.ndarray, confidence: float = 1e-2) -> None:
        """Reset the factor around a given estimate with a chosen weight."""
        w = np.asarray(estimate, dtype=float).reshape(-1)
        if w.shape[0] != self.dim:
            raise ValueError(f"estimate must have length {self.dim}")
        self.factor = confidence * np.eye(self.dim)
        self.rhs = confidence * w
        self.degenerate = False


class DareError(RuntimeError):
    """Riccati iteration failed to converge or produced a non-stabilizing gain."""


def _check_symmetric(M: np.ndarray, name: str, tol: float = 1e-10) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square")
    if np.max(np.abs(M - M.T)) > tol * max(1.0, np.max(np.abs(M))):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (M + M.T)


def solve_dare(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 10000,
    initial: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the discrete algebraic Riccati equation by fixed-point iteration.

    Returns (P, K) with K = (R + B'PB)^-1 B'PA, where P satisfies the Riccati
    fixed point to a Frobenius residual below ``tol`` and A - BK has spectral
    radius below one.  ``initial`` warm-starts the iteration (defaults to Q,
    i.e. a cold start from the one-step cost).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = _check_symmetric(Q, "Q")
    R = _check_symmetric(R, "R")
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n:
        raise ValueError("A must be n x n and B must have n rows")
    if np.any(sla.eigvalsh(Q) < -1e-10 * max(1.0, np.max(np.abs(Q)))):
        raise ValueError("Q must be positive semidefinite")
    try:
        sla.cholesky(R, lower=True)
    except sla.LinAlgError as exc:
        raise ValueError("R must be positive definite") from exc

    P = Q.copy() if initial is None else _check_symmetric(initial, "initial")
    residual = np.inf
    for _ in range(max_iter):
        BtP = B.T @ P
        G = R + BtP @ B
        K = np.linalg.solve(G, BtP @ A)
        P_next = Q + A.T @ P @ (A - B @ K)
        P_next = 0.5 * (P_next + P_next.T)
        residual = np.linalg.norm(P_next - P, "fro")
        P = P_next
        if residual < tol:
            break
    else:
        raise DareError(f"no convergence in {max_iter} iterations, residual {residual:.3e}")

    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)
    closed = A - B @ K
    rho = np.max(np.abs(np.linalg.eigvals(closed)))
    if rho >= 1.0:
        raise DareError(f"closed loop not stable, spectral radius {rho:.6f}")
    return P, K


def pseudo_inverse(M: np.ndarray, rank_rtol: float = 1e-10) -> np.ndarray:
    """Left pseudo-inverse of a full-column-rank matrix.

    Computed from the thin QR factorization, which equals (M'M)^-1 M' without
    squaring the condition number.  Rank-deficient input is rejected.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] < M.shape[1]:
        raise ValueError("need at least as many rows as columns")
    q, r = sla.qr(M, mode="economic", check_finite=False)
    diag = np.abs(np.diagonal(r))
    if diag.min() < rank_rtol * max(diag.max(), 1e-300):
        raise ValueError("matrix is rank deficient")
    return sla.solve_triangular(r, q.T, check_finite=False)


def discretize_second_order(omega: float, damping: float, Ts: float) -> StateSpaceModel:
    """Zero-order-hold discretization of (b s + 1) / (a^2 s^2 + b s + 1).

    ``a = 1/omega`` and ``b = 2 damping / omega``, so the poles sit at
    -damping*omega +- j omega sqrt(1 - damping^2) and the DC gain is one.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must be in (0, 1)")
    if Ts <= 0:
        raise ValueError("Ts must be positive")
    # controllable canonical form of (2*damping*omega s + omega^2) / (s^2 + 2*damping*omega s + omega^2)
    w2 = omega * omega
    two_bw = 2.0 * damping * omega
    Ac = np.array([[0.0, 1.0], [-w2, -two_bw]])
    Bc = np.array([[0.0], [1.0]])
    Cc = np.array([[w2, two_bw]])
    Dc = np.array([[0.0]])
    Ad, Bd, Cd, Dd, _ = signal.cont2discrete((Ac, Bc, Cc, Dc), Ts, method="zoh")
    return StateSpaceModel(Ad, Bd, Cd, Dd, Ts)


def psd_estimate(
    x: np.ndarray, fs: float, segment: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Averaged-periodogram PSD with cosine taper and 50% segment overlap.

    ``segment`` is the per-segment length in samples; by default an eighth of
    the record.  The record must cover at least two (overlapping) segments.
    The density scaling keeps Parseval consistency: integrating the returned
    PSD over frequency recovers the signal variance to within taper bias.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if segment is None:
        segment = max(x.shape[0] // 8, 16)
    segment = int(segment)
    if x.shape[0] < segment + segment // 2:
        raise ValueError("signal too short for the requested segment length")
    freqs, power = signal.welch(
        x,
        fs=fs,
        window="hann",
        nperseg=segment,
        noverlap=segment // 2,
        detrend="constant",
        scaling="density",
    )
    return freqs, power
