"""Linear Gaussian state-space primitives and ground-truth simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np


class DimensionError(ValueError):
    pass


class ModelValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SingularCovarianceError(np.linalg.LinAlgError):
    """A covariance that must be inverted is (numerically) singular.

    ``step`` is the 1-based time index when known.
    """

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def psd_violation(P: np.ndarray, rel_tol: float = 1e-10) -> Optional[str]:
    """Return a message if ``P`` is not symmetric PSD within tolerance, else None."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        return f"not square (shape {P.shape})"
    if not np.all(np.isfinite(P)):
        return "contains non-finite entries"
    scale = max(np.max(np.abs(P)), 1e-300)
    if np.max(np.abs(P - P.T)) > 1e-12 * scale:
        return "not symmetric"
    w = np.linalg.eigvalsh(symmetrize(P))
    if w[0] < -rel_tol * max(abs(w[0]), abs(w[-1])):
        return f"not positive semidefinite (min eigenvalue {w[0]:.3g})"
    return None


def gaussian_factor(cov: np.ndarray) -> np.ndarray:
    """Square-root factor L with L @ L.T == cov.

    Cholesky when possible; eigendecomposition with clamped eigenvalues for
    singular PSD matrices (e.g. zero noise).
    """
    cov = symmetrize(np.asarray(cov, dtype=float))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(cov)
        return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def check(self) -> Optional[str]:
        return psd_violation(self.cov)


@dataclass(frozen=True)
class LinearGaussianModel:
    """x_k = A x_{k-1} + N(0, Q);  z_k = H x_k + N(0, R)."""

    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ("A", "H", "Q", "R"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2:
                arr = np.atleast_2d(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_z(self) -> int:
        return self.H.shape[0]


@dataclass
class ValidationResult:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_model(model: LinearGaussianModel, require_pd_R: bool = True) -> ValidationResult:
    """Check shapes and noise covariances; every violation is reported.

    Estimation needs R positive definite; simulation only needs it PSD, so
    noiseless scenarios pass with ``require_pd_R=False``.
    """
    out = []
    A, H, Q, R = model.A, model.H, model.Q, model.R
    if A.shape[0] != A.shape[1]:
        out.append(f"dimension mismatch: A must be square, got {A.shape}")
    n_x = A.shape[0]
    if H.shape[1] != n_x:
        out.append(f"dimension mismatch: H has {H.shape[1]} columns, A is {n_x}x{n_x}")
    if Q.shape != (n_x, n_x):
        out.append(f"dimension mismatch: Q is {Q.shape}, expected {(n_x, n_x)}")
    if R.shape != (H.shape[0], H.shape[0]):
        out.append(f"dimension mismatch: R is {R.shape}, expected {(H.shape[0],) * 2}")
    for name, M in (("A", A), ("H", H)):
        if not np.all(np.isfinite(M)):
            out.append(f"{name} contains non-finite entries")
    for name, M in (("Q", Q), ("R", R)):
        if M.ndim == 2 and M.shape[0] == M.shape[1]:
            msg = psd_violation(M)
            if msg:
                out.append(f"{name} {msg}")
    if require_pd_R and R.ndim == 2 and R.shape[0] == R.shape[1] and psd_violation(R) is None:
        w = np.linalg.eigvalsh(symmetrize(R))
        if w[0] <= 0:
            out.append("R not positive definite")
    return ValidationResult(out)


@dataclass(frozen=True)
class Trajectory:
    """States and clean measurements for k = 1..T, stacked row-wise."""

    states: np.ndarray
    clean_measurements: np.ndarray
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.states) != len(self.clean_measurements) or len(self.states) < 1:
            raise DimensionError("states and measurements must have equal length >= 1")

    def __len__(self):
        return len(self.states)


def simulate_trajectory(model, init, horizon, rng, measurement_rng=None) -> Trajectory:
    """Draw x_0 from ``init`` and roll the model forward ``horizon`` steps.

    Process noise (and x_0) come from ``rng``; measurement noise comes from
    ``measurement_rng`` when given, otherwise from ``rng`` as well.
    """
    res = validate_model(model, require_pd_R=False)
    if not res.ok:
        raise ModelValidationError(res.violations)
    if int(horizon) < 1:
        raise ValueError("horizon must be >= 1")
    if init.dim != model.n_x:
        raise DimensionError(f"initial belief has dim {init.dim}, model has n_x={model.n_x}")
    mrng = rng if measurement_rng is None else measurement_rng
    T = int(horizon)
    A, H = model.A, model.H
    Lq = gaussian_factor(model.Q)
    Lr = gaussian_factor(model.R)
    L0 = gaussian_factor(init.cov)

    x = init.mean + L0 @ rng.standard_normal(model.n_x)
    x0 = x.copy()
    states = np.empty((T, model.n_x))
    meas = np.empty((T, model.n_z))
    for k in range(T):
        x = A @ x + Lq @ rng.standard_normal(model.n_x)
        states[k] = x
        meas[k] = H @ x + Lr @ mrng.standard_normal(model.n_z)
    return Trajectory(states, meas, x0)
