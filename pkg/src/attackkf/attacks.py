"""Adversarial measurement channel: DoS and additive/multiplicative FDI.

The received measurement is

    y = xi_b z + (1 - xi_b) xi_c (1 + xi_m (m - 1)) (z + xi_a a)

with independent Bernoulli indicators xi_* ~ Bern(alpha_*), a ~ N(mu_a, Sigma_a)
and a scalar gain m ~ N(mu_m, sigma_m^2).  A DoS step delivers the zero
vector; the receiver is not told that a drop happened.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .models import DimensionError, gaussian_factor, psd_violation


class AttackType(enum.Enum):
    NO_ATTACK = "NoAttack"
    ADDITIVE_FDIA = "AdditiveFDIA"
    MULTIPLICATIVE_FDIA = "MultiplicativeFDIA"
    SIMULTANEOUS_FDIA = "SimultaneousFDIA"
    DOS = "DoS"


@dataclass(frozen=True)
class AttackParams:
    alpha_a: float
    alpha_b: float
    alpha_c: float
    alpha_m: float
    mu_a: np.ndarray
    Sigma_a: np.ndarray
    mu_m: float
    sigma_m_sq: float

    def __post_init__(self):
        mu_a = np.array(self.mu_a, dtype=float).reshape(-1)
        Sigma_a = np.atleast_2d(np.array(self.Sigma_a, dtype=float))
        mu_a.setflags(write=False)
        Sigma_a.setflags(write=False)
        object.__setattr__(self, "mu_a", mu_a)
        object.__setattr__(self, "Sigma_a", Sigma_a)
        for name in ("alpha_a", "alpha_b", "alpha_c", "alpha_m", "mu_m", "sigma_m_sq"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def n_z(self) -> int:
        return self.mu_a.size

    @classmethod
    def no_attack(cls, n_z: int) -> "AttackParams":
        return cls(0.0, 1.0, 0.0, 0.0, np.zeros(n_z), np.zeros((n_z, n_z)), 1.0, 0.0)

    def violations(self) -> List[str]:
        out = []
        for name in ("alpha_a", "alpha_b", "alpha_c", "alpha_m"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                out.append(f"{name}={v} probability out of range [0, 1]")
        if self.Sigma_a.shape != (self.n_z, self.n_z):
            out.append(
                f"dimension mismatch: Sigma_a is {self.Sigma_a.shape}, mu_a has length {self.n_z}"
            )
        else:
            msg = psd_violation(self.Sigma_a)
            if msg:
                out.append(f"Sigma_a {msg}")
        if not (self.sigma_m_sq >= 0.0):
            out.append(f"sigma_m_sq={self.sigma_m_sq} must be nonnegative")
        if not np.isfinite(self.mu_m):
            out.append("mu_m must be finite")
        return out


@dataclass(frozen=True)
class AttackRealization:
    xi_a: int
    xi_b: int
    xi_c: int
    xi_m: int
    a: Optional[np.ndarray] = None
    m: Optional[float] = None

    def __post_init__(self):
        if (self.a is not None) != bool(self.xi_a):
            raise ValueError("additive bias present iff xi_a == 1")
        if (self.m is not None) != bool(self.xi_m):
            raise ValueError("multiplicative gain present iff xi_m == 1")


def mixing_coefficient(xi_b, xi_c, xi_m, m):
    """(1 - xi_b) xi_c (1 + xi_m (m - 1)); works elementwise on arrays."""
    return (1 - xi_b) * xi_c * (1 + xi_m * (m - 1))


def attacked_measurement(z, r: AttackRealization) -> np.ndarray:
    """Compact form of the attacked measurement."""
    z = np.asarray(z, dtype=float)
    a = r.a if r.xi_a else 0.0
    m = r.m if r.xi_m else 0.0
    return r.xi_b * z + mixing_coefficient(r.xi_b, r.xi_c, r.xi_m, m) * (z + r.xi_a * a)


def attacked_measurement_expanded(z, r: AttackRealization) -> np.ndarray:
    """Expanded form, with the multiplicative and pass-through branches written out."""
    z = np.asarray(z, dtype=float)
    a = r.a if r.xi_a else np.zeros_like(z)
    m = r.m if r.xi_m else 0.0
    biased = z + r.xi_a * a
    return r.xi_b * z + (1 - r.xi_b) * r.xi_c * (
        r.xi_m * m * biased + (1 - r.xi_m) * biased
    )


def sample_realization(params: AttackParams, rng, _chol=None) -> AttackRealization:
    # Fixed draw order: xi_b, xi_c, xi_m, xi_a, then m, then a.
    xi_b = int(rng.random() < params.alpha_b)
    xi_c = int(rng.random() < params.alpha_c)
    xi_m = int(rng.random() < params.alpha_m)
    xi_a = int(rng.random() < params.alpha_a)
    m = None
    a = None
    if xi_m:
        m = float(params.mu_m + np.sqrt(params.sigma_m_sq) * rng.standard_normal())
    if xi_a:
        L = gaussian_factor(params.Sigma_a) if _chol is None else _chol
        a = params.mu_a + L @ rng.standard_normal(params.n_z)
    return AttackRealization(xi_a, xi_b, xi_c, xi_m, a, m)


def sample_attack(z, params: AttackParams, rng, _chol=None) -> Tuple[np.ndarray, AttackRealization]:
    """Pass one clean measurement through the attack channel."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != params.n_z:
        raise DimensionError(f"measurement has length {z.size}, mu_a has length {params.n_z}")
    r = sample_realization(params, rng, _chol)
    return attacked_measurement(z, r), r


def classify_attack(r: AttackRealization) -> AttackType:
    if r.xi_b:
        return AttackType.NO_ATTACK
    if not r.xi_c:
        return AttackType.DOS
    if r.xi_a and r.xi_m:
        return AttackType.SIMULTANEOUS_FDIA
    if r.xi_a:
        return AttackType.ADDITIVE_FDIA
    if r.xi_m:
        return AttackType.MULTIPLICATIVE_FDIA
    return AttackType.NO_ATTACK


def attack_sequence(traj, params: AttackParams, rng) -> List[Tuple[np.ndarray, AttackRealization]]:
    """Apply the channel independently at every step of ``traj``."""
    Z = traj.clean_measurements if hasattr(traj, "clean_measurements") else np.asarray(traj)
    L = gaussian_factor(params.Sigma_a)
    return [sample_attack(z, params, rng, L) for z in Z]


def sample_attack_batch(Z, params: AttackParams, rng):
    """Vectorized channel for many measurements at once.

    Returns ``(Y, indicators)`` where ``indicators`` maps ``"xi_a"`` etc. to
    integer arrays.  The random stream is consumed block-wise, so results do
    not coincide with repeated :func:`sample_attack` calls on the same seed.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    N, n_z = Z.shape
    if n_z != params.n_z:
        raise DimensionError(f"measurement has length {n_z}, mu_a has length {params.n_z}")
    xi_b = (rng.random(N) < params.alpha_b).astype(np.int8)
    xi_c = (rng.random(N) < params.alpha_c).astype(np.int8)
    xi_m = (rng.random(N) < params.alpha_m).astype(np.int8)
    xi_a = (rng.random(N) < params.alpha_a).astype(np.int8)
    m = params.mu_m + np.sqrt(params.sigma_m_sq) * rng.standard_normal(N)
    a = params.mu_a + rng.standard_normal((N, n_z)) @ gaussian_factor(params.Sigma_a).T
    coef = mixing_coefficient(xi_b, xi_c, xi_m, m)
    Y = xi_b[:, None] * Z + coef[:, None] * (Z + xi_a[:, None] * a)
    return Y, {"xi_a": xi_a, "xi_b": xi_b, "xi_c": xi_c, "xi_m": xi_m, "m": m, "a": a}


def classify_batch(ind) -> np.ndarray:
    """Vectorized :func:`classify_attack`; returns an object array of AttackType."""
    xi_a, xi_b, xi_c, xi_m = (np.asarray(ind[k]).astype(bool) for k in ("xi_a", "xi_b", "xi_c", "xi_m"))
    out = np.full(xi_b.shape, AttackType.NO_ATTACK, dtype=object)
    fdi = ~xi_b & xi_c
    out[fdi & xi_a & ~xi_m] = AttackType.ADDITIVE_FDIA
    out[fdi & ~xi_a & xi_m] = AttackType.MULTIPLICATIVE_FDIA
    out[fdi & xi_a & xi_m] = AttackType.SIMULTANEOUS_FDIA
    out[~xi_b & ~xi_c] = AttackType.DOS
    return out
