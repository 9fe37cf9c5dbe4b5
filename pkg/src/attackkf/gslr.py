"""Affine-Gaussian surrogate of the attacked measurement.

Given a Gaussian prior on the state, the attacked measurement y is replaced by

    y ~= H_plus x + b_plus + N(0, Omega)

whose joint first and second moments with x match the true ones.  Those
moments have closed forms built from three scalar/matrix attack statistics,
exposed below as ``mixing_second_moment``, ``mixing_variance`` and
``additive_offset_cov``.

Notation used throughout: ``c = 1 + alpha_m (mu_m - 1)`` is the mean of the
multiplicative gain, and ``C = (1 - xi_b) xi_c (1 + xi_m (m - 1))`` is the
random mixing coefficient with ``E[C] = (1 - alpha_b) alpha_c c``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .attacks import AttackParams, sample_attack_batch
from .models import (
    DimensionError,
    GaussianBelief,
    LinearGaussianModel,
    SingularCovarianceError,
    gaussian_factor,
    symmetrize,
)

PRIOR_SINGULAR_RTOL = 1e-12
OMEGA_CLAMP_RTOL = 1e-9


@dataclass(frozen=True)
class ThetaParams:
    model: LinearGaussianModel
    attack: AttackParams


@dataclass(frozen=True)
class GslrApproximation:
    H_plus: np.ndarray
    b_plus: np.ndarray
    Omega_tilde: np.ndarray

    def __post_init__(self):
        for name in ("H_plus", "b_plus", "Omega_tilde"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


@dataclass(frozen=True)
class PredictedMeasurementMoments:
    y_hat: np.ndarray
    P_yy: np.ndarray
    P_yx: np.ndarray


def gain_mean(attack: AttackParams) -> float:
    """Mean multiplicative gain c = E[1 + xi_m (m - 1)]."""
    return 1.0 + attack.alpha_m * (attack.mu_m - 1.0)


def mixing_mean(attack: AttackParams) -> float:
    """E[C] = (1 - alpha_b) alpha_c c."""
    return (1.0 - attack.alpha_b) * attack.alpha_c * gain_mean(attack)


def mixing_second_moment(attack: AttackParams) -> float:
    """E[C^2]."""
    a = attack
    return (1.0 - a.alpha_b) * a.alpha_c * (
        (1.0 - a.alpha_m) + a.alpha_m * (a.sigma_m_sq + a.mu_m**2)
    )


def mixing_variance(attack: AttackParams) -> float:
    """E[(C - E[C])^2]."""
    a = attack
    p = (1.0 - a.alpha_b) * a.alpha_c
    second = (1.0 - a.alpha_m) + a.alpha_m * (a.mu_m**2 + a.sigma_m_sq)
    return p * (second - p * gain_mean(a) ** 2)


def additive_offset_cov(attack: AttackParams) -> np.ndarray:
    """Covariance of xi_a a, i.e. alpha_a Sigma_a + alpha_a (1 - alpha_a) mu_a mu_a^T."""
    a = attack
    return a.alpha_a * a.Sigma_a + a.alpha_a * (1.0 - a.alpha_a) * np.outer(a.mu_a, a.mu_a)


def mean_coefficient(attack: AttackParams) -> float:
    """Scalar multiplying H P in the cross-covariance: alpha_b + E[C]."""
    return attack.alpha_b + mixing_mean(attack)


def spread_coefficient(attack: AttackParams) -> float:
    """Scalar multiplying H P H^T in V_pr[E[y | x]], in expanded form."""
    ab = attack.alpha_b
    cbar = mixing_mean(attack)
    return ab**2 + 2.0 * ab * cbar + cbar**2


def _check_dims(prior: GaussianBelief, theta: ThetaParams):
    H = theta.model.H
    if H.shape[1] != prior.dim:
        raise DimensionError(f"H has {H.shape[1]} columns, prior has dim {prior.dim}")
    if theta.attack.n_z != H.shape[0]:
        raise DimensionError(f"mu_a has length {theta.attack.n_z}, H has {H.shape[0]} rows")


def predicted_mean(prior: GaussianBelief, theta: ThetaParams) -> np.ndarray:
    _check_dims(prior, theta)
    H, atk = theta.model.H, theta.attack
    Hx = H @ prior.mean
    return atk.alpha_b * Hx + mixing_mean(atk) * (Hx + atk.alpha_a * atk.mu_a)


def expected_conditional_cov(prior: GaussianBelief, theta: ThetaParams, exact: bool = True) -> np.ndarray:
    """E_pr[V[y | x]].

    With ``exact=False`` the coupling between xi_b and C (their product is
    identically zero, so E[(xi_b - alpha_b)(C - E[C])] = -alpha_b E[C]) is
    dropped, which treats them as uncorrelated.  That variant overstates the
    spread badly whenever the prior mean is far from the origin and is kept
    only for comparison.
    """
    _check_dims(prior, theta)
    H, R, atk = theta.model.H, theta.model.R, theta.attack
    ab, aa, mu_a = atk.alpha_b, atk.alpha_a, atk.mu_a
    u = H @ prior.mean
    # second moments of u = Hx and d = Hx + alpha_a mu_a under the prior
    Euu = H @ (prior.cov + np.outer(prior.mean, prior.mean)) @ H.T
    Eud = Euu + aa * np.outer(u, mu_a)
    Edd = Eud + aa * np.outer(mu_a, u) + aa**2 * np.outer(mu_a, mu_a)

    out = (
        (1.0 - ab) * ab * Euu
        + ab * R
        + mixing_second_moment(atk) * (additive_offset_cov(atk) + R)
        + mixing_variance(atk) * Edd
    )
    if exact:
        out = out - ab * mixing_mean(atk) * (Eud + Eud.T)
    return out


def predicted_cov(prior: GaussianBelief, theta: ThetaParams, exact: bool = True) -> np.ndarray:
    """P_yy = E_pr[V[y | x]] + V_pr[E[y | x]]."""
    H = theta.model.H
    spread = spread_coefficient(theta.attack) * (H @ prior.cov @ H.T)
    return symmetrize(expected_conditional_cov(prior, theta, exact=exact) + spread)


def predicted_cross_cov(prior: GaussianBelief, theta: ThetaParams) -> np.ndarray:
    _check_dims(prior, theta)
    return mean_coefficient(theta.attack) * (theta.model.H @ prior.cov)


def predicted_moments(prior: GaussianBelief, theta: ThetaParams, exact: bool = True) -> PredictedMeasurementMoments:
    return PredictedMeasurementMoments(
        predicted_mean(prior, theta),
        predicted_cov(prior, theta, exact=exact),
        predicted_cross_cov(prior, theta),
    )


def _factor_prior(P: np.ndarray):
    w = np.linalg.eigvalsh(P)
    if w[-1] <= 0 or w[0] <= PRIOR_SINGULAR_RTOL * w[-1]:
        raise SingularCovarianceError("prior covariance is singular")
    return cho_factor(P, lower=True)


def gslr_params(prior: GaussianBelief, theta: ThetaParams, exact: bool = True, singular: str = "raise") -> GslrApproximation:
    """Affine surrogate (H_plus, b_plus, Omega_tilde) for the attacked measurement.

    A singular prior covariance raises :class:`SingularCovarianceError` unless
    ``singular="pinv"``, in which case the regression uses the pseudo-inverse
    (the minimum-norm H_plus, zero along directions the prior pins exactly).
    """
    if singular not in ("raise", "pinv"):
        raise ValueError("singular must be 'raise' or 'pinv'")
    mom = predicted_moments(prior, theta, exact=exact)
    P = symmetrize(prior.cov)
    try:
        fac = _factor_prior(P)
    except SingularCovarianceError:
        if singular == "raise":
            raise
        H_plus = mom.P_yx @ np.linalg.pinv(P, rcond=PRIOR_SINGULAR_RTOL, hermitian=True)
    else:
        # H_plus = P_yx P^{-1}  <=>  P H_plus^T = P_yx^T
        H_plus = cho_solve(fac, mom.P_yx.T).T
    b_plus = mom.y_hat - H_plus @ prior.mean
    Omega = symmetrize(mom.P_yy - H_plus @ P @ H_plus.T)
    return GslrApproximation(H_plus, b_plus, _clamp_psd(Omega))


def _clamp_psd(M: np.ndarray) -> np.ndarray:
    if M.size == 0:
        return M
    w, V = np.linalg.eigh(M)
    scale = max(abs(w[0]), abs(w[-1]))
    if w[0] >= 0 or scale == 0.0:
        return M
    if w[0] < -OMEGA_CLAMP_RTOL * scale:
        raise np.linalg.LinAlgError(
            f"surrogate noise covariance is indefinite (min eigenvalue {w[0]:.3g})"
        )
    return symmetrize((V * np.clip(w, 0.0, None)) @ V.T)


class _MomentAccumulator:
    """Streaming mean/covariance of stacked [y, x] samples (Chan et al. merge)."""

    def __init__(self, dim):
        self.n = 0
        self.mean = np.zeros(dim)
        self.M2 = np.zeros((dim, dim))

    def add_block(self, S):
        nb = S.shape[0]
        mb = S.mean(axis=0)
        D = S - mb
        M2b = D.T @ D
        if self.n == 0:
            self.n, self.mean, self.M2 = nb, mb, M2b
            return
        n = self.n + nb
        delta = mb - self.mean
        self.M2 = self.M2 + M2b + np.outer(delta, delta) * (self.n * nb / n)
        self.mean = self.mean + delta * (nb / n)
        self.n = n

    def cov(self):
        # population normalisation: a single sample gives zero covariance
        return self.M2 / self.n


def mc_moment_oracle(prior: GaussianBelief, theta: ThetaParams, samples: int, rng, block_size: int = 1_000_000) -> PredictedMeasurementMoments:
    """Sampling estimate of (y_hat, P_yy, P_yx) for validating the closed forms.

    Draws x from the prior, z = H x + noise, then passes z through the attack
    channel.  Work is split into blocks, each with its own spawned stream.
    """
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    _check_dims(prior, theta)
    H, R = theta.model.H, theta.model.R
    n_x, n_z = H.shape[1], H.shape[0]
    L0 = gaussian_factor(prior.cov)
    Lr = gaussian_factor(R)
    n_blocks = -(-samples // block_size)
    streams = rng.spawn(n_blocks) if hasattr(rng, "spawn") else [rng] * n_blocks
    acc = _MomentAccumulator(n_z + n_x)
    left = samples
    for s in streams:
        nb = min(block_size, left)
        left -= nb
        X = prior.mean + s.standard_normal((nb, n_x)) @ L0.T
        Z = X @ H.T + s.standard_normal((nb, n_z)) @ Lr.T
        Y, _ = sample_attack_batch(Z, theta.attack, s)
        acc.add_block(np.hstack([Y, X]))
    C = acc.cov()
    return PredictedMeasurementMoments(acc.mean[:n_z].copy(), C[:n_z, :n_z].copy(), C[:n_z, n_z:].copy())
