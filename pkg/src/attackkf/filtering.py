"""Attack-aware Kalman filter / RTS smoother and the textbook baselines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .gslr import GslrApproximation, ThetaParams, gslr_params
from .models import (
    DimensionError,
    GaussianBelief,
    LinearGaussianModel,
    SingularCovarianceError,
    symmetrize,
)

INNOVATION_SINGULAR_RTOL = 1e-10
SMOOTHER_JITTER = 1e-12


@dataclass(frozen=True)
class FilterStepRecord:
    prior: GaussianBelief
    posterior: GaussianBelief
    gslr: GslrApproximation
    innovation: np.ndarray
    skipped_update: bool = False


@dataclass(frozen=True)
class SmootherResult:
    smoothed: List[GaussianBelief]
    gains: List[np.ndarray]

    def means(self) -> np.ndarray:
        return np.array([b.mean for b in self.smoothed])

    def covs(self) -> np.ndarray:
        return np.array([b.cov for b in self.smoothed])


def predict(post: GaussianBelief, model: LinearGaussianModel) -> GaussianBelief:
    A = model.A
    if A.shape[1] != post.dim:
        raise DimensionError(f"A is {A.shape}, belief has dim {post.dim}")
    return GaussianBelief(A @ post.mean, symmetrize(A @ post.cov @ A.T + model.Q))


def _invertible(S: np.ndarray) -> bool:
    w = np.linalg.eigvalsh(S)
    return w[-1] > 0 and w[0] > INNOVATION_SINGULAR_RTOL * w[-1]


def update(prior: GaussianBelief, y, gslr: GslrApproximation, joseph: bool = False) -> Tuple[GaussianBelief, np.ndarray, bool]:
    """Condition ``prior`` on ``y`` through the affine surrogate.

    Returns ``(posterior, innovation, skipped)``.  When the innovation
    covariance is singular the channel carries no usable information and the
    prior is returned unchanged with ``skipped=True``.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    Hp, b, Om = gslr.H_plus, gslr.b_plus, gslr.Omega_tilde
    if Hp.shape[1] != prior.dim or y.size != Hp.shape[0]:
        raise DimensionError(
            f"surrogate H is {Hp.shape}, prior dim {prior.dim}, measurement length {y.size}"
        )
    x, P = prior.mean, prior.cov
    innov = y - Hp @ x - b
    S = symmetrize(Hp @ P @ Hp.T + Om)
    if not _invertible(S):
        return prior, innov, True
    PHt = P @ Hp.T
    K = cho_solve(cho_factor(S, lower=True), PHt.T).T
    mean = x + K @ innov
    if joseph:
        IKH = np.eye(prior.dim) - K @ Hp
        cov = IKH @ P @ IKH.T + K @ Om @ K.T
    else:
        cov = P - K @ S @ K.T
    return GaussianBelief(mean, symmetrize(cov)), innov, False


ThetaLike = Union[ThetaParams, Sequence[ThetaParams]]


def _theta_at(theta: ThetaLike, k: int) -> ThetaParams:
    return theta if isinstance(theta, ThetaParams) else theta[k]


def filter_pass(init: GaussianBelief, measurements, theta: ThetaLike, joseph: bool = False, exact: bool = True, singular: str = "raise") -> List[FilterStepRecord]:
    """Forward pass: predict, build the surrogate at the prediction, update.

    ``theta`` is either one parameter set for every step or one per step.
    ``singular="pinv"`` lets degenerate (e.g. noiseless) runs continue when a
    predicted covariance is singular instead of raising.
    """
    Y = np.atleast_2d(np.asarray(measurements, dtype=float))
    if len(Y) < 1:
        raise ValueError("need at least one measurement")
    records = []
    post = init
    for k, y in enumerate(Y):
        th = _theta_at(theta, k)
        prior = predict(post, th.model)
        try:
            g = gslr_params(prior, th, exact=exact, singular=singular)
        except SingularCovarianceError as e:
            raise SingularCovarianceError("predicted covariance is singular", step=k + 1) from e
        post, innov, skipped = update(prior, y, g, joseph=joseph)
        records.append(FilterStepRecord(prior, post, g, innov, skipped))
    return records


def _solve_gain(P_filt, A, P_pred, k, singular="raise"):
    """K_s = P_filt A^T P_pred^{-1}, via a Cholesky solve."""
    try:
        fac = cho_factor(P_pred, lower=True)
    except np.linalg.LinAlgError:
        n = P_pred.shape[0]
        jitter = SMOOTHER_JITTER * np.trace(P_pred) / n
        try:
            fac = cho_factor(P_pred + jitter * np.eye(n), lower=True)
        except np.linalg.LinAlgError as e:
            if singular == "pinv":
                return P_filt @ A.T @ np.linalg.pinv(P_pred, hermitian=True)
            raise SingularCovarianceError("predicted covariance is singular", step=k) from e
    return cho_solve(fac, A @ P_filt).T


def rts_backward(records: Sequence[FilterStepRecord], model: Union[LinearGaussianModel, Sequence[LinearGaussianModel]], singular: str = "raise") -> SmootherResult:
    """Rauch-Tung-Striebel backward pass over filter output.

    ``records[k].prior`` must be the one-step prediction made from
    ``records[k-1].posterior``.
    """
    if len(records) == 0:
        raise ValueError("records must be nonempty")
    T = len(records)
    smoothed = [None] * T
    gains = [None] * (T - 1)
    smoothed[-1] = records[-1].posterior
    for k in range(T - 2, -1, -1):
        A = (model if isinstance(model, LinearGaussianModel) else model[k + 1]).A
        filt = records[k].posterior
        pred = records[k + 1].prior
        Ks = _solve_gain(filt.cov, A, pred.cov, k + 2, singular)
        nxt = smoothed[k + 1]
        mean = filt.mean + Ks @ (nxt.mean - pred.mean)
        cov = filt.cov + Ks @ (nxt.cov - pred.cov) @ Ks.T
        smoothed[k] = GaussianBelief(mean, symmetrize(cov))
        gains[k] = Ks
    return SmootherResult(smoothed, gains)


def kalman_update(prior: GaussianBelief, y, H, R) -> Tuple[GaussianBelief, bool]:
    """Textbook Kalman measurement update with y = H x + N(0, R).

    Returns ``(posterior, skipped)``; a singular innovation covariance leaves
    the prior untouched, as in :func:`update`.
    """
    x, P = prior.mean, prior.cov
    S = symmetrize(H @ P @ H.T + R)
    if not _invertible(S):
        return prior, True
    K = np.linalg.solve(S, H @ P).T
    return GaussianBelief(x + K @ (y - H @ x), symmetrize(P - K @ S @ K.T)), False


def standard_kf(init: GaussianBelief, measurements, model: LinearGaussianModel) -> List[FilterStepRecord]:
    """Plain Kalman filter that takes every received vector at face value."""
    Y = np.atleast_2d(np.asarray(measurements, dtype=float))
    H, R = model.H, model.R
    surrogate = GslrApproximation(H, np.zeros(H.shape[0]), R)
    records = []
    post = init
    for y in Y:
        prior = predict(post, model)
        post, skipped = kalman_update(prior, y, H, R)
        records.append(FilterStepRecord(prior, post, surrogate, y - H @ prior.mean, skipped))
    return records


def standard_kf_rtss(init: GaussianBelief, measurements, model: LinearGaussianModel, singular: str = "raise") -> Tuple[List[FilterStepRecord], SmootherResult]:
    """Baseline: textbook KF that ignores the attack channel, then RTS."""
    records = standard_kf(init, measurements, model)
    return records, rts_backward(records, model, singular)


def proposed_kf_rtss(init: GaussianBelief, measurements, theta: ThetaLike, joseph: bool = False, exact: bool = True, singular: str = "raise") -> Tuple[List[FilterStepRecord], SmootherResult]:
    records = filter_pass(init, measurements, theta, joseph=joseph, exact=exact, singular=singular)
    model = theta.model if isinstance(theta, ThetaParams) else [t.model for t in theta]
    return records, rts_backward(records, model, singular)


def filtered_means(records: Sequence[FilterStepRecord]) -> np.ndarray:
    return np.array([r.posterior.mean for r in records])


def filtered_covs(records: Sequence[FilterStepRecord]) -> np.ndarray:
    return np.array([r.posterior.cov for r in records])
