"""Coordinated-turn tracking scenario and the Monte Carlo RMSE harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from .attacks import AttackParams, attack_sequence
from .filtering import filter_pass, rts_backward, standard_kf
from .gslr import ThetaParams
from .models import GaussianBelief, LinearGaussianModel, psd_violation, simulate_trajectory

METHODS = ("ProposedKF", "ProposedRTSS", "StandardKF", "StandardRTSS")
TRANSIENT_S = 2.0


def build_ct_model(sample_time, turn_rate, Q, R) -> LinearGaussianModel:
    """Constant-turn-rate model; ``turn_rate`` in rad/s. Measures position only."""
    if turn_rate == 0:
        raise ValueError("turn rate must be nonzero")
    w, t = float(turn_rate), float(sample_time)
    s, c = math.sin(w * t), math.cos(w * t)
    A = np.array(
        [
            [1.0, 0.0, s / w, -(1.0 - c) / w],
            [0.0, 1.0, (1.0 - c) / w, s / w],
            [0.0, 0.0, c, -s],
            [0.0, 0.0, s, c],
        ]
    )
    H = np.hstack([np.eye(2), np.zeros((2, 2))])
    return LinearGaussianModel(A, H, Q, R)


@dataclass(frozen=True)
class CtScenario:
    """A tracking experiment: truth model, estimator prior and attack channel.

    ``turn_rate`` is in rad/s, or None when the model was given as raw matrices.
    ``init_true`` may have zero covariance for a deterministic start.
    """

    sample_time: float
    turn_rate: Optional[float]
    model: LinearGaussianModel
    init_true: GaussianBelief
    init_estimator: GaussianBelief
    horizon: int
    attack: AttackParams

    def __post_init__(self):
        if not self.sample_time > 0:
            raise ValueError("sample_time must be positive")
        if self.turn_rate is not None and self.turn_rate == 0:
            raise ValueError("turn rate must be nonzero")
        if int(self.horizon) < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def theta(self) -> ThetaParams:
        return ThetaParams(self.model, self.attack)

    @property
    def times(self) -> np.ndarray:
        return self.sample_time * np.arange(1, self.horizon + 1)


BENCHMARK_ATTACK = dict(
    alpha_a=0.3,
    alpha_b=0.7,
    alpha_c=0.9,
    alpha_m=0.1,
    mu_a=[0.7, 0.9],
    Sigma_a=[[1.0, 0.0], [0.0, 0.5]],
    mu_m=0.95,
    sigma_m_sq=0.10**2,
)


def default_scenario() -> CtScenario:
    t = 0.05
    omega = math.radians(3.0)
    Q = np.diag([0.3**2, 0.3**2, 0.05**2, 0.05**2])
    R = np.diag([12.0, 12.0])
    return CtScenario(
        sample_time=t,
        turn_rate=omega,
        model=build_ct_model(t, omega, Q, R),
        init_true=GaussianBelief([200.0, 200.0, 15.0, 15.0], np.zeros((4, 4))),
        init_estimator=GaussianBelief(
            [250.0, 150.0, 12.0, 17.0], np.diag([10.0**2, 10.0**2, 4.0**2, 4.0**2])
        ),
        horizon=round(20.0 / t),
        attack=AttackParams(**BENCHMARK_ATTACK),
    )


def run_streams(base_seed: int, run: int):
    """Independent (process, measurement, attack) generators for one MC run."""
    ss = np.random.SeedSequence(int(base_seed) + int(run))
    return tuple(np.random.default_rng(s) for s in ss.spawn(3))


def simulate_run(scenario: CtScenario, base_seed: int, run: int = 0):
    """Truth trajectory plus attacked measurements for one seeded run."""
    g_proc, g_meas, g_atk = run_streams(base_seed, run)
    traj = simulate_trajectory(scenario.model, scenario.init_true, scenario.horizon, g_proc, g_meas)
    attacked = attack_sequence(traj, scenario.attack, g_atk)
    Y = np.array([y for y, _ in attacked])
    return traj, Y, [r for _, r in attacked]


def rmse_from_errors(errors) -> np.ndarray:
    """Per-step RMSE from an error array of shape (runs, steps[, dim])."""
    E = np.asarray(errors, dtype=float)
    if E.size == 0 or E.ndim < 2:
        raise ValueError("errors must be a nonempty (runs, steps[, dim]) array")
    sq = E**2 if E.ndim == 2 else np.sum(E**2, axis=tuple(range(2, E.ndim)))
    return np.sqrt(sq.mean(axis=0))


@dataclass
class InvariantStats:
    """Worst-case covariance diagnostics collected across runs."""

    violations: list = field(default_factory=list)
    min_dominance_eig: float = math.inf
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class McResult:
    methods: tuple
    pos_rmse: Dict[str, np.ndarray]
    vel_rmse: Dict[str, np.ndarray]
    times: np.ndarray
    runs: int
    base_seed: int
    invariants: Optional[InvariantStats] = None

    def summary(self, transient_s: float = TRANSIENT_S) -> dict:
        keep = self.times > transient_s + 1e-9

        def stats(curve):
            # None when the horizon ends inside the transient window
            trimmed = float(np.mean(curve[keep])) if keep.any() else None
            return {"mean_rmse": float(np.mean(curve)), "mean_rmse_after_transient": trimmed}

        return {m: {"position": stats(self.pos_rmse[m]), "velocity": stats(self.vel_rmse[m])} for m in self.methods}


def _check_covs(stats: InvariantStats, label, filt_covs, smooth_covs=None):
    for k, P in enumerate(filt_covs):
        msg = psd_violation(P)
        if msg:
            stats.violations.append(f"{label} filtered step {k + 1}: {msg}")
    if smooth_covs is None:
        return
    for k, (Pf, Ps) in enumerate(zip(filt_covs, smooth_covs)):
        msg = psd_violation(Ps)
        if msg:
            stats.violations.append(f"{label} smoothed step {k + 1}: {msg}")
        w0 = np.linalg.eigvalsh(Pf - Ps)[0]
        stats.min_dominance_eig = min(stats.min_dominance_eig, w0)
        if w0 < -1e-9:
            stats.violations.append(
                f"{label} step {k + 1}: filtered - smoothed covariance has eigenvalue {w0:.3g}"
            )
        stats.checked += 1


class RunError(RuntimeError):
    def __init__(self, run, cause):
        step = getattr(cause, "step", None)
        where = f"run {run}" + (f", step {step}" if step is not None else "")
        super().__init__(f"{where}: {cause}")
        self.run = run
        self.step = step


def run_monte_carlo(scenario: CtScenario, runs: int, methods: Iterable[str] = METHODS, base_seed: int = 0, check_invariants: bool = False, exact: bool = True, singular: str = "raise") -> McResult:
    """Monte Carlo RMSE over ``runs`` seeded trajectories.

    Run ``r`` uses seed ``base_seed + r``.  Squared errors are summed over
    the two position (resp. velocity) components and averaged over runs in
    run order, so output is bit-reproducible.  ``exact`` and ``singular``
    are passed through to the estimators.
    """
    runs = int(runs)
    if runs < 1:
        raise ValueError("runs must be >= 1")
    requested = set(methods)
    unknown = requested - set(METHODS)
    methods = tuple(m for m in METHODS if m in requested)
    if not methods or unknown:
        raise ValueError(f"methods must be a nonempty subset of {METHODS}")
    T = scenario.horizon
    pos_sq = {m: np.zeros(T) for m in methods}
    vel_sq = {m: np.zeros(T) for m in methods}
    stats = InvariantStats() if check_invariants else None
    need_prop = any(m.startswith("Proposed") for m in methods)
    need_std = any(m.startswith("Standard") for m in methods)

    for r in range(runs):
        traj, Y, _ = simulate_run(scenario, base_seed, r)
        est = {}
        try:
            if need_prop:
                rec = filter_pass(scenario.init_estimator, Y, scenario.theta, exact=exact, singular=singular)
                sm = rts_backward(rec, scenario.model, singular)
                est["ProposedKF"] = np.array([x.posterior.mean for x in rec])
                est["ProposedRTSS"] = sm.means()
                if stats is not None:
                    _check_covs(stats, f"run {r} proposed", [x.posterior.cov for x in rec], sm.covs())
            if need_std:
                rec = standard_kf(scenario.init_estimator, Y, scenario.model)
                sm = rts_backward(rec, scenario.model, singular)
                est["StandardKF"] = np.array([x.posterior.mean for x in rec])
                est["StandardRTSS"] = sm.means()
                if stats is not None:
                    _check_covs(stats, f"run {r} standard", [x.posterior.cov for x in rec], sm.covs())
        except np.linalg.LinAlgError as e:
            raise RunError(r, e) from e
        for m in methods:
            err = est[m] - traj.states
            pos_sq[m] += np.sum(err[:, :2] ** 2, axis=1)
            vel_sq[m] += np.sum(err[:, 2:4] ** 2, axis=1)

    return McResult(
        methods=methods,
        pos_rmse={m: np.sqrt(pos_sq[m] / runs) for m in methods},
        vel_rmse={m: np.sqrt(vel_sq[m] / runs) for m in methods},
        times=scenario.times,
        runs=runs,
        base_seed=int(base_seed),
        invariants=stats,
    )
