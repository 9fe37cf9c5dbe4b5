"""Run configuration: loading, validation and scenario construction.

A config is a YAML (or JSON) mapping with three sections::

    scenario:
      preset: paper-default          # or an explicit description, see below
    attack:                          # optional overrides of the preset attack
      alpha_b: 0.8
    execution:
      runs: 100
      base_seed: 0
      methods: [ProposedKF, ProposedRTSS, StandardKF, StandardRTSS]
      out: results
      format: csv
      singular: raise                # or pinv, for noiseless/degenerate setups

An explicit scenario gives ``sample_time``, ``horizon``, ``Q``, ``R``, ``x0``
(optionally ``x0_cov``), ``init_mean``, ``init_cov`` and either
``turn_rate: {value: 3, unit: deg/s}`` or raw ``A`` and ``H`` matrices.
Matrices are row-major nested lists.  With an explicit scenario the attack
section must be complete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import yaml

from .attacks import AttackParams
from .harness import METHODS, CtScenario, build_ct_model, default_scenario
from .models import GaussianBelief, LinearGaussianModel, psd_violation, validate_model

PRESETS = ("paper-default",)
ATTACK_FIELDS = ("alpha_a", "alpha_b", "alpha_c", "alpha_m", "mu_a", "Sigma_a", "mu_m", "sigma_m_sq")
EXPLICIT_KEYS = {"sample_time", "horizon", "turn_rate", "A", "H", "Q", "R", "x0", "x0_cov", "init_mean", "init_cov"}
EXECUTION_KEYS = {"runs", "base_seed", "methods", "out", "format", "measurements", "singular"}
ANGLE_UNITS = {"deg/s": math.pi / 180.0, "rad/s": 1.0}


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class ExecutionConfig:
    runs: int = 100
    base_seed: int = 0
    methods: tuple = METHODS
    out: str = "out"
    format: str = "csv"
    measurements: Optional[str] = None
    singular: str = "raise"


@dataclass
class RunConfig:
    scenario: CtScenario
    execution: ExecutionConfig = field(default_factory=ExecutionConfig)
    source: str = "paper-default"


def _matrix(v, name, errs, shape=None):
    try:
        M = np.array(v, dtype=float)
    except (TypeError, ValueError):
        errs.append(f"{name}: not a numeric matrix")
        return None
    if M.ndim != 2:
        errs.append(f"{name}: expected a nested list (matrix), got {M.ndim}-d")
        return None
    if shape is not None and M.shape != shape:
        errs.append(f"{name}: dimension mismatch, shape {M.shape}, expected {shape}")
        return None
    return M


def _vector(v, name, errs, n=None):
    try:
        x = np.array(v, dtype=float)
    except (TypeError, ValueError):
        errs.append(f"{name}: not a numeric vector")
        return None
    if x.ndim != 1 or (n is not None and x.size != n):
        errs.append(f"{name}: expected a vector" + (f" of length {n}" if n else ""))
        return None
    return x


def _number(v, name, errs):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errs.append(f"{name}: expected a number, got {v!r}")
        return None
    return float(v)


def _psd(M, name, errs):
    if M is not None:
        msg = psd_violation(M)
        if msg:
            errs.append(f"{name}: {msg}")


def _parse_attack(raw, base: Optional[AttackParams], n_z, errs) -> Optional[AttackParams]:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        errs.append("attack: must be a mapping")
        return None
    for k in raw:
        if k not in ATTACK_FIELDS:
            errs.append(f"attack.{k}: unknown key")
    vals = {}
    for k in ATTACK_FIELDS:
        if k in raw:
            v = raw[k]
            if k == "mu_a":
                vals[k] = _vector(v, "attack.mu_a", errs, n_z)
            elif k == "Sigma_a":
                vals[k] = _matrix(v, "attack.Sigma_a", errs, (n_z, n_z) if n_z else None)
            else:
                vals[k] = _number(v, f"attack.{k}", errs)
        elif base is not None:
            vals[k] = getattr(base, k)
        else:
            errs.append(f"attack.{k}: missing (required with an explicit scenario)")
            vals[k] = None
    if any(v is None for v in vals.values()):
        return None
    for k in ("alpha_a", "alpha_b", "alpha_c", "alpha_m"):
        if not 0.0 <= vals[k] <= 1.0:
            errs.append(f"attack.{k}={vals[k]}: probability out of range [0, 1]")
    if vals["sigma_m_sq"] < 0:
        errs.append(f"attack.sigma_m_sq={vals['sigma_m_sq']}: must be nonnegative")
    _psd(vals["Sigma_a"], "attack.Sigma_a", errs)
    try:
        return AttackParams(**vals)
    except (TypeError, ValueError) as e:
        errs.append(f"attack: {e}")
        return None


def _parse_turn_rate(v, errs):
    if isinstance(v, dict):
        unit = v.get("unit", "rad/s")
        if unit not in ANGLE_UNITS:
            errs.append(f"scenario.turn_rate.unit: {unit!r} not one of {sorted(ANGLE_UNITS)}")
            return None
        val = _number(v.get("value"), "scenario.turn_rate.value", errs)
        if val is None:
            return None
        # the only place degrees become radians
        return val * ANGLE_UNITS[unit]
    return _number(v, "scenario.turn_rate", errs)


def _parse_explicit(sc, out, require_pd_R=True):
    errs: List[str] = []
    try:
        return _explicit_fields(sc, errs, require_pd_R)
    finally:
        out.extend(errs)


def _explicit_fields(sc, errs, require_pd_R):
    for k in sc:
        if k not in EXPLICIT_KEYS:
            errs.append(f"scenario.{k}: unknown key")
    for k in ("sample_time", "horizon", "Q", "R", "x0", "init_mean", "init_cov"):
        if k not in sc:
            errs.append(f"scenario.{k}: missing")
    has_ct = "turn_rate" in sc
    has_mat = "A" in sc or "H" in sc
    if has_ct == has_mat:
        errs.append("scenario: give exactly one of turn_rate or (A, H)")
    if has_mat and not ("A" in sc and "H" in sc):
        errs.append("scenario: A and H must be given together")
    if errs:
        return None
    t = _number(sc["sample_time"], "scenario.sample_time", errs)
    if t is not None and t <= 0:
        errs.append("scenario.sample_time: must be positive")
    horizon = sc["horizon"]
    if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 1:
        errs.append("scenario.horizon: must be an integer >= 1")
    Q = _matrix(sc["Q"], "scenario.Q", errs)
    R = _matrix(sc["R"], "scenario.R", errs)
    omega = None
    if has_ct:
        omega = _parse_turn_rate(sc["turn_rate"], errs)
        if omega == 0:
            errs.append("scenario.turn_rate: must be nonzero")
        A = H = None
    else:
        A = _matrix(sc["A"], "scenario.A", errs)
        H = _matrix(sc["H"], "scenario.H", errs)
    if errs:
        return None
    model = build_ct_model(t, omega, Q, R) if has_ct else LinearGaussianModel(A, H, Q, R)
    errs.extend(f"scenario: {v}" for v in validate_model(model, require_pd_R).violations)
    n_x = model.n_x
    x0 = _vector(sc["x0"], "scenario.x0", errs, n_x)
    x0_cov = _matrix(sc.get("x0_cov", np.zeros((n_x, n_x)).tolist()), "scenario.x0_cov", errs, (n_x, n_x))
    m0 = _vector(sc["init_mean"], "scenario.init_mean", errs, n_x)
    P0 = _matrix(sc["init_cov"], "scenario.init_cov", errs, (n_x, n_x))
    _psd(x0_cov, "scenario.x0_cov", errs)
    _psd(P0, "scenario.init_cov", errs)
    if errs:
        return None
    return dict(
        sample_time=t,
        turn_rate=omega,
        model=model,
        init_true=GaussianBelief(x0, x0_cov),
        init_estimator=GaussianBelief(m0, P0),
        horizon=horizon,
    )


def _parse_execution(raw, base_dir: Path, errs) -> ExecutionConfig:
    ex = ExecutionConfig()
    if raw is None:
        return ex
    if not isinstance(raw, dict):
        errs.append("execution: must be a mapping")
        return ex
    for k in raw:
        if k not in EXECUTION_KEYS:
            errs.append(f"execution.{k}: unknown key")
    if "runs" in raw:
        v = raw["runs"]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            errs.append("execution.runs: must be an integer >= 1")
        else:
            ex.runs = v
    if "base_seed" in raw:
        v = raw["base_seed"]
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            errs.append("execution.base_seed: must be a nonnegative integer")
        else:
            ex.base_seed = v
    if "methods" in raw:
        ms = raw["methods"]
        if isinstance(ms, str):
            ms = [m.strip() for m in ms.split(",") if m.strip()]
        bad = [m for m in ms if m not in METHODS] if isinstance(ms, list) else ["<not a list>"]
        if bad or not ms:
            errs.append(f"execution.methods: {bad or 'empty'} not in {list(METHODS)}")
        else:
            ex.methods = tuple(m for m in METHODS if m in ms)
    if "out" in raw:
        ex.out = str(raw["out"])
    if "format" in raw:
        if raw["format"] not in ("csv", "json"):
            errs.append("execution.format: must be 'csv' or 'json'")
        else:
            ex.format = raw["format"]
    if "singular" in raw:
        if raw["singular"] not in ("raise", "pinv"):
            errs.append("execution.singular: must be 'raise' or 'pinv'")
        else:
            ex.singular = raw["singular"]
    if "measurements" in raw:
        p = Path(str(raw["measurements"]))
        if not p.is_absolute():
            p = base_dir / p
        if not p.is_file():
            errs.append(f"execution.measurements: file not found: {p}")
        ex.measurements = str(p)
    return ex


def parse_config(raw, base_dir=".") -> RunConfig:
    """Validate a config mapping; raise :class:`ConfigError` listing every violation."""
    errs: List[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be a mapping"])
    for k in raw:
        if k not in ("scenario", "attack", "execution"):
            errs.append(f"{k}: unknown section")
    execution = _parse_execution(raw.get("execution"), Path(base_dir), errs)
    sc = raw.get("scenario")
    fields = None
    source = None
    base_attack = None
    if not isinstance(sc, dict):
        errs.append("scenario: section missing or not a mapping")
    elif "preset" in sc:
        if set(sc) - {"preset"}:
            errs.append("scenario: preset cannot be combined with explicit scenario keys")
        elif sc["preset"] not in PRESETS:
            errs.append(f"scenario.preset: unknown preset {sc['preset']!r}")
        else:
            source = sc["preset"]
            base = default_scenario()
            base_attack = base.attack
            fields = dict(
                sample_time=base.sample_time,
                turn_rate=base.turn_rate,
                model=base.model,
                init_true=base.init_true,
                init_estimator=base.init_estimator,
                horizon=base.horizon,
            )
    else:
        source = "explicit"
        fields = _parse_explicit(sc, errs, require_pd_R=execution.singular == "raise")
    n_z = fields["model"].n_z if fields else None
    attack = _parse_attack(raw.get("attack"), base_attack, n_z, errs)
    if errs or fields is None or attack is None:
        raise ConfigError(errs or ["config: invalid"])
    return RunConfig(CtScenario(attack=attack, **fields), execution, source)


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ConfigError([f"config: cannot parse {path}: {e}"]) from e
    return parse_config(raw, base_dir=path.parent)


def preset_config() -> dict:
    return {"scenario": {"preset": "paper-default"}, "execution": {"runs": 100, "base_seed": 0}}
