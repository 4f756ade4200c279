"""Asymptotic velocities, offsets, growth constants and decay-rate fits."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import model
from .errors import DomainError, FitError, InsufficientHorizonError, NotApplicableError
from .integrate import Trajectory


@dataclass(frozen=True)
class AsymptoticSummary:
    v_star: np.ndarray
    v_star_error: np.ndarray
    x_star: np.ndarray
    log_drift_coeffs: np.ndarray
    drift_fit_residual: np.ndarray
    c1: float
    c2: float
    min_vstar_separation: float
    epot_rate: float
    erel_rate: float
    window: tuple[float, float]

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, np.ndarray):
                d[k] = v.tolist()
            elif isinstance(v, tuple):
                d[k] = list(v)
        return d


class DecayFit(NamedTuple):
    exponent: float
    prefactor: float
    residual: float


class DriftFit(NamedTuple):
    x_star: np.ndarray
    log_drift_coeffs: np.ndarray
    fit_residual: np.ndarray


def _interp_cubic(times, values, t):
    """Four-point Lagrange interpolation of ``values`` (stacked on axis 0) at t."""
    times = np.asarray(times)
    k = int(np.searchsorted(times, t))
    if k < len(times) and times[k] == t:
        return values[k]
    lo = max(0, min(k - 2, len(times) - 4))
    idx = range(lo, min(lo + 4, len(times)))
    # interpolate offsets from one node so constant data comes back exactly
    base = values[idx[0]]
    out = np.array(base, dtype=float)
    for i in idx[1:]:
        w = 1.0
        for j in idx:
            if j != i:
                w *= (t - times[j]) / (times[i] - times[j])
        out = out + w * (values[i] - base)
    return out


def _require_decade(times):
    positive = times[times > 0]
    if positive.size < 2 or positive[-1] < 10.0 * positive[0]:
        raise InsufficientHorizonError("trajectory must span at least one decade of positive time")


def extract_vstar(trajectory: Trajectory, tail_fraction: float = 0.5):
    """v_i* read off at the final time, with Cauchy error |v_i(T) - v_i(fT)|.

    Returns ``(v_star, error)`` with shapes (n, 3) and (n,).
    """
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    times = trajectory.times
    _require_decade(times)
    v = trajectory.velocities
    t_end = times[-1]
    v_star = v[-1].copy()
    v_earlier = _interp_cubic(times, v, tail_fraction * t_end)
    return v_star, np.linalg.norm(v_star - v_earlier, axis=1)


def _window_mask(times, window):
    lo, hi = window
    return (times >= lo) & (times <= hi)


def default_window(trajectory: Trajectory) -> tuple[float, float]:
    t_end = float(trajectory.times[-1])
    return (t_end / 10.0, t_end)


def fit_log_model(t, y):
    """Least squares y ~ a + b ln t along axis 0. Returns (a, b, rms residual over the last axes)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.stack([np.ones_like(t), np.log(t)], axis=1)
    if np.linalg.matrix_rank(A) < 2:
        raise FitError("design matrix is rank deficient (need distinct sample times)")
    flat = y.reshape(len(t), -1)
    coef, *_ = np.linalg.lstsq(A, flat, rcond=None)
    resid = flat - A @ coef
    shape = y.shape[1:]
    return coef[0].reshape(shape), coef[1].reshape(shape), resid


def extract_xstar(trajectory: Trajectory, v_star: np.ndarray, fit_window=None) -> DriftFit:
    """Fit x_i(t) - t v_i* = a + b ln t per particle and coordinate.

    ``fit_residual`` is the per-particle RMS residual over the window.
    """
    times = trajectory.times
    window = fit_window or default_window(trajectory)
    m = _window_mask(times, window)
    t = times[m]
    if t.size < 8 or t[-1] < 10.0 * t[0] * (1 - 1e-12):
        raise InsufficientHorizonError("fit window needs >= 8 samples spanning a decade")
    y = trajectory.positions[m] - t[:, None, None] * v_star[None]
    a, b, resid = fit_log_model(t, y)
    n = v_star.shape[0]
    per_particle = np.sqrt(np.mean(resid.reshape(t.size, n, 3) ** 2, axis=(0, 2)))
    return DriftFit(a, b, per_particle)


def constant_model_residual(trajectory: Trajectory, v_star: np.ndarray, fit_window=None) -> np.ndarray:
    """Per-particle RMS residual of the constant-only model x_i - t v_i* = a."""
    times = trajectory.times
    m = _window_mask(times, fit_window or default_window(trajectory))
    t = times[m]
    y = trajectory.positions[m] - t[:, None, None] * v_star[None]
    resid = y - y.mean(axis=0)
    return np.sqrt(np.mean(resid**2, axis=(0, 2)))


def fit_growth_constants(trajectory: Trajectory, window=(10.0, math.inf)) -> tuple[float, float]:
    """Envelope constants: c1 = min of d_min/t, c2 = max of d_max/t over the window."""
    if trajectory.n < 2:
        raise NotApplicableError("growth constants need n >= 2")
    m = _window_mask(trajectory.times, window) & (trajectory.times > 0)
    picked = [s.state for s, keep in zip(trajectory, m) if keep]
    if not picked:
        raise InsufficientHorizonError(f"no samples in window {window}")
    c1 = min(model.min_pairwise_distance(s) / s.t for s in picked)
    c2 = max(model.max_pairwise_distance(s) / s.t for s in picked)
    if not c1 > 0:
        raise FitError("c1 must be positive")
    return c1, c2


def fit_decay_rate(t: Sequence[float], values: Sequence[float], model: str = "power") -> DecayFit:
    """Fit ``values`` ~ A t^p (``power``) or C ln^2 t / t^2 (``power-times-log-squared``).

    For ``power`` the residual is the RMS misfit in log space; for the
    log-squared model it is the maximum relative deviation from the fit.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if np.any(y <= 0):
        raise DomainError("decay fits need strictly positive values")
    if t.size < 8 or t[-1] < 10.0 * t[0] * (1 - 1e-12):
        raise InsufficientHorizonError("need >= 8 samples spanning a decade")
    if model == "power":
        if np.any(t <= 0):
            raise DomainError("power fit needs t > 0")
        A = np.stack([np.ones_like(t), np.log(t)], axis=1)
        coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
        resid = np.log(y) - A @ coef
        return DecayFit(float(coef[1]), float(np.exp(coef[0])), float(np.sqrt(np.mean(resid**2))))
    if model == "power-times-log-squared":
        if np.any(t <= math.e):
            raise DomainError("log-squared fit needs t > e")
        shape = np.log(t) ** 2 / t**2
        c = float(np.exp(np.mean(np.log(y / shape))))
        return DecayFit(-2.0, c, float(np.max(np.abs(y / (c * shape) - 1.0))))
    raise ValueError(f"unknown decay model {model!r}")


def summarize(trajectory: Trajectory, window=None, tail_fraction: float = 0.5) -> AsymptoticSummary:
    """All asymptotic fits, computed from the sampled states alone."""
    window = tuple(window or default_window(trajectory))
    n = trajectory.n
    v_star, v_err = extract_vstar(trajectory, tail_fraction)
    drift = extract_xstar(trajectory, v_star, window)
    nan = math.nan
    c1 = c2 = sep = epot_rate = nan
    times = trajectory.times
    m = _window_mask(times, window)
    if n >= 2:
        c1, c2 = fit_growth_constants(trajectory, window)
        iu = np.triu_indices(n, k=1)
        dv = np.linalg.norm(v_star[:, None] - v_star[None], axis=-1)
        sep = float(dv[iu].min())
        epot = [s.report.e_pot for s, keep in zip(trajectory, m) if keep]
        epot_rate = fit_decay_rate(times[m], epot, "power").exponent
    erel = np.array([s.report.e_kin_rel for s, keep in zip(trajectory, m) if keep], dtype=float)
    erel_rate = fit_decay_rate(times[m], erel, "power").exponent if np.all(erel > 0) else nan
    return AsymptoticSummary(
        v_star=v_star,
        v_star_error=v_err,
        x_star=drift.x_star,
        log_drift_coeffs=drift.log_drift_coeffs,
        drift_fit_residual=drift.fit_residual,
        c1=c1,
        c2=c2,
        min_vstar_separation=sep,
        epot_rate=epot_rate,
        erel_rate=erel_rate,
        window=(float(window[0]), float(window[1])),
    )
