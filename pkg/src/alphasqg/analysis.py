"""Run records and hyperbolic-flow diagnostics.

For odd-odd data concentrated along the quadrant diagonal, the velocity at a
point x deep inside the quadrant is governed by the strain integral

    S(x) = integral over Q(x) of y1 y2 / |y|^(4+alpha) theta(y) dy,
    Q(x) = [2 x1, inf) x [2 x2, inf),

with u1/x1 ~ +4(2+alpha) S and u2/x2 ~ -4(2+alpha) S up to logarithmic
errors: a hyperbolic stagnation-point flow that stretches x1 and compresses
x2.  The diagnostics here measure that approximation's residuals, the
per-bubble time horizons where Lagrangian and Eulerian coordinates stay
comparable, and the growth of single-pair Holder quotients (the witness of
borderline-norm inflation).

All fitted constants are outputs: pass/fail logic compares them across
refinements, never against hard-coded values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .particles import (
    ParticleEnsemble,
    particle_holder_estimate,
    velocity_at,
)

Vec2 = np.ndarray


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------


@dataclass
class TracerSeries:
    """Time series of one tracer's positions with its conserved start data."""

    bubble_index: Optional[int]
    x0: np.ndarray
    theta0: float
    positions: np.ndarray  # (n_times, 2)


@dataclass
class RunRecord:
    """Diagnostics emitted by a flow run, all series on one time axis."""

    times: np.ndarray
    holder_estimate: np.ndarray
    riesz_to_initial: np.ndarray
    max_node_radius: np.ndarray
    crossings: np.ndarray
    inner_phi1_max: np.ndarray   # over tracers of bubbles inside the largest
    outer_phi1_min: np.ndarray   # over tracers of the largest bubble
    tracers: list[TracerSeries] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows, tracer_rows, tracers, metadata) -> "RunRecord":
        def col(key):
            return np.array([r[key] for r in rows], dtype=float)

        series = []
        for i, tr in enumerate(tracers):
            positions = np.array([tier[i] for tier in tracer_rows])
            series.append(
                TracerSeries(
                    bubble_index=tr.bubble_index,
                    x0=np.asarray(tr.x0, dtype=float),
                    theta0=tr.theta0,
                    positions=positions,
                )
            )
        return cls(
            times=col("t"),
            holder_estimate=col("holder_estimate"),
            riesz_to_initial=col("riesz_to_initial"),
            max_node_radius=col("max_node_radius"),
            crossings=col("crossings"),
            inner_phi1_max=col("inner_phi1_max"),
            outer_phi1_min=col("outer_phi1_min"),
            tracers=series,
            metadata=metadata,
        )

    def tracer(self, bubble_index: int) -> TracerSeries:
        for tr in self.tracers:
            if tr.bubble_index == bubble_index:
                return tr
        raise KeyError(f"no tracer for bubble {bubble_index}")

    @property
    def bubble_indices(self) -> list[int]:
        return sorted(
            tr.bubble_index for tr in self.tracers if tr.bubble_index is not None
        )


# ---------------------------------------------------------------------------
# quadrant integrals and velocity-approximation residuals
# ---------------------------------------------------------------------------


def quadrant_integral(ens: ParticleEnsemble, x: Vec2, region: str = "Q") -> float:
    """Strain integral of the node distribution over Q(x) or R(x).

    Q(x) = [2 x1, inf) x [2 x2, inf); R(x) widens to [2 x1, inf) x [0, inf).
    """
    x = np.asarray(x, dtype=float)
    if x[0] <= 0.0 or x[1] <= 0.0:
        raise ValueError("quadrant integral needs x1, x2 > 0")
    if region == "Q":
        mask = (ens.nodes[:, 0] >= 2.0 * x[0]) & (ens.nodes[:, 1] >= 2.0 * x[1])
    elif region == "R":
        mask = ens.nodes[:, 0] >= 2.0 * x[0]
    else:
        raise ValueError(f"region must be 'Q' or 'R', got {region!r}")
    if not np.any(mask):
        return 0.0
    p = ens.nodes[mask]
    r2 = p[:, 0] ** 2 + p[:, 1] ** 2
    integrand = p[:, 0] * p[:, 1] * r2 ** (-(4.0 + ens.params.alpha) / 2.0)
    return float(np.sum(ens.weights[mask] * ens.values[mask] * integrand))


def bubble_strain_constants(ens: ParticleEnsemble) -> dict[int, float]:
    """Per-bubble strain contributions: the strain integrand summed over each
    bubble's own nodes."""
    out = {}
    alpha = ens.params.alpha
    for n in np.unique(ens.bubble_index):
        sel = ens.bubble_index == n
        p = ens.nodes[sel]
        r2 = p[:, 0] ** 2 + p[:, 1] ** 2
        integrand = p[:, 0] * p[:, 1] * r2 ** (-(4.0 + alpha) / 2.0)
        out[int(n)] = float(np.sum(ens.weights[sel] * ens.values[sel] * integrand))
    return out


def ensemble_holder_norm(ens: ParticleEnsemble, seed: int = 0) -> float:
    """Sup norm plus sampled Holder-quotient lower bound of the node data.

    An under-estimate of the true borderline norm, which makes residuals
    normalized by it over-estimates (the conservative direction).
    """
    if ens.n_nodes == 0:
        return 0.0
    return float(np.max(np.abs(ens.values))) + particle_holder_estimate(
        ens.nodes, ens.values, ens.params.alpha, seed=seed
    )


def velocity_residual(
    ens: ParticleEnsemble,
    x: Vec2,
    theta_norm: Optional[float] = None,
    region: str = "Q",
) -> tuple[float, float]:
    """Normalized residuals of the hyperbolic velocity approximation at x.

    r1 = |u1/x1 - 4(2+a) S| / (norm * (1 + log(|x|^2 / x1^2))),
    r2 = |u2/x2 + 4(2+a) S| / (norm * (1 + log(|x|^2 / x2^2))),
    with S the strain integral over the chosen region.  Zero node data
    gives (0, 0).
    """
    x = np.asarray(x, dtype=float)
    if x[0] <= 0.0 or x[1] <= 0.0:
        raise ValueError("residual probes must lie strictly inside the quadrant")
    if np.hypot(x[0], x[1]) >= 0.25:
        raise ValueError("residual probes must satisfy |x| < 1/4")
    if theta_norm is None:
        theta_norm = ensemble_holder_norm(ens)
    if theta_norm == 0.0:
        return (0.0, 0.0)
    alpha = ens.params.alpha
    u = velocity_at(ens, x)
    s = quadrant_integral(ens, x, region)
    fac = 4.0 * (2.0 + alpha)
    r2x = x[0] ** 2 + x[1] ** 2
    den1 = theta_norm * (1.0 + np.log(r2x / x[0] ** 2))
    den2 = theta_norm * (1.0 + np.log(r2x / x[1] ** 2))
    r1 = abs(u[0] / x[0] - fac * s) / den1
    r2 = abs(u[1] / x[1] + fac * s) / den2
    return (float(r1), float(r2))


# ---------------------------------------------------------------------------
# tracer series diagnostics
# ---------------------------------------------------------------------------


def ratio_series(record: RunRecord, bubble_index: int) -> np.ndarray:
    """Compression ratio (phi2/phi1) / (x2/x1) along one tracer; 1 at t=0."""
    tr = record.tracer(bubble_index)
    if tr.x0[0] <= 0.0 or tr.x0[1] <= 0.0:
        raise ValueError("ratio series needs an off-axis tracer")
    ratio0 = tr.x0[1] / tr.x0[0]
    return (tr.positions[:, 1] / tr.positions[:, 0]) / ratio0


def witness_quotient(record: RunRecord, bubble_index: int, alpha: float) -> np.ndarray:
    """Single-pair Holder quotient theta0 / phi2(t)^alpha along one tracer.

    The pair is the tracer against its projection to the x1-axis, where the
    field vanishes by symmetry; growth of this series lower-bounds growth
    of the borderline seminorm.
    """
    tr = record.tracer(bubble_index)
    phi2 = tr.positions[:, 1]
    if np.any(phi2 <= 0.0):
        raise ArithmeticError(
            f"tracer {bubble_index} reached phi2 <= 0; record is inconsistent"
        )
    return tr.theta0 / phi2**alpha


@dataclass(frozen=True)
class ScheduleParams:
    """Fitted per-scale time horizons T_n ~ c_fit (1-beta) / n^(1-beta)."""

    beta_amp: float
    c_fit: float = 1.0
    t_horizon: float = math.inf
    n_range: tuple[int, int] = (1, 2**31)

    def __post_init__(self) -> None:
        if not 0.0 < self.beta_amp < 0.25:
            raise ValueError(f"beta_amp must lie in (0, 1/4), got {self.beta_amp}")
        if self.c_fit <= 0.0:
            raise ValueError("c_fit must be positive")


def tn_schedule(params: ScheduleParams, n: int, capped: bool = False) -> float:
    """Comparability horizon for bubble n.

    Uncapped: c_fit (1 - beta) / n^(1-beta).  Capped: min of the global
    horizon and c_fit / sum_{m < n} m^(-beta) (the accumulated strain of
    all larger bubbles), never exceeding the uncapped value's role as a
    lower-bound model.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    beta = params.beta_amp
    base = params.c_fit * (1.0 - beta) / float(n) ** (1.0 - beta)
    if not capped:
        return base
    ms = np.arange(params.n_range[0], n, dtype=float)
    if len(ms) == 0:
        return min(params.t_horizon, base) if math.isfinite(params.t_horizon) else base
    strain = float(np.sum(ms ** (-beta)))
    return min(params.t_horizon, params.c_fit / strain)


def fit_exponential(times: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares fit values ~ values[0] * exp(c t); returns (c, R^2).

    R^2 is computed on log values; requires positive values.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0.0):
        raise ValueError("exponential fit needs positive values")
    y = np.log(values)
    a = np.stack([times, np.ones_like(times)], axis=1)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), r2


# ---------------------------------------------------------------------------
# inflation report
# ---------------------------------------------------------------------------


def _monotone_nondecreasing(series: np.ndarray, slack: float = 0.01) -> bool:
    return bool(np.all(np.diff(series) >= -slack * np.abs(series[:-1])))


def ordering_ok(record: RunRecord, tol: float = 1.0e-12) -> bool:
    """Scale separation along the run: twice the largest inner-tracer phi1
    stays below the smallest outer-tracer phi1 at every output time."""
    inner = record.inner_phi1_max
    outer = record.outer_phi1_min
    valid = np.isfinite(inner) & np.isfinite(outer)
    if not np.any(valid):
        return True
    return bool(np.all(2.0 * inner[valid] <= outer[valid] * (1.0 + tol)))


def inflation_report(record: RunRecord) -> dict:
    """Machine-readable growth summary of a completed run.

    Schema: {"tracers": [{"n", "q0", "qT", "growth"}...],
             "holder": {"h0", "hT", "growth"},
             "ratios": {"per_bubble": {n: max}, "max_excursion"},
             "flags": {...}}.
    """
    alpha = float(record.metadata.get("alpha"))
    half_t = record.times[-1] / 2.0 if len(record.times) else 0.0
    tracers_out = []
    monotone = {}
    ratios = {}
    for n in record.bubble_indices:
        q = witness_quotient(record, n, alpha)
        q0, q_t = float(q[0]), float(q[-1])
        growth = q_t / q0 if q0 > 0.0 else 1.0
        tracers_out.append({"n": int(n), "q0": q0, "qT": q_t, "growth": growth})
        first_half = q[record.times <= half_t + 1.0e-15]
        monotone[str(n)] = (
            _monotone_nondecreasing(first_half) if len(first_half) > 1 else True
        )
        ratios[str(n)] = float(np.max(np.abs(ratio_series(record, n))))
    h0 = float(record.holder_estimate[0])
    h_t = float(record.holder_estimate[-1])
    growth_inner_gt_outer = None
    if len(tracers_out) >= 2:
        inner = max(tracers_out, key=lambda d: d["n"])
        outer = min(tracers_out, key=lambda d: d["n"])
        growth_inner_gt_outer = bool(inner["growth"] > outer["growth"])
    return {
        "tracers": tracers_out,
        "holder": {
            "h0": h0,
            "hT": h_t,
            "growth": h_t / h0 if h0 > 0.0 else 1.0,
        },
        "ratios": {
            "per_bubble": ratios,
            "max_excursion": max(ratios.values()) if ratios else 1.0,
        },
        "flags": {
            "witness_monotone_first_half": monotone,
            "ordering_ok": ordering_ok(record),
            "growth_inner_gt_outer": growth_inner_gt_outer,
            "axis_crossings": int(record.crossings[-1]) if len(record.crossings) else 0,
            "truncated": bool(record.metadata.get("truncated", False)),
        },
    }


__all__ = [
    "RunRecord",
    "TracerSeries",
    "ScheduleParams",
    "quadrant_integral",
    "bubble_strain_constants",
    "ensemble_holder_norm",
    "velocity_residual",
    "ratio_series",
    "witness_quotient",
    "tn_schedule",
    "fit_exponential",
    "ordering_ok",
    "inflation_report",
]
