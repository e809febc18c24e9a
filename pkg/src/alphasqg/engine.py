"""Numba-compiled pairwise sums behind velocity, energy, and reconstruction.

All loops parallelize over output rows only; every row is accumulated by one
thread in fixed index order, so results are bitwise reproducible regardless
of thread count.  The thread pool size honors the ALPHASQG_THREADS
environment variable (integer >= 1, default: machine parallelism).
"""
from __future__ import annotations

import os

import numba
import numpy as np
from numba import njit, prange

THREADS_ENV = "ALPHASQG_THREADS"


def configure_threads() -> int:
    """Apply ALPHASQG_THREADS if set; returns the active thread count."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1, got {raw}")
        numba.set_num_threads(n)
    return numba.get_num_threads()


configure_threads()


@njit(parallel=True, cache=True)
def velocity_image_sum(targets, nodes, coef, alpha, eps):
    """Velocity at first-quadrant targets from the four-image regularized sum.

    u(x) = sum_j coef_j * [K(x-p) - K(x-p~) + K(x+p) - K(x-pbar)](eps),
    coef_j = weight_j * theta_j.  Zero-distance terms contribute zero.
    """
    m = targets.shape[0]
    n = nodes.shape[0]
    out = np.zeros((m, 2))
    p = -(2.0 + alpha) / 2.0
    for i in prange(m):
        x1 = targets[i, 0]
        x2 = targets[i, 1]
        u1 = 0.0
        u2 = 0.0
        for j in range(n):
            c = coef[j]
            if c == 0.0:
                continue
            a = x1 - nodes[j, 0]   # direct / bottom-mirrored x1 offset
            b = x1 + nodes[j, 0]   # left / opposite x1 offset
            d = x2 - nodes[j, 1]
            e = x2 + nodes[j, 1]
            r2 = a * a + d * d + eps
            if r2 > 0.0:
                s = c * r2 ** p
                u1 -= d * s
                u2 += a * s
            r2 = b * b + d * d + eps
            if r2 > 0.0:
                s = c * r2 ** p
                u1 += d * s
                u2 -= b * s
            r2 = b * b + e * e + eps
            if r2 > 0.0:
                s = c * r2 ** p
                u1 -= e * s
                u2 += b * s
            r2 = a * a + e * e + eps
            if r2 > 0.0:
                s = c * r2 ** p
                u1 += e * s
                u2 -= a * s
        out[i, 0] = u1
        out[i, 1] = u2
    return out


@njit(parallel=True, cache=True)
def riesz_rows_plain(points, weights, values, alpha, self_coeff):
    """Row contributions to the Riesz energy of a plane-supported field.

    row_i = q_i * sum_{j != i} q_j |p_i - p_j|^(-2 alpha)
            + values_i^2 * weights_i * self_coeff_i,
    q = weights * values.  The total energy is the sum of the rows.
    """
    n = points.shape[0]
    rows = np.zeros(n)
    p = -alpha  # applied to squared distances
    for i in prange(n):
        qi = weights[i] * values[i]
        acc = values[i] * values[i] * weights[i] * self_coeff[i]
        if qi != 0.0:
            x1 = points[i, 0]
            x2 = points[i, 1]
            s = 0.0
            for j in range(n):
                if j == i:
                    continue
                dx = x1 - points[j, 0]
                dy = x2 - points[j, 1]
                s += weights[j] * values[j] * (dx * dx + dy * dy) ** p
            acc += qi * s
        rows[i] = acc
    return rows


@njit(parallel=True, cache=True)
def riesz_rows_oddodd(points, weights, values, alpha, self_coeff):
    """Riesz-energy rows for an odd-odd field sampled on the first quadrant.

    The plane energy folds to 4x the quadrant double sum against
    G(x, y) = |x-y|^(-2a) - |x-y~|^(-2a) - |x-ybar|^(-2a) + |x+y|^(-2a);
    only the direct term is singular on the diagonal and gets the local
    correction, the image terms are evaluated exactly at y = x.
    """
    n = points.shape[0]
    rows = np.zeros(n)
    p = -alpha
    for i in prange(n):
        qi = weights[i] * values[i]
        x1 = points[i, 0]
        x2 = points[i, 1]
        acc = values[i] * values[i] * weights[i] * self_coeff[i]
        # image terms of the diagonal pair (regular for interior points)
        g_img = (
            (4.0 * (x1 * x1 + x2 * x2)) ** p
            - (4.0 * x1 * x1) ** p
            - (4.0 * x2 * x2) ** p
        )
        acc += qi * qi * g_img
        if qi != 0.0:
            s = 0.0
            for j in range(n):
                if j == i:
                    continue
                y1 = points[j, 0]
                y2 = points[j, 1]
                a = x1 - y1
                b = x1 + y1
                d = x2 - y2
                e = x2 + y2
                g = (
                    (a * a + d * d) ** p
                    - (b * b + d * d) ** p
                    - (a * a + e * e) ** p
                    + (b * b + e * e) ** p
                )
                s += weights[j] * values[j] * g
            acc += qi * s
        rows[i] = 4.0 * acc
    return rows


@njit(parallel=True, cache=True)
def blob_sum_oddodd(targets, sources, masses, widths, norm_const):
    """Smooth odd-odd field from mass-carrying blobs on the first quadrant.

    f(x) = sum_j m_j [phi_w(x-p) - phi_w(x-p~) - phi_w(x-pbar) + phi_w(x+p)]
    with phi_w(z) = norm_const/w^2 * exp(-1/(1-|z/w|^2)) on |z| < w.
    """
    m = targets.shape[0]
    n = sources.shape[0]
    out = np.zeros(m)
    for i in prange(m):
        x1 = targets[i, 0]
        x2 = targets[i, 1]
        acc = 0.0
        for j in range(n):
            w = widths[j]
            w2 = w * w
            cj = masses[j] * norm_const / w2
            a = x1 - sources[j, 0]
            b = x1 + sources[j, 0]
            d = x2 - sources[j, 1]
            e = x2 + sources[j, 1]
            r2 = (a * a + d * d) / w2
            if r2 < 1.0:
                acc += cj * np.exp(-1.0 / (1.0 - r2))
            r2 = (b * b + d * d) / w2
            if r2 < 1.0:
                acc -= cj * np.exp(-1.0 / (1.0 - r2))
            r2 = (a * a + e * e) / w2
            if r2 < 1.0:
                acc -= cj * np.exp(-1.0 / (1.0 - r2))
            r2 = (b * b + e * e) / w2
            if r2 < 1.0:
                acc += cj * np.exp(-1.0 / (1.0 - r2))
        out[i] = acc
    return out
