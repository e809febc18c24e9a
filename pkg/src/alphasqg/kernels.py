"""Pointwise Biot-Savart kernels for the alpha-SQG velocity law.

The active scalar theta induces a velocity through convolution with

    K(z) = z_perp / |z|^(2+alpha),   z_perp = (-z2, z1),   0 < alpha < 1,

with the normalization constant fixed to one.  The epsilon-regularized
variant replaces |z|^2 by |z|^2 + eps in the denominator and is the kernel
actually used in particle sums.  For fields that are odd across both axes
the plane integral folds onto the first quadrant against a four-term image
kernel, evaluated here term by term.

Conventions: eps carries units of length squared; points are numpy arrays of
shape (2,) or batches of shape (m, 2).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

Vec2 = np.ndarray


@dataclass(frozen=True)
class KernelParams:
    """Exponent and regularization governing every kernel evaluation."""

    alpha: float
    eps: float = 0.0
    c_alpha: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.eps < 0.0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if self.c_alpha != 1.0:
            raise ValueError("the normalization constant is fixed to 1")


def reflect_x1(z: Vec2) -> Vec2:
    """Mirror across the x2-axis: (z1, z2) -> (-z1, z2)."""
    out = np.array(z, dtype=float, copy=True)
    out[..., 0] = -out[..., 0]
    return out


def reflect_x2(z: Vec2) -> Vec2:
    """Mirror across the x1-axis: (z1, z2) -> (z1, -z2)."""
    out = np.array(z, dtype=float, copy=True)
    out[..., 1] = -out[..., 1]
    return out


def perp(z: Vec2) -> Vec2:
    """Rotate by +90 degrees: (z1, z2) -> (-z2, z1)."""
    z = np.asarray(z, dtype=float)
    return np.stack([-z[..., 1], z[..., 0]], axis=-1)


def eval_K(params: KernelParams, z: Vec2) -> Vec2:
    """Singular kernel z_perp / |z|^(2+alpha); domain error at z = 0."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    if np.any(r2 == 0.0):
        raise ValueError("kernel is singular at z = 0; use eval_K_reg")
    scale = r2 ** (-(2.0 + params.alpha) / 2.0)
    return perp(z) * scale[..., None]


def eval_K_reg(params: KernelParams, z: Vec2) -> Vec2:
    """Regularized kernel z_perp / (|z|^2 + eps)^((2+alpha)/2).

    Reduces to eval_K when eps = 0; its magnitude never exceeds the
    singular kernel's.
    """
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    denom = r2 + params.eps
    if np.any(denom == 0.0):
        raise ValueError("eps = 0 and z = 0: regularized kernel undefined")
    scale = denom ** (-(2.0 + params.alpha) / 2.0)
    return perp(z) * scale[..., None]


def eval_image_kernel(params: KernelParams, x: Vec2, y: Vec2) -> Vec2:
    """Four-image kernel for first-quadrant restrictions of odd-odd fields.

    K(x-y) - K(x-y~) + K(x+y) - K(x-ybar), with y~ = (-y1, y2) and
    ybar = (y1, -y2), each term regularized.  Its first component vanishes
    on {x1 = 0} and its second on {x2 = 0}.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (
        eval_K_reg(params, x - y)
        - eval_K_reg(params, x - reflect_x1(y))
        + eval_K_reg(params, x + y)
        - eval_K_reg(params, x - reflect_x2(y))
    )


@lru_cache(maxsize=1)
def bump_normalization() -> float:
    """1 / integral over the plane of exp(-1/(1-|z|^2)) on the unit disk."""
    val, _ = integrate.quad(lambda r: r * np.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0)
    return 1.0 / (2.0 * np.pi * val)


def eval_mollifier(nu: float, z: Vec2) -> float | np.ndarray:
    """Standard mollifier nu^-2 phi(z/nu) with a normalized smooth bump phi.

    Nonnegative, supported in |z| <= nu, unit mass over the plane.
    """
    if nu <= 0.0:
        raise ValueError(f"mollifier width must be positive, got {nu}")
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1) / (nu * nu)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    with np.errstate(divide="ignore"):
        out = np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - r2, 1.0)), 0.0)
    out *= bump_normalization() / (nu * nu)
    if out.ndim == 0:
        return float(out)
    return out
