"""Analytic initial data and field-level norms.

The initial scalar is a finite sum of disjoint "bubbles": rescaled copies of
one smooth radial bump placed along the diagonal of the first quadrant at
geometrically shrinking scales, extended to the plane as an odd function
across both axes.  Bubble n sits at center (4^-(n+2), 4^-(n+2)) with spatial
scale 4^-n and amplitude 4^(-alpha n), weighted by n^(-beta); amplitude
versus scale is exactly balanced for the Holder exponent alpha, which makes
the family the natural probe for borderline-regularity diagnostics.

Norm-side utilities: a sampled lower-bound estimator for Holder seminorms,
L^inf / L^p norms, the Riesz-energy realization of the negative-Sobolev
distance (double integral of f(x) f(y) |x-y|^(-2 alpha)), and mollification
by quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import engine
from .kernels import bump_normalization, eval_mollifier

Vec2 = np.ndarray


# ---------------------------------------------------------------------------
# bump profile and bubbles
# ---------------------------------------------------------------------------


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """C-infinity ramp: 0 for t <= 0, 1 for t >= 1, monotone in between."""
    t = np.asarray(t, dtype=float)
    lo = t <= 0.0
    hi = t >= 1.0
    mid = ~(lo | hi)
    out = np.where(hi, 1.0, 0.0)
    if np.any(mid):
        tm = t[mid]
        with np.errstate(divide="ignore", over="ignore"):
            a = np.exp(-1.0 / tm)
            b = np.exp(-1.0 / (1.0 - tm))
        out[mid] = a / (a + b)
    return out


@dataclass(frozen=True)
class RadialBump:
    """Smooth radial profile, identically 1 inside the inner radius and 0
    outside the outer radius."""

    inner_radius: float = 1.0 / 64.0
    outer_radius: float = 1.0 / 32.0

    def __call__(self, r: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        r = np.asarray(r, dtype=float)
        t = (self.outer_radius - r) / (self.outer_radius - self.inner_radius)
        out = _smoothstep(t)
        if out.ndim == 0:
            return float(out)
        return out


def make_bump() -> RadialBump:
    """Build the standard profile and check its plateau/support sandwich."""
    bump = RadialBump()
    radii = np.linspace(0.0, 1.0 / 16.0, 1000)
    vals = bump(radii)
    if not np.all((vals >= 0.0) & (vals <= 1.0)):
        raise AssertionError("bump profile escapes [0, 1]")
    if not np.all(vals[radii <= bump.inner_radius] == 1.0):
        raise AssertionError("bump profile must be 1 on the inner plateau")
    if not np.all(vals[radii >= bump.outer_radius] == 0.0):
        raise AssertionError("bump profile must vanish beyond the outer radius")
    return bump


@dataclass(frozen=True)
class BubbleSpec:
    """One bubble: index, center on the quadrant diagonal, scale, amplitude."""

    n: int
    center: tuple[float, float]
    scale: float
    amplitude: float

    @property
    def support_radius(self) -> float:
        return self.scale / 32.0

    @property
    def center_array(self) -> np.ndarray:
        return np.array(self.center, dtype=float)


def _bubble(n: int, alpha: float) -> BubbleSpec:
    c = 4.0 ** (-(n + 2))
    return BubbleSpec(n=n, center=(c, c), scale=4.0 ** (-n), amplitude=4.0 ** (-alpha * n))


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialData:
    """Odd-odd multi-scale bubble data.

    Evaluation reduces any point to the first quadrant with sign
    bookkeeping, so values vanish identically on both axes and satisfy
    f(-x1, x2) = f(x1, -x2) = -f(x1, x2).
    """

    n0: int
    N: int
    alpha: float
    beta_amp: float
    bubbles: tuple[BubbleSpec, ...]
    weights: tuple[float, ...]
    bump: RadialBump

    @property
    def support_radius(self) -> float:
        return max(
            float(np.hypot(*b.center)) + b.support_radius for b in self.bubbles
        )

    def value_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        sgn = np.sign(pts[:, 0]) * np.sign(pts[:, 1])
        q = np.abs(pts)
        out = np.zeros(len(pts))
        for w, b in zip(self.weights, self.bubbles):
            dz = q - b.center_array
            rs = b.support_radius
            mask = (np.abs(dz[:, 0]) <= rs) & (np.abs(dz[:, 1]) <= rs)
            if np.any(mask):
                r = np.hypot(dz[mask, 0], dz[mask, 1]) / b.scale
                out[mask] += w * b.amplitude * self.bump(r)
        return sgn * out

    def value(self, x: Vec2) -> float:
        return float(self.value_many(np.asarray(x, dtype=float)[None, :])[0])


def make_initial_data(
    n0: int,
    N: int,
    alpha: float,
    beta_amp: float,
    bump: Optional[RadialBump] = None,
) -> InitialData:
    """Assemble the bubble family n0..N with weights n^(-beta_amp)."""
    if not (isinstance(n0, (int, np.integer)) and isinstance(N, (int, np.integer))):
        raise ValueError("bubble indices must be integers")
    if not 1 <= n0 <= N:
        raise ValueError(f"need 1 <= n0 <= N, got n0={n0}, N={N}")
    if not 0.0 < beta_amp < 0.25:
        raise ValueError(f"beta_amp must lie in (0, 1/4), got {beta_amp}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    bump = bump if bump is not None else make_bump()
    bubbles = tuple(_bubble(n, alpha) for n in range(n0, N + 1))
    weights = tuple(float(n) ** (-beta_amp) for n in range(n0, N + 1))
    for i, bm in enumerate(bubbles):
        for bn in bubbles[i + 1 :]:
            gap = float(np.hypot(*(bm.center_array - bn.center_array)))
            if gap <= (bm.scale + bn.scale) / 32.0:
                raise AssertionError(
                    f"bubble supports {bm.n} and {bn.n} are not disjoint"
                )
    return InitialData(
        n0=int(n0),
        N=int(N),
        alpha=float(alpha),
        beta_amp=float(beta_amp),
        bubbles=bubbles,
        weights=weights,
        bump=bump,
    )


# ---------------------------------------------------------------------------
# generic scalar fields and quadrature regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadRegion:
    """Axis-aligned box carrying a midpoint-grid spacing hint."""

    lo: tuple[float, float]
    hi: tuple[float, float]
    spacing: float
    tag: int = 0


@dataclass(frozen=True)
class ScalarField:
    """Compactly supported field given by a batch evaluator.

    ``regions`` lists boxes that jointly cover the (quadrant) support and
    set the resolution for quadrature-based operations; odd-odd fields keep
    their regions in the closed first quadrant.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    odd_odd: bool = False
    regions: Optional[tuple[QuadRegion, ...]] = None

    def value_many(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(np.atleast_2d(np.asarray(pts, dtype=float))))

    def value(self, x: Vec2) -> float:
        return float(self.value_many(np.asarray(x, dtype=float)[None, :])[0])


FieldLike = Union[InitialData, ScalarField]

_RIESZ_CELLS = 24  # default cells per bubble diameter in Riesz quadratures


def as_field(field: FieldLike) -> ScalarField:
    """View initial data (or any field) through the ScalarField interface."""
    if isinstance(field, ScalarField):
        return field
    if isinstance(field, InitialData):
        regions = tuple(
            QuadRegion(
                lo=(b.center[0] - b.support_radius, b.center[1] - b.support_radius),
                hi=(b.center[0] + b.support_radius, b.center[1] + b.support_radius),
                spacing=2.0 * b.support_radius / _RIESZ_CELLS,
                tag=b.n,
            )
            for b in field.bubbles
        )
        return ScalarField(
            evaluator=field.value_many,
            support_radius=field.support_radius,
            odd_odd=True,
            regions=regions,
        )
    raise TypeError(f"not a field: {type(field)!r}")


def zero_field(like: Optional[ScalarField] = None) -> ScalarField:
    odd = like.odd_odd if like is not None else False
    return ScalarField(
        evaluator=lambda pts: np.zeros(len(np.atleast_2d(pts))),
        support_radius=0.0,
        odd_odd=odd,
        regions=None,
    )


def eval_field(field: FieldLike, x: Vec2) -> Union[float, np.ndarray]:
    """Evaluate at one point (shape (2,)) or a batch (shape (m, 2))."""
    x = np.asarray(x, dtype=float)
    f = field if isinstance(field, InitialData) else as_field(field)
    if x.ndim == 1:
        return f.value(x)
    return f.value_many(x)


# ---------------------------------------------------------------------------
# Holder seminorm estimation (sampled lower bound)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderEstimate:
    """Lower bound of a Holder seminorm with the pair that attains it."""

    exponent: float
    value: float
    witness_pair: tuple[np.ndarray, np.ndarray]


def _pair_quotients(
    field: ScalarField, a: np.ndarray, b: np.ndarray, exponent: float
) -> np.ndarray:
    sep = np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1])
    good = sep > 0.0
    out = np.zeros(len(a))
    if np.any(good):
        fa = field.value_many(a[good])
        fb = field.value_many(b[good])
        out[good] = np.abs(fa - fb) / sep[good] ** exponent
    return out


def _bubble_pairs(
    data: InitialData, rng: np.random.Generator, per_bubble: int
) -> tuple[np.ndarray, np.ndarray]:
    """Stratified pair sample, drawn per bubble in scale-relative coordinates."""
    a_list, b_list = [], []
    band = data.bump.outer_radius - data.bump.inner_radius
    for b in data.bubbles:
        c = b.center_array
        s = b.scale
        rs = b.support_radius
        # forced axis-projected pairs from the center and the plateau edge
        anchors = np.array(
            [c, c + [0.5 * rs, 0.0], c + [0.0, 0.5 * rs], c + [0.4 * rs, 0.4 * rs]]
        )
        for p in anchors:
            a_list.append(p), b_list.append(np.array([p[0], 0.0]))
            a_list.append(p), b_list.append(np.array([0.0, p[1]]))
        # radial pairs across the transition band
        thetas = np.linspace(0.0, np.pi / 2.0, 8)
        for frac in (0.25, 0.5, 1.0, 2.0):
            r_in = data.bump.inner_radius * s
            r_out = r_in + frac * band * s
            dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
            a_list.extend(c + r_in * dirs)
            b_list.extend(c + r_out * dirs)
        # random dyadic-separation pairs inside the support square
        n_scales = 9
        m = max(4, per_bubble // n_scales)
        for k in range(n_scales):
            sep = 4.0 * rs * 2.0 ** (-k)
            base = c + rng.uniform(-rs, rs, size=(m, 2))
            ang = rng.uniform(0.0, 2.0 * np.pi, size=m)
            off = sep * np.stack([np.cos(ang), np.sin(ang)], axis=1)
            a_list.extend(base)
            b_list.extend(base + off)
    return np.array(a_list), np.array(b_list)


def _generic_pairs(
    field: ScalarField,
    rng: np.random.Generator,
    pair_budget: int,
    scale_range: tuple[float, float],
) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = scale_range
    if not 0.0 < lo <= hi:
        raise ValueError(f"invalid scale_range {scale_range}")
    n_scales = max(1, int(np.ceil(np.log2(hi / lo))) + 1)
    m = max(4, pair_budget // n_scales)
    if field.regions:
        boxes = [(np.array(r.lo), np.array(r.hi)) for r in field.regions]
    else:
        r = field.support_radius
        lo_box = np.array([0.0, 0.0]) if field.odd_odd else np.array([-r, -r])
        boxes = [(lo_box, np.array([r, r]))]
    a_list, b_list = [], []
    for k in range(n_scales):
        sep = min(hi, lo * 2.0**k)
        for blo, bhi in boxes:
            base = rng.uniform(blo, bhi, size=(m, 2))
            ang = rng.uniform(0.0, 2.0 * np.pi, size=m)
            off = sep * np.stack([np.cos(ang), np.sin(ang)], axis=1)
            a_list.extend(base)
            b_list.extend(base + off)
            if field.odd_odd:
                a_list.extend(base)
                b_list.extend(np.stack([base[:, 0], np.zeros(m)], axis=1))
                a_list.extend(base)
                b_list.extend(np.stack([np.zeros(m), base[:, 1]], axis=1))
    return np.array(a_list), np.array(b_list)


def holder_seminorm_estimate(
    field: FieldLike,
    exponent: float,
    pair_budget: int = 2048,
    scale_range: Optional[tuple[float, float]] = None,
    seed: int = 0,
) -> HolderEstimate:
    """Max Holder quotient over a stratified pair sample.

    Dyadic separations span the bubble scales (or ``scale_range``), and
    axis-projected pairs (x, (x1, 0)) and (x, (0, x2)) are always included
    for odd-odd fields.  The result is a lower bound of the true seminorm.
    """
    if pair_budget < 1:
        raise ValueError("pair_budget must be >= 1")
    if not 0.0 < exponent <= 1.0:
        raise ValueError(f"exponent must lie in (0, 1], got {exponent}")
    rng = np.random.default_rng(seed)
    if isinstance(field, InitialData):
        per_bubble = max(32, pair_budget // len(field.bubbles))
        a, b = _bubble_pairs(field, rng, per_bubble)
        f = as_field(field)
    else:
        f = as_field(field)
        if scale_range is None:
            r = max(f.support_radius, np.finfo(float).tiny)
            scale_range = (r / 256.0, r)
        a, b = _generic_pairs(f, rng, pair_budget, scale_range)
    if len(a) == 0:
        raise ValueError("empty pair sample")
    q = _pair_quotients(f, a, b, exponent)
    i = int(np.argmax(q))
    return HolderEstimate(
        exponent=exponent, value=float(q[i]), witness_pair=(a[i].copy(), b[i].copy())
    )


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def linf_norm(field: FieldLike) -> float:
    """Sup norm by sampling bubble plateaus/bands or the support grid."""
    if isinstance(field, InitialData):
        radii = np.linspace(0.0, field.bump.outer_radius, 1000)
        profile_max = float(np.max(field.bump(radii)))
        return max(
            w * b.amplitude * profile_max
            for w, b in zip(field.weights, field.bubbles)
        )
    f = as_field(field)
    pts, _ = field_quadrature(f)
    if len(pts) == 0:
        return 0.0
    return float(np.max(np.abs(f.value_many(pts))))


def _profile_power_mass(bump: RadialBump, p: float, cells: int = 384) -> float:
    """Integral of bump(|z|)^p over the plane (reference scale)."""
    r = bump.outer_radius
    h = 2.0 * r / cells
    g = (np.arange(cells) + 0.5) * h - r
    xx, yy = np.meshgrid(g, g, indexing="ij")
    vals = bump(np.hypot(xx, yy)) ** p
    return float(np.sum(vals) * h * h)


def lp_norm(field: FieldLike, p: float) -> float:
    """L^p norm; for bubble data, per-bubble quadrature summed over the four
    quadrant images."""
    if p <= 0:
        raise ValueError("p must be positive")
    if isinstance(field, InitialData):
        mass = _profile_power_mass(field.bump, p)
        total = 4.0 * sum(
            (w * b.amplitude) ** p * b.scale**2 * mass
            for w, b in zip(field.weights, field.bubbles)
        )
        return float(total ** (1.0 / p))
    f = as_field(field)
    pts, w = field_quadrature(f)
    if len(pts) == 0:
        return 0.0
    total = float(np.sum(np.abs(f.value_many(pts)) ** p * w))
    if f.odd_odd:
        total *= 4.0
    return float(total ** (1.0 / p))


# ---------------------------------------------------------------------------
# Riesz energy / negative-Sobolev distance
# ---------------------------------------------------------------------------


def _region_grid(region: QuadRegion) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(region.lo, dtype=float)
    hi = np.asarray(region.hi, dtype=float)
    side = hi - lo
    n = np.maximum(4, np.ceil(side / region.spacing).astype(int))
    hx, hy = side / n
    gx = lo[0] + (np.arange(n[0]) + 0.5) * hx
    gy = lo[1] + (np.arange(n[1]) + 0.5) * hy
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return pts, np.full(len(pts), hx * hy)


def field_quadrature(
    fieldA: FieldLike, fieldB: Optional[FieldLike] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint quadrature covering the support of one field or of a pair.

    Regions sharing a tag (same bubble) are merged into their common
    bounding box at the finer spacing, so a field and a derived field (e.g.
    its mollification) can be integrated on one grid.
    """
    fa = as_field(fieldA)
    regions: dict[int, QuadRegion] = {}
    order: list[int] = []

    def absorb(f: ScalarField) -> None:
        if f.regions is None:
            if f.support_radius == 0.0:
                return
            r = f.support_radius
            lo = (0.0, 0.0) if f.odd_odd else (-r, -r)
            regs: Sequence[QuadRegion] = (
                QuadRegion(lo=lo, hi=(r, r), spacing=2.0 * r / 128.0, tag=-1),
            )
        else:
            regs = f.regions
        for reg in regs:
            if reg.tag in regions:
                old = regions[reg.tag]
                regions[reg.tag] = QuadRegion(
                    lo=(min(old.lo[0], reg.lo[0]), min(old.lo[1], reg.lo[1])),
                    hi=(max(old.hi[0], reg.hi[0]), max(old.hi[1], reg.hi[1])),
                    spacing=min(old.spacing, reg.spacing),
                    tag=reg.tag,
                )
            else:
                regions[reg.tag] = reg
                order.append(reg.tag)

    absorb(fa)
    if fieldB is not None:
        absorb(as_field(fieldB))
    if not regions:
        return np.zeros((0, 2)), np.zeros(0)
    pts_list, w_list = [], []
    for tag in order:
        pts, w = _region_grid(regions[tag])
        pts_list.append(pts)
        w_list.append(w)
    return np.concatenate(pts_list), np.concatenate(w_list)


def riesz_energy(
    points: np.ndarray,
    weights: np.ndarray,
    values: np.ndarray,
    alpha: float,
    odd_odd: bool = False,
) -> float:
    """Double-sum Riesz energy of a sampled field.

    The diagonal singularity is replaced by the exact integral of
    |z|^(-2 alpha) over the disk inscribed in each cell; for odd-odd data
    the points live in the first quadrant and the plane energy folds onto a
    four-term image kernel.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    points = np.ascontiguousarray(points, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    values = np.ascontiguousarray(values, dtype=float)
    if len(points) == 0:
        return 0.0
    self_coeff = (2.0 * np.pi / (2.0 - 2.0 * alpha)) * (
        np.sqrt(weights) / 2.0
    ) ** (2.0 - 2.0 * alpha)
    if odd_odd:
        rows = engine.riesz_rows_oddodd(points, weights, values, alpha, self_coeff)
    else:
        rows = engine.riesz_rows_plain(points, weights, values, alpha, self_coeff)
    return float(np.sum(rows))


def riesz_distance(
    fieldA: FieldLike,
    fieldB: Optional[FieldLike],
    alpha: float,
    quad: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> float:
    """Negative-Sobolev distance of two fields via the Riesz double integral.

    Computed as sqrt of the energy of (A - B) on a shared product
    quadrature (normalization constant 1).  Raises ArithmeticError if the
    quadrature returns an energy below -1e-8 (inconsistent sampling).
    """
    fa = as_field(fieldA)
    fb = as_field(fieldB) if fieldB is not None else zero_field(fa)
    if fb.support_radius > 0.0 and fa.odd_odd != fb.odd_odd:
        raise ValueError("cannot mix odd-odd and plain fields in one distance")
    if quad is None:
        quad = field_quadrature(fa, fb if fb.support_radius > 0.0 else None)
    points, weights = quad
    diff = fa.value_many(points) - fb.value_many(points)
    energy = riesz_energy(points, weights, diff, alpha, odd_odd=fa.odd_odd)
    scale = float(np.sum(np.abs(diff) ** 2 * weights))
    if energy < -1.0e-8 * max(1.0, scale):
        raise ArithmeticError(f"Riesz quadrature returned negative energy {energy}")
    return float(np.sqrt(max(energy, 0.0)))


# ---------------------------------------------------------------------------
# mollification
# ---------------------------------------------------------------------------


def mollify(field: FieldLike, nu: float, conv_cells: int = 24) -> ScalarField:
    """Convolve with the standard mollifier of width nu by quadrature.

    The stencil weights are normalized to unit mass so constants are
    reproduced; the support inflates by nu (regions clipped to the first
    quadrant for odd-odd fields).
    """
    if nu <= 0.0:
        raise ValueError(f"mollifier width must be positive, got {nu}")
    f = as_field(field)
    h = 2.0 * nu / conv_cells
    g = (np.arange(conv_cells) + 0.5) * h - nu
    xx, yy = np.meshgrid(g, g, indexing="ij")
    offsets = np.stack([xx.ravel(), yy.ravel()], axis=1)
    wts = eval_mollifier(nu, offsets) * h * h
    keep = wts > 0.0
    offsets, wts = offsets[keep], wts[keep]
    wts = wts / np.sum(wts)

    def evaluator(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        acc = np.zeros(len(pts))
        for z, w in zip(offsets, wts):
            acc += w * f.value_many(pts - z)
        return acc

    regions = None
    if f.regions is not None:
        regions = tuple(
            QuadRegion(
                lo=(
                    max(0.0, r.lo[0] - nu) if f.odd_odd else r.lo[0] - nu,
                    max(0.0, r.lo[1] - nu) if f.odd_odd else r.lo[1] - nu,
                ),
                hi=(r.hi[0] + nu, r.hi[1] + nu),
                spacing=r.spacing,
                tag=r.tag,
            )
            for r in f.regions
        )
    return ScalarField(
        evaluator=evaluator,
        support_radius=f.support_radius + nu,
        odd_odd=f.odd_odd,
        regions=regions,
    )


__all__ = [
    "RadialBump",
    "BubbleSpec",
    "InitialData",
    "ScalarField",
    "QuadRegion",
    "HolderEstimate",
    "make_bump",
    "make_initial_data",
    "as_field",
    "zero_field",
    "eval_field",
    "holder_seminorm_estimate",
    "linf_norm",
    "lp_norm",
    "field_quadrature",
    "riesz_energy",
    "riesz_distance",
    "mollify",
    "bump_normalization",
]
