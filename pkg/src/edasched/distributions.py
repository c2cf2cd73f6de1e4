"""Synthetic ground-truth uncertainty models for delivery-time vectors.

A CubeMixture concentrates probability on a handful of axis-aligned cubes
of side eps inside the box [0, M]^n, plus a small uniform noise tail over
the whole box. Known event probabilities and conditional means make these
models usable both for driving the training loop and for scoring its
output against the truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ValidationError

_LAWS = ("uniform", "gauss")
_PLACEMENT_TRIES = 20_000


@dataclass(frozen=True)
class CubeMixture:
    """Mixture of axis-aligned cubes with a uniform tail.

    `lows`/`highs` are the authoritative cube extents (centers -/+ eps/2,
    computed once at build time); sampling clamps against them and
    membership tests compare against them, so boundary samples are
    classified consistently. `grid` quantizes every sampled coordinate to
    the nearest multiple, which makes exact repeats possible — required for
    multiplicity tracking downstream. `event_probs` sums to 1 - tail_mass.
    """

    centers: np.ndarray
    lows: np.ndarray
    highs: np.ndarray
    event_probs: np.ndarray
    eps: float
    bound: float
    const: float
    tail_mass: float
    law: str
    sigma: Optional[float]
    grid: Optional[float]
    seed: int
    separated: bool

    @property
    def n(self) -> int:
        return self.centers.shape[1]

    @property
    def f(self) -> int:
        return self.centers.shape[0]

    @property
    def half_width(self) -> float:
        return self.eps / 2.0


def build_cube_mixture(
    n: int,
    f: int,
    eps: float,
    M: float,
    const: float,
    tail_mass: float = 0.0,
    law: str = "uniform",
    grid="auto",
    seed: int = 0,
    separated: bool = True,
    sigma: Optional[float] = None,
) -> CubeMixture:
    """Build a seeded cube mixture.

    Centers are placed so every cube fits inside [0, M]^n; with
    `separated=True` (the default) centers are rejection-sampled to be
    pairwise at least 3*eps apart so cubes cannot interact, otherwise
    overlaps are allowed. Event probabilities are drawn at random, floored
    at const/f and renormalized, so min_i Pr(event i) >= const/f always
    holds; passing const = 1 - tail_mass forces equal probabilities.
    `grid="auto"` selects eps/10.
    """
    if n < 1 or f < 1:
        raise ValidationError("need n >= 1 and f >= 1")
    if eps <= 0.0:
        raise ValidationError(f"eps must be positive, got {eps}")
    if M < eps:
        raise ValidationError(f"cube side eps={eps} does not fit in [0, M]^n with M={M}")
    if not 0.0 <= tail_mass < 1.0:
        raise ValidationError(f"tail_mass must be in [0, 1), got {tail_mass}")
    if law not in _LAWS:
        raise ValidationError(f"unknown within-cube law {law!r}; expected one of {_LAWS}")
    if const <= 0.0 or const > 1.0 - tail_mass:
        raise ValidationError(
            f"const must be in (0, 1 - tail_mass]; got const={const}, tail_mass={tail_mass}"
        )
    if grid == "auto":
        grid_val: Optional[float] = eps / 10.0
    else:
        grid_val = None if grid in (None, 0, 0.0) else float(grid)
    if grid_val is not None and grid_val <= 0.0:
        raise ValidationError(f"grid step must be positive, got {grid_val}")
    sigma_val = None
    if law == "gauss":
        sigma_val = eps / 6.0 if sigma is None else float(sigma)
        if sigma_val <= 0.0:
            raise ValidationError("sigma must be positive for the gauss law")

    rng = np.random.default_rng(seed)
    half = eps / 2.0
    lo_lim, hi_lim = half, M - half
    centers = np.empty((f, n))
    placed = 0
    tries = 0
    while placed < f:
        cand = rng.uniform(lo_lim, hi_lim, size=n) if hi_lim > lo_lim else np.full(n, lo_lim)
        ok = True
        if separated and placed:
            gaps = np.max(np.abs(centers[:placed] - cand), axis=1)
            ok = bool(np.min(gaps) >= 3.0 * eps)
        if ok:
            centers[placed] = cand
            placed += 1
        tries += 1
        if tries > _PLACEMENT_TRIES:
            raise ValidationError(
                f"could not place {f} cubes pairwise 3*eps-separated in [0, {M}]^{n}; "
                "reduce f or eps, or pass separated=False"
            )

    available = 1.0 - tail_mass
    floor = const / f
    w = rng.random(f)
    event_probs = floor + (available - const) * (w / w.sum())

    return CubeMixture(
        centers=centers,
        lows=centers - half,
        highs=centers + half,
        event_probs=event_probs,
        eps=float(eps),
        bound=float(M),
        const=float(const),
        tail_mass=float(tail_mass),
        law=law,
        sigma=sigma_val,
        grid=grid_val,
        seed=int(seed),
        separated=bool(separated),
    )


def _quantize(v: np.ndarray, grid: float) -> np.ndarray:
    # round-half-up to the nearest grid multiple; k/inv rather than k*grid
    # keeps decimal steps exact (12/10 == 1.2 while 12*0.1 does not).
    inv = 1.0 / grid
    return np.floor(v * inv + 0.5) / inv


def sample(mixture: CubeMixture, rng: np.random.Generator) -> tuple[np.ndarray, Optional[int]]:
    """Draw one delivery vector; returns (vector, generating component).

    The component index is None for tail draws. It is carried for scoring
    only — the training loop never sees it.
    """
    u = rng.random()
    acc = 0.0
    comp: Optional[int] = None
    for i in range(mixture.f):
        acc += mixture.event_probs[i]
        if u < acc:
            comp = i
            break
    n = mixture.n
    if comp is None:
        q = mixture.bound * rng.random(n)
        lo = np.zeros(n)
        hi = np.full(n, mixture.bound)
    else:
        lo = mixture.lows[comp]
        hi = mixture.highs[comp]
        if mixture.law == "uniform":
            q = lo + rng.random(n) * (hi - lo)
        else:
            q = mixture.centers[comp] + mixture.sigma * rng.standard_normal(n)
            bad = (q < lo) | (q > hi)
            while bad.any():
                q[bad] = mixture.centers[comp][bad] + mixture.sigma * rng.standard_normal(int(bad.sum()))
                bad = (q < lo) | (q > hi)
    if mixture.grid is not None:
        q = _quantize(q, mixture.grid)
        q = np.minimum(np.maximum(q, lo), hi)
    return np.ascontiguousarray(q), comp


def true_event_of(mixture: CubeMixture, q: np.ndarray) -> Optional[int]:
    """Smallest cube index containing q, or None when q is outside all cubes."""
    qv = np.asarray(q, dtype=np.float64)
    if qv.shape != (mixture.n,):
        raise ValidationError(f"vector has shape {qv.shape}, expected ({mixture.n},)")
    inside = np.all((qv >= mixture.lows) & (qv <= mixture.highs), axis=1)
    hits = np.flatnonzero(inside)
    return int(hits[0]) if hits.size else None


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _coord_mean_quantized(lo: float, hi: float, center: float, mixture: CubeMixture) -> float:
    """Exact mean of one coordinate after quantize-then-clamp.

    Enumerates the finitely many grid cells intersecting [lo, hi], weighs
    each by the law's mass over the cell, and uses the clamped cell value —
    the same clamp the sampler applies.
    """
    g = mixture.grid
    inv = 1.0 / g
    k_lo = int(math.floor(lo * inv + 0.5))
    k_hi = int(math.floor(hi * inv + 0.5))
    if mixture.law == "uniform":
        def cdf(v: float) -> float:
            return (v - lo) / (hi - lo)
    else:
        s = mixture.sigma
        z_lo, z_hi = _norm_cdf((lo - center) / s), _norm_cdf((hi - center) / s)
        span = z_hi - z_lo
        def cdf(v: float) -> float:
            return (_norm_cdf((v - center) / s) - z_lo) / span
    total = 0.0
    acc = 0.0
    for k in range(k_lo, k_hi + 1):
        v_lo = max(lo, (k - 0.5) / inv)
        v_hi = min(hi, (k + 0.5) / inv)
        if v_hi <= v_lo:
            continue
        mass = cdf(v_hi) - cdf(v_lo)
        value = min(max(k / inv, lo), hi)
        acc += mass * value
        total += mass
    return acc / total


def true_conditional_mean(mixture: CubeMixture, i: int) -> np.ndarray:
    """Exact mean of the within-cube sampling law for cube i.

    The symmetric laws have mean equal to the center; with quantization the
    mean is corrected analytically per coordinate.
    """
    if not 0 <= i < mixture.f:
        raise ValidationError(f"event index {i} out of range [0, {mixture.f})")
    if mixture.grid is None:
        return mixture.centers[i].copy()
    return np.array(
        [
            _coord_mean_quantized(
                float(mixture.lows[i, j]), float(mixture.highs[i, j]),
                float(mixture.centers[i, j]), mixture,
            )
            for j in range(mixture.n)
        ]
    )


def true_event_probability(mixture: CubeMixture, i: int) -> float:
    """Probability that a sample lands inside cube i's region.

    Adds the tail's geometric share of the cube to the component weight.
    Assumes separated cubes (no cross-component contribution); grid-boundary
    effects on the tail term are far below any tolerance used here.
    """
    if not 0 <= i < mixture.f:
        raise ValidationError(f"event index {i} out of range [0, {mixture.f})")
    side = mixture.highs[i] - mixture.lows[i]
    tail_share = mixture.tail_mass * float(np.prod(side / mixture.bound))
    return float(mixture.event_probs[i]) + tail_share


def make_sampler(mixture: CubeMixture):
    """Adapter: rng -> delivery vector, dropping the generating component."""

    def sampler(rng: np.random.Generator) -> np.ndarray:
        q, _ = sample(mixture, rng)
        return q

    return sampler
