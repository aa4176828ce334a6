"""Built-in baseline under-sampling patterns.

Every generator returns an exact number of samples: ``round(R * M)`` full rows
for the 1D Gaussian pattern and ``floor(R * M * N)`` pixels for the others.
"""

from __future__ import annotations

import logging
import math
from typing import Any

import numpy as np
from numpy.typing import NDArray

from crossmask.errors import BracketError
from crossmask.fourier import center_first_order, chebyshev_from_dc, distance_from_dc
from crossmask.patterns.base import BasePattern, BinaryMask, target_count, validate_factor

logger = logging.getLogger(__name__)

# Bridson candidate attempts per active point
BRIDSON_K = 30
MAX_BISECTIONS = 40
COUNT_TOLERANCE = 0.01


def gen_gaussian_1d(
    height: int,
    width: int,
    factor: float,
    sigma_rows: float | None = None,
    seed: int = 0,
) -> BinaryMask:
    """Select full k-space rows with Gaussian probability around the DC row.

    ``round(R * M)`` distinct rows are drawn without replacement, each draw
    proportional to a Gaussian pdf centered on row ``M // 2``. The DC row is
    not forced into the pattern.
    """
    validate_factor(factor)
    n_rows = int(math.floor(factor * height + 0.5))
    if n_rows < 1:
        raise ValueError(f"round(R * M) = 0 for R={factor}, M={height}: no rows to sample")
    n_rows = min(n_rows, height)

    sigma = sigma_rows if sigma_rows is not None else height / 6.0
    if sigma <= 0:
        raise ValueError(f"sigma_rows must be positive, got {sigma}")

    offsets = np.arange(height, dtype=np.float64) - height // 2
    pdf = np.exp(-0.5 * (offsets / sigma) ** 2)
    pdf = np.maximum(pdf, np.finfo(np.float64).tiny)
    pdf /= pdf.sum()

    rng = np.random.default_rng(seed)
    rows = rng.choice(height, size=n_rows, replace=False, p=pdf)

    data = np.zeros((height, width), dtype=np.bool_)
    data[np.sort(rows), :] = True
    return BinaryMask(
        data=data,
        factor=n_rows / height,
        kind="gaussian1d",
        seed=seed,
        details={"rows": sorted(int(r) for r in rows), "sigma_rows": sigma},
    )


def gen_center(height: int, width: int, factor: float) -> BinaryMask:
    """Sample the ``floor(R * M * N)`` pixels nearest DC.

    Pixels are ordered by Chebyshev distance to DC, then Euclidean distance,
    then row-major index, which yields a near-square central block.
    """
    validate_factor(factor)
    k = target_count(height, width, factor)
    if k < 1:
        raise ValueError(f"floor(R * M * N) = 0 for R={factor} on {height}x{width}")

    order = center_first_order((height, width), chebyshev_from_dc((height, width)))
    return BinaryMask.from_flat_indices(
        (height, width), order[:k], factor=factor, kind="center"
    )


def _radius_field(
    points: NDArray[np.float64],
    center: NDArray[np.float64],
    r0: float,
    slope: float,
    d_max: float,
) -> NDArray[np.float64]:
    d = np.sqrt(((points - center) ** 2).sum(axis=-1))
    result: NDArray[np.float64] = r0 * (1.0 + slope * d / d_max)
    return result


def _domain_geometry(height: int, width: int) -> tuple[NDArray[np.float64], float]:
    """Continuous DC center and the distance from it to the farthest domain corner."""
    center = np.array([height // 2 + 0.5, width // 2 + 0.5])
    corners = np.array([[0.0, 0.0], [0.0, width], [height, 0.0], [height, width]])
    d_max = float(np.sqrt(((corners - center) ** 2).sum(axis=1)).max())
    return center, d_max


def bridson_darts(
    height: int,
    width: int,
    r0: float,
    slope: float,
    seed: int,
) -> NDArray[np.float64]:
    """Variable-radius Bridson dart throwing on the continuous k-space domain.

    Darts live in ``[0, M) x [0, N)`` (row, column). The exclusion radius grows
    linearly with distance from DC: ``r0 * (1 + slope * d / d_max)``. Two darts
    p, q are always at least ``min(radius(p), radius(q))`` apart. The first
    dart is placed at the DC pixel center.
    """
    rng = np.random.default_rng(seed)
    center, d_max = _domain_geometry(height, width)

    # one dart per cell at most, since every pair is at least r0 apart
    cell = r0 / math.sqrt(2.0)
    grid_rows = int(math.ceil(height / cell))
    grid_cols = int(math.ceil(width / cell))
    grid = np.full((grid_rows, grid_cols), -1, dtype=np.int64)

    capacity = 1024
    points = np.empty((capacity, 2), dtype=np.float64)
    radii = np.empty(capacity, dtype=np.float64)

    points[0] = center
    radii[0] = r0
    n_points = 1
    grid[int(center[0] // cell), int(center[1] // cell)] = 0
    active = [0]
    bounds = np.array([height, width], dtype=np.float64)

    while active:
        slot = int(rng.integers(len(active)))
        p = points[active[slot]]
        rp = radii[active[slot]]

        angles = rng.uniform(0.0, 2.0 * math.pi, BRIDSON_K)
        dists = rp * np.sqrt(rng.uniform(1.0, 4.0, BRIDSON_K))
        cand = p + dists[:, None] * np.column_stack((np.sin(angles), np.cos(angles)))
        inside = np.all((cand >= 0.0) & (cand < bounds), axis=1)
        rc = _radius_field(cand, center, r0, slope, d_max)

        reach = 2.0 * rp + float(rc.max())
        lo = np.maximum(((p - reach) // cell).astype(np.int64), 0)
        hi = np.minimum(((p + reach) // cell).astype(np.int64) + 1, [grid_rows, grid_cols])
        neighbours = grid[lo[0] : hi[0], lo[1] : hi[1]].ravel()
        neighbours = neighbours[neighbours >= 0]

        if neighbours.size:
            q = points[neighbours]
            rq = radii[neighbours]
            gap = np.sqrt(((cand[:, None, :] - q[None, :, :]) ** 2).sum(axis=-1))
            clear = np.all(gap >= np.minimum(rc[:, None], rq[None, :]), axis=1)
        else:
            clear = np.ones(BRIDSON_K, dtype=np.bool_)

        ok = np.flatnonzero(inside & clear)
        if ok.size == 0:
            active[slot] = active[-1]
            active.pop()
            continue

        new = cand[ok[0]]
        if n_points == capacity:
            capacity *= 2
            points = np.resize(points, (capacity, 2))
            radii = np.resize(radii, capacity)
        points[n_points] = new
        radii[n_points] = rc[ok[0]]
        grid[int(new[0] // cell), int(new[1] // cell)] = n_points
        active.append(n_points)
        n_points += 1

    return points[:n_points].copy()


def _rasterize(darts: NDArray[np.float64], height: int, width: int) -> NDArray[np.bool_]:
    data = np.zeros((height, width), dtype=np.bool_)
    rows = np.clip(np.floor(darts[:, 0]).astype(np.int64), 0, height - 1)
    cols = np.clip(np.floor(darts[:, 1]).astype(np.int64), 0, width - 1)
    data[rows, cols] = True
    return data


def gen_poisson_variable_density(
    height: int,
    width: int,
    factor: float,
    r0: float = 1.0,
    seed: int = 0,
) -> BinaryMask:
    """Variable-density Poisson-disc pattern with exact cardinality.

    The density slope ``s`` is found by binary search so the rasterized dart
    count lands within 1% of ``floor(R * M * N)``; the remainder is fixed up by
    adding unsampled pixels (weight ``1 / radius**2``) or removing sampled
    pixels (weight proportional to local density, also ``1 / radius**2``).

    The pre-fix-up darts, the slope and the search trace are kept in
    ``mask.details`` for inspection.
    """
    validate_factor(factor)
    if r0 <= 0:
        raise ValueError(f"r0 must be positive, got {r0}")
    target = target_count(height, width, factor)
    if factor * height * width < 4:
        raise ValueError(f"R * M * N must be at least 4, got {factor * height * width}")

    cache: dict[float, tuple[int, NDArray[np.float64]]] = {}

    def count_at(slope: float) -> int:
        if slope not in cache:
            darts = bridson_darts(height, width, r0, slope, seed)
            cache[slope] = (int(_rasterize(darts, height, width).sum()), darts)
        return cache[slope][0]

    def close_enough(count: int) -> bool:
        return abs(count - target) <= COUNT_TOLERANCE * target

    s_lo, s_hi = 0.0, 1.0
    if count_at(s_lo) < target and not close_enough(count_at(s_lo)):
        raise BracketError(
            f"Poisson-disc search cannot reach {target} samples: "
            f"slope 0 with r0={r0} gives only {count_at(s_lo)}"
        )

    best = s_lo
    if not close_enough(count_at(s_lo)):
        while count_at(s_hi) > target:
            s_hi *= 2.0
            if s_hi > 2.0**30:
                raise BracketError(
                    f"Poisson-disc search failed to bracket {target} samples (slope > 2^30)"
                )
        best = min((s_lo, s_hi), key=lambda s: abs(count_at(s) - target))
        for _ in range(MAX_BISECTIONS):
            if close_enough(count_at(best)):
                break
            mid = 0.5 * (s_lo + s_hi)
            if count_at(mid) > target:
                s_lo = mid
            else:
                s_hi = mid
            if abs(count_at(mid) - target) < abs(count_at(best) - target):
                best = mid

    count, darts = cache[best]
    if not close_enough(count):
        logger.warning(
            "Poisson-disc search ended %d samples from target %d (slope %.4g); fixing up",
            count - target,
            target,
            best,
        )

    data = _rasterize(darts, height, width)
    data = _fix_cardinality(data, target, r0, best, seed)
    return BinaryMask(
        data=data,
        factor=factor,
        kind="poisson",
        seed=seed,
        details={
            "slope": best,
            "r0": r0,
            "pre_fixup_count": count,
            "darts": darts,
            "evaluations": len(cache),
        },
    )


def _fix_cardinality(
    data: NDArray[np.bool_],
    target: int,
    r0: float,
    slope: float,
    seed: int,
) -> NDArray[np.bool_]:
    height, width = data.shape
    _, d_max = _domain_geometry(height, width)
    radius = r0 * (1.0 + slope * distance_from_dc((height, width)) / d_max)
    weight = (1.0 / radius**2).ravel()

    flat = data.ravel().copy()
    current = int(flat.sum())
    rng = np.random.default_rng([seed, 1])

    if current < target:
        pool = np.flatnonzero(~flat)
        p = weight[pool] / weight[pool].sum()
        flat[rng.choice(pool, size=target - current, replace=False, p=p)] = True
    elif current > target:
        pool = np.flatnonzero(flat)
        p = weight[pool] / weight[pool].sum()
        flat[rng.choice(pool, size=current - target, replace=False, p=p)] = False
    return flat.reshape(height, width)


class GaussianRowsPattern(BasePattern):
    """Full rows drawn around the DC row with a Gaussian pdf."""

    name = "gaussian1d"

    def __init__(self, sigma_rows: float | None = None) -> None:
        """Initialize the pattern.

        Args:
            sigma_rows: Standard deviation in rows. Defaults to M / 6.
        """
        self.sigma_rows = sigma_rows

    def generate(self, height: int, width: int, factor: float, seed: int = 0) -> BinaryMask:
        return gen_gaussian_1d(height, width, factor, self.sigma_rows, seed)


class CenterPattern(BasePattern):
    """Central square block ("Square" pattern)."""

    name = "center"

    def generate(self, height: int, width: int, factor: float, seed: int = 0) -> BinaryMask:
        return gen_center(height, width, factor)


class PoissonDiscPattern(BasePattern):
    """Variable-density Poisson-disc pattern."""

    name = "poisson"

    def __init__(self, r0: float = 1.0) -> None:
        self.r0 = r0

    def generate(self, height: int, width: int, factor: float, seed: int = 0) -> BinaryMask:
        return gen_poisson_variable_density(height, width, factor, self.r0, seed)

    def __repr__(self) -> str:
        return f"PoissonDiscPattern(r0={self.r0})"


PATTERNS: dict[str, type[BasePattern]] = {
    GaussianRowsPattern.name: GaussianRowsPattern,
    CenterPattern.name: CenterPattern,
    PoissonDiscPattern.name: PoissonDiscPattern,
}


def create_pattern(kind: str, **params: Any) -> BasePattern:
    """Instantiate a baseline pattern by kind name."""
    try:
        pattern_cls = PATTERNS[kind.lower()]
    except KeyError:
        raise ValueError(
            f"Unknown pattern kind: {kind!r} (expected one of {sorted(PATTERNS)})"
        ) from None
    return pattern_cls(**params)
