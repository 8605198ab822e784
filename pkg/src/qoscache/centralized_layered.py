"""General centralized scheme for K users and N files.

The problem splits into independent per-layer delivery problems plus a
cache-allocation problem across layers:

* each quality layer k is wanted by the ``L_k = K - k + 1`` users with at
  least that quality target;
* sorting the caches those users devote to the layer and differencing
  restores symmetry, cutting the layer into ``L_k`` sub-layers, each
  cached by an equal amount on a suffix of the audience;
* each sub-layer has a convex piecewise-linear delivery-rate function of
  its size, built as the lower convex envelope of known operating points
  (uncoded-prefix coded delivery, coded placement, group-based delivery);
* sizing the sub-layers is then a separable convex program solved exactly
  by greedy slope water-filling.

Two heuristics allocate each user's cache across layers: proportional to
layer sizes (PCA) or lowest layers first (OCA); memory sharing over a
cache-scale sweep combines them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .bounds import best_lower_bound
from .model import CacheModelError, RateReport, Scenario, layer_increments

_BREAKPOINT_TOL = 1e-12


class NotABreakpoint(CacheModelError):
    """The closed-form coded-delivery rate is exact only at its corner points."""


class CflNotApplicable(CacheModelError):
    """Coded placement needs enough audience, files and sub-layer size."""


class GbcNotApplicable(CacheModelError):
    """Group-based delivery needs an audience larger than the file count."""


class AllRatesZero(CacheModelError):
    """Proportional allocation needs a positive top rate."""


@dataclass(frozen=True)
class LayerAllocation:
    """Cache (bits/sample) each user devotes to each layer.

    ``matrix[k][j]`` is what user k+1 gives layer j+1; users never fund
    layers above their own quality target.
    """

    matrix: tuple[tuple[float, ...], ...]

    def validate(self, s: Scenario) -> None:
        for k, row in enumerate(self.matrix):
            if len(row) != s.num_users:
                raise CacheModelError("allocation matrix must be K x K")
            if any(a < -1e-12 for a in row):
                raise CacheModelError(f"negative allocation for user {k + 1}")
            if sum(row) > s.cache_sizes[k] + 1e-9:
                raise CacheModelError(
                    f"user {k + 1} allocates {sum(row)} > cache {s.cache_sizes[k]}"
                )
            if any(row[j] > 1e-12 for j in range(k + 1, s.num_users)):
                raise CacheModelError(
                    f"user {k + 1} funds a layer above its quality target"
                )

    def layer_column(self, layer: int) -> tuple[float, ...]:
        """Allocations of users layer..K to the given 1-based layer."""
        return tuple(self.matrix[k][layer - 1] for k in range(layer - 1, len(self.matrix)))


@dataclass(frozen=True)
class SublayerProfile:
    """Bookkeeping for one sub-layer of one layer."""

    layer: int
    index: int
    audience: int
    cached_audience: int
    cache: float
    size: float


@dataclass(frozen=True)
class PiecewiseLinearRate:
    """Convex piecewise-linear function through sorted breakpoints.

    Evaluation interpolates between breakpoints and extends past the last
    one with ``final_slope``.  Instances built by :func:`lower_envelope`
    are convex, nondecreasing and pass through (0, 0).
    """

    breakpoints: tuple[tuple[float, float], ...]
    final_slope: float

    def value(self, r: float) -> float:
        pts = self.breakpoints
        if r <= pts[0][0]:
            return pts[0][1]
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if r <= x1:
                return y0 + (y1 - y0) * (r - x0) / (x1 - x0)
        xl, yl = pts[-1]
        return yl + self.final_slope * (r - xl)

    def segments(self) -> list[tuple[float, float]]:
        """(slope, width) pieces from r = 0 upward; the last width is inf."""
        out = []
        pts = self.breakpoints
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            out.append(((y1 - y0) / (x1 - x0), x1 - x0))
        out.append((self.final_slope, math.inf))
        return out

    def is_convex(self, tol: float = 1e-9) -> bool:
        slopes = [s for s, _ in self.segments()]
        return all(b >= a - tol for a, b in zip(slopes, slopes[1:]))


def lower_envelope(
    points: Sequence[tuple[float, float]],
    rays: Sequence[tuple[float, float, float]],
    r_hi: float,
) -> PiecewiseLinearRate:
    """Lower convex envelope of achievable points and rays.

    ``rays`` are (anchor_r, anchor_value, slope) triples valid for
    r >= anchor_r.  Mixtures of any two operating points are achievable by
    memory sharing, so the envelope is the lower convex hull.  Rays are
    realized as their anchor plus a far sample; the horizon is pushed far
    enough past ``r_hi`` and every anchor that the asymptotically cheapest
    ray owns the final hull edge.
    """
    pts = [(0.0, 0.0)]
    pts.extend((float(x), float(y)) for x, y in points)
    horizon = 2.0
    for x, y in pts:
        horizon = max(horizon, 2 * x + 1)
    for ax, ay, _ in rays:
        horizon = max(horizon, 2 * ax + 1)
    horizon = max(horizon, 2 * r_hi + 1)
    for ax, ay, slope in rays:
        horizon = max(horizon, 2 * (ax + ay + 1) / max(slope, 1e-9))
    horizon *= 8
    for ax, ay, slope in rays:
        pts.append((ax, ay))
        pts.append((ax + horizon, ay + slope * horizon))

    pts.sort()
    dedup: list[tuple[float, float]] = []
    for x, y in pts:
        if dedup and abs(x - dedup[-1][0]) < 1e-15:
            dedup[-1] = (dedup[-1][0], min(dedup[-1][1], y))
        else:
            dedup.append((x, y))

    hull: list[tuple[float, float]] = []
    for p in dedup:
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            # pop hull[-1] when it lies on or above the chord hull[-2] -> p
            if (y1 - y0) * (p[0] - x0) >= (p[1] - y0) * (x1 - x0) - 1e-15:
                hull.pop()
            else:
                break
        hull.append(p)

    if len(hull) >= 2:
        (x0, y0), (x1, y1) = hull[-2], hull[-1]
        final_slope = (y1 - y0) / (x1 - x0)
        hull.pop()  # drop the artificial horizon sample, keep its slope
    else:
        final_slope = 0.0
    return PiecewiseLinearRate(tuple(hull), final_slope)


def sublayer_decompose(layer_caches: Sequence[float]) -> tuple[float, ...]:
    """Cut one layer into sub-layers with symmetric cache budgets.

    Input: the cache each audience member devotes to the layer.  Sorting
    ascending (stable in the original order) and differencing yields the
    per-user budget of each sub-layer: sub-layer i is funded with the i-th
    difference by the audience suffix that can afford it.
    """
    ordered = sorted(float(c) for c in layer_caches)
    out = []
    previous = 0.0
    for c in ordered:
        out.append(c - previous)
        previous = c
    return tuple(out)


def rate_man(audience: int, index: int, cache: float, size: float, num_files: int) -> float:
    """Uncoded-prefix coded-delivery rate of one sub-layer at a corner point.

    ``audience`` is the layer audience L, ``index`` the 1-based sub-layer
    number i; the ``L + 1 - i`` cached users hold ``cache`` each and the
    remaining ``i - 1`` are served by plain unicast.  Exact only when
    ``size`` makes ``cache * cached / (size * N)`` a whole number, i.e. at
    the classic corner points; in between, memory sharing (the envelope)
    applies.
    """
    if size < 0:
        raise NotABreakpoint(f"negative sub-layer size {size}")
    if size == 0:
        return 0.0
    cached = audience + 1 - index
    if cache == 0.0:
        raise NotABreakpoint("with zero cache the only corner point is size 0")
    t = cache * cached / (size * num_files)
    if abs(t - round(t)) > _BREAKPOINT_TOL * max(1.0, t) or not (1 <= round(t) <= cached):
        raise NotABreakpoint(
            f"size {size} is not a corner point for cache {cache}, "
            f"audience {cached}, N {num_files}"
        )
    coded = (
        size
        * cached
        * (1 - cache / (size * num_files))
        / (1 + cache * cached / (size * num_files))
    )
    return (index - 1) * size + coded


def rate_cfl(audience: int, index: int, cache: float, size: float, num_files: int) -> float:
    """Coded-placement delivery rate ``N * size - (N - i + 1) * cache``.

    Valid when the audience is at least the file count, the size is at
    least ``cache * cached`` and at most ``N`` sub-layer users are
    uncached (at ``i - 1 = N`` the formula degenerates to broadcasting
    every file's sub-layer in full, which is still achievable).
    """
    cached = audience + 1 - index
    if audience < num_files:
        raise CflNotApplicable(
            f"needs audience >= num_files, got {audience} < {num_files}"
        )
    if index - 1 > num_files:
        raise CflNotApplicable(f"too many uncached users ({index - 1} > {num_files})")
    if size < cache * cached - _BREAKPOINT_TOL:
        raise CflNotApplicable(
            f"needs size >= cache * cached audience, got {size} < {cache * cached}"
        )
    return num_files * size - (num_files - index + 1) * cache


def rate_gbc(audience: int, index: int, cache: float, num_files: int) -> float:
    """Group-based delivery rate at its single operating point.

    The point sits at ``size = cache * cached / N`` and beats the plain
    coded-delivery corner there whenever the cached audience exceeds the
    file count by at least two.
    """
    cached = audience + 1 - index
    if not (index - 1 < num_files and cached > num_files >= 3):
        raise GbcNotApplicable(
            f"needs uncached < N and cached audience > N >= 3, got "
            f"i-1={index - 1}, cached={cached}, N={num_files}"
        )
    size = cache * cached / num_files
    return (index - 1) * size + num_files * size - num_files * (num_files + 1) * size / (
        2 * cached
    )


def sublayer_rate_function(
    audience: int, index: int, cache: float, num_files: int, r_max: float
) -> PiecewiseLinearRate:
    """Convex envelope of every known operating point for one sub-layer.

    Candidates are the coded-delivery corner points, the coded-placement
    ray (slope N from its anchor) when applicable, the group-based point
    when applicable, and otherwise a linear tail continuing past the last
    corner with slope ``i - 1 + cached`` (unicast the uncovered remainder
    to the cached audience).
    """
    if r_max <= 0:
        r_max = 1.0
    cached = audience + 1 - index
    points: list[tuple[float, float]] = []
    if cache > 0:
        for t in range(cached, 0, -1):
            size = cache * cached / (t * num_files)
            coded = size * (cached - t) / (1 + t)
            points.append((size, (index - 1) * size + coded))
    rays: list[tuple[float, float, float]] = []
    if audience >= num_files and index - 1 < num_files:
        anchor = cache * cached
        rays.append(
            (anchor, num_files * anchor - (num_files - index + 1) * cache, float(num_files))
        )
    else:
        if cache > 0:
            top = cache * cached / num_files
            corner = (index - 1) * top + top * (cached - 1) / 2
        else:
            top, corner = 0.0, 0.0
        rays.append((top, corner, float(index - 1 + cached)))
    if index - 1 < num_files and cached > num_files >= 3 and cache > 0:
        size = cache * cached / num_files
        points.append((size, rate_gbc(audience, index, cache, num_files)))
    env = lower_envelope(points, rays, r_max)
    if not env.is_convex():
        raise CacheModelError("sub-layer envelope failed its convexity check")
    return env


def optimize_layer_split(
    audience: int,
    sublayer_caches: Sequence[float],
    num_files: int,
    layer_size: float,
) -> tuple[tuple[float, ...], float]:
    """Split one layer across its sub-layers to minimize total delivery rate.

    Each sub-layer's rate function is convex piecewise-linear, so the
    separable program ``min sum_i f_i(r_i) s.t. sum r_i = layer_size``
    is solved exactly by pouring mass onto the globally cheapest marginal
    slope first.  Ties break deterministically toward lower sub-layer
    indices.  Returns the split and the optimal objective.
    """
    count = len(sublayer_caches)
    if count != audience:
        raise CacheModelError(
            f"expected one cache value per sub-layer ({audience}), got {count}"
        )
    split = [0.0] * count
    if layer_size <= 0:
        return tuple(split), 0.0
    envelopes = [
        sublayer_rate_function(audience, i + 1, sublayer_caches[i], num_files, layer_size)
        for i in range(count)
    ]
    queues = [env.segments() for env in envelopes]
    cursor = [0] * count
    remaining = layer_size
    total = 0.0
    while remaining > 1e-15:
        best = None
        for i in range(count):
            slope, width = queues[i][cursor[i]]
            if best is None or slope < best[0] - 1e-15:
                best = (slope, i, width)
        slope, i, width = best
        take = min(width, remaining)
        split[i] += take
        total += slope * take
        remaining -= take
        if take >= width:
            cursor[i] += 1
    return tuple(split), total


def brute_force_layer_split(
    audience: int,
    sublayer_caches: Sequence[float],
    num_files: int,
    layer_size: float,
    step: float,
) -> tuple[tuple[float, ...], float]:
    """Grid-search fallback oracle for :func:`optimize_layer_split`."""
    count = len(sublayer_caches)
    envelopes = [
        sublayer_rate_function(audience, i + 1, sublayer_caches[i], num_files, layer_size)
        for i in range(count)
    ]
    steps = int(round(layer_size / step))
    best_split: tuple[float, ...] = ()
    best_value = math.inf

    def recurse(idx: int, left: int, chosen: list[int]) -> None:
        nonlocal best_split, best_value
        if idx == count - 1:
            alloc = chosen + [left]
            value = sum(envelopes[i].value(alloc[i] * step) for i in range(count))
            if value < best_value - 1e-15:
                best_value = value
                best_split = tuple(a * step for a in alloc)
            return
        for take in range(left + 1):
            recurse(idx + 1, left - take, chosen + [take])

    recurse(0, steps, [])
    return best_split, best_value


def pca_allocation(s: Scenario) -> LayerAllocation:
    """Proportional cache allocation: user k funds layer i with its share
    ``(r_i - r_{i-1}) / r_k`` of M_k, for every layer it may request."""
    if s.top_rate <= 0:
        raise AllRatesZero("proportional allocation needs r_K > 0")
    increments = layer_increments(s)
    matrix = []
    for k in range(1, s.num_users + 1):
        rk = s.layer_rates[k - 1]
        mk = s.cache_sizes[k - 1]
        row = [0.0] * s.num_users
        if rk > 0:
            for i in range(1, k + 1):
                row[i - 1] = increments[i - 1] / rk * mk
        matrix.append(tuple(row))
    alloc = LayerAllocation(tuple(matrix))
    alloc.validate(s)
    return alloc


def oca_allocation(s: Scenario) -> LayerAllocation:
    """Ordered cache allocation: lowest layers saturate first.

    User k fills layer j to saturation ``N * (r_j - r_{j-1})`` before
    layer j+1 receives anything; cache beyond ``N * r_k`` stays unused.
    """
    n = s.num_files
    increments = layer_increments(s)
    matrix = []
    for k in range(1, s.num_users + 1):
        row = [0.0] * s.num_users
        left = s.cache_sizes[k - 1]
        for i in range(1, k + 1):
            full = n * increments[i - 1]
            take = min(left, full)
            row[i - 1] = take
            left -= take
            if left <= 0:
                break
        matrix.append(tuple(row))
    alloc = LayerAllocation(tuple(matrix))
    alloc.validate(s)
    return alloc


def layer_sublayer_profiles(
    s: Scenario, alloc: LayerAllocation, layer: int
) -> tuple[SublayerProfile, ...]:
    """Profiles of the given layer's sub-layers under an allocation."""
    audience = s.num_users - layer + 1
    caches = sublayer_decompose(alloc.layer_column(layer))
    size = layer_increments(s)[layer - 1]
    split, _ = optimize_layer_split(audience, caches, s.num_files, size)
    return tuple(
        SublayerProfile(
            layer=layer,
            index=i + 1,
            audience=audience,
            cached_audience=audience - i,
            cache=caches[i],
            size=split[i],
        )
        for i in range(audience)
    )


def total_rate_centralized(s: Scenario, alloc: LayerAllocation) -> float:
    """Total delivery rate: optimized per-layer rates summed over layers."""
    alloc.validate(s)
    increments = layer_increments(s)
    total = 0.0
    for layer in range(1, s.num_users + 1):
        size = increments[layer - 1]
        if size <= 0:
            continue
        audience = s.num_users - layer + 1
        caches = sublayer_decompose(alloc.layer_column(layer))
        _, rate = optimize_layer_split(audience, caches, s.num_files, size)
        total += rate
    return total


def _scaled(s: Scenario, scale: float) -> Scenario:
    return Scenario(
        s.num_files,
        s.num_users,
        s.layer_rates,
        tuple(m * scale for m in s.cache_sizes),
        s.successively_refinable,
    )


def _rate_both(s: Scenario) -> tuple[float, float]:
    return (
        total_rate_centralized(s, pca_allocation(s)),
        total_rate_centralized(s, oca_allocation(s)),
    )


def memory_sharing_rate(s: Scenario, grid_points: int = 101) -> float:
    """Best rate at the scenario's own cache sizes on the scale-sweep envelope.

    The scenario's cache vector anchors a one-parameter family M(scale);
    both allocators are evaluated on a scale grid, the pointwise minimum
    is convexified over the scale, and the envelope is read off at
    scale 1.  Any point on the envelope is achievable by sharing the cache
    between the two endpoint configurations.
    """
    if max(s.cache_sizes) <= 0 or s.top_rate <= 0:
        return min(_rate_both(s))
    full = max(
        s.num_files * r / m
        for r, m in zip(s.layer_rates, s.cache_sizes)
        if m > 0
    )
    hi = max(1.0, full)
    grid = sorted({round(hi * j / (grid_points - 1), 15) for j in range(grid_points)} | {1.0})
    curve = [(lam, min(_rate_both(_scaled(s, lam)))) for lam in grid]
    hull: list[tuple[float, float]] = []
    for p in curve:
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            if (y1 - y0) * (p[0] - x0) >= (p[1] - y0) * (x1 - x0) - 1e-15:
                hull.pop()
            else:
                break
        hull.append(p)
    for (x0, y0), (x1, y1) in zip(hull, hull[1:]):
        if x0 <= 1.0 <= x1:
            if x1 == x0:
                return min(y0, y1)
            return y0 + (y1 - y0) * (1.0 - x0) / (x1 - x0)
    return hull[-1][1]


def best_centralized(s: Scenario, grid_points: int = 101) -> RateReport:
    """Minimum of PCA, OCA and their memory-sharing combination."""
    pca, oca = _rate_both(s)
    shared = memory_sharing_rate(s, grid_points)
    bound = best_lower_bound(s)
    rate = min(pca, oca, shared)
    if shared < min(pca, oca) - 1e-12:
        scheme = "centralized-pca+oca-sharing"
    elif pca <= oca:
        scheme = "centralized-pca"
    else:
        scheme = "centralized-oca"
    return RateReport(
        scheme=scheme,
        rate=rate,
        bound=bound,
        gap=rate - bound,
        bound_informational=not s.successively_refinable,
    )
