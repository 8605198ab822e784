"""Exact centralized schemes for the two small settings.

Two constructions live here:

* ``N = K = 2``: a five-case placement over eight named segments per file
  whose delivery rate meets the combined lower bound exactly for
  successively refinable sources (every case rate equals the binding bound
  term, verified termwise in the tests).

* ``K = 2`` with ``N >= 2`` files: a coded-delivery placement over six
  named per-file segments, with a five-region rate map and a closed-form
  optimality gap inside the two small-cache regions.

Placements are returned symbolically as :class:`PlacementSpec`; the bit
simulator materializes them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .model import (
    CacheModelError,
    NotTwoUsers,
    Scenario,
    WrongShape,
)


class OutOfRegion(CacheModelError):
    """Gap analysis is defined only inside the two small-cache regions."""


class NotRefinable(CacheModelError):
    """Gap analysis compares against bounds stated in rate-distortion optima."""


class Case2x2(enum.Enum):
    """Cache-capacity cases of the two-file two-user scheme."""

    CASE_I = 1
    CASE_II = 2
    CASE_III = 3
    CASE_IV = 4
    CASE_V = 5


@dataclass(frozen=True)
class Segment:
    """One named placement segment.

    ``files`` lists the files holding a same-named copy of this segment.
    ``owners`` is the set of users caching it.  When ``xor_coded`` is set
    the owners store the XOR of the files' copies (one cache slot instead
    of ``len(files)``).
    """

    name: str
    size: float
    owners: frozenset[int]
    files: tuple[int, ...]
    xor_coded: bool = False


@dataclass(frozen=True)
class PlacementSpec:
    """Symbolic cache placement: a list of segments plus helpers."""

    segments: tuple[Segment, ...]

    def size(self, name: str) -> float:
        for seg in self.segments:
            if seg.name == name:
                return seg.size
        raise KeyError(name)

    def cache_load(self, user: int) -> float:
        """Bits/sample stored by ``user`` (an XOR pair costs one copy)."""
        total = 0.0
        for seg in self.segments:
            if user in seg.owners:
                total += seg.size if seg.xor_coded else seg.size * len(seg.files)
        return total

    def file_total(self, file_index: int) -> float:
        return sum(seg.size for seg in self.segments if file_index in seg.files)

    def validate(self, s: Scenario) -> None:
        """Assert the cache-budget and per-file partition invariants."""
        for seg in self.segments:
            if seg.size < -1e-12:
                raise CacheModelError(f"segment {seg.name} has size {seg.size}")
        for user in range(1, s.num_users + 1):
            load = self.cache_load(user)
            if load > s.cache_sizes[user - 1] + 1e-12:
                raise CacheModelError(
                    f"user {user} stores {load} > cache {s.cache_sizes[user - 1]}"
                )
        for f in range(s.num_files):
            total = self.file_total(f)
            if abs(total - s.top_rate) > 1e-9:
                raise CacheModelError(
                    f"file {f} segments sum to {total}, expected {s.top_rate}"
                )


def classify_2x2(m1: float, m2: float, r1: float, r2: float) -> Case2x2:
    """Return the unique case for the given caches and rates.

    The conditions are checked in case order, so boundary points land in
    the lowest-index case; the rate map is continuous across boundaries,
    making the tie-break observationally irrelevant.
    """
    if m1 + m2 <= r1:
        return Case2x2.CASE_I
    if m1 <= r1 and m2 <= 2 * r2 - r1:
        return Case2x2.CASE_II
    if m1 > r1 and m2 <= 2 * r2 and m2 - m1 <= 2 * (r2 - r1):
        return Case2x2.CASE_III
    if m1 <= 2 * r1 and m2 > 2 * r2 - r1 and m2 - m1 > 2 * (r2 - r1):
        return Case2x2.CASE_IV
    return Case2x2.CASE_V


def _segments_2x2(sizes: dict[str, float]) -> PlacementSpec:
    """Assemble the eight-segment spec from base/refinement sizes 1..8."""
    owners = {
        1: frozenset({1}),
        2: frozenset({2}),
        3: frozenset({1}),
        4: frozenset({2}),
        5: frozenset({1, 2}),
        6: frozenset(),
        7: frozenset({2}),
        8: frozenset(),
    }
    segs = []
    for idx in range(1, 9):
        segs.append(
            Segment(
                name=f"seg{idx}",
                size=max(0.0, sizes.get(f"seg{idx}", 0.0)),
                owners=owners[idx],
                files=(0, 1),
                xor_coded=idx in (1, 2),
            )
        )
    return PlacementSpec(tuple(segs))


def placement_2x2(s: Scenario) -> PlacementSpec:
    """Segment sizes for the classified case of the two-file two-user scheme.

    Segments 1..6 partition each file's base layer and 7..8 its refinement
    layer; same-named segments of the two files have equal sizes and
    segments 3 and 4 match so the delivery XOR pairs line up.  User 1
    caches the XOR of the files' seg1 plus plain seg3/seg5; user 2 caches
    the XOR of seg2 plus plain seg4/seg5/seg7.

    Two boundary strips need sizes other than the straightforward ones:
    in case ii with M1 + M2 > 2 r2 - r1 the refinement is already fully
    cached, so the surplus becomes plain seg3/seg4 pairs, and in case iv
    with M1 > r1 the surplus of user 1 becomes seg5 shared by both users.
    The case rate formulas hold unchanged on both strips.
    """
    if s.num_files != 2 or s.num_users != 2:
        raise WrongShape(f"need N=K=2, got N={s.num_files}, K={s.num_users}")
    r1, r2 = s.layer_rates
    m1, m2 = s.cache_sizes
    case = classify_2x2(m1, m2, r1, r2)
    sizes: dict[str, float] = {}
    if case is Case2x2.CASE_I:
        sizes = {
            "seg1": m1,
            "seg2": m2,
            "seg6": r1 - m1 - m2,
            "seg8": r2 - r1,
        }
    elif case is Case2x2.CASE_II:
        if m1 + m2 <= 2 * r2 - r1:
            half = (m1 + m2 - r1) / 2
            sizes = {
                "seg1": m1,
                "seg2": r1 - m1,
                "seg7": half,
                "seg8": r2 - r1 - half,
            }
        else:
            pair = (m1 + m2 - (2 * r2 - r1)) / 2
            sizes = {
                "seg1": 2 * r2 - r1 - m2,
                "seg2": r1 - m1,
                "seg3": pair,
                "seg4": pair,
                "seg7": r2 - r1,
            }
    elif case is Case2x2.CASE_III:
        l1 = max(0.0, min(m1 - r1, m2 / 2 - (r2 - r1)))
        l2 = max(0.0, m2 / 2 - (r2 - r1) - l1)
        l3 = min(r2 - r1, m2 / 2)
        sizes = {
            "seg1": r1 - l1 - 2 * l2,
            "seg3": l2,
            "seg4": l2,
            "seg5": l1,
            "seg7": l3,
            "seg8": r2 - r1 - l3,
        }
    elif case is Case2x2.CASE_IV:
        pair = min(m1, 2 * r1 - m1) / 2
        sizes = {
            "seg2": max(0.0, r1 - m1),
            "seg3": pair,
            "seg4": pair,
            "seg5": max(0.0, m1 - r1),
            "seg7": r2 - r1,
        }
    else:
        sizes = {"seg5": r1, "seg7": r2 - r1}
    spec = _segments_2x2(sizes)
    spec.validate(s)
    return spec


def rate_2x2(s: Scenario) -> float:
    """Worst-case delivery rate of the two-file two-user scheme."""
    if s.num_files != 2 or s.num_users != 2:
        raise WrongShape(f"need N=K=2, got N={s.num_files}, K={s.num_users}")
    r1, r2 = s.layer_rates
    m1, m2 = s.cache_sizes
    case = classify_2x2(m1, m2, r1, r2)
    if case is Case2x2.CASE_I:
        return r1 + r2 - (m1 + m2)
    if case is Case2x2.CASE_II:
        return r1 / 2 + r2 - (m1 + m2) / 2
    if case is Case2x2.CASE_III:
        return r2 - m2 / 2
    if case is Case2x2.CASE_IV:
        return r1 - m1 / 2
    return 0.0


def delivery_rate_from_placement_2x2(spec: PlacementSpec) -> float:
    """Worst-case (distinct demands) delivery total of a 2x2 placement.

    One broadcast each resolves seg1 and seg2 through the cached XOR
    pairs, one XOR of the seg3/seg4 copies serves both exclusive caches,
    the uncached seg6 is unicast to both users and seg8 to user 2.
    """
    return (
        spec.size("seg1")
        + spec.size("seg2")
        + spec.size("seg3")
        + 2 * spec.size("seg6")
        + spec.size("seg8")
    )


# Two users, N >= 2 files.


def _require_two_user_nfile(s: Scenario) -> None:
    if s.num_users != 2:
        raise NotTwoUsers(f"need K=2, got K={s.num_users}")
    if s.num_files < 2:
        raise WrongShape(f"need N>=2, got N={s.num_files}")


def placement_2user_nfile(s: Scenario) -> PlacementSpec:
    """Per-file segment sizes W1..W6 for two users and N files.

    Each file's base layer splits into W1..W4 and its refinement into
    W5..W6.  User 1 caches W1 and W2 of every file, user 2 caches W2, W3
    and W5 of every file.  Cache beyond N * r2 is useless to user 2, so
    the size formulas use the capped value; all sizes are clamped at zero
    and the partition invariant is asserted afterwards.
    """
    _require_two_user_nfile(s)
    n = s.num_files
    r1, r2 = s.layer_rates
    m1_raw, m2_raw = s.cache_sizes
    m1 = m1_raw / n
    m2 = min(m2_raw, n * r2) / n

    if m1_raw + m2_raw <= n * r1:
        w = {
            "W1": m1,
            "W3": m2,
            "W4": r1 - m1 - m2,
            "W6": r2 - r1,
        }
    elif m1_raw <= n * r1:
        w = {
            "W1": max(min(r2 - m2, m1), 0.0),
            "W2": max(m1 + m2 - r2, 0.0),
            "W3": r1 - m1,
            "W5": min(m1 + m2 - r1, r2 - r1),
            "W6": max(r2 - (m1 + m2), 0.0),
        }
    else:
        w = {
            "W1": r1 - min(m2, r1),
            "W2": min(m2, r1),
            "W5": max(0.0, min(r2, m2) - r1),
            "W6": min(r2 - r1, max(0.0, r2 - m2)),
        }

    owners = {
        "W1": frozenset({1}),
        "W2": frozenset({1, 2}),
        "W3": frozenset({2}),
        "W4": frozenset(),
        "W5": frozenset({2}),
        "W6": frozenset(),
    }
    files = tuple(range(n))
    segs = tuple(
        Segment(name=name, size=max(0.0, w.get(name, 0.0)), owners=owners[name], files=files)
        for name in ("W1", "W2", "W3", "W4", "W5", "W6")
    )
    spec = PlacementSpec(segs)
    spec.validate(s)
    return spec


_REGIONS = ("M1", "M2", "M3", "M4", "M5")


def region_2user_nfile(s: Scenario) -> str:
    """Region label of the cache pair, checked in order M1..M5."""
    _require_two_user_nfile(s)
    n = s.num_files
    r1, r2 = s.layer_rates
    m1, m2 = s.cache_sizes
    if m1 <= n * r1 / 2 and m1 + m2 <= n * r2 and m1 <= m2:
        return "M1"
    if m1 + m2 <= n * r1 and m1 > m2:
        return "M2"
    if m1 <= n * r1 and m1 + m2 > n * r2 and m2 - m1 > n * (r2 - r1):
        return "M3"
    if (
        m1 > n * r1 / 2
        and m2 <= n * r2
        and m1 + m2 > n * r1
        and m2 - m1 <= n * (r2 - r1)
    ):
        return "M4"
    if m1 > n * r1 and m2 > n * r2:
        return "M5"
    raise CacheModelError(
        f"cache pair ({m1}, {m2}) escaped the region partition"  # unreachable
    )


def rate_2user_nfile(s: Scenario) -> float:
    """Worst-case delivery rate of the two-user N-file scheme."""
    _require_two_user_nfile(s)
    n = s.num_files
    r1, r2 = s.layer_rates
    m1, m2 = s.cache_sizes
    region = region_2user_nfile(s)
    if region == "M1":
        return r1 + r2 - 2 * m1 / n - m2 / n
    if region == "M2":
        return r1 + r2 - m1 / n - 2 * m2 / n
    if region == "M3":
        return r1 - m1 / n
    if region == "M4":
        return r2 - m2 / n
    return 0.0


def delivery_rate_from_placement_2user_nfile(spec: PlacementSpec) -> float:
    """Worst-case (distinct demands) delivery total of an N-file placement.

    The only multicast pairs W3 of the first demand with W1 of the second
    (zero-padded XOR), W4 is unicast to each user and W6 to user 2.
    """
    return (
        max(spec.size("W1"), spec.size("W3"))
        + 2 * spec.size("W4")
        + spec.size("W6")
    )


def gap_2user_nfile(s: Scenario) -> float:
    """Closed-form optimality gap inside regions M1 and M2.

    The gap is measured against the floor(N/3) bound term, the binding
    one in the small-cache regions, and depends on N mod 3:

    * N = 3c:      |M1 - M2| / (2N)
    * N = 3c + 1:  |M1 - M2| / (2(N-1)) + min(2M1+M2, M1+2M2) / (N(N-1))
    * N = 3c + 2:  |M1 - M2| / (2(N-2)) + 2 min(2M1+M2, M1+2M2) / (N(N-2))

    Each expression equals the scheme rate minus that bound term exactly;
    expanding ``rate - term`` over a common denominator gives
    ``(sum + min(M1, M2)) = min(2M1+M2, M1+2M2)``, which is why the
    smaller of the two weighted sums appears.
    """
    _require_two_user_nfile(s)
    if not s.successively_refinable:
        raise NotRefinable("gap analysis needs layer rates equal to the optima")
    region = region_2user_nfile(s)
    if region not in ("M1", "M2"):
        raise OutOfRegion(f"gap analysis is defined on regions M1 and M2, got {region}")
    n = s.num_files
    m1, m2 = s.cache_sizes
    spread = abs(m1 - m2)
    weighted = min(2 * m1 + m2, m1 + 2 * m2)
    if n % 3 == 0:
        return spread / (2 * n)
    if n % 3 == 1:
        return spread / (2 * (n - 1)) + weighted / (n * (n - 1))
    return spread / (2 * (n - 2)) + 2 * weighted / (n * (n - 2))
