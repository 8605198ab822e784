"""Problem instances and rate helpers shared by every other module.

A scenario describes a server with ``num_files`` equally-sized sources and
``num_users`` receivers.  User ``k`` must reconstruct whatever file it
requests at its own quality level, met by the first ``layer_rates[k-1]``
bits per source sample of a layered (successively refined) encoding, and
owns a cache of ``cache_sizes[k-1]`` bits per source sample.  Users are
indexed by decreasing distortion target, so layer rates are nondecreasing.

All quantities are normalized by the source blocklength; the bit-level
simulator (``qoscache.bitsim``) is the place where an explicit blocklength
is chosen.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Sequence


class CacheModelError(Exception):
    """Base class for every domain error raised by this package."""


class NonMonotoneRates(CacheModelError):
    """Layer rates must satisfy 0 <= r_1 <= r_2 <= ... <= r_K."""


class NegativeCapacity(CacheModelError):
    """Cache sizes must be nonnegative."""


class ZeroDimension(CacheModelError):
    """File and user counts must both be at least 1."""


class InvalidDistortion(CacheModelError):
    """Distortion target must satisfy 0 < D <= variance."""


class WrongShape(CacheModelError):
    """Operation requires a specific (num_files, num_users) shape."""


class NotTwoUsers(WrongShape):
    """Operation is defined for two-user scenarios only."""


class NeedAtLeastTwoFiles(WrongShape):
    """Operation is defined for scenarios with at least two files."""


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance; construct through :func:`make_scenario`."""

    num_files: int
    num_users: int
    layer_rates: tuple[float, ...]
    cache_sizes: tuple[float, ...]
    successively_refinable: bool = True

    @property
    def top_rate(self) -> float:
        """Rate of the deepest description, r_K."""
        return self.layer_rates[-1]


@dataclass(frozen=True)
class RateReport:
    """Outcome of evaluating one scheme on one scenario.

    ``gap`` is ``rate - bound``.  When the scenario is not successively
    refinable the layer rates may exceed the rate-distortion optimum the
    bound is stated in, so the bound is only informational and a negative
    gap is not an error.
    """

    scheme: str
    rate: float
    bound: float
    gap: float
    bound_informational: bool = False

    def __post_init__(self):
        if self.rate < 0:
            raise CacheModelError(f"negative delivery rate {self.rate!r}")
        if not self.bound_informational and self.gap < -1e-9:
            raise CacheModelError(
                f"scheme {self.scheme!r} reports rate {self.rate} below "
                f"bound {self.bound}"
            )


def make_scenario(
    num_files: int,
    num_users: int,
    layer_rates: Sequence[float],
    cache_sizes: Sequence[float],
    successively_refinable: bool = True,
) -> Scenario:
    """Validate inputs and build a :class:`Scenario`.

    Raises :class:`ZeroDimension`, :class:`NonMonotoneRates` or
    :class:`NegativeCapacity` when the inputs violate the model
    assumptions.
    """
    if num_files < 1 or num_users < 1:
        raise ZeroDimension(
            f"need at least one file and one user, got N={num_files}, K={num_users}"
        )
    rates = tuple(float(r) for r in layer_rates)
    caches = tuple(float(m) for m in cache_sizes)
    if len(rates) != num_users or len(caches) != num_users:
        raise CacheModelError(
            f"expected {num_users} layer rates and cache sizes, "
            f"got {len(rates)} and {len(caches)}"
        )
    previous = 0.0
    for k, r in enumerate(rates, start=1):
        if not math.isfinite(r) or r < previous:
            raise NonMonotoneRates(
                f"layer rates must be nondecreasing and nonnegative, "
                f"violated at user {k} (r={r}, previous={previous})"
            )
        previous = r
    for k, m in enumerate(caches, start=1):
        if not math.isfinite(m) or m < 0:
            raise NegativeCapacity(f"cache size of user {k} is {m}")
    return Scenario(num_files, num_users, rates, caches, bool(successively_refinable))


def layer_increments(s: Scenario) -> tuple[float, ...]:
    """Per-layer sizes (r_1 - r_0, ..., r_K - r_{K-1}) with r_0 = 0.

    Entries are nonnegative and sum to r_K.  Users with identical quality
    targets produce zero-size layers, which downstream code treats as
    absent.
    """
    out = []
    previous = 0.0
    for r in s.layer_rates:
        out.append(r - previous)
        previous = r
    return tuple(out)


def gaussian_rate_distortion(variance: float, distortion: float) -> float:
    """Rate (bits/sample) to describe a Gaussian source within a squared-error target.

    Convenience helper for building layer rates from distortion targets;
    Gaussian sources under squared error are successively refinable, so
    nested targets simply add ``0.5 * log2(D1 / D2)`` bits.
    """
    if distortion <= 0 or distortion > variance:
        raise InvalidDistortion(
            f"need 0 < D <= variance, got D={distortion}, variance={variance}"
        )
    return 0.5 * math.log2(variance / distortion)


# Flat text serialization.  The schema is the same one the CLI consumes.

_SCENARIO_KEYS = (
    "num_files",
    "num_users",
    "layer_rates",
    "cache_sizes",
    "successively_refinable",
)


def scenario_to_dict(s: Scenario) -> dict:
    d = asdict(s)
    d["layer_rates"] = list(d["layer_rates"])
    d["cache_sizes"] = list(d["cache_sizes"])
    return d


def scenario_from_dict(d: dict) -> Scenario:
    missing = [k for k in _SCENARIO_KEYS[:4] if k not in d]
    if missing:
        raise CacheModelError(f"scenario is missing keys: {missing}")
    return make_scenario(
        d["num_files"],
        d["num_users"],
        d["layer_rates"],
        d["cache_sizes"],
        d.get("successively_refinable", True),
    )


def dump_scenario(s: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, indent=2)
        fh.write("\n")


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))
