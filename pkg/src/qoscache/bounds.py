"""Lower bounds on the worst-case delivery rate.

Every bound interprets the scenario's layer rates as the rate-distortion
optima r*_k.  When ``successively_refinable`` is false that reading may be
loose, so callers should flag bound values as informational (the CLI does).
All bounds are clamped at zero since delivery rates are nonnegative.
"""

from __future__ import annotations

from itertools import combinations

from .model import (
    NeedAtLeastTwoFiles,
    NotTwoUsers,
    Scenario,
    WrongShape,
)


def cutset_bound(s: Scenario) -> float:
    """Cut-set lower bound for any number of files and users.

    For each subset size ``x`` up to min(N, K), a set U of x user caches
    together with floor(N/x) broadcast messages must reproduce floor(N/x)
    distinct files per user in U, which yields

        R >= sum_{k in U} r_k - (sum_{k in U} M_k) / floor(N / x).

    The maximizing U for fixed x takes the x largest values of
    ``r_k - M_k / floor(N / x)``, so no subset enumeration is needed.
    """
    n, k = s.num_files, s.num_users
    best = 0.0
    for x in range(1, min(n, k) + 1):
        denom = n // x
        scores = sorted(
            (r - m / denom for r, m in zip(s.layer_rates, s.cache_sizes)),
            reverse=True,
        )
        best = max(best, sum(scores[:x]))
    return best


def cutset_bound_exhaustive(s: Scenario) -> float:
    """Subset-enumeration version of :func:`cutset_bound` (small K only)."""
    n, k = s.num_files, s.num_users
    best = 0.0
    for x in range(1, min(n, k) + 1):
        denom = n // x
        for users in combinations(range(k), x):
            value = sum(s.layer_rates[u] - s.cache_sizes[u] / denom for u in users)
            best = max(best, value)
    return best


def two_user_bound(s: Scenario) -> float:
    """Two-user bound that tightens the cut-set bound for K = 2."""
    if s.num_users != 2:
        raise NotTwoUsers(f"defined for K=2, got K={s.num_users}")
    if s.num_files < 2:
        raise NeedAtLeastTwoFiles("defined for N >= 2")
    r1, r2 = s.layer_rates
    m1, m2 = s.cache_sizes
    return max(0.0, r1 / 2 + r2 - (m1 + m2) / (2 * (s.num_files // 2)))


def lower_bound_2x2(s: Scenario) -> float:
    """Combined lower bound for the two-file two-user scenario."""
    if s.num_files != 2 or s.num_users != 2:
        raise WrongShape(f"defined for N=K=2, got N={s.num_files}, K={s.num_users}")
    r1, r2 = s.layer_rates
    m1, m2 = s.cache_sizes
    return max(
        r1 - m1 / 2,
        r2 - m2 / 2,
        r1 + r2 - (m1 + m2),
        r1 / 2 + r2 - (m1 + m2) / 2,
        0.0,
    )


def lower_bound_2user_nfile(s: Scenario) -> float:
    """Combined lower bound for two users and N >= 2 files.

    The last term needs floor(N/3) >= 1; for N = 2 it is omitted and the
    N=2 bound of :func:`lower_bound_2x2` covers that case.
    """
    if s.num_users != 2:
        raise NotTwoUsers(f"defined for K=2, got K={s.num_users}")
    if s.num_files < 2:
        raise NeedAtLeastTwoFiles(f"defined for N >= 2, got N={s.num_files}")
    n = s.num_files
    r1, r2 = s.layer_rates
    m1, m2 = s.cache_sizes
    terms = [
        r1 - m1 / n,
        r2 - m2 / n,
        r1 / 2 + r2 - (m1 + m2) / (2 * (n // 2)),
        0.0,
    ]
    if n >= 3:
        terms.append(r1 + r2 - (m1 + m2) / (2 * (n // 3)))
    return max(terms)


def best_lower_bound(s: Scenario) -> float:
    """Maximum of every bound whose shape precondition the scenario meets."""
    best = cutset_bound(s)
    if s.num_users == 2 and s.num_files >= 2:
        best = max(best, two_user_bound(s), lower_bound_2user_nfile(s))
    if s.num_users == 2 and s.num_files == 2:
        best = max(best, lower_bound_2x2(s))
    return best
