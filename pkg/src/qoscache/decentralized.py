"""Decentralized random placement and its delivery-rate formulas.

Placement is uncoordinated: user k independently caches a random
``M_k / N`` share of each file's own-quality description, so any bit of
layer i is held by user u >= i with probability ``t_u = M_u / (N r_u)``
(clamped at one).  Delivery rates follow from the expected sizes of the
exclusively-owned segments via the law of large numbers:

* layered XOR delivery (LCD1) serves each layer with one zero-padded XOR
  per user subset;
* a random-combination fallback covers each demanded file in one go;
* LCD2 improves LCD1 when users outnumber files by sending uncached bits
  once per file and chaining singly-cached bits within demand groups.

An uncoded prefix-caching baseline is included for comparisons; it is our
own construction and is labeled ``baseline:prefix-uncoded`` everywhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import CacheModelError, Scenario, WrongShape, layer_increments

EXHAUSTIVE_DEMAND_LIMIT = 10**6


class InvalidSubset(CacheModelError):
    """Owner sets must exclude the receiving user and stay within 1..K."""


@dataclass(frozen=True)
class PlacementProbabilities:
    """Per-user caching probabilities plus sorted per-layer views.

    ``per_layer[i-1]`` sorts (t_i, ..., t_K) ascending with stable ties,
    the order in which the layered delivery formulas consume them.
    """

    t: tuple[float, ...]
    per_layer: tuple[tuple[float, ...], ...]


def placement_probabilities(s: Scenario) -> PlacementProbabilities:
    """t_k = min(1, M_k / (N r_k)); users with r_k = 0 need nothing (t=1)."""
    t = []
    for r, m in zip(s.layer_rates, s.cache_sizes):
        if r <= 0:
            t.append(1.0)
        else:
            t.append(min(1.0, m / (s.num_files * r)))
    views = tuple(tuple(sorted(t[i:])) for i in range(s.num_users))
    return PlacementProbabilities(tuple(t), views)


def segment_size(s: Scenario, user: int, owners: Iterable[int]) -> float:
    """Expected size of the part of ``user``'s description owned exactly by ``owners``.

    The segment spans layers 1..m where m is the smallest index in
    ``owners | {user}``; layer i bits are owned by exactly that set with
    probability ``(1 - t_user) * prod_{u in owners} t_u *
    prod_{u in {i..K} \\ S} (1 - t_u)``.
    """
    owner_set = frozenset(owners)
    if user in owner_set:
        raise InvalidSubset(f"user {user} cannot own its missing segment")
    if not owner_set <= set(range(1, s.num_users + 1)) or not 1 <= user <= s.num_users:
        raise InvalidSubset(f"owners {sorted(owner_set)} outside 1..{s.num_users}")
    t = placement_probabilities(s).t
    everyone = owner_set | {user}
    deepest = min(everyone)
    increments = layer_increments(s)
    total = 0.0
    for i in range(1, deepest + 1):
        p = 1.0 - t[user - 1]
        for u in owner_set:
            p *= t[u - 1]
        for u in range(i, s.num_users + 1):
            if u not in everyone:
                p *= 1.0 - t[u - 1]
        total += increments[i - 1] * p
    return total


def lcd1_rate(s: Scenario) -> float:
    """Layered XOR delivery rate summed over layers.

    Layer i with audience L contributes
    ``(r_i - r_{i-1}) * sum_{l=1}^{L} prod_{k<=l} (1 - t[k])`` with the
    audience probabilities sorted ascending.
    """
    probs = placement_probabilities(s)
    increments = layer_increments(s)
    total = 0.0
    for i in range(1, s.num_users + 1):
        inc = increments[i - 1]
        if inc <= 0:
            continue
        running = 1.0
        layer_sum = 0.0
        for t in probs.per_layer[i - 1]:
            running *= 1.0 - t
            layer_sum += running
        total += inc * layer_sum
    return total


def delivery2_rate(s: Scenario) -> float:
    """Random-combination delivery: one batch per demanded file.

    In the worst case the min(N, K) largest descriptions land in distinct
    demand groups together with the min(N, K) smallest caches, giving
    ``sum of largest rates - (sum of smallest caches) / N``; monotonicity
    makes the subset minimum separable.  Clamped at zero.
    """
    m = min(s.num_files, s.num_users)
    top_rates = sorted(s.layer_rates)[-m:]
    small_caches = sorted(s.cache_sizes)[:m]
    return max(0.0, sum(top_rates) - sum(small_caches) / s.num_files)


def delivery2_rate_exhaustive(s: Scenario) -> float:
    """Subset-enumeration version of the inner minimum (small K only)."""
    m = min(s.num_files, s.num_users)
    top_rates = sorted(s.layer_rates)[-m:]
    inner = min(
        sum(s.cache_sizes[u] for u in subset)
        for subset in itertools.combinations(range(s.num_users), m)
    )
    return max(0.0, sum(top_rates) - inner / s.num_files)


def decentralized_rate_alg3(s: Scenario) -> float:
    """Server picks the cheaper delivery procedure."""
    return min(lcd1_rate(s), delivery2_rate(s))


def lcd2_rate(s: Scenario) -> float:
    """Improved layered delivery when users outnumber files.

    Per layer i with audience L and sorted probabilities t[1..L], two
    corrections are subtracted from the LCD1 sum when L > N:

    * uncached bits are broadcast once per file instead of once per user,
      saving ``(L - N) * prod(1 - t)``;
    * singly-cached bits are chained inside demand groups, saving
      ``sum_{k=1}^{L-N} (k-1) * t[k+N] * prod_{l != k+N} (1 - t[l])``
      (written with the 1/(1 - t) factor cancelled so t = 1 is exact).
    """
    probs = placement_probabilities(s)
    increments = layer_increments(s)
    n = s.num_files
    total = 0.0
    for i in range(1, s.num_users + 1):
        inc = increments[i - 1]
        if inc <= 0:
            continue
        t = probs.per_layer[i - 1]
        audience = len(t)
        running = 1.0
        layer_sum = 0.0
        for tk in t:
            running *= 1.0 - tk
            layer_sum += running
        if audience > n:
            full_product = 1.0
            for tk in t:
                full_product *= 1.0 - tk
            delta1 = (audience - n) * full_product
            delta2 = 0.0
            for k in range(1, audience - n + 1):
                others = 1.0
                for l, tl in enumerate(t):
                    if l != k + n - 1:
                        others *= 1.0 - tl
                delta2 += (k - 1) * t[k + n - 1] * others
            layer_sum -= delta1 + delta2
        total += inc * layer_sum
    return total


def rate_2x2_decentralized(s: Scenario) -> float:
    """Closed form for two users and two files; equals :func:`lcd1_rate`."""
    if s.num_files != 2 or s.num_users != 2:
        raise WrongShape(f"need N=K=2, got N={s.num_files}, K={s.num_users}")
    r1, r2 = s.layer_rates
    t1 = min(1.0, s.cache_sizes[0] / (2 * r1)) if r1 > 0 else 1.0
    t2 = min(1.0, s.cache_sizes[1] / (2 * r2)) if r2 > 0 else 1.0
    return (
        2 * r1 * (1 - t1) * (1 - t2)
        + (r2 - r1) * (1 - t2)
        + max(r1 * t1 * (1 - t2), r1 * t2 * (1 - t1))
    )


# Uncoded prefix-caching baseline (ours; labeled baseline:prefix-uncoded).


def _needy_intervals(s: Scenario, users: Iterable[int]) -> list[tuple[float, float]]:
    """Missing prefix intervals (cached prefix, target rate] of a demand group."""
    out = []
    for u in users:
        r = s.layer_rates[u]
        p = min(r, s.cache_sizes[u] / s.num_files)
        if p < r:
            out.append((p, r))
    return out


def _union_length(intervals: Sequence[tuple[float, float]]) -> float:
    total = 0.0
    end = -1.0
    for lo, hi in sorted(intervals):
        if lo > end:
            total += hi - lo
            end = hi
        elif hi > end:
            total += hi - end
            end = hi
    return total


def _uncoded_cost(s: Scenario, demand: Sequence[int]) -> float:
    """Broadcast bits for one demand vector under prefix caching.

    Users asking the same file share one broadcast; the nested-prefix
    structure means the group needs exactly the union of its members'
    missing prefix intervals.
    """
    groups: dict[int, list[int]] = {}
    for user, file_index in enumerate(demand):
        groups.setdefault(file_index, []).append(user)
    return sum(_union_length(_needy_intervals(s, g)) for g in groups.values())


_REST_DP_LIMIT = 2_000_000


def _uncoded_structural(s: Scenario) -> float:
    """Adversarial demand search for large instances (users > files).

    Worst demands keep the file-count largest descriptions in distinct
    groups (cross-checked against exhaustive enumeration on every small
    instance), so only the remaining users' group assignment is searched:
    exactly, by a partition DP over their subsets, or greedily with a
    single-move polish when that state space is too large.
    """
    n, k = s.num_files, s.num_users
    by_rate = sorted(range(k), key=lambda u: (-s.layer_rates[u], u))
    leaders = by_rate[:n]
    rest = by_rate[n:]
    m = len(rest)

    def group_cost(grp: list[int]) -> float:
        return _union_length(_needy_intervals(s, grp))

    if n * 3**m <= _REST_DP_LIMIT:
        cost = []
        for g in range(n):
            row = []
            for mask in range(1 << m):
                members = [leaders[g]] + [rest[j] for j in range(m) if mask >> j & 1]
                row.append(group_cost(members))
            cost.append(row)
        best = cost[0][:]  # group 0 absorbs the whole state
        for g in range(1, n):
            nxt = [0.0] * (1 << m)
            for state in range(1 << m):
                top = best[state] + cost[g][0]
                sub = state
                while sub:
                    top = max(top, best[state ^ sub] + cost[g][sub])
                    sub = (sub - 1) & state
                nxt[state] = top
            best = nxt
        return best[(1 << m) - 1]

    groups: list[list[int]] = [[u] for u in leaders]
    for u in sorted(rest, key=lambda u: (s.cache_sizes[u], u)):
        best_g, best_total = 0, -1.0
        for g in range(n):
            groups[g].append(u)
            total = sum(group_cost(grp) for grp in groups)
            groups[g].pop()
            if total > best_total + 1e-15:
                best_total = total
                best_g = g
        groups[best_g].append(u)
    improved = True
    passes = 0
    while improved and passes < 4 * k:
        improved = False
        passes += 1
        for g_from in range(n):
            for u in list(groups[g_from]):
                if len(groups[g_from]) == 1:
                    continue  # every file must stay demanded
                base = group_cost(groups[g_from])
                groups[g_from].remove(u)
                gain_out = base - group_cost(groups[g_from])
                best_g, best_gain = None, gain_out
                for g_to in range(n):
                    if g_to == g_from:
                        continue
                    before = group_cost(groups[g_to])
                    groups[g_to].append(u)
                    gain_in = group_cost(groups[g_to]) - before
                    groups[g_to].pop()
                    if gain_in > best_gain + 1e-15:
                        best_gain = gain_in
                        best_g = g_to
                if best_g is None:
                    groups[g_from].append(u)
                else:
                    groups[best_g].append(u)
                    improved = True
    return sum(group_cost(grp) for grp in groups)


def uncoded_rate(s: Scenario) -> float:
    """Worst-case rate of the uncoded prefix-caching baseline.

    Each user caches the first ``M_k / N`` bits of its own-quality
    description of every file.  With at least as many files as users,
    distinct demands are worst and the rate is
    ``sum_k max(0, r_k - M_k / N)``.  Otherwise demands are enumerated
    exhaustively up to ``N^K <= 10^6`` and a greedy structural adversary
    is used beyond; where both run they are cross-checked.
    """
    n, k = s.num_files, s.num_users
    if n >= k:
        return sum(
            max(0.0, r - m / n) for r, m in zip(s.layer_rates, s.cache_sizes)
        )
    structural = _uncoded_structural(s)
    if n**k <= EXHAUSTIVE_DEMAND_LIMIT:
        exhaustive = max(
            _uncoded_cost(s, demand)
            for demand in itertools.product(range(n), repeat=k)
        )
        return max(exhaustive, structural)
    return structural
