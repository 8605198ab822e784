"""Finite-blocklength oracle for the analytic delivery rates.

Placements are materialized as actual bit arrays at a chosen blocklength
``n`` (bits per unit rate), deliveries are executed message by message for
concrete demand vectors, and decodability is checked structurally: a user
recovers a bit range when it is cached, received in plain, or obtainable
by cancelling the known side of a zero-padded XOR.  Worst-case empirical
rates (max over demands of transcript bits over n) cross-validate every
closed-form rate in the package.

Bit bookkeeping uses "cells": maximal bit ranges with a single owner set.
Caches hold whole cells, so knowledge is all-or-nothing per cell and the
decoding fixpoint stays cheap even at ``n = 10^5``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .centralized_small import PlacementSpec, placement_2user_nfile, placement_2x2
from .model import CacheModelError, Scenario, WrongShape

RANK_CHECK_MAX_N = 2048
EXHAUSTIVE_DEMAND_LIMIT = 10**6


class UnsupportedScheme(CacheModelError):
    """The requested delivery scheme does not fit this placement."""


class DecodeFailure(CacheModelError):
    """Some user could not reconstruct its target description."""


@dataclass(eq=False)
class BitRef:
    """A reference to one cell: ``positions`` within ``file``'s bits."""

    file: int
    tag: object
    positions: np.ndarray

    @property
    def key(self) -> tuple:
        return (self.file, self.tag)

    @property
    def length(self) -> int:
        return int(self.positions.size)


@dataclass(eq=False)
class Message:
    """One broadcast: the zero-padded XOR of ``parts`` (plain if one part)."""

    label: str
    parts: tuple[BitRef, ...]

    @property
    def length(self) -> int:
        return max((p.length for p in self.parts), default=0)

    def payload(self, placement: "ConcretePlacement") -> np.ndarray:
        """Actual transmitted bits (shorter parts zero-padded at the tail)."""
        out = np.zeros(self.length, dtype=np.uint8)
        for p in self.parts:
            out[: p.length] ^= placement.files[p.file][p.positions]
        return out


@dataclass(eq=False)
class RandomCombinations:
    """Seeded random XOR combinations of ``file``'s first ``span`` bits."""

    label: str
    file: int
    span: int
    count: int
    seed: int

    @property
    def length(self) -> int:
        return self.count

    def coefficient_matrix(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.integers(0, 2, size=(self.count, self.span), dtype=np.uint8)


@dataclass(eq=False)
class DeliveryTranscript:
    """Messages sent for one demand vector, in emission order."""

    demand: tuple[int, ...]
    scheme: str
    messages: list

    @property
    def total_bits(self) -> int:
        return sum(m.length for m in self.messages)

    def to_lines(self) -> list[str]:
        """Line-oriented dump: scheme label, hex payload length, provenance."""
        return [f"{self.scheme} {m.length:#x} {m.label}" for m in self.messages]


class ConcretePlacement:
    """Bit-level realization of a placement; immutable once built."""

    def __init__(
        self,
        scenario: Scenario,
        n: int,
        files: np.ndarray,
        cells: dict[tuple, BitRef],
        user_cells: list[set[tuple]],
        user_xor_items: list[list[tuple[BitRef, ...]]],
        kind: str,
    ):
        self.scenario = scenario
        self.n = n
        self.files = files
        self.cells = cells
        self.user_cells = user_cells
        self.user_xor_items = user_xor_items
        self.kind = kind
        self._check_budgets()

    def description_len(self, user: int) -> int:
        return math.ceil(self.n * self.scenario.layer_rates[user - 1])

    def cached_bits(self, user: int) -> int:
        total = sum(self.cells[key].length for key in self.user_cells[user - 1])
        total += sum(
            max(p.length for p in parts) for parts in self.user_xor_items[user - 1]
        )
        return total

    def _check_budgets(self) -> None:
        for user in range(1, self.scenario.num_users + 1):
            budget = math.ceil(self.n * self.scenario.cache_sizes[user - 1])
            used = self.cached_bits(user)
            if used > budget:
                raise CacheModelError(
                    f"user {user} stores {used} bits > budget {budget}"
                )

    def cell(self, file: int, tag: object) -> BitRef:
        return self.cells[(file, tag)]


def _layer_bounds(s: Scenario, n: int) -> list[int]:
    """Cumulative bit offsets of the layer boundaries, 0..ceil(n r_K)."""
    bounds = [0]
    for r in s.layer_rates:
        bounds.append(math.ceil(n * r))
    return bounds


def _quantize_segments(sizes: Sequence[float], n: int, total: int) -> list[int]:
    """floor(n * size) per segment, remainder bits to the last segment."""
    lengths = [math.floor(n * size) for size in sizes[:-1]]
    used = sum(lengths)
    if used > total:
        raise CacheModelError("quantized segments exceed the layer")
    lengths.append(total - used)
    return lengths


def _random_files(s: Scenario, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    depth = math.ceil(n * s.top_rate)
    return rng.integers(0, 2, size=(s.num_files, depth), dtype=np.uint8)


def _spec_to_cells(
    s: Scenario, n: int, spec: PlacementSpec, base_names: list[str], ref_names: list[str]
) -> tuple[dict[tuple, BitRef], list[set[tuple]], list[list[tuple[BitRef, ...]]]]:
    """Lay the named segments out contiguously per file and build caches.

    Base-layer segments partition the first ceil(n r_1) bits and the
    refinement segments the rest; each layer's final segment absorbs the
    rounding remainder, and those segments are never cached, so rounding
    cannot overflow a budget.
    """
    d1 = math.ceil(n * s.layer_rates[0])
    d2 = math.ceil(n * s.top_rate)
    base_sizes = [spec.size(name) for name in base_names]
    ref_sizes = [spec.size(name) for name in ref_names]
    base_len = _quantize_segments(base_sizes, n, d1)
    ref_len = _quantize_segments(ref_sizes, n, d2 - d1)
    offsets = {}
    cursor = 0
    for name, ln in zip(base_names + ref_names, base_len + ref_len):
        offsets[name] = (cursor, ln)
        cursor += ln

    cells: dict[tuple, BitRef] = {}
    for f in range(s.num_files):
        for name in base_names + ref_names:
            start, ln = offsets[name]
            cells[(f, name)] = BitRef(f, name, np.arange(start, start + ln, dtype=np.int64))

    user_cells: list[set[tuple]] = [set() for _ in range(s.num_users)]
    user_xor: list[list[tuple[BitRef, ...]]] = [[] for _ in range(s.num_users)]
    for seg in spec.segments:
        if seg.size <= 0 or not seg.owners:
            continue
        if seg.xor_coded:
            parts = tuple(cells[(f, seg.name)] for f in seg.files)
            for user in seg.owners:
                user_xor[user - 1].append(parts)
        else:
            for user in seg.owners:
                for f in seg.files:
                    user_cells[user - 1].add((f, seg.name))
    return cells, user_cells, user_xor


def materialize_2x2(s: Scenario, n: int, seed: int = 0) -> ConcretePlacement:
    """Bit-level two-file two-user placement for the scenario's case."""
    if s.num_files != 2 or s.num_users != 2:
        raise WrongShape("need N=K=2")
    if n < 10**3:
        raise CacheModelError(f"blocklength too small: {n}")
    spec = placement_2x2(s)
    cells, user_cells, user_xor = _spec_to_cells(
        s, n, spec, [f"seg{i}" for i in range(1, 7)], ["seg7", "seg8"]
    )
    return ConcretePlacement(
        s, n, _random_files(s, n, seed), cells, user_cells, user_xor, "2x2"
    )


def materialize_2user_nfile(s: Scenario, n: int, seed: int = 0) -> ConcretePlacement:
    """Bit-level two-user N-file placement."""
    if s.num_users != 2 or s.num_files < 2:
        raise WrongShape("need K=2, N>=2")
    if n < 10**3:
        raise CacheModelError(f"blocklength too small: {n}")
    spec = placement_2user_nfile(s)
    cells, user_cells, user_xor = _spec_to_cells(
        s, n, spec, ["W1", "W2", "W3", "W4"], ["W5", "W6"]
    )
    return ConcretePlacement(
        s, n, _random_files(s, n, seed), cells, user_cells, user_xor, "2user"
    )


def materialize_decentralized(s: Scenario, n: int, seed: int) -> ConcretePlacement:
    """Independent random placement: user k caches a uniform
    floor(n M_k / N)-subset of each file's first ceil(n r_k) bits."""
    if n < 10**3:
        raise CacheModelError(f"blocklength too small: {n}")
    rng = np.random.default_rng(seed)
    k, nf = s.num_users, s.num_files
    depth = math.ceil(n * s.top_rate)
    owned = np.zeros((nf, k, depth), dtype=bool)
    for user in range(1, k + 1):
        desc = math.ceil(n * s.layer_rates[user - 1])
        count = min(math.floor(n * s.cache_sizes[user - 1] / nf), desc)
        for f in range(nf):
            if count > 0:
                picks = rng.choice(desc, size=count, replace=False)
                owned[f, user - 1, picks] = True

    bounds = _layer_bounds(s, n)
    cells: dict[tuple, BitRef] = {}
    user_cells: list[set[tuple]] = [set() for _ in range(k)]
    weights = 1 << np.arange(k, dtype=np.int64)
    for f in range(nf):
        codes = (owned[f].astype(np.int64).T * weights).sum(axis=1)
        for layer in range(1, k + 1):
            lo, hi = bounds[layer - 1], bounds[layer]
            if hi <= lo:
                continue
            segment_codes = codes[lo:hi]
            for code in np.unique(segment_codes):
                owners = frozenset(
                    u + 1 for u in range(k) if (int(code) >> u) & 1
                )
                tag = (layer, owners)
                positions = lo + np.flatnonzero(segment_codes == code)
                cells[(f, tag)] = BitRef(f, tag, positions.astype(np.int64))
                for u in owners:
                    user_cells[u - 1].add((f, tag))
    return ConcretePlacement(
        s,
        n,
        _random_files(s, n, seed + 1),
        cells,
        user_cells,
        [[] for _ in range(k)],
        "decentralized",
    )


def _empty_ref(file: int, tag: object) -> BitRef:
    return BitRef(file, tag, np.empty(0, dtype=np.int64))


def _cell_or_empty(p: ConcretePlacement, file: int, tag: object) -> BitRef:
    return p.cells.get((file, tag), _empty_ref(file, tag))


def _delivery_2x2(p: ConcretePlacement, demand: tuple[int, int]) -> list[Message]:
    """Case-generic delivery for the eight-segment placement.

    One broadcast resolves each XOR-cached segment for both users, the
    exclusive seg3/seg4 copies are paired into one XOR, uncached segments
    are sent plain (once when the demands coincide).
    """
    d1, d2 = demand
    msgs = []

    def plain(file: int, name: str, label: str):
        ref = p.cell(file, name)
        if ref.length:
            msgs.append(Message(label, (ref,)))

    plain(d2, "seg1", f"seg1:file{d2}")
    plain(d1, "seg2", f"seg2:file{d1}")
    a3 = p.cell(d2, "seg3")
    a4 = p.cell(d1, "seg4")
    if a3.length or a4.length:
        msgs.append(Message(f"seg3^seg4:files{d2},{d1}", (a3, a4)))
    plain(d1, "seg6", f"seg6:file{d1}")
    if d2 != d1:
        plain(d2, "seg6", f"seg6:file{d2}")
    plain(d2, "seg8", f"seg8:file{d2}")
    return msgs


def _delivery_2user_nfile(p: ConcretePlacement, demand: tuple[int, int]) -> list[Message]:
    d1, d2 = demand
    msgs = []
    w3 = p.cell(d1, "W3")
    w1 = p.cell(d2, "W1")
    if w3.length or w1.length:
        msgs.append(Message(f"W3^W1:files{d1},{d2}", (w3, w1)))
    if p.cell(d1, "W4").length:
        msgs.append(Message(f"W4:file{d1}", (p.cell(d1, "W4"),)))
    if d2 != d1 and p.cell(d2, "W4").length:
        msgs.append(Message(f"W4:file{d2}", (p.cell(d2, "W4"),)))
    if p.cell(d2, "W6").length:
        msgs.append(Message(f"W6:file{d2}", (p.cell(d2, "W6"),)))
    return msgs


def _audience(s: Scenario, layer: int) -> list[int]:
    return list(range(layer, s.num_users + 1))


def _delivery_lcd1(p: ConcretePlacement, demand: tuple[int, ...]) -> list[Message]:
    """One zero-padded XOR per user subset of each layer's audience."""
    s = p.scenario
    msgs = []
    for layer in range(1, s.num_users + 1):
        audience = _audience(s, layer)
        for size in range(1, len(audience) + 1):
            for subset in itertools.combinations(audience, size):
                chosen = frozenset(subset)
                parts = tuple(
                    _cell_or_empty(p, demand[u - 1], (layer, chosen - {u}))
                    for u in subset
                )
                if any(part.length for part in parts):
                    msgs.append(
                        Message(f"lcd1:layer{layer}:S={sorted(subset)}", parts)
                    )
    return msgs


def _lcd2_groups(s: Scenario, demand: tuple[int, ...], layer: int) -> list[list[int]]:
    """Demand groups of the layer's audience, files ascending, members
    ordered by ascending cache share (stable by index)."""
    def share(u: int) -> float:
        r = s.layer_rates[u - 1]
        return min(1.0, s.cache_sizes[u - 1] / (s.num_files * r)) if r > 0 else 1.0

    groups: dict[int, list[int]] = {}
    for u in _audience(s, layer):
        groups.setdefault(demand[u - 1], []).append(u)
    ordered = []
    for file_index in sorted(groups):
        ordered.append(sorted(groups[file_index], key=lambda u: (share(u), u)))
    return ordered


def _delivery_lcd2(p: ConcretePlacement, demand: tuple[int, ...]) -> list[Message]:
    """Group-aware layered delivery.

    Part 1 broadcasts each demanded file's unowned bits once.  Part 2
    serves singly-owned bits with consecutive XOR chains inside each
    group, the same chains replayed for every other group's file, and one
    cross anchor per group pair.  Part 3 falls back to subset XORs for
    bits owned by two or more users.  Empty ranges emit nothing.
    """
    s = p.scenario
    msgs = []
    for layer in range(1, s.num_users + 1):
        audience = _audience(s, layer)
        groups = _lcd2_groups(s, demand, layer)
        files = [demand[g[0] - 1] for g in groups]

        for f, group in zip(files, groups):
            ref = _cell_or_empty(p, f, (layer, frozenset()))
            if ref.length:
                msgs.append(Message(f"lcd2:layer{layer}:part1:file{f}", (ref,)))

        def single(f: int, owner: int) -> BitRef:
            return _cell_or_empty(p, f, (layer, frozenset({owner})))

        def chain(f: int, members: list[int], label: str):
            for a, b in zip(members, members[1:]):
                parts = (single(f, a), single(f, b))
                if any(part.length for part in parts):
                    msgs.append(Message(label + f":{a}^{b}", parts))

        for f, group in zip(files, groups):
            chain(f, group, f"lcd2:layer{layer}:part2a:file{f}")
        for (fj, gj), (fh, gh) in itertools.combinations(zip(files, groups), 2):
            chain(fj, gh, f"lcd2:layer{layer}:part2b:file{fj}over{fh}")
            chain(fh, gj, f"lcd2:layer{layer}:part2b:file{fh}over{fj}")
            parts = (single(fj, gh[0]), single(fh, gj[0]))
            if any(part.length for part in parts):
                msgs.append(
                    Message(f"lcd2:layer{layer}:part2c:files{fj},{fh}", parts)
                )

        for size in range(3, len(audience) + 1):
            for subset in itertools.combinations(audience, size):
                chosen = frozenset(subset)
                parts = tuple(
                    _cell_or_empty(p, demand[u - 1], (layer, chosen - {u}))
                    for u in subset
                )
                if any(part.length for part in parts):
                    msgs.append(
                        Message(f"lcd2:layer{layer}:part3:S={sorted(subset)}", parts)
                    )
    return msgs


def _delivery_random_combinations(
    p: ConcretePlacement, demand: tuple[int, ...], seed: int
) -> list[Message]:
    """One batch of random combinations per demanded file."""
    s = p.scenario
    groups: dict[int, list[int]] = {}
    for u in range(1, s.num_users + 1):
        groups.setdefault(demand[u - 1], []).append(u)
    msgs = []
    for f in sorted(groups):
        members = groups[f]
        top = max(s.layer_rates[u - 1] for u in members)
        least = min(s.cache_sizes[u - 1] / s.num_files for u in members)
        span = math.ceil(p.n * top)
        count = math.ceil(p.n * max(0.0, top - least)) + 64
        if span > 0 and count > 0:
            msgs.append(
                RandomCombinations(
                    f"delivery2:file{f}", f, span, count, seed * 7919 + f
                )
            )
    return msgs


def run_delivery(
    p: ConcretePlacement, demand: Sequence[int], scheme: str, seed: int = 0
) -> DeliveryTranscript:
    """Emit the scheme's broadcast messages for one demand vector.

    Deterministic given placement, demand, scheme and seed.  Demands are
    zero-based file indices, one per user.
    """
    demand = tuple(int(d) for d in demand)
    if len(demand) != p.scenario.num_users:
        raise CacheModelError("demand vector length must equal the user count")
    if any(not 0 <= d < p.scenario.num_files for d in demand):
        raise CacheModelError(f"demand out of range: {demand}")
    if scheme == "centralized-2x2":
        if p.kind != "2x2":
            raise UnsupportedScheme("placement is not a 2x2 placement")
        msgs = _delivery_2x2(p, demand)
    elif scheme == "centralized-2user":
        if p.kind != "2user":
            raise UnsupportedScheme("placement is not a two-user N-file placement")
        msgs = _delivery_2user_nfile(p, demand)
    elif scheme == "decentralized-lcd1":
        if p.kind != "decentralized":
            raise UnsupportedScheme("placement is not decentralized")
        msgs = _delivery_lcd1(p, demand)
    elif scheme == "decentralized-lcd2":
        if p.kind != "decentralized":
            raise UnsupportedScheme("placement is not decentralized")
        msgs = _delivery_lcd2(p, demand)
    elif scheme == "decentralized-delivery2":
        if p.kind != "decentralized":
            raise UnsupportedScheme("placement is not decentralized")
        msgs = _delivery_random_combinations(p, demand, seed)
    elif scheme == "decentralized-alg3":
        first = run_delivery(p, demand, "decentralized-lcd1", seed)
        second = run_delivery(p, demand, "decentralized-delivery2", seed)
        chosen = first if first.total_bits <= second.total_bits else second
        return DeliveryTranscript(demand, scheme, chosen.messages)
    else:
        raise UnsupportedScheme(f"unknown scheme {scheme!r}")
    return DeliveryTranscript(demand, scheme, msgs)


def _gf2_rank(matrix: np.ndarray) -> int:
    m = matrix.copy().astype(np.uint8)
    rows, cols = m.shape
    rank = 0
    for col in range(cols):
        pivot = None
        for row in range(rank, rows):
            if m[row, col]:
                pivot = row
                break
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        hits = np.flatnonzero(m[:, col])
        hits = hits[hits != rank]
        m[hits] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _user_decodes(p: ConcretePlacement, t: DeliveryTranscript, user: int) -> bool:
    """Iterated substitution from the user's cache plus the broadcast."""
    known: set[tuple] = set(p.user_cells[user - 1])
    items: list[tuple[BitRef, ...]] = list(p.user_xor_items[user - 1])
    combos: list[RandomCombinations] = []
    for msg in t.messages:
        if isinstance(msg, RandomCombinations):
            combos.append(msg)
        elif len(msg.parts) == 1:
            known.add(msg.parts[0].key)
        else:
            items.append(msg.parts)

    def cell_known(ref: BitRef) -> bool:
        return ref.length == 0 or ref.key in known

    progress = True
    while progress:
        progress = False
        rest = []
        for parts in items:
            unknown = [ref for ref in parts if not cell_known(ref)]
            if len(unknown) == 1:
                known.add(unknown[0].key)
                progress = True
            elif len(unknown) > 1:
                rest.append(parts)
        items = rest
        remaining_combos = []
        for msg in combos:
            covered = np.zeros(msg.span, dtype=bool)
            for key in known:
                if key[0] == msg.file:
                    pos = p.cells[key].positions
                    pos = pos[pos < msg.span]
                    covered[pos] = True
            missing = int(msg.span - covered.sum())
            if msg.count >= missing:
                if p.n <= RANK_CHECK_MAX_N and missing > 0:
                    cols = np.flatnonzero(~covered)
                    rank = _gf2_rank(msg.coefficient_matrix()[:, cols])
                    if rank < missing:
                        remaining_combos.append(msg)
                        continue
                for key, ref in p.cells.items():
                    if key[0] == msg.file and ref.positions.size and ref.positions[0] < msg.span:
                        known.add(key)
                progress = True
            else:
                remaining_combos.append(msg)
        combos = remaining_combos

    need = p.description_len(user)
    target = t.demand[user - 1]
    have = np.zeros(need, dtype=bool)
    for key in known:
        if key[0] == target:
            pos = p.cells[key].positions
            pos = pos[pos < need]
            have[pos] = True
    return bool(have.all())


def verify_decode(p: ConcretePlacement, t: DeliveryTranscript) -> bool:
    """True iff every user reconstructs the first ceil(n r_k) bits of its file."""
    return all(
        _user_decodes(p, t, user) for user in range(1, p.scenario.num_users + 1)
    )


def worst_case_empirical_rate(
    p: ConcretePlacement,
    scheme: str,
    demands: Iterable[Sequence[int]] | None = None,
    seed: int = 0,
) -> float:
    """Max over demands of transcript bits over n; decode must succeed everywhere."""
    s = p.scenario
    if demands is None:
        if s.num_files**s.num_users > EXHAUSTIVE_DEMAND_LIMIT:
            raise CacheModelError(
                "demand space too large for exhaustive mode; pass a demand list"
            )
        demands = itertools.product(range(s.num_files), repeat=s.num_users)
    worst = 0.0
    for demand in demands:
        t = run_delivery(p, demand, scheme, seed)
        if not verify_decode(p, t):
            raise DecodeFailure(f"scheme {scheme} failed for demand {tuple(demand)}")
        worst = max(worst, t.total_bits / p.n)
    return worst


def verify_identity_appendix_d(
    k: int, i: int, t: Sequence[float]
) -> tuple[float, float]:
    """Subset-sum identity behind the layered delivery rate.

    Left side: exhaustive sum over nonempty subsets S of {i..K} of the
    expected fraction owned exactly by S minus its smallest-share member.
    Right side: ``sum_l prod_{j<=l} (1 - t_j)`` with shares sorted
    ascending.  The two agree for any share vector in [0, 1]^K.
    """
    if not 1 <= i <= k:
        raise CacheModelError(f"need 1 <= i <= K, got i={i}, K={k}")
    shares = {u: float(t[u - i]) for u in range(i, k + 1)}
    if any(not 0 <= v <= 1 for v in shares.values()):
        raise CacheModelError("shares must lie in [0, 1]")
    users = list(range(i, k + 1))
    lhs = 0.0
    for size in range(1, len(users) + 1):
        for subset in itertools.combinations(users, size):
            receiver = min(subset, key=lambda u: (shares[u], u))
            p = 1.0 - shares[receiver]
            for u in subset:
                if u != receiver:
                    p *= shares[u]
            for u in users:
                if u not in subset:
                    p *= 1.0 - shares[u]
            lhs += p
    rhs = 0.0
    running = 1.0
    for share in sorted(shares.values()):
        running *= 1.0 - share
        rhs += running
    return lhs, rhs
