"""Experiment runner: scenario/sweep configs in, CSV or JSON tables out.

Two subcommands:

* ``single``: evaluate a scheme list on one scenario file.
* ``sweep``: evaluate a scheme list along a one-parameter scenario family
  and reproduce the rate-versus-parameter curves; ``--plot`` additionally
  renders the curves to an image next to the delimited output.

Row schema (CSV column order) is fixed: sweep_var, sweep_value, N, K,
r_1..r_K, M_1..M_K, scheme, rate, bound, gap, empirical_rate, seeds,
flags.  Rates of schemes whose shape precondition a scenario violates are
emitted as ``n/a`` rows.  Exit codes: 0 success, 1 config error,
2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass
from typing import Sequence

from . import bitsim
from .bounds import best_lower_bound
from .centralized_layered import (
    best_centralized,
    oca_allocation,
    pca_allocation,
    total_rate_centralized,
)
from .centralized_small import rate_2user_nfile, rate_2x2
from .decentralized import (
    decentralized_rate_alg3,
    lcd1_rate,
    lcd2_rate,
    uncoded_rate,
)
from .model import (
    CacheModelError,
    Scenario,
    make_scenario,
    scenario_from_dict,
)

RATE_BELOW_BOUND_TOL = 1e-9

SCHEME_LABELS = (
    "bound",
    "centralized-2x2",
    "centralized-2user",
    "centralized-pca",
    "centralized-oca",
    "centralized-best",
    "decentralized-lcd1",
    "decentralized-lcd2",
    "decentralized-alg3",
    "baseline:prefix-uncoded",
)

SWEEP_VARIABLES = ("uniform-cache", "scaled-cache", "qos-spread", "cache-skew")


class ConfigError(CacheModelError):
    """The configuration violates its schema or names unknown schemes."""


class SchemeShapeError(CacheModelError):
    """The scheme's shape precondition fails for this scenario."""


@dataclass(frozen=True)
class SweepConfig:
    """A validated sweep: base scenario template plus a one-variable family."""

    base: Scenario
    variable: str
    grid: tuple[float, ...]
    schemes: tuple[str, ...]
    coefficients: tuple[float, ...] | None = None
    level: float | None = None
    pivot: float | None = None
    bitsim_n: int | None = None
    bitsim_seeds: int = 20
    seed: int = 0


def _check_schemes(schemes: Sequence[str]) -> tuple[str, ...]:
    if not schemes:
        raise ConfigError("scheme list must not be empty")
    unknown = [x for x in schemes if x not in SCHEME_LABELS]
    if unknown:
        raise ConfigError(f"unknown schemes {unknown}; known: {list(SCHEME_LABELS)}")
    return tuple(schemes)


def scenario_at(config: SweepConfig, value: float) -> Scenario:
    """Scenario of the family at one grid value."""
    base = config.base
    k = base.num_users
    if config.variable == "uniform-cache":
        caches = [value] * k
        rates = base.layer_rates
    elif config.variable == "scaled-cache":
        caches = [c * value for c in config.coefficients]
        rates = base.layer_rates
    elif config.variable == "qos-spread":
        rates = [config.level + (u - (k + 1) / 2) * value for u in range(1, k + 1)]
        caches = base.cache_sizes
    else:  # cache-skew
        caches = [config.level + (u - config.pivot) * value for u in range(1, k + 1)]
        rates = base.layer_rates
    try:
        return make_scenario(
            base.num_files, k, rates, caches, base.successively_refinable
        )
    except CacheModelError as exc:
        raise ConfigError(
            f"grid value {value} yields an invalid scenario: {exc}"
        ) from exc


def sweep_config_from_dict(d: dict) -> SweepConfig:
    try:
        base = scenario_from_dict(d["base"])
        sweep = d["sweep"]
        variable = sweep["variable"]
        grid = tuple(float(v) for v in sweep["grid"])
        schemes = _check_schemes(d["schemes"])
    except (KeyError, TypeError, ValueError, CacheModelError) as exc:
        raise ConfigError(f"bad sweep config: {exc}") from exc
    if variable not in SWEEP_VARIABLES:
        raise ConfigError(f"unknown sweep variable {variable!r}; known: {SWEEP_VARIABLES}")
    if not grid:
        raise ConfigError("sweep grid must not be empty")
    coefficients = None
    if variable == "scaled-cache":
        if "coefficients" not in sweep:
            raise ConfigError("scaled-cache sweep needs per-user coefficients")
        coefficients = tuple(float(c) for c in sweep["coefficients"])
        if len(coefficients) != base.num_users:
            raise ConfigError("need one coefficient per user")
    level = sweep.get("level")
    pivot = sweep.get("pivot")
    if variable == "qos-spread" and level is None:
        raise ConfigError("qos-spread sweep needs a 'level'")
    if variable == "cache-skew" and (level is None or pivot is None):
        raise ConfigError("cache-skew sweep needs 'level' and 'pivot'")
    b = d.get("bitsim", {})
    config = SweepConfig(
        base=base,
        variable=variable,
        grid=grid,
        schemes=schemes,
        coefficients=coefficients,
        level=None if level is None else float(level),
        pivot=None if pivot is None else float(pivot),
        bitsim_n=b.get("n"),
        bitsim_seeds=int(b.get("seeds", 20)),
        seed=int(d.get("seed", 0)),
    )
    for value in config.grid:
        scenario_at(config, value)  # raises ConfigError on invalid grid points
    return config


def _analytic_rate(s: Scenario, scheme: str) -> float:
    if scheme == "bound":
        return best_lower_bound(s)
    if scheme == "centralized-2x2":
        if s.num_files != 2 or s.num_users != 2:
            raise SchemeShapeError("centralized-2x2 needs N=K=2")
        return rate_2x2(s)
    if scheme == "centralized-2user":
        if s.num_users != 2 or s.num_files < 2:
            raise SchemeShapeError("centralized-2user needs K=2 and N>=2")
        return rate_2user_nfile(s)
    if scheme == "centralized-pca":
        if s.top_rate <= 0:
            return 0.0
        return total_rate_centralized(s, pca_allocation(s))
    if scheme == "centralized-oca":
        return total_rate_centralized(s, oca_allocation(s))
    if scheme == "centralized-best":
        return best_centralized(s).rate
    if scheme == "decentralized-lcd1":
        return lcd1_rate(s)
    if scheme == "decentralized-lcd2":
        return lcd2_rate(s)
    if scheme == "decentralized-alg3":
        return decentralized_rate_alg3(s)
    if scheme == "baseline:prefix-uncoded":
        return uncoded_rate(s)
    raise ConfigError(f"unknown scheme {scheme!r}")


def _empirical_rate(
    s: Scenario, scheme: str, n: int, seeds: int, seed_base: int
) -> tuple[float | None, int]:
    """Mean worst-case bit-level rate, or None when no simulation applies."""
    if scheme == "centralized-2x2" and s.num_files == 2 and s.num_users == 2:
        p = bitsim.materialize_2x2(s, n, seed_base)
        return bitsim.worst_case_empirical_rate(p, scheme), 1
    if scheme == "centralized-2user" and s.num_users == 2 and s.num_files >= 2:
        p = bitsim.materialize_2user_nfile(s, n, seed_base)
        return bitsim.worst_case_empirical_rate(p, scheme), 1
    if scheme in ("decentralized-lcd1", "decentralized-lcd2"):
        if s.num_files**s.num_users > bitsim.EXHAUSTIVE_DEMAND_LIMIT:
            return None, 0
        values = []
        for rep in range(seeds):
            p = bitsim.materialize_decentralized(s, n, seed_base + rep)
            values.append(bitsim.worst_case_empirical_rate(p, scheme))
        return sum(values) / len(values), seeds
    return None, 0


def _row(
    s: Scenario,
    scheme: str,
    sweep_var: str,
    sweep_value,
    bitsim_n: int | None,
    bitsim_seeds: int,
    seed_base: int,
) -> dict:
    flags = [] if s.successively_refinable else ["informational-bound"]
    bound = best_lower_bound(s)
    row = {
        "sweep_var": sweep_var,
        "sweep_value": sweep_value,
        "N": s.num_files,
        "K": s.num_users,
        "rates": s.layer_rates,
        "caches": s.cache_sizes,
        "scheme": scheme,
        "bound": bound,
        "rate": None,
        "gap": None,
        "empirical_rate": None,
        "seeds": 0,
        "flags": "",
    }
    try:
        rate = _analytic_rate(s, scheme)
    except SchemeShapeError:
        row["flags"] = ";".join(flags + ["n/a"])
        return row
    row["rate"] = rate
    row["gap"] = rate - bound
    if bitsim_n:
        empirical, used = _empirical_rate(s, scheme, bitsim_n, bitsim_seeds, seed_base)
        row["empirical_rate"] = empirical
        row["seeds"] = used
    row["flags"] = ";".join(flags)
    return row


def run_sweep(config: SweepConfig) -> list[dict]:
    """One row per (grid point, scheme), grid-major, schemes as listed."""
    rows = []
    for idx, value in enumerate(config.grid):
        s = scenario_at(config, value)
        for scheme in config.schemes:
            rows.append(
                _row(
                    s,
                    scheme,
                    config.variable,
                    value,
                    config.bitsim_n,
                    config.bitsim_seeds,
                    config.seed + 10_000 * idx,
                )
            )
    return rows


def run_single(
    s: Scenario,
    schemes: Sequence[str],
    bitsim_n: int | None = None,
    bitsim_seeds: int = 20,
    seed: int = 0,
) -> list[dict]:
    schemes = _check_schemes(schemes)
    return [
        _row(s, scheme, "single", "", bitsim_n, bitsim_seeds, seed)
        for scheme in schemes
    ]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def rows_to_csv(rows: list[dict], k: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = (
        ["sweep_var", "sweep_value", "N", "K"]
        + [f"r_{i}" for i in range(1, k + 1)]
        + [f"M_{i}" for i in range(1, k + 1)]
        + ["scheme", "rate", "bound", "gap", "empirical_rate", "seeds", "flags"]
    )
    writer.writerow(header)
    for row in rows:
        rate = "n/a" if row["rate"] is None else _fmt(row["rate"])
        gap = "n/a" if row["gap"] is None else _fmt(row["gap"])
        writer.writerow(
            [row["sweep_var"], _fmt(row["sweep_value"]), row["N"], row["K"]]
            + [_fmt(r) for r in row["rates"]]
            + [_fmt(m) for m in row["caches"]]
            + [
                row["scheme"],
                rate,
                _fmt(row["bound"]),
                gap,
                _fmt(row["empirical_rate"]),
                row["seeds"],
                row["flags"],
            ]
        )
    return buf.getvalue()


def rows_to_json(rows: list[dict]) -> str:
    records = []
    for row in rows:
        rec = {
            "sweep_var": row["sweep_var"],
            "sweep_value": row["sweep_value"],
            "N": row["N"],
            "K": row["K"],
        }
        for i, r in enumerate(row["rates"], start=1):
            rec[f"r_{i}"] = r
        for i, m in enumerate(row["caches"], start=1):
            rec[f"M_{i}"] = m
        rec.update(
            scheme=row["scheme"],
            rate=row["rate"],
            bound=row["bound"],
            gap=row["gap"],
            empirical_rate=row["empirical_rate"],
            seeds=row["seeds"],
            flags=row["flags"],
        )
        records.append(rec)
    return json.dumps(records, indent=2) + "\n"


def _check_invariants(rows: list[dict]) -> list[str]:
    problems = []
    for row in rows:
        rate = row["rate"]
        if rate is None or "informational-bound" in row["flags"]:
            continue
        if rate < row["bound"] - RATE_BELOW_BOUND_TOL:
            problems.append(
                f"scheme {row['scheme']} rate {rate} fell below bound {row['bound']} "
                f"at {row['sweep_var']}={row['sweep_value']}"
            )
        empirical = row["empirical_rate"]
        if empirical is not None and not math.isfinite(empirical):
            problems.append(f"non-finite empirical rate for {row['scheme']}")
    return problems


def _emit(rows: list[dict], k: int, out: str | None) -> None:
    if out is None:
        sys.stdout.write(rows_to_csv(rows, k))
    elif out.endswith(".json"):
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(rows_to_json(rows))
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(rows_to_csv(rows, k))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qoscache",
        description="Delivery-rate experiments for cache-aided coded delivery "
        "with per-user quality targets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    single = sub.add_parser("single", help="evaluate schemes on one scenario file")
    single.add_argument("--config", required=True, help="scenario JSON file")
    single.add_argument("--schemes", required=True, help="comma-separated scheme list")
    single.add_argument("--out", default=None, help="output file (.csv or .json); stdout if omitted")
    single.add_argument("--bitsim-n", type=int, default=None, help="blocklength for bit-level validation")
    single.add_argument("--bitsim-seeds", type=int, default=20, help="replicates for random placements")

    sweep = sub.add_parser("sweep", help="evaluate schemes along a scenario family")
    sweep.add_argument("--config", required=True, help="sweep JSON file")
    sweep.add_argument("--out", default=None, help="output file (.csv or .json); stdout if omitted")
    sweep.add_argument("--schemes", default=None, help="override the config's scheme list")
    sweep.add_argument("--bitsim-n", type=int, default=None, help="override the config's blocklength")
    sweep.add_argument("--bitsim-seeds", type=int, default=None, help="override the config's replicate count")
    sweep.add_argument("--plot", default=None, help="also render the curves to this image file")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "single":
            with open(args.config, "r", encoding="utf-8") as fh:
                s = scenario_from_dict(json.load(fh))
            rows = run_single(
                s,
                [x.strip() for x in args.schemes.split(",") if x.strip()],
                bitsim_n=args.bitsim_n,
                bitsim_seeds=args.bitsim_seeds,
            )
            k = s.num_users
            plot = None
        else:
            with open(args.config, "r", encoding="utf-8") as fh:
                d = json.load(fh)
            if args.schemes:
                d["schemes"] = [x.strip() for x in args.schemes.split(",") if x.strip()]
            if args.bitsim_n is not None:
                d.setdefault("bitsim", {})["n"] = args.bitsim_n
            if args.bitsim_seeds is not None:
                d.setdefault("bitsim", {})["seeds"] = args.bitsim_seeds
            config = sweep_config_from_dict(d)
            rows = run_sweep(config)
            k = config.base.num_users
            plot = args.plot
    except (OSError, json.JSONDecodeError, ConfigError, CacheModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    problems = _check_invariants(rows)
    if problems:
        for p in problems:
            print(f"invariant violation: {p}", file=sys.stderr)
        return 2

    _emit(rows, k, args.out)
    if plot:
        from . import plotting

        plotting.render_sweep(rows, plot)
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
