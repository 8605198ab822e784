"""Render sweep results to a figure alongside the delimited output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_STYLES = {
    "bound": {"linestyle": ":", "color": "black"},
    "baseline:prefix-uncoded": {"linestyle": "--", "color": "gray"},
}


def render_sweep(rows: list[dict], path: str) -> str:
    """Plot delivery rate versus the sweep variable, one curve per scheme.

    Rows with non-numeric rates (inapplicable schemes) are skipped.
    Returns the path written.
    """
    curves: dict[str, tuple[list[float], list[float]]] = {}
    sweep_var = rows[0]["sweep_var"] if rows else "value"
    for row in rows:
        rate = row.get("rate")
        if not isinstance(rate, (int, float)):
            continue
        xs, ys = curves.setdefault(row["scheme"], ([], []))
        xs.append(float(row["sweep_value"]))
        ys.append(float(rate))
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    for scheme, (xs, ys) in curves.items():
        ax.plot(xs, ys, marker="o", markersize=3, label=scheme, **_STYLES.get(scheme, {}))
    ax.set_xlabel(sweep_var)
    ax.set_ylabel("delivery rate (bits/sample)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
