"""Optional figures for sweep results. CSV stays the primary output."""

from __future__ import annotations

from pathlib import Path


def plot_rows(rows, path, title=None):
    """Rate against the sweep variable, one line per scheme (and per P when several)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = list(rows)
    if not rows:
        raise ValueError("no rows to plot")
    var = rows[0].sweep_var
    multi_p = len({r.P_db for r in rows}) > 1 and var != "P"
    series = {}
    for r in rows:
        label = f"{r.scheme} @ {r.P_db:g} dB" if multi_p else r.scheme
        series.setdefault(label, []).append(r)

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for label, pts in series.items():
        # C = "all" means one subgroup per source
        xs = [p.K1 if p.sweep_value == "all" else p.sweep_value for p in pts]
        ys = [p.rate_bits for p in pts]
        errs = [3 * p.std_err for p in pts]
        ax.errorbar(xs, ys, yerr=errs, marker="o", ms=3, capsize=2, label=label)
    ax.set_xlabel("P (dB)" if var == "P" else var)
    ax.set_ylabel("computation rate (bits per channel use)")
    if var == "K1":
        ax.set_xscale("log", base=2)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
