"""PNG figures drawn from the CSV tables written by the experiments.

Only reads files; nothing here feeds back into a computation.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

params = {
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "figure.figsize": (4.2, 3.0),
    "figure.dpi": 150,
    "savefig.bbox": "tight",
}


def read_table(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    cols = {}
    for k in rows[0]:
        vals = [r[k] for r in rows]
        try:
            cols[k] = np.array([float(v) for v in vals])
        except ValueError:
            cols[k] = np.array(vals)
    return cols


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_spectra(path):
    t = read_table(path)
    fig, ax = plt.subplots()
    w = 0.4
    for off, name in ((-w / 2, "P_psi0"), (w / 2, "P_psi1")):
        ax.bar(t["m_z"] + off, t[name], width=w, label=name.replace("P_", ""))
    ax.set_xlabel(r"$m_z$")
    ax.set_ylabel("probability")
    ax.legend(frameon=False)
    return _save(fig, Path(path).with_suffix(".png"))


def plot_moments(path, x="t", group="lattice"):
    t = read_table(path)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(7, 2.8))
    groups = np.unique(t[group]) if group in t else [None]
    for g in groups:
        sel = slice(None) if g is None else t[group] == g
        a1.plot(t[x][sel], t["mean"][sel], label=g)
        a2.plot(t[x][sel], t["sd"][sel], label=g)
    a1.set_ylabel("mean"); a2.set_ylabel("SD")
    for a in (a1, a2):
        a.set_xlabel(x)
    if groups[0] is not None:
        a1.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, Path(path).with_suffix(".png"))


def plot_xy(path, x, ys, group=None, xlabel=None):
    t = read_table(path)
    fig, ax = plt.subplots()
    groups = np.unique(t[group]) if group else [None]
    for g in groups:
        sel = slice(None) if g is None else t[group] == g
        for y in ys:
            lab = y if g is None else f"{y} {group}={g:g}" if isinstance(g, float) else f"{y} {g}"
            ax.plot(t[x][sel], t[y][sel], marker="o", label=lab)
    ax.set_xlabel(xlabel or x)
    ax.legend(frameon=False)
    return _save(fig, Path(path).with_suffix(".png"))


def render(experiment: str, files) -> list[Path]:
    """Figures for the CSV outputs of one experiment."""
    files = [Path(f) for f in files if str(f).endswith(".csv")]
    out = []
    with plt.rc_context(params):
        for f in files:
            head = read_table(f)
            if "P_psi1" in head:
                out.append(plot_spectra(f))
            elif "round" in head:
                out.append(plot_moments(f, x="round", group=None))
            elif "mean" in head and "t" in head and "lattice" in head:
                out.append(plot_moments(f))
            elif experiment == "fidelity_curve":
                out.append(plot_xy(f, "N", ["fidelity", "population"], group="method"))
            elif experiment == "negativity_sweep":
                out.append(plot_xy(f, "eps", ["log_negativity"], group="N_h"))
            elif experiment == "mixed_fidelity":
                out.append(plot_xy(f, "eps", ["coherence_rel", "population"], group="N"))
            elif experiment == "loss_ep":
                out.append(plot_xy(f, "t", ["e_p_avg", "fidelity_bound"]))
            elif experiment == "extrapolate":
                out.append(plot_xy(f, "N", ["population"], group="eps"))
    return out
