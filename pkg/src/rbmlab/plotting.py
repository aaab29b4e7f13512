"""Matplotlib renderings of experiment tables (file output only, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .spectralstats import GOE_GAP_RATIO, POISSON_GAP_RATIO  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 5.0
STYLE = {
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 120,
    "lines.markersize": 4,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "rbmlab",
}
# PNG metadata without a timestamp keeps reruns byte-stable
_META = {"Software": None}


def _columns(rows, n):
    return [np.array([r[k] for r in rows], dtype=float) for k in range(n)]


def _save(fig, path: Path):
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def _per_grid(rows):
    groups = {}
    for r in rows:
        groups.setdefault(int(r[0]), []).append(r)
    return groups


def plot_dos(rows, path):
    fig, ax = plt.subplots()
    for g, rs in _per_grid(rows).items():
        _, E, rho, nsc = _columns(rs, 4)
        ax.step(E, rho, where="mid", label=f"empirical (grid {g})")
    E = np.linspace(-2, 2, 400)
    ax.plot(E, np.sqrt(np.clip(4 - E**2, 0, None)) / (2 * np.pi), "k--", label="semicircle")
    ax.set_xlabel("E")
    ax.set_ylabel("density")
    ax.legend()
    _save(fig, path)


def plot_counts(rows, path):
    fig, ax = plt.subplots()
    for g, rs in _per_grid(rows).items():
        _, k, obs, poi = _columns(rs, 4)
        ax.bar(k, obs, width=0.8, alpha=0.6, label=f"observed (grid {g})")
        ax.plot(k, poi, "ko", label="Poisson")
    ax.set_xlabel("count k")
    ax.set_ylabel("probability")
    ax.legend()
    _save(fig, path)


def plot_psi(rows, path):
    fig, ax = plt.subplots()
    for g, rs in _per_grid(rows).items():
        _, t, re, im, se = _columns(rs, 5)
        ax.plot(t, np.hypot(re, im), label=f"|deviation| (grid {g})")
        ax.plot(t, 3 * se, ":", label="3 stderr")
    ax.set_xlabel("t")
    ax.set_ylabel("deviation from Poisson exponent")
    ax.legend()
    _save(fig, path)


def plot_moments(rows, path):
    fig, ax = plt.subplots()
    for g, rs in _per_grid(rows).items():
        _, lens, m1, m2 = _columns(rs, 4)
        ax.loglog(lens, m1, "o-", label=f"first moment (grid {g})")
        pos = m2 > 0
        ax.loglog(lens[pos], m2[pos], "s-", label=f"second factorial moment (grid {g})")
    ax.set_xlabel("rescaled window length")
    ax.set_ylabel("moment per window")
    ax.legend()
    _save(fig, path)


def plot_intensity(rows, path):
    fig, ax = plt.subplots()
    for g, rs in _per_grid(rows).items():
        _, E, b, se, ref = _columns(rs, 5)
        ax.errorbar(E, b, yerr=se, fmt="o", label=f"b_N (grid {g})")
        ax.plot(E, ref, "k--", label="semicircle density x |I|")
    ax.set_xlabel("E0")
    ax.set_ylabel("intensity")
    ax.legend()
    _save(fig, path)


def plot_gap_ratio(rows, path):
    fig, ax = plt.subplots()
    _, a, r, se = _columns(rows, 4)
    ax.errorbar(a, r, yerr=se, fmt="o-", label="mean r")
    ax.axhline(POISSON_GAP_RATIO, color="C2", ls="--", label="Poisson")
    ax.axhline(GOE_GAP_RATIO, color="C3", ls="--", label="GOE")
    ax.set_xlabel("alpha")
    ax.set_ylabel("mean gap ratio")
    ax.legend()
    _save(fig, path)


def plot_block_compare(rows, path):
    fig, ax = plt.subplots()
    _, N, d, se, match = _columns(rows, 5)
    ax.errorbar(N, d, yerr=se, fmt="o-", label="E|xi - zeta|")
    ax.plot(N, 1 - match, "s--", label="P(xi != zeta)")
    ax.set_xscale("log")
    ax.set_xlabel("N")
    ax.legend()
    _save(fig, path)


def plot_decay(rows, path):
    fig, ax = plt.subplots()
    for g, rs in _per_grid(rows).items():
        _, d, logm, rel = _columns(rs, 4)
        ok = np.isfinite(logm)
        ax.errorbar(d[ok], logm[ok], yerr=rel[ok], fmt=".", label=f"grid {g}")
    ax.set_xlabel("distance d")
    ax.set_ylabel("log fractional moment")
    ax.legend()
    _save(fig, path)


PLOTTERS = {
    "dos": plot_dos, "counts": plot_counts, "psi_deviation": plot_psi,
    "moments": plot_moments, "intensity": plot_intensity, "gap_ratio": plot_gap_ratio,
    "block_compare": plot_block_compare, "decay": plot_decay,
}


def render_figures(kind: str, summary: dict, tables: dict, outdir) -> list[Path]:
    """Write one PNG per non-empty table; returns the written paths."""
    outdir = Path(outdir)
    written = []
    with plt.rc_context(STYLE):
        for name, (_, rows) in tables.items():
            if not rows or name not in PLOTTERS:
                continue
            path = outdir / f"{name}.png"
            PLOTTERS[name](rows, path)
            written.append(path)
    return written
