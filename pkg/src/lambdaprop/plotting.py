"""Optional figure rendering for CLI reports.

Figures go next to the CSV output; nothing here is needed for the data path.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.2,
    "savefig.dpi": 150,
}


def _rows(eta, picks=4):
    # a handful of eta slices, always including both ends
    n = len(eta)
    if n <= picks:
        return list(range(n))
    return sorted(set(np.linspace(0, n - 1, picks).round().astype(int)))


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def populations_figure(tau, eta, pops, path, analytic=None):
    """P1, P2, P3 against tau for a few eta slices."""
    with plt.rc_context(STYLE):
        rows = _rows(eta)
        fig, axes = plt.subplots(len(rows), 1, sharex=True, squeeze=False,
                                 figsize=(6.4, 1.6 * len(rows) + 0.6))
        for ax, n in zip(axes[:, 0], rows):
            for k, c in enumerate(("C0", "C3", "C2")):
                ax.plot(tau, pops[n, :, k], color=c, label=f"P{k + 1}")
            if analytic is not None:
                ax.plot(tau, analytic[n], "k--", lw=0.9, label="P3 analytic")
            ax.set_ylim(-0.02, 1.02)
            ax.set_ylabel(f"qTx={eta[n]:g}")
        axes[0, 0].legend(ncol=4, loc="upper left")
        axes[-1, 0].set_xlabel("tau / T")
        return _save(fig, path)


def fields_figure(tau, eta, omega_p, omega_s, path):
    """Normalised |Omega_p| and |Omega_s| for a few eta slices."""
    with plt.rc_context(STYLE):
        rows = _rows(eta, picks=6)
        fig, axes = plt.subplots(len(rows), 1, sharex=True, squeeze=False,
                                 figsize=(6.4, 1.3 * len(rows) + 0.6))
        top = max(np.max(np.abs(omega_p[0])), np.max(np.abs(omega_s[0])), 1e-300)
        for ax, n in zip(axes[:, 0], rows):
            ax.plot(tau, np.abs(omega_p[n]) / top, label="pump")
            ax.plot(tau, np.abs(omega_s[n]) / top, label="Stokes")
            ax.set_ylabel(f"z={eta[n]:g}")
        axes[0, 0].legend(loc="upper right")
        axes[-1, 0].set_xlabel("tau / T")
        return _save(fig, path)


def projections_figure(tau, eta, proj, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for n in _rows(eta):
            ax.plot(tau, proj[n, :, 2], label=f"P_d, qTx={eta[n]:g}")
        ax.set_xlabel("tau / T")
        ax.set_ylabel("dark-state projection")
        ax.legend()
        return _save(fig, path)


def scan_figure(values, final_p3, param, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(values, final_p3, "o-")
        ax.axhline(0.99, color="0.6", lw=0.8, ls=":")
        ax.set_xlabel(param)
        ax.set_ylabel("final P3")
        return _save(fig, path)
