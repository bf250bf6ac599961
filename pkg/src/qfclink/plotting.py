"""
Figure rendering for CLI reports. Uses the Agg backend; every function
writes one PNG and returns its path.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "xtick.top": True,
    "ytick.right": True,
    "lines.linewidth": 1.5,
    "savefig.dpi": 150,
    "figure.figsize": (4.5, 3.2),
}

COLORS = {"red": "#d62728", "blue": "#1f77b4", "green": "#2ca02c", "black": "k"}


def _save(fig, path) -> Path:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.stem}.", suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", bbox_inches="tight", metadata={"Software": None})
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def plot_pump_scan(scan, path) -> Path:
    """Efficiency and noise vs pump (left), SNR vs pump (right)."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax3) = plt.subplots(1, 2, figsize=(8.0, 3.2))
        ax1.plot(scan.pump_w, 100 * scan.eta_c, color=COLORS["black"])
        ax1.set_xlabel("Pump power (W)")
        ax1.set_ylabel("Conversion efficiency (%)")
        ax2 = ax1.twinx()
        ax2.plot(scan.pump_w, scan.noise_rate_hz, "--", color=COLORS["blue"])
        ax2.set_ylabel("Noise rate (Hz)", color=COLORS["blue"])

        finite = np.isfinite(scan.snr)
        ax3.plot(scan.pump_w[finite], scan.snr[finite], color=COLORS["red"])
        if np.isfinite(scan.best_snr):
            ax3.axvline(scan.best_pump_w, color="0.6", lw=0.8)
        ax3.set_xlabel("Pump power (W)")
        ax3.set_ylabel("SNR")
        fig.tight_layout()
        return _save(fig, path)


def plot_length_scan(scan, path, label: str | None = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(scan.length_km, 100 * scan.fidelity, color=COLORS["red"], label=label)
        ax.axhline(50, color="0.6", lw=0.8, ls=":")
        ax.set_xlabel("Fiber length (km)")
        ax.set_ylabel("Fidelity (%)")
        if label:
            ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_fidelity_curves(curves, path, points=()) -> Path:
    """``curves``: iterable of ``(label, lengths, fidelity, linestyle, color)``;
    ``points``: iterable of ``(length, fidelity, marker, color)``."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, lengths, fid, ls, color in curves:
            ax.plot(lengths, 100 * np.asarray(fid), ls, color=color, label=label)
        for length, fid, marker, color in points:
            ax.plot([length], [100 * fid], marker, color=color, mfc="none")
        ax.set_xlabel("Fiber length (km)")
        ax.set_ylabel("Fidelity (%)")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_histogram(hist, gate, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(hist.bin_starts_ns, hist.counts, width=hist.bin_ns, align="edge",
               color="0.3", lw=0)
        for off, color in ((gate.signal_offset_ns, COLORS["red"]),
                           (gate.noise_offset_ns, COLORS["blue"])):
            ax.axvspan(off, off + gate.signal_width_ns, color=color, alpha=0.15)
        ax.set_xlim(0, gate.rep_period_ns)
        ax.set_xlabel("Time within period (ns)")
        ax.set_ylabel(f"Counts per {hist.bin_ns} ns")
        fig.tight_layout()
        return _save(fig, path)


def plot_fit(x, y, grid, y_hat, y_err, path, ylabel: str, yscale: float = 1.0) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(x, yscale * np.asarray(y), "o", color=COLORS["red"], mfc="none", label="data")
        ax.plot(grid, yscale * y_hat, color=COLORS["black"], label="fit")
        ax.fill_between(grid, yscale * (y_hat - y_err), yscale * (y_hat + y_err),
                        color="0.7", alpha=0.5, lw=0)
        ax.set_xlabel("Pump power (W)")
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)
