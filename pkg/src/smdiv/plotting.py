"""Figure rendering for the report path: SER curves and determinant spectra."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .analysis import GainReport  # noqa: E402
from .simkit import SimResult  # noqa: E402

_MARKERS = ("o", "s", "^", "d", "v", "p")


def plot_ser_curves(result: SimResult, path, title: str | None = None):
    """Semilog SER-vs-SNR curves, one per scheme, with 95% interval bars."""
    fig, ax = plt.subplots(figsize=(7, 5))
    schemes = []
    for p in result.points:
        if p.scheme not in schemes:
            schemes.append(p.scheme)
    for k, scheme in enumerate(schemes):
        pts = [p for p in result.scheme_points(scheme) if p.errors > 0]
        if not pts:
            continue
        pts.sort(key=lambda p: p.snr_db)
        x = [p.snr_db for p in pts]
        y = [p.ser for p in pts]
        lo = [max(p.ci[0], 1e-12) for p in pts]
        hi = [p.ci[1] for p in pts]
        yerr = [[y_i - lo_i for y_i, lo_i in zip(y, lo)],
                [hi_i - y_i for y_i, hi_i in zip(y, hi)]]
        ax.errorbar(x, y, yerr=yerr, marker=_MARKERS[k % len(_MARKERS)],
                    capsize=3, label=f"{scheme} ({pts[0].decoder})")
    ax.set_yscale("log")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("block error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_gain_histogram(reports: list[GainReport], path, title: str | None = None):
    """Log-binned histogram of the pairwise determinant values per report."""
    fig, ax = plt.subplots(figsize=(7, 5))
    for report in reports:
        finite = {b: c for b, c in report.histogram.items() if math.isfinite(b)}
        if not finite:
            continue
        bins = sorted(finite)
        ax.step(bins, [finite[b] for b in bins], where="post",
                label=f"M={report.m} {report.normalization} (min {report.gain:.4g})")
        zeros = report.histogram.get(-math.inf, 0)
        if zeros:
            ax.annotate(f"{zeros} zero pairs", xy=(bins[0], finite[bins[0]]),
                        fontsize=8)
    ax.set_xlabel("log10 |det| bin")
    ax.set_ylabel("pair count")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
