"""Figure rendering for the report path. Every function writes one PNG."""

from __future__ import annotations

import contextlib
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.4,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


@contextlib.contextmanager
def _figure(path, xlabel, ylabel, title=None, polar=False):
    with plt.rc_context(STYLE):
        fig = plt.figure()
        ax = fig.add_subplot(projection="polar" if polar else None)
        if not polar:
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        try:
            yield ax
            if ax.get_legend_handles_labels()[0]:
                ax.legend()
            path = Path(path)
            tmp = path.with_name(f".{path.name}.tmp{os.getpid()}.png")
            fig.savefig(tmp, metadata={"Software": None})
            os.replace(tmp, path)
        finally:
            plt.close(fig)


def core_delays(path, wavelengths, delays, core_ids, tau_ref=0.0, title=None):
    """Group delay per core versus wavelength; ``delays`` is (core, wavelength)."""
    with _figure(path, "Wavelength (nm)", "Group delay - reference (ps/km)", title) as ax:
        for cid, row in zip(core_ids, delays):
            ax.plot(wavelengths, np.asarray(row) - tau_ref, label=f"core {cid}")


def crosstalk(path, radii, xtalk_db, peak_radius):
    with _figure(path, "Bend radius (mm)", "Worst-case crosstalk (dB)") as ax:
        ax.plot(radii, xtalk_db, color="k")
        if np.isfinite(peak_radius):
            ax.axvline(peak_radius, ls="--", color="tab:red", label=f"R_pk = {peak_radius:.1f} mm")


def per_core_curves(path, x, curves, core_ids, xlabel, ylabel, logy=False):
    with _figure(path, xlabel, ylabel) as ax:
        for cid, y in zip(core_ids, curves):
            ax.plot(x, y, label=f"core {cid}")
        if logy:
            ax.set_yscale("symlog", linthresh=1.0)


def filter_responses(path, responses):
    """``responses`` maps a label to (frequencies Hz, magnitude dB)."""
    with _figure(path, "RF frequency (GHz)", "|H(f)| (dB)") as ax:
        for (label, (f, mag)), ls in zip(responses.items(), ("-", "--", ":", "-.")):
            ax.plot(np.asarray(f) / 1e9, np.maximum(mag, -60), ls, label=label)
        ax.set_ylim(-60, 2)


def array_factors(path, patterns, polar=False):
    """``patterns`` maps a label to (angles deg, AF dB)."""
    xlabel = "Angle (deg, polar axis)" if polar else "Angle (deg)"
    with _figure(path, xlabel, "|AF| (dB)") as ax:
        for (label, (ang, af)), ls in zip(patterns.items(), ("-", "--", ":", "-.")):
            ax.plot(ang, np.maximum(af, -40), ls, label=label)
        ax.set_ylim(-40, 2)


def gnuplot_script(csv_name, xcol, ycol, xlabel, ylabel, title="") -> str:
    """Plain gnuplot commands plotting one CSV written next to the script."""
    return (
        "set datafile separator ','\n"
        f"set xlabel '{xlabel}'\n"
        f"set ylabel '{ylabel}'\n"
        f"set title '{title}'\n"
        "set grid\n"
        f"plot '{csv_name}' using {xcol}:{ycol} skip 1 with lines notitle\n"
    )
