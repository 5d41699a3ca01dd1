#!/usr/bin/env python3
"""Plot the CSV/JSON outputs of the gfmvs CLI.

Subcommands mirror the producing CLI commands:

  plot_results.py sweep      sweep.csv       [--out sweep.png]
  plot_results.py timeseries timeseries.csv  [--metrics metrics.json] [--out ...]
  plot_results.py analysis   analysis.csv    [--out analysis.png]

Each reads a file written by ``gfmvs analyze|sweep|simulate`` and saves a
PNG next to it (or at --out).
"""

import argparse
import csv
import json
import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_table(path):
    """CSV written by the toolkit: header row, numeric cells, '#' comments."""
    rows, comments = [], []
    with open(path, newline="") as f:
        header = None
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line)
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = cells
            else:
                rows.append(cells)
    cols = {name: [] for name in header}
    for r in rows:
        for name, cell in zip(header, r):
            try:
                cols[name].append(float(cell))
            except ValueError:
                cols[name].append(cell)
    return cols, comments


def plot_sweep(args):
    cols, comments = read_table(args.file)
    ang = cols["angle_deg"]

    fig, (ax_v, ax_m) = plt.subplots(
        2, 1, figsize=(7, 7), sharex=True, height_ratios=[3, 1]
    )
    ax_v.plot(ang, cols["v_c_pos_V"], "o-", label="positive-sequence |v_c|")
    ax_v.plot(ang, cols["v_c_neg_V"], "s-", label="negative-sequence |v_c|")
    ax_v.plot(ang, cols["dev_pos_V"], "--", label="positive deviation")
    ax_v.plot(ang, cols["dev_neg_V"], "--", label="negative deviation")
    for c in comments:
        if "best_angle_deg" in c:
            best = float(c.split("=")[1])
            ax_v.axvline(best, color="k", lw=0.8, ls=":")
            ax_v.annotate(
                f"best {best:g}°",
                (best, ax_v.get_ylim()[1]),
                ha="right",
                va="top",
                fontsize=9,
            )
    ax_v.set_ylabel("V (peak, phase-neutral)")
    ax_v.legend(loc="center left", fontsize=9)
    ax_v.grid(alpha=0.3)

    ax_m.plot(ang, cols["vi_mag_ohm"], "v-", color="tab:gray")
    ax_m.set_ylabel("|z_v| (Ω)")
    ax_m.set_xlabel("virtual-impedance angle (deg)")
    ax_m.grid(alpha=0.3)

    i_max = cols["i_max_A"]
    fig.suptitle(
        f"VI angle sweep at i_max = {i_max[0]:.4g} A "
        f"(all points {min(i_max):.6g}–{max(i_max):.6g} A)"
    )
    return fig


def plot_timeseries(args):
    cols, _ = read_table(args.file)
    t = cols["time_s"]

    fig, axes = plt.subplots(4, 1, figsize=(9, 10), sharex=True)
    for ph in "abc":
        axes[0].plot(t, cols[f"v_c{ph}"], lw=0.6, label=f"phase {ph}")
        axes[1].plot(t, cols[f"i_o{ph}"], lw=0.6, label=f"phase {ph}")
    axes[0].set_ylabel("v_c (V)")
    axes[1].set_ylabel("i_o (A)")

    axes[2].plot(t, cols["v_c_pos_mag"], label="|v_c| positive")
    axes[2].plot(t, cols["v_c_neg_mag"], label="|v_c| negative")
    axes[2].set_ylabel("sequence magnitude (V)")

    axes[3].plot(t, cols["r_v"], label="r_v")
    axes[3].plot(t, cols["x_v"], label="x_v")
    axes[3].set_ylabel("virtual impedance (Ω)")
    axes[3].set_xlabel("time (s)")

    if args.metrics:
        with open(args.metrics) as f:
            m = json.load(f)
        for ax in axes:
            ax.axvspan(
                m["window_start_s"], m["window_end_s"], color="tab:green",
                alpha=0.12
            )
        axes[2].set_title(
            f"metrics window: |v_c+| = {m['v_c_pos_mag_V']:.4g} V, "
            f"|v_c−| = {m['v_c_neg_mag_V']:.4g} V, "
            f"i_max = {m['i_max_A']:.4g} A",
            fontsize=10,
        )
    for ax in axes:
        ax.grid(alpha=0.3)
        ax.legend(loc="upper right", fontsize=8)
    return fig


def plot_analysis(args):
    cols, _ = read_table(args.file)
    values = {
        q: complex(re, im)
        for q, re, im in zip(cols["quantity"], cols["re"], cols["im"])
    }

    fig, (ax_v, ax_i) = plt.subplots(1, 2, figsize=(11, 5.5))
    groups = {
        ax_v: ["v_cref_pos", "v_f_pos", "v_f_neg", "v_c_pos", "v_c_neg"],
        ax_i: ["i_pos", "i_neg", "i_a", "i_b", "i_c"],
    }
    for ax, names in groups.items():
        lim = 0.0
        for name in names:
            z = values.get(name)
            if z is None:
                continue
            ax.annotate(
                "",
                xy=(z.real, z.imag),
                xytext=(0, 0),
                arrowprops=dict(arrowstyle="->", lw=1.4),
            )
            ax.annotate(name, (z.real, z.imag), fontsize=9)
            lim = max(lim, abs(z))
        lim = 1.15 * lim or 1.0
        ax.set_xlim(-lim, lim)
        ax.set_ylim(-lim, lim)
        ax.set_aspect("equal")
        ax.axhline(0, color="k", lw=0.5)
        ax.axvline(0, color="k", lw=0.5)
        ax.grid(alpha=0.3)
    ax_v.set_title("voltage phasors (V)")
    ax_i.set_title("current phasors (A)")

    dev = abs(values.get("v_cref_pos", 0) - values.get("v_c_pos", 0))
    fig.suptitle(
        f"fault operating point: |i_max| = {abs(values['i_max']):.4g} A, "
        f"positive-sequence deviation {dev:.4g} V"
    )
    return fig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind, fn in [
        ("sweep", plot_sweep),
        ("timeseries", plot_timeseries),
        ("analysis", plot_analysis),
    ]:
        p = sub.add_parser(kind)
        p.add_argument("file", help=f"{kind} CSV written by the CLI")
        p.add_argument("--out", help="output image (default: <file>.png)")
        if kind == "timeseries":
            p.add_argument(
                "--metrics", help="metrics.json to shade the settled window"
            )
        p.set_defaults(fn=fn)

    args = ap.parse_args()
    fig = args.fn(args)
    out = args.out or str(pathlib.Path(args.file).with_suffix(".png"))
    fig.savefig(out, dpi=130, bbox_inches="tight")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
