#!/usr/bin/env python3
"""Plot CSV output from `coherdist sweep` or `coherdist catalysis`.

Usage:
    python3 plot_sweep.py sweep.csv [-o plot.png]

The file kind is detected from the header. Sweep files plot probability
against eps (one line per (class, m) pair); catalysis files plot the
assisted/unassisted probabilities and their ratio against q (one line per
delta value).
"""

import argparse
import csv
import sys
from collections import defaultdict


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        sys.exit(f"{path}: no data rows")
    return rows


def plot_sweep(rows, ax):
    series = defaultdict(list)
    for r in rows:
        if r["status"] != "Optimal":
            continue
        series[(r["class"], r["m"])].append((float(r["eps"]), float(r["probability"])))
    for (cls, m), pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=f"{cls}, m={m}")
    ax.set_xlabel("eps")
    ax.set_ylabel("success probability")


def plot_catalysis(rows, ax):
    series = defaultdict(list)
    for r in rows:
        if r["status"] != "Optimal":
            continue
        q = float(r["q"])
        series[("assisted", r["delta"])].append((q, float(r["p_assisted"])))
        series[("unassisted", r["delta"])].append((q, float(r["p_unassisted"])))
        series[("ratio", r["delta"])].append((q, float(r["ratio"])))
    for (kind, delta), pts in sorted(series.items()):
        pts.sort()
        style = {"assisted": "-", "unassisted": "--", "ratio": ":"}[kind]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], style, marker=".",
                label=f"{kind}, delta={delta}")
    ax.set_xlabel("q")
    ax.set_ylabel("probability / enhancement ratio")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv_file")
    ap.add_argument("-o", "--output", help="write PNG instead of showing a window")
    args = ap.parse_args()

    import matplotlib
    if args.output:
        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = load(args.csv_file)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if "p_assisted" in rows[0]:
        plot_catalysis(rows, ax)
    else:
        plot_sweep(rows, ax)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    if args.output:
        fig.savefig(args.output, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
