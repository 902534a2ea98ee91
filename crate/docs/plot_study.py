#!/usr/bin/env python3
"""Plot the CSV tables written by `homogvi study` and `homogvi mscheck`.

    python3 docs/plot_study.py out/study.csv [out/mscheck.csv ...] -o study.png

Every table starts with a "# schema=1" line; study tables get a log-log plot
of the L2 error and H1 seminorm against eps, mscheck tables a plot of the gap.
"""

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_table(path):
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != "# schema=1":
            sys.exit(f"{path}: unsupported schema line {first!r}")
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else {}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("tables", nargs="+")
    ap.add_argument("-o", "--output", default="study.png")
    args = ap.parse_args()

    fig, axes = plt.subplots(1, len(args.tables), figsize=(6 * len(args.tables), 4.5), squeeze=False)
    for ax, path in zip(axes[0], args.tables):
        t = read_table(path)
        if "l2_error" in t:
            ax.loglog(t["eps"], t["l2_error"], "o-", label="‖u_ε − u₀‖_L²")
            ax.loglog(t["eps"], t["h1_seminorm"], "s--", label="|u_ε|_H¹")
            ref = [t["l2_error"][0] * e / t["eps"][0] for e in t["eps"]]
            ax.loglog(t["eps"], ref, ":", color="gray", label="slope 1")
        elif "gap" in t:
            gaps = [max(g, 1e-17) for g in t["gap"]]
            ax.loglog(t["eps"], gaps, "o-", label="|I_ε − limit|")
        else:
            sys.exit(f"{path}: unknown column set {sorted(t)}")
        ax.set_xlabel("ε")
        ax.invert_xaxis()
        ax.grid(True, which="both", alpha=0.3)
        ax.set_title(path)
        ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
