#!/usr/bin/env python3
"""Violin plot of per-eigenvalue relative errors from a compare CSV.

Accepts the CSV emitted by `genspec compare` (columns model, index,
index_nontrivial, estimate_re, ..., error, absolute_error) or the tidy
error file written by the acceptance suite (columns model, index,
index_nontrivial, estimate, reference, rel_error).

Usage: plot_errors.py errors.csv [out.png]
"""

import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> None:
    if len(sys.argv) < 2:
        sys.exit(__doc__.strip())
    path = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else "errors.png"

    groups = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            err = row.get("rel_error") or row.get("error")
            # skip the trivial eigenvalue: its error column is absolute
            if row.get("absolute_error") == "true" or row.get("index_nontrivial") in ("", "0"):
                continue
            groups[int(row["index_nontrivial"])].append(abs(float(err)))

    if not groups:
        sys.exit("no nontrivial eigenvalue errors found in " + path)

    keys = sorted(groups)
    fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(keys), 4))
    ax.violinplot([groups[k] for k in keys], showmedians=True)
    ax.set_xticks(range(1, len(keys) + 1))
    ax.set_xticklabels([rf"$\lambda_{{{k + 1}}}$" for k in keys])
    ax.set_ylabel("relative error")
    ax.set_title(path)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out} ({sum(len(v) for v in groups.values())} errors, "
          f"{len(keys)} eigenvalues)")


if __name__ == "__main__":
    main()
