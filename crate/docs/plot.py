"""Plot the TSV outputs of `retint intervals` and `retint conditional`.

Usage: python docs/plot.py OUT_DIR [PNG]
"""
import glob
import os
import sys

import matplotlib.pyplot as plt
import pandas as pd


def main():
    out = sys.argv[1]
    png = sys.argv[2] if len(sys.argv) > 2 else os.path.join(out, "pdfs.png")
    families = [
        ("pdf_q*.tsv", "raw"),
        ("pdf_scaled_q*.tsv", "scaled"),
        ("pdf_shuffled_q*.tsv", "shuffled"),
        ("cond_q2.0_Q*.tsv", "conditional, q=2"),
    ]
    fig, axes = plt.subplots(1, len(families), figsize=(5 * len(families), 4))
    for ax, (pattern, title) in zip(axes, families):
        for path in sorted(glob.glob(os.path.join(out, pattern))):
            d = pd.read_csv(path, sep="\t")
            d = d[d.density > 0]
            label = os.path.basename(path).removesuffix(".tsv")
            ax.loglog(d.bin_center, d.density, ".-", label=label)
        ax.set_title(title)
        ax.set_xlabel("interval")
        if ax.get_lines():
            ax.legend(fontsize=7)
    axes[0].set_ylabel("density")
    fig.tight_layout()
    fig.savefig(png, dpi=120)


if __name__ == "__main__":
    main()
