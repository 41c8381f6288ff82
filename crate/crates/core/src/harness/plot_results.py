#!/usr/bin/env python3
"""Plots the CSVs written by `irs-noma simulate`.

Usage: python3 plot_results.py [results_dir]
Writes ee_vs_n.png, ici.png and convergence.png next to the CSVs.
"""
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
summary = pd.read_csv(out / "summary.csv", na_values="NA")
ici = pd.read_csv(out / "ici.csv", na_values="NA")

fig, ax = plt.subplots()
for (method, m), g in summary.groupby(["method", "M"]):
    g = g.sort_values("N")
    ax.errorbar(g["N"], g["mean_ee"], yerr=g["std_ee"], marker="o", capsize=3, label=f"{method}, M={m}")
ax.set_xlabel("IRS elements N")
ax.set_ylabel("energy efficiency (bits/J)")
ax.legend(fontsize="small")
fig.savefig(out / "ee_vs_n.png", dpi=150, bbox_inches="tight")

fig, ax = plt.subplots()
for (method, m), g in ici.groupby(["method", "M"]):
    g = g.sort_values("N")
    ax.semilogy(g["N"], g["mean_far_ici"], marker="s", label=f"{method}, M={m}")
ax.set_xlabel("IRS elements N")
ax.set_ylabel("far-user ICI (W)")
ax.legend(fontsize="small")
fig.savefig(out / "ici.png", dpi=150, bbox_inches="tight")

fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for ax, stage in zip(axes, ["stage1", "stage2"]):
    conv = pd.read_csv(out / f"convergence_{stage}.csv", na_values="NA")
    for (n, m), g in conv.groupby(["N", "M"]):
        ax.plot(g["iteration"], g["mean_ee"], marker=".", label=f"N={n}, M={m}")
    ax.set_title(stage)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean EE (bits/J)")
    ax.legend(fontsize="small")
fig.savefig(out / "convergence.png", dpi=150, bbox_inches="tight")
