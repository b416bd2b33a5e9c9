"""Plot the CSV files written by `optarb`.

    python scripts/plot.py OUT_DIR [--save DIR]

Draws whatever is present in OUT_DIR: surface.csv, upath.csv,
trajectories.csv, bsde.csv and k_trace.csv.
"""

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def read(path):
    return pd.read_csv(path, comment="#")


def surface(df, ax):
    x1 = np.sort(df.x1.unique())
    x2 = np.sort(df.x2.unique())
    u = df.pivot(index="x2", columns="x1", values="u").loc[x2, x1].to_numpy()
    g1, g2 = np.meshgrid(x1, x2)
    ax.plot_surface(g1, g2, u, cmap="viridis")
    ax.set(xlabel="x1", ylabel="x2", zlabel="u")


def upath(df, ax):
    ax.plot(df.t, df.u, marker=".")
    ax.fill_between(df.t, df.u - 2.576 * df.std_err, df.u + 2.576 * df.std_err, alpha=0.3)
    ax.set(xlabel="t", ylabel="u(T - t, X(t))")


def trajectories(df, ax):
    coords = [c for c in df.columns if c.startswith("z")]
    for _, path in df.groupby("path_id"):
        style = "r-" if path.hit.iloc[0] else "b-"
        for c in coords:
            ax.plot(path.t, path[c], style, lw=0.6)
    ax.set(xlabel="t", ylabel="z_i(t)")


def bsde(df, trace, ax):
    for lam, rung in trace.groupby("lambda"):
        ax.plot(rung.t, rung.k, label=f"lambda={lam:g}")
    ax.set(xlabel="t", ylabel="K_t", title="y0: " + ", ".join(f"{y:.4f}" for y in df.y0))
    ax.legend()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("out", type=Path)
    parser.add_argument("--save", type=Path, help="write PNGs here instead of showing")
    args = parser.parse_args()

    figures = {}
    if (args.out / "surface.csv").exists():
        fig = plt.figure()
        surface(read(args.out / "surface.csv"), fig.add_subplot(projection="3d"))
        figures["surface"] = fig
    if (args.out / "upath.csv").exists():
        fig, ax = plt.subplots()
        upath(read(args.out / "upath.csv"), ax)
        figures["upath"] = fig
    if (args.out / "trajectories.csv").exists():
        fig, ax = plt.subplots()
        trajectories(read(args.out / "trajectories.csv"), ax)
        figures["trajectories"] = fig
    if (args.out / "bsde.csv").exists():
        fig, ax = plt.subplots()
        bsde(read(args.out / "bsde.csv"), read(args.out / "k_trace.csv"), ax)
        figures["bsde"] = fig

    if args.save:
        args.save.mkdir(parents=True, exist_ok=True)
        for name, fig in figures.items():
            fig.savefig(args.save / f"{name}.png", dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
