"""Plots from the CSV files written by the `psmgd` CLI.

    python python/plot_results.py front results/front.csv -o front.png
    python python/plot_results.py trajectory results/trajectory_seed0.csv -o traj.png
    python python/plot_results.py rates results/rates_nc.csv -o rates.png
"""

import argparse
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def pareto_segment(ax, d=5, n=200):
    # f values along x = s * (1, ..., 1) / sqrt(d), s in [-1, 1]
    f1, f2 = [], []
    for k in range(n + 1):
        s = -1.0 + 2.0 * k / n
        f1.append(1.0 - math.exp(-((s - 1.0) ** 2)))
        f2.append(1.0 - math.exp(-((s + 1.0) ** 2)))
    ax.plot(f1, f2, color="0.7", lw=1, label="Pareto front")


def plot_front(path, ax):
    df = pd.read_csv(path)
    pareto_segment(ax)
    ax.scatter(df["f_0"], df["f_1"], s=18, zorder=3, label="final points")
    ax.set_xlabel("$f_1$")
    ax.set_ylabel("$f_2$")
    ax.legend()


def plot_trajectory(path, ax):
    df = pd.read_csv(path)
    for col in [c for c in df.columns if c.startswith("f_")]:
        ax.plot(df["t"], df[col], label=col)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.legend()


def plot_rates(path, ax):
    df = pd.read_csv(path)
    x = df.columns[0]
    ax.loglog(df[x], df["metric"], marker="o" if len(df) < 50 else None)
    ax.set_xlabel(x)
    ax.set_ylabel("metric")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("kind", choices=["front", "trajectory", "rates"])
    parser.add_argument("csv")
    parser.add_argument("-o", "--output", default="plot.png")
    args = parser.parse_args()

    fig, ax = plt.subplots(figsize=(5, 4))
    {"front": plot_front, "trajectory": plot_trajectory, "rates": plot_rates}[args.kind](args.csv, ax)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
