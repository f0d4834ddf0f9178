"""
Visualization utilities for runner reports (SVG)
"""
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

# fixed element ids and no timestamp, so reruns give identical files
plt.rcParams["svg.hashsalt"] = "skeleton-walks"
sns.set_theme(style="whitegrid")

QUANTITY_LABELS = {
    "intrinsic": "E[d_G(X_0, X_m)]",
    "euclidean": "E[|X_m - X_0|]",
    "return_prob": "P[X_2m = X_0]",
}


class ReportVisualizations:
    """Creates static figures for the runner outputs"""

    @staticmethod
    def save_svg(fig, path: Union[str, Path]) -> Path:
        path = Path(path)
        fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
        plt.close(fig)
        return path

    @staticmethod
    def plot_exponents(table: pd.DataFrame, slopes: pd.DataFrame, path: Union[str, Path]) -> Path:
        """Log-log ensemble means with bootstrap bands, one panel per quantity and one line per n"""
        quantities = [q for q in QUANTITY_LABELS if f"{q}_mean" in table.columns]
        fig, axes = plt.subplots(1, len(quantities), figsize=(5 * len(quantities), 4), squeeze=False)
        for ax, quantity in zip(axes[0], quantities):
            for n, group in table.groupby("n", sort=True):
                mean = group[f"{quantity}_mean"]
                keep = mean > 0
                ax.plot(group["m"][keep], mean[keep], marker="o", markersize=3, label=f"n={n}")
                ax.fill_between(group["m"][keep], group[f"{quantity}_lower"][keep],
                                group[f"{quantity}_upper"][keep], alpha=0.2)
            fitted = slopes[slopes["quantity"] == quantity]["slope"]
            title = QUANTITY_LABELS[quantity]
            if len(fitted):
                title += "  slope " + ", ".join(f"{s:.3f}" for s in fitted)
            ax.set(xscale="log", yscale="log", xlabel="m", title=title)
            ax.legend()
        return ReportVisualizations.save_svg(fig, path)

    @staticmethod
    def plot_condition_heatmap(table: pd.DataFrame, column: str, title: str, path: Union[str, Path]) -> Path:
        """Heatmap of one per-cell statistic over the (K, n) grid"""
        grid = table.pivot_table(index="K", columns="n", values=column, aggfunc="first")
        fig, ax = plt.subplots(figsize=(1.2 * len(grid.columns) + 3, 0.8 * len(grid.index) + 2))
        sns.heatmap(grid, annot=True, fmt=".3g", cmap="viridis", cbar_kws={"label": column}, ax=ax)
        ax.set_title(title)
        return ReportVisualizations.save_svg(fig, path)

    @staticmethod
    def plot_time_change(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
        """Rescaled time change and its two approximations against t, one faint line per replica"""
        fig, axes = plt.subplots(1, 3, figsize=(15, 4), sharey=True)
        for ax, column in zip(axes, ("raw", "averaged", "commute")):
            for _, group in frame.groupby("replica", sort=True):
                ax.plot(group["t"], group[column], color="steelblue", alpha=0.3, linewidth=1)
            median = frame.groupby("t", sort=True)[column].median()
            ax.plot(median.index, median.values, color="black", linewidth=2, label="median")
            limit = float(np.nanmax(frame["t"])) if len(frame) else 1.0
            ax.set(xlabel="t", title=column, xlim=(0, limit))
            ax.legend()
        axes[0].set_ylabel("n^-3/2 A")
        return ReportVisualizations.save_svg(fig, path)

    @staticmethod
    def plot_local_time_gaps(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
        """Distribution of the median crossing gap per lattice step"""
        fig, ax = plt.subplots(figsize=(6, 4))
        sns.boxplot(data=frame, x="h_fraction", y="gap_median", ax=ax)
        ax.set(xlabel="h / shortest edge resistance", ylabel="median |crossing estimate - L_t|",
               title="Crossing estimate of local time")
        return ReportVisualizations.save_svg(fig, path)
