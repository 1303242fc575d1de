#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SVG charts of the sweep tables. The CSV is the result, charts are for looking at it.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import matplotlib.patches as mpatches
import numpy as np

from Colors import ALGORITHM_COLORS, COL_BACKGROUND, COL_EDGE, COL_DBN_ERROR, COL_DBN_TIME, configColor
from verbosity import makePrintLog, verbosityMedium

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("charts", FILE_VERBOSITY)

# same bytes for the same data
matplotlib.rcParams["svg.hashsalt"] = "podSim"
matplotlib.rcParams["svg.fonttype"] = "none"


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None}, facecolor=COL_BACKGROUND)
    plt.close(fig)
    printLog("Wrote chart " + path)
    return path


def _float(value):
    try:
        return float(value)
    except (TypeError, ValueError):
        return float("nan")


def plotAllreduceSweep(rows, path):
    """Log-log completion time over chip count, one line per algorithm."""
    fig, ax = plt.subplots(figsize=(6, 4))
    byAlgorithm = {}
    for row in rows:
        t = _float(row["time_seconds"])
        if np.isnan(t) or t <= 0:
            continue
        byAlgorithm.setdefault(row["algorithm"], []).append((int(row["chips"]), t))

    for algorithm, points in byAlgorithm.items():
        points.sort()
        xs, ys = zip(*points)
        ax.plot(xs, ys, marker="o", label=algorithm, color=ALGORITHM_COLORS.get(algorithm, COL_EDGE))

    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("chips")
    ax.set_ylabel("gradient summation time (s)")
    ax.set_title("1-D vs 2-D all-reduce")
    if byAlgorithm:
        ax.legend()
    return _save(fig, path)


def plotPipelineBench(rows, path):
    """Bars of mean images/s with 25%/75% quartile error bars."""
    fig, ax = plt.subplots(figsize=(8, 4))
    labels = [row["config_label"] for row in rows]
    means = np.array([_float(row["mean_ips"]) for row in rows])
    q25 = np.array([_float(row["q25_ips"]) for row in rows])
    q75 = np.array([_float(row["q75_ips"]) for row in rows])
    errors = np.vstack([np.clip(means - q25, 0, None), np.clip(q75 - means, 0, None)])

    x = np.arange(len(rows))
    ax.bar(x, means, yerr=errors, capsize=3, color=[configColor(l) for l in labels], edgecolor=COL_EDGE)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("images / second")
    ax.set_title("input pipeline additions and ablations")
    return _save(fig, path)


def plotDbnSweep(rows, path):
    """Oracle error and moment-reduction time over group size."""
    fig, ax = plt.subplots(figsize=(6, 4))
    sizes = [int(row["group_size"]) for row in rows]
    errors = [max(_float(row["max_abs_error_vs_concat_oracle"]), 1e-18) for row in rows]
    ax.plot(sizes, errors, marker="o", color=COL_DBN_ERROR)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("group size")
    ax.set_ylabel("max |error| vs concatenated BN")

    handles = [mpatches.Patch(color=COL_DBN_ERROR, label="error")]
    if rows and "moment_reduce_seconds" in rows[0]:
        twin = ax.twinx()
        twin.plot(sizes, [_float(row["moment_reduce_seconds"]) for row in rows], marker="s", color=COL_DBN_TIME)
        twin.set_ylabel("moment reduction time (s)")
        handles.append(mpatches.Patch(color=COL_DBN_TIME, label="reduction time"))
    ax.legend(handles=handles, loc="upper left")
    ax.set_title("distributed batch normalization")
    return _save(fig, path)
