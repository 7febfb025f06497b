"""Offline SVG plots of trajectory and training-metric CSVs.

Output is byte-stable for identical input: the SVG id salt is fixed and the
creation date is left out.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .env import TRAJECTORY_COLUMNS  # noqa: E402
from .harness import read_trajectory_csv  # noqa: E402

TRAJECTORY_PLOTS = ("path", "altitude", "motors", "reward")
_RC = {"svg.hashsalt": "blimplab", "svg.fonttype": "none", "figure.figsize": (6.0, 4.0)}


def _col(data, name):
    return data[:, TRAJECTORY_COLUMNS.index(name)]


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_trajectory(csv_path, out_dir=None, stem=None, waypoints=None):
    """Planar path, altitude, motor and reward plots of one trajectory CSV.

    Files are ``<stem>_{path,altitude,motors,reward}.svg``. ``waypoints``
    (NED) are drawn on the path plot when given. Returns the written paths.
    """
    csv_path = Path(csv_path)
    out_dir = Path(out_dir) if out_dir else csv_path.parent
    stem = stem or csv_path.stem
    out_dir.mkdir(parents=True, exist_ok=True)
    data = read_trajectory_csv(csv_path)
    t = _col(data, "time")
    written = []
    with plt.rc_context(_RC):
        # plotted in ENU: x east, y north, altitude up
        fig, ax = plt.subplots()
        ax.plot(_col(data, "east"), _col(data, "north"), lw=1.0, label="path")
        if waypoints:
            wp = np.asarray(waypoints, dtype=float)
            ax.scatter(wp[:, 1], wp[:, 0], marker="x", color="k", label="waypoints")
        ax.set_xlabel("east [m]")
        ax.set_ylabel("north [m]")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(loc="best")
        written.append(out_dir / f"{stem}_path.svg")
        _save(fig, written[-1])

        fig, ax = plt.subplots()
        ax.plot(t, -_col(data, "down"), lw=1.0)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("altitude [m]")
        written.append(out_dir / f"{stem}_altitude.svg")
        _save(fig, written[-1])

        fig, ax = plt.subplots()
        for name in ("m0", "m2"):
            ax.plot(t, _col(data, name), lw=1.0, label=name)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("motor command")
        ax.legend(loc="best")
        written.append(out_dir / f"{stem}_motors.svg")
        _save(fig, written[-1])

        fig, ax = plt.subplots()
        for name in ("r_success", "r_track", "r_act", "r_total"):
            ax.plot(t, _col(data, name), lw=1.0, label=name)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("reward")
        ax.legend(loc="best")
        written.append(out_dir / f"{stem}_reward.svg")
        _save(fig, written[-1])
    return written


def plot_metrics(csv_path, out_dir=None, stem=None):
    """Episode return against environment steps from a training metrics CSV."""
    csv_path = Path(csv_path)
    out_dir = Path(out_dir) if out_dir else csv_path.parent
    stem = stem or csv_path.stem
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    steps = [int(r["env_step"]) for r in rows]
    returns = [float(r["return"]) for r in rows]
    out = out_dir / f"{stem}_returns.svg"
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(steps, returns, lw=0.8)
        ax.set_xlabel("environment step")
        ax.set_ylabel("episode return")
        _save(fig, out)
    return [out]
