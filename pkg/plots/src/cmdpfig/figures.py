"""Panel and composite rendering for run-log comparisons.

Each panel shows one metric: a mean-over-seeds line per evaluator budget M
with a min-max band. Plotted points equal CSV values exactly unless a
rolling window is explicitly requested; rendering is deterministic (fixed
style, no timestamps), so identical inputs give identical images.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .readers import METRICS, RunLog, SchemaError, load_glob

METRIC_LABELS = {
    "gap_running_avg": "running-average optimality gap",
    "violation_running": "running constraint violation",
}

_COLORS = {16: "#1f77b4", 64: "#ff7f0e", 256: "#2ca02c"}
_FALLBACK_COLORS = ("#d62728", "#9467bd", "#8c564b", "#e377c2")


@dataclass(frozen=True)
class FigureSpec:
    input_glob: str
    metric: str
    output: str
    log_scale: bool = False
    rolling_window: int = 0      # 0 disables smoothing; points equal CSV values

    def __post_init__(self):
        if self.metric not in METRICS:
            raise SchemaError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.rolling_window < 0:
            raise SchemaError("rolling_window must be >= 0")


@dataclass(frozen=True)
class PanelSeries:
    """Extracted, group-aggregated data behind one panel."""

    metric: str
    algo: str
    iters: np.ndarray
    groups: dict = field(default_factory=dict)  # M -> [n_seeds, T] raw values

    def mean(self, m: int) -> np.ndarray:
        return self.groups[m].mean(axis=0)

    def band(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        return self.groups[m].min(axis=0), self.groups[m].max(axis=0)


def extract_series(runs: list[RunLog], metric: str) -> PanelSeries:
    """Group runs by M; values are taken from the CSV columns untouched."""
    groups: dict[int, list[np.ndarray]] = {}
    for run in runs:
        groups.setdefault(run.m, []).append(run.columns[metric])
    stacked = {m: np.stack(vals) for m, vals in sorted(groups.items())}
    return PanelSeries(metric=metric, algo=runs[0].algo,
                       iters=runs[0].columns["iter"], groups=stacked)


def verify_extraction(runs: list[RunLog], series: PanelSeries) -> None:
    """Self-check: the plotted series must equal the CSV values exactly."""
    for run in runs:
        expect = run.columns[series.metric]
        got = series.groups[run.m]
        if not any(np.array_equal(expect, row) for row in got):
            raise SchemaError(f"{run.path}: extracted series differs from CSV values")


def _smooth(values: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return values
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def _draw_panel(ax, series: PanelSeries, spec: FigureSpec, title: str | None = None):
    fallback = iter(_FALLBACK_COLORS)
    for m, values in series.groups.items():
        color = _COLORS.get(m) or next(fallback)
        mean = _smooth(series.mean(m), spec.rolling_window)
        xs = series.iters[: len(mean)] if spec.rolling_window > 1 else series.iters
        lo, hi = series.band(m)
        ax.fill_between(series.iters, lo, hi, alpha=0.18, color=color, linewidth=0)
        ax.plot(xs, mean, color=color, label=f"M={m}")
    ax.set_xlabel("iteration")
    ax.set_ylabel(METRIC_LABELS[series.metric])
    if title:
        ax.set_title(title)
    if spec.log_scale:
        ax.set_yscale("log")
    ax.legend()


def render_panel(spec: FigureSpec) -> str:
    """Render one metric panel to spec.output; returns the path."""
    runs = load_glob(spec.input_glob)
    series = extract_series(runs, spec.metric)
    verify_extraction(runs, series)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=150)
    _draw_panel(ax, series, spec)
    fig.tight_layout()
    _save(fig, spec.output)
    return spec.output


FIGURE1_PANELS = (
    ("npgpd", "gap_running_avg", "Optimality gap, NPGPD-HF"),
    ("npgpd", "violation_running", "Constraint violation, NPGPD-HF"),
    ("zpgpd", "gap_running_avg", "Optimality gap, ZPGPD-HF"),
    ("zpgpd", "violation_running", "Constraint violation, ZPGPD-HF"),
)


def render_figure1(root: str, output: str, log_scale: bool = False) -> str:
    """2x2 composite over a sweep tree root/{npgpd,zpgpd}/M=*/seed=*.csv."""
    panel_data = []
    for algo, metric, title in FIGURE1_PANELS:
        pattern = os.path.join(root, algo, "M=*", "seed=*.csv")
        try:
            runs = load_glob(pattern)
        except SchemaError as err:
            raise SchemaError(f"panel {title!r}: {err}") from err
        series = extract_series(runs, metric)
        verify_extraction(runs, series)
        panel_data.append((series, metric, title))
    fig, axes = plt.subplots(2, 2, figsize=(11.0, 7.5), dpi=150)
    for ax, (series, metric, title) in zip(axes.flat, panel_data):
        spec = FigureSpec(input_glob="<composite>", metric=metric, output=output,
                          log_scale=log_scale and metric == "gap_running_avg")
        _draw_panel(ax, series, spec, title=title)
    fig.tight_layout()
    _save(fig, output)
    return output


def _save(fig, path: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    # Pinned metadata keeps re-renders byte-identical across runs.
    fig.savefig(path, metadata={"Software": "cmdpfig"})
    plt.close(fig)
