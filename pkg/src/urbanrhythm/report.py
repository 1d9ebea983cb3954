"""Static visual summaries: state strip, 24-hour rings, feature scatter.

Primary outputs are standalone SVG documents built as plain text (diff-able,
no randomness or timestamps embedded). The same views are also rendered to
PNG via matplotlib for quick inspection next to the CSV artifacts.
"""

from __future__ import annotations

import math

import numpy as np

from .daytypes import DayTypeCalendar
from .errors import EmptyInput, InvalidConfig
from .states import StateSeries

# 16 visually distinct colors; states index into it directly, so any two
# states collide only past 16 clusters.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
    "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
)


def state_color(state: int) -> str:
    return PALETTE[state % len(PALETTE)]


def _svg(width: int, height: int, body: list) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    )
    return "\n".join([head] + body + ["</svg>"]) + "\n"


def render_strip(series: StateSeries, calendar: DayTypeCalendar) -> str:
    """One row per day, one colored cell per slot, day-type labels in the
    left gutter. Total cell count equals the series length."""
    if series.n_slots == 0:
        raise EmptyInput("empty state series")
    spd = calendar.slots_per_day
    n_days = -(-series.n_slots // spd)
    cell, gutter, pad = 12, 88, 4
    width = gutter + spd * cell + pad
    height = n_days * cell + 2 * pad
    body = []
    for day in range(n_days):
        label = f"{calendar.date_of_day(day).isoformat()} {calendar.day_type_of_day(day)}"
        y = pad + day * cell
        body.append(
            f'<text x="2" y="{y + cell - 3}" font-size="8" '
            f'font-family="monospace">{label}</text>'
        )
    for slot in range(series.n_slots):
        day, sod = slot // spd, slot % spd
        x = gutter + sod * cell
        y = pad + day * cell
        body.append(
            f'<rect class="slot" x="{x}" y="{y}" width="{cell}" height="{cell}" '
            f'fill="{state_color(int(series.labels[slot]))}"/>'
        )
    return _svg(width, height, body)


def _sector_path(cx, cy, r0, r1, a0, a1) -> str:
    # Angles in degrees, 0 at 12 o'clock, clockwise.
    def point(r, a):
        rad = math.radians(a - 90.0)
        return cx + r * math.cos(rad), cy + r * math.sin(rad)

    x0, y0 = point(r1, a0)
    x1, y1 = point(r1, a1)
    x2, y2 = point(r0, a1)
    x3, y3 = point(r0, a0)
    return (
        f"M {x0:.3f} {y0:.3f} A {r1} {r1} 0 0 1 {x1:.3f} {y1:.3f} "
        f"L {x2:.3f} {y2:.3f} A {r0} {r0} 0 0 0 {x3:.3f} {y3:.3f} Z"
    )


def modal_ring(series: StateSeries, calendar: DayTypeCalendar, day_type: str) -> list:
    """Modal state per slot-of-day across all days of the given type (ties go
    to the smallest state label)."""
    spd = calendar.slots_per_day
    days = [
        d
        for d in range(-(-series.n_slots // spd))
        if calendar.day_type_of_day(d) == day_type
    ]
    if not days:
        raise InvalidConfig(f"no {day_type!r} days in the series")
    ring = []
    for sod in range(spd):
        votes = {}
        for d in days:
            slot = d * spd + sod
            if slot < series.n_slots:
                lab = int(series.labels[slot])
                votes[lab] = votes.get(lab, 0) + 1
        ring.append(max(votes, key=lambda lab: (votes[lab], -lab)))
    return ring


def render_rings(series: StateSeries, calendar: DayTypeCalendar, groups) -> str:
    """One 24-hour pie ring per day-type group, inner to outer, each with one
    sector per slot of day."""
    if series.n_slots == 0:
        raise EmptyInput("empty state series")
    spd = calendar.slots_per_day
    groups = list(groups)
    size = 60 + 40 * len(groups)
    cx = cy = size
    body = []
    step = 360.0 / spd
    for g, day_type in enumerate(groups):
        ring = modal_ring(series, calendar, day_type)
        r0, r1 = 40 + 40 * g, 40 + 40 * (g + 1) - 4
        for sod, state in enumerate(ring):
            path = _sector_path(cx, cy, r0, r1, sod * step, (sod + 1) * step)
            body.append(
                f'<path class="sector" d="{path}" fill="{state_color(state)}" '
                f'stroke="white" stroke-width="0.5"/>'
            )
        body.append(
            f'<text x="{cx + 4}" y="{cy - r0 - 14}" font-size="9" '
            f'font-family="monospace">{day_type}</text>'
        )
    return _svg(2 * size, 2 * size, body)


def render_scatter(coords2d, labels) -> str:
    """Colored scatter of the 2-D feature projection, one point per slot."""
    coords = np.asarray(coords2d, dtype=float)
    labels = np.asarray(labels)
    if len(coords) == 0:
        raise EmptyInput("no points")
    size, margin = 480, 30
    lo = coords.min(axis=0)
    span = coords.max(axis=0) - lo
    span[span == 0.0] = 1.0
    body = []
    for (x, y), lab in zip(coords, labels):
        px = margin + (x - lo[0]) / span[0] * (size - 2 * margin)
        py = size - margin - (y - lo[1]) / span[1] * (size - 2 * margin)
        body.append(
            f'<circle class="pt" cx="{px:.3f}" cy="{py:.3f}" r="3" '
            f'fill="{state_color(int(lab))}" fill-opacity="0.8"/>'
        )
    return _svg(size, size, body)


def _label_grid(series: StateSeries, spd: int) -> np.ndarray:
    n_days = -(-series.n_slots // spd)
    grid = np.full((n_days, spd), -1, dtype=float)
    for slot in range(series.n_slots):
        grid[slot // spd, slot % spd] = series.labels[slot]
    return grid


def render_strip_png(series: StateSeries, calendar: DayTypeCalendar, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import pyplot as plt
    from matplotlib.colors import BoundaryNorm, ListedColormap

    k = max(int(series.labels.max()) + 1, 1)
    cmap = ListedColormap([state_color(s) for s in range(k)])
    norm = BoundaryNorm(np.arange(-0.5, k + 0.5), k)
    grid = _label_grid(series, calendar.slots_per_day)
    fig, ax = plt.subplots(figsize=(10, max(2, grid.shape[0] * 0.18)))
    ax.imshow(grid, aspect="auto", cmap=cmap, norm=norm, interpolation="nearest")
    ax.set_xlabel("slot of day")
    ax.set_ylabel("day")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def render_scatter_png(coords2d, labels, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import pyplot as plt

    coords = np.asarray(coords2d, dtype=float)
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(6, 6))
    for state in sorted(set(int(x) for x in labels)):
        mask = labels == state
        ax.scatter(
            coords[mask, 0],
            coords[mask, 1],
            s=12,
            color=state_color(state),
            label=f"state {state}",
            alpha=0.8,
            linewidths=0,
        )
    ax.legend(fontsize=7, markerscale=1.5)
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
