"""App-usage vs city-state association via a TF-IDF style statistic.

For a usage count matrix U (apps x states), each cell is scored as
(U_ij / row_sum_i) * ln(col_sum_j / U_ij), with zero cells scored 0 by the
continuous extension x * ln(c / x) -> 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class UsageMatrix:
    apps: tuple  # row labels
    states: tuple  # column labels
    counts: np.ndarray  # (n_apps, n_states) non-negative

    def __post_init__(self):
        if self.counts.shape != (len(self.apps), len(self.states)):
            raise DimensionMismatch("counts shape does not match labels")


@dataclass(frozen=True)
class TfidfResult:
    matrix: UsageMatrix
    scores: np.ndarray
    zero_rows: tuple  # app labels with no usage anywhere (scores undefined, left 0)
    zero_cols: tuple  # state labels with no usage anywhere


def tfidf(matrix: UsageMatrix) -> TfidfResult:
    U = np.asarray(matrix.counts, dtype=float)
    if np.any(U < 0) or not np.all(np.isfinite(U)):
        raise DimensionMismatch("usage counts must be finite and non-negative")
    row_sums = U.sum(axis=1)
    col_sums = U.sum(axis=0)
    zero_rows = tuple(a for a, s in zip(matrix.apps, row_sums) if s == 0)
    zero_cols = tuple(s for s, c in zip(matrix.states, col_sums) if c == 0)

    scores = np.zeros_like(U)
    pos = U > 0
    tf = np.divide(U, row_sums[:, None], out=np.zeros_like(U), where=row_sums[:, None] > 0)
    idf = np.zeros_like(U)
    idf[pos] = np.log(np.broadcast_to(col_sums, U.shape)[pos] / U[pos])
    scores = tf * idf
    return TfidfResult(
        matrix=matrix, scores=scores, zero_rows=zero_rows, zero_cols=zero_cols
    )


def read_usage_csv(path) -> UsageMatrix:
    """Aggregated input: app_category,state,count (duplicates summed)."""
    cells = {}
    apps, states = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            app, state, count = row["app_category"], row["state"], int(row["count"])
            if app not in cells:
                cells[app] = {}
                apps.append(app)
            if state not in states:
                states.append(state)
            cells[app][state] = cells[app].get(state, 0) + count
    states = sorted(states)
    counts = np.array(
        [[cells[a].get(s, 0) for s in states] for a in apps], dtype=float
    )
    return UsageMatrix(apps=tuple(apps), states=tuple(states), counts=counts)


def aggregate_usage(usage_events, state_of_slot, slot_of_timestamp) -> UsageMatrix:
    """Join raw usage events (timestamp, app_category) against the state
    series and aggregate counts per (app, state)."""
    cells = {}
    apps, states = [], []
    for ts, app in usage_events:
        slot = slot_of_timestamp(ts)
        if slot is None:
            continue
        state = str(state_of_slot(slot))
        if app not in cells:
            cells[app] = {}
            apps.append(app)
        if state not in states:
            states.append(state)
        cells[app][state] = cells[app].get(state, 0) + 1
    states = sorted(states)
    counts = np.array(
        [[cells[a].get(s, 0) for s in states] for a in sorted(apps)], dtype=float
    )
    return UsageMatrix(apps=tuple(sorted(apps)), states=tuple(states), counts=counts)


def write_tfidf_csv(result: TfidfResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["app_category"] + list(result.matrix.states))
        for app, row in zip(result.matrix.apps, result.scores):
            w.writerow([app] + [f"{v:.6f}" for v in row])


_STARS = {0: "*", 1: "**", 2: "***"}


def tfidf_markdown(result: TfidfResult) -> str:
    """Markdown table with the top-3 apps per state starred (*, **, ***)."""
    apps, states = result.matrix.apps, result.matrix.states
    stars = {}
    for j in range(len(states)):
        order = sorted(range(len(apps)), key=lambda i: (-result.scores[i, j], i))
        for rank, i in enumerate(order[:3]):
            if result.scores[i, j] > 0:
                stars[(i, j)] = _STARS[rank]
    lines = ["| Usage | " + " | ".join(states) + " |"]
    lines.append("|" + "---|" * (len(states) + 1))
    for i, app in enumerate(apps):
        cells = [
            f"{result.scores[i, j]:.3f}{stars.get((i, j), '')}"
            for j in range(len(states))
        ]
        lines.append(f"| {app} | " + " | ".join(cells) + " |")
    if result.zero_rows:
        lines.append("")
        lines.append(f"Undefined rows (no usage): {', '.join(result.zero_rows)}")
    if result.zero_cols:
        lines.append("")
        lines.append(f"Undefined columns (no usage): {', '.join(result.zero_cols)}")
    return "\n".join(lines) + "\n"
