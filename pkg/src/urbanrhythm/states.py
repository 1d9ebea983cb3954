"""Ward agglomerative clustering of time-slot features into city states.

The dendrogram is built with the exact Lance-Williams recurrence for Ward's
objective: merging clusters A and B costs |A||B|/(|A|+|B|) times the squared
distance between their centroids. Ties are broken by the smallest (left,
right) node-id pair, so results are reproducible run to run.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .daytypes import DAY_TYPES, DayTypeCalendar
from .errors import BadK, DegenerateInput, LengthMismatch
from .ingest import ARRIVING, CityImageSeries, LEAVING, STAYING


@dataclass(frozen=True)
class Merge:
    left: int  # node id: leaves are 0..N-1, merge t creates node N+t
    right: int
    cost: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    n_leaves: int
    merges: tuple

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_leaves": self.n_leaves,
                "merges": [
                    [m.left, m.right, m.cost, m.size] for m in self.merges
                ],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Dendrogram":
        doc = json.loads(text)
        return cls(
            n_leaves=int(doc["n_leaves"]),
            merges=tuple(
                Merge(int(l), int(r), float(c), int(s))
                for l, r, c, s in doc["merges"]
            ),
        )


def ward_cluster(features) -> Dendrogram:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DegenerateInput("need at least 2 feature rows")
    n = X.shape[0]

    sq_norm = np.einsum("ij,ij->i", X, X)
    d2 = sq_norm[:, None] + sq_norm[None, :] - 2.0 * (X @ X.T)
    np.clip(d2, 0.0, None, out=d2)
    D = 0.5 * d2  # singleton merge cost
    np.fill_diagonal(D, np.inf)

    active = np.ones(n, dtype=bool)
    sizes = np.ones(n)
    node_id = np.arange(n)
    merges = []

    for step in range(n - 1):
        m = D.min()
        ti, tj = np.where(D == m)
        best = None
        for a, b in zip(ti, tj):
            if a >= b:
                continue
            pair = (
                min(node_id[a], node_id[b]),
                max(node_id[a], node_id[b]),
            )
            if best is None or pair < best[0]:
                best = (pair, a, b)
        (left, right), i, j = best[0], best[1], best[2]

        s_i, s_j = sizes[i], sizes[j]
        new_size = s_i + s_j
        merges.append(
            Merge(left=int(left), right=int(right), cost=float(m), size=int(new_size))
        )

        # Lance-Williams update for Ward, written into row/col i.
        new_row = ((s_i + sizes) * D[i] + (s_j + sizes) * D[j] - sizes * m) / (
            s_i + s_j + sizes
        )
        new_row[~active] = np.inf
        new_row[i] = np.inf
        new_row[j] = np.inf
        D[i] = new_row
        D[:, i] = new_row
        D[j, :] = np.inf
        D[:, j] = np.inf
        active[j] = False
        sizes[i] = new_size
        node_id[i] = n + step

    return Dendrogram(n_leaves=n, merges=tuple(merges))


@dataclass(frozen=True)
class StateSeries:
    n_states: int
    labels: np.ndarray  # (N,) ints in [0, n_states), numbered by first occurrence
    slot_times: np.ndarray  # (N,) epoch seconds

    @property
    def n_slots(self) -> int:
        return len(self.labels)


def _canonicalize(raw_labels: np.ndarray) -> np.ndarray:
    remap = {}
    out = np.empty(len(raw_labels), dtype=np.int64)
    for idx, lab in enumerate(raw_labels):
        if lab not in remap:
            remap[lab] = len(remap)
        out[idx] = remap[lab]
    return out


def cut_labels(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Undo the last k-1 merges; connected components become states,
    renumbered by first occurrence in time order."""
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise BadK(f"k={k} outside [1, {n}]")
    parent = np.arange(2 * n - 1)
    for t, mg in enumerate(dendrogram.merges[: n - k]):
        parent[mg.left] = n + t
        parent[mg.right] = n + t
    roots = np.empty(n, dtype=np.int64)
    for leaf in range(n):
        node = leaf
        while parent[node] != node:
            node = parent[node]
        roots[leaf] = node
    return _canonicalize(roots)


def cut(dendrogram: Dendrogram, k: int, slot_times=None) -> StateSeries:
    labels = cut_labels(dendrogram, k)
    if slot_times is None:
        slot_times = np.arange(dendrogram.n_leaves, dtype=np.int64)
    return StateSeries(
        n_states=k, labels=labels, slot_times=np.asarray(slot_times, dtype=np.int64)
    )


def hierarchy_export(dendrogram: Dendrogram, levels) -> dict:
    """Nested cluster document across increasing cut levels. Each cluster
    records its size and its parent cluster at the previous (coarser) level."""
    levels = list(levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise BadK("levels must be strictly increasing")
    doc = {"n_slots": dendrogram.n_leaves, "levels": []}
    prev_labels = None
    for k in levels:
        labels = cut_labels(dendrogram, k)
        clusters = []
        for c in range(k):
            members = np.where(labels == c)[0]
            parent = (
                None if prev_labels is None else int(prev_labels[members[0]])
            )
            clusters.append(
                {"id": int(c), "size": int(len(members)), "parent": parent}
            )
        doc["levels"].append({"k": int(k), "clusters": clusters})
        prev_labels = labels
    return doc


@dataclass(frozen=True)
class StateProfile:
    """Per-state channel means and temporal histograms, for interpretation."""

    channel_means: dict  # state -> {"staying": float, "leaving": ..., "arriving": ...}
    slot_of_day_hist: dict  # state -> list of counts, one per slot-of-day
    day_type_counts: dict  # state -> {day type -> slot count}
    state_sizes: dict  # state -> slot count

    def to_dict(self) -> dict:
        return {
            "channel_means": {str(k): v for k, v in self.channel_means.items()},
            "slot_of_day_hist": {str(k): v for k, v in self.slot_of_day_hist.items()},
            "day_type_counts": {str(k): v for k, v in self.day_type_counts.items()},
            "state_sizes": {str(k): v for k, v in self.state_sizes.items()},
        }


def profile_states(
    series: StateSeries, images: CityImageSeries, calendar: DayTypeCalendar
) -> StateProfile:
    if series.n_slots != images.n_slots:
        raise LengthMismatch(
            f"{series.n_slots} state labels vs {images.n_slots} images"
        )
    spd = calendar.slots_per_day
    totals = images.images.sum(axis=(2, 3))  # (N, 3) citywide channel totals
    channel_means, hists, day_counts, sizes = {}, {}, {}, {}
    for state in range(series.n_states):
        slots = np.where(series.labels == state)[0]
        mean = totals[slots].mean(axis=0)
        channel_means[state] = {
            "staying": float(mean[STAYING]),
            "leaving": float(mean[LEAVING]),
            "arriving": float(mean[ARRIVING]),
        }
        hist = np.bincount(slots % spd, minlength=spd)
        hists[state] = hist.tolist()
        dc = {t: 0 for t in DAY_TYPES}
        for s in slots:
            dc[calendar.day_type_of_slot(int(s))] += 1
        day_counts[state] = dc
        sizes[state] = int(len(slots))
    return StateProfile(
        channel_means=channel_means,
        slot_of_day_hist=hists,
        day_type_counts=day_counts,
        state_sizes=sizes,
    )


def write_states_csv(series: StateSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "timestamp", "state"])
        for slot, (ts, state) in enumerate(zip(series.slot_times, series.labels)):
            w.writerow([slot, int(ts), int(state)])


def read_states_csv(path) -> StateSeries:
    labels, times = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            labels.append(int(row["state"]))
            times.append(int(row["timestamp"]))
    labels = np.asarray(labels, dtype=np.int64)
    return StateSeries(
        n_states=int(labels.max()) + 1 if len(labels) else 0,
        labels=labels,
        slot_times=np.asarray(times, dtype=np.int64),
    )
