"""Motif discovery on the city state series, motif classes, and the
father/son family graph.

Discovery follows a divide-merge scheme: fixed-length windows over the state
sequence, a Hamming collision matrix between windows, maximal diagonal traces
through that matrix, and a trace-to-motif conversion that yields motifs of
length l_w + (L-1) * s_w. Equal-length motifs are grouped with a deterministic
density clustering, and classes are linked father to son by member
containment, with grandson edges pruned.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, SeriesTooShort, TooLargeForOracle

_ORACLE_MAX_N = 500


@dataclass(frozen=True)
class MotifParams:
    l_w: int = 6
    s_w: int = 2
    sigma_w: int = 1
    f_threshold: int = 3
    f_threshold_day: int = 1
    within_day: bool = True
    slots_per_day: int = 48
    eps_factor: float = 0.25
    eps_max: float = 8.0
    min_samples: int = 2
    exclude_trivial: bool = True

    def __post_init__(self):
        if self.l_w < 1:
            raise InvalidConfig("l_w must be >= 1")
        if not 1 <= self.s_w <= self.l_w:
            raise InvalidConfig("s_w must lie in [1, l_w]")
        if not 0 <= self.sigma_w <= self.l_w:
            raise InvalidConfig("sigma_w must lie in [0, l_w]")

    def frequency_floor(self, length: int) -> int:
        return self.f_threshold_day if length == self.slots_per_day else self.f_threshold

    @property
    def min_window_offset(self) -> int:
        # Overlapping self-matches closer than one window length are trivial.
        return math.ceil(self.l_w / self.s_w) if self.exclude_trivial else 1

    def eps(self, length: int) -> float:
        return min(self.eps_factor * length, self.eps_max)


@dataclass(frozen=True, order=True)
class Motif:
    start: int
    length: int
    symbols: tuple

    @property
    def end(self) -> int:
        return self.start + self.length

    def contains(self, other: "Motif") -> bool:
        return self.start <= other.start and other.end <= self.end


def cut_windows(labels, l_w: int, s_w: int) -> np.ndarray:
    """Windows w_i = S[i*s_w : i*s_w + l_w]; trailing partial windows dropped."""
    S = np.asarray(labels)
    n = len(S)
    if n < l_w:
        raise SeriesTooShort(f"series length {n} < window length {l_w}")
    count = (n - l_w) // s_w + 1
    return np.stack([S[i * s_w : i * s_w + l_w] for i in range(count)])


def collision_matrix(windows: np.ndarray, sigma_w: int) -> np.ndarray:
    """Boolean symmetric matrix: True where two windows are within sigma_w
    Hamming distance. The diagonal is True but never yields traces."""
    diffs = (windows[:, None, :] != windows[None, :, :]).sum(axis=2)
    return diffs <= sigma_w


@dataclass(frozen=True)
class Trace:
    i: int  # first window index
    j: int  # second window index, j > i
    length: int  # run length in windows


def extract_traces(mat: np.ndarray, min_offset: int = 1) -> list:
    """Maximal diagonal runs of True strictly above the main diagonal.
    Diagonals with offset < min_offset are skipped (trivial self-matches)."""
    w = mat.shape[0]
    traces = []
    for offset in range(max(1, min_offset), w):
        i = 0
        while i < w - offset:
            if mat[i, i + offset]:
                run = 1
                while i + run < w - offset and mat[i + run, i + offset + run]:
                    run += 1
                traces.append(Trace(i=i, j=i + offset, length=run))
                i += run
            else:
                i += 1
    return traces


def discover_motifs(labels, params: MotifParams) -> dict:
    """Full pipeline: windows, collision matrix, traces, motif conversion,
    deduplication, within-day filtering and per-length frequency floors.
    Returns {length: [Motif, ...]} with motifs sorted by start."""
    S = np.asarray(labels)
    windows = cut_windows(S, params.l_w, params.s_w)
    mat = collision_matrix(windows, params.sigma_w)
    if params.within_day:
        # Windows straddling midnight take no part in traces, so traces break
        # at day boundaries and the longest within-day trace spans one day.
        starts = np.arange(len(windows)) * params.s_w
        inside = starts // params.slots_per_day == (
            starts + params.l_w - 1
        ) // params.slots_per_day
        mat = mat & inside[:, None] & inside[None, :]
    traces = extract_traces(mat, params.min_window_offset)

    seen = set()
    for tr in traces:
        length = params.l_w + (tr.length - 1) * params.s_w
        for start in (tr.i * params.s_w, tr.j * params.s_w):
            seen.add((start, length))

    spd = params.slots_per_day
    by_length = {}
    for start, length in sorted(seen):
        if params.within_day and start // spd != (start + length - 1) // spd:
            continue
        motif = Motif(start=start, length=length, symbols=tuple(int(x) for x in S[start : start + length]))
        by_length.setdefault(length, []).append(motif)

    return {
        length: motifs
        for length, motifs in sorted(by_length.items())
        if len(motifs) >= params.frequency_floor(length)
    }


def brute_force_motifs(labels, length: int, params: MotifParams) -> list:
    """Exhaustive oracle: every aligned start pair (a, b) whose maximal run of
    constituent windows (each within sigma_w) spans exactly this length.
    Independent of the collision-matrix path; refuses long series."""
    S = np.asarray(labels)
    n = len(S)
    if n > _ORACLE_MAX_N:
        raise TooLargeForOracle(f"series length {n} > {_ORACLE_MAX_N}")
    if (length - params.l_w) % params.s_w != 0 or length < params.l_w:
        return []
    want_run = (length - params.l_w) // params.s_w + 1
    if n < params.l_w:
        return []
    n_windows = (n - params.l_w) // params.s_w + 1

    def window_match(wi, wj):
        a, b = wi * params.s_w, wj * params.s_w
        ham = sum(
            1
            for t in range(params.l_w)
            if S[a + t] != S[b + t]
        )
        return ham <= params.sigma_w

    pairs = []
    for wi in range(n_windows):
        for wj in range(wi + params.min_window_offset, n_windows):
            if not window_match(wi, wj):
                continue
            # Require maximality at the start of the run.
            if wi > 0 and wj > 0 and window_match(wi - 1, wj - 1):
                continue
            run = 1
            while (
                wi + run < n_windows
                and wj + run < n_windows
                and window_match(wi + run, wj + run)
            ):
                run += 1
            if run == want_run:
                pairs.append((wi * params.s_w, wj * params.s_w))
    return pairs


@dataclass(frozen=True)
class MotifClass:
    class_id: int
    length: int
    members: tuple  # Motifs, sorted by start
    exemplar: Motif

    @property
    def covered_slots(self) -> int:
        covered = set()
        for m in self.members:
            covered.update(range(m.start, m.end))
        return len(covered)


def _hamming(a: tuple, b: tuple) -> int:
    return sum(1 for x, y in zip(a, b) if x != y)


def _dbscan(motifs: list, eps: float, min_samples: int) -> list:
    """Deterministic DBSCAN over Hamming distances: points visited in start
    order, clusters expanded breadth-first in index order, border points
    assigned to the first core cluster that reaches them. Returns a list of
    member-index lists; noise is dropped."""
    n = len(motifs)
    dist = np.array(
        [[_hamming(a.symbols, b.symbols) for b in motifs] for a in motifs]
    )
    neighbors = [np.where(dist[i] <= eps)[0] for i in range(n)]
    core = [len(nb) >= min_samples for nb in neighbors]

    assigned = [None] * n
    clusters = []
    for seed in range(n):
        if assigned[seed] is not None or not core[seed]:
            continue
        cid = len(clusters)
        members = []
        queue = [seed]
        assigned[seed] = cid
        while queue:
            p = queue.pop(0)
            members.append(p)
            if not core[p]:
                continue
            for q in neighbors[p]:
                if assigned[q] is None:
                    assigned[q] = cid
                    queue.append(int(q))
        clusters.append(sorted(members))
    return clusters


def cluster_classes(motifs_by_length: dict, params: MotifParams) -> list:
    """Group equal-length motifs into classes; ids run over (length desc,
    first member start asc). Classes under the frequency floor are dropped."""
    pending = []
    for length in sorted(motifs_by_length, reverse=True):
        motifs = sorted(motifs_by_length[length])
        groups = _dbscan(motifs, params.eps(length), params.min_samples)
        for idxs in groups:
            members = tuple(motifs[i] for i in idxs)
            if len(members) < params.frequency_floor(length):
                continue
            pending.append((length, members))

    classes = []
    for cid, (length, members) in enumerate(
        sorted(pending, key=lambda t: (-t[0], t[1][0].start))
    ):
        sums = [
            sum(_hamming(m.symbols, other.symbols) for other in members)
            for m in members
        ]
        exemplar = members[min(range(len(members)), key=lambda i: (sums[i], members[i].start))]
        classes.append(
            MotifClass(class_id=cid, length=length, members=members, exemplar=exemplar)
        )
    return classes


@dataclass(frozen=True)
class MotifGraph:
    classes: tuple
    edges: frozenset  # (father id, son id) after grandson pruning
    containment_edges: frozenset = field(default=frozenset())  # before pruning


def prune_grandsons(edges: set) -> frozenset:
    """Drop every edge shadowed by a longer path (transitive reduction of the
    containment DAG); applying this twice changes nothing."""
    succ = {}
    for a, b in edges:
        succ.setdefault(a, set()).add(b)

    def reachable(frm, to, skip_direct):
        # Path of length >= 2 from frm to to.
        stack = [s for s in succ.get(frm, ()) if not (skip_direct and s == to)]
        seen = set(stack)
        while stack:
            node = stack.pop()
            if node == to:
                return True
            for nxt in succ.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return False

    return frozenset(
        (a, b) for a, b in edges if not reachable(a, b, skip_direct=True)
    )


def build_graph(classes: list) -> MotifGraph:
    """Father -> son edges by existential member containment (fathers are
    strictly longer), then grandson pruning."""
    edges = set()
    for ci in classes:
        for cj in classes:
            if ci.length <= cj.length:
                continue
            if any(mi.contains(mj) for mi in ci.members for mj in cj.members):
                edges.add((ci.class_id, cj.class_id))
    return MotifGraph(
        classes=tuple(classes),
        edges=prune_grandsons(edges),
        containment_edges=frozenset(edges),
    )


def classes_to_json(classes: list) -> str:
    doc = [
        {
            "id": c.class_id,
            "length": c.length,
            "member_starts": [m.start for m in c.members],
            "exemplar_start": c.exemplar.start,
            "exemplar_symbols": list(c.exemplar.symbols),
            "covered_slots": c.covered_slots,
        }
        for c in classes
    ]
    return json.dumps(doc, sort_keys=True, indent=2)


_DOT_BUCKETS = (
    "#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6",
    "#4292c6", "#2171b5", "#08519c", "#08306b",
)


def graph_to_dot(graph: MotifGraph) -> str:
    """DOT rendering: nodes layered by motif length, colored by total covered
    slots. Nodes with in-degree and out-degree exactly 1 are bypassed in the
    drawing only; they stay in the data model."""
    in_deg, out_deg = {}, {}
    for a, b in graph.edges:
        out_deg[a] = out_deg.get(a, 0) + 1
        in_deg[b] = in_deg.get(b, 0) + 1
    hidden = {
        c.class_id
        for c in graph.classes
        if in_deg.get(c.class_id, 0) == 1 and out_deg.get(c.class_id, 0) == 1
    }

    succ = {}
    for a, b in graph.edges:
        succ.setdefault(a, []).append(b)

    def visible_targets(node):
        out = set()
        for nxt in succ.get(node, ()):
            if nxt in hidden:
                out |= visible_targets(nxt)
            else:
                out.add(nxt)
        return out

    visible = [c for c in graph.classes if c.class_id not in hidden]
    max_cov = max((c.covered_slots for c in visible), default=1) or 1

    lines = ["digraph motif_family {", "  rankdir=TB;", "  node [style=filled];"]
    by_length = {}
    for c in visible:
        by_length.setdefault(c.length, []).append(c)
    for length in sorted(by_length, reverse=True):
        ids = []
        for c in by_length[length]:
            bucket = min(
                len(_DOT_BUCKETS) - 1,
                int(c.covered_slots / max_cov * (len(_DOT_BUCKETS) - 1)),
            )
            font = "white" if bucket >= 6 else "black"
            lines.append(
                f'  C{c.class_id} [label="C{c.class_id}\\nl={c.length}" '
                f'fillcolor="{_DOT_BUCKETS[bucket]}" fontcolor="{font}"];'
            )
            ids.append(f"C{c.class_id}")
        lines.append("  { rank=same; " + "; ".join(ids) + "; }")
    for c in visible:
        for tgt in sorted(visible_targets(c.class_id)):
            lines.append(f"  C{c.class_id} -> C{tgt};")
    lines.append("}")
    return "\n".join(lines) + "\n"
