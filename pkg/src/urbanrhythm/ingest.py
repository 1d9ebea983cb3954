"""Event log parsing, grid assignment and rasterization into count images.

The raster for each time slot is a 3-channel X x Y integer image whose
channels count, per region: people staying, people leaving, people arriving.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import EmptyInput, InvalidConfig

# Channel indices, fixed everywhere.
STAYING, LEAVING, ARRIVING = 0, 1, 2
CHANNEL_NAMES = ("staying", "leaving", "arriving")

# Metres per degree of latitude; longitude is scaled by cos(origin latitude).
M_PER_DEG = 111_320.0

ABSENT = -1


@dataclass(frozen=True)
class GridSpec:
    origin_lat: float
    origin_lon: float
    cell_size_m: float
    rows: int
    cols: int
    slot_duration_s: int
    start_time: int
    end_time: int

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise InvalidConfig("grid must be at least 2 x 2")
        if self.cell_size_m <= 0:
            raise InvalidConfig("cell_size_m must be positive")
        if self.slot_duration_s <= 0:
            raise InvalidConfig("slot_duration_s must be positive")
        if self.end_time <= self.start_time:
            raise InvalidConfig("end_time must exceed start_time")

    @property
    def n_slots(self) -> int:
        return -((self.start_time - self.end_time) // self.slot_duration_s)

    @property
    def n_regions(self) -> int:
        return self.rows * self.cols

    def slot_of(self, timestamp: int) -> Optional[int]:
        if not self.start_time <= timestamp < self.end_time:
            return None
        return (int(timestamp) - self.start_time) // self.slot_duration_s

    def slot_start(self, slot: int) -> int:
        return self.start_time + slot * self.slot_duration_s

    def to_dict(self) -> dict:
        return {
            "origin_lat": self.origin_lat,
            "origin_lon": self.origin_lon,
            "cell_size_m": self.cell_size_m,
            "rows": self.rows,
            "cols": self.cols,
            "slot_duration_s": self.slot_duration_s,
            "start_time": self.start_time,
            "end_time": self.end_time,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GridSpec":
        return cls(
            origin_lat=float(doc["origin_lat"]),
            origin_lon=float(doc["origin_lon"]),
            cell_size_m=float(doc["cell_size_m"]),
            rows=int(doc["rows"]),
            cols=int(doc["cols"]),
            slot_duration_s=int(doc["slot_duration_s"]),
            start_time=int(doc["start_time"]),
            end_time=int(doc["end_time"]),
        )


@dataclass(frozen=True)
class MobilityEvent:
    user_id: str
    timestamp: int
    lat: float
    lon: float
    app_category: Optional[str] = None


def assign_region(event: MobilityEvent, spec: GridSpec) -> Optional[tuple[int, int]]:
    """Equirectangular projection to metres from the grid origin, then floor
    division by the cell size. Returns None when out of bounds."""
    y_m = (event.lat - spec.origin_lat) * M_PER_DEG
    x_m = (event.lon - spec.origin_lon) * M_PER_DEG * math.cos(
        math.radians(spec.origin_lat)
    )
    i = math.floor(y_m / spec.cell_size_m)
    j = math.floor(x_m / spec.cell_size_m)
    if 0 <= i < spec.rows and 0 <= j < spec.cols:
        return i, j
    return None


def region_to_latlon(
    spec: GridSpec, i: int, j: int, frac_i: float = 0.5, frac_j: float = 0.5
) -> tuple[float, float]:
    """Inverse of assign_region at a fractional position inside cell (i, j)."""
    y_m = (i + frac_i) * spec.cell_size_m
    x_m = (j + frac_j) * spec.cell_size_m
    lat = spec.origin_lat + y_m / M_PER_DEG
    lon = spec.origin_lon + x_m / (
        M_PER_DEG * math.cos(math.radians(spec.origin_lat))
    )
    return lat, lon


@dataclass
class ParseResult:
    events: list
    skipped: int
    bad_lines: list  # line numbers of the first 10 malformed rows


_HEADER = ["user_id", "timestamp", "lat", "lon"]


def parse_events(stream: Iterable[str]) -> ParseResult:
    """Read the event CSV. Malformed rows are counted and skipped; an input
    with zero valid rows raises EmptyInput."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInput("empty event stream") from None
    header = [h.strip() for h in header]
    if header[:4] != _HEADER:
        raise EmptyInput(f"bad header {header!r}; expected {_HEADER} [,app_category]")
    has_app = len(header) >= 5 and header[4] == "app_category"

    events = []
    skipped = 0
    bad_lines = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            user = row[0]
            ts = int(row[1])
            lat = float(row[2])
            lon = float(row[3])
            if not (math.isfinite(lat) and math.isfinite(lon)) or not user:
                raise ValueError
            app = row[4] if has_app and len(row) > 4 and row[4] else None
        except (ValueError, IndexError):
            skipped += 1
            if len(bad_lines) < 10:
                bad_lines.append(lineno)
            continue
        events.append(MobilityEvent(user, ts, lat, lon, app))
    if not events:
        raise EmptyInput("no valid event rows")
    return ParseResult(events=events, skipped=skipped, bad_lines=bad_lines)


@dataclass
class PresenceTable:
    """Per (user, slot) resolved region: flat region index i*cols + j, or
    ABSENT. Users are kept in first-appearance order."""

    spec: GridSpec
    users: list
    regions: dict  # user_id -> int array of length n_slots

    def present_counts(self) -> np.ndarray:
        counts = np.zeros(self.spec.n_slots, dtype=np.int64)
        for arr in self.regions.values():
            counts += arr != ABSENT
        return counts


def build_presence(events: Iterable[MobilityEvent], spec: GridSpec) -> PresenceTable:
    """Resolve each (user, slot) to the region of the last event in that slot
    (latest timestamp, input order breaking ties). No gap interpolation."""
    users = []
    regions = {}
    best_ts = {}
    for ev in events:
        slot = spec.slot_of(ev.timestamp)
        if slot is None:
            continue
        cell = assign_region(ev, spec)
        if cell is None:
            continue
        if ev.user_id not in regions:
            users.append(ev.user_id)
            regions[ev.user_id] = np.full(spec.n_slots, ABSENT, dtype=np.int64)
            best_ts[ev.user_id] = {}
        prev = best_ts[ev.user_id].get(slot)
        if prev is None or ev.timestamp >= prev:
            best_ts[ev.user_id][slot] = ev.timestamp
            regions[ev.user_id][slot] = cell[0] * spec.cols + cell[1]
    return PresenceTable(spec=spec, users=users, regions=regions)


@dataclass
class CityImageSeries:
    spec: GridSpec
    images: np.ndarray  # (N, 3, rows, cols) non-negative integer counts

    @property
    def n_slots(self) -> int:
        return self.images.shape[0]


def rasterize(presence: PresenceTable, spec: GridSpec) -> CityImageSeries:
    """Accumulate staying/leaving/arriving counts per slot and region.

    A user present in consecutive slots counts as staying (same region) or as
    one leaving plus one arriving (region change). A user reappearing after an
    absence counts as staying only; slot 0 has no leaving/arriving.
    """
    n, nreg = spec.n_slots, spec.n_regions
    flat = np.zeros((n, 3, nreg), dtype=np.int64)
    slots = np.arange(n)
    for user in presence.users:
        reg = presence.regions[user]
        here = reg != ABSENT
        prev = np.zeros(n, dtype=bool)
        prev[1:] = here[:-1]
        prev_reg = np.full(n, ABSENT, dtype=np.int64)
        prev_reg[1:] = reg[:-1]

        stay = here & (~prev | (prev_reg == reg))
        move = here & prev & (prev_reg != reg)
        np.add.at(flat[:, STAYING, :], (slots[stay], reg[stay]), 1)
        np.add.at(flat[:, LEAVING, :], (slots[move], prev_reg[move]), 1)
        np.add.at(flat[:, ARRIVING, :], (slots[move], reg[move]), 1)
    images = flat.reshape(n, 3, spec.rows, spec.cols)
    return CityImageSeries(spec=spec, images=images)


def write_images_csv(series: CityImageSeries, csv_path, sidecar_path=None) -> None:
    """Portable dump: one row per (slot, region) with a nonzero channel, plus
    a JSON sidecar holding the grid spec."""
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "i", "j", "staying", "leaving", "arriving"])
        imgs = series.images
        nz = np.argwhere(imgs.sum(axis=1) > 0)
        for slot, i, j in nz:
            w.writerow(
                [slot, i, j, imgs[slot, 0, i, j], imgs[slot, 1, i, j], imgs[slot, 2, i, j]]
            )
    if sidecar_path is not None:
        with open(sidecar_path, "w") as fh:
            json.dump(series.spec.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_images_csv(csv_path, sidecar_path) -> CityImageSeries:
    with open(sidecar_path) as fh:
        spec = GridSpec.from_dict(json.load(fh))
    images = np.zeros((spec.n_slots, 3, spec.rows, spec.cols), dtype=np.int64)
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            slot, i, j = int(row["slot"]), int(row["i"]), int(row["j"])
            images[slot, STAYING, i, j] = int(row["staying"])
            images[slot, LEAVING, i, j] = int(row["leaving"])
            images[slot, ARRIVING, i, j] = int(row["arriving"])
    return CityImageSeries(spec=spec, images=images)
