"""Agent-based synthetic mobility generator with ground-truth labels.

Agents follow per-day-type schedules over five behavior regimes (sleep,
commute, work, relax, home), anchored to home/work/leisure zones on the grid.
Everything is reproducible from the seed: each agent draws from its own
seeded substream and the output is canonicalized by (timestamp, user_id).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date, datetime, timezone

import numpy as np

from .daytypes import DayTypeCalendar
from .errors import InvalidConfig
from .ingest import GridSpec, MobilityEvent, region_to_latlon

REGIMES = ("sleep", "commute", "work", "relax", "home")

SLEEP, COMMUTE, WORK, RELAX, HOME = REGIMES


@dataclass(frozen=True)
class Zone:
    """Inclusive rectangle of grid cells."""

    i0: int
    i1: int
    j0: int
    j1: int

    def cells(self):
        return [
            (i, j)
            for i in range(self.i0, self.i1 + 1)
            for j in range(self.j0, self.j1 + 1)
        ]

    def inside(self, spec: GridSpec) -> bool:
        return (
            0 <= self.i0 <= self.i1 < spec.rows
            and 0 <= self.j0 <= self.j1 < spec.cols
        )


DEFAULT_SCHEDULES = {
    "weekday": (
        (0, 14, SLEEP),
        (14, 18, COMMUTE),
        (18, 36, WORK),
        (36, 40, COMMUTE),
        (40, 44, RELAX),
        (44, 48, HOME),
    ),
    "weekend": (
        (0, 18, SLEEP),
        (18, 22, HOME),
        (22, 40, RELAX),
        (40, 44, HOME),
        (44, 48, SLEEP),
    ),
    "holiday": (
        (0, 16, SLEEP),
        (16, 44, RELAX),
        (44, 48, HOME),
    ),
}

# Night-time regimes produce fewer observations, mimicking low phone activity.
DEFAULT_RATE_MULTIPLIERS = {
    SLEEP: 0.3,
    COMMUTE: 1.0,
    WORK: 1.0,
    RELAX: 1.0,
    HOME: 1.0,
}

DEFAULT_APP_PROFILES = {
    SLEEP: {"Reading": 3, "Video": 3, "Game": 2, "Social": 2},
    COMMUTE: {"Transportation": 5, "Music": 3, "Social": 2},
    WORK: {"Office": 4, "Stock": 3, "Social": 2, "Shopping": 1},
    RELAX: {"Restaurant": 3, "Video": 3, "Shopping": 2, "Social": 2},
    HOME: {"Video": 4, "Game": 3, "Social": 2, "Reading": 1},
}


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    agents: int = 200
    days: int = 28
    start_date: date = date(2026, 4, 6)  # a Monday
    holidays: tuple = (date(2026, 4, 22), date(2026, 4, 23))
    grid_rows: int = 16
    grid_cols: int = 16
    cell_size_m: float = 1000.0
    origin_lat: float = 39.9
    origin_lon: float = 116.3
    slot_duration_s: int = 1800
    observation_rate: float = 0.8
    home_zone: Zone = Zone(6, 8, 2, 4)
    work_zone: Zone = Zone(6, 8, 11, 13)
    leisure_zone: Zone = Zone(12, 14, 6, 9)
    schedules: dict = field(default_factory=lambda: dict(DEFAULT_SCHEDULES))
    rate_multipliers: dict = field(
        default_factory=lambda: dict(DEFAULT_RATE_MULTIPLIERS)
    )
    app_profiles: dict = field(default_factory=lambda: dict(DEFAULT_APP_PROFILES))

    @property
    def slots_per_day(self) -> int:
        return 86400 // self.slot_duration_s

    @property
    def start_time(self) -> int:
        return int(
            datetime.combine(
                self.start_date, datetime.min.time(), tzinfo=timezone.utc
            ).timestamp()
        )

    def grid_spec(self) -> GridSpec:
        return GridSpec(
            origin_lat=self.origin_lat,
            origin_lon=self.origin_lon,
            cell_size_m=self.cell_size_m,
            rows=self.grid_rows,
            cols=self.grid_cols,
            slot_duration_s=self.slot_duration_s,
            start_time=self.start_time,
            end_time=self.start_time + self.days * 86400,
        )

    def calendar(self) -> DayTypeCalendar:
        return DayTypeCalendar(
            start_date=self.start_date,
            slots_per_day=self.slots_per_day,
            holidays=frozenset(self.holidays),
        )

    def validate(self) -> None:
        if self.agents < 1 or self.days < 1:
            raise InvalidConfig("need at least one agent and one day")
        if not 0.0 <= self.observation_rate <= 1.0:
            raise InvalidConfig("observation_rate must lie in [0, 1]")
        spec = self.grid_spec()
        for name, zone in (
            ("home", self.home_zone),
            ("work", self.work_zone),
            ("leisure", self.leisure_zone),
        ):
            if not zone.inside(spec):
                raise InvalidConfig(f"{name} zone lies outside the grid")
        spd = self.slots_per_day
        for day_type, blocks in self.schedules.items():
            covered = []
            for a, b, regime in blocks:
                if regime not in REGIMES:
                    raise InvalidConfig(f"unknown regime {regime!r}")
                covered.extend(range(a, b))
            if sorted(covered) != list(range(spd)):
                raise InvalidConfig(
                    f"{day_type} schedule does not partition the {spd} daily slots"
                )


@dataclass
class GroundTruth:
    regimes: list  # regime label per slot
    regions: dict  # user_id -> int array of flat region per slot


@dataclass
class SynthResult:
    events: list  # MobilityEvent, sorted by (timestamp, user_id)
    usage: list  # (user_id, timestamp, app_category), same order
    truth: GroundTruth


def bresenham(a: tuple, b: tuple) -> list:
    """Inclusive straight grid line between two cells."""
    (i0, j0), (i1, j1) = a, b
    di, dj = abs(i1 - i0), abs(j1 - j0)
    si = 1 if i1 >= i0 else -1
    sj = 1 if j1 >= j0 else -1
    err = di - dj
    path = []
    i, j = i0, j0
    while True:
        path.append((i, j))
        if (i, j) == (i1, j1):
            break
        e2 = 2 * err
        if e2 > -dj:
            err -= dj
            i += si
        if e2 < di:
            err += di
            j += sj
    return path


def _slot_regimes(config: SynthConfig) -> list:
    cal = config.calendar()
    regimes = []
    for day in range(config.days):
        blocks = config.schedules[cal.day_type_of_day(day)]
        day_regimes = [None] * config.slots_per_day
        for a, b, regime in blocks:
            for s in range(a, b):
                day_regimes[s] = regime
        regimes.extend(day_regimes)
    return regimes


def generate(config: SynthConfig) -> SynthResult:
    config.validate()
    spec = config.grid_spec()
    spd = config.slots_per_day
    n_slots = config.days * spd
    regimes = _slot_regimes(config)

    home_cells = config.home_zone.cells()
    work_cells = config.work_zone.cells()
    leisure_cells = config.leisure_zone.cells()

    events = []
    usage = []
    regions = {}

    for agent in range(config.agents):
        rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(agent,))
        )
        user = f"a{agent:05d}"
        home = home_cells[rng.integers(len(home_cells))]
        work = work_cells[rng.integers(len(work_cells))]

        cells = [None] * n_slots
        # Pass 1: anchor all non-commute slots. Each agent picks one leisure
        # cell per day, drawn at that day's first relax slot.
        day_leisure = None
        for slot in range(n_slots):
            if slot % spd == 0:
                day_leisure = None
            regime = regimes[slot]
            if regime in (SLEEP, HOME):
                cells[slot] = home
            elif regime == WORK:
                cells[slot] = work
            elif regime == RELAX:
                if day_leisure is None:
                    day_leisure = leisure_cells[rng.integers(len(leisure_cells))]
                cells[slot] = day_leisure
        # Pass 2: fill commute blocks along the grid line between the anchors
        # immediately before and after the block.
        slot = 0
        while slot < n_slots:
            if regimes[slot] != COMMUTE:
                slot += 1
                continue
            end = slot
            while end < n_slots and regimes[end] == COMMUTE:
                end += 1
            src = cells[slot - 1] if slot > 0 else home
            dst = cells[end] if end < n_slots else home
            path = bresenham(src, dst)
            block = end - slot
            for t in range(block):
                idx = round((t + 1) / (block + 1) * (len(path) - 1))
                cells[slot + t] = path[idx]
            slot = end

        reg = np.array([i * spec.cols + j for i, j in cells], dtype=np.int64)
        regions[user] = reg

        for slot in range(n_slots):
            regime = regimes[slot]
            p = config.observation_rate * config.rate_multipliers[regime]
            if rng.random() >= p:
                continue
            i, j = cells[slot]
            ts = spec.slot_start(slot) + int(rng.integers(spec.slot_duration_s))
            lat, lon = region_to_latlon(
                spec, i, j, frac_i=rng.uniform(0.1, 0.9), frac_j=rng.uniform(0.1, 0.9)
            )
            events.append(MobilityEvent(user, ts, lat, lon))
            profile = config.app_profiles[regime]
            apps = sorted(profile)
            weights = np.array([profile[a] for a in apps], dtype=float)
            app = apps[rng.choice(len(apps), p=weights / weights.sum())]
            usage.append((user, ts, app))

    events.sort(key=lambda e: (e.timestamp, e.user_id))
    usage.sort(key=lambda u: (u[1], u[0]))
    return SynthResult(
        events=events,
        usage=usage,
        truth=GroundTruth(regimes=regimes, regions=regions),
    )


def write_events_csv(events, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "timestamp", "lat", "lon"])
        for ev in events:
            w.writerow([ev.user_id, ev.timestamp, f"{ev.lat:.8f}", f"{ev.lon:.8f}"])


def write_usage_csv(usage, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "timestamp", "app_category"])
        for user, ts, app in usage:
            w.writerow([user, ts, app])


def write_truth_csv(truth: GroundTruth, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "regime"])
        for slot, regime in enumerate(truth.regimes):
            w.writerow([slot, regime])


def read_truth_csv(path) -> list:
    with open(path, newline="") as fh:
        return [row["regime"] for row in csv.DictReader(fh)]
