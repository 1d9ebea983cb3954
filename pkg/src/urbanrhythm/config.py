"""Pipeline configuration: flat INI sections per stage, paper defaults baked
in so the pipeline runs with zero flags on synthetic data."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from datetime import date

from .daytypes import DayTypeCalendar
from .errors import InvalidConfig
from .motif import MotifParams
from .synth import SynthConfig


@dataclass(frozen=True)
class SaakSettings:
    variance_threshold: float = 0.03
    reduce_dim: int = 128
    log_scale: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    saak: SaakSettings = field(default_factory=SaakSettings)
    cluster_k: tuple = (3, 7, 11)
    motif: MotifParams = field(default_factory=MotifParams)

    def calendar(self) -> DayTypeCalendar:
        return self.synth.calendar()


def _parse_dates(text: str) -> tuple:
    return tuple(date.fromisoformat(t.strip()) for t in text.split(",") if t.strip())


def _parse_ints(text: str) -> tuple:
    return tuple(int(t.strip()) for t in text.split(",") if t.strip())


def load_config(path=None) -> PipelineConfig:
    """Read an INI config; every key is optional and falls back to the
    built-in defaults."""
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise InvalidConfig(f"config file not found: {path}")

    def get(section, key, fallback, conv=str):
        if parser.has_option(section, key):
            return conv(parser.get(section, key))
        return fallback

    def get_bool(section, key, fallback):
        if parser.has_option(section, key):
            return parser.getboolean(section, key)
        return fallback

    defaults = SynthConfig()
    synth = SynthConfig(
        seed=get("synth", "seed", defaults.seed, int),
        agents=get("synth", "agents", defaults.agents, int),
        days=get("synth", "days", defaults.days, int),
        start_date=get("synth", "start_date", defaults.start_date, date.fromisoformat),
        observation_rate=get(
            "synth", "observation_rate", defaults.observation_rate, float
        ),
        holidays=get("calendar", "holidays", defaults.holidays, _parse_dates),
        grid_rows=get("grid", "rows", defaults.grid_rows, int),
        grid_cols=get("grid", "cols", defaults.grid_cols, int),
        cell_size_m=get("grid", "cell_size_m", defaults.cell_size_m, float),
        origin_lat=get("grid", "origin_lat", defaults.origin_lat, float),
        origin_lon=get("grid", "origin_lon", defaults.origin_lon, float),
        slot_duration_s=get("grid", "slot_duration_s", defaults.slot_duration_s, int),
    )
    saak = SaakSettings(
        variance_threshold=get("saak", "variance_threshold", 0.03, float),
        reduce_dim=get("saak", "reduce_dim", 128, int),
        log_scale=get_bool("saak", "log_scale", False),
    )
    spd = synth.slots_per_day
    motif_defaults = MotifParams(slots_per_day=spd)
    motif = MotifParams(
        l_w=get("motif", "l_w", motif_defaults.l_w, int),
        s_w=get("motif", "s_w", motif_defaults.s_w, int),
        sigma_w=get("motif", "sigma_w", motif_defaults.sigma_w, int),
        f_threshold=get("motif", "f_threshold", motif_defaults.f_threshold, int),
        f_threshold_day=get(
            "motif", "f_threshold_day", motif_defaults.f_threshold_day, int
        ),
        within_day=get_bool("motif", "within_day", motif_defaults.within_day),
        slots_per_day=spd,
        eps_factor=get("motif", "eps_factor", motif_defaults.eps_factor, float),
        eps_max=get("motif", "eps_max", motif_defaults.eps_max, float),
        min_samples=get("motif", "min_samples", motif_defaults.min_samples, int),
    )
    cluster_k = get("cluster", "k", (3, 7, 11), _parse_ints)
    if not cluster_k or any(b <= a for a, b in zip(cluster_k, cluster_k[1:])):
        raise InvalidConfig("cluster k list must be non-empty, strictly increasing")
    return PipelineConfig(synth=synth, saak=saak, cluster_k=cluster_k, motif=motif)
