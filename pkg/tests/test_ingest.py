"""Event parsing, grid assignment and rasterization tests."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urbanrhythm import ingest
from urbanrhythm.errors import EmptyInput, InvalidConfig


def make_spec(rows=4, cols=4, n_slots=6, slot_s=1800):
    return ingest.GridSpec(
        origin_lat=39.9,
        origin_lon=116.3,
        cell_size_m=1000.0,
        rows=rows,
        cols=cols,
        slot_duration_s=slot_s,
        start_time=1_700_000_000,
        end_time=1_700_000_000 + n_slots * slot_s,
    )


class TestGridSpec:
    def test_n_slots_rounds_up(self):
        spec = make_spec(n_slots=1)
        partial = ingest.GridSpec(
            **{**spec.to_dict(), "end_time": spec.start_time + 1}
        )
        assert partial.n_slots == 1
        assert make_spec(n_slots=5).n_slots == 5

    def test_slot_of_boundaries(self):
        spec = make_spec(n_slots=2)
        assert spec.slot_of(spec.start_time) == 0
        assert spec.slot_of(spec.start_time + 1799) == 0
        assert spec.slot_of(spec.start_time + 1800) == 1
        assert spec.slot_of(spec.end_time) is None
        assert spec.slot_of(spec.start_time - 1) is None

    def test_validation(self):
        with pytest.raises(InvalidConfig):
            make_spec(rows=1)
        with pytest.raises(InvalidConfig):
            ingest.GridSpec(0, 0, -5.0, 4, 4, 1800, 0, 100)
        with pytest.raises(InvalidConfig):
            ingest.GridSpec(0, 0, 100.0, 4, 4, 1800, 100, 100)

    def test_dict_roundtrip(self):
        spec = make_spec()
        assert ingest.GridSpec.from_dict(spec.to_dict()) == spec


class TestAssignRegion:
    def test_origin_cell(self):
        spec = make_spec()
        ev = ingest.MobilityEvent("u", spec.start_time, 39.9, 116.3)
        assert ingest.assign_region(ev, spec) == (0, 0)

    def test_known_offsets(self):
        spec = make_spec()
        # 1500 m north, 2500 m east -> cell (1, 2).
        lat = 39.9 + 1500.0 / ingest.M_PER_DEG
        lon = 116.3 + 2500.0 / (ingest.M_PER_DEG * math.cos(math.radians(39.9)))
        ev = ingest.MobilityEvent("u", spec.start_time, lat, lon)
        assert ingest.assign_region(ev, spec) == (1, 2)

    def test_out_of_bounds(self):
        spec = make_spec()
        south = ingest.MobilityEvent("u", 0, 39.89, 116.3)
        far_east = ingest.MobilityEvent("u", 0, 39.9, 117.0)
        assert ingest.assign_region(south, spec) is None
        assert ingest.assign_region(far_east, spec) is None

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(0, 3),
        st.integers(0, 3),
        st.floats(0.01, 0.99),
        st.floats(0.01, 0.99),
    )
    def test_roundtrip_with_region_to_latlon(self, i, j, fi, fj):
        spec = make_spec()
        lat, lon = ingest.region_to_latlon(spec, i, j, frac_i=fi, frac_j=fj)
        ev = ingest.MobilityEvent("u", spec.start_time, lat, lon)
        assert ingest.assign_region(ev, spec) == (i, j)


class TestParseEvents:
    def test_valid_with_app_column(self):
        text = (
            "user_id,timestamp,lat,lon,app_category\n"
            "u1,1700000000,39.9,116.3,Video\n"
            "u2,1700000005,39.91,116.31,\n"
        )
        result = ingest.parse_events(io.StringIO(text))
        assert len(result.events) == 2
        assert result.events[0].app_category == "Video"
        assert result.events[1].app_category is None
        assert result.skipped == 0

    def test_malformed_rows_skipped_and_counted(self):
        text = (
            "user_id,timestamp,lat,lon\n"
            "u1,1700000000,39.9,116.3\n"
            "u2,not_a_number,39.9,116.3\n"
            "u3,1700000000,nan,116.3\n"
            ",1700000000,39.9,116.3\n"
            "u5,1700000000\n"
        )
        result = ingest.parse_events(io.StringIO(text))
        assert len(result.events) == 1
        assert result.skipped == 4
        assert result.bad_lines == [3, 4, 5, 6]

    def test_empty_and_bad_header(self):
        with pytest.raises(EmptyInput):
            ingest.parse_events(io.StringIO(""))
        with pytest.raises(EmptyInput):
            ingest.parse_events(io.StringIO("a,b,c,d\n1,2,3,4\n"))
        with pytest.raises(EmptyInput):
            ingest.parse_events(
                io.StringIO("user_id,timestamp,lat,lon\nu1,bad,1,2\n")
            )


class TestBuildPresence:
    def test_last_event_in_slot_wins(self):
        spec = make_spec(n_slots=1)
        early = ingest.MobilityEvent(
            "u", spec.start_time, *ingest.region_to_latlon(spec, 0, 0)
        )
        late = ingest.MobilityEvent(
            "u", spec.start_time + 100, *ingest.region_to_latlon(spec, 2, 3)
        )
        table = ingest.build_presence([late, early], spec)
        assert table.regions["u"][0] == 2 * spec.cols + 3

    def test_equal_timestamp_input_order_wins(self):
        spec = make_spec(n_slots=1)
        a = ingest.MobilityEvent("u", spec.start_time, *ingest.region_to_latlon(spec, 0, 0))
        b = ingest.MobilityEvent("u", spec.start_time, *ingest.region_to_latlon(spec, 1, 1))
        table = ingest.build_presence([a, b], spec)
        assert table.regions["u"][0] == 1 * spec.cols + 1

    def test_no_gap_interpolation(self):
        spec = make_spec(n_slots=3)
        evs = [
            ingest.MobilityEvent("u", spec.slot_start(0), *ingest.region_to_latlon(spec, 0, 0)),
            ingest.MobilityEvent("u", spec.slot_start(2), *ingest.region_to_latlon(spec, 0, 0)),
        ]
        table = ingest.build_presence(evs, spec)
        assert table.regions["u"][1] == ingest.ABSENT

    def test_out_of_window_and_grid_dropped(self):
        spec = make_spec(n_slots=1)
        evs = [
            ingest.MobilityEvent("u", spec.end_time + 5, 39.9, 116.3),
            ingest.MobilityEvent("u", spec.start_time, 0.0, 0.0),
        ]
        table = ingest.build_presence(evs, spec)
        assert table.users == []


def random_presence(rng, spec):
    users = [f"u{i}" for i in range(rng.integers(1, 12))]
    regions = {}
    for u in users:
        arr = rng.integers(-1, spec.n_regions, size=spec.n_slots)
        regions[u] = arr.astype(np.int64)
    return ingest.PresenceTable(spec=spec, users=users, regions=regions)


class TestRasterize:
    def test_stay_move_reappear_semantics(self):
        spec = make_spec(n_slots=4)
        reg = np.array([0, 0, 5, ingest.ABSENT], dtype=np.int64)
        table = ingest.PresenceTable(spec=spec, users=["u"], regions={"u": reg})
        imgs = ingest.rasterize(table, spec).images.reshape(4, 3, -1)
        assert imgs[0, ingest.STAYING, 0] == 1  # slot 0: staying only
        assert imgs[1, ingest.STAYING, 0] == 1  # same region: staying
        assert imgs[2, ingest.LEAVING, 0] == 1  # moved 0 -> 5
        assert imgs[2, ingest.ARRIVING, 5] == 1
        assert imgs[2, ingest.STAYING].sum() == 0
        assert imgs[3].sum() == 0  # absent

    def test_reappearance_counts_staying_only(self):
        spec = make_spec(n_slots=3)
        reg = np.array([2, ingest.ABSENT, 7], dtype=np.int64)
        table = ingest.PresenceTable(spec=spec, users=["u"], regions={"u": reg})
        imgs = ingest.rasterize(table, spec).images.reshape(3, 3, -1)
        assert imgs[2, ingest.STAYING, 7] == 1
        assert imgs[2, ingest.LEAVING].sum() == 0
        assert imgs[2, ingest.ARRIVING].sum() == 0

    def test_conservation_on_random_tables(self):
        rng = np.random.default_rng(42)
        spec = make_spec(rows=3, cols=3, n_slots=8)
        for _ in range(30):
            table = random_presence(rng, spec)
            imgs = ingest.rasterize(table, spec).images
            leaving = imgs[:, ingest.LEAVING].sum(axis=(1, 2))
            arriving = imgs[:, ingest.ARRIVING].sum(axis=(1, 2))
            staying = imgs[:, ingest.STAYING].sum(axis=(1, 2))
            assert np.array_equal(leaving, arriving)
            assert np.array_equal(staying + arriving, table.present_counts())

    def test_counts_non_negative_integers(self):
        rng = np.random.default_rng(7)
        spec = make_spec(n_slots=5)
        imgs = ingest.rasterize(random_presence(rng, spec), spec).images
        assert imgs.dtype == np.int64
        assert imgs.min() >= 0


class TestImagesCSV:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(3)
        spec = make_spec(n_slots=5)
        series = ingest.rasterize(random_presence(rng, spec), spec)
        ingest.write_images_csv(series, tmp_path / "i.csv", tmp_path / "g.json")
        back = ingest.read_images_csv(tmp_path / "i.csv", tmp_path / "g.json")
        assert back.spec == spec
        assert np.array_equal(back.images, series.images)

    def test_zero_rows_omitted(self, tmp_path):
        spec = make_spec(n_slots=2)
        series = ingest.CityImageSeries(
            spec=spec, images=np.zeros((2, 3, 4, 4), dtype=np.int64)
        )
        ingest.write_images_csv(series, tmp_path / "i.csv")
        lines = (tmp_path / "i.csv").read_text().strip().splitlines()
        assert len(lines) == 1  # header only
