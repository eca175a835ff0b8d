import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envcontours.decluster import (
    ClusterMaxima,
    DeclusterConfig,
    DeclusterError,
    cluster_labels,
    decluster,
    decluster_absolute,
)
from envcontours.ingest import Dataset


def _series(values, step_hours=1.0, start="2001-01-01T00:00:00", name="hs"):
    values = np.asarray(values, dtype=float)
    t0 = np.datetime64(start, "s")
    step = np.timedelta64(int(step_hours * 3600), "s")
    return Dataset(
        times=t0 + step * np.arange(len(values)),
        columns={name: values},
        time_step=step,
    )


def reference_decluster(values, threshold, sep_steps):
    """Exhaustive run-length declustering used as an independent oracle."""
    exceed = [i for i, v in enumerate(values) if v > threshold]
    clusters = []
    for i in exceed:
        if clusters and i - clusters[-1][-1] - 1 <= sep_steps:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    peaks = []
    for members in clusters:
        best = members[0]
        for i in members:
            if values[i] > values[best]:
                best = i
        peaks.append(best)
    return peaks


class TestConfig:
    def test_quantile_bounds(self):
        with pytest.raises(DeclusterError):
            DeclusterConfig(storm_threshold_quantile=1.0)

    def test_separation_positive(self):
        with pytest.raises(DeclusterError):
            DeclusterConfig(separation_hours=0.0)


class TestRunLength:
    def test_gap_splits_clusters(self):
        ds = _series([0, 5, 0, 0, 6, 0])
        cfg = DeclusterConfig(separation_hours=1.0)
        ev = decluster_absolute(ds, "hs", 4.0, cfg)
        assert ev.n_clusters == 2
        assert ev.column("hs").tolist() == [5.0, 6.0]

    def test_gap_merged_when_within_separation(self):
        ds = _series([0, 5, 0, 0, 6, 0])
        cfg = DeclusterConfig(separation_hours=3.0)
        ev = decluster_absolute(ds, "hs", 4.0, cfg)
        assert ev.n_clusters == 1
        assert ev.column("hs").tolist() == [6.0]

    def test_no_storms_error(self):
        ds = _series([1.0, 1.0, 1.0])
        with pytest.raises(DeclusterError, match="no storms"):
            decluster_absolute(ds, "hs", 4.0, DeclusterConfig())

    def test_earliest_tie_kept(self):
        ds = _series([0, 7, 7, 0])
        ev = decluster_absolute(ds, "hs", 4.0, DeclusterConfig(separation_hours=1.0))
        assert ev.peak_times[0] == ds.times[1]

    def test_time_gaps_count_as_separation(self):
        # two exceedances adjacent by row index, hours apart by timestamp
        t0 = np.datetime64("2001-01-01T00:00:00", "s")
        times = t0 + np.timedelta64(3600, "s") * np.array([0, 1, 80, 81])
        ds = Dataset(times=times, columns={"hs": np.array([5.0, 5.5, 6.0, 5.0])},
                     time_step=np.timedelta64(3600, "s"))
        ev = decluster_absolute(ds, "hs", 4.0, DeclusterConfig(separation_hours=48.0))
        assert ev.n_clusters == 2

    def test_concomitant_at_peak_timestamp(self):
        ds = _series([0, 5, 9, 0])
        ds.columns["ws"] = np.array([1.0, 20.0, 7.0, 2.0])
        ev = decluster_absolute(ds, "hs", 4.0, DeclusterConfig(separation_hours=1.0))
        assert ev.column("ws").tolist() == [7.0]

    def test_componentwise_max_switch(self):
        ds = _series([0, 5, 9, 0])
        ds.columns["ws"] = np.array([1.0, 20.0, 7.0, 2.0])
        cfg = DeclusterConfig(separation_hours=1.0, componentwise_max=True)
        ev = decluster_absolute(ds, "hs", 4.0, cfg)
        assert ev.column("ws").tolist() == [20.0]

    def test_quantile_threshold(self, small_dataset):
        cfg = DeclusterConfig()
        ev = decluster(small_dataset, "hs", cfg)
        hs = small_dataset.columns["hs"]
        u = np.quantile(hs, cfg.storm_threshold_quantile)
        assert ev.threshold == pytest.approx(u)
        assert np.all(ev.column("hs") > u)

    def test_export_csv(self, small_events, tmp_path):
        path = tmp_path / "events.csv"
        small_events.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header.startswith("peak_time")


class TestProperties:
    @given(
        st.lists(st.floats(0.0, 10.0), min_size=5, max_size=200),
        st.integers(1, 10),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_exhaustive_reference(self, values, sep):
        values = np.asarray(values)
        threshold = 5.0
        if not np.any(values > threshold):
            return
        ds = _series(values)
        cfg = DeclusterConfig(separation_hours=float(sep))
        ev = decluster_absolute(ds, "hs", threshold, cfg)
        ref_peaks = reference_decluster(values, threshold, sep)
        np.testing.assert_array_equal(
            ev.peak_times, ds.times[np.asarray(ref_peaks)]
        )
        np.testing.assert_array_equal(ev.column("hs"), values[ref_peaks])

    @given(
        st.lists(st.floats(0.0, 10.0), min_size=20, max_size=150),
        st.integers(1, 6),
    )
    @settings(max_examples=100, deadline=None)
    def test_separation_monotonicity(self, values, sep):
        values = np.asarray(values)
        if not np.any(values > 5.0):
            return
        ds = _series(values)
        n_small = decluster_absolute(
            ds, "hs", 5.0, DeclusterConfig(separation_hours=float(sep))
        ).n_clusters
        n_big = decluster_absolute(
            ds, "hs", 5.0, DeclusterConfig(separation_hours=float(sep + 3))
        ).n_clusters
        assert n_big <= n_small

    def test_inter_event_spacing(self, small_events, small_dataset):
        sep = np.timedelta64(48 * 3600, "s")
        gaps = np.diff(small_events.peak_times)
        assert np.all(gaps > sep)

    def test_cluster_labels_empty(self):
        assert cluster_labels(np.empty(0, dtype=np.int64), 3).size == 0

    def test_events_per_year(self):
        ev = ClusterMaxima(
            peak_times=np.array(["2001-01-01", "2001-06-01"], dtype="datetime64[s]"),
            values=np.ones((2, 1)),
            variables=["hs"],
            threshold=1.0,
            declustered_variable="hs",
            years=2.0,
        )
        assert ev.events_per_year == 1.0
