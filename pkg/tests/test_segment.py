import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wivihar import segment as seg
from wivihar.core import ACTIVITIES, ActivityLabel, CsiSample, CsiMatrix, CsiPacket, CsiSequence
from wivihar.errors import DataError, FormatError, TooShortError, VersionError


def make_sequence(n, label=ActivityLabel.FALLING, fs=100.0):
    g = np.zeros((3, 3, 30), dtype=complex)
    packets = [
        CsiPacket(timestamp_us=i * 10000, rssi=(1, 1, 1), noise_dbm=-92, agc=0,
                  permutation=(0, 1, 2), rate=0, csi=CsiMatrix(g))
        for i in range(n)
    ]
    return CsiSequence(fs_hz=fs, packets=packets, label=label)


def make_samples(values_rows, labels):
    return [CsiSample(values=v, label=l) for v, l in zip(values_rows, labels)]


class TestSegmentByTime:
    def test_250_packets_one_second(self):
        out = seg.segment_by_time(make_sequence(250), 1)
        assert [(s.start, s.end) for s in out] == [(0, 100), (100, 200)]
        assert all(s.label is ActivityLabel.FALLING for s in out)

    def test_300_packets_three_seconds(self):
        out = seg.segment_by_time(make_sequence(300), 3)
        assert [(s.start, s.end) for s in out] == [(0, 300)]

    def test_too_short(self):
        with pytest.raises(TooShortError):
            seg.segment_by_time(make_sequence(99), 1)

    def test_bad_duration(self):
        with pytest.raises(DataError):
            seg.segment_by_time(make_sequence(500), 4)

    @given(st.integers(min_value=100, max_value=2000), st.sampled_from([1, 2, 3]))
    @settings(max_examples=40, deadline=None)
    def test_partition_property(self, n, dur):
        length = dur * 100
        if n < length:
            return
        out = seg.segment_by_time(make_sequence(n), dur)
        assert len(out) == n // length
        # disjoint, ordered, covering exactly floor(n/L)*L packets
        covered = 0
        for i, s in enumerate(out):
            assert s.start == i * length and len(s) == length
            covered += len(s)
        assert covered == (n // length) * length


class TestAveraging:
    def test_count_n100(self):
        x = np.random.default_rng(0).normal(size=(100, 270)) ** 2
        out = seg.average_matrix(x)
        assert out.shape == (10, 270)
        d, starts = seg.sample_starts(100)
        assert d == 10 and list(starts) == list(range(10))

    def test_n10_single_mean(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=(10, 270))
        out = seg.average_matrix(x)
        assert out.shape == (1, 270)
        assert np.allclose(out[0], x.mean(axis=0))

    def test_identical_rows(self):
        v = np.linspace(0, 5, 270)
        x = np.tile(v, (37, 1))
        out = seg.average_matrix(x)
        assert np.allclose(out, v)

    def test_too_short(self):
        with pytest.raises(TooShortError):
            seg.average_matrix(np.zeros((9, 270)))

    def test_matches_manual_selection(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(53, 4))
        out = seg.average_matrix(x)
        d = 53 // 10
        for s in range(53 - 9 * d):
            rows = [x[s + j * d] for j in range(10)]
            assert np.allclose(out[s], np.mean(rows, axis=0))

    @given(st.integers(min_value=10, max_value=1000))
    @settings(max_examples=120, deadline=None)
    def test_count_property(self, n):
        x = np.ones((n, 3))
        out = seg.average_matrix(x)
        assert out.shape[0] == n - 9 * (n // 10)

    def test_labeled_samples(self):
        x = np.abs(np.random.default_rng(3).normal(size=(20, 270)))
        samples = seg.average_into_samples(x, ActivityLabel.JUMPING)
        assert len(samples) == 20 - 9 * 2
        assert all(s.label is ActivityLabel.JUMPING for s in samples)

    def test_centers_in_range(self):
        centers = seg.sample_centers(100)
        assert centers.min() >= 0 and centers.max() < 100
        assert centers[0] == 45  # start 0, d 10 -> 0 + 4.5*10


class TestAugment:
    def test_count_multiplier(self):
        rows = np.abs(np.random.default_rng(4).normal(size=(10, 270)))
        samples = make_samples(rows, [ActivityLabel.FALLING] * 10)
        out = seg.augment(samples)
        assert len(out) == 50

    def test_constant_stream(self):
        v = np.full(270, 2.0)
        samples = make_samples([v] * 12, [ActivityLabel.SEATING] * 12)
        out = seg.augment(samples)
        assert all(np.allclose(s.values, 2.0) for s in out)

    def test_linear_ramp_interior_unchanged(self):
        rows = [np.full(270, float(i)) for i in range(11)]
        samples = make_samples(rows, [ActivityLabel.PUSHING] * 11)
        out = seg.augment(samples, seg.AugmentConfig(ks=(3,)))
        k3 = out[11:]
        for i in range(1, 10):  # interior for k=3
            assert np.allclose(k3[i].values, float(i))

    def test_originals_first_then_ascending_k(self):
        rng = np.random.default_rng(5)
        rows = np.abs(rng.normal(size=(9, 270))) + 1
        samples = make_samples(rows, [ActivityLabel.DRINKING] * 9)
        out = seg.augment(samples, seg.AugmentConfig(ks=(3, 5)))
        assert len(out) == 27
        for i in range(9):
            assert np.array_equal(out[i].values, samples[i].values)
        k3 = seg.moving_average_runs(rows, [ActivityLabel.DRINKING] * 9, 3)
        assert np.allclose(np.stack([s.values for s in out[9:18]]), k3)

    def test_no_leak_across_labels(self):
        rows = np.concatenate([np.full((9, 270), 1.0), np.full((9, 270), 100.0)])
        labels = [ActivityLabel.FALLING] * 9 + [ActivityLabel.KICKING] * 9
        out = seg.augment(make_samples(rows, labels))
        # every augmented value stays within its own run's value set
        for s in out:
            expect = 1.0 if s.label is ActivityLabel.FALLING else 100.0
            assert np.allclose(s.values, expect)

    def test_run_too_short(self):
        rows = np.ones((5, 270))
        with pytest.raises(TooShortError):
            seg.augment(make_samples(rows, [ActivityLabel.FALLING] * 5))

    def test_even_k_rejected(self):
        with pytest.raises(DataError):
            seg.AugmentConfig(ks=(4,))


class TestSplit:
    def build(self, per_class=10, seed=0):
        rng = np.random.default_rng(99)
        samples = []
        for a in ACTIVITIES:
            for _ in range(per_class):
                samples.append(CsiSample(values=np.abs(rng.normal(size=270)), label=a))
        return seg.Dataset(samples=samples, split_seed=seed)

    def test_counts(self):
        train, test = seg.split(self.build())
        assert len(train) == 63 and len(test) == 27

    def test_deterministic(self):
        ds = self.build()
        t1, e1 = seg.split(ds)
        t2, e2 = seg.split(ds)
        assert all(np.array_equal(a.values, b.values) for a, b in zip(t1, t2))
        assert all(np.array_equal(a.values, b.values) for a, b in zip(e1, e2))

    def test_seed_changes_membership(self):
        labels = [ACTIVITIES[i % 9] for i in range(108)]
        i0 = seg.split_indices(labels, 0)
        i1 = seg.split_indices(labels, 1)
        assert not np.array_equal(i0[0], i1[0])

    def test_disjoint_and_complete(self):
        labels = [ACTIVITIES[i % 9] for i in range(95 * 9)]
        train, test = seg.split_indices(labels, 7)
        both = np.concatenate([train, test])
        assert len(np.unique(both)) == len(both) == len(labels)

    def test_stratification_bounds(self):
        rng = np.random.default_rng(0)
        counts = rng.integers(3, 40, size=9)
        labels = []
        for a, c in zip(ACTIVITIES, counts):
            labels += [a] * int(c)
        for s in range(25):
            train, _ = seg.split_indices(labels, s)
            train_labels = [labels[i] for i in train]
            for a, c in zip(ACTIVITIES, counts):
                frac = sum(1 for l in train_labels if l is a) / int(c)
                assert 0.7 <= frac < 0.7 + 1 / int(c)

    def test_class_underflow(self):
        labels = [ActivityLabel.FALLING, ActivityLabel.FALLING, ActivityLabel.SEATING]
        with pytest.raises(DataError):
            seg.split_indices(labels, 0)


class TestSampleFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        # float32-representable values so the round trip is exact
        rows = np.abs(rng.normal(size=(25, 270))).astype(np.float32).astype(np.float64)
        labels = [ACTIVITIES[i % 9] for i in range(25)]
        samples = make_samples(rows, labels)
        path = tmp_path / "d1s.smp"
        seg.write_samples(path, samples, segmentation_s=2)
        back, meta = seg.read_samples(path)
        assert meta["segmentation_s"] == "2"
        assert len(back) == 25
        for a, b in zip(samples, back):
            assert a.label is b.label
            assert np.array_equal(a.values, b.values)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.smp"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 20)
        with pytest.raises(VersionError):
            seg.read_samples(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "trunc.smp"
        path.write_bytes(seg.SMP_MAGIC + (5).to_bytes(4, "little") + b"\x00" * 10)
        with pytest.raises(FormatError):
            seg.read_samples(path)
