import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isgd import data
from isgd.data import Dataset

from mnist_files import find_mnist


def small_ds(n=23, dim=3, classes=4, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.standard_normal((n, dim)), rng.integers(0, classes, n), classes)


class TestDataset:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 2)), np.zeros(2, int), 2)

    def test_label_range(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 2)), np.array([0, 2]), 2)


class TestPermute:
    def test_single_example_unchanged(self):
        ds = small_ds(n=1)
        out = data.permute_dataset(ds, 5)
        assert np.array_equal(out.features, ds.features)

    def test_multiset_preserved(self):
        ds = small_ds()
        out = data.permute_dataset(ds, 5)
        key = lambda d: sorted(zip(map(tuple, d.features), d.labels))
        assert key(out) == key(ds)

    def test_deterministic(self):
        ds = small_ds()
        a = data.permute_dataset(ds, 9)
        b = data.permute_dataset(ds, 9)
        assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)


class TestFcpr:
    def test_examples(self):
        assert data.fcpr_index(0, 100, 20) == 0
        assert data.fcpr_index(5, 100, 20) == 0
        assert data.fcpr_index(7, 100, 20) == 2

    def test_trailing_partial_batch_dropped(self):
        assert data.batches_per_epoch(105, 20) == 5
        assert data.fcpr_index(5, 105, 20) == 0

    def test_errors(self):
        with pytest.raises(ValueError):
            data.fcpr_index(0, 10, 20)
        with pytest.raises(ValueError):
            data.fcpr_index(-1, 10, 2)
        with pytest.raises(ValueError):
            data.fcpr_index(0, 10, 0)

    @given(st.integers(1, 500), st.integers(1, 50), st.integers(0, 10_000))
    def test_fixed_cycle(self, n_d, n_b, start):
        if n_b > n_d:
            return
        n = n_d // n_b
        seen = [data.fcpr_index(j, n_d, n_b) for j in range(start, start + n)]
        assert sorted(seen) == list(range(n))

    def test_slicing_partitions_dataset(self):
        ds = small_ds(n=24)
        batches = data.slice_batches(ds, 6)
        assert [b.index for b in batches] == [0, 1, 2, 3]
        assert np.array_equal(np.concatenate([b.features for b in batches]), ds.features)
        assert np.array_equal(np.concatenate([b.labels for b in batches]), ds.labels)

    def test_sampler_cycles(self):
        s = data.FcprSampler(small_ds(n=24), 6)
        assert len(s) == 4
        assert s[9].index == 1
        assert s[9] is s[1]


class TestIdx:
    def _write(self, tmp_path, n=5, rows=28, cols=28):
        rng = np.random.default_rng(0)
        imgs = rng.integers(0, 256, (n, rows, cols), dtype=np.uint8)
        labels = rng.integers(0, 10, n, dtype=np.uint8)
        ip, lp = tmp_path / "img", tmp_path / "lab"
        data.write_idx(ip, imgs)
        data.write_idx(lp, labels)
        return ip, lp, imgs, labels

    def test_header_bytes(self, tmp_path):
        ip, lp, imgs, _ = self._write(tmp_path, n=2)
        raw = ip.read_bytes()
        assert raw[:16] == struct.pack(">IIII", 0x803, 2, 28, 28)
        assert lp.read_bytes()[:8] == struct.pack(">II", 0x801, 2)

    def test_roundtrip(self, tmp_path):
        ip, lp, imgs, labels = self._write(tmp_path)
        ds = data.load_mnist_idx(ip, lp)
        assert len(ds) == 5 and ds.dim == 784
        assert ds.features.min() >= 0 and ds.features.max() <= 1
        np.testing.assert_array_equal(ds.features, imgs.reshape(5, -1) / 255.0)
        np.testing.assert_array_equal(ds.labels, labels)

    def test_gzip(self, tmp_path):
        import gzip
        ip, lp, imgs, labels = self._write(tmp_path)
        for p in (ip, lp):
            (tmp_path / (p.name + ".gz")).write_bytes(gzip.compress(p.read_bytes()))
        ds = data.load_mnist_idx(tmp_path / "img.gz", tmp_path / "lab.gz")
        np.testing.assert_array_equal(ds.labels, labels)

    def test_bad_label_magic(self, tmp_path):
        ip, lp, *_ = self._write(tmp_path)
        with pytest.raises(ValueError, match="magic"):
            data.load_mnist_idx(ip, ip)
        with pytest.raises(ValueError, match="magic"):
            data.load_mnist_idx(lp, lp)

    def test_truncated(self, tmp_path):
        ip, lp, *_ = self._write(tmp_path)
        ip.write_bytes(ip.read_bytes()[:-1])
        with pytest.raises(ValueError, match="truncated"):
            data.load_mnist_idx(ip, lp)
        (tmp_path / "short").write_bytes(b"\x00\x00")
        with pytest.raises(ValueError, match="truncated"):
            data.read_idx(tmp_path / "short", data.IDX_LABELS_MAGIC)

    def test_count_mismatch(self, tmp_path):
        ip, lp, *_ = self._write(tmp_path)
        data.write_idx(lp, np.zeros(4, np.uint8))
        with pytest.raises(ValueError, match="labels"):
            data.load_mnist_idx(ip, lp)

    def test_official_train_set(self):
        files = find_mnist()
        if files is None:
            pytest.skip("MNIST IDX files not available locally")
        ds = data.load_mnist_idx(files["train_images"], files["train_labels"])
        assert len(ds) == 60000 and ds.dim == 784


class TestSynthetic:
    def test_counts(self):
        ds = data.synth_gaussian(10, 1000, 5, 1.0, 0)
        assert len(ds) == 10_000
        assert np.array_equal(np.bincount(ds.labels), np.full(10, 1000))

    def test_zero_spread(self):
        ds = data.synth_gaussian(3, 7, 4, 0.0, 1)
        for c in range(3):
            pts = ds.features[ds.labels == c]
            assert np.all(pts == pts[0])
        means = [ds.features[ds.labels == c][0] for c in range(3)]
        assert len({tuple(m) for m in means}) == 3

    def test_deterministic(self):
        a = data.synth_gaussian(3, 7, 4, 1.0, 1)
        b = data.synth_gaussian(3, 7, 4, 1.0, 1)
        assert np.array_equal(a.features, b.features)

    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            data.synth_gaussian(1, 7, 4, 1.0, 1)

    def test_separable_at_small_spread(self):
        from sklearn.linear_model import LogisticRegression
        ds = data.synth_gaussian(10, 200, 20, 0.1, 3)
        fit = LogisticRegression(max_iter=2000).fit(ds.features, ds.labels)
        assert fit.score(ds.features, ds.labels) > 0.95

    def test_train_test_share_means(self):
        tr, te = data.synth_train_test(4, 50, 3, 0.0, 7, test_per_class=5)
        for c in range(4):
            assert np.array_equal(tr.features[tr.labels == c][0], te.features[te.labels == c][0])


class TestBatchModes:
    def test_single_class(self):
        ds = data.synth_gaussian(10, 30, 2, 1.0, 0)
        out = data.single_class_order(ds, 20, 1)
        for b in data.slice_batches(out, 20):
            assert len(set(b.labels.tolist())) == 1
        assert [b.labels[0] for b in data.slice_batches(out, 20)] == list(range(10))

    def test_iid(self):
        ds = data.synth_gaussian(10, 30, 2, 1.0, 0)
        out = data.iid_order(ds, 3, 10, 1)
        for b in data.slice_batches(out, 30):
            assert np.array_equal(np.bincount(b.labels, minlength=10), np.full(10, 3))
        # no example used twice
        assert len({tuple(r) for r in out.features}) == 300

    def test_insufficient_examples(self):
        ds = data.synth_gaussian(3, 5, 2, 1.0, 0)
        with pytest.raises(ValueError):
            data.single_class_order(ds, 6, 0)
        with pytest.raises(ValueError):
            data.iid_order(ds, 2, 3, 0)
