import numpy as np
import pytest

from conftest import SMALL
from recnn.dataio import derive_multilabels, load_manifest, read_fmap, read_labelmap
from recnn.regionfeat import connected_components
from recnn.retrieval import IndexConfig, build_index, query_ranked
from recnn.synthgen import (
    SplitMix64,
    SynthConfig,
    composition_classes,
    expected_region_count,
    gaussian_noise,
    generate_dataset,
    generate_image,
    splitmix64_stream,
)


class TestSplitMix64:
    def test_reference_outputs(self):
        g = SplitMix64(1234567)
        assert [g.next() for _ in range(5)] == [
            6457827717110365317,
            3203168211198807973,
            9817491932198370423,
            4593380528125082431,
            16408922859458223821,
        ]
        assert SplitMix64(0).next() == 0xE220A8397B1DCDAF

    @pytest.mark.parametrize("seed", [0, 1, 2**63 + 12345, 2**64 - 1])
    def test_vectorised_matches_scalar(self, seed):
        g = SplitMix64(seed)
        np.testing.assert_array_equal(splitmix64_stream(seed, 257), [g.next() for _ in range(257)])

    def test_gaussian_moments(self):
        z = gaussian_noise(42, 200_001)
        assert z.shape == (200_001,)
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1.0) < 0.01
        assert abs(np.mean(np.abs(z) < 1.0) - 0.6827) < 0.005

    def test_gaussian_prefix_stable(self):
        np.testing.assert_array_equal(gaussian_noise(3, 11), gaussian_noise(3, 12)[:11])


class TestConfig:
    def test_channels_must_cover_classes(self):
        with pytest.raises(ValueError, match="channels"):
            SynthConfig(num_pixel_classes=8, channels=4)

    def test_divisibility(self):
        with pytest.raises(ValueError, match="divisible"):
            SynthConfig(num_images=10, num_compositions=4)

    def test_too_many_compositions(self):
        with pytest.raises(ValueError, match="distinct"):
            composition_classes(4, 2)

    def test_compositions_distinct(self):
        for p in range(1, 18):
            subsets = composition_classes(min(2**p - 1, 12), p)
            assert len({frozenset(s) for s in subsets}) == len(subsets)


class TestLayout:
    @pytest.mark.parametrize("p", [1, 2, 3, 6])
    def test_region_counts_closed_form(self, p):
        cfg = SynthConfig(num_images=1, num_compositions=1, num_pixel_classes=p, height=10, width=9, channels=p)
        s = len(composition_classes(1, p)[0])
        _, labelmap, _ = generate_image(cfg, 0)
        for connectivity in (4, 8):
            assert len(connected_components(labelmap, connectivity)[1]) == expected_region_count(s, connectivity)

    def test_labels_match_declared_classes(self, small_manifest):
        declared = composition_classes(SMALL.num_compositions, SMALL.num_pixel_classes)
        for i, record in enumerate(load_manifest(small_manifest)):
            labelmap = read_labelmap(record.label_path)
            assert derive_multilabels(labelmap, 1) == set(declared[i % SMALL.num_compositions])
            assert set(np.unique(labelmap.labels)) == set(declared[i % SMALL.num_compositions])


class TestDataset:
    def test_zero_noise_same_composition_identical(self, small_manifest):
        records = load_manifest(small_manifest)
        by_class = {}
        for r in records:
            by_class.setdefault(r.class_label, []).append(r)
        for group in by_class.values():
            first = group[0].feature_path.read_bytes()
            assert all(r.feature_path.read_bytes() == first for r in group[1:])

    def test_zero_noise_recnn_plus_separates(self, small_index):
        vectors = {}
        for e in small_index.entries:
            vectors.setdefault(e.class_label, set()).add(e.recnn_plus.tobytes())
        assert all(len(v) == 1 for v in vectors.values())
        assert len({next(iter(v)) for v in vectors.values()}) == len(vectors)
        for e in small_index.entries:
            for image_id, d in query_ranked(small_index, e.image_id, "recnn+"):
                same = small_index.entry(image_id).class_label == e.class_label
                assert (d == 0.0) == same

    def test_deterministic_bytes(self, tmp_path):
        cfg = SynthConfig(num_images=4, num_compositions=2, height=12, width=12, noise_sigma=0.3, seed=2**40 + 3)
        a = generate_dataset(cfg, tmp_path / "a").parent
        b = generate_dataset(cfg, tmp_path / "b").parent
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b and len(files_a) == 13
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()

    def test_images_regenerate_independently(self, tmp_path):
        cfg = SynthConfig(num_images=6, num_compositions=3, height=10, width=10, noise_sigma=0.2, seed=77)
        records = load_manifest(generate_dataset(cfg, tmp_path))
        _, _, fmap = generate_image(cfg, 4)
        np.testing.assert_array_equal(read_fmap(records[4].feature_path).values, fmap.values)
        _, _, other = generate_image(cfg, 1)
        assert not np.array_equal(other.values, fmap.values)

    def test_reduced_feature_resolution(self, tmp_path):
        cfg = SynthConfig(num_images=6, num_compositions=3, height=32, width=32, feature_stride=4)
        manifest = generate_dataset(cfg, tmp_path)
        assert read_fmap(load_manifest(manifest)[0].feature_path).shape == (8, 8, 8)
        index = build_index(manifest, IndexConfig())
        assert index.feature_dim == 8
        ranked = query_ranked(index, index.ids[0], "recnn+")
        assert ranked.distances[0] == 0.0
