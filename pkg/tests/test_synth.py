"""Generator and oracle: determinism, locality, exactness, masked metrics."""

import numpy as np
import pytest

from attrgan import synth


def bits(value: int) -> list[int]:
    return [(value >> b) & 1 for b in range(4)]


class TestRender:
    def test_deterministic(self):
        a = synth.render(7, [0, 0, 0, 0])
        b = synth.render(7, [0, 0, 0, 0])
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.background_mask, b.background_mask)

    def test_attribute_locality(self):
        """Flipping one bit only changes pixels inside that bit's region."""
        base = synth.render(7, [0, 0, 0, 0])
        for j in range(4):
            label = [0, 0, 0, 0]
            label[j] = 1
            flipped = synth.render(7, label)
            changed = np.any(flipped.image != base.image, axis=2)
            region = synth.render_region(j, 7)
            assert not np.any(changed & ~region), f"attribute {j} drew outside its region"

    def test_pixel_range(self):
        for seed in range(5):
            sample = synth.render(seed, [1, 1, 1, 1])
            assert sample.image.min() >= -1.0 and sample.image.max() <= 1.0

    def test_rejects_bad_label(self):
        with pytest.raises(ValueError):
            synth.render(0, [1, 0, 1])
        with pytest.raises(ValueError):
            synth.render(0, [2, 0, 0, 0])

    def test_regions_disjoint_and_background_measurable(self):
        for size in (16, 32, 64):
            regions = [synth.render_region(j, 3, size) for j in range(4)]
            for i in range(4):
                assert regions[i].mean() < 0.5, f"attr {i} covers too much at size {size}"
                for j in range(i + 1, 4):
                    assert not (regions[i] & regions[j]).any()

    def test_background_mask_excludes_active_regions(self):
        sample = synth.render(11, [1, 0, 1, 0])
        assert not (sample.background_mask & synth.render_region(0, 11)).any()
        assert not (sample.background_mask & synth.render_region(2, 11)).any()
        # inactive attribute regions stay part of the background
        assert (sample.background_mask & synth.render_region(3, 11)).any()


class TestOracle:
    def test_exact_on_grid(self):
        for seed in range(10):
            for value in range(16):
                sample = synth.render(seed, bits(value))
                pred, conf = synth.oracle_classify(sample.image)
                assert np.array_equal(pred, sample.label), (seed, value)
                side = np.where(sample.label == 1, conf, 1 - conf)
                assert side.min() >= 0.99

    def test_constant_gray_is_all_zero(self):
        gray = np.zeros((32, 32, 3), dtype=np.float32)
        pred, conf = synth.oracle_classify(gray)
        assert np.array_equal(pred, np.zeros(4, dtype=np.int64))
        assert conf.max() < 0.5

    def test_confidence_in_unit_interval(self, rng):
        img = rng.uniform(-1, 1, size=(32, 32, 3)).astype(np.float32)
        _, conf = synth.oracle_classify(img)
        assert conf.min() >= 0.0 and conf.max() <= 1.0


class TestBackgroundError:
    def test_identity_is_zero(self):
        sample = synth.render(3, [1, 0, 0, 1])
        assert synth.background_error(sample, sample.image) == 0.0

    def test_constant_offset(self):
        sample = synth.render(3, [0, 1, 0, 0])
        shifted = sample.image + 0.2
        assert synth.background_error(sample, shifted) == pytest.approx(0.2, rel=1e-6)

    def test_matches_bruteforce_loop(self, rng):
        """Independent pixel loop over the documented mask definition."""
        sample = synth.render(9, [1, 0, 1, 0])
        other = rng.uniform(-1, 1, size=sample.image.shape).astype(np.float32)
        target = np.array([0, 1, 1, 0])
        got = synth.background_error(sample, other, target)

        total, count = 0.0, 0
        size = sample.image.shape[0]
        excluded = np.zeros((size, size), dtype=bool)
        for j in range(4):
            if target[j]:
                excluded |= synth.render_region(j, sample.seed_id, size)
        for y in range(size):
            for x in range(size):
                if sample.background_mask[y, x] and not excluded[y, x]:
                    for c in range(3):
                        total += abs(float(other[y, x, c]) - float(sample.image[y, x, c]))
                        count += 1
        assert got == pytest.approx(total / count, rel=1e-9)

    def test_empty_mask_raises(self):
        sample = synth.render(2, [1, 1, 1, 1])
        hollow = synth.SyntheticSample(
            image=sample.image, label=sample.label,
            background_mask=np.zeros_like(sample.background_mask), seed_id=2,
        )
        with pytest.raises(synth.EmptyMaskError):
            synth.background_error(hollow, sample.image)

    def test_geometry_mismatch_raises(self):
        sample = synth.render(2, [0, 0, 0, 0])
        with pytest.raises(ValueError):
            synth.background_error(sample, np.zeros((16, 16, 3)))


class TestDataset:
    def test_generate_twice_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        synth.generate_dataset(a, count=8, seed=5)
        synth.generate_dataset(b, count=8, seed=5)
        for rel in sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file()):
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_png_roundtrip_exact(self, tmp_path):
        synth.generate_dataset(tmp_path / "d", count=3, seed=1)
        manifest = synth.load_manifest(tmp_path / "d")
        for seed_id in range(3):
            sample = synth.load_sample(manifest, seed_id)
            loaded = synth.load_image_png(tmp_path / "d" / "images" / f"sample_{seed_id:05d}.png")
            assert np.array_equal(sample.image, loaded)

    def test_refuses_nonempty_dir(self, tmp_path):
        target = tmp_path / "d"
        target.mkdir()
        (target / "junk.txt").write_text("x")
        with pytest.raises(FileExistsError):
            synth.generate_dataset(target, count=2, seed=0)

    def test_empty_dataset_valid(self, tmp_path):
        manifest = synth.generate_dataset(tmp_path / "d", count=0, seed=0)
        assert manifest.count == 0
        assert list(manifest.train_seed_ids) == []

    def test_split_disjoint(self):
        manifest = synth.DatasetManifest(
            generator_version=synth.GENERATOR_VERSION, num_attributes=4,
            image_size=32, count=100, global_seed=0, train_count=80,
        )
        train = set(manifest.train_seed_ids)
        eval_ = set(manifest.eval_seed_ids)
        assert not train & eval_
        assert train | eval_ == set(range(100))

    def test_oracle_sound_on_dataset_labels(self):
        manifest = synth.DatasetManifest(
            generator_version=synth.GENERATOR_VERSION, num_attributes=4,
            image_size=32, count=20, global_seed=0, train_count=16,
        )
        for seed_id in range(20):
            sample = synth.load_sample(manifest, seed_id)
            pred, _ = synth.oracle_classify(sample.image)
            assert np.array_equal(pred, sample.label)
