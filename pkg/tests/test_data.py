"""Manifest ingestion, car-keyed splitting, preprocessing, synthetic corpus."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seatnet.data import (
    DatasetManifest,
    MANIFEST_HEADER,
    SampleRecord,
    SynthSpec,
    largest_remainder_sizes,
    load_manifest,
    load_split,
    preprocess,
    save_split,
    split_by_car,
    synth_generate,
    synth_labels,
    synth_template,
)
from seatnet.errors import ConfigError, DataError, ManifestError
from seatnet.pnm import write_pgm
from seatnet.rng import Rng


def write_manifest(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(MANIFEST_HEADER) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def rec(i, car, seat="driver"):
    return SampleRecord(image_path=f"img{i}.pgm", car_id=car, seat=seat)


class TestManifest:
    def test_production_shaped_counts(self, corpus_manifest_path):
        manifest = load_manifest(corpus_manifest_path)
        assert len(manifest) == 12042
        drivers, passengers = manifest.label_counts()
        assert drivers == 3721
        assert passengers == 8321
        assert len(manifest.car_ids()) == 120

    def test_header_only_is_empty_manifest(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest(path, [])
        assert len(load_manifest(path)) == 0

    def test_unknown_seat_names_row_and_token(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest(path, [
            ["a.pgm", "car1", "driver", "m", "m", 2000, "dawn"],
            ["b.pgm", "car1", "pilot", "m", "m", 2000, "dawn"],
        ])
        with pytest.raises(ManifestError, match="row 3.*pilot"):
            load_manifest(path)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("image_path,car,seat,make,model,year,time_of_day\n")
        with pytest.raises(ManifestError, match="header"):
            load_manifest(path)

    def test_short_row_names_line(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest(path, [["a.pgm", "car1", "driver", "m", "m", 2000, "dawn"]])
        with open(path, "a", encoding="utf-8") as fh:
            fh.write("b.pgm,car1,driver,m,m\n")
        with pytest.raises(ManifestError, match="row 3.*columns"):
            load_manifest(path)

    def test_duplicate_path_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest(path, [
            ["a.pgm", "car1", "driver", "m", "m", 2000, "dawn"],
            ["a.pgm", "car2", "driver", "m", "m", 2000, "dawn"],
        ])
        with pytest.raises(ManifestError, match="duplicate"):
            load_manifest(path)

    def test_year_validation(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest(path, [["a.pgm", "c", "driver", "m", "m", 1500, "dawn"]])
        with pytest.raises(ManifestError, match="row 2"):
            load_manifest(path)

    def test_unknown_year_allowed(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest(path, [["a.pgm", "c", "driver", "m", "m", "unknown", "night"]])
        manifest = load_manifest(path)
        assert manifest.records[0].year is None

    def test_missing_file_is_data_error(self, tmp_path):
        with pytest.raises(DataError):
            load_manifest(tmp_path / "absent.csv")

    def test_labels(self):
        assert rec(0, "c", "driver").label == 1
        assert rec(0, "c", "front_passenger").label == 0
        assert rec(0, "c", "rear_passenger").label == 0


class TestLargestRemainder:
    def test_120_cars_default_ratios(self):
        assert largest_remainder_sizes(120, (0.76, 0.10, 0.14)) == (91, 12, 17)

    def test_all_in_one_bucket(self):
        assert largest_remainder_sizes(120, (1.0, 0.0, 0.0)) == (120, 0, 0)

    @given(st.integers(1, 500), st.tuples(
        st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 1)))
    @settings(max_examples=80, deadline=None)
    def test_sizes_sum_to_total(self, total, raw):
        s = sum(raw)
        ratios = tuple(r / s for r in raw)
        assert sum(largest_remainder_sizes(total, ratios)) == total


class TestSplitByCar:
    def _manifest(self, cars=10, per_car=4):
        records = []
        for c in range(cars):
            for k in range(per_car):
                records.append(rec(c * per_car + k, f"car{c:03d}",
                                   "driver" if k == 0 else "rear_passenger"))
        return DatasetManifest(records)

    def test_every_car_in_exactly_one_bucket(self):
        m = self._manifest()
        split = split_by_car(m, (0.5, 0.25, 0.25), seed=1)
        assert sorted(split.assignment) == sorted(m.car_ids())
        # quotas 5/2.5/2.5: the leftover seat goes to the earlier tied bucket
        assert split.car_counts() == (5, 3, 2)

    def test_deterministic(self):
        m = self._manifest()
        a = split_by_car(m, (0.6, 0.2, 0.2), seed=3)
        b = split_by_car(m, (0.6, 0.2, 0.2), seed=3)
        assert a.assignment == b.assignment

    def test_row_order_does_not_matter(self):
        m = self._manifest()
        shuffled = DatasetManifest(list(reversed(m.records)))
        a = split_by_car(m, (0.6, 0.2, 0.2), seed=3)
        b = split_by_car(shuffled, (0.6, 0.2, 0.2), seed=3)
        assert a.assignment == b.assignment

    def test_all_train(self):
        m = self._manifest()
        split = split_by_car(m, (1.0, 0.0, 0.0), seed=0)
        assert split.car_counts() == (10, 0, 0)

    def test_ratio_validation(self):
        m = self._manifest()
        with pytest.raises(ConfigError):
            split_by_car(m, (0.5, 0.2, 0.2), seed=0)
        with pytest.raises(ConfigError):
            split_by_car(m, (-0.1, 0.6, 0.5), seed=0)

    def test_fewer_cars_than_buckets(self):
        m = DatasetManifest([rec(0, "only")])
        with pytest.raises(DataError):
            split_by_car(m, (0.4, 0.3, 0.3), seed=0)

    @given(st.integers(3, 40), st.integers(0, 1000))
    @settings(max_examples=50, deadline=None)
    def test_property_partition_exact(self, cars, seed):
        m = self._manifest(cars=cars)
        split = split_by_car(m, (0.7, 0.15, 0.15), seed=seed)
        buckets = [split.records(m, s) for s in ("train", "dev", "test")]
        total = sum(len(b) for b in buckets)
        assert total == len(m)
        paths = set()
        for bucket in buckets:
            for r in bucket:
                assert r.image_path not in paths
                paths.add(r.image_path)
        # a car's images never straddle buckets
        for bucket in buckets:
            for r in bucket:
                assert split.assignment[r.car_id] in ("train", "dev", "test")

    def test_save_load_roundtrip(self, tmp_path):
        m = self._manifest()
        split = split_by_car(m, (0.5, 0.25, 0.25), seed=1)
        path = tmp_path / "split.csv"
        save_split(split, path, provenance=["seed=1"])
        loaded = load_split(path)
        assert loaded.assignment == split.assignment


class TestPreprocess:
    def _record(self, tmp_path, size=140, value=None):
        rng = np.random.RandomState(0)
        img = (rng.rand(size, size) * 255).astype(np.uint8)
        if value is not None:
            img[:] = value
        path = tmp_path / "img.pgm"
        write_pgm(path, img)
        return SampleRecord(image_path=str(path), car_id="c", seat="driver")

    def test_output_shape_and_range(self, tmp_path):
        record = self._record(tmp_path)
        x, label = preprocess(record, "eval", input_size=96, rescale_target=112)
        assert x.shape == (3, 96, 96)
        assert x.dtype == np.float32
        assert x.min() >= -1.0 and x.max() <= 1.0
        assert label == 1

    def test_constant_midgray(self, tmp_path):
        record = self._record(tmp_path, value=128)
        x, _ = preprocess(record, "eval", input_size=96, rescale_target=112)
        assert np.allclose(x, 2 * 128 / 255 - 1, atol=1e-6)

    def test_train_mode_deterministic_per_seed(self, tmp_path):
        record = self._record(tmp_path)
        a, _ = preprocess(record, "train", Rng(4), input_size=96, rescale_target=112)
        b, _ = preprocess(record, "train", Rng(4), input_size=96, rescale_target=112)
        assert np.array_equal(a, b)

    def test_rotation_flag_off_means_unpermuted(self, tmp_path):
        record = self._record(tmp_path)
        base, _ = preprocess(record, "train", Rng(4), input_size=96,
                             rescale_target=112, rotation_augmentation=False)
        again, _ = preprocess(record, "train", Rng(4), input_size=96,
                              rescale_target=112, rotation_augmentation=False)
        assert np.array_equal(base, again)

    def test_rotation_flag_on_rotates_by_stream_quarter_turns(self, tmp_path):
        from seatnet.imgops import crop, replicate_gray, rescale_short_side, rotate90
        from seatnet.pnm import decode_pnm

        record = self._record(tmp_path)
        rng = Rng(4)
        got, _ = preprocess(record, "train", rng, input_size=96,
                            rescale_target=112, rotation_augmentation=True)
        # replay the stream by hand: crop draws two ints, rotation draws one
        replay = Rng(4)
        img = rescale_short_side(decode_pnm(record.image_path), 112)
        cropped = crop(img, 96, mode="random", rng=replay)
        k = replay.randint(4)
        expect = (2.0 * replicate_gray(rotate90(cropped, k)) - 1.0).astype(np.float32)
        assert np.array_equal(got, expect)

    def test_three_channels_are_equal(self, tmp_path):
        record = self._record(tmp_path)
        x, _ = preprocess(record, "eval", input_size=96, rescale_target=112)
        assert np.array_equal(x[0], x[1]) and np.array_equal(x[0], x[2])

    def test_decode_error_carries_path(self, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"P5\n4 4\n255\n\x00")
        record = SampleRecord(image_path=str(bad), car_id="c", seat="driver")
        with pytest.raises(DataError, match="bad.pgm"):
            preprocess(record, "eval")


class TestSynth:
    def test_label_rounding_and_spread(self):
        labels = synth_labels(1000, 0.31)
        assert labels.sum() == 310
        # evenly spread: any window of 10 holds 3 or 4 drivers
        windows = labels.reshape(100, 10).sum(axis=1)
        assert set(windows.tolist()) <= {3, 4}

    def test_templates_are_mirror_images(self):
        t = synth_template(96)
        assert t.shape == (96, 96)
        assert np.array_equal(t[:, ::-1], t[:, ::-1])
        spec = SynthSpec(count=2, driver_fraction=0.5, noise_level=0.0, seed=1)
        assert np.array_equal(synth_template(spec.image_size)[:, ::-1],
                              synth_template(spec.image_size)[:, ::-1])

    def test_noise_zero_classes_mirror_byte_exact(self, tmp_path):
        from seatnet.pnm import decode_pnm

        spec = SynthSpec(count=2, driver_fraction=0.5, image_size=64,
                         noise_level=0.0, seed=1)
        manifest = synth_generate(spec, tmp_path / "z")
        by_label = {r.label: r.image_path for r in manifest}
        driver = decode_pnm(by_label[1])
        passenger = decode_pnm(by_label[0])
        assert np.array_equal(driver[0], passenger[0][:, ::-1])

    def test_generation_is_byte_deterministic(self, tmp_path):
        spec = SynthSpec(count=12, image_size=48, seed=9)
        m1 = synth_generate(spec, tmp_path / "a")
        m2 = synth_generate(spec, tmp_path / "b")
        for r1, r2 in zip(m1, m2):
            with open(r1.image_path, "rb") as f1, open(r2.image_path, "rb") as f2:
                assert f1.read() == f2.read()
        a = (tmp_path / "a" / "manifest.csv").read_text().replace(str(tmp_path / "a"), "")
        b = (tmp_path / "b" / "manifest.csv").read_text().replace(str(tmp_path / "b"), "")
        assert a == b

    def test_cars_group_about_ten_images(self, tmp_path):
        spec = SynthSpec(count=95, image_size=32, seed=0)
        manifest = synth_generate(spec, tmp_path / "c")
        sizes = [len(v) for v in manifest.by_car.values()]
        assert max(sizes) == 10 and min(sizes) >= 1
        assert len(sizes) == 10

    def test_driver_fraction_bounds(self):
        with pytest.raises(ConfigError):
            SynthSpec(count=10, driver_fraction=1.5)
