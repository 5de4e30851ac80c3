"""Dataset handling: manifest CSV, car-keyed splitting, preprocessing, and the
synthetic desk-scale corpus generator.

Manifest CSV format (UTF-8, exact header):
    image_path,car_id,seat,make,model,year,time_of_day
seat tokens: driver | front_passenger | rear_passenger
time_of_day tokens: full_sun | overcast | dawn | dusk | night | unknown

Label semantics: driver -> 1, both passenger seats -> 0.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np

from seatnet import imgops, pnm
from seatnet.errors import ConfigError, DataError, ManifestError
from seatnet.rng import PURPOSE_SPLIT, PURPOSE_SYNTH, Rng, derive_seed

MANIFEST_HEADER = ["image_path", "car_id", "seat", "make", "model", "year", "time_of_day"]
SEATS = ("driver", "front_passenger", "rear_passenger")
TIMES_OF_DAY = ("full_sun", "overcast", "dawn", "dusk", "night", "unknown")
SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class SampleRecord:
    image_path: str
    car_id: str
    seat: str
    make: str = "unknown"
    model: str = "unknown"
    year: int | None = None
    time_of_day: str = "unknown"

    @property
    def label(self):
        return 1 if self.seat == "driver" else 0


class DatasetManifest:
    """Validated, ordered record list with a car_id -> indices index."""

    def __init__(self, records):
        seen_paths = set()
        by_car = {}
        for i, rec in enumerate(records):
            if rec.image_path in seen_paths:
                raise DataError(f"duplicate image_path {rec.image_path!r}")
            seen_paths.add(rec.image_path)
            if not rec.car_id:
                raise DataError(f"record {i}: empty car_id")
            by_car.setdefault(rec.car_id, []).append(i)
        self.records = list(records)
        self.by_car = by_car

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def car_ids(self):
        return list(self.by_car)

    def label_counts(self):
        pos = sum(r.label for r in self.records)
        return pos, len(self.records) - pos


def _parse_row(row, line_no):
    seat = row["seat"]
    if seat not in SEATS:
        raise ManifestError(line_no, f"unknown seat token {seat!r}")
    tod = row["time_of_day"]
    if tod not in TIMES_OF_DAY:
        raise ManifestError(line_no, f"unknown time_of_day token {tod!r}")
    raw_year = row["year"].strip()
    if raw_year in ("", "unknown"):
        year = None
    else:
        try:
            year = int(raw_year)
        except ValueError:
            raise ManifestError(line_no, f"bad year {raw_year!r}") from None
        if not 1900 <= year <= 2100:
            raise ManifestError(line_no, f"year {year} outside 1900-2100")
    if not row["image_path"]:
        raise ManifestError(line_no, "empty image_path")
    if not row["car_id"]:
        raise ManifestError(line_no, "empty car_id")
    return SampleRecord(
        image_path=row["image_path"],
        car_id=row["car_id"],
        seat=seat,
        make=row["make"] or "unknown",
        model=row["model"] or "unknown",
        year=year,
        time_of_day=tod,
    )


def load_manifest(path):
    """Read and validate a manifest CSV. Errors carry 1-based line numbers
    (the header is line 1)."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open manifest {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(1, "missing header row") from None
        if header != MANIFEST_HEADER:
            raise ManifestError(
                1, f"header {header!r} != expected {MANIFEST_HEADER!r}"
            )
        records = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ManifestError(
                    line_no, f"expected {len(MANIFEST_HEADER)} columns, got {len(row)}"
                )
            records.append(_parse_row(dict(zip(MANIFEST_HEADER, row)), line_no))
    try:
        return DatasetManifest(records)
    except DataError as exc:
        raise ManifestError("?", str(exc)) from None


def save_manifest(manifest, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for r in manifest:
            writer.writerow(
                [
                    r.image_path,
                    r.car_id,
                    r.seat,
                    r.make,
                    r.model,
                    "unknown" if r.year is None else r.year,
                    r.time_of_day,
                ]
            )


# ---------------------------------------------------------------------------
# car-keyed splitting


@dataclass(frozen=True)
class SplitAssignment:
    assignment: dict  # car_id -> "train" | "dev" | "test"
    seed: int
    ratios: tuple

    def bucket(self, car_id):
        return self.assignment[car_id]

    def records(self, manifest, split):
        return [r for r in manifest if self.assignment[r.car_id] == split]

    def car_counts(self):
        counts = dict.fromkeys(SPLITS, 0)
        for bucket in self.assignment.values():
            counts[bucket] += 1
        return tuple(counts[s] for s in SPLITS)


def largest_remainder_sizes(total, ratios):
    """Integer bucket sizes summing to ``total`` via largest-remainder
    rounding; remainder ties go to the earlier bucket."""
    quotas = [total * r for r in ratios]
    sizes = [int(q) for q in quotas]
    leftovers = total - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:leftovers]:
        sizes[i] += 1
    return tuple(sizes)


def split_by_car(manifest, ratios, seed):
    """Assign whole cars to train/dev/test so no car straddles splits.

    Cars are sorted lexically, shuffled by the fixed PRNG, then dealt into
    buckets sized by largest-remainder rounding. Deterministic in
    (manifest car set, ratios, seed); row order does not matter.
    """
    if len(ratios) != 3:
        raise ConfigError(f"need 3 ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise ConfigError(f"ratios must be non-negative, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got sum {sum(ratios)!r}")
    cars = sorted(manifest.by_car)
    nonzero = sum(1 for r in ratios if r > 0)
    if len(cars) < nonzero:
        raise DataError(
            f"{len(cars)} cars cannot fill {nonzero} non-empty splits"
        )
    rng = Rng(derive_seed(seed, PURPOSE_SPLIT))
    rng.shuffle(cars)
    sizes = largest_remainder_sizes(len(cars), ratios)
    assignment = {}
    start = 0
    for split, size in zip(SPLITS, sizes):
        for car in cars[start : start + size]:
            assignment[car] = split
        start += size
    return SplitAssignment(assignment=assignment, seed=seed, ratios=tuple(ratios))


def save_split(split, path, provenance=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in provenance:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["car_id", "split"])
        for car_id in sorted(split.assignment):
            writer.writerow([car_id, split.assignment[car_id]])


def load_split(path, seed=0, ratios=(0.0, 0.0, 0.0)):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open split file {path}: {exc}") from None
    with fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != ["car_id", "split"]:
        raise DataError(f"split file header {header!r} != ['car_id', 'split']")
    assignment = {}
    for row in reader:
        if not row:
            continue
        car_id, bucket = row
        if bucket not in SPLITS:
            raise DataError(f"unknown split bucket {bucket!r} for car {car_id!r}")
        assignment[car_id] = bucket
    return SplitAssignment(assignment=assignment, seed=seed, ratios=tuple(ratios))


# ---------------------------------------------------------------------------
# preprocessing


def preprocess_image(
    img,
    mode,
    rng=None,
    input_size=224,
    rescale_target=256,
    rotation_augmentation=False,
):
    """Shared tail of the pipeline after decoding: grayscale, rescale, crop,
    optional right-angle rotation (train only), replicate, map to [-1, 1]."""
    if mode not in ("train", "eval"):
        raise DataError(f"unknown preprocess mode {mode!r}")
    if img.shape[0] == 3:
        img = imgops.to_grayscale(img)
    img = imgops.rescale_short_side(img, rescale_target)
    if mode == "train":
        img = imgops.crop(img, input_size, mode="random", rng=rng)
        if rotation_augmentation:
            img = imgops.rotate90(img, rng.randint(4))
    else:
        img = imgops.crop(img, input_size, mode="center")
    img = imgops.replicate_gray(img)
    return (2.0 * img.astype(np.float32) - 1.0).astype(np.float32)


def preprocess(record, mode, rng=None, input_size=224, rescale_target=256,
               rotation_augmentation=False):
    """Decode one record's image and run the full pipeline.

    Returns (tensor (3, S, S) float32 in [-1, 1], label). Decode errors are
    re-raised with the record's path for context.
    """
    try:
        img = pnm.decode_pnm(record.image_path)
    except OSError as exc:
        raise DataError(f"{record.image_path}: {exc}") from None
    except DataError as exc:
        raise type(exc)(f"{record.image_path}: {exc}") from None
    tensor = preprocess_image(
        img, mode, rng, input_size, rescale_target, rotation_augmentation
    )
    return tensor, record.label


# ---------------------------------------------------------------------------
# synthetic corpus


@dataclass(frozen=True)
class SynthSpec:
    count: int
    driver_fraction: float = 0.31
    image_size: int = 112
    noise_level: float = 0.05
    seed: int = 0
    images_per_car: int = 10

    def __post_init__(self):
        if not 0.0 <= self.driver_fraction <= 1.0:
            raise ConfigError(
                f"driver_fraction must be in [0, 1], got {self.driver_fraction}"
            )
        if self.count < 1:
            raise ConfigError(f"count must be >= 1, got {self.count}")
        if self.image_size < 16:
            raise ConfigError(f"image_size must be >= 16, got {self.image_size}")


def synth_template(size):
    """Driver-class template: luminance ramp over the left third with a dark
    vertical band (door-sill look) on a vertical background gradient.
    The passenger template is this one mirrored left-right."""
    h = w = size
    ys = np.linspace(0.0, 1.0, h)
    g = 0.55 + 0.30 * ys
    m = np.ones(w)
    third = w // 3
    ramp = np.linspace(0.0, 1.0, max(third, 2))[:third]
    m[:third] = 0.30 + 0.70 * ramp
    band_lo, band_hi = w // 6, w // 6 + max(w // 12, 2)
    m[band_lo:band_hi] *= 0.25
    return np.clip(g[:, None] * m[None, :], 0.0, 1.0)


def synth_labels(count, driver_fraction):
    """Deterministic 0/1 sequence with floor(count*fraction + 0.5) ones,
    spread evenly so every synthetic car sees both classes."""
    nd = int(count * driver_fraction + 0.5)
    i = np.arange(count, dtype=np.int64)
    return (((i + 1) * nd) // count - (i * nd) // count).astype(np.int64)


def synth_generate(spec, out_dir):
    """Write the synthetic corpus (PGM images + manifest.csv) and return the
    manifest. Byte-deterministic in ``spec``."""
    os.makedirs(out_dir, exist_ok=True)
    template = synth_template(spec.image_size)
    templates = {1: template, 0: template[:, ::-1]}
    labels = synth_labels(spec.count, spec.driver_fraction)
    records = []
    makes = ("aurora", "borealis", "cascade", "dune")
    models = ("mk1", "mk2", "mk3")
    for i in range(spec.count):
        rng = Rng(derive_seed(spec.seed, PURPOSE_SYNTH, i))
        noise = spec.noise_level * (2.0 * rng.uniform(spec.image_size**2) - 1.0)
        img = templates[int(labels[i])] + noise.reshape(spec.image_size, -1)
        img_u8 = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
        name = f"img{i:05d}.pgm"
        path = os.path.join(out_dir, name)
        pnm.write_pgm(path, img_u8)
        car = i // spec.images_per_car
        records.append(
            SampleRecord(
                image_path=path,
                car_id=f"car{car:04d}",
                seat="driver" if labels[i] else
                ("front_passenger" if i % 2 == 0 else "rear_passenger"),
                make=makes[car % len(makes)],
                model=models[car % len(models)],
                year=1996 + car % 25,
                time_of_day=TIMES_OF_DAY[i % 5],
            )
        )
    manifest = DatasetManifest(records)
    save_manifest(manifest, os.path.join(out_dir, "manifest.csv"))
    return manifest
