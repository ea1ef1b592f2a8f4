"""Labeled dataset generation for the stationary and time-variant attacks.

Geometry: the target is parked in the GEO slot over longitude 0 and the
ground station sits directly beneath it, so the uplink range is the GEO
altitude.  The attacker's jamming power at the target follows from its
range, the jamming link budget and the jamming label.

Every record is reproducible on its own: record ``i`` of a stationary run
uses ``derive_seed(seed, STAGE_STATIONARY_SAMPLES, i)``; trajectory ``i`` of
a time-variant run uses ``derive_seed(seed, STAGE_TRAJECTORY, i)`` for its
orbit (sub-path 0) and per-epoch bursts (sub-path 1, epoch index).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import orbital
from .seeding import (
    STAGE_LABELS,
    STAGE_STATIONARY_SAMPLES,
    STAGE_TRAJECTORY,
    STAGE_VOI,
    derive_seed,
)
from .signal import (
    FEATURE_NAMES,
    RfLinkConfig,
    SignalFeatures,
    extract_features,
    noise_power,
    received_power,
    sjnr_db,
    snr_db,
    synthesize_received,
)

TARGET_LONGITUDE = 0.0

STATIONARY_COLUMNS = (
    "position_id",
    "attacker_x",
    "attacker_y",
    "attacker_z",
    "distance_to_target",
    "rss",
    "total_received_power",
    "total_amplitude_mean",
    "total_amplitude_std",
    "total_phase_variance",
    "sjnr_at_target",
    "is_jammed",
)

TIMEVARIANT_COLUMNS = (
    "trajectory_id",
    "epoch_s",
    "range_km",
    "distance_to_target",
    "rss",
    "total_received_power",
    "total_amplitude_mean",
    "total_amplitude_std",
    "total_phase_variance",
    "sjnr_at_target",
    "snr_db",
    "is_jammed",
)

MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = ("trajectory_id", "file", "seed", "n_epochs", "n_jammed")


class DataError(ValueError):
    """Malformed or inconsistent dataset file."""


class SchemaError(DataError):
    pass


class ParseError(DataError):
    pass


@dataclass(frozen=True)
class StationaryConfig:
    link: RfLinkConfig = field(default_factory=RfLinkConfig)
    jam_power: float = 100.0  # W
    attacker_gain: float = 30.0  # dBi
    n_positions: int = 5000
    samples_per_position: int = 200
    voi_radius: float = 5000.0  # km
    jammed_count: int = 2262
    seed: int = 0

    def __post_init__(self):
        if self.jam_power < 0:
            raise ValueError("jam_power must be non-negative")
        if self.n_positions < 0:
            raise ValueError("n_positions must be non-negative")
        if self.samples_per_position < 2:
            raise ValueError("samples_per_position must be at least 2")
        if not self.voi_radius > 0:
            raise ValueError("voi_radius must be positive")
        if not 0 <= self.jammed_count <= self.n_positions:
            raise ValueError("jammed_count must lie in [0, n_positions]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class TimeVariantConfig:
    link: RfLinkConfig = field(default_factory=RfLinkConfig)
    jam_power: float = 100.0
    attacker_gain: float = 30.0
    n_trajectories: int = 100
    duration: float = 86400.0  # s
    epoch_step: float = 60.0  # s
    jam_period: int = 20  # epochs
    jam_duty: float = 0.5
    # wider than the stationary VOI: attackers drift through and out of it
    voi_radius: float = 10000.0
    samples_per_epoch: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.jam_power < 0:
            raise ValueError("jam_power must be non-negative")
        if self.n_trajectories < 0:
            raise ValueError("n_trajectories must be non-negative")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not self.epoch_step > 0:
            raise ValueError("epoch_step must be positive")
        if self.jam_period < 1:
            raise ValueError("jam_period must be at least 1")
        if not 0 < self.jam_duty < 1:
            raise ValueError("jam_duty must lie strictly between 0 and 1")
        if not self.voi_radius > 0:
            raise ValueError("voi_radius must be positive")
        if self.samples_per_epoch < 2:
            raise ValueError("samples_per_epoch must be at least 2")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class StationaryRecord:
    position_id: int
    attacker_position: tuple[float, float, float]
    features: SignalFeatures
    is_jammed: int


@dataclass(frozen=True)
class EpochRecord:
    trajectory_id: int
    epoch: float
    range_km: float
    features: SignalFeatures
    snr_db: float
    is_jammed: int


@dataclass
class TimeVariantDataset:
    trajectories: list[list[EpochRecord]]
    seeds: list[int]

    @property
    def empty_count(self) -> int:
        return sum(1 for t in self.trajectories if not t)

    @property
    def n_epochs(self) -> int:
        return sum(len(t) for t in self.trajectories)


def schedule_periodic_jamming(n_epochs: int, period: int, duty: float) -> list[int]:
    """Jammed-first square wave: epoch k is jammed iff k % period < on.

    ``on = floor(duty * period + 0.5)``, i.e. round-half-up.
    """
    if period < 1:
        raise ValueError("period must be at least 1")
    if not 0.0 <= duty <= 1.0:
        raise ValueError("duty must lie in [0, 1]")
    on = int(math.floor(duty * period + 0.5))
    return [1 if k % period < on else 0 for k in range(n_epochs)]


def uplink_geometry() -> tuple[np.ndarray, float]:
    """Target position at t = 0 and ground-to-target range in km."""
    target = orbital.geo_slot_state(TARGET_LONGITUDE, 0.0).position
    gs = orbital.GroundStation(0.0, TARGET_LONGITUDE, 0.0)
    return target, orbital.range_km(orbital.ground_station_eci(gs, 0.0), target)


def _link_powers(link: RfLinkConfig, uplink_km: float) -> tuple[float, float]:
    signal_rx = received_power(link.tx_power, link.tx_gain, link.rx_gain, uplink_km * 1e3, link.frequency)
    return signal_rx, noise_power(link.noise_temperature, link.bandwidth)


def _epoch_features(signal_rx, noise, jam_rx, distance_km, jammed, count, seed) -> SignalFeatures:
    burst = synthesize_received(signal_rx, jam_rx, noise, count, jammed, seed)
    if jammed:
        total, sjnr = signal_rx + jam_rx + noise, sjnr_db(signal_rx, jam_rx, noise)
    else:
        total, sjnr = signal_rx + noise, sjnr_db(signal_rx, 0.0, noise)
    return extract_features(burst, distance_km, float(sjnr), total)


def gen_stationary(config: StationaryConfig) -> list[StationaryRecord]:
    """One record per VOI position, each aggregating a full burst."""
    link = config.link
    target, uplink_km = uplink_geometry()
    signal_rx, noise = _link_powers(link, uplink_km)
    positions = orbital.sample_voi(
        target, config.voi_radius, config.n_positions, derive_seed(config.seed, STAGE_VOI)
    )
    order = np.random.default_rng(derive_seed(config.seed, STAGE_LABELS)).permutation(config.n_positions)
    labels = np.zeros(config.n_positions, dtype=int)
    labels[order[: config.jammed_count]] = 1

    records = []
    for i, pos in enumerate(positions):
        dist = orbital.range_km(pos, target)
        jam_rx = received_power(config.jam_power, config.attacker_gain, link.rx_gain, dist * 1e3, link.frequency)
        feats = _epoch_features(
            signal_rx,
            noise,
            jam_rx,
            dist,
            bool(labels[i]),
            config.samples_per_position,
            derive_seed(config.seed, STAGE_STATIONARY_SAMPLES, i),
        )
        records.append(StationaryRecord(i, tuple(float(c) for c in pos), feats, int(labels[i])))
    return records


def trajectory_seed(seed: int, index: int) -> int:
    return derive_seed(seed, STAGE_TRAJECTORY, index)


def gen_trajectory(config: TimeVariantConfig, index: int) -> list[EpochRecord]:
    """Records of one attacker trajectory, only at its access epochs."""
    link = config.link
    tseed = trajectory_seed(config.seed, index)
    elements = orbital.random_attacker_elements(
        derive_seed(tseed, 0), TARGET_LONGITUDE, r_voi=config.voi_radius
    )
    times = orbital.epoch_grid(0.0, config.duration, config.epoch_step)
    mask, ranges = orbital.access_mask(elements, TARGET_LONGITUDE, times, config.voi_radius)
    epochs = np.flatnonzero(mask)
    labels = schedule_periodic_jamming(len(epochs), config.jam_period, config.jam_duty)

    _, uplink_km = uplink_geometry()
    signal_rx, noise = _link_powers(link, uplink_km)
    clear_snr = float(snr_db(signal_rx, noise))
    records = []
    for k, label in zip(epochs, labels):
        dist = float(ranges[k])
        jam_rx = received_power(config.jam_power, config.attacker_gain, link.rx_gain, dist * 1e3, link.frequency)
        feats = _epoch_features(
            signal_rx, noise, jam_rx, dist, bool(label), config.samples_per_epoch, derive_seed(tseed, 1, int(k))
        )
        records.append(EpochRecord(index, float(times[k]), dist, feats, clear_snr, label))
    return records


def gen_timevariant(config: TimeVariantConfig) -> TimeVariantDataset:
    trajectories = [gen_trajectory(config, i) for i in range(config.n_trajectories)]
    seeds = [trajectory_seed(config.seed, i) for i in range(config.n_trajectories)]
    return TimeVariantDataset(trajectories, seeds)


# -- tabular views ---------------------------------------------------------


def feature_matrix(records) -> np.ndarray:
    """(n, 6) classifier inputs in ``FEATURE_NAMES`` order."""
    if not records:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.array([[getattr(r.features, name) for name in FEATURE_NAMES] for r in records])


def label_vector(records) -> np.ndarray:
    return np.array([r.is_jammed for r in records], dtype=int)


# -- CSV persistence ---------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _stationary_row(r: StationaryRecord) -> list:
    f = r.features
    x, y, z = r.attacker_position
    return [
        r.position_id, x, y, z, f.distance_to_target, f.rss, f.total_received_power,
        f.total_amplitude_mean, f.total_amplitude_std, f.total_phase_variance,
        f.sjnr_at_target, r.is_jammed,
    ]


def _epoch_row(r: EpochRecord) -> list:
    f = r.features
    return [
        r.trajectory_id, r.epoch, r.range_km, f.distance_to_target, f.rss,
        f.total_received_power, f.total_amplitude_mean, f.total_amplitude_std,
        f.total_phase_variance, f.sjnr_at_target, r.snr_db, r.is_jammed,
    ]


def write_csv(records, path, kind: str | None = None) -> None:
    """Write stationary or epoch records; ``kind`` is needed only for an empty list."""
    if kind is None:
        if not records:
            raise ValueError("kind must be given when writing an empty record list")
        kind = "stationary" if isinstance(records[0], StationaryRecord) else "timevariant"
    columns, row = (
        (STATIONARY_COLUMNS, _stationary_row) if kind == "stationary" else (TIMEVARIANT_COLUMNS, _epoch_row)
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in records:
            w.writerow([_fmt(v) for v in row(r)])


def _parse_int(value: str, name: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"line {line}: column {name!r} is not an integer: {value!r}") from None


def _parse_float(value: str, name: str, line: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"line {line}: column {name!r} is not a number: {value!r}") from None


def _parse_label(value: str, line: int) -> int:
    v = _parse_int(value, "is_jammed", line)
    if v not in (0, 1):
        raise ParseError(f"line {line}: is_jammed must be 0 or 1, got {v}")
    return v


def _features_from(row: dict, line: int) -> SignalFeatures:
    return SignalFeatures(
        **{
            name: _parse_float(row[name], name, line)
            for name in (
                "rss", "total_received_power", "total_amplitude_mean", "total_amplitude_std",
                "total_phase_variance", "distance_to_target", "sjnr_at_target",
            )
        }
    )


def read_csv(path) -> list:
    """Read a stationary or time-variant CSV, chosen by its header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        if "position_id" in header:
            columns = STATIONARY_COLUMNS
        elif "trajectory_id" in header:
            columns = TIMEVARIANT_COLUMNS
        else:
            raise SchemaError(f"{path}: header has neither position_id nor trajectory_id")
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        records = []
        for line, values in enumerate(reader, start=2):
            if not values:
                continue
            if len(values) != len(header):
                raise ParseError(f"{path}: line {line}: expected {len(header)} fields, got {len(values)}")
            row = dict(zip(header, values))
            feats = _features_from(row, line)
            if columns is STATIONARY_COLUMNS:
                pos = tuple(_parse_float(row[c], c, line) for c in ("attacker_x", "attacker_y", "attacker_z"))
                records.append(
                    StationaryRecord(
                        _parse_int(row["position_id"], "position_id", line), pos, feats,
                        _parse_label(row["is_jammed"], line),
                    )
                )
            else:
                records.append(
                    EpochRecord(
                        _parse_int(row["trajectory_id"], "trajectory_id", line),
                        _parse_float(row["epoch_s"], "epoch_s", line),
                        _parse_float(row["range_km"], "range_km", line),
                        feats,
                        _parse_float(row["snr_db"], "snr_db", line),
                        _parse_label(row["is_jammed"], line),
                    )
                )
    return records


def trajectory_filename(index: int) -> str:
    return f"trajectory_{index:04d}.csv"


def write_timevariant(dataset: TimeVariantDataset, out_dir) -> Path:
    """One CSV per trajectory plus ``manifest.csv``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, (records, seed) in enumerate(zip(dataset.trajectories, dataset.seeds)):
        name = trajectory_filename(i)
        write_csv(records, out / name, kind="timevariant")
        rows.append([i, name, seed, len(records), sum(r.is_jammed for r in records)])
    manifest = out / MANIFEST_NAME
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        w.writerows(rows)
    return manifest


def read_timevariant(data_dir) -> TimeVariantDataset:
    """Load every trajectory listed in a directory's manifest."""
    data = Path(data_dir)
    manifest = data / MANIFEST_NAME
    if not manifest.is_file():
        raise DataError(f"{data}: no {MANIFEST_NAME} found")
    with open(manifest, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MANIFEST_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{manifest}: missing column(s) {', '.join(missing)}")
        entries = list(reader)
    trajectories, seeds = [], []
    for line, entry in enumerate(entries, start=2):
        path = data / entry["file"]
        if not path.is_file() or os.path.basename(entry["file"]) != entry["file"]:
            raise DataError(f"{manifest}: line {line}: trajectory file {entry['file']!r} not found")
        trajectories.append(read_csv(path))
        seeds.append(_parse_int(entry["seed"], "seed", line))
    return TimeVariantDataset(trajectories, seeds)
