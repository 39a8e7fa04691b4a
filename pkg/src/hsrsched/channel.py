"""Deterministic link model: train position, path loss, SNR, rate and per-frame capacity.

The train follows a known trajectory at constant speed along a line of equally
spaced cells, so the BS-to-RS distance (and everything derived from it) is a
deterministic, periodic function of trip time.  Capacity is expressed in whole
packets per scheduling frame.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

SPEED_OF_LIGHT = 3.0e8  # m/s


@dataclass(frozen=True)
class TrajectoryConfig:
    """Geometry and timing of the trip.

    speed: train speed in m/s
    cell_radius: half the BS spacing along the track, in meters
    track_offset: perpendicular BS-to-track distance, in meters
    trip_duration: total trip time in seconds
    frame_length: scheduling frame length in seconds
    """

    speed: float
    cell_radius: float
    track_offset: float
    trip_duration: float
    frame_length: float

    def __post_init__(self) -> None:
        for name in ("speed", "cell_radius", "track_offset", "trip_duration", "frame_length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.num_frames < 1:
            raise ValueError("trip shorter than one frame")

    @property
    def cell_period(self) -> float:
        """Time to cross one cell (seconds)."""
        return 2.0 * self.cell_radius / self.speed

    @property
    def num_frames(self) -> int:
        return int(self.trip_duration / self.frame_length)

    @property
    def max_distance(self) -> float:
        return math.hypot(self.cell_radius, self.track_offset)


@dataclass(frozen=True)
class RadioConfig:
    """Physical-layer parameters of the BS-to-RS link.

    carrier_freq: Hz
    bs_antenna_height / rs_antenna_height: meters
    tx_power_over_noise: transmit power over noise floor, in dB
    bandwidth: Hz
    packet_size: bits per packet
    """

    carrier_freq: float
    bs_antenna_height: float
    rs_antenna_height: float
    tx_power_over_noise: float
    bandwidth: float
    packet_size: float

    def __post_init__(self) -> None:
        for name in (
            "carrier_freq",
            "bs_antenna_height",
            "rs_antenna_height",
            "tx_power_over_noise",
            "bandwidth",
            "packet_size",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def breakpoint_distance(self) -> float:
        """Break point of the two-slope path-loss curve, in meters."""
        return 4.0 * self.bs_antenna_height * self.rs_antenna_height * self.carrier_freq / SPEED_OF_LIGHT

    @property
    def freq_offset_db(self) -> float:
        """Carrier-frequency correction term of the path-loss model."""
        return 20.0 * math.log10(self.carrier_freq / 5.0e9)

    @property
    def breakpoint_loss_db(self) -> float:
        return 21.5 * math.log10(self.breakpoint_distance)


def distance_at(t: float, traj: TrajectoryConfig) -> float:
    """BS-to-RS distance (m) at trip time t, periodic with the cell period."""
    if t < 0 or t > traj.trip_duration:
        raise ValueError(f"t={t} outside trip [0, {traj.trip_duration}]")
    r = traj.cell_radius
    s1 = (traj.speed * t) % (2.0 * r)
    if s1 < r:
        return math.hypot(s1, traj.track_offset)
    return math.hypot(2.0 * r - s1, traj.track_offset)


def path_loss_db(d: float, radio: RadioConfig) -> float:
    """Two-slope path loss in dB at distance d meters."""
    if d <= 0:
        raise ValueError("distance must be strictly positive")
    if d < radio.breakpoint_distance:
        return 44.2 + 21.5 * math.log10(d) + radio.freq_offset_db
    return (
        44.2
        + 40.0 * math.log10(d / radio.breakpoint_distance)
        + radio.breakpoint_loss_db
        + radio.freq_offset_db
    )


def snr_db(t: float, traj: TrajectoryConfig, radio: RadioConfig) -> float:
    """Average received SNR in dB at trip time t (may be negative)."""
    return radio.tx_power_over_noise - path_loss_db(distance_at(t, traj), radio)


def rate_bps(t: float, traj: TrajectoryConfig, radio: RadioConfig) -> float:
    """Shannon rate in bit/s at trip time t.

    The SNR is converted from dB to linear before entering the capacity
    formula; feeding the dB value in directly would be dimensionally wrong.
    """
    gamma = 10.0 ** (snr_db(t, traj, radio) / 10.0)
    return radio.bandwidth * math.log2(1.0 + gamma)


@dataclass(frozen=True)
class CapacityProfile:
    """Per-frame packet capacities over the whole trip."""

    capacities: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.capacities):
            raise ValueError("capacities must be non-negative")

    def __len__(self) -> int:
        return len(self.capacities)

    def __getitem__(self, k: int) -> int:
        return self.capacities[k]

    @property
    def mean(self) -> float:
        return sum(self.capacities) / len(self.capacities)

    @classmethod
    def constant(cls, value: int, num_frames: int) -> "CapacityProfile":
        return cls(capacities=(int(value),) * num_frames)


def frame_capacity(k: int, traj: TrajectoryConfig, radio: RadioConfig) -> int:
    """Packets transmittable in frame k, sampled at the frame start instant."""
    t = k * traj.frame_length
    return math.floor(rate_bps(t, traj, radio) * traj.frame_length / radio.packet_size)


@lru_cache(maxsize=16)
def build_capacity_profile(traj: TrajectoryConfig, radio: RadioConfig) -> CapacityProfile:
    """Capacity of every frame of the trip (length = traj.num_frames)."""
    caps = tuple(frame_capacity(k, traj, radio) for k in range(traj.num_frames))
    return CapacityProfile(capacities=caps)


PROFILE_CSV_COLUMNS = (
    "frame",
    "time_s",
    "distance_m",
    "pathloss_db",
    "snr_db",
    "rate_bps",
    "capacity_pkts",
)


def write_profile_csv(path, traj: TrajectoryConfig, radio: RadioConfig) -> None:
    """Dump the per-frame link profile as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROFILE_CSV_COLUMNS)
        for k in range(traj.num_frames):
            t = k * traj.frame_length
            d = distance_at(t, traj)
            pl = path_loss_db(d, radio)
            snr = radio.tx_power_over_noise - pl
            rate = radio.bandwidth * math.log2(1.0 + 10.0 ** (snr / 10.0))
            cap = math.floor(rate * traj.frame_length / radio.packet_size)
            writer.writerow(
                [
                    k,
                    f"{t:.9g}",
                    f"{d:.9g}",
                    f"{pl:.9g}",
                    f"{snr:.9g}",
                    f"{rate:.9g}",
                    cap,
                ]
            )
