"""Deadline-bucket queues, drop accounting and deficit counters.

Packets of one service sit in buckets indexed by frames-to-go r = 1..m.  A
frame proceeds admit -> schedule -> serve_and_age -> deficit update; unserved
r=1 packets expire when the queue ages.  Buckets hold plain counts: packets of
a cohort are interchangeable, so identity is never tracked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence


class ContractViolation(RuntimeError):
    """An operation was fed state that breaks its contract."""


class DeadlineQueue:
    """Per-service queue with one bucket per remaining-lifetime value."""

    def __init__(self, service_id: int, deadline: int):
        if deadline < 1:
            raise ValueError("deadline must be at least 1")
        self.service_id = service_id
        self.deadline = deadline
        # buckets[i] holds packets with r = i + 1 frames to go
        self.buckets = [0] * deadline

    def admit(self, arrivals: int) -> None:
        """Place one frame's arrivals in the top bucket (r = deadline)."""
        if arrivals < 0:
            raise ValueError("arrivals must be non-negative")
        if self.buckets[-1] != 0:
            raise ContractViolation(
                f"service {self.service_id}: top bucket not cleared before admit"
            )
        self.buckets[-1] = arrivals

    def serve_and_age(self, served: Sequence[int]) -> int:
        """Remove served packets, expire the rest of bucket r=1, shift down.

        ``served[i]`` is the count taken from bucket r = i + 1.  Returns the
        number of dropped (expired) packets.  Total is conserved:
        old total == served + dropped + new total.
        """
        if len(served) != self.deadline:
            raise ContractViolation("served vector length != deadline")
        for i, x in enumerate(served):
            if x < 0 or x > self.buckets[i]:
                raise ContractViolation(
                    f"service {self.service_id}: served {x} from bucket r={i + 1} "
                    f"holding {self.buckets[i]}"
                )
        dropped = self.buckets[0] - served[0]
        for i in range(self.deadline - 1):
            self.buckets[i] = self.buckets[i + 1] - served[i + 1]
        self.buckets[-1] = 0
        return dropped

    def backlog(self) -> int:
        return sum(self.buckets)

    def snapshot(self) -> tuple[int, ...]:
        return tuple(self.buckets)


def deficit_update(y: float, loss_allowance: float, dropped: int) -> float:
    """One step of the deficit counter: drain the allowance, add new drops."""
    if y < 0 or loss_allowance < 0 or dropped < 0:
        raise ValueError("deficit inputs must be non-negative")
    return max(y - loss_allowance, 0.0) + dropped


@dataclass
class DeficitQueue:
    """Excess-drop counter for one service, starting at zero.

    Kept exactly: the value is ``drops_accum - drain_steps * loss_allowance``
    with integer counters, reset on clamping, so verification of the counter
    algebra is free of float round-off even after millions of frames.
    """

    service_id: int
    loss_allowance: float
    drops_accum: int = 0
    drain_steps: int = 0
    _allowance: Fraction = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.loss_allowance < 0:
            raise ValueError("loss_allowance must be non-negative")
        self._allowance = Fraction(self.loss_allowance)

    def update(self, dropped: int) -> None:
        if dropped < 0:
            raise ValueError("dropped must be non-negative")
        p = self._allowance
        # clamp exactly when current value < allowance
        if self.drops_accum * p.denominator >= (self.drain_steps + 1) * p.numerator:
            self.drain_steps += 1
            self.drops_accum += dropped
        else:
            self.drops_accum = dropped
            self.drain_steps = 0

    @property
    def exact_value(self) -> Fraction:
        return Fraction(self.drops_accum) - self.drain_steps * self._allowance

    @property
    def value(self) -> float:
        return self.drops_accum - self.drain_steps * self.loss_allowance

    def state(self) -> tuple[int, int]:
        return (self.drops_accum, self.drain_steps)


def cohort_drops(arrivals: int, scheduled_over_lifetime: Sequence[int]) -> int:
    """Drops attributable to one arrival batch given its lifetime allocations."""
    total = sum(scheduled_over_lifetime)
    if any(x < 0 for x in scheduled_over_lifetime):
        raise ContractViolation("negative scheduled count")
    if total > arrivals:
        raise ContractViolation(f"scheduled {total} exceeds cohort size {arrivals}")
    return arrivals - total


@dataclass
class FrameServed:
    """Per-service, per-bucket transmission counts for one frame.

    ``counts[sid][i]`` packets are taken from bucket r = i + 1 of service sid.
    """

    counts: dict[int, list[int]]

    def total(self) -> int:
        return sum(sum(v) for v in self.counts.values())

    def service_total(self, service_id: int) -> int:
        return sum(self.counts[service_id])

    def validate(self, queues: dict[int, DeadlineQueue], capacity: int) -> None:
        """Capacity and no-overserving constraints; raises on violation."""
        if self.total() > capacity:
            raise ContractViolation(
                f"served total {self.total()} exceeds frame capacity {capacity}"
            )
        for sid, served in self.counts.items():
            q = queues[sid]
            for i, x in enumerate(served):
                if x < 0 or x > q.buckets[i]:
                    raise ContractViolation(
                        f"service {sid}: served {x} from bucket r={i + 1} "
                        f"holding {q.buckets[i]}"
                    )
