"""Scheduling policies: deficit-driven lookahead (dcsa), round robin and EDF.

All policies implement the same contract: given the frame index, the frame
capacity and the queue states they return per-service per-bucket transmission
counts that never exceed the capacity or any bucket content.

The lookahead policy plans each arrival batch over its whole lifetime at the
arrival frame, in descending order of each service's deficit counter projected
to the batch's expiry frame.  Capacity left over at execution time is never
reassigned; the planning step is the complete allocation rule.
"""

from __future__ import annotations

from typing import Callable, Sequence

from .queueing import ContractViolation, DeadlineQueue, FrameServed
from .traffic import ServiceSpec


class AllocationPlan:
    """Committed future transmissions, per absolute frame / service / bucket."""

    def __init__(self) -> None:
        self._commits: dict[int, dict[int, dict[int, int]]] = {}
        self._totals: dict[int, int] = {}

    def commit(self, frame: int, service_id: int, r: int, count: int) -> None:
        if count <= 0:
            return
        row = self._commits.setdefault(frame, {}).setdefault(service_id, {})
        row[r] = row.get(r, 0) + count
        self._totals[frame] = self._totals.get(frame, 0) + count

    def total_at(self, frame: int) -> int:
        return self._totals.get(frame, 0)

    def row(self, frame: int) -> dict[int, dict[int, int]]:
        return self._commits.get(frame, {})

    def committed_load(self, frame: int, planning_frame: int, specs: Sequence[ServiceSpec]) -> int:
        """Capacity at ``frame`` already held by batches that arrived before
        ``planning_frame``: commitments sitting in buckets below the one a
        planning-frame arrival would occupy."""
        i = frame - planning_frame
        load = 0
        row = self.row(frame)
        for spec in specs:
            per_bucket = row.get(spec.service_id, {})
            load += sum(n for r, n in per_bucket.items() if r <= spec.deadline - i - 1)
        return load

    def pop_frame(self, frame: int) -> dict[int, dict[int, int]]:
        self._totals.pop(frame, None)
        return self._commits.pop(frame, {})


def projected_deficit(y: float, loss_allowance: float, future_drops: Sequence[int]) -> float:
    """Deficit value after iterating the counter over already-determined drops.

    ``future_drops[j]`` is the drop count that will materialize at the end of
    the j-th upcoming frame; under the lookahead policy these are fixed at
    planning time because every earlier batch is already fully allocated.
    """
    for d in future_drops:
        y = max(y - loss_allowance, 0.0) + d
    return y


def allocate_cohorts(
    order: Sequence[int],
    arrivals: dict[int, int],
    deadlines: dict[int, int],
    available: Sequence[int],
) -> dict[int, list[int]]:
    """Lifetime allocation of one frame's arrival batches.

    Services are processed in the given priority order; each takes, offset by
    offset from the arrival frame, the minimum of its unserved remainder and
    the capacity still free at that offset.  ``available`` holds the per-offset
    free capacity (frame capacity minus earlier batches' commitments) and is
    not mutated.  Returns per-service transmission counts per offset.
    """
    free = list(available)
    out: dict[int, list[int]] = {}
    for sid in order:
        m = deadlines[sid]
        remaining = arrivals[sid]
        alloc = [0] * m
        for i in range(m):
            if remaining == 0:
                break
            x = min(remaining, free[i])
            if x > 0:
                alloc[i] = x
                free[i] -= x
                remaining -= x
        out[sid] = alloc
    return out


class Scheduler:
    """Behavioral contract shared by all policies."""

    name: str = "base"

    def __init__(self, specs: Sequence[ServiceSpec]):
        self.specs = tuple(sorted(specs, key=lambda s: s.service_id))

    def plan_arrivals(self, frame: int, arrivals: dict[int, int], deficits: dict[int, float]) -> None:
        """Hook invoked right after admission; only the lookahead policy uses it."""

    def decide(self, frame: int, capacity: int, queues: dict[int, DeadlineQueue]) -> FrameServed:
        raise NotImplementedError


class DcsaScheduler(Scheduler):
    """Lookahead policy planning each batch over its lifetime at arrival."""

    name = "dcsa"

    def __init__(self, specs: Sequence[ServiceSpec], capacity_lookahead: Callable[[int], int]):
        super().__init__(specs)
        self.lookahead = capacity_lookahead
        self.plan = AllocationPlan()
        # per service: absolute frame -> drop count fixed by past planning
        self._future_drops: dict[int, dict[int, int]] = {s.service_id: {} for s in self.specs}

    def projected(self, spec: ServiceSpec, frame: int, deficit: float) -> float:
        drops = self._future_drops[spec.service_id]
        steps = [drops.get(frame + j, 0) for j in range(spec.deadline - 1)]
        return projected_deficit(deficit, spec.loss_allowance, steps)

    def priority_order(self, frame: int, deficits: dict[int, float]) -> list[int]:
        """Service ids by descending projected deficit; ties by ascending id."""
        keyed = [
            (-self.projected(s, frame, deficits[s.service_id]), s.service_id)
            for s in self.specs
        ]
        return [sid for _, sid in sorted(keyed)]

    def plan_arrivals(self, frame: int, arrivals: dict[int, int], deficits: dict[int, float]) -> None:
        order = self.priority_order(frame, deficits)
        deadlines = {s.service_id: s.deadline for s in self.specs}
        horizon = max(s.deadline for s in self.specs)
        available = [
            max(self.lookahead(frame + i) - self.plan.total_at(frame + i), 0)
            for i in range(horizon)
        ]
        alloc = allocate_cohorts(order, arrivals, deadlines, available)
        for spec in self.specs:
            sid = spec.service_id
            committed = 0
            for i, x in enumerate(alloc[sid]):
                self.plan.commit(frame + i, sid, spec.deadline - i, x)
                committed += x
            leftover = arrivals[sid] - committed
            if leftover > 0:
                expiry = frame + spec.deadline - 1
                drops = self._future_drops[sid]
                drops[expiry] = drops.get(expiry, 0) + leftover

    def decide(self, frame: int, capacity: int, queues: dict[int, DeadlineQueue]) -> FrameServed:
        row = self.plan.pop_frame(frame)
        counts = {}
        for spec in self.specs:
            served = [0] * spec.deadline
            for r, n in row.get(spec.service_id, {}).items():
                served[r - 1] = n
            counts[spec.service_id] = served
            self._future_drops[spec.service_id].pop(frame, None)
        return FrameServed(counts=counts)


class RoundRobinScheduler(Scheduler):
    """Serves one service per frame in fixed rotation, oldest packets first."""

    name = "rr"

    def decide(self, frame: int, capacity: int, queues: dict[int, DeadlineQueue]) -> FrameServed:
        counts = {s.service_id: [0] * s.deadline for s in self.specs}
        chosen = self.specs[frame % len(self.specs)]
        left = capacity
        served = counts[chosen.service_id]
        q = queues[chosen.service_id]
        for i in range(chosen.deadline):
            if left == 0:
                break
            x = min(left, q.buckets[i])
            served[i] = x
            left -= x
        return FrameServed(counts=counts)


class EdfScheduler(Scheduler):
    """Serves the most urgent packets system-wide, ignoring QoS targets.

    Ties at equal urgency go to the higher service id; the rule is arbitrary
    but fixed so runs stay reproducible.
    """

    name = "edf"

    def __init__(self, specs: Sequence[ServiceSpec]):
        super().__init__(specs)
        self._by_desc_id = tuple(sorted(self.specs, key=lambda s: -s.service_id))

    def decide(self, frame: int, capacity: int, queues: dict[int, DeadlineQueue]) -> FrameServed:
        counts = {s.service_id: [0] * s.deadline for s in self.specs}
        left = capacity
        max_m = max(s.deadline for s in self.specs)
        for i in range(max_m):
            if left == 0:
                break
            for spec in self._by_desc_id:
                if i >= spec.deadline:
                    continue
                x = min(left, queues[spec.service_id].buckets[i])
                if x > 0:
                    counts[spec.service_id][i] = x
                    left -= x
                if left == 0:
                    break
        return FrameServed(counts=counts)


SCHEDULER_POLICIES = ("dcsa", "rr", "edf")


def make_scheduler(
    policy: str,
    specs: Sequence[ServiceSpec],
    capacity_lookahead: Callable[[int], int],
) -> Scheduler:
    if policy == "dcsa":
        return DcsaScheduler(specs, capacity_lookahead)
    if policy == "rr":
        return RoundRobinScheduler(specs)
    if policy == "edf":
        return EdfScheduler(specs)
    raise ValueError(f"unknown scheduler policy {policy!r}; expected one of {SCHEDULER_POLICIES}")
