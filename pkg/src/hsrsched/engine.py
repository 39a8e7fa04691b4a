"""Frame loop wiring the link profile, traffic, queues and a scheduler.

Each frame executes, in order: read capacity, admit sampled arrivals, let the
scheduler plan (lookahead policy only), take the scheduler's decision, serve
and age the queues, update the deficit counters, append the trace row.  Runs
are deterministic given the configuration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .channel import CapacityProfile, RadioConfig, TrajectoryConfig, build_capacity_profile
from .queueing import DeadlineQueue, DeficitQueue
from .schedulers import SCHEDULER_POLICIES, make_scheduler
from .traffic import ArrivalGenerator, FeasibilityReport, ServiceSpec, feasibility_check, validate_service_ids

TRACE_SCHEMA = 1


@dataclass(frozen=True)
class SimConfig:
    trajectory: TrajectoryConfig
    radio: RadioConfig
    services: tuple[ServiceSpec, ...]
    scheduler: str = "dcsa"
    seed: int = 0
    num_frames: int | None = None
    capacity_override: int | None = None

    def __post_init__(self) -> None:
        validate_service_ids(self.services)
        if self.scheduler not in SCHEDULER_POLICIES:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.num_frames is not None:
            if self.num_frames < 0:
                raise ValueError("num_frames must be non-negative")
            if self.num_frames > self.trajectory.num_frames:
                raise ValueError(
                    f"num_frames {self.num_frames} exceeds trip length "
                    f"{self.trajectory.num_frames}"
                )
        if self.capacity_override is not None and self.capacity_override < 0:
            raise ValueError("capacity_override must be non-negative")

    @property
    def frames(self) -> int:
        return self.trajectory.num_frames if self.num_frames is None else self.num_frames

    def profile(self) -> CapacityProfile:
        """Capacity over the full trip (the scheduler may look past the run
        horizon, never past the trip end)."""
        if self.capacity_override is not None:
            return CapacityProfile.constant(self.capacity_override, self.trajectory.num_frames)
        return build_capacity_profile(self.trajectory, self.radio)


@dataclass(frozen=True)
class ServiceSummary:
    service_id: int
    arrivals: int
    served: int
    drops: int
    final_backlog: int
    final_deficit: float
    delivery_ratio: float | None


@dataclass(frozen=True)
class RunSummary:
    scheduler: str
    seed: int
    num_frames: int
    services: tuple[ServiceSummary, ...]
    feasibility: FeasibilityReport

    def service(self, service_id: int) -> ServiceSummary:
        for s in self.services:
            if s.service_id == service_id:
                return s
        raise KeyError(service_id)

    def to_text(self) -> str:
        lines = [
            f"scheduler = {self.scheduler}",
            f"seed = {self.seed}",
            f"num_frames = {self.num_frames}",
            f"feasible = {self.feasibility.feasible}",
            f"feasibility_margin = {self.feasibility.margin:.9g}",
            f"mean_capacity = {self.feasibility.mean_capacity:.9g}",
            f"required_rate = {self.feasibility.required_rate:.9g}",
        ]
        for s in self.services:
            ratio = "n/a" if s.delivery_ratio is None else f"{s.delivery_ratio:.9g}"
            lines.append(
                f"service {s.service_id}: arrivals = {s.arrivals}, served = {s.served}, "
                f"drops = {s.drops}, final_backlog = {s.final_backlog}, "
                f"final_deficit = {s.final_deficit:.9g}, delivery_ratio = {ratio}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class TraceLog:
    """Per-frame record of one run plus enough metadata to audit it."""

    scheduler: str
    seed: int
    service_ids: tuple[int, ...]
    deadlines: tuple[int, ...]
    loss_allowances: tuple[float, ...]
    capacity: np.ndarray
    arrivals: np.ndarray
    served: np.ndarray
    drops: np.ndarray
    deficit: np.ndarray
    backlog: np.ndarray
    feasibility: FeasibilityReport
    # exact deficit counter state (drops_accum, drain_steps) per frame/service
    deficit_state: np.ndarray | None = None
    # per-frame per-service per-bucket served counts, when detail was requested
    bucket_served: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_frames(self) -> int:
        return len(self.capacity)

    def summary(self) -> RunSummary:
        services = []
        for j, sid in enumerate(self.service_ids):
            total_arr = int(self.arrivals[:, j].sum())
            total_drops = int(self.drops[:, j].sum())
            ratio = None if total_arr == 0 else (total_arr - total_drops) / total_arr
            services.append(
                ServiceSummary(
                    service_id=sid,
                    arrivals=total_arr,
                    served=int(self.served[:, j].sum()),
                    drops=total_drops,
                    final_backlog=int(self.backlog[-1, j]) if self.num_frames else 0,
                    final_deficit=float(self.deficit[-1, j]) if self.num_frames else 0.0,
                    delivery_ratio=ratio,
                )
            )
        return RunSummary(
            scheduler=self.scheduler,
            seed=self.seed,
            num_frames=self.num_frames,
            services=tuple(services),
            feasibility=self.feasibility,
        )

    def csv_header(self) -> list[str]:
        cols = ["frame", "capacity"]
        for sid in self.service_ids:
            cols += [
                f"arrivals_s{sid}",
                f"served_s{sid}",
                f"drops_s{sid}",
                f"deficit_s{sid}",
                f"backlog_s{sid}",
            ]
        return cols

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema={TRACE_SCHEMA}\n")
            fh.write(",".join(self.csv_header()) + "\n")
            n_svc = len(self.service_ids)
            for k in range(self.num_frames):
                parts = [str(k), str(int(self.capacity[k]))]
                for j in range(n_svc):
                    parts += [
                        str(int(self.arrivals[k, j])),
                        str(int(self.served[k, j])),
                        str(int(self.drops[k, j])),
                        f"{self.deficit[k, j]:.9g}",
                        str(int(self.backlog[k, j])),
                    ]
                fh.write(",".join(parts) + "\n")


def run(config: SimConfig, collect_bucket_detail: bool = False) -> TraceLog:
    """Execute one seeded run and return its trace."""
    specs = tuple(sorted(config.services, key=lambda s: s.service_id))
    profile = config.profile()
    trip_frames = len(profile)
    n = config.frames
    n_svc = len(specs)
    max_m = max(s.deadline for s in specs)

    gen = ArrivalGenerator(specs, config.seed)
    arrivals = gen.sample_run(n)

    queues = {s.service_id: DeadlineQueue(s.service_id, s.deadline) for s in specs}
    deficits = {s.service_id: DeficitQueue(s.service_id, s.loss_allowance) for s in specs}

    def lookahead(frame: int) -> int:
        return profile[frame] if 0 <= frame < trip_frames else 0

    scheduler = make_scheduler(config.scheduler, specs, lookahead)

    capacity = np.empty(n, dtype=np.int64)
    served_arr = np.zeros((n, n_svc), dtype=np.int64)
    drops_arr = np.zeros((n, n_svc), dtype=np.int64)
    deficit_arr = np.zeros((n, n_svc), dtype=float)
    backlog_arr = np.zeros((n, n_svc), dtype=np.int64)
    deficit_state = np.zeros((n, n_svc, 2), dtype=np.int64)
    bucket_served = np.zeros((n, n_svc, max_m), dtype=np.int64) if collect_bucket_detail else None

    for k in range(n):
        cap = profile[k]
        capacity[k] = cap

        frame_arrivals = {}
        for j, spec in enumerate(specs):
            a = int(arrivals[k, j])
            frame_arrivals[spec.service_id] = a
            queues[spec.service_id].admit(a)

        scheduler.plan_arrivals(
            k, frame_arrivals, {sid: dq.value for sid, dq in deficits.items()}
        )
        decision = scheduler.decide(k, cap, queues)
        decision.validate(queues, cap)

        for j, spec in enumerate(specs):
            sid = spec.service_id
            served = decision.counts[sid]
            dropped = queues[sid].serve_and_age(served)
            deficits[sid].update(dropped)
            served_arr[k, j] = sum(served)
            drops_arr[k, j] = dropped
            deficit_arr[k, j] = deficits[sid].value
            deficit_state[k, j] = deficits[sid].state()
            backlog_arr[k, j] = queues[sid].backlog()
            if bucket_served is not None:
                bucket_served[k, j, : spec.deadline] = served

    return TraceLog(
        scheduler=config.scheduler,
        seed=config.seed,
        service_ids=tuple(s.service_id for s in specs),
        deadlines=tuple(s.deadline for s in specs),
        loss_allowances=tuple(s.loss_allowance for s in specs),
        capacity=capacity,
        arrivals=arrivals,
        served=served_arr,
        drops=drops_arr,
        deficit=deficit_arr,
        backlog=backlog_arr,
        feasibility=feasibility_check(specs, profile),
        deficit_state=deficit_state,
        bucket_served=bucket_served,
    )


def delivery_ratio(trace: TraceLog, service_id: int) -> float | None:
    """Delivered fraction for one service; None when it saw no arrivals."""
    j = trace.service_ids.index(service_id)
    total = int(trace.arrivals[:, j].sum())
    if total == 0:
        return None
    return (total - int(trace.drops[:, j].sum())) / total


@dataclass(frozen=True)
class SweepPoint:
    deadline: int
    arrival_rate: float
    seed: int
    summary: RunSummary | None
    error: str | None = None


def sweep(config: SimConfig, deadlines, rates) -> list[SweepPoint]:
    """One independent run per (deadline, rate) grid point.

    Every service in the base config takes the point's deadline and rate.
    Seeds are derived as ``config.seed ^ point_index`` so each point is
    reproducible standalone.  A failing point is recorded and the sweep
    continues.
    """
    points = list(itertools.product(deadlines, rates))
    out = []
    for index, (m, rate) in enumerate(points):
        seed = config.seed ^ index
        try:
            services = tuple(
                ServiceSpec(
                    service_id=s.service_id,
                    arrival_rate=float(rate),
                    deadline=int(m),
                    delivery_ratio=s.delivery_ratio,
                    tail_eps=s.tail_eps,
                )
                for s in config.services
            )
            point_config = SimConfig(
                trajectory=config.trajectory,
                radio=config.radio,
                services=services,
                scheduler=config.scheduler,
                seed=seed,
                num_frames=config.num_frames,
                capacity_override=config.capacity_override,
            )
            out.append(
                SweepPoint(
                    deadline=int(m),
                    arrival_rate=float(rate),
                    seed=seed,
                    summary=run(point_config).summary(),
                )
            )
        except Exception as exc:  # record and keep sweeping
            out.append(
                SweepPoint(
                    deadline=int(m),
                    arrival_rate=float(rate),
                    seed=seed,
                    summary=None,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return out
