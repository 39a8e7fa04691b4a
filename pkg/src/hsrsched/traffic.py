"""Traffic model: per-service truncated-Poisson arrivals and the service mix check.

Arrivals are i.i.d. across frames.  Each service draws from a Poisson
distribution truncated at the smallest burst bound whose tail mass falls below
``tail_eps`` and renormalized, so per-frame arrivals are bounded by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .channel import CapacityProfile

DEFAULT_TAIL_EPS = 1e-6


def truncated_poisson_pmf(rate: float, tail_eps: float = DEFAULT_TAIL_EPS) -> tuple[int, np.ndarray]:
    """Truncated, renormalized Poisson pmf.

    Returns ``(a, pmf)`` where ``a`` is the smallest integer whose Poisson
    upper-tail mass beyond it is below ``tail_eps`` and ``pmf`` has support
    {0..a} and sums to 1.
    """
    if rate <= 0:
        raise ValueError("rate must be strictly positive")
    if not 0 < tail_eps < 1:
        raise ValueError("tail_eps must be in (0, 1)")
    log_rate = math.log(rate)

    def term(i: int) -> float:
        # evaluated in log space so large rates cannot underflow near the mode
        return math.exp(i * log_rate - rate - math.lgamma(i + 1))

    terms = [term(0)]
    cdf = terms[0]
    i = 0
    # tail mass beyond i is 1 - cdf; stop at the first i where it drops below eps
    while 1.0 - cdf >= tail_eps:
        i += 1
        t = term(i)
        terms.append(t)
        cdf += t
        if t == 0.0 and i > rate:
            raise ValueError("tail_eps below float resolution for this rate")
    pmf = np.array(terms, dtype=float)
    pmf /= pmf.sum()
    return i, pmf


@dataclass(frozen=True)
class ServiceSpec:
    """Traffic and QoS parameters of one service.

    service_id: small positive integer, unique per run
    arrival_rate: mean packets per frame (Poisson rate)
    deadline: packet lifetime in frames; unserved packets drop after it
    delivery_ratio: required long-run delivered fraction, in (0, 1)
    tail_eps: tail mass threshold for the arrival burst bound
    """

    service_id: int
    arrival_rate: float
    deadline: int
    delivery_ratio: float
    tail_eps: float = DEFAULT_TAIL_EPS

    def __post_init__(self) -> None:
        if self.service_id < 0:
            raise ValueError("service_id must be non-negative")
        if self.arrival_rate <= 0:
            raise ValueError("arrival_rate must be strictly positive")
        if self.deadline < 1:
            raise ValueError("deadline must be at least one frame")
        if not 0.0 < self.delivery_ratio < 1.0:
            raise ValueError("delivery_ratio must be in (0, 1)")
        if not 0 < self.tail_eps < 1:
            raise ValueError("tail_eps must be in (0, 1)")
        if self.max_arrivals < math.ceil(self.arrival_rate):
            raise ValueError("burst bound below mean arrival rate; decrease tail_eps")

    @property
    def loss_bound(self) -> float:
        """Upper bound on the long-run loss fraction."""
        return 1.0 - self.delivery_ratio

    @property
    def loss_allowance(self) -> float:
        """Allowed drops per frame: loss_bound times arrival_rate."""
        return self.loss_bound * self.arrival_rate

    @cached_property
    def pmf(self) -> np.ndarray:
        return truncated_poisson_pmf(self.arrival_rate, self.tail_eps)[1]

    @cached_property
    def max_arrivals(self) -> int:
        """Largest possible per-frame arrival count."""
        return len(self.pmf) - 1


def validate_service_ids(specs) -> None:
    """Service ids must be unique and contiguous starting at 1."""
    ids = sorted(s.service_id for s in specs)
    if not specs:
        raise ValueError("at least one service required")
    if ids != list(range(1, len(ids) + 1)):
        raise ValueError(f"service ids must be 1..{len(ids)} (got {ids})")


class ArrivalGenerator:
    """Seeded arrival stream for a fixed list of services.

    Uses numpy's PCG64 generator (stable, versioned stream for a given seed).
    Draw order is frame-major, service-minor: one uniform per service per
    frame, services in ascending id order, so equal seeds and equal spec
    lists reproduce the exact same stream.
    """

    def __init__(self, specs, seed: int):
        self.specs = tuple(sorted(specs, key=lambda s: s.service_id))
        self.seed = seed
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._cdfs = [np.cumsum(s.pmf) for s in self.specs]

    def sample_arrivals(self) -> tuple[int, ...]:
        """One frame's arrival vector, in service-id order."""
        u = self._rng.random(len(self.specs))
        return tuple(
            int(np.searchsorted(cdf, u[j], side="right"))
            for j, cdf in enumerate(self._cdfs)
        )

    def sample_run(self, num_frames: int) -> np.ndarray:
        """All arrivals of a run at once; identical stream to repeated
        ``sample_arrivals`` calls on a fresh generator with the same seed."""
        u = self._rng.random((num_frames, len(self.specs)))
        out = np.empty((num_frames, len(self.specs)), dtype=np.int64)
        for j, cdf in enumerate(self._cdfs):
            out[:, j] = np.searchsorted(cdf, u[:, j], side="right")
        return out


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    margin: float
    mean_capacity: float
    required_rate: float


def feasibility_check(specs, profile: CapacityProfile) -> FeasibilityReport:
    """Check the service mix against mean link capacity.

    The mix is feasible when the summed rate-weighted delivery requirements do
    not exceed the mean per-frame capacity; the (signed) slack is returned
    either way.
    """
    if len(profile) < 1:
        raise ValueError("capacity profile is empty")
    required = sum(s.arrival_rate * s.delivery_ratio for s in specs)
    mean_cap = profile.mean
    margin = mean_cap - required
    return FeasibilityReport(
        feasible=required <= mean_cap,
        margin=margin,
        mean_capacity=mean_cap,
        required_rate=required,
    )
