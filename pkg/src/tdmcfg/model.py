"""Domain types and exact latency-rate analysis of TDM schedules.

Rates are fractions of the frame, latencies are measured in slots.  All
analysis is done with exact rational arithmetic so that feasibility
verdicts never depend on floating-point tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence


class UnknownClientError(KeyError):
    """Raised when a client id does not belong to the instance/schedule."""


class LatencyUndefinedError(ValueError):
    """Raised when asking for the service latency of a client with no slots."""


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # floats only appear in tests/convenience paths; take the exact value
        return Fraction(value).limit_denominator(10**9)
    return Fraction(value)


@dataclass(frozen=True)
class ClientRequirement:
    """Latency and rate requirement of a single real-time client.

    ``required_rate`` is the fraction of frame slots the client must get;
    ``required_latency`` is the maximum tolerated service latency in slots,
    or None when the client has no latency requirement.
    """

    id: int
    name: str
    required_rate: Fraction
    required_latency: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "required_rate", _as_fraction(self.required_rate))
        if self.required_latency is not None:
            object.__setattr__(
                self, "required_latency", _as_fraction(self.required_latency)
            )
        if not 0 <= self.required_rate <= 1:
            raise ValueError(f"rate of client {self.name} outside [0, 1]")
        if self.required_latency is not None and self.required_latency < 0:
            raise ValueError(f"latency of client {self.name} negative")

    def effective_latency(self, frame_size: int) -> Fraction:
        """Latency bound used in all computations.

        An absent requirement maps to f - 1, the weakest bound any
        rate-feasible client with at least one slot always meets.
        """
        if self.required_latency is None:
            return Fraction(frame_size - 1)
        return self.required_latency


@dataclass(frozen=True)
class ProblemInstance:
    """A frame size together with per-client requirements."""

    frame_size: int
    clients: tuple[ClientRequirement, ...]

    def __post_init__(self):
        object.__setattr__(self, "clients", tuple(self.clients))
        if self.frame_size < 1:
            raise ValueError("frame_size must be >= 1")
        if not self.clients:
            raise ValueError("at least one client required")
        ids = [c.id for c in self.clients]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate client ids")

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    def client(self, client_id: int) -> ClientRequirement:
        for c in self.clients:
            if c.id == client_id:
                return c
        raise UnknownClientError(client_id)

    def total_required_rate(self) -> Fraction:
        return sum((c.required_rate for c in self.clients), Fraction(0))


class DominanceClass(Enum):
    BANDWIDTH_DOMINATED = "bandwidth"
    LATENCY_DOMINATED = "latency"
    MIXED_DOMINATED = "mixed"


def rate_slot_bound(req: ClientRequirement, frame_size: int) -> int:
    """Slots needed for the rate requirement alone: ceil(rate * f)."""
    return math.ceil(req.required_rate * frame_size)


def latency_slot_bound(req: ClientRequirement, frame_size: int) -> int:
    """Slots needed for the latency requirement alone: ceil(f / (latency + 1)).

    Assumes an equidistant allocation, which minimizes the slot count
    needed to reach a given latency.
    """
    theta = req.effective_latency(frame_size)
    return math.ceil(Fraction(frame_size) / (theta + 1))


def slot_lower_bound(req: ClientRequirement, frame_size: int) -> int:
    """Lower bound on the number of slots any feasible schedule allocates."""
    if req.required_rate == 0 and req.required_latency is None:
        return 0
    bound = max(rate_slot_bound(req, frame_size), latency_slot_bound(req, frame_size))
    if req.required_rate == 0:
        # a zero-rate client needs no service at all
        return 0
    return bound


def dominance_class(req: ClientRequirement, frame_size: int) -> DominanceClass:
    """Classify which term of the slot lower bound is binding."""
    lat = latency_slot_bound(req, frame_size)
    bw = rate_slot_bound(req, frame_size)
    if lat > bw:
        return DominanceClass.LATENCY_DOMINATED
    if lat == bw:
        return DominanceClass.MIXED_DOMINATED
    return DominanceClass.BANDWIDTH_DOMINATED


@dataclass(frozen=True)
class Schedule:
    """A length-f assignment of slots to client ids (None = empty slot)."""

    slots: tuple[Optional[int], ...]

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))

    @property
    def frame_size(self) -> int:
        return len(self.slots)

    def alloc_count(self, client_id: int) -> int:
        return sum(1 for s in self.slots if s == client_id)

    def mask(self, client_id: int) -> tuple[int, ...]:
        """0/1 vector of the slots held by the client."""
        return tuple(1 if s == client_id else 0 for s in self.slots)

    def client_ids(self) -> set[int]:
        return {s for s in self.slots if s is not None}

    @staticmethod
    def from_masks(frame_size: int, masks: dict[int, Sequence[int]]) -> "Schedule":
        """Combine per-client 0/1 masks; raises on overlapping slots."""
        slots: list[Optional[int]] = [None] * frame_size
        for client_id, mask in masks.items():
            for j, bit in enumerate(mask):
                if bit:
                    if slots[j] is not None:
                        raise ValueError(f"slot {j + 1} allocated twice")
                    slots[j] = client_id
        return Schedule(tuple(slots))


@dataclass(frozen=True)
class Column:
    """A complete single-client slot allocation, the column-generation unit."""

    client: int
    mask: tuple[int, ...]
    slot_count: int = field(default=-1)

    def __post_init__(self):
        object.__setattr__(self, "mask", tuple(int(b) for b in self.mask))
        count = sum(self.mask)
        if self.slot_count == -1:
            object.__setattr__(self, "slot_count", count)
        elif self.slot_count != count:
            raise ValueError("slot_count does not match mask popcount")

    def slots(self) -> tuple[int, ...]:
        """1-based slot indices held by the column."""
        return tuple(j + 1 for j, b in enumerate(self.mask) if b)


class ServiceCurve:
    """Worst-case provided service of one client under a fixed schedule.

    ``value(k, j)`` is the number of slots the client holds among the j
    consecutive slots starting at slot k (1-based), wrapping cyclically.
    """

    def __init__(self, mask: Sequence[int]):
        self._mask = tuple(int(b) for b in mask)
        f = len(self._mask)
        # prefix[j] = allocated slots among the first j slots
        prefix = [0] * (f + 1)
        for j, b in enumerate(self._mask):
            prefix[j + 1] = prefix[j] + b
        self._prefix = prefix
        self._f = f

    @property
    def frame_size(self) -> int:
        return self._f

    @property
    def total(self) -> int:
        return self._prefix[self._f]

    def value(self, k: int, j: int) -> int:
        f = self._f
        if not (1 <= k <= f and 1 <= j <= f):
            raise ValueError("window indices must lie in 1..f")
        start = k - 1
        end = start + j
        if end <= f:
            return self._prefix[end] - self._prefix[start]
        return (self._prefix[f] - self._prefix[start]) + self._prefix[end - f]

    def min_over_starts(self, j: int) -> int:
        """Worst case over all window start positions for a duration j."""
        return min(self.value(k, j) for k in range(1, self._f + 1))


@dataclass(frozen=True)
class LrCharacterization:
    """Exact latency-rate parameters provided by a schedule to one client."""

    latency: Fraction
    rate: Fraction


def _client_mask(schedule: Schedule, client_id: int) -> tuple[int, ...]:
    mask = schedule.mask(client_id)
    return mask


def allocated_rate(
    schedule: Schedule, client_id: int, instance: Optional[ProblemInstance] = None
) -> Fraction:
    """Allocated rate phi_i / f of a client in a schedule.

    When an instance is given, the id is validated against it (a client with
    zero slots is still a valid client).
    """
    if not isinstance(client_id, int):
        raise UnknownClientError(client_id)
    if instance is not None:
        instance.client(client_id)  # raises UnknownClientError
    return Fraction(schedule.alloc_count(client_id), schedule.frame_size)


def service_curve(schedule: Schedule, client_id: int) -> ServiceCurve:
    return ServiceCurve(_client_mask(schedule, client_id))


def mask_service_latency(mask: Sequence[int]) -> Fraction:
    """Minimum latency satisfying the LR service bound for a 0/1 mask."""
    curve = ServiceCurve(mask)
    f = curve.frame_size
    phi = curve.total
    if phi == 0:
        raise LatencyUndefinedError("client holds no slots, latency undefined")
    # theta = max(0, max_{k,j} (j - wc(k,j) / rho)); one frame adds exactly
    # rho * f service, so durations beyond f never dominate
    worst = Fraction(0)
    for j in range(1, f + 1):
        wc = curve.min_over_starts(j)
        candidate = j - Fraction(wc * f, phi)
        if candidate > worst:
            worst = candidate
    return worst


def service_latency(schedule: Schedule, client_id: int) -> Fraction:
    """Exact service latency of a client in a schedule (Definition-style)."""
    return mask_service_latency(_client_mask(schedule, client_id))


def lr_characterization(schedule: Schedule, client_id: int) -> LrCharacterization:
    return LrCharacterization(
        latency=service_latency(schedule, client_id),
        rate=allocated_rate(schedule, client_id),
    )


def wc_finishing_times(
    arrivals: Sequence[tuple], lr: LrCharacterization
) -> list[Fraction]:
    """Worst-case finishing times of a time-sorted request sequence.

    Each arrival is a (time, size) pair with size in slots.  The k-th bound
    is max(arr_k + latency, fin_{k-1}) + size_k / rate.
    """
    if lr.rate == 0:
        raise ValueError("finishing times undefined for zero rate")
    times = [a for a, _ in arrivals]
    if times != sorted(times):
        raise ValueError("arrivals must be time-sorted")
    fins: list[Fraction] = []
    prev = None
    for arr, size in arrivals:
        start = _as_fraction(arr) + lr.latency
        if prev is not None and prev > start:
            start = prev
        fin = start + _as_fraction(size) / lr.rate
        fins.append(fin)
        prev = fin
    return fins
