"""Analytics over the central store: purchase-order volume aggregation,
supplier ratings, simple deterministic volume forecasts, material-group
supplier shares, and process breakdowns."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .domain import ProcessInstance, StepState, Supplier
from .errors import ValidationError
from .store import Focus, Scope, Store, ViewMode
from .units import Cents


class Bucketing(str, Enum):
    MONTH = "MONTH"
    QUARTER = "QUARTER"
    YEAR = "YEAR"


@dataclass(frozen=True)
class VolumeSeries:
    bucketing: Bucketing
    points: tuple[tuple[date, Cents], ...]

    def total(self) -> Cents:
        return sum(v for _, v in self.points)


@dataclass(frozen=True)
class RatingResult:
    supplier_id: str
    score: float
    contributions: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ShareResult:
    material_group_ids: tuple[str, ...]
    shares: Mapping[str, float] = field(default_factory=dict)


def bucket_start(day: date, bucketing: Bucketing) -> date:
    if bucketing is Bucketing.MONTH:
        return date(day.year, day.month, 1)
    if bucketing is Bucketing.QUARTER:
        return date(day.year, 3 * ((day.month - 1) // 3) + 1, 1)
    return date(day.year, 1, 1)


def next_bucket(start: date, bucketing: Bucketing) -> date:
    step = {Bucketing.MONTH: 1, Bucketing.QUARTER: 3, Bucketing.YEAR: 12}[bucketing]
    month = start.month - 1 + step
    return date(start.year + month // 12, month % 12 + 1, 1)


def _scoped_orders(store: Store, requester_id: str, scope: Scope) -> list:
    return store.query_scoped(requester_id, scope, "purchase_order")


def total_po_volume(
    store: Store,
    requester_id: str,
    scope: Scope,
    date_range: tuple[date, date],
    bucketing: Bucketing = Bucketing.MONTH,
) -> VolumeSeries:
    """Sum purchase-order volume per calendar bucket (UTC), zero-filling
    buckets without orders so the series is contiguous over the range."""
    start, end = date_range
    if end < start:
        raise ValidationError("empty date range", start=str(start), end=str(end))
    orders = [o for o in _scoped_orders(store, requester_id, scope) if start <= o.order_date <= end]
    sums: dict[date, int] = {}
    for order in orders:
        bucket = bucket_start(order.order_date, bucketing)
        sums[bucket] = sums.get(bucket, 0) + order.volume_eur
    points: list[tuple[date, Cents]] = []
    cursor, last = bucket_start(start, bucketing), bucket_start(end, bucketing)
    while cursor <= last:
        points.append((cursor, sums.get(cursor, 0)))
        cursor = next_bucket(cursor, bucketing)
    return VolumeSeries(bucketing=bucketing, points=tuple(points))


def supplier_rating(supplier: Supplier, weights: Mapping[str, float]) -> RatingResult:
    """Weighted mean over the characteristics present in both maps."""
    if any(w < 0 for w in weights.values()):
        raise ValidationError("rating weights must be >= 0")
    applied = {
        name: (weights[name], float(value))
        for name, value in supplier.characteristics.items()
        if weights.get(name, 0) > 0
    }
    if not applied:
        raise ValidationError("rating undefined", supplier=supplier.id)
    weight_sum = sum(w for w, _ in applied.values())
    contributions = {name: w * v for name, (w, v) in applied.items()}
    return RatingResult(
        supplier_id=supplier.id,
        score=sum(contributions.values()) / weight_sum,
        contributions=contributions,
    )


class ForecastMethod(str, Enum):
    MOVING_AVERAGE = "MOVING_AVERAGE"
    EXP_SMOOTHING = "EXP_SMOOTHING"


def forecast_volume(
    series: VolumeSeries,
    horizon: int,
    method: ForecastMethod = ForecastMethod.MOVING_AVERAGE,
    window: int = 3,
    alpha: float = 0.5,
) -> list[tuple[date, float]]:
    """Flat-line forecasts: moving average of the last `window` points, or
    an exponentially smoothed level carried forward."""
    if horizon < 1:
        raise ValidationError("horizon must be >= 1", horizon=horizon)
    values = [float(v) for _, v in series.points]
    if method is ForecastMethod.MOVING_AVERAGE:
        if window < 1:
            raise ValidationError("window must be >= 1", window=window)
        if len(values) < window:
            raise ValidationError(
                f"moving average needs at least {window} points", required=window, got=len(values)
            )
        level = sum(values[-window:]) / window
    else:
        if not 0 < alpha <= 1:
            raise ValidationError("alpha must be in (0,1]", alpha=alpha)
        if len(values) < 1:
            raise ValidationError("exponential smoothing needs at least 1 point", required=1, got=0)
        level = values[0]
        for observation in values[1:]:
            level = alpha * observation + (1 - alpha) * level
    periods = []
    cursor = series.points[-1][0] if series.points else date(1970, 1, 1)
    for _ in range(horizon):
        cursor = next_bucket(cursor, series.bucketing)
        periods.append(cursor)
    return [(period, level) for period in periods]


def material_group_share(
    store: Store,
    group_ids: Sequence[str],
    date_range: Optional[tuple[date, date]] = None,
) -> ShareResult:
    """Each supplier's fraction of purchase-order volume within the groups
    (descendant groups included). Empty volume -> empty shares map."""
    materials = store.materials_in_groups(group_ids)
    volumes: dict[str, int] = {}
    for order in store.list("purchase_order"):
        if order.material_id not in materials:
            continue
        if date_range and not (date_range[0] <= order.order_date <= date_range[1]):
            continue
        volumes[order.supplier_id] = volumes.get(order.supplier_id, 0) + order.volume_eur
    total = sum(volumes.values())
    if total == 0:
        return ShareResult(material_group_ids=tuple(group_ids), shares={})
    shares = {supplier: volume / total for supplier, volume in sorted(volumes.items())}
    return ShareResult(material_group_ids=tuple(group_ids), shares=shares)


@dataclass(frozen=True)
class AnnotatedStep:
    step_name: str
    responsible_user_id: str
    state: StepState
    active: bool
    your_task: bool


@dataclass(frozen=True)
class ProcessBreakdown:
    process_id: str
    process_type: str
    steps: tuple[AnnotatedStep, ...]
    completed: bool


def process_breakdown(instance: ProcessInstance, viewer_user_id: str) -> ProcessBreakdown:
    """Steps with states, the active step marked, and the viewer's own
    responsibilities flagged."""
    completed = all(step.state is StepState.DONE for step in instance.steps)
    steps = tuple(
        AnnotatedStep(
            step_name=step.step_name,
            responsible_user_id=step.responsible_user_id,
            state=step.state,
            active=step.state is StepState.ACTIVE,
            your_task=step.responsible_user_id == viewer_user_id,
        )
        for step in instance.steps
    )
    return ProcessBreakdown(
        process_id=instance.id,
        process_type=instance.process_type,
        steps=steps,
        completed=completed,
    )


def default_po_range(store: Store, requester_id: str, scope: Scope) -> Optional[tuple[date, date]]:
    """Data-derived default range: the span of matching orders. Keeps widget
    payloads deterministic without consulting the wall clock."""
    orders = _scoped_orders(store, requester_id, scope)
    if not orders:
        return None
    days = [o.order_date for o in orders]
    return min(days), max(days)
