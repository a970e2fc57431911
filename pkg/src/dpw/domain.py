"""Domain entities shared by every engine.

All entities are frozen dataclasses validated at construction, so a record
that exists is a record that satisfies its invariants. Collections are
normalized to immutable types (tuples, frozensets) to keep snapshots safe
to share across concurrent request handlers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime
from decimal import Decimal
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ValidationError
from .units import Cents


class RfqStatus(str, Enum):
    DRAFT = "DRAFT"
    OPEN = "OPEN"
    APPROVED = "APPROVED"
    REJECTED = "REJECTED"
    ORDERED = "ORDERED"


# The full lifecycle: drafts are opened, open requests are decided, and
# approved ones turn into orders. Everything else is rejected.
RFQ_TRANSITIONS: frozenset[tuple[RfqStatus, RfqStatus]] = frozenset(
    {
        (RfqStatus.DRAFT, RfqStatus.OPEN),
        (RfqStatus.OPEN, RfqStatus.APPROVED),
        (RfqStatus.OPEN, RfqStatus.REJECTED),
        (RfqStatus.APPROVED, RfqStatus.ORDERED),
    }
)


def validate_transition(current: RfqStatus, target: RfqStatus) -> bool:
    """True iff current -> target is a legal lifecycle step. Total function."""
    return (RfqStatus(current), RfqStatus(target)) in RFQ_TRANSITIONS


class AuctionStatus(str, Enum):
    OPEN = "OPEN"
    CLOSED = "CLOSED"


class StepState(str, Enum):
    PENDING = "PENDING"
    ACTIVE = "ACTIVE"
    DONE = "DONE"


class TaskState(str, Enum):
    OPEN = "OPEN"
    DONE = "DONE"


def _require(condition: bool, message: str, **details: object) -> None:
    if not condition:
        raise ValidationError(message, **details)


def _require_id(value: str, label: str) -> None:
    _require(isinstance(value, str) and value != "", f"{label} must be a non-empty id")


@dataclass(frozen=True)
class SubSupplierLink:
    """One edge of the supply graph: the child delivers quantityPerUnit of
    materialId into each unit the parent produces."""

    supplier_id: str
    material_id: str
    quantity_per_unit: Decimal

    def __post_init__(self) -> None:
        _require_id(self.supplier_id, "subSupplier.supplierId")
        _require_id(self.material_id, "subSupplier.materialId")
        object.__setattr__(self, "quantity_per_unit", Decimal(self.quantity_per_unit))
        _require(self.quantity_per_unit > 0, "quantityPerUnit must be > 0")


@dataclass(frozen=True)
class Supplier:
    id: str
    name: str
    sector_code: str
    total_revenue: Cents
    reported_ccf: Optional[Decimal] = None
    reported_pcf_by_material: Mapping[str, Decimal] = field(default_factory=dict)
    characteristics: Mapping[str, float] = field(default_factory=dict)
    sub_suppliers: tuple[SubSupplierLink, ...] = ()

    def __post_init__(self) -> None:
        _require_id(self.id, "supplier.id")
        _require(self.total_revenue >= 0, "totalRevenue must be >= 0", supplier=self.id)
        if self.reported_ccf is not None:
            object.__setattr__(self, "reported_ccf", Decimal(self.reported_ccf))
            _require(self.reported_ccf >= 0, "reportedCcf must be >= 0", supplier=self.id)
        pcf = {key: Decimal(value) for key, value in dict(self.reported_pcf_by_material).items()}
        _require(all(v >= 0 for v in pcf.values()), "reportedPcf must be >= 0", supplier=self.id)
        object.__setattr__(self, "reported_pcf_by_material", pcf)
        chars = dict(self.characteristics)
        for key, score in chars.items():
            _require(
                0 <= float(score) <= 100,
                f"characteristic {key!r} must be in [0,100]",
                supplier=self.id,
                value=score,
            )
        object.__setattr__(self, "characteristics", chars)
        object.__setattr__(self, "sub_suppliers", tuple(self.sub_suppliers))


@dataclass(frozen=True)
class MaterialGroup:
    id: str
    name: str
    parent_id: Optional[str] = None

    def __post_init__(self) -> None:
        _require_id(self.id, "materialGroup.id")
        _require(self.parent_id != self.id, "material group cannot parent itself", group=self.id)


@dataclass(frozen=True)
class Material:
    id: str
    material_group_id: str
    name: str
    unit: str
    sector_code: str = ""
    database_pcf: Optional[Decimal] = None

    def __post_init__(self) -> None:
        _require_id(self.id, "material.id")
        _require_id(self.material_group_id, "material.materialGroupId")
        if self.database_pcf is not None:
            object.__setattr__(self, "database_pcf", Decimal(self.database_pcf))
            _require(self.database_pcf >= 0, "databasePcf must be >= 0", material=self.id)


@dataclass(frozen=True)
class Rfq:
    id: str
    owner_user_id: str
    department: str
    material_id: str
    quantity: Decimal
    target_price: Cents  # per unit of the material
    status: RfqStatus
    created_at: datetime
    due_at: datetime
    supplier_id: Optional[str] = None
    superseded_by: Optional[str] = None  # set when a bundle replaced this RfQ

    def __post_init__(self) -> None:
        _require_id(self.id, "rfq.id")
        _require_id(self.owner_user_id, "rfq.ownerUserId")
        object.__setattr__(self, "quantity", Decimal(self.quantity))
        object.__setattr__(self, "status", RfqStatus(self.status))
        _require(self.quantity > 0, "quantity must be > 0", rfq=self.id)
        _require(self.target_price >= 0, "targetPrice must be >= 0", rfq=self.id)
        _require(self.due_at >= self.created_at, "dueAt must be >= createdAt", rfq=self.id)


@dataclass(frozen=True)
class Bid:
    supplier_id: str
    price: Cents

    def __post_init__(self) -> None:
        _require_id(self.supplier_id, "bid.supplierId")
        _require(self.price >= 0, "bid price must be >= 0", supplier=self.supplier_id)


@dataclass(frozen=True)
class Auction:
    id: str
    owner_user_id: str
    status: AuctionStatus
    supplier_bids: tuple[Bid, ...] = ()

    def __post_init__(self) -> None:
        _require_id(self.id, "auction.id")
        _require_id(self.owner_user_id, "auction.ownerUserId")
        object.__setattr__(self, "status", AuctionStatus(self.status))
        object.__setattr__(self, "supplier_bids", tuple(self.supplier_bids))


@dataclass(frozen=True)
class PurchaseOrder:
    id: str
    supplier_id: str
    material_id: str
    volume_eur: Cents
    quantity: Decimal
    order_date: date
    department: str
    owner_user_id: str

    def __post_init__(self) -> None:
        _require_id(self.id, "purchaseOrder.id")
        _require_id(self.supplier_id, "purchaseOrder.supplierId")
        _require_id(self.material_id, "purchaseOrder.materialId")
        object.__setattr__(self, "quantity", Decimal(self.quantity))
        _require(self.volume_eur >= 0, "volumeEur must be >= 0", order=self.id)
        _require(self.quantity > 0, "quantity must be > 0", order=self.id)


@dataclass(frozen=True)
class Contract:
    id: str
    supplier_id: str
    owner_user_id: str
    valid_from: date
    valid_to: date

    def __post_init__(self) -> None:
        _require_id(self.id, "contract.id")
        _require(self.valid_to >= self.valid_from, "validTo must be >= validFrom", contract=self.id)


@dataclass(frozen=True)
class LayoutEntry:
    widget_id: str
    x: int
    y: int
    width: int
    height: int

    def __post_init__(self) -> None:
        _require_id(self.widget_id, "layout.widgetId")
        _require(self.x >= 0 and self.y >= 0, "layout position must be >= 0", widget=self.widget_id)
        _require(self.width >= 1 and self.height >= 1, "layout size must be >= 1", widget=self.widget_id)

    def overlaps(self, other: LayoutEntry) -> bool:
        return (
            self.x < other.x + other.width
            and other.x < self.x + self.width
            and self.y < other.y + other.height
            and other.y < self.y + self.height
        )


@dataclass(frozen=True)
class WidgetLayout:
    entries: tuple[LayoutEntry, ...] = ()

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        seen: set[str] = set()
        for entry in entries:
            _require(entry.widget_id not in seen, "duplicate widget in layout", widget=entry.widget_id)
            seen.add(entry.widget_id)
        colliding = sorted(
            {a.widget_id for i, a in enumerate(entries) for b in entries[i + 1 :] if a.overlaps(b)}
            | {b.widget_id for i, a in enumerate(entries) for b in entries[i + 1 :] if a.overlaps(b)}
        )
        _require(not colliding, "layout entries overlap", widgets=colliding)


@dataclass(frozen=True)
class ReadEvent:
    cluster_id: str
    at: datetime


@dataclass(frozen=True)
class User:
    id: str
    name: str
    team_id: str
    favorites: frozenset[str] = frozenset()
    reading_history: tuple[ReadEvent, ...] = ()
    layout: Optional[WidgetLayout] = None

    def __post_init__(self) -> None:
        _require_id(self.id, "user.id")
        _require_id(self.team_id, "user.teamId")
        object.__setattr__(self, "favorites", frozenset(self.favorites))
        object.__setattr__(self, "reading_history", tuple(self.reading_history))


@dataclass(frozen=True)
class ProcessStep:
    step_name: str
    responsible_user_id: str
    state: StepState

    def __post_init__(self) -> None:
        object.__setattr__(self, "state", StepState(self.state))


@dataclass(frozen=True)
class ProcessInstance:
    id: str
    process_type: str
    steps: tuple[ProcessStep, ...]
    current_step_index: int

    def __post_init__(self) -> None:
        _require_id(self.id, "process.id")
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        _require(len(steps) > 0, "process needs at least one step", process=self.id)
        all_done = all(step.state is StepState.DONE for step in steps)
        active = [i for i, step in enumerate(steps) if step.state is StepState.ACTIVE]
        if all_done:
            _require(not active, "finished process cannot have an active step", process=self.id)
        else:
            _require(
                len(active) == 1 and active[0] == self.current_step_index,
                "exactly one ACTIVE step at currentStepIndex required",
                process=self.id,
            )
            _require(
                all(step.state is StepState.DONE for step in steps[: self.current_step_index]),
                "steps before the current one must be DONE",
                process=self.id,
            )


@dataclass(frozen=True)
class Task:
    id: str
    assignee_user_id: str
    title: str
    state: TaskState
    process_ref: Optional[str] = None

    def __post_init__(self) -> None:
        _require_id(self.id, "task.id")
        _require_id(self.assignee_user_id, "task.assigneeUserId")
        object.__setattr__(self, "state", TaskState(self.state))


@dataclass(frozen=True)
class NewsItem:
    id: str
    source_id: str
    title: str
    body: str
    published_at: datetime
    topics: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        _require_id(self.id, "news.id")
        _require(self.title.strip() != "", "news title must be non-empty", news=self.id)
        _require(self.published_at is not None, "news needs publishedAt", news=self.id)
        object.__setattr__(self, "topics", frozenset(self.topics))


@dataclass(frozen=True)
class Suggestion:
    """A teammate marked a news cluster as relevant for the whole team."""

    id: str
    team_id: str
    cluster_id: str
    by_user_id: str
    at: datetime


def detect_cycle(suppliers: Iterable[Supplier]) -> Optional[list[str]]:
    """Find a cycle in the sub-supplier graph.

    Returns a witness path like [a, b, a] or None for acyclic input. Dangling
    supplier references are a validation error naming the missing id.
    """
    by_id = {supplier.id: supplier for supplier in suppliers}
    for supplier in by_id.values():
        for link in supplier.sub_suppliers:
            if link.supplier_id not in by_id:
                raise ValidationError(
                    f"sub-supplier {link.supplier_id!r} of {supplier.id!r} does not resolve",
                    supplier=supplier.id,
                    dangling=link.supplier_id,
                )

    WHITE, GREY, BLACK = 0, 1, 2
    color = {supplier_id: WHITE for supplier_id in by_id}

    def visit(node: str, path: list[str]) -> Optional[list[str]]:
        color[node] = GREY
        path.append(node)
        for link in by_id[node].sub_suppliers:
            child = link.supplier_id
            if color[child] == GREY:
                return path[path.index(child) :] + [child]
            if color[child] == WHITE:
                found = visit(child, path)
                if found is not None:
                    return found
        path.pop()
        color[node] = BLACK
        return None

    for supplier_id in sorted(by_id):
        if color[supplier_id] == WHITE:
            witness = visit(supplier_id, [])
            if witness is not None:
                return witness
    return None


def validate_status_history(history: Sequence[RfqStatus]) -> bool:
    """True iff every consecutive pair in a recorded history is a legal step."""
    return all(validate_transition(a, b) for a, b in zip(history, history[1:]))
