"""Automation bots: cross-department RfQ bundling and low-risk negotiation.

Bots only ever produce proposals; a human approves a run before anything
touches the store, and the apply step re-checks that every member RfQ is
still OPEN (optimistic concurrency) so a stale run conflicts instead of
clobbering newer decisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from decimal import Decimal
from enum import Enum
from typing import Any, Callable, Mapping, Optional, Sequence

from . import domain
from .errors import ConflictError, NotFoundError, ValidationError
from .records import from_record, to_record
from .store import Store
from .units import Cents, parse_money, parse_timestamp, round_cents, utc_now


class GroupBy(str, Enum):
    MATERIAL = "MATERIAL"
    MATERIAL_GROUP = "MATERIAL_GROUP"


@dataclass(frozen=True)
class BundlePolicy:
    group_by: GroupBy = GroupBy.MATERIAL
    window: timedelta = timedelta(days=30)
    min_bundle_size: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "group_by", GroupBy(self.group_by))
        if self.window <= timedelta(0):
            raise ValidationError("bundling window must be > 0")
        if self.min_bundle_size < 2:
            raise ValidationError("minBundleSize must be >= 2")


@dataclass(frozen=True)
class NegotiationPolicy:
    max_volume_eur: Cents = 1_000_000 * 100
    accept_tolerance: Decimal = Decimal("0.02")
    counter_margin: Decimal = Decimal("0.01")

    def __post_init__(self) -> None:
        object.__setattr__(self, "accept_tolerance", Decimal(self.accept_tolerance))
        object.__setattr__(self, "counter_margin", Decimal(self.counter_margin))
        if self.max_volume_eur < 0:
            raise ValidationError("maxVolumeEur must be >= 0")
        for name, value in (("acceptTolerance", self.accept_tolerance), ("counterMargin", self.counter_margin)):
            if not (0 <= value < 1):
                raise ValidationError(f"{name} must be in [0,1)", value=str(value))


class ProposalKind(str, Enum):
    BUNDLE = "BUNDLE"
    ACCEPT = "ACCEPT"
    COUNTER = "COUNTER"
    ESCALATE = "ESCALATE"


class RunStatus(str, Enum):
    PROPOSED = "PROPOSED"
    APPROVED = "APPROVED"
    REJECTED = "REJECTED"
    APPLIED = "APPLIED"


@dataclass(frozen=True)
class BotProposal:
    kind: ProposalKind
    member_rfq_ids: tuple[str, ...]
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ProposalKind(self.kind))
        object.__setattr__(self, "member_rfq_ids", tuple(self.member_rfq_ids))
        if not self.member_rfq_ids:
            raise ValidationError("proposal needs at least one member RfQ")
        object.__setattr__(self, "payload", dict(self.payload))


@dataclass(frozen=True)
class BotRun:
    run_id: str
    bot_id: str
    triggered_by: str
    started_at: datetime
    proposals: tuple[BotProposal, ...]
    status: RunStatus = RunStatus.PROPOSED

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", RunStatus(self.status))
        object.__setattr__(self, "proposals", tuple(self.proposals))


# -- bundling ----------------------------------------------------------


def bundle_rfqs(
    open_rfqs: Sequence[domain.Rfq],
    policy: BundlePolicy,
    now: datetime,
    materials: Optional[Mapping[str, domain.Material]] = None,
) -> list[BotProposal]:
    """Group OPEN RfQs created within the window by material (or material
    group) and propose one bundle per group that spans at least two
    departments and reaches the minimum size."""
    for rfq in open_rfqs:
        if rfq.status is not domain.RfqStatus.OPEN:
            raise ValidationError("bundling considers OPEN RfQs only", rfq=rfq.id, status=rfq.status.value)

    def group_key(rfq: domain.Rfq) -> str:
        if policy.group_by is GroupBy.MATERIAL:
            return rfq.material_id
        if materials is None or rfq.material_id not in materials:
            raise ValidationError("material master data needed to group by material group", rfq=rfq.id)
        return materials[rfq.material_id].material_group_id

    window_start = now - policy.window
    groups: dict[str, list[domain.Rfq]] = {}
    for rfq in open_rfqs:
        if window_start <= rfq.created_at <= now:
            groups.setdefault(group_key(rfq), []).append(rfq)

    proposals = []
    for key in sorted(groups):
        members = sorted(groups[key], key=lambda r: (r.created_at, r.id))
        departments = sorted({m.department for m in members})
        if len(members) < policy.min_bundle_size or len(departments) < 2:
            continue
        combined = sum((m.quantity for m in members), Decimal(0))
        payload: dict[str, Any] = {
            "groupKey": key,
            "groupBy": policy.group_by.value,
            "combinedQuantity": combined,
            "departments": departments,
        }
        proposals.append(
            BotProposal(
                kind=ProposalKind.BUNDLE,
                member_rfq_ids=tuple(m.id for m in members),
                payload=payload,
            )
        )
    return proposals


# -- negotiation -------------------------------------------------------


def negotiate_low_risk(
    rfq: domain.Rfq,
    offer_price: Cents,
    reference_price: Cents,
    policy: NegotiationPolicy,
) -> BotProposal:
    """Rule table: above the volume ceiling the bot always escalates to a
    human; at or below reference plus tolerance it accepts; otherwise it
    counters at reference plus margin."""
    if rfq.status is not domain.RfqStatus.OPEN:
        raise ValidationError("negotiation needs an OPEN RfQ", rfq=rfq.id, status=rfq.status.value)
    if reference_price <= 0:
        raise ValidationError("referencePrice must be > 0", reference=reference_price)
    if offer_price < 0:
        raise ValidationError("offerPrice must be >= 0", offer=offer_price)

    volume = rfq.quantity * Decimal(offer_price)
    base = {
        "offerPrice": offer_price,
        "referencePrice": reference_price,
        "volumeEur": volume,
        "maxVolumeEur": policy.max_volume_eur,
    }
    if volume > policy.max_volume_eur:
        payload = dict(base, reason="volume exceeds the low-risk ceiling")
        return BotProposal(ProposalKind.ESCALATE, (rfq.id,), payload)
    if Decimal(offer_price) <= Decimal(reference_price) * (1 + policy.accept_tolerance):
        payload = dict(base, reason="offer within tolerance of reference price")
        return BotProposal(ProposalKind.ACCEPT, (rfq.id,), payload)
    counter = round_cents(Decimal(reference_price) * (1 + policy.counter_margin))
    payload = dict(base, counterPrice=counter, reason="offer above tolerance; counter at reference plus margin")
    return BotProposal(ProposalKind.COUNTER, (rfq.id,), payload)


def reference_price_for(store: Store, rfq: domain.Rfq) -> Cents:
    """Latest purchase order for the same material sets the per-unit
    reference; with no order history the RfQ's own target price stands in."""
    orders = [po for po in store.list("purchase_order") if po.material_id == rfq.material_id]
    if orders:
        latest = max(orders, key=lambda po: (po.order_date, po.id))
        return round_cents(Decimal(latest.volume_eur) / latest.quantity)
    return rfq.target_price


# -- the runner --------------------------------------------------------

BOT_IDS = ("bundler", "negotiator")


class BotEngine:
    def __init__(
        self,
        store: Store,
        bundle_policy: Optional[BundlePolicy] = None,
        negotiation_policy: Optional[NegotiationPolicy] = None,
        clock: Callable[[], datetime] = utc_now,
    ) -> None:
        self.store = store
        self.bundle_policy = bundle_policy or BundlePolicy()
        self.negotiation_policy = negotiation_policy or NegotiationPolicy()
        self.clock = clock

    # -- execution ----------------------------------------------------

    def execute(
        self,
        bot_id: str,
        params: Mapping[str, Any],
        triggered_by: str,
        dry_run: bool = False,
    ) -> BotRun:
        """Run one bot over the current snapshot and record a PROPOSED run
        (dry runs are computed but never recorded)."""
        self.store.require("user", triggered_by)
        if bot_id == "bundler":
            proposals = self._run_bundler(params)
        elif bot_id == "negotiator":
            proposals = self._run_negotiator(params)
        else:
            raise NotFoundError(f"unknown bot {bot_id!r}", bot=bot_id)
        run = BotRun(
            run_id=f"run-{bot_id}-{len(self.store.list_operational('bot_run')) + 1:04d}",
            bot_id=bot_id,
            triggered_by=triggered_by,
            started_at=self.clock(),
            proposals=tuple(proposals),
            status=RunStatus.PROPOSED,
        )
        if not dry_run:
            self.store.append_operational("bot_run", to_record(run))
        return run

    def _open_rfqs(self) -> list[domain.Rfq]:
        return [r for r in self.store.list("rfq") if r.status is domain.RfqStatus.OPEN]

    def _run_bundler(self, params: Mapping[str, Any]) -> list[BotProposal]:
        open_rfqs = self._open_rfqs()
        if "now" in params and params["now"]:
            now = parse_timestamp(str(params["now"]))
        elif open_rfqs:
            # anchor the window to the data so a fixture bundles the same
            # way regardless of when the bot is triggered
            now = max(r.created_at for r in open_rfqs)
        else:
            now = self.clock()
        materials = {m.id: m for m in self.store.list("material")}
        return bundle_rfqs(open_rfqs, self.bundle_policy, now, materials)

    def _run_negotiator(self, params: Mapping[str, Any]) -> list[BotProposal]:
        rfq_id = str(params.get("rfqId") or "")
        if not rfq_id:
            raise ValidationError("negotiator needs params.rfqId")
        if "offerPrice" not in params:
            raise ValidationError("negotiator needs params.offerPrice (EUR)")
        rfq = self.store.require("rfq", rfq_id)
        offer = parse_money(params["offerPrice"], "EUR")
        if "referencePrice" in params and params["referencePrice"] is not None:
            reference = parse_money(params["referencePrice"], "EUR")
        else:
            reference = reference_price_for(self.store, rfq)
        return [negotiate_low_risk(rfq, offer, reference, self.negotiation_policy)]

    # -- review -------------------------------------------------------

    def get_run(self, run_id: str) -> BotRun:
        record = self._find(run_id)[1]
        return _run_from_record(record)

    def list_runs(self) -> list[BotRun]:
        return [_run_from_record(r) for r in self.store.list_operational("bot_run")]

    def _find(self, run_id: str) -> tuple[int, dict[str, Any]]:
        for index, record in enumerate(self.store.list_operational("bot_run")):
            if record.get("run_id") == run_id:
                return index, record
        raise NotFoundError(f"unknown bot run {run_id!r}", run=run_id)

    def approve(self, run_id: str, approved_by: str) -> BotRun:
        """Approve and apply in one step. Approving an APPLIED run again is
        a no-op; a run whose members changed underneath conflicts and
        applies nothing."""
        self.store.require("user", approved_by)
        with self.store.lock:
            index, record = self._find(run_id)
            run = _run_from_record(record)
            if run.status is RunStatus.APPLIED:
                return run
            if run.status is RunStatus.REJECTED:
                raise ConflictError("run was rejected; nothing to apply", run=run_id)
            approved = BotRun(
                run_id=run.run_id,
                bot_id=run.bot_id,
                triggered_by=run.triggered_by,
                started_at=run.started_at,
                proposals=run.proposals,
                status=RunStatus.APPROVED,
            )
            self.store.update_operational("bot_run", index, to_record(approved))
            self._apply(approved)  # ConflictError propagates with status APPROVED kept
            applied = BotRun(
                run_id=run.run_id,
                bot_id=run.bot_id,
                triggered_by=run.triggered_by,
                started_at=run.started_at,
                proposals=run.proposals,
                status=RunStatus.APPLIED,
            )
            self.store.update_operational("bot_run", index, to_record(applied))
            return applied

    def reject(self, run_id: str, rejected_by: str) -> BotRun:
        self.store.require("user", rejected_by)
        with self.store.lock:
            index, record = self._find(run_id)
            run = _run_from_record(record)
            if run.status in (RunStatus.APPLIED,):
                raise ConflictError("run already applied", run=run_id)
            rejected = BotRun(
                run_id=run.run_id,
                bot_id=run.bot_id,
                triggered_by=run.triggered_by,
                started_at=run.started_at,
                proposals=run.proposals,
                status=RunStatus.REJECTED,
            )
            self.store.update_operational("bot_run", index, to_record(rejected))
            return rejected

    # -- apply --------------------------------------------------------

    def _apply(self, run: BotRun) -> None:
        """Re-validate every member against current state, then commit all
        effects of all proposals as one batch."""
        changes: list[tuple[str, Any]] = []
        apply_at = self.clock()
        for number, proposal in enumerate(run.proposals, start=1):
            members = []
            for rfq_id in proposal.member_rfq_ids:
                rfq = self.store.get("rfq", rfq_id)
                if rfq is None or rfq.status is not domain.RfqStatus.OPEN:
                    raise ConflictError(
                        f"RfQ {rfq_id} is no longer OPEN; run is stale",
                        run=run.run_id,
                        rfq=rfq_id,
                    )
                members.append(rfq)
            changes.extend(self._proposal_changes(run, number, proposal, members, apply_at))
        self.store.commit_batch(changes)

    def _proposal_changes(
        self,
        run: BotRun,
        number: int,
        proposal: BotProposal,
        members: list[domain.Rfq],
        apply_at: datetime,
    ) -> list[tuple[str, Any]]:
        if proposal.kind is ProposalKind.BUNDLE:
            return self._bundle_changes(run, number, proposal, members, apply_at)
        rfq = members[0]
        if proposal.kind is ProposalKind.ACCEPT:
            updated = _with(
                rfq, status=domain.RfqStatus.APPROVED, target_price=int(proposal.payload["offerPrice"])
            )
            return [("rfq", updated)]
        if proposal.kind is ProposalKind.COUNTER:
            updated = _with(rfq, target_price=int(proposal.payload["counterPrice"]))
            return [("rfq", updated)]
        # ESCALATE: hand the negotiation to a person as an open task
        task = domain.Task(
            id=f"task-{run.run_id}-{rfq.id}",
            assignee_user_id=run.triggered_by,
            title=f"Negotiate {rfq.id} manually: {proposal.payload.get('reason', 'escalated by bot')}",
            state=domain.TaskState.OPEN,
        )
        return [("task", task)]

    def _bundle_changes(
        self,
        run: BotRun,
        number: int,
        proposal: BotProposal,
        members: list[domain.Rfq],
        apply_at: datetime,
    ) -> list[tuple[str, Any]]:
        merged_id = f"rfq-{run.run_id}-m{number}"
        combined = sum((m.quantity for m in members), Decimal(0))
        # neutral per-unit target for the merged request: quantity-weighted
        # mean of the members' targets
        weighted = sum((m.quantity * m.target_price for m in members), Decimal(0))
        target_price = round_cents(weighted / combined) if combined else 0
        quantities_by_material: dict[str, Decimal] = {}
        for m in members:
            quantities_by_material[m.material_id] = quantities_by_material.get(m.material_id, Decimal(0)) + m.quantity
        dominant_material = min(quantities_by_material, key=lambda mid: (-quantities_by_material[mid], mid))
        supplier_ids = {m.supplier_id for m in members}
        merged = domain.Rfq(
            id=merged_id,
            owner_user_id=run.triggered_by,
            department="CROSS_DEPARTMENT",
            material_id=dominant_material,
            quantity=combined,
            target_price=target_price,
            status=domain.RfqStatus.OPEN,
            created_at=apply_at,
            due_at=max([m.due_at for m in members] + [apply_at]),
            supplier_id=supplier_ids.pop() if len(supplier_ids) == 1 else None,
        )
        changes: list[tuple[str, Any]] = [("rfq", merged)]
        for m in members:
            changes.append(("rfq", _with(m, status=domain.RfqStatus.REJECTED, superseded_by=merged_id)))
        return changes


def _with(rfq: domain.Rfq, **updates: Any) -> domain.Rfq:
    values = {f: getattr(rfq, f) for f in ("id", "owner_user_id", "department", "material_id", "quantity", "target_price", "status", "created_at", "due_at", "supplier_id", "superseded_by")}
    values.update(updates)
    return domain.Rfq(**values)


def _run_from_record(record: dict[str, Any]) -> BotRun:
    return from_record(record, BotRun)
