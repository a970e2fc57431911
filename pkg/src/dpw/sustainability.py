"""Sustainability scoring: the staged CO2e score, gas-to-CO2e conversion,
supply-chain aggregation, risk alerts, and greener-supplier suggestions.

Stages, coarse to exact:
  1 revenue-share allocation of a supplier's own reported annual footprint
  2 spend times a third-party sector factor
  3 quantity times a third-party product factor
  4 quantity times the supplier's measured per-unit footprint
When several stages are computable for a component, the highest-numbered
one wins. All masses are Decimal tCO2e.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime
from decimal import Decimal
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .analytics import ShareResult, supplier_rating
from .domain import Material, Rfq, Supplier, detect_cycle
from .errors import NotFoundError, StageUnavailable, ValidationError
from .store import Store
from .units import Cents, cents_to_keur


class FactorScope(str, Enum):
    SECTOR = "SECTOR"
    PRODUCT = "PRODUCT"


class FactorUnit(str, Enum):
    TCO2E_PER_KEUR = "tCO2e_per_kEUR"
    TCO2E_PER_UNIT = "tCO2e_per_unit"


@dataclass(frozen=True)
class EmissionFactor:
    id: str
    scope: FactorScope
    key: str  # sector code (SECTOR) or material id (PRODUCT)
    value: Decimal
    unit: FactorUnit
    source_name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "scope", FactorScope(self.scope))
        object.__setattr__(self, "unit", FactorUnit(self.unit))
        object.__setattr__(self, "value", Decimal(self.value))
        if self.value < 0:
            raise ValidationError("factor value must be >= 0", factor=self.id)
        expected = FactorUnit.TCO2E_PER_KEUR if self.scope is FactorScope.SECTOR else FactorUnit.TCO2E_PER_UNIT
        if self.unit is not expected:
            raise ValidationError(
                f"{self.scope.value} factors must be {expected.value}", factor=self.id, unit=self.unit.value
            )


def factor_id(scope: FactorScope, key: str) -> str:
    return f"{FactorScope(scope).value}:{key}"


@dataclass(frozen=True)
class GwpTable:
    """Global-warming-potential multipliers; CO2 is pinned to exactly 1."""

    factors: Mapping[str, Decimal]

    def __post_init__(self) -> None:
        factors = {gas: Decimal(mult) for gas, mult in dict(self.factors).items()}
        if factors.get("CO2") != 1:
            raise ValidationError("GWP table must map CO2 to exactly 1")
        if any(mult <= 0 for mult in factors.values()):
            raise ValidationError("GWP multipliers must be > 0")
        object.__setattr__(self, "factors", factors)


@dataclass(frozen=True)
class BreakdownEntry:
    component: str
    stage: Optional[int]  # None marks a data gap in the chain
    contribution: Decimal
    gap: bool = False


@dataclass(frozen=True)
class SustainabilityScore:
    subject: str  # "supplier:<id>" | "material:<id>" | "rfq:<id>"
    stage: int
    value_tco2e: Decimal
    breakdown: tuple[BreakdownEntry, ...]
    computed_at: Optional[datetime] = None


class AlertKind(str, Enum):
    SCORE_THRESHOLD = "SCORE_THRESHOLD"
    SCORE_INCREASE = "SCORE_INCREASE"
    SINGLE_SOURCE_DEPENDENCY = "SINGLE_SOURCE_DEPENDENCY"


class Severity(str, Enum):
    INFO = "INFO"
    WARN = "WARN"
    CRITICAL = "CRITICAL"


@dataclass(frozen=True)
class SustainabilityAlert:
    kind: AlertKind
    subject: str
    severity: Severity
    message: str


@dataclass(frozen=True)
class Thresholds:
    score_tco2e: Decimal
    increase_fraction: Decimal
    dependency_fraction: Decimal


# -- the four stages -------------------------------------------------


def stage1_monetary_ccf(spend_with_supplier: Cents, supplier_revenue: Cents, supplier_ccf: Decimal) -> Decimal:
    """Revenue-share allocation: buying x% of a supplier's revenue carries
    x% of its annual footprint. Multiplies before dividing so terminating
    revenue divisors stay exact in decimal arithmetic."""
    if spend_with_supplier < 0 or supplier_ccf < 0:
        raise ValidationError("spend and footprint must be >= 0")
    if supplier_revenue == 0:
        raise ValidationError("allocation undefined for zero revenue", code_hint="undefined-allocation")
    if supplier_revenue < 0:
        raise ValidationError("revenue must be >= 0")
    if spend_with_supplier > supplier_revenue:
        raise ValidationError(
            "spend exceeds supplier revenue", spend=spend_with_supplier, revenue=supplier_revenue
        )
    return Decimal(spend_with_supplier) * Decimal(supplier_ccf) / Decimal(supplier_revenue)


def stage2_sector_ccf(spend_with_supplier: Cents, sector_factor: EmissionFactor) -> Decimal:
    """Spend (kEUR) times a third-party sector factor (tCO2e per kEUR)."""
    if sector_factor.scope is not FactorScope.SECTOR or sector_factor.unit is not FactorUnit.TCO2E_PER_KEUR:
        raise ValidationError("stage 2 needs a SECTOR factor in tCO2e_per_kEUR", factor=sector_factor.id)
    if spend_with_supplier < 0:
        raise ValidationError("spend must be >= 0")
    return cents_to_keur(spend_with_supplier) * sector_factor.value


def stage3_product_pcf(
    quantity: Decimal, product_factor: EmissionFactor, material_id: Optional[str] = None
) -> Decimal:
    """Quantity times a third-party product factor (tCO2e per unit)."""
    if product_factor.scope is not FactorScope.PRODUCT or product_factor.unit is not FactorUnit.TCO2E_PER_UNIT:
        raise ValidationError("stage 3 needs a PRODUCT factor in tCO2e_per_unit", factor=product_factor.id)
    if material_id is not None and product_factor.key != material_id:
        raise ValidationError(
            "product factor keyed to a different material",
            factor=product_factor.id,
            expected=material_id,
            actual=product_factor.key,
        )
    quantity = Decimal(quantity)
    if quantity < 0:
        raise ValidationError("quantity must be >= 0")
    return quantity * product_factor.value


def stage4_reported_pcf(quantity: Decimal, reported_pcf: Optional[Decimal]) -> Decimal:
    """Quantity times the supplier's own measured per-unit footprint; absent
    measurements signal stage-unavailable rather than failing hard."""
    if reported_pcf is None:
        raise StageUnavailable("supplier reports no per-unit footprint for this material")
    reported_pcf = Decimal(reported_pcf)
    quantity = Decimal(quantity)
    if reported_pcf < 0 or quantity < 0:
        raise ValidationError("quantity and reported footprint must be >= 0")
    return quantity * reported_pcf


def to_co2e(gas_amounts: Mapping[str, Decimal], table: GwpTable) -> Decimal:
    """Collapse per-gas masses into one CO2-equivalent mass."""
    total = Decimal(0)
    for gas, amount in sorted(gas_amounts.items()):
        if gas not in table.factors:
            raise ValidationError(f"no GWP factor for gas {gas!r}", gas=gas)
        total += Decimal(amount) * table.factors[gas]
    return total


# -- stage selection and score assembly -------------------------------


@dataclass(frozen=True)
class StageInputs:
    """Everything that may feed one component's score; whatever is present
    determines which stages are available."""

    spend_with_supplier: Optional[Cents] = None
    supplier_revenue: Optional[Cents] = None
    supplier_reported_ccf: Optional[Decimal] = None
    sector_factor: Optional[EmissionFactor] = None
    quantity: Optional[Decimal] = None
    product_factor: Optional[EmissionFactor] = None
    reported_pcf: Optional[Decimal] = None

    def available_stages(self) -> frozenset[int]:
        stages = set()
        if (
            self.spend_with_supplier is not None
            and self.supplier_revenue is not None
            and self.supplier_revenue > 0
            and self.supplier_reported_ccf is not None
        ):
            stages.add(1)
        if self.spend_with_supplier is not None and self.sector_factor is not None:
            stages.add(2)
        if self.quantity is not None and self.product_factor is not None:
            stages.add(3)
        if self.quantity is not None and self.reported_pcf is not None:
            stages.add(4)
        return frozenset(stages)


def select_stage(available: Iterable[int]) -> int:
    """The precedence rule: the highest-numbered (most exact) available
    stage wins."""
    stages = set(available)
    if not stages:
        raise StageUnavailable("no emission data for subject")
    if not stages <= {1, 2, 3, 4}:
        raise ValidationError(f"unknown stages {sorted(stages - {1, 2, 3, 4})}")
    return max(stages)


def compute_stage_value(stage: int, inputs: StageInputs) -> Decimal:
    if stage == 1:
        assert inputs.spend_with_supplier is not None and inputs.supplier_revenue is not None
        assert inputs.supplier_reported_ccf is not None
        return stage1_monetary_ccf(inputs.spend_with_supplier, inputs.supplier_revenue, inputs.supplier_reported_ccf)
    if stage == 2:
        assert inputs.spend_with_supplier is not None and inputs.sector_factor is not None
        return stage2_sector_ccf(inputs.spend_with_supplier, inputs.sector_factor)
    if stage == 3:
        assert inputs.quantity is not None and inputs.product_factor is not None
        return stage3_product_pcf(inputs.quantity, inputs.product_factor)
    if stage == 4:
        assert inputs.quantity is not None
        return stage4_reported_pcf(inputs.quantity, inputs.reported_pcf)
    raise ValidationError(f"unknown stage {stage}")


def compute_score(
    subject: str,
    inputs: StageInputs,
    computed_at: Optional[datetime] = None,
) -> SustainabilityScore:
    """Score one subject from whatever stage inputs exist, recording which
    stage was used. Raises when no stage is computable."""
    available = inputs.available_stages()
    if not available:
        raise StageUnavailable(f"no emission data for subject {subject}", subject=subject)
    stage = select_stage(available)
    value = compute_stage_value(stage, inputs)
    entry = BreakdownEntry(component=subject, stage=stage, contribution=value)
    return SustainabilityScore(
        subject=subject, stage=stage, value_tco2e=value, breakdown=(entry,), computed_at=computed_at
    )


# -- supply-chain aggregation -----------------------------------------


@dataclass(frozen=True)
class ChainNodeScore:
    """One node's own contribution (before multiplying along the chain)."""

    value_tco2e: Decimal
    stage: int


def aggregate_chain(
    root_id: str,
    edges: Mapping[str, Sequence[tuple[str, Decimal]]],
    node_scores: Mapping[str, ChainNodeScore],
    subject: Optional[str] = None,
    computed_at: Optional[datetime] = None,
) -> SustainabilityScore:
    """Total footprint of the supply graph under root_id.

    total(node) = own + sum over children of quantityPerUnit * total(child);
    the breakdown carries one entry per root-to-node path, and branches
    without data appear as explicit gap entries instead of being dropped.
    """
    _reject_cycles(root_id, edges)

    breakdown: list[BreakdownEntry] = []
    total = Decimal(0)

    def walk(node: str, path: str, multiplier: Decimal) -> None:
        nonlocal total
        own = node_scores.get(node)
        if own is None:
            breakdown.append(BreakdownEntry(component=path, stage=None, contribution=Decimal(0), gap=True))
        else:
            contribution = multiplier * own.value_tco2e
            total += contribution
            breakdown.append(BreakdownEntry(component=path, stage=own.stage, contribution=contribution))
        for child, quantity_per_unit in edges.get(node, ()):
            walk(child, f"{path}/{child}", multiplier * Decimal(quantity_per_unit))

    walk(root_id, root_id, Decimal(1))
    root_score = node_scores.get(root_id)
    stage = root_score.stage if root_score is not None else select_stage(
        {s.stage for s in node_scores.values()} or {1}
    )
    return SustainabilityScore(
        subject=subject or f"supplier:{root_id}",
        stage=stage,
        value_tco2e=total,
        breakdown=tuple(breakdown),
        computed_at=computed_at,
    )


def _reject_cycles(root_id: str, edges: Mapping[str, Sequence[tuple[str, Decimal]]]) -> None:
    state: dict[str, int] = {}

    def visit(node: str, trail: list[str]) -> None:
        state[node] = 1
        trail.append(node)
        for child, _ in edges.get(node, ()):
            if state.get(child) == 1:
                cycle = trail[trail.index(child) :] + [child]
                raise ValidationError("supply graph has a cycle", cycle=cycle)
            if state.get(child, 0) == 0:
                visit(child, trail)
        trail.pop()
        state[node] = 2

    visit(root_id, [])


# -- risk alerts -------------------------------------------------------


def detect_risks(
    score_histories: Mapping[str, Sequence[SustainabilityScore]],
    shares: Sequence[ShareResult],
    thresholds: Thresholds,
) -> list[SustainabilityAlert]:
    """Threshold breaches on the latest score, jumps against the previous
    score, and single-source supplier dependencies."""
    alerts: list[SustainabilityAlert] = []
    for subject in sorted(score_histories):
        history = score_histories[subject]
        if not history:
            continue
        latest = history[-1]
        if latest.value_tco2e > thresholds.score_tco2e:
            severity = Severity.CRITICAL if latest.value_tco2e > 2 * thresholds.score_tco2e else Severity.WARN
            alerts.append(
                SustainabilityAlert(
                    kind=AlertKind.SCORE_THRESHOLD,
                    subject=subject,
                    severity=severity,
                    message=(
                        f"score {latest.value_tco2e} tCO2e exceeds threshold {thresholds.score_tco2e} tCO2e"
                    ),
                )
            )
        if len(history) >= 2:
            previous = history[-2]
            limit = previous.value_tco2e * (1 + thresholds.increase_fraction)
            if previous.value_tco2e >= 0 and latest.value_tco2e > limit:
                alerts.append(
                    SustainabilityAlert(
                        kind=AlertKind.SCORE_INCREASE,
                        subject=subject,
                        severity=Severity.WARN,
                        message=(
                            f"score rose from {previous.value_tco2e} to {latest.value_tco2e} tCO2e, "
                            f"beyond the +{thresholds.increase_fraction} fraction allowed"
                        ),
                    )
                )
    for share_result in shares:
        for supplier_id, share in sorted(share_result.shares.items()):
            if share > float(thresholds.dependency_fraction):
                severity = Severity.CRITICAL if share >= 0.999999999 else Severity.WARN
                group_label = ",".join(share_result.material_group_ids)
                alerts.append(
                    SustainabilityAlert(
                        kind=AlertKind.SINGLE_SOURCE_DEPENDENCY,
                        subject=f"supplier:{supplier_id}",
                        severity=severity,
                        message=(
                            f"supplier {supplier_id} holds share {share:.6f} of groups [{group_label}], "
                            f"above the {thresholds.dependency_fraction} dependency threshold"
                        ),
                    )
                )
    return alerts


# -- store-backed assembly ---------------------------------------------


def supplier_spend(store: Store, supplier_id: str, date_range: Optional[tuple[date, date]] = None) -> Cents:
    total = 0
    for order in store.list("purchase_order"):
        if order.supplier_id != supplier_id:
            continue
        if date_range and not (date_range[0] <= order.order_date <= date_range[1]):
            continue
        total += order.volume_eur
    return total


def get_factor(store: Store, scope: FactorScope, key: str) -> Optional[EmissionFactor]:
    return store.get("emission_factor", factor_id(scope, key))


def _product_factor(store: Store, material: Material) -> Optional[EmissionFactor]:
    factor = get_factor(store, FactorScope.PRODUCT, material.id)
    if factor is not None:
        return factor
    if material.database_pcf is not None:
        return EmissionFactor(
            id=factor_id(FactorScope.PRODUCT, material.id),
            scope=FactorScope.PRODUCT,
            key=material.id,
            value=material.database_pcf,
            unit=FactorUnit.TCO2E_PER_UNIT,
            source_name="material-master",
        )
    return None


def supplier_stage_inputs(
    store: Store, supplier: Supplier, date_range: Optional[tuple[date, date]] = None
) -> StageInputs:
    """A supplier subject scores on its corporate footprint: revenue-share
    allocation when the supplier reports one, sector factors otherwise."""
    spend = supplier_spend(store, supplier.id, date_range)
    return StageInputs(
        spend_with_supplier=spend,
        supplier_revenue=supplier.total_revenue,
        supplier_reported_ccf=supplier.reported_ccf,
        sector_factor=get_factor(store, FactorScope.SECTOR, supplier.sector_code),
    )


def score_supplier(
    store: Store,
    supplier_id: str,
    date_range: Optional[tuple[date, date]] = None,
    computed_at: Optional[datetime] = None,
) -> SustainabilityScore:
    supplier = store.require("supplier", supplier_id)
    inputs = supplier_stage_inputs(store, supplier, date_range)
    return compute_score(f"supplier:{supplier_id}", inputs, computed_at=computed_at)


def score_material(
    store: Store,
    material_id: str,
    quantity: Decimal = Decimal(1),
    supplier_id: Optional[str] = None,
    computed_at: Optional[datetime] = None,
) -> SustainabilityScore:
    """A material subject scores per-unit (or per `quantity`): product
    factors, upgraded to supplier-measured values when a supplier is given."""
    material = store.require("material", material_id)
    reported = None
    if supplier_id is not None:
        supplier = store.require("supplier", supplier_id)
        reported = supplier.reported_pcf_by_material.get(material_id)
    inputs = StageInputs(
        quantity=Decimal(quantity),
        product_factor=_product_factor(store, material),
        reported_pcf=reported,
    )
    return compute_score(f"material:{material_id}", inputs, computed_at=computed_at)


def score_rfq(store: Store, rfq: Rfq, computed_at: Optional[datetime] = None) -> SustainabilityScore:
    """An RfQ scores on the product footprint of what it buys when product
    data exists, falling back to spend-based stages; the sector lookup
    prefers the material's sector, then the supplier's."""
    material = store.require("material", rfq.material_id)
    supplier = store.get("supplier", rfq.supplier_id) if rfq.supplier_id else None
    spend = int(rfq.quantity * rfq.target_price)
    sector_code = material.sector_code or (supplier.sector_code if supplier else "")
    sector = get_factor(store, FactorScope.SECTOR, sector_code) if sector_code else None
    reported = supplier.reported_pcf_by_material.get(rfq.material_id) if supplier else None
    revenue = supplier.total_revenue if supplier else None
    spend_ok = revenue is not None and spend <= revenue
    inputs = StageInputs(
        spend_with_supplier=spend,
        supplier_revenue=revenue if spend_ok else None,
        supplier_reported_ccf=supplier.reported_ccf if (supplier and spend_ok) else None,
        sector_factor=sector,
        quantity=rfq.quantity,
        product_factor=_product_factor(store, material),
        reported_pcf=reported,
    )
    return compute_score(f"rfq:{rfq.id}", inputs, computed_at=computed_at)


def chain_graph(store: Store, root_id: str) -> dict[str, list[tuple[str, Decimal]]]:
    """Sub-supplier adjacency reachable from root_id; unresolved references
    and cycles are rejected before any aggregation."""
    suppliers = store.list("supplier")
    cycle = detect_cycle(suppliers)
    if cycle is not None:
        raise ValidationError("supplier graph has a cycle", cycle=cycle)
    by_id = {s.id: s for s in suppliers}
    if root_id not in by_id:
        raise NotFoundError(f"unknown supplier {root_id!r}", supplier=root_id)
    edges: dict[str, list[tuple[str, Decimal]]] = {}
    frontier = [root_id]
    seen = set()
    while frontier:
        node = frontier.pop()
        if node in seen:
            continue
        seen.add(node)
        links = by_id[node].sub_suppliers
        edges[node] = [(link.supplier_id, link.quantity_per_unit) for link in links]
        frontier.extend(link.supplier_id for link in links)
    return edges


def score_supplier_chain(
    store: Store,
    supplier_id: str,
    date_range: Optional[tuple[date, date]] = None,
    computed_at: Optional[datetime] = None,
) -> SustainabilityScore:
    edges = chain_graph(store, supplier_id)
    node_scores: dict[str, ChainNodeScore] = {}
    for node in edges:
        try:
            own = score_supplier(store, node, date_range)
        except StageUnavailable:
            continue
        node_scores[node] = ChainNodeScore(value_tco2e=own.value_tco2e, stage=own.stage)
    if not node_scores:
        raise StageUnavailable(f"no emission data for subject supplier:{supplier_id}", subject=supplier_id)
    return aggregate_chain(
        supplier_id, edges, node_scores, subject=f"supplier:{supplier_id}", computed_at=computed_at
    )


def suggest_alternatives(
    store: Store,
    material_group_id: str,
    current_supplier_id: str,
    min_rating: float = 0.0,
    rating_weights: Optional[Mapping[str, float]] = None,
) -> list[tuple[str, Optional[Decimal], Optional[float]]]:
    """Greener suppliers for a material group: everyone else offering a
    material in the group, rated at or above min_rating, lowest footprint
    first; suppliers without emission data rank after scored ones.

    Returns (supplier_id, score value or None, rating or None) tuples.
    """
    materials = store.materials_in_groups([material_group_id])
    offering: set[str] = set()
    for order in store.list("purchase_order"):
        if order.material_id in materials:
            offering.add(order.supplier_id)
    for rfq in store.list("rfq"):
        if rfq.material_id in materials and rfq.supplier_id:
            offering.add(rfq.supplier_id)
    for supplier in store.list("supplier"):
        if any(material_id in materials for material_id in supplier.reported_pcf_by_material):
            offering.add(supplier.id)
    offering.discard(current_supplier_id)

    weights = dict(rating_weights or {})
    results: list[tuple[str, Optional[Decimal], Optional[float]]] = []
    for supplier_id in sorted(offering):
        supplier = store.require("supplier", supplier_id)
        rating: Optional[float]
        try:
            rating = supplier_rating(supplier, weights).score if weights else None
        except ValidationError:
            rating = None
        if min_rating > 0 and (rating is None or rating < min_rating):
            continue
        try:
            value = score_supplier(store, supplier_id).value_tco2e
        except StageUnavailable:
            value = None
        results.append((supplier_id, value, rating))

    def sort_key(row: tuple[str, Optional[Decimal], Optional[float]]):
        supplier_id, value, rating = row
        return (
            value is None,  # scored suppliers first
            value if value is not None else Decimal(0),
            -(rating if rating is not None else -1),
            supplier_id,
        )

    results.sort(key=sort_key)
    return results
