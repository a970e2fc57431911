"""Import jobs: parse a silo payload, normalize rows into domain entities,
and upsert them idempotently into the store.

Per-record failures skip that record with a reason and keep going; an
unparseable payload aborts the whole job with the store untouched. Silo
columns are mapped onto canonical field names (camelCase, optionally
annotated with a money unit like volumeEur(kEUR)) before type conversion.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

from . import domain
from .errors import DpwError, ImportJobError, ValidationError
from .records import from_record, to_record
from .store import ENTITY_TYPES, Store
from .sustainability import EmissionFactor, factor_id
from .units import parse_date, parse_money, parse_quantity, parse_timestamp, utc_now


class SourceKind(str, Enum):
    PURCHASE_ORDERS_CSV = "PURCHASE_ORDERS_CSV"
    RFQS_JSONL = "RFQS_JSONL"
    SUPPLIERS_JSON = "SUPPLIERS_JSON"
    EMISSION_FACTORS_CSV = "EMISSION_FACTORS_CSV"
    NEWS_JSON = "NEWS_JSON"
    CONTRACTS_CSV = "CONTRACTS_CSV"
    AUCTIONS_JSON = "AUCTIONS_JSON"


@dataclass(frozen=True)
class SourceConfig:
    source_id: str
    kind: SourceKind
    location: str
    schedule: Optional[str] = None
    field_mapping: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.source_id:
            raise ValidationError("source needs a sourceId")
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if not self.location:
            raise ValidationError("source needs a location", source=self.source_id)
        object.__setattr__(self, "field_mapping", dict(self.field_mapping))


@dataclass(frozen=True)
class SkippedRecord:
    record_locator: str
    reason: str


@dataclass(frozen=True)
class ImportReport:
    source_id: str
    started: datetime
    finished: datetime
    inserted: int
    updated: int
    unchanged: int
    skipped: int
    skipped_reasons: tuple[SkippedRecord, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "skipped_reasons", tuple(self.skipped_reasons))
        if self.skipped != len(self.skipped_reasons):
            raise ValidationError("every skipped record needs a reason")
        if min(self.inserted, self.updated, self.unchanged, self.skipped) < 0:
            raise ValidationError("report counts must be >= 0")

    @property
    def total(self) -> int:
        return self.inserted + self.updated + self.unchanged + self.skipped


# -- field conversion --------------------------------------------------

_MONEY_FIELDS = frozenset({"volumeEur", "targetPrice", "totalRevenue", "price"})
_DECIMAL_FIELDS = frozenset({"quantity", "factorValue", "quantityPerUnit", "reportedCcf"})
_DATE_FIELDS = frozenset({"orderDate", "validFrom", "validTo"})
_TIMESTAMP_FIELDS = frozenset({"createdAt", "dueAt", "publishedAt"})

_ANNOTATION = re.compile(r"^(?P<name>[A-Za-z][A-Za-z0-9]*)(?:\((?P<unit>[^)]*)\))?$")


def _split_target(target: str) -> tuple[str, Optional[str]]:
    match = _ANNOTATION.match(target.strip())
    if not match:
        raise ValidationError(f"malformed mapping target {target!r}", target=target)
    return match.group("name"), match.group("unit")


def _convert(name: str, value: Any, unit: Optional[str]) -> Any:
    if name in _MONEY_FIELDS:
        return parse_money(value, unit or "EUR")
    if unit is not None:
        raise ValidationError(f"field {name} does not take a unit annotation", field=name, unit=unit)
    if name in _DECIMAL_FIELDS:
        return parse_quantity(value)
    if name in _DATE_FIELDS:
        return parse_date(value)
    if name in _TIMESTAMP_FIELDS:
        return parse_timestamp(value)
    return value


def _is_missing(value: Any) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


# -- per-kind builders -------------------------------------------------


def _decimal_map(raw: Any, label: str) -> dict[str, Decimal]:
    if _is_missing(raw):
        return {}
    if not isinstance(raw, dict):
        raise ValidationError(f"{label} must be an object")
    return {str(k): parse_quantity(v) for k, v in raw.items()}


def _build_purchase_order(v: dict[str, Any]) -> domain.PurchaseOrder:
    return domain.PurchaseOrder(
        id=str(v["id"]),
        supplier_id=str(v["supplierId"]),
        material_id=str(v["materialId"]),
        volume_eur=v["volumeEur"],
        quantity=v["quantity"],
        order_date=v["orderDate"],
        department=str(v["department"]),
        owner_user_id=str(v["ownerUserId"]),
    )


def _build_rfq(v: dict[str, Any]) -> domain.Rfq:
    return domain.Rfq(
        id=str(v["id"]),
        owner_user_id=str(v["ownerUserId"]),
        department=str(v["department"]),
        material_id=str(v["materialId"]),
        quantity=v["quantity"],
        target_price=v["targetPrice"],
        status=domain.RfqStatus(str(v["status"])),
        created_at=v["createdAt"],
        due_at=v["dueAt"],
        supplier_id=str(v["supplierId"]) if not _is_missing(v.get("supplierId")) else None,
    )


def _build_supplier(v: dict[str, Any]) -> domain.Supplier:
    links = []
    for index, raw in enumerate(v.get("subSuppliers") or ()):
        if not isinstance(raw, dict):
            raise ValidationError(f"subSuppliers[{index}] must be an object")
        links.append(
            domain.SubSupplierLink(
                supplier_id=str(raw.get("supplierId", "")),
                material_id=str(raw.get("materialId", "")),
                quantity_per_unit=parse_quantity(raw.get("quantityPerUnit", "0")),
            )
        )
    characteristics = v.get("characteristics") or {}
    if not isinstance(characteristics, dict):
        raise ValidationError("characteristics must be an object")
    return domain.Supplier(
        id=str(v["id"]),
        name=str(v["name"]),
        sector_code=str(v["sectorCode"]),
        total_revenue=v["totalRevenue"],
        reported_ccf=parse_quantity(v["reportedCcf"]) if not _is_missing(v.get("reportedCcf")) else None,
        reported_pcf_by_material=_decimal_map(v.get("reportedPcfByMaterial"), "reportedPcfByMaterial"),
        characteristics={str(k): float(val) for k, val in characteristics.items()},
        sub_suppliers=tuple(links),
    )


def _build_emission_factor(v: dict[str, Any]) -> EmissionFactor:
    scope = str(v["scope"]).strip().upper()
    key = str(v["key"]).strip()
    return EmissionFactor(
        id=factor_id(scope, key),
        scope=scope,
        key=key,
        value=parse_quantity(v["factorValue"]),
        unit=str(v["factorUnit"]).strip(),
        source_name=str(v.get("sourceName") or ""),
    )


def _build_news_item(v: dict[str, Any]) -> domain.NewsItem:
    topics = v.get("topics") or ()
    if isinstance(topics, str):
        topics = [t for t in (part.strip() for part in topics.split(";")) if t]
    return domain.NewsItem(
        id=str(v["id"]),
        source_id=str(v["sourceId"]),
        title=str(v["title"]),
        body=str(v.get("body") or ""),
        published_at=v["publishedAt"],
        topics=frozenset(str(t) for t in topics),
    )


def _build_contract(v: dict[str, Any]) -> domain.Contract:
    return domain.Contract(
        id=str(v["id"]),
        supplier_id=str(v["supplierId"]),
        owner_user_id=str(v["ownerUserId"]),
        valid_from=v["validFrom"],
        valid_to=v["validTo"],
    )


def _build_auction(v: dict[str, Any]) -> domain.Auction:
    bids = []
    for index, raw in enumerate(v.get("supplierBids") or ()):
        if not isinstance(raw, dict):
            raise ValidationError(f"supplierBids[{index}] must be an object")
        bids.append(
            domain.Bid(supplier_id=str(raw.get("supplierId", "")), price=parse_money(raw.get("price", 0), "EUR"))
        )
    return domain.Auction(
        id=str(v["id"]),
        owner_user_id=str(v["ownerUserId"]),
        status=domain.AuctionStatus(str(v["status"])),
        supplier_bids=tuple(bids),
    )


@dataclass(frozen=True)
class _KindSpec:
    entity_kind: str
    mandatory: tuple[str, ...]
    build: Callable[[dict[str, Any]], Any]


_SPECS: dict[SourceKind, _KindSpec] = {
    SourceKind.PURCHASE_ORDERS_CSV: _KindSpec(
        "purchase_order",
        ("id", "supplierId", "materialId", "volumeEur", "quantity", "orderDate", "department", "ownerUserId"),
        _build_purchase_order,
    ),
    SourceKind.RFQS_JSONL: _KindSpec(
        "rfq",
        ("id", "ownerUserId", "department", "materialId", "quantity", "targetPrice", "status", "createdAt", "dueAt"),
        _build_rfq,
    ),
    SourceKind.SUPPLIERS_JSON: _KindSpec(
        "supplier", ("id", "name", "sectorCode", "totalRevenue"), _build_supplier
    ),
    SourceKind.EMISSION_FACTORS_CSV: _KindSpec(
        "emission_factor", ("scope", "key", "factorValue", "factorUnit"), _build_emission_factor
    ),
    SourceKind.NEWS_JSON: _KindSpec(
        "news_item", ("id", "sourceId", "title", "publishedAt"), _build_news_item
    ),
    SourceKind.CONTRACTS_CSV: _KindSpec(
        "contract", ("id", "supplierId", "ownerUserId", "validFrom", "validTo"), _build_contract
    ),
    SourceKind.AUCTIONS_JSON: _KindSpec("auction", ("id", "ownerUserId", "status"), _build_auction),
}


def normalize_record(raw: Mapping[str, Any], mapping: Mapping[str, str], kind: SourceKind) -> Any:
    """Rename silo columns to canonical fields, convert units and types,
    and build a validated entity. Columns not named in the mapping pass
    through unchanged, so canonical payloads need no mapping at all."""
    spec = _SPECS[SourceKind(kind)]
    values: dict[str, Any] = {}
    for column, value in raw.items():
        if column is None:
            raise ValidationError("row has more fields than the header")
        target = mapping.get(column, column)
        name, unit = _split_target(target)
        if _is_missing(value):
            continue
        values[name] = _convert(name, value, unit)
    for required in spec.mandatory:
        if required not in values:
            raise ValidationError(f"missing field {required}", field=required)
    return spec.build(values)


# -- payload parsing ---------------------------------------------------


def _decode_text(payload: bytes) -> str:
    try:
        return payload.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ImportJobError(f"payload is not UTF-8: {exc}") from None


def _parse_csv(payload: bytes) -> list[tuple[str, dict[str, Any]]]:
    text = _decode_text(payload)
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ImportJobError("empty payload: a header row is required")
    try:
        return [(f"row {index}", dict(row)) for index, row in enumerate(reader, start=1)]
    except csv.Error as exc:
        raise ImportJobError(f"malformed CSV: {exc}") from None


def _parse_jsonl(payload: bytes) -> list[tuple[str, dict[str, Any]]]:
    rows = []
    for line_number, line in enumerate(_decode_text(payload).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            value = json.loads(line, parse_float=Decimal)
        except json.JSONDecodeError as exc:
            raise ImportJobError(f"line {line_number} is not valid JSON: {exc.msg}") from None
        if not isinstance(value, dict):
            raise ImportJobError(f"line {line_number} must be a JSON object")
        rows.append((f"line {line_number}", value))
    return rows


def _parse_json_array(payload: bytes) -> list[tuple[str, dict[str, Any]]]:
    try:
        value = json.loads(_decode_text(payload), parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ImportJobError(f"payload is not valid JSON: {exc.msg}") from None
    if not isinstance(value, list):
        raise ImportJobError("payload must be a JSON array of records")
    rows = []
    for index, item in enumerate(value, start=1):
        if not isinstance(item, dict):
            raise ImportJobError(f"item {index} must be a JSON object")
        rows.append((f"item {index}", item))
    return rows


_PARSERS: dict[SourceKind, Callable[[bytes], list[tuple[str, dict[str, Any]]]]] = {
    SourceKind.PURCHASE_ORDERS_CSV: _parse_csv,
    SourceKind.RFQS_JSONL: _parse_jsonl,
    SourceKind.SUPPLIERS_JSON: _parse_json_array,
    SourceKind.EMISSION_FACTORS_CSV: _parse_csv,
    SourceKind.NEWS_JSON: _parse_json_array,
    SourceKind.CONTRACTS_CSV: _parse_csv,
    SourceKind.AUCTIONS_JSON: _parse_json_array,
}


# -- cycle guard for supplier imports ----------------------------------


def _find_cycle(graph: Mapping[str, Sequence[str]]) -> Optional[list[str]]:
    """Cycle witness in an id adjacency map; ids that are referenced but not
    present are leaves (they may arrive in a later import)."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {node: WHITE for node in graph}

    def visit(node: str, path: list[str]) -> Optional[list[str]]:
        color[node] = GREY
        path.append(node)
        for child in graph.get(node, ()):
            if child not in graph:
                continue
            if color[child] == GREY:
                return path[path.index(child) :] + [child]
            if color[child] == WHITE:
                found = visit(child, path)
                if found is not None:
                    return found
        path.pop()
        color[node] = BLACK
        return None

    for node in sorted(graph):
        if color[node] == WHITE:
            witness = visit(node, [])
            if witness is not None:
                return witness
    return None


def _cyclic_supplier_ids(store: Store, new_by_id: Mapping[str, domain.Supplier]) -> dict[str, str]:
    """Ids from this payload that would make the sub-supplier graph cyclic,
    mapped to a reason naming the cycle. Rejected ids fall back to their
    previously stored version (or stay absent)."""
    existing = {s.id: s for s in store.list("supplier")}
    overlay: dict[str, domain.Supplier] = {**existing, **new_by_id}
    rejected: dict[str, str] = {}
    while True:
        graph = {sid: [link.supplier_id for link in s.sub_suppliers] for sid, s in overlay.items()}
        cycle = _find_cycle(graph)
        if cycle is None:
            return rejected
        offenders = [sid for sid in dict.fromkeys(cycle) if sid in new_by_id and sid not in rejected]
        if not offenders:
            return rejected  # cycle predates this payload; nothing here to refuse
        reason = "sub-supplier graph would become cyclic: " + " -> ".join(cycle)
        for sid in offenders:
            rejected[sid] = reason
            if sid in existing:
                overlay[sid] = existing[sid]
            else:
                del overlay[sid]


# -- the job -----------------------------------------------------------


def run_import_job(
    store: Store,
    config: SourceConfig,
    payload: bytes,
    clock: Callable[[], datetime] = utc_now,
) -> ImportReport:
    """Parse, normalize, and upsert one silo payload.

    The store lock is held across the batch so concurrent readers see
    either none or all of the import. Identical payloads re-imported are
    counted entirely as unchanged.
    """
    started = clock()
    rows = _PARSERS[SourceKind(config.kind)](payload)
    spec = _SPECS[SourceKind(config.kind)]

    inserted = updated = unchanged = 0
    skipped_reasons: list[SkippedRecord] = []
    normalized: list[tuple[str, Any]] = []
    for locator, raw in rows:
        try:
            normalized.append((locator, normalize_record(raw, config.field_mapping, config.kind)))
        except DpwError as exc:
            skipped_reasons.append(SkippedRecord(locator, exc.message))

    rejected_cycles: dict[str, str] = {}
    if spec.entity_kind == "supplier":
        last_version = {entity.id: entity for _, entity in normalized}
        rejected_cycles = _cyclic_supplier_ids(store, last_version)

    with store.lock:
        for locator, entity in normalized:
            if entity.id in rejected_cycles:
                skipped_reasons.append(SkippedRecord(locator, rejected_cycles[entity.id]))
                continue
            status = store.upsert(spec.entity_kind, entity, source_id=config.source_id)
            if status == "inserted":
                inserted += 1
            elif status == "updated":
                updated += 1
            elif status == "unchanged":
                unchanged += 1
            else:
                skipped_reasons.append(
                    SkippedRecord(locator, "a higher-priority source already owns this record")
                )

    return ImportReport(
        source_id=config.source_id,
        started=started,
        finished=clock(),
        inserted=inserted,
        updated=updated,
        unchanged=unchanged,
        skipped=len(skipped_reasons),
        skipped_reasons=tuple(skipped_reasons),
    )


def import_source(
    store: Store,
    config: SourceConfig,
    base_dir: Optional[Path] = None,
    clock: Callable[[], datetime] = utc_now,
) -> ImportReport:
    """Read the configured file and run the job, recording the report."""
    location = Path(config.location)
    if not location.is_absolute() and base_dir is not None:
        location = base_dir / location
    try:
        payload = location.read_bytes()
    except OSError as exc:
        raise ImportJobError(
            f"cannot read source {config.source_id}: {exc}", source=config.source_id, io=True
        ) from None
    report = run_import_job(store, config, payload, clock=clock)
    store.append_operational("import_report", to_record(report))
    return report


# -- master-data seeding -----------------------------------------------

_MASTER_FILES: tuple[tuple[str, str], ...] = (
    ("material_groups.json", "material_group"),
    ("materials.json", "material"),
    ("users.json", "user"),
    ("processes.json", "process"),
    ("tasks.json", "task"),
)


def seed_master_data(store: Store, fixtures_dir: Path) -> dict[str, int]:
    """Load master records (snake_case record form) shipped with the
    fixtures; these are owned by the operator, not by any silo."""
    counts: dict[str, int] = {}
    master_dir = Path(fixtures_dir) / "master"
    for file_name, kind in _MASTER_FILES:
        path = master_dir / file_name
        if not path.exists():
            continue
        try:
            records = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ImportJobError(f"{file_name} is not valid JSON: {exc.msg}", file=file_name) from None
        if not isinstance(records, list):
            raise ImportJobError(f"{file_name} must hold a JSON array", file=file_name)
        loaded = 0
        for record in records:
            entity = from_record(record, ENTITY_TYPES[kind])
            store.upsert(kind, entity)
            loaded += 1
        counts[kind] = loaded
    if not counts:
        raise ImportJobError(f"no master data found under {master_dir}", io=True)
    return counts
