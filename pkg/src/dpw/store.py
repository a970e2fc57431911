"""The single database behind every engine.

An embedded, file-persisted entity store: one dict per entity kind, a
single writer lock, a monotonically increasing revision, and provenance
tracking so imports from lower-priority sources never clobber
higher-priority data. Queries see committed state only; entities are
frozen dataclasses, so handing them out is snapshot-safe.

The state hash covers domain state (entities, favorites, layouts,
suggestions, provenance). Operational telemetry (import reports, bot
runs, score snapshots) is deliberately excluded: reports carry wall-clock
timestamps, and "unchanged data" must hash identically across re-imports
and dry runs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

from . import domain
from .errors import NotFoundError, ValidationError
from .records import canonical_json, from_record, to_record

ENTITY_TYPES: dict[str, type] = {
    "supplier": domain.Supplier,
    "material_group": domain.MaterialGroup,
    "material": domain.Material,
    "rfq": domain.Rfq,
    "auction": domain.Auction,
    "purchase_order": domain.PurchaseOrder,
    "contract": domain.Contract,
    "user": domain.User,
    "process": domain.ProcessInstance,
    "task": domain.Task,
    "news_item": domain.NewsItem,
    "suggestion": domain.Suggestion,
}

# Operational kinds are persisted but kept out of the state hash.
OPERATIONAL_KINDS = ("import_report", "bot_run", "score_snapshot")
DOMAIN_HASH_KINDS = tuple(sorted(ENTITY_TYPES)) + ("emission_factor",)


class Focus(str, Enum):
    USER = "USER"
    SUPPLIER = "SUPPLIER"
    MATERIAL_GROUP = "MATERIAL_GROUP"


class ViewMode(str, Enum):
    USER_VIEW = "USER_VIEW"
    TEAM_VIEW = "TEAM_VIEW"
    ALIAS_VIEW = "ALIAS_VIEW"


@dataclass(frozen=True)
class Scope:
    focus: Focus
    focus_id: str
    view_mode: ViewMode = ViewMode.USER_VIEW
    alias_user_id: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "focus", Focus(self.focus))
        object.__setattr__(self, "view_mode", ViewMode(self.view_mode))
        if self.view_mode is ViewMode.ALIAS_VIEW:
            if not self.alias_user_id:
                raise ValidationError("ALIAS_VIEW requires aliasUserId")
        elif self.alias_user_id is not None:
            raise ValidationError("aliasUserId is only valid with ALIAS_VIEW")


# The built-in dashboard: the open-auctions widget next to the total
# purchase-order volume widget.
DEFAULT_LAYOUT = domain.WidgetLayout(
    entries=(
        domain.LayoutEntry("supplier_auctions", 0, 0, 6, 4),
        domain.LayoutEntry("total_po_volume", 6, 0, 6, 4),
    )
)

# kind -> (owner field getter, supplier link getter, material id getter, sort timestamp getter)
_OWNERS: dict[str, Callable[[Any], str]] = {
    "rfq": lambda e: e.owner_user_id,
    "auction": lambda e: e.owner_user_id,
    "purchase_order": lambda e: e.owner_user_id,
    "contract": lambda e: e.owner_user_id,
    "task": lambda e: e.assignee_user_id,
}

_SUPPLIER_LINKS: dict[str, Callable[[Any], frozenset[str]]] = {
    "rfq": lambda e: frozenset({e.supplier_id} if e.supplier_id else ()),
    "auction": lambda e: frozenset(bid.supplier_id for bid in e.supplier_bids),
    "purchase_order": lambda e: frozenset({e.supplier_id}),
    "contract": lambda e: frozenset({e.supplier_id}),
    "task": lambda e: frozenset(),
}

_MATERIALS: dict[str, Callable[[Any], Optional[str]]] = {
    "rfq": lambda e: e.material_id,
    "auction": lambda e: None,
    "purchase_order": lambda e: e.material_id,
    "contract": lambda e: None,
    "task": lambda e: None,
}

_SORT_KEYS: dict[str, Callable[[Any], str]] = {
    "rfq": lambda e: e.created_at.isoformat(),
    "auction": lambda e: "",
    "purchase_order": lambda e: e.order_date.isoformat(),
    "contract": lambda e: e.valid_from.isoformat(),
    "task": lambda e: "",
}

_SEARCH_FIELDS: dict[str, tuple[str, ...]] = {
    "supplier": ("name",),
    "material_group": ("name",),
    "material": ("name",),
    "user": ("name",),
    "news_item": ("title",),
    "task": ("title", "id"),
    "rfq": ("id", "department"),
    "auction": ("id",),
    "purchase_order": ("id", "department"),
    "contract": ("id",),
}


class Store:
    def __init__(self, source_priority: Sequence[str] = (), default_layout: domain.WidgetLayout = DEFAULT_LAYOUT):
        self._lock = threading.RLock()
        self._kinds: dict[str, dict[str, Any]] = {kind: {} for kind in ENTITY_TYPES}
        self._kinds["emission_factor"] = {}
        self._operational: dict[str, list[dict[str, Any]]] = {
            "import_report": [],
            "bot_run": [],
            "score_snapshot": [],
        }
        self._provenance: dict[str, str] = {}  # "kind:id" -> sourceId
        self._revision = 0
        self.source_priority = list(source_priority)
        self.default_layout = default_layout

    # -- basic access -------------------------------------------------

    @property
    def revision(self) -> int:
        return self._revision

    @property
    def lock(self) -> threading.RLock:
        """Held by import jobs for their whole batch so readers never see a
        half-applied import."""
        return self._lock

    def get(self, kind: str, entity_id: str) -> Optional[Any]:
        return self._table(kind).get(entity_id)

    def require(self, kind: str, entity_id: str) -> Any:
        entity = self.get(kind, entity_id)
        if entity is None:
            raise NotFoundError(f"unknown {kind} {entity_id!r}", kind=kind, id=entity_id)
        return entity

    def list(self, kind: str) -> list[Any]:
        table = self._table(kind)
        return [table[key] for key in sorted(table)]

    def _table(self, kind: str) -> dict[str, Any]:
        if kind not in self._kinds:
            raise ValidationError(f"unknown entity kind {kind!r}", kind=kind)
        return self._kinds[kind]

    def _priority(self, source_id: Optional[str]) -> int:
        if source_id is None:
            return -1  # direct writes (seed, bot apply) outrank imports
        try:
            return self.source_priority.index(source_id)
        except ValueError:
            return len(self.source_priority)

    # -- writes -------------------------------------------------------

    def upsert(self, kind: str, entity: Any, source_id: Optional[str] = None) -> str:
        """Insert or update one entity; returns inserted/updated/unchanged/blocked.

        blocked: a higher-priority source already owns this record, so the
        write is refused (cross-silo conflict rule).
        """
        with self._lock:
            table = self._table(kind)
            key = f"{kind}:{entity.id}"
            existing = table.get(entity.id)
            if existing is not None:
                current_owner = self._provenance.get(key)
                if self._priority(source_id) > self._priority(current_owner):
                    return "blocked"
                if existing == entity:
                    if source_id is not None and current_owner != source_id:
                        self._provenance[key] = source_id
                        self._revision += 1
                    return "unchanged"
            table[entity.id] = entity
            if source_id is None:
                self._provenance.pop(key, None)
            else:
                self._provenance[key] = source_id
            self._revision += 1
            return "inserted" if existing is None else "updated"

    def commit_batch(self, changes: Iterable[tuple[str, Any]]) -> None:
        """Apply several upserts as one all-or-nothing step (entities are
        validated at construction, so by the time they reach here the batch
        can only succeed)."""
        with self._lock:
            for kind, entity in changes:
                self._table(kind)[entity.id] = entity
                self._provenance.pop(f"{kind}:{entity.id}", None)
            self._revision += 1

    def append_operational(self, kind: str, record: dict[str, Any]) -> None:
        with self._lock:
            self._operational[kind].append(record)

    def list_operational(self, kind: str) -> list[dict[str, Any]]:
        return list(self._operational[kind])

    def update_operational(self, kind: str, index: int, record: dict[str, Any]) -> None:
        with self._lock:
            self._operational[kind][index] = record

    # -- scoped queries -----------------------------------------------

    def team_members(self, user_id: str) -> frozenset[str]:
        user = self.require("user", user_id)
        return frozenset(u.id for u in self._kinds["user"].values() if u.team_id == user.team_id)

    def group_with_descendants(self, group_id: str) -> frozenset[str]:
        self.require("material_group", group_id)
        children: dict[str, list[str]] = {}
        for group in self._kinds["material_group"].values():
            if group.parent_id:
                children.setdefault(group.parent_id, []).append(group.id)
        result, frontier = {group_id}, [group_id]
        while frontier:
            node = frontier.pop()
            for child in children.get(node, ()):
                if child not in result:
                    result.add(child)
                    frontier.append(child)
        return frozenset(result)

    def materials_in_groups(self, group_ids: Iterable[str]) -> frozenset[str]:
        groups: set[str] = set()
        for group_id in group_ids:
            groups |= self.group_with_descendants(group_id)
        return frozenset(m.id for m in self._kinds["material"].values() if m.material_group_id in groups)

    def query_scoped(
        self,
        requester_id: str,
        scope: Scope,
        entity_kind: str,
        filter_text: Optional[str] = None,
        search: Optional[str] = None,
    ) -> list[Any]:
        """Entities of one kind visible under a scope, ordered by creation
        timestamp then id.

        USER_VIEW sees the requester's own records, TEAM_VIEW widens
        ownership to the whole team, ALIAS_VIEW evaluates exactly as the
        aliased user would see it.
        """
        if entity_kind not in _OWNERS:
            raise ValidationError(f"entity kind {entity_kind!r} is not scope-queryable", kind=entity_kind)
        self.require("user", requester_id)

        if scope.view_mode is ViewMode.ALIAS_VIEW:
            effective_user = scope.alias_user_id or ""
            self.require("user", effective_user)
            owners = frozenset({effective_user})
        elif scope.view_mode is ViewMode.TEAM_VIEW:
            owners = self.team_members(requester_id)
        else:
            owners = frozenset({requester_id})

        if scope.focus is Focus.USER:
            self.require("user", scope.focus_id)
            candidates = self.list(entity_kind)
        elif scope.focus is Focus.SUPPLIER:
            self.require("supplier", scope.focus_id)
            link_of = _SUPPLIER_LINKS[entity_kind]
            candidates = [e for e in self.list(entity_kind) if scope.focus_id in link_of(e)]
        else:
            materials = self.materials_in_groups([scope.focus_id])
            material_of = _MATERIALS[entity_kind]
            candidates = [e for e in self.list(entity_kind) if material_of(e) in materials]

        owner_of = _OWNERS[entity_kind]
        rows = [e for e in candidates if owner_of(e) in owners]
        rows = [e for e in rows if _matches(entity_kind, e, filter_text, search)]
        sort_key = _SORT_KEYS[entity_kind]
        rows.sort(key=lambda e: (sort_key(e), e.id))
        return rows

    # -- favorites ----------------------------------------------------

    def known_news_sources(self) -> frozenset[str]:
        return frozenset(item.source_id for item in self._kinds["news_item"].values())

    def resolve_subject(self, subject_ref: str) -> None:
        """Favorites may point at suppliers, news items, news sources, or
        free-form links; anything else, or a dangling id, is rejected."""
        if ":" not in subject_ref:
            raise ValidationError(f"subject ref {subject_ref!r} must look like kind:id", ref=subject_ref)
        kind, _, ref_id = subject_ref.partition(":")
        if kind == "supplier":
            self.require("supplier", ref_id)
        elif kind == "news":
            self.require("news_item", ref_id)
        elif kind == "source":
            if ref_id not in self.known_news_sources():
                raise NotFoundError(f"unknown news source {ref_id!r}", source=ref_id)
        elif kind == "link":
            if not ref_id:
                raise ValidationError("link favorite needs a target", ref=subject_ref)
        else:
            raise ValidationError(f"unknown favorite kind {kind!r}", ref=subject_ref)

    def set_favorite(self, user_id: str, subject_ref: str, flag: bool) -> frozenset[str]:
        with self._lock:
            user = self.require("user", user_id)
            self.resolve_subject(subject_ref)
            favorites = set(user.favorites)
            if flag:
                favorites.add(subject_ref)
            else:
                favorites.discard(subject_ref)
            updated = domain.User(
                id=user.id,
                name=user.name,
                team_id=user.team_id,
                favorites=frozenset(favorites),
                reading_history=user.reading_history,
                layout=user.layout,
            )
            if updated != user:
                self._kinds["user"][user.id] = updated
                self._revision += 1
            return updated.favorites

    def replace_user(self, user: domain.User) -> None:
        with self._lock:
            self.require("user", user.id)
            self._kinds["user"][user.id] = user
            self._revision += 1

    # -- layouts ------------------------------------------------------

    def save_layout(self, user_id: str, layout: domain.WidgetLayout) -> domain.WidgetLayout:
        with self._lock:
            user = self.require("user", user_id)
            updated = domain.User(
                id=user.id,
                name=user.name,
                team_id=user.team_id,
                favorites=user.favorites,
                reading_history=user.reading_history,
                layout=layout,
            )
            self._kinds["user"][user.id] = updated
            self._revision += 1
            return layout

    def get_layout(self, user_id: str) -> domain.WidgetLayout:
        user = self.require("user", user_id)
        return user.layout if user.layout is not None else self.default_layout

    # -- persistence and hashing --------------------------------------

    def domain_state(self) -> dict[str, Any]:
        state: dict[str, Any] = {}
        for kind in DOMAIN_HASH_KINDS:
            table = self._kinds[kind]
            state[kind] = {entity_id: _record_for(kind, table[entity_id]) for entity_id in sorted(table)}
        state["provenance"] = dict(sorted(self._provenance.items()))
        return state

    def state_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.domain_state()).encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        payload = {
            "state": self.domain_state(),
            "operational": self._operational,
            "sourcePriority": self.source_priority,
        }
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(canonical_json(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, default_layout: domain.WidgetLayout = DEFAULT_LAYOUT) -> "Store":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        store = cls(source_priority=payload.get("sourcePriority", ()), default_layout=default_layout)
        state = payload["state"]
        for kind in DOMAIN_HASH_KINDS:
            for entity_id, record in state.get(kind, {}).items():
                store._kinds[kind][entity_id] = _entity_for(kind, record)
        store._provenance = dict(state.get("provenance", {}))
        for op_kind, rows in payload.get("operational", {}).items():
            store._operational[op_kind] = list(rows)
        return store


def _record_for(kind: str, entity: Any) -> dict[str, Any]:
    if kind == "emission_factor":
        return dict(entity) if isinstance(entity, dict) else to_record(entity)
    return to_record(entity)


def _entity_for(kind: str, record: dict[str, Any]) -> Any:
    if kind == "emission_factor":
        from .sustainability import EmissionFactor

        return from_record(record, EmissionFactor)
    return from_record(record, ENTITY_TYPES[kind])


def _matches(kind: str, entity: Any, filter_text: Optional[str], search: Optional[str]) -> bool:
    record = to_record(entity)
    if filter_text:
        for clause in filter_text.split(","):
            clause = clause.strip()
            if not clause:
                continue
            if "=" not in clause:
                raise ValidationError(f"malformed filter clause {clause!r}", clause=clause)
            field_name, _, wanted = clause.partition("=")
            field_name = field_name.strip()
            if field_name not in record:
                raise ValidationError(f"unknown filter field {field_name!r}", field=field_name, kind=kind)
            if str(record[field_name]) != wanted.strip():
                return False
    if search:
        needle = search.lower()
        haystacks = [str(record.get(f, "")) for f in _SEARCH_FIELDS.get(kind, ("id",))]
        if not any(needle in hay.lower() for hay in haystacks):
            return False
    return True


def export_table(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> bytes:
    """Render rows as RFC-4180 CSV bytes: header in column order, one line
    per row, deterministic for identical input."""
    for row in rows:
        for column in columns:
            if column not in row:
                raise ValidationError(f"unknown column {column!r}", column=column)
    buffer = io.StringIO()
    writer = csv.writer(buffer, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row[c] is None else str(row[c]) for c in columns])
    return buffer.getvalue().encode("utf-8")
