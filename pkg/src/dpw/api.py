"""HTTP JSON API over the engines.

Responses are rendered through one canonical JSON encoder (sorted keys,
fixed separators), so a fixed store revision plus a fixed request yields
byte-identical bytes. Authentication is a stub token issuer behind the
same one-function boundary a real SSO integration would use. Errors all
share the {code, message, details} shape with stable code strings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Any, Callable, Mapping, Optional

from fastapi import Body, FastAPI, Header, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import Response

from . import analytics, domain, news, sustainability
from .bots import BotEngine
from .config import AppConfig, default_config
from .errors import AuthenticationError, DpwError, NotFoundError, ValidationError
from .records import camelize, canonical_json, encode_value, from_record
from .store import Focus, Scope, Store, ViewMode, export_table
from .units import parse_date, utc_now

_STATUS_BY_CODE = {
    "validation_error": 400,
    "auth_error": 401,
    "not_found": 404,
    "conflict": 409,
    "stage_unavailable": 422,
    "import_error": 400,
    "error": 500,
}


def payload_for(entity: Any) -> Any:
    return camelize(encode_value(entity))


def _json(payload: Any, status_code: int = 200) -> Response:
    return Response(
        content=canonical_json(payload),
        status_code=status_code,
        media_type="application/json",
    )


def _page(rows: list, limit: Optional[int], offset: int) -> list:
    if offset:
        rows = rows[offset:]
    if limit is not None:
        rows = rows[:limit]
    return rows


@dataclass(frozen=True)
class Session:
    token: str
    user_id: str
    issued_at: datetime
    expires_at: datetime


# -- widget registry ---------------------------------------------------


@dataclass(frozen=True)
class WidgetQuery:
    scope: Scope
    requester_id: str
    filter_text: Optional[str]
    search: Optional[str]
    date_from: Optional[date]
    date_to: Optional[date]
    bucketing: analytics.Bucketing
    horizon: int
    forecast_method: analytics.ForecastMethod


@dataclass(frozen=True)
class WidgetSpec:
    widget_id: str
    title: str
    default_view: str  # TABLE | CHART
    columns: tuple[str, ...]
    build: Callable[["AppState", WidgetQuery], list[dict[str, Any]]]


def _po_range(state: "AppState", query: WidgetQuery) -> Optional[tuple[date, date]]:
    if query.date_from and query.date_to:
        return (query.date_from, query.date_to)
    return analytics.default_po_range(state.store, query.requester_id, query.scope)


def _build_total_po_volume(state: "AppState", query: WidgetQuery) -> list[dict[str, Any]]:
    date_range = _po_range(state, query)
    if date_range is None:
        return []
    series = analytics.total_po_volume(
        state.store, query.requester_id, query.scope, date_range, query.bucketing
    )
    return [{"periodStart": day.isoformat(), "volumeEur": value} for day, value in series.points]


def _build_po_volume_forecast(state: "AppState", query: WidgetQuery) -> list[dict[str, Any]]:
    date_range = _po_range(state, query)
    if date_range is None:
        return []
    series = analytics.total_po_volume(
        state.store, query.requester_id, query.scope, date_range, query.bucketing
    )
    forecast = analytics.forecast_volume(
        series,
        horizon=query.horizon,
        method=query.forecast_method,
        window=state.config.paas.ma_window,
        alpha=state.config.paas.es_alpha,
    )
    return [{"periodStart": day.isoformat(), "forecastEur": value} for day, value in forecast]


def _build_supplier_rfqs(state: "AppState", query: WidgetQuery) -> list[dict[str, Any]]:
    rows = state.store.query_scoped(query.requester_id, query.scope, "rfq", query.filter_text, query.search)
    return [payload_for(row) for row in rows]


def _build_supplier_auctions(state: "AppState", query: WidgetQuery) -> list[dict[str, Any]]:
    rows = state.store.query_scoped(
        query.requester_id, query.scope, "auction", query.filter_text, query.search
    )
    out = []
    for auction in rows:
        best = min((bid.price for bid in auction.supplier_bids), default=None)
        out.append(
            {
                "id": auction.id,
                "ownerUserId": auction.owner_user_id,
                "status": auction.status.value,
                "bidCount": len(auction.supplier_bids),
                "bestBidPrice": best,
            }
        )
    return out


def _build_material_group_share(state: "AppState", query: WidgetQuery) -> list[dict[str, Any]]:
    if query.scope.focus is not Focus.MATERIAL_GROUP:
        raise ValidationError("this widget needs focus=MATERIAL_GROUP", widget="material_group_share")
    date_range = (query.date_from, query.date_to) if query.date_from and query.date_to else None
    result = analytics.material_group_share(state.store, [query.scope.focus_id], date_range)
    return [{"supplierId": supplier, "share": share} for supplier, share in sorted(result.shares.items())]


WIDGETS: dict[str, WidgetSpec] = {
    spec.widget_id: spec
    for spec in (
        WidgetSpec(
            "total_po_volume",
            "Total Purchase Order Volume",
            "CHART",
            ("periodStart", "volumeEur"),
            _build_total_po_volume,
        ),
        WidgetSpec(
            "po_volume_forecast",
            "Purchase Volume Forecast",
            "CHART",
            ("periodStart", "forecastEur"),
            _build_po_volume_forecast,
        ),
        WidgetSpec(
            "supplier_rfqs",
            "Supplier RfQs",
            "TABLE",
            (
                "id",
                "department",
                "materialId",
                "quantity",
                "targetPrice",
                "status",
                "createdAt",
                "dueAt",
                "supplierId",
            ),
            _build_supplier_rfqs,
        ),
        WidgetSpec(
            "supplier_auctions",
            "Supplier Auctions",
            "TABLE",
            ("id", "ownerUserId", "status", "bidCount", "bestBidPrice"),
            _build_supplier_auctions,
        ),
        WidgetSpec(
            "material_group_share",
            "Material Group Share",
            "CHART",
            ("supplierId", "share"),
            _build_material_group_share,
        ),
    )
}


# -- application state -------------------------------------------------


class AppState:
    def __init__(self, store: Store, config: AppConfig, clock: Callable[[], datetime]) -> None:
        self.store = store
        self.config = config
        self.clock = clock
        self.sessions: dict[str, Session] = {}
        self.news = news.NewsEngine(store, config.pis)
        self.bots = BotEngine(
            store,
            bundle_policy=config.bundle_policy,
            negotiation_policy=config.negotiation_policy,
            clock=clock,
        )

    # -- sessions ------------------------------------------------------

    def issue_token(self, user_id: str) -> Session:
        self.store.require("user", user_id)
        issued = self.clock()
        expires = issued + timedelta(seconds=self.config.server.token_ttl_seconds)
        token = hashlib.sha256(f"{user_id}|{issued.isoformat()}".encode("utf-8")).hexdigest()[:40]
        session = Session(token=token, user_id=user_id, issued_at=issued, expires_at=expires)
        self.sessions[token] = session
        return session

    def authenticate(self, authorization: Optional[str]) -> Session:
        if not authorization or not authorization.startswith("Bearer "):
            raise AuthenticationError("missing bearer token")
        token = authorization[len("Bearer ") :].strip()
        session = self.sessions.get(token)
        if session is None:
            raise AuthenticationError("unknown token")
        if self.clock() >= session.expires_at:
            raise AuthenticationError("token expired")
        return session

    # -- alerts --------------------------------------------------------

    def score_histories(self) -> dict[str, list[sustainability.SustainabilityScore]]:
        histories: dict[str, list[sustainability.SustainabilityScore]] = {}
        for record in self.store.list_operational("score_snapshot"):
            score = from_record(record, sustainability.SustainabilityScore)
            histories.setdefault(score.subject, []).append(score)
        floor = datetime.min.replace(tzinfo=timezone.utc)
        for history in histories.values():
            history.sort(key=lambda s: s.computed_at or floor)
        return histories

    def build_alerts(self) -> list[sustainability.SustainabilityAlert]:
        shares = [
            analytics.material_group_share(self.store, [group.id])
            for group in self.store.list("material_group")
            if group.parent_id is None
        ]
        return sustainability.detect_risks(self.score_histories(), shares, self.config.thresholds)


# -- request plumbing --------------------------------------------------


def _parse_scope(
    session: Session,
    focus: str,
    focus_id: Optional[str],
    view_mode: str,
    alias_user_id: Optional[str],
) -> Scope:
    try:
        focus_enum = Focus(focus.upper())
        view_enum = ViewMode(view_mode.upper())
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if focus_enum is Focus.USER:
        focus_id = focus_id or session.user_id
    if not focus_id:
        raise ValidationError(f"focusId is required for focus {focus_enum.value}")
    return Scope(focus=focus_enum, focus_id=focus_id, view_mode=view_enum, alias_user_id=alias_user_id)


def _parse_widget_query(
    state: AppState,
    session: Session,
    focus: str,
    focus_id: Optional[str],
    view_mode: str,
    alias_user_id: Optional[str],
    filter_text: Optional[str],
    search: Optional[str],
    date_from: Optional[str],
    date_to: Optional[str],
    bucketing: str,
    horizon: int,
    forecast_method: str,
) -> WidgetQuery:
    scope = _parse_scope(session, focus, focus_id, view_mode, alias_user_id)
    try:
        bucketing_enum = analytics.Bucketing(bucketing.upper())
        method_enum = analytics.ForecastMethod(forecast_method.upper())
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if horizon < 1:
        raise ValidationError("horizon must be >= 1", horizon=horizon)
    return WidgetQuery(
        scope=scope,
        requester_id=session.user_id,
        filter_text=filter_text,
        search=search,
        date_from=parse_date(date_from) if date_from else None,
        date_to=parse_date(date_to) if date_to else None,
        bucketing=bucketing_enum,
        horizon=horizon,
        forecast_method=method_enum,
    )


def _widget_payload(state: AppState, spec: WidgetSpec, query: WidgetQuery) -> dict[str, Any]:
    rows = spec.build(state, query)
    return {
        "widgetId": spec.widget_id,
        "title": spec.title,
        "defaultView": spec.default_view,
        "columns": list(spec.columns),
        "rows": rows,
        "meta": {
            "scope": payload_for(query.scope),
            "storeRevision": state.store.revision,
        },
    }


def _year_range(year: Optional[int]) -> Optional[tuple[date, date]]:
    if year is None:
        return None
    return (date(year, 1, 1), date(year, 12, 31))


# -- the app -----------------------------------------------------------


def create_app(
    store: Optional[Store] = None,
    config: Optional[AppConfig] = None,
    clock: Callable[[], datetime] = utc_now,
) -> FastAPI:
    config = config or default_config()
    store = store or Store(source_priority=config.source_priority)
    state = AppState(store, config, clock)
    app = FastAPI(title="Digital Procurement Workspace API", docs_url=None, redoc_url=None)
    app.state.dpw = state

    @app.exception_handler(DpwError)
    async def _dpw_error(_request: Request, exc: DpwError) -> Response:
        payload = {"code": exc.code, "message": exc.message, "details": encode_value(exc.details)}
        return _json(payload, status_code=_STATUS_BY_CODE.get(exc.code, 500))

    @app.exception_handler(RequestValidationError)
    async def _request_error(_request: Request, exc: RequestValidationError) -> Response:
        payload = {
            "code": "validation_error",
            "message": "malformed request",
            "details": {"errors": [str(e.get("msg", "")) for e in exc.errors()]},
        }
        return _json(payload, status_code=400)

    def session_of(authorization: Optional[str]) -> Session:
        return state.authenticate(authorization)

    # -- auth ----------------------------------------------------------

    @app.post("/api/auth/token")
    def auth_token(body: dict = Body(...)) -> Response:
        user_id = str(body.get("userId") or "")
        if not user_id:
            raise ValidationError("userId is required")
        session = state.issue_token(user_id)
        return _json(payload_for(session))

    # -- feed ----------------------------------------------------------

    @app.get("/api/feed")
    def get_feed(
        authorization: Optional[str] = Header(None),
        limit: Optional[int] = Query(None, ge=1),
        offset: int = Query(0, ge=0),
    ) -> Response:
        session = session_of(authorization)
        entries = state.news.feed(session.user_id, now=state.clock())
        clusters = {c.cluster_id: c for c in state.news.clusters()}
        rows = []
        for entry in _page(entries, limit, offset):
            cluster = clusters[entry.cluster_id]
            row = payload_for(entry)
            row["cluster"] = payload_for(cluster)
            rows.append(row)
        return _json({"entries": rows, "storeRevision": store.revision})

    @app.post("/api/feed/read")
    def post_feed_read(
        body: dict = Body(...), authorization: Optional[str] = Header(None)
    ) -> Response:
        session = session_of(authorization)
        cluster_id = str(body.get("clusterId") or "")
        if not cluster_id:
            raise ValidationError("clusterId is required")
        updated = state.news.read(session.user_id, cluster_id, at=state.clock())
        return _json({"clusterId": cluster_id, "historyLength": len(updated.reading_history)})

    @app.post("/api/feed/suggest")
    def post_feed_suggest(
        body: dict = Body(...), authorization: Optional[str] = Header(None)
    ) -> Response:
        session = session_of(authorization)
        cluster_id = str(body.get("clusterId") or "")
        if not cluster_id:
            raise ValidationError("clusterId is required")
        suggestion = state.news.suggest(session.user_id, cluster_id, at=state.clock())
        return _json(payload_for(suggestion))

    # -- widgets and export ---------------------------------------------

    def widget_query(
        session: Session,
        focus: str,
        focus_id: Optional[str],
        view_mode: str,
        alias_user_id: Optional[str],
        filter_text: Optional[str],
        search: Optional[str],
        date_from: Optional[str],
        date_to: Optional[str],
        bucketing: str,
        horizon: int,
        forecast_method: str,
    ) -> WidgetQuery:
        return _parse_widget_query(
            state,
            session,
            focus,
            focus_id,
            view_mode,
            alias_user_id,
            filter_text,
            search,
            date_from,
            date_to,
            bucketing,
            horizon,
            forecast_method,
        )

    @app.get("/api/widgets/{widget_id}")
    def get_widget(
        widget_id: str,
        authorization: Optional[str] = Header(None),
        focus: str = Query("USER"),
        focus_id: Optional[str] = Query(None, alias="focusId"),
        view_mode: str = Query("USER_VIEW", alias="viewMode"),
        alias_user_id: Optional[str] = Query(None, alias="aliasUserId"),
        filter_text: Optional[str] = Query(None, alias="filter"),
        search: Optional[str] = Query(None),
        date_from: Optional[str] = Query(None, alias="from"),
        date_to: Optional[str] = Query(None, alias="to"),
        bucketing: str = Query("MONTH"),
        horizon: int = Query(3),
        forecast_method: str = Query("MOVING_AVERAGE", alias="method"),
    ) -> Response:
        session = session_of(authorization)
        spec = WIDGETS.get(widget_id)
        if spec is None:
            raise NotFoundError(f"unknown widget {widget_id!r}", widget=widget_id)
        query = widget_query(
            session, focus, focus_id, view_mode, alias_user_id, filter_text, search,
            date_from, date_to, bucketing, horizon, forecast_method,
        )
        return _json(_widget_payload(state, spec, query))

    @app.get("/api/export/{widget_id}.csv")
    def export_widget(
        widget_id: str,
        authorization: Optional[str] = Header(None),
        focus: str = Query("USER"),
        focus_id: Optional[str] = Query(None, alias="focusId"),
        view_mode: str = Query("USER_VIEW", alias="viewMode"),
        alias_user_id: Optional[str] = Query(None, alias="aliasUserId"),
        filter_text: Optional[str] = Query(None, alias="filter"),
        search: Optional[str] = Query(None),
        date_from: Optional[str] = Query(None, alias="from"),
        date_to: Optional[str] = Query(None, alias="to"),
        bucketing: str = Query("MONTH"),
        horizon: int = Query(3),
        forecast_method: str = Query("MOVING_AVERAGE", alias="method"),
    ) -> Response:
        session = session_of(authorization)
        spec = WIDGETS.get(widget_id)
        if spec is None:
            raise NotFoundError(f"unknown widget {widget_id!r}", widget=widget_id)
        query = widget_query(
            session, focus, focus_id, view_mode, alias_user_id, filter_text, search,
            date_from, date_to, bucketing, horizon, forecast_method,
        )
        rows = spec.build(state, query)
        body = export_table(rows, spec.columns)
        return Response(
            content=body,
            media_type="text/csv; charset=utf-8",
            headers={"Content-Disposition": f'attachment; filename="{widget_id}.csv"'},
        )

    # -- suppliers -----------------------------------------------------

    @app.get("/api/suppliers/{supplier_id}")
    def get_supplier(supplier_id: str, authorization: Optional[str] = Header(None)) -> Response:
        session_of(authorization)
        supplier = store.require("supplier", supplier_id)
        payload = payload_for(supplier)
        rating = None
        if config.paas.rating_weights:
            try:
                rating = payload_for(analytics.supplier_rating(supplier, config.paas.rating_weights))
            except ValidationError:
                rating = None
        payload["rating"] = rating
        return _json(payload)

    @app.get("/api/suppliers/{supplier_id}/score")
    def get_supplier_score(
        supplier_id: str,
        authorization: Optional[str] = Header(None),
        chain: bool = Query(False),
        year: Optional[int] = Query(None),
    ) -> Response:
        session_of(authorization)
        date_range = _year_range(year)
        if chain:
            score = sustainability.score_supplier_chain(store, supplier_id, date_range)
        else:
            score = sustainability.score_supplier(store, supplier_id, date_range)
        return _json(payload_for(score))

    @app.get("/api/suppliers/{supplier_id}/alternatives")
    def get_alternatives(
        supplier_id: str,
        authorization: Optional[str] = Header(None),
        group: Optional[str] = Query(None),
        min_rating: float = Query(0.0, alias="minRating"),
    ) -> Response:
        session_of(authorization)
        if not group:
            raise ValidationError("query parameter 'group' is required")
        store.require("supplier", supplier_id)
        rows = sustainability.suggest_alternatives(
            store,
            material_group_id=group,
            current_supplier_id=supplier_id,
            min_rating=min_rating,
            rating_weights=config.paas.rating_weights,
        )
        alternatives = [
            {
                "supplierId": sid,
                "valueTCO2e": encode_value(value),
                "rating": rating,
            }
            for sid, value, rating in rows
        ]
        return _json({"supplierId": supplier_id, "materialGroupId": group, "alternatives": alternatives})

    # -- material groups -----------------------------------------------

    @app.get("/api/materialgroups/{group_id}/share")
    def get_group_share(
        group_id: str,
        authorization: Optional[str] = Header(None),
        date_from: Optional[str] = Query(None, alias="from"),
        date_to: Optional[str] = Query(None, alias="to"),
    ) -> Response:
        session_of(authorization)
        date_range = None
        if date_from and date_to:
            date_range = (parse_date(date_from), parse_date(date_to))
        result = analytics.material_group_share(store, [group_id], date_range)
        return _json(payload_for(result))

    # -- bots ------------------------------------------------------------

    @app.post("/api/bots/{bot_id}/run")
    def run_bot(
        bot_id: str,
        body: Optional[dict] = Body(None),
        authorization: Optional[str] = Header(None),
    ) -> Response:
        session = session_of(authorization)
        body = body or {}
        params = body.get("params") or {}
        if not isinstance(params, Mapping):
            raise ValidationError("params must be an object")
        dry_run = bool(body.get("dryRun", False))
        run = state.bots.execute(bot_id, params, triggered_by=session.user_id, dry_run=dry_run)
        payload = payload_for(run)
        payload["dryRun"] = dry_run
        return _json(payload)

    @app.post("/api/bots/runs/{run_id}/approve")
    def approve_bot_run(run_id: str, authorization: Optional[str] = Header(None)) -> Response:
        session = session_of(authorization)
        run = state.bots.approve(run_id, approved_by=session.user_id)
        return _json(payload_for(run))

    @app.post("/api/bots/runs/{run_id}/reject")
    def reject_bot_run(run_id: str, authorization: Optional[str] = Header(None)) -> Response:
        session = session_of(authorization)
        run = state.bots.reject(run_id, rejected_by=session.user_id)
        return _json(payload_for(run))

    # -- personal settings -----------------------------------------------

    @app.get("/api/me/layout")
    def get_layout(authorization: Optional[str] = Header(None)) -> Response:
        session = session_of(authorization)
        layout = store.get_layout(session.user_id)
        return _json(payload_for(layout))

    @app.put("/api/me/layout")
    def put_layout(body: dict = Body(...), authorization: Optional[str] = Header(None)) -> Response:
        session = session_of(authorization)
        entries_raw = body.get("entries")
        if not isinstance(entries_raw, list):
            raise ValidationError("layout body needs an 'entries' array")
        entries = []
        for raw in entries_raw:
            if not isinstance(raw, dict):
                raise ValidationError("each layout entry must be an object")
            entries.append(
                domain.LayoutEntry(
                    widget_id=str(raw.get("widgetId") or ""),
                    x=int(raw.get("x", -1)),
                    y=int(raw.get("y", -1)),
                    width=int(raw.get("width", 0)),
                    height=int(raw.get("height", 0)),
                )
            )
        layout = store.save_layout(session.user_id, domain.WidgetLayout(entries=tuple(entries)))
        return _json(payload_for(layout))

    @app.post("/api/me/favorites")
    def post_favorite(body: dict = Body(...), authorization: Optional[str] = Header(None)) -> Response:
        session = session_of(authorization)
        subject_ref = str(body.get("subjectRef") or "")
        if not subject_ref:
            raise ValidationError("subjectRef is required")
        flag = bool(body.get("flag", True))
        favorites = store.set_favorite(session.user_id, subject_ref, flag)
        return _json({"favorites": sorted(favorites)})

    # -- processes, alerts, admin ----------------------------------------

    @app.get("/api/processes/{process_id}")
    def get_process(process_id: str, authorization: Optional[str] = Header(None)) -> Response:
        session = session_of(authorization)
        instance = store.require("process", process_id)
        breakdown = analytics.process_breakdown(instance, viewer_user_id=session.user_id)
        return _json(payload_for(breakdown))

    @app.get("/api/alerts")
    def get_alerts(
        authorization: Optional[str] = Header(None),
        limit: Optional[int] = Query(None, ge=1),
        offset: int = Query(0, ge=0),
    ) -> Response:
        session_of(authorization)
        alerts = [payload_for(alert) for alert in state.build_alerts()]
        return _json({"alerts": _page(alerts, limit, offset)})

    @app.get("/api/admin/imports")
    def get_admin_imports(
        authorization: Optional[str] = Header(None),
        limit: Optional[int] = Query(None, ge=1),
        offset: int = Query(0, ge=0),
    ) -> Response:
        session_of(authorization)
        reports = [camelize(record) for record in store.list_operational("import_report")]
        return _json({"imports": _page(reports, limit, offset)})

    return app
