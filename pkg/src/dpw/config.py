"""Application configuration: one dpw.json file feeding every engine.

Floats in the file are parsed as Decimal so money and tolerance values
survive exactly; money amounts are EUR in the file, cents in memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import timedelta
from decimal import Decimal
from pathlib import Path
from typing import Any, Mapping, Optional

from .bots import BundlePolicy, GroupBy, NegotiationPolicy
from .errors import ValidationError
from .ingestion import SourceConfig
from .news import FeedWeights, PisConfig
from .sustainability import GwpTable, Thresholds
from .units import parse_money


@dataclass(frozen=True)
class PaasConfig:
    ma_window: int = 3
    es_alpha: float = 0.5
    rating_weights: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.ma_window < 1:
            raise ValidationError("moving-average window must be >= 1")
        if not 0 < self.es_alpha <= 1:
            raise ValidationError("smoothing alpha must be in (0,1]")
        object.__setattr__(self, "rating_weights", {str(k): float(v) for k, v in dict(self.rating_weights).items()})


@dataclass(frozen=True)
class ServerConfig:
    bind: str = "127.0.0.1:8765"
    token_ttl_seconds: int = 3600

    def __post_init__(self) -> None:
        if self.token_ttl_seconds <= 0:
            raise ValidationError("tokenTtlSeconds must be > 0")


@dataclass(frozen=True)
class AppConfig:
    base_dir: Path
    store_path: Path
    sources: tuple[SourceConfig, ...] = ()
    source_priority: tuple[str, ...] = ()
    gwp_table: GwpTable = field(default_factory=lambda: GwpTable({"CO2": Decimal(1)}))
    thresholds: Thresholds = field(
        default_factory=lambda: Thresholds(
            score_tco2e=Decimal(1000), increase_fraction=Decimal("0.5"), dependency_fraction=Decimal("0.8")
        )
    )
    bundle_policy: BundlePolicy = field(default_factory=BundlePolicy)
    negotiation_policy: NegotiationPolicy = field(default_factory=NegotiationPolicy)
    pis: PisConfig = field(default_factory=PisConfig)
    paas: PaasConfig = field(default_factory=PaasConfig)
    server: ServerConfig = field(default_factory=ServerConfig)

    def source_by_id(self, source_id: str) -> SourceConfig:
        for source in self.sources:
            if source.source_id == source_id:
                return source
        raise ValidationError(f"unknown source {source_id!r}", source=source_id)


def _as_float(value: Any, default: float) -> float:
    return float(value) if value is not None else default


def _pis_from(raw: Mapping[str, Any]) -> PisConfig:
    weights_raw = raw.get("weights") or {}
    weights = FeedWeights(
        w_topic=_as_float(weights_raw.get("wTopic"), 1.0),
        w_team=_as_float(weights_raw.get("wTeam"), 0.5),
        w_recency=_as_float(weights_raw.get("wRecency"), 1.0),
        w_favorite=_as_float(weights_raw.get("wFavorite"), 0.5),
        half_life_days=_as_float(raw.get("halfLifeDays"), 7.0),
    )
    return PisConfig(
        sim_threshold=_as_float(raw.get("simThreshold"), 0.6),
        summary_sentences=int(raw.get("summarySentences", 3)),
        weights=weights,
    )


def _bundle_from(raw: Mapping[str, Any]) -> BundlePolicy:
    return BundlePolicy(
        group_by=GroupBy(str(raw.get("groupBy", "MATERIAL"))),
        window=timedelta(days=float(raw.get("windowDays", 30))),
        min_bundle_size=int(raw.get("minBundleSize", 2)),
    )


def _negotiation_from(raw: Mapping[str, Any]) -> NegotiationPolicy:
    return NegotiationPolicy(
        max_volume_eur=parse_money(raw.get("maxVolumeEur", 1_000_000), "EUR"),
        accept_tolerance=Decimal(str(raw.get("acceptTolerance", "0.02"))),
        counter_margin=Decimal(str(raw.get("counterMargin", "0.01"))),
    )


def _source_from(raw: Mapping[str, Any]) -> SourceConfig:
    return SourceConfig(
        source_id=str(raw.get("sourceId", "")),
        kind=str(raw.get("kind", "")),
        location=str(raw.get("location", "")),
        schedule=raw.get("schedule"),
        field_mapping={str(k): str(v) for k, v in (raw.get("fieldMapping") or {}).items()},
    )


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"), parse_float=Decimal)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}", io=True) from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ValidationError("config root must be a JSON object")
    return config_from_mapping(raw, base_dir=path.parent.resolve())


def config_from_mapping(raw: Mapping[str, Any], base_dir: Path) -> AppConfig:
    store_path = Path(str(raw.get("storePath", "dpw-store.json")))
    if not store_path.is_absolute():
        store_path = base_dir / store_path

    gwp_raw = raw.get("gwpTable") or {"CO2": Decimal(1)}
    thresholds_raw = raw.get("thresholds") or {}
    policies = raw.get("botPolicies") or {}
    server_raw = raw.get("server") or {}
    paas_raw = raw.get("paas") or {}

    return AppConfig(
        base_dir=base_dir,
        store_path=store_path,
        sources=tuple(_source_from(s) for s in raw.get("sources") or ()),
        source_priority=tuple(str(s) for s in raw.get("sourcePriority") or ()),
        gwp_table=GwpTable({str(gas): Decimal(str(mult)) for gas, mult in gwp_raw.items()}),
        thresholds=Thresholds(
            score_tco2e=Decimal(str(thresholds_raw.get("scoreTCO2e", 1000))),
            increase_fraction=Decimal(str(thresholds_raw.get("increaseFraction", "0.5"))),
            dependency_fraction=Decimal(str(thresholds_raw.get("dependencyFraction", "0.8"))),
        ),
        bundle_policy=_bundle_from(policies.get("bundler") or {}),
        negotiation_policy=_negotiation_from(policies.get("negotiator") or {}),
        pis=_pis_from(raw.get("pis") or {}),
        paas=PaasConfig(
            ma_window=int(paas_raw.get("maWindow", 3)),
            es_alpha=_as_float(paas_raw.get("esAlpha"), 0.5),
            rating_weights={str(k): float(v) for k, v in (paas_raw.get("ratingWeights") or {}).items()},
        ),
        server=ServerConfig(
            bind=str(server_raw.get("bind", "127.0.0.1:8765")),
            token_ttl_seconds=int(server_raw.get("tokenTtlSeconds", 3600)),
        ),
    )


def default_config(base_dir: Optional[Path] = None) -> AppConfig:
    base = (base_dir or Path.cwd()).resolve()
    return config_from_mapping({}, base_dir=base)
