"""Money, mass, and timestamp conventions.

Money is integer euro cents end to end; masses are Decimal tCO2e. Parsing
helpers reject anything that would silently lose precision (sub-cent
amounts, malformed timestamps).
"""

from __future__ import annotations

from datetime import date, datetime, timezone
from decimal import Decimal, InvalidOperation, ROUND_HALF_UP

from .errors import ValidationError

Cents = int

# cents per unit of each money annotation accepted in field mappings
MONEY_UNITS: dict[str, int] = {"EUR": 100, "kEUR": 100_000, "cents": 1}

CENTS_PER_KEUR = 100_000


def parse_money(text: str, unit: str = "EUR") -> Cents:
    """Parse a decimal money literal into integer cents."""
    if unit not in MONEY_UNITS:
        raise ValidationError(f"unknown money unit {unit!r}", unit=unit)
    try:
        value = Decimal(str(text).strip())
    except InvalidOperation:
        raise ValidationError(f"not a money amount: {text!r}", value=text) from None
    cents = value * MONEY_UNITS[unit]
    if cents != cents.to_integral_value():
        raise ValidationError(f"sub-cent amount: {text!r} {unit}", value=text, unit=unit)
    return int(cents)


def format_money(cents: Cents) -> str:
    """Render integer cents as a plain EUR decimal string, e.g. 150000 -> '1500.00'."""
    sign = "-" if cents < 0 else ""
    cents = abs(cents)
    return f"{sign}{cents // 100}.{cents % 100:02d}"


def cents_to_keur(cents: Cents) -> Decimal:
    return Decimal(cents) / CENTS_PER_KEUR


def parse_mass(text: str) -> Decimal:
    """Parse a tCO2e quantity; kept as Decimal so totals stay exact."""
    try:
        return Decimal(str(text).strip())
    except InvalidOperation:
        raise ValidationError(f"not a mass: {text!r}", value=text) from None


def parse_quantity(text: str) -> Decimal:
    try:
        return Decimal(str(text).strip())
    except InvalidOperation:
        raise ValidationError(f"not a quantity: {text!r}", value=text) from None


def round_cents(value: Decimal) -> Cents:
    return int(value.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; 'Z' suffix accepted, result always UTC."""
    raw = str(text).strip()
    try:
        parsed = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise ValidationError(f"not a timestamp: {text!r}", value=text) from None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def parse_date(text: str) -> date:
    try:
        return date.fromisoformat(str(text).strip())
    except ValueError:
        raise ValidationError(f"not a date: {text!r}", value=text) from None


def utc_now() -> datetime:
    return datetime.now(timezone.utc)
