"""Registry of ENTSO-E area codes: display names and local time zones.

Unknown codes are legal everywhere except local-time feature building, which
needs a zone; supply one through configuration for areas not listed here.
"""

from __future__ import annotations

from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from .errors import ConfigurationError

# EIC area code -> (country name, IANA zone)
REGISTRY: dict[str, tuple[str, str]] = {
    "10YAT-APG------L": ("Austria", "Europe/Vienna"),
    "10YBE----------2": ("Belgium", "Europe/Brussels"),
    "10YCA-BULGARIA-R": ("Bulgaria", "Europe/Sofia"),
    "10YCH-SWISSGRIDZ": ("Switzerland", "Europe/Zurich"),
    "10YCZ-CEPS-----N": ("Czech Republic", "Europe/Prague"),
    "10Y1001A1001A83F": ("Germany", "Europe/Berlin"),
    "10Y1001A1001A796": ("Denmark", "Europe/Copenhagen"),
    "10Y1001A1001A39I": ("Estonia", "Europe/Tallinn"),
    "10YES-REE------0": ("Spain", "Europe/Madrid"),
    "10YFI-1--------U": ("Finland", "Europe/Helsinki"),
    "10YFR-RTE------C": ("France", "Europe/Paris"),
    "10YGB----------A": ("United Kingdom", "Europe/London"),
    "10YGR-HTSO-----Y": ("Greece", "Europe/Athens"),
    "10YHR-HEP------M": ("Croatia", "Europe/Zagreb"),
    "10YHU-MAVIR----U": ("Hungary", "Europe/Budapest"),
    "10YIT-GRTN-----B": ("Italy", "Europe/Rome"),
    "10YLT-1001A0008Q": ("Lithuania", "Europe/Vilnius"),
    "10YLV-1001A00074": ("Latvia", "Europe/Riga"),
    "10YNL----------L": ("Netherlands", "Europe/Amsterdam"),
    "10YNO-0--------C": ("Norway", "Europe/Oslo"),
    "10YPL-AREA-----S": ("Poland", "Europe/Warsaw"),
    "10YPT-REN------W": ("Portugal", "Europe/Lisbon"),
    "10YRO-TEL------P": ("Romania", "Europe/Bucharest"),
    "10YSE-1--------K": ("Sweden", "Europe/Stockholm"),
    "10YSI-ELES-----O": ("Slovenia", "Europe/Ljubljana"),
    "10YSK-SEPS-----K": ("Slovakia", "Europe/Bratislava"),
}


def country_name(code: str) -> str:
    entry = REGISTRY.get(code)
    return entry[0] if entry else code


def country_zone(code: str, override: str | None = None) -> ZoneInfo:
    """Local zone for an area; override wins, registry fills in, else error."""
    zone_name = override
    if zone_name is None:
        entry = REGISTRY.get(code)
        if entry is None:
            raise ConfigurationError(
                f"no time zone known for {code!r}; configure one (timezones setting)")
        zone_name = entry[1]
    try:
        return ZoneInfo(zone_name)
    except (ZoneInfoNotFoundError, ValueError) as exc:
        raise ConfigurationError(f"unknown time zone {zone_name!r}: {exc}") from None
