"""Geographic prior database: 16 regions, international/local languages,
country assignments.

The database is plain data loaded from a TSV file (see ``load_geodb`` for
the format).  A default file derived from public language inventories ships
with the package; it is replaceable, and nothing in the code depends on its
exact contents beyond the structural invariants validated at load time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

REGION_IDS = (
    "africa_north", "africa_southern", "africa_sub",
    "america_central", "america_north", "america_south", "america_brazil",
    "asia_central", "asia_east", "asia_south", "asia_southeast",
    "europe_east", "europe_west", "europe_russia",
    "middle_east", "oceania",
)
REGION_SET = frozenset(REGION_IDS)

NUM_INTERNATIONAL = 31

_LANG_RE = re.compile(r"^[a-z]{3}$")
_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")


class GeoDbError(ValueError):
    """Raised when a geodb file violates the format or its invariants."""


class NotCovered(LookupError):
    """Raised for a country code absent from the database."""


def is_lang_code(code: str) -> bool:
    return bool(_LANG_RE.match(code))


def is_country_code(code: str) -> bool:
    return bool(_COUNTRY_RE.match(code))


@dataclass(frozen=True)
class GeoDatabase:
    """Immutable country/region/language mapping.

    ``international`` holds the 31 lingua-franca codes included in every
    region; ``local`` maps each region to the languages expected there.
    The two sets may overlap: an international language can also occur in
    a region in its own right.  Membership is unweighted; all languages of
    a region are treated as equally likely.
    """

    international: frozenset[str]
    local: dict[str, frozenset[str]]
    country_region: dict[str, str]
    names: dict[str, str] = field(default_factory=dict)

    def region_of(self, country: str) -> str:
        """Region for a country code, or NotCovered."""
        try:
            return self.country_region[country]
        except KeyError:
            raise NotCovered(f"country not in geodb: {country!r}") from None

    def languages_for_region(self, region: str) -> frozenset[str]:
        """Admissible label set of a region: its locals plus all internationals."""
        if region not in REGION_SET:
            raise GeoDbError(f"unknown region: {region!r}")
        return self.local.get(region, frozenset()) | self.international

    def is_international(self, lang: str) -> bool:
        return lang in self.international

    def all_languages(self) -> frozenset[str]:
        """Union of every region's label set (the baseline label space)."""
        langs = set(self.international)
        for members in self.local.values():
            langs |= members
        return frozenset(langs)

    @property
    def regions(self) -> tuple[str, ...]:
        return REGION_IDS

    def validate(self) -> None:
        if len(self.international) != NUM_INTERNATIONAL:
            raise GeoDbError(
                f"expected {NUM_INTERNATIONAL} international languages, "
                f"found {len(self.international)}")
        for region in self.local:
            if region not in REGION_SET:
                raise GeoDbError(f"unknown region: {region!r}")
        for country, region in self.country_region.items():
            if region not in REGION_SET:
                raise GeoDbError(f"unknown region for {country}: {region!r}")


def load_geodb(path) -> GeoDatabase:
    """Parse and validate a geodb TSV file.

    Three record kinds, tab-separated, ``#`` lines are comments::

        LANG <code> <international|local> <display name>
        REGION <region_id> <lang_code>
        COUNTRY <alpha2> <region_id>

    All 16 region ids must occur; exactly 31 LANG rows must be flagged
    international; every country is assigned once; every local language
    must belong to at least one region.  Violations are reported with
    line numbers.
    """
    errors: list[str] = []
    international: set[str] = set()
    declared: dict[str, str] = {}   # lang code -> class
    names: dict[str, str] = {}
    local: dict[str, set[str]] = {}
    country_region: dict[str, str] = {}
    seen_regions: set[str] = set()
    region_langs: set[str] = set()

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            kind = fields[0]
            if kind == "LANG":
                if len(fields) != 4:
                    errors.append(f"line {lineno}: LANG row needs 4 fields")
                    continue
                _, code, cls, name = fields
                if not is_lang_code(code):
                    errors.append(f"line {lineno}: bad language code {code!r}")
                    continue
                if code in declared:
                    errors.append(f"line {lineno}: duplicate LANG row for {code}")
                    continue
                if cls not in ("international", "local"):
                    errors.append(f"line {lineno}: bad class {cls!r}")
                    continue
                declared[code] = cls
                names[code] = name
                if cls == "international":
                    international.add(code)
            elif kind == "REGION":
                if len(fields) != 3:
                    errors.append(f"line {lineno}: REGION row needs 3 fields")
                    continue
                _, region, code = fields
                if region not in REGION_SET:
                    errors.append(f"line {lineno}: unknown region {region!r}")
                    continue
                if code not in declared:
                    errors.append(f"line {lineno}: REGION references "
                                  f"undeclared language {code!r}")
                    continue
                local.setdefault(region, set()).add(code)
                seen_regions.add(region)
                region_langs.add(code)
            elif kind == "COUNTRY":
                if len(fields) != 3:
                    errors.append(f"line {lineno}: COUNTRY row needs 3 fields")
                    continue
                _, country, region = fields
                if not is_country_code(country):
                    errors.append(f"line {lineno}: bad country code {country!r}")
                    continue
                if region not in REGION_SET:
                    errors.append(f"line {lineno}: unknown region {region!r}")
                    continue
                if country in country_region:
                    errors.append(f"line {lineno}: duplicate assignment "
                                  f"for country {country}")
                    continue
                country_region[country] = region
                seen_regions.add(region)
            else:
                errors.append(f"line {lineno}: unknown record kind {kind!r}")

    if len(international) != NUM_INTERNATIONAL:
        errors.append(f"expected {NUM_INTERNATIONAL} international languages, "
                      f"found {len(international)}")
    missing = REGION_SET - seen_regions
    if missing:
        errors.append("regions never referenced: " + ", ".join(sorted(missing)))
    for code, cls in declared.items():
        if cls == "local" and code not in region_langs:
            errors.append(f"local language {code} assigned to no region")

    if errors:
        raise GeoDbError(f"invalid geodb file {path}:\n  " + "\n  ".join(errors))

    return GeoDatabase(
        international=frozenset(international),
        local={r: frozenset(members) for r, members in local.items()},
        country_region=country_region,
        names=names,
    )


def default_geodb_path() -> str:
    """Path of the geodb file shipped with the package."""
    return str(resources.files("glid").joinpath("data/geodb.tsv"))


def load_default() -> GeoDatabase:
    return load_geodb(default_geodb_path())
