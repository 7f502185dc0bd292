"""Administrative hierarchy of Bangladesh and gazetteer-based place matching.

The gazetteer file is tab-separated with a header row and columns
``division, district, thana, aliases``. District rows leave ``thana`` empty;
thana rows are only allowed inside the Dhaka and Chittagong divisions, which
is the finest granularity the surveillance data supports. Aliases are
semicolon-separated surface forms and are matched token-exactly after the
standard text normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .textnorm import tokenize

DIVISIONS = (
    "Dhaka",
    "Chittagong",
    "Rajshahi",
    "Khulna",
    "Barishal",
    "Sylhet",
    "Rangpur",
    "Mymensingh",
)

THANA_DIVISIONS = ("Dhaka", "Chittagong")


class GazetteerError(ValueError):
    pass


@dataclass(frozen=True)
class RegionRef:
    """A region at district granularity or finer. ``thana`` is optional."""

    division: str
    district: str
    thana: str | None = None

    def as_dict(self) -> dict:
        d = {"division": self.division, "district": self.district}
        if self.thana is not None:
            d["thana"] = self.thana
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RegionRef":
        return cls(division=d["division"], district=d["district"], thana=d.get("thana"))


@dataclass(frozen=True)
class GazetteerEntry:
    order: int
    division: str
    district: str
    thana: str | None
    alias_token_seqs: tuple[tuple[str, ...], ...]

    def region(self) -> RegionRef:
        return RegionRef(self.division, self.district, self.thana)


def default_gazetteer_path() -> Path:
    return Path(str(resources.files("denguewatch").joinpath("data/gazetteer.tsv")))


def default_thana_corporation_path() -> Path:
    return Path(str(resources.files("denguewatch").joinpath("data/thana_corporations.tsv")))


class Gazetteer:
    """Loaded gazetteer with validation and deterministic place matching."""

    def __init__(self, entries: list[GazetteerEntry]):
        self.entries = entries
        self.district_division: dict[str, str] = {}
        self.thanas_by_district: dict[str, set[str]] = {}
        for e in entries:
            if e.thana is None:
                self.district_division[e.district] = e.division
        for e in entries:
            if e.thana is not None:
                self.thanas_by_district.setdefault(e.district, set()).add(e.thana)

    @classmethod
    def load(cls, path: Path | str | None = None) -> "Gazetteer":
        path = Path(path) if path is not None else default_gazetteer_path()
        entries: list[GazetteerEntry] = []
        district_division: dict[str, str] = {}
        with open(path, encoding="utf-8") as f:
            header = f.readline().rstrip("\n").split("\t")
            if header[:4] != ["division", "district", "thana", "aliases"]:
                raise GazetteerError(f"{path}: expected header division/district/thana/aliases")
            for lineno, line in enumerate(f, start=2):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 4:
                    raise GazetteerError(f"{path}: line {lineno}: expected 4 tab-separated columns")
                division, district, thana, aliases = parts
                thana = thana or None
                if division not in DIVISIONS:
                    raise GazetteerError(f"{path}: line {lineno}: unknown division {division!r}")
                if thana is not None:
                    if division not in THANA_DIVISIONS:
                        raise GazetteerError(
                            f"{path}: line {lineno}: thana rows are only supported in "
                            f"{' and '.join(THANA_DIVISIONS)} divisions"
                        )
                    if district_division.get(district) != division:
                        raise GazetteerError(
                            f"{path}: line {lineno}: thana row references district {district!r} "
                            f"not previously declared under {division!r}"
                        )
                else:
                    if district in district_division:
                        raise GazetteerError(f"{path}: line {lineno}: duplicate district {district!r}")
                    district_division[district] = division
                seqs = []
                for alias in aliases.split(";"):
                    toks = tuple(tokenize(alias))
                    if toks:
                        seqs.append(toks)
                if not seqs:
                    raise GazetteerError(f"{path}: line {lineno}: no usable alias")
                entries.append(
                    GazetteerEntry(
                        order=len(entries),
                        division=division,
                        district=district,
                        thana=thana,
                        alias_token_seqs=tuple(seqs),
                    )
                )
        gaz = cls(entries)
        if set(gaz.district_division.values()) - set(DIVISIONS):
            raise GazetteerError("gazetteer uses unknown divisions")
        return gaz

    # -- validation ---------------------------------------------------------

    def districts(self) -> list[str]:
        return list(self.district_division)

    def validate_region(self, region: RegionRef) -> None:
        """Raise GazetteerError unless the region is internally consistent."""
        if region.division not in DIVISIONS:
            raise GazetteerError(f"unknown division {region.division!r}")
        expected = self.district_division.get(region.district)
        if expected is None:
            raise GazetteerError(f"unknown district {region.district!r}")
        if expected != region.division:
            raise GazetteerError(
                f"district {region.district!r} belongs to {expected!r}, not {region.division!r}"
            )
        if region.thana is not None:
            if region.division not in THANA_DIVISIONS:
                raise GazetteerError(
                    f"thana resolution is not available in {region.division!r} division"
                )
            if region.thana not in self.thanas_by_district.get(region.district, ()):
                raise GazetteerError(
                    f"thana {region.thana!r} does not belong to district {region.district!r}"
                )

    # -- matching -----------------------------------------------------------

    @staticmethod
    def _count_seq(tokens: list[str], seq: tuple[str, ...]) -> int:
        if len(seq) == 1:
            w = seq[0]
            return sum(1 for t in tokens if t == w)
        n, m = len(tokens), len(seq)
        count = 0
        for i in range(n - m + 1):
            if tuple(tokens[i : i + m]) == seq:
                count += 1
        return count

    def match_counts(self, tokens: list[str]) -> list[tuple[GazetteerEntry, int]]:
        out = []
        for e in self.entries:
            c = sum(self._count_seq(tokens, seq) for seq in e.alias_token_seqs)
            if c:
                out.append((e, c))
        return out

    def geotag_tokens(self, title_tokens: list[str], body_tokens: list[str]) -> RegionRef | None:
        """Pick a region from place-name mentions.

        Title mentions take precedence over body mentions. Within the winning
        scope a thana match beats a district match, then higher mention count
        wins, then gazetteer file order. Returns None when nothing matches.
        """
        for scope in (title_tokens, body_tokens):
            matches = self.match_counts(scope)
            if matches:
                entry, _ = min(
                    matches,
                    key=lambda m: (0 if m[0].thana is not None else 1, -m[1], m[0].order),
                )
                return entry.region()
        return None


def load_thana_corporations(path: Path | str | None = None) -> dict[str, str]:
    """Thana name -> city corporation (DNCC or DSCC) for Dhaka city."""
    path = Path(path) if path is not None else default_thana_corporation_path()
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header[:2] != ["thana", "corporation"]:
            raise GazetteerError(f"{path}: expected header thana/corporation")
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            thana, corporation = line.rstrip("\n").split("\t")[:2]
            if corporation not in ("DNCC", "DSCC"):
                raise GazetteerError(f"{path}: line {lineno}: corporation must be DNCC or DSCC")
            if thana in mapping:
                raise GazetteerError(f"{path}: line {lineno}: thana {thana!r} mapped twice")
            mapping[thana] = corporation
    return mapping
