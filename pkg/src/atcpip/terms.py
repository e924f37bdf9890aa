"""Programmable license terms.

The terms document is the unit that gets negotiated, hashed, and bound
into tokens, so everything here is geared toward one property: equal
terms always produce equal canonical bytes. Construction normalizes
representation (tag lists become sorted unique tuples, rates become
four-digit decimals); ``validate`` flags domain problems; ``diff`` and
``apply_delta`` give negotiation a structural edit language.
"""

from dataclasses import dataclass, fields, replace
from datetime import date
from decimal import Decimal
from typing import Optional

from . import canon
from .canon import fixed4
from .errors import InvalidResult, InvalidTerms, MalformedDate, ParseError, UnknownPath

PERPETUAL = "perpetual"

SCOPE_TAGS = frozenset({"personal", "commercial", "sublicensable"})
TRANSFERABILITY_MODES = (
    "non_transferable",
    "transferable",
    "transferable_with_approval",
)
DISPUTE_RESOLUTION_MODES = (
    "onchain_arbitration",
    "offchain_arbitration",
    "court",
)

# Registry used when a scenario does not configure its own. Codes only;
# richer per-jurisdiction profiles live in the trust module.
DEFAULT_JURISDICTIONS = frozenset(
    {
        "AE", "AT", "AU", "BE", "BR", "CA", "CH", "CN", "CZ", "DE",
        "DK", "EE", "ES", "FI", "FR", "GB", "IE", "IN", "IT", "JP",
        "KR", "MX", "NL", "NO", "NZ", "PL", "PT", "SE", "SG", "US",
    }
)

TAG_FIELDS = ("scope", "revocation_conditions", "compliance_requirements", "ip_restrictions")
DECIMAL_FIELDS = ("royalty_rate", "rev_share")
BOOL_FIELDS = ("onchain_enforcement", "offchain_enforcement", "chain_of_ownership")


def is_iso_date(text):
    """True for a plain YYYY-MM-DD calendar date."""
    if not isinstance(text, str) or len(text) != 10:
        return False
    try:
        date.fromisoformat(text)
    except ValueError:
        return False
    return True


def _normalize_tags(name, value):
    if isinstance(value, str) or not hasattr(value, "__iter__"):
        raise TypeError(f"{name} takes a collection of tags, got {value!r}")
    tags = list(value)
    for tag in tags:
        if not isinstance(tag, str):
            raise TypeError(f"{name} tags must be strings, got {tag!r}")
    return tuple(sorted(set(tags)))


@dataclass(frozen=True)
class LicenseTerms:
    """A complete machine-readable license offer.

    Defaults give a conservative read-only grant so call sites only
    spell out what they mean to change.
    """

    name: str = "license"
    description: str = ""
    scope: tuple = ("personal",)
    duration: str = "2025-01-01"
    jurisdiction: str = "US"
    governing_law: str = "US"
    royalty_rate: Decimal = Decimal("0.0500")
    transferability: str = "non_transferable"
    revocation_conditions: tuple = ()
    dispute_resolution: str = "onchain_arbitration"
    onchain_enforcement: bool = True
    offchain_enforcement: bool = False
    compliance_requirements: tuple = ()
    ip_restrictions: tuple = ("read_only",)
    chain_of_ownership: bool = True
    rev_share: Decimal = Decimal("0.0000")
    upfront_fee: int = 0

    def __post_init__(self):
        for name in TAG_FIELDS:
            object.__setattr__(self, name, _normalize_tags(name, getattr(self, name)))
        for name in DECIMAL_FIELDS:
            object.__setattr__(self, name, fixed4(getattr(self, name)))
        for name in ("name", "description", "duration", "jurisdiction", "governing_law",
                     "transferability", "dispute_resolution"):
            if not isinstance(getattr(self, name), str):
                raise TypeError(f"{name} must be a string")
        for name in BOOL_FIELDS:
            if not isinstance(getattr(self, name), bool):
                raise TypeError(f"{name} must be a bool")
        if isinstance(self.upfront_fee, bool) or not isinstance(self.upfront_fee, int):
            raise TypeError("upfront_fee must be an integer micro-credit amount")

    def to_value(self):
        """Canonical map form (tag tuples become lists)."""
        out = {}
        for spec in fields(self):
            value = getattr(self, spec.name)
            out[spec.name] = list(value) if isinstance(value, tuple) else value
        return out

    def replace(self, **changes):
        return replace(self, **changes)


FIELD_ORDER = tuple(spec.name for spec in fields(LicenseTerms))


def terms_from_value(value):
    """Rebuild LicenseTerms from a canonical map; closed-world keys."""
    if not isinstance(value, dict):
        raise ParseError("terms document must be a map")
    unknown = set(value) - set(FIELD_ORDER)
    if unknown:
        raise ParseError(f"unknown terms field {sorted(unknown)[0]!r}")
    missing = set(FIELD_ORDER) - set(value)
    if missing:
        raise ParseError(f"missing terms field {sorted(missing)[0]!r}")
    kwargs = {}
    for name in FIELD_ORDER:
        item = value[name]
        if name in DECIMAL_FIELDS and isinstance(item, (int, Decimal)) and not isinstance(item, bool):
            item = fixed4(item)
        kwargs[name] = item
    try:
        return LicenseTerms(**kwargs)
    except TypeError as exc:
        raise ParseError(f"bad terms document: {exc}") from None


@dataclass(frozen=True)
class Violation:
    path: tuple
    reason: str


def validate(terms, jurisdictions=DEFAULT_JURISDICTIONS):
    """Return a tuple of violations; empty means the terms are valid."""
    report = []

    def flag(path, reason):
        report.append(Violation(path, reason))

    for tag in terms.scope:
        if tag not in SCOPE_TAGS:
            flag(("scope", tag), "unknown scope tag")
    if terms.duration != PERPETUAL and not is_iso_date(terms.duration):
        flag(("duration",), "neither 'perpetual' nor a calendar date")
    if terms.jurisdiction not in jurisdictions:
        flag(("jurisdiction",), "not a recognized jurisdiction code")
    for name in DECIMAL_FIELDS:
        rate = getattr(terms, name)
        if rate < 0 or rate > 1:
            flag((name,), "out of range [0,1]")
    if Decimal(0) <= terms.royalty_rate <= 1 and Decimal(0) <= terms.rev_share <= 1:
        if terms.royalty_rate + terms.rev_share > 1:
            flag((), "royalty_rate + rev_share > 1")
    if terms.transferability not in TRANSFERABILITY_MODES:
        flag(("transferability",), "unknown transferability mode")
    if terms.dispute_resolution not in DISPUTE_RESOLUTION_MODES:
        flag(("dispute_resolution",), "unknown dispute resolution mode")
    if terms.upfront_fee < 0:
        flag(("upfront_fee",), "negative fee")
    elif terms.upfront_fee > canon.INT_MAX:
        flag(("upfront_fee",), "out of 64-bit range")
    for name in ("revocation_conditions", "compliance_requirements", "ip_restrictions"):
        for tag in getattr(terms, name):
            if not tag:
                flag((name, tag), "empty tag")
    return tuple(report)


def terms_hash(terms, jurisdictions=DEFAULT_JURISDICTIONS):
    """Hash of the canonical terms map. Raises InvalidTerms on violations."""
    report = validate(terms, jurisdictions)
    if report:
        raise InvalidTerms(report)
    return canon.hash_value(terms.to_value())


# -- structural diffs --------------------------------------------------------


@dataclass(frozen=True)
class TermsEdit:
    path: tuple
    op: str  # "set" | "remove"
    value: object = None


@dataclass(frozen=True)
class TermsDelta:
    edits: tuple = ()

    def __bool__(self):
        return bool(self.edits)

    def to_value(self):
        out = []
        for edit in self.edits:
            item = {"path": list(edit.path), "op": edit.op}
            if edit.op == "set":
                item["value"] = edit.value
            out.append(item)
        return out


def delta_from_value(value):
    if not isinstance(value, list):
        raise ParseError("delta must be a list of edits")
    edits = []
    for item in value:
        if not isinstance(item, dict) or "path" not in item or "op" not in item:
            raise ParseError("each edit needs 'path' and 'op'")
        path = item["path"]
        if not isinstance(path, list) or not all(isinstance(p, str) for p in path):
            raise ParseError("edit path must be a list of strings")
        op = item["op"]
        if op not in ("set", "remove"):
            raise ParseError(f"unknown edit op {op!r}")
        if op == "set" and "value" not in item:
            raise ParseError("set edit needs a value")
        edits.append(TermsEdit(tuple(path), op, item.get("value")))
    return TermsDelta(tuple(edits))


def diff(old, new):
    """Minimal edit list turning old into new, in schema order.

    Tag collections diff per element (depth-2 paths), scalars as one
    depth-1 set. ``apply_delta(old, diff(old, new)) == new`` always.
    """
    edits = []
    for name in FIELD_ORDER:
        ours, theirs = getattr(old, name), getattr(new, name)
        if name in TAG_FIELDS:
            removed = sorted(set(ours) - set(theirs))
            added = sorted(set(theirs) - set(ours))
            edits.extend(TermsEdit((name, tag), "remove") for tag in removed)
            edits.extend(TermsEdit((name, tag), "set", True) for tag in added)
        elif ours != theirs:
            edits.append(TermsEdit((name,), "set", theirs))
    return TermsDelta(tuple(edits))


def apply_delta(terms, delta, jurisdictions=DEFAULT_JURISDICTIONS):
    """Apply every edit or raise; the result must re-validate."""
    doc = terms.to_value()
    for edit in delta.edits:
        if not edit.path or edit.path[0] not in FIELD_ORDER:
            raise UnknownPath(f"no such terms field: {list(edit.path)}")
        name = edit.path[0]
        if len(edit.path) == 1:
            if edit.op == "remove":
                raise InvalidResult(f"{name} is required and cannot be removed")
            doc[name] = list(edit.value) if isinstance(edit.value, tuple) else edit.value
        elif len(edit.path) == 2 and name in TAG_FIELDS:
            tag = edit.path[1]
            current = set(doc[name])
            if edit.op == "set":
                current.add(tag)
            elif tag in current:
                current.remove(tag)
            else:
                raise UnknownPath(f"tag {tag!r} not present in {name}")
            doc[name] = sorted(current)
        else:
            raise UnknownPath(f"path too deep for {name}: {list(edit.path)}")
    try:
        result = terms_from_value(doc)
    except ParseError as exc:
        raise InvalidResult(f"edited terms do not parse: {exc}") from None
    report = validate(result, jurisdictions)
    if report:
        raise InvalidResult(
            "edited terms fail validation: "
            + "; ".join(f"{'.'.join(v.path) or '<terms>'}: {v.reason}" for v in report)
        )
    return result


# -- license metadata --------------------------------------------------------


@dataclass(frozen=True)
class LicenseMetadata:
    """Identity portion of an agreement token."""

    license_id: str
    issuer_id: str
    holder_id: str
    issue_date: int  # ledger height at mint time
    expiry_date: str  # calendar date or "perpetual"
    version: int
    link_to_terms: str  # terms hash
    signature: str
    previous_license_id: Optional[str] = None

    def to_value(self):
        out = {
            "license_id": self.license_id,
            "issuer_id": self.issuer_id,
            "holder_id": self.holder_id,
            "issue_date": self.issue_date,
            "expiry_date": self.expiry_date,
            "version": self.version,
            "link_to_terms": self.link_to_terms,
            "signature": self.signature,
        }
        if self.previous_license_id is not None:
            out["previous_license_id"] = self.previous_license_id
        return out


def metadata_from_value(value):
    if not isinstance(value, dict):
        raise ParseError("license metadata must be a map")
    required = {
        "license_id", "issuer_id", "holder_id", "issue_date",
        "expiry_date", "version", "link_to_terms", "signature",
    }
    missing = required - set(value)
    if missing:
        raise ParseError(f"missing metadata field {sorted(missing)[0]!r}")
    extra = set(value) - required - {"previous_license_id"}
    if extra:
        raise ParseError(f"unknown metadata field {sorted(extra)[0]!r}")
    try:
        return LicenseMetadata(
            license_id=value["license_id"],
            issuer_id=value["issuer_id"],
            holder_id=value["holder_id"],
            issue_date=value["issue_date"],
            expiry_date=value["expiry_date"],
            version=value["version"],
            link_to_terms=value["link_to_terms"],
            signature=value["signature"],
            previous_license_id=value.get("previous_license_id"),
        )
    except TypeError as exc:
        raise ParseError(f"bad metadata document: {exc}") from None


def is_expired(metadata, now_date):
    """Strict comparison: a license is valid through its expiry date."""
    if not is_iso_date(now_date):
        raise MalformedDate(f"not a calendar date: {now_date!r}")
    if metadata.expiry_date == PERPETUAL:
        return False
    if not is_iso_date(metadata.expiry_date):
        raise MalformedDate(f"not a calendar date: {metadata.expiry_date!r}")
    return metadata.expiry_date < now_date
