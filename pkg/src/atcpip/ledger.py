"""Simulated append-only ledger.

A hash chain over canonical payloads stands in for a real chain:
``entry_hash = sha256(previous_entry_hash_hex + payload_hash_hex)`` with
sixty-four zeros before entry zero. Signatures are simulated the same
way (sha256 over secret key bytes plus payload bytes); the point is
tamper evidence and replayability, not cryptographic strength.

Agreement tokens are minted in two steps so the token/delivery exchange
can be atomic: ``prepare_agreement`` builds and signs an uncommitted
token, ``commit_agreement`` re-verifies everything and appends. A token
is only ever valid if its entry is on an intact chain.
"""

from dataclasses import dataclass, replace
from typing import Optional

from . import canon
from .errors import (
    AbortedExchange,
    CyclicLineage,
    DuplicateAgent,
    ExpiredTerms,
    InvalidTerms,
    MalformedDate,
    NonMonotonicRound,
    ParseError,
    TamperedLedger,
    UnknownAgent,
    UnknownLicense,
)
from .terms import (
    PERPETUAL,
    LicenseMetadata,
    is_iso_date,
    metadata_from_value,
    terms_from_value,
    terms_hash,
    validate,
)

GENESIS_HASH = "0" * 64
LICENSE_ID_LENGTH = 32

ENTRY_KINDS = frozenset(
    {"agreement_token", "draft_token", "payment", "dispute", "verdict", "reputation_event"}
)


@dataclass(frozen=True)
class LedgerEntry:
    height: int
    kind: str
    payload: dict  # canonical map, always carries its own "kind"
    payload_hash: str
    entry_hash: str

    def to_value(self):
        return {
            "height": self.height,
            "kind": self.kind,
            "payload": self.payload,
            "payload_hash": self.payload_hash,
            "entry_hash": self.entry_hash,
        }


@dataclass(frozen=True)
class AgreementToken:
    """A licence bound to its terms and (once committed) a ledger entry."""

    metadata: LicenseMetadata
    terms: object
    terms_hash: str
    requester_signature: str
    session_id: str
    height: Optional[int] = None  # None until committed

    @property
    def license_id(self):
        return self.metadata.license_id


@dataclass(frozen=True)
class DraftToken:
    session_id: str
    round: int
    proposer_id: str
    terms_hash: str
    height: int


def token_to_value(token):
    """Wire form of an agreement token; height only once committed."""
    out = {
        "metadata": token.metadata.to_value(),
        "terms": token.terms.to_value(),
        "terms_hash": token.terms_hash,
        "requester_signature": token.requester_signature,
        "session_id": token.session_id,
    }
    if token.height is not None:
        out["height"] = token.height
    return out


def token_from_value(value):
    if not isinstance(value, dict):
        raise ParseError("token must be a map")
    required = {"metadata", "terms", "terms_hash", "requester_signature", "session_id"}
    missing = required - set(value)
    if missing:
        raise ParseError(f"token missing field {sorted(missing)[0]!r}")
    extra = set(value) - required - {"height"}
    if extra:
        raise ParseError(f"unknown token field {sorted(extra)[0]!r}")
    height = value.get("height")
    if height is not None and (isinstance(height, bool) or not isinstance(height, int)):
        raise ParseError("token height must be an integer")
    return AgreementToken(
        metadata=metadata_from_value(value["metadata"]),
        terms=terms_from_value(value["terms"]),
        terms_hash=value["terms_hash"],
        requester_signature=value["requester_signature"],
        session_id=value["session_id"],
        height=height,
    )


def chain_entry_hash(previous_hash, payload_hash):
    return canon.sha256_hex((previous_hash + payload_hash).encode("ascii"))


def derive_license_id(metadata_value, link_to_terms):
    """First 32 hex chars of the hash over identity fields plus the terms hash.

    ``metadata_value`` must not contain license_id or signature; both are
    derived from this digest.
    """
    digest = canon.sha256_hex(canon.dumps(metadata_value) + link_to_terms.encode("ascii"))
    return digest[:LICENSE_ID_LENGTH]


def simulated_signature(secret_key, payload):
    return canon.sha256_hex(secret_key + payload)


class KeyRegistry:
    """Agent id to secret key mapping for simulated signatures."""

    def __init__(self):
        self._secrets = {}

    def register(self, agent_id, secret_key):
        if agent_id in self._secrets:
            raise DuplicateAgent(f"agent {agent_id!r} already registered")
        if not isinstance(secret_key, (bytes, bytearray)):
            raise TypeError("secret keys are raw bytes")
        self._secrets[agent_id] = bytes(secret_key)

    def known(self, agent_id):
        return agent_id in self._secrets

    def sign(self, agent_id, payload):
        if agent_id not in self._secrets:
            raise UnknownAgent(f"agent {agent_id!r} has no registered key")
        return simulated_signature(self._secrets[agent_id], payload)

    def verify(self, agent_id, payload, signature):
        if agent_id not in self._secrets:
            return False
        return simulated_signature(self._secrets[agent_id], payload) == signature


def _metadata_signing_bytes(metadata, link_to_terms):
    doc = metadata.to_value()
    doc.pop("signature", None)
    return canon.dumps(doc) + link_to_terms.encode("ascii")


class Ledger:
    """Append-only entry list plus the token indexes derived from it.

    All indexes (committed tokens, per-session draft rounds, revocations)
    are maintained inside ``append`` itself, so replaying an exported
    entry list through ``append_raw`` reconstructs the same state.
    """

    def __init__(self, current_date="2024-01-01"):
        if not is_iso_date(current_date):
            raise MalformedDate(f"not a calendar date: {current_date!r}")
        self.current_date = current_date
        self.keys = KeyRegistry()
        self._entries = []
        self._tokens = {}  # license_id -> committed AgreementToken
        self._session_agreements = {}  # session_id -> license_id
        self._session_rounds = {}  # session_id -> last draft round
        self._revoked = set()
        self.on_append = None  # hook(entry), used by the simulator transcript

    # -- chain primitives ---------------------------------------------------

    def __len__(self):
        return len(self._entries)

    @property
    def height(self):
        return len(self._entries)

    def entries(self):
        return tuple(self._entries)

    def entry(self, height):
        return self._entries[height]

    def tip_hash(self):
        return self._entries[-1].entry_hash if self._entries else GENESIS_HASH

    def append(self, kind, payload):
        if kind not in ENTRY_KINDS:
            raise ParseError(f"unknown entry kind {kind!r}")
        if not isinstance(payload, dict):
            raise ParseError("payload must be a map")
        if payload.get("kind", kind) != kind:
            raise ParseError("payload kind field contradicts entry kind")
        payload = {"kind": kind, **payload}
        # Parse whatever the indexes will need before touching the chain,
        # so a malformed payload cannot leave a half-applied append.
        apply_index = self._prepare_index(kind, payload, height=len(self._entries))
        payload_hash = canon.hash_value(payload)
        entry = LedgerEntry(
            height=len(self._entries),
            kind=kind,
            payload=payload,
            payload_hash=payload_hash,
            entry_hash=chain_entry_hash(self.tip_hash(), payload_hash),
        )
        self._entries.append(entry)
        apply_index()
        if self.on_append is not None:
            self.on_append(entry)
        return entry

    def _prepare_index(self, kind, payload, height):
        try:
            if kind == "draft_token":
                session_id, round_number = payload["session_id"], payload["round"]

                def apply():
                    self._session_rounds[session_id] = round_number

            elif kind == "agreement_token":
                token = AgreementToken(
                    metadata=metadata_from_value(payload["metadata"]),
                    terms=terms_from_value(payload["terms"]),
                    terms_hash=payload["terms_hash"],
                    requester_signature=payload["requester_signature"],
                    session_id=payload["session_id"],
                    height=height,
                )

                def apply():
                    self._tokens[token.license_id] = token
                    if token.session_id:
                        self._session_agreements[token.session_id] = token.license_id

            elif kind == "verdict" and "revokes_license_id" in payload:
                license_id = payload["revokes_license_id"]

                def apply():
                    self._revoked.add(license_id)

            else:

                def apply():
                    pass

            return apply
        except KeyError as exc:
            raise ParseError(f"{kind} payload missing field {exc.args[0]!r}") from None

    # -- agents ---------------------------------------------------------------

    def register_agent(self, agent_id, secret_key):
        self.keys.register(agent_id, secret_key)
        return self.append(
            "reputation_event", {"agent_id": agent_id, "event": "registered"}
        )

    # -- draft tokens ---------------------------------------------------------

    def next_round(self, session_id):
        return self._session_rounds.get(session_id, 0) + 1

    def mint_draft(self, session_id, round_number, proposer_id, terms):
        if not self.keys.known(proposer_id):
            raise UnknownAgent(f"unknown proposer {proposer_id!r}")
        if round_number != self.next_round(session_id):
            raise NonMonotonicRound(
                f"session {session_id!r} expects round {self.next_round(session_id)},"
                f" got {round_number}"
            )
        digest = terms_hash(terms)
        entry = self.append(
            "draft_token",
            {
                "session_id": session_id,
                "round": round_number,
                "proposer_id": proposer_id,
                "terms": terms.to_value(),
                "terms_hash": digest,
            },
        )
        return DraftToken(session_id, round_number, proposer_id, digest, entry.height)

    # -- agreement tokens -------------------------------------------------------

    def _check_version_and_lineage(self, version, previous_license_id):
        if previous_license_id is None:
            if version != 1:
                raise UnknownLicense("version above 1 requires previous_license_id")
            return
        previous = self._tokens.get(previous_license_id)
        if previous is None:
            raise UnknownLicense(f"previous license {previous_license_id!r} not on ledger")
        if version != previous.metadata.version + 1:
            raise UnknownLicense(
                f"version must be {previous.metadata.version + 1} to extend"
                f" {previous_license_id!r}, got {version}"
            )

    def prepare_agreement(
        self,
        requester_id,
        issuer_id,
        terms,
        expiry_date,
        previous_license_id=None,
        session_id="",
    ):
        """Build and sign an uncommitted token; nothing touches the chain."""
        for agent_id in (requester_id, issuer_id):
            if not self.keys.known(agent_id):
                raise UnknownAgent(f"unknown agent {agent_id!r}")
        report = validate(terms)
        if report:
            raise InvalidTerms(report)
        if expiry_date != PERPETUAL:
            if not is_iso_date(expiry_date):
                raise MalformedDate(f"not a calendar date: {expiry_date!r}")
            if expiry_date < self.current_date:
                raise ExpiredTerms(
                    f"expiry {expiry_date} predates ledger date {self.current_date}"
                )
        version = 1
        if previous_license_id is not None:
            previous = self._tokens.get(previous_license_id)
            if previous is None:
                raise UnknownLicense(f"previous license {previous_license_id!r} not on ledger")
            version = previous.metadata.version + 1
        digest = terms_hash(terms)
        identity = {
            "issuer_id": issuer_id,
            "holder_id": requester_id,
            "issue_date": self.height,
            "expiry_date": expiry_date,
            "version": version,
            "link_to_terms": digest,
        }
        if previous_license_id is not None:
            identity["previous_license_id"] = previous_license_id
        license_id = derive_license_id(identity, digest)
        metadata = LicenseMetadata(
            license_id=license_id,
            issuer_id=issuer_id,
            holder_id=requester_id,
            issue_date=self.height,
            expiry_date=expiry_date,
            version=version,
            link_to_terms=digest,
            signature="",
            previous_license_id=previous_license_id,
        )
        signature = self.keys.sign(
            requester_id, _metadata_signing_bytes(metadata, digest)
        )
        metadata = replace(metadata, signature=signature)
        return AgreementToken(
            metadata=metadata,
            terms=terms,
            terms_hash=digest,
            requester_signature=signature,
            session_id=session_id,
            height=None,
        )

    def token_problems(self, token):
        """Content checks shared by commit and verify; empty list means sound."""
        problems = []
        md = token.metadata
        if not self.keys.known(md.issuer_id):
            problems.append("unknown issuer")
        if not self.keys.known(md.holder_id):
            problems.append("unknown holder")
        try:
            digest = terms_hash(token.terms)
        except InvalidTerms:
            problems.append("terms fail validation")
            return problems
        if digest != token.terms_hash:
            problems.append("terms_hash does not match terms")
        if md.link_to_terms != token.terms_hash:
            problems.append("link_to_terms does not match terms_hash")
        identity = md.to_value()
        identity.pop("license_id")
        identity.pop("signature")
        if derive_license_id(identity, md.link_to_terms) != md.license_id:
            problems.append("license_id does not match identity fields")
        if md.signature != token.requester_signature:
            problems.append("metadata signature differs from requester signature")
        if not self.keys.verify(
            md.holder_id, _metadata_signing_bytes(md, md.link_to_terms), md.signature
        ):
            problems.append("signature verification failed")
        try:
            self._check_version_and_lineage(md.version, md.previous_license_id)
        except UnknownLicense as exc:
            problems.append(str(exc))
        return problems

    def commit_agreement(self, token):
        """Append a prepared token. Raises AbortedExchange and commits
        nothing if any content check fails."""
        if token.height is not None:
            raise AbortedExchange("token already committed")
        problems = self.token_problems(token)
        if problems:
            raise AbortedExchange(f"token content verification failed: {problems[0]}")
        if token.license_id in self._tokens:
            raise AbortedExchange(f"license {token.license_id!r} already committed")
        if token.session_id and token.session_id in self._session_agreements:
            raise AbortedExchange(f"session {token.session_id!r} already has an agreement")
        entry = self.append(
            "agreement_token",
            {
                "session_id": token.session_id,
                "metadata": token.metadata.to_value(),
                "terms": token.terms.to_value(),
                "terms_hash": token.terms_hash,
                "requester_signature": token.requester_signature,
            },
        )
        return self._tokens[token.license_id]

    def mint_agreement(
        self,
        requester_id,
        issuer_id,
        terms,
        expiry_date,
        previous_license_id=None,
        session_id="",
    ):
        token = self.prepare_agreement(
            requester_id, issuer_id, terms, expiry_date, previous_license_id, session_id
        )
        return self.commit_agreement(token)

    # -- verification -----------------------------------------------------------

    def verify_token(self, token, terms):
        """True only for a committed, untampered, unrevoked token whose
        terms hash to the linked digest."""
        try:
            if token.height is None or not (0 <= token.height < len(self._entries)):
                return False
            entry = self._entries[token.height]
            if entry.kind != "agreement_token":
                return False
            if canon.hash_value(entry.payload) != entry.payload_hash:
                return False
            md_value = token.metadata.to_value()
            if entry.payload.get("metadata") != md_value:
                return False
            if entry.payload.get("terms_hash") != token.terms_hash:
                return False
            if entry.payload.get("requester_signature") != token.requester_signature:
                return False
            digest = terms_hash(terms)
            if digest != token.terms_hash:
                return False
            if entry.payload.get("terms") != terms.to_value():
                return False
            if token.license_id in self._revoked:
                return False
            return not self.token_problems(token)
        except Exception:
            return False

    def is_revoked(self, license_id):
        return license_id in self._revoked

    def token(self, license_id):
        found = self._tokens.get(license_id)
        if found is None:
            raise UnknownLicense(f"no committed license {license_id!r}")
        return found

    def has_token(self, license_id):
        return license_id in self._tokens

    def session_agreement(self, session_id):
        license_id = self._session_agreements.get(session_id)
        return self._tokens[license_id] if license_id else None

    def chain_of_ownership(self, license_id):
        """Lineage root first, ending at license_id."""
        chain = []
        seen = set()
        cursor = license_id
        while cursor is not None:
            if cursor in seen:
                raise CyclicLineage(f"lineage of {license_id!r} loops at {cursor!r}")
            seen.add(cursor)
            token = self._tokens.get(cursor)
            if token is None:
                raise UnknownLicense(f"no committed license {cursor!r}")
            chain.append(token)
            cursor = token.metadata.previous_license_id
        chain.reverse()
        return chain

    def history(self, session_id):
        return [
            entry
            for entry in self._entries
            if entry.payload.get("session_id") == session_id
        ]

    def verify_chain(self):
        return verify_entries(self._entries)

    def require_intact(self):
        if not self.verify_chain():
            raise TamperedLedger("hash chain verification failed")

    # -- export / import ----------------------------------------------------------

    def export_entries(self):
        return [entry.to_value() for entry in self._entries]

    @classmethod
    def from_export(cls, value, current_date="2024-01-01"):
        """Rebuild a ledger (indexes included) from an exported entry list.

        Secret keys do not travel with exports, so the result can verify
        chains and serve evidence but cannot sign or mint.
        """
        entries = entries_from_export(value)
        book = cls(current_date)
        for entry in entries:
            book.append(entry.kind, entry.payload)
        return book


def verify_entries(entries):
    """Recompute the whole chain; accepts LedgerEntry objects or exported maps."""
    previous = GENESIS_HASH
    for position, item in enumerate(entries):
        if isinstance(item, LedgerEntry):
            item = item.to_value()
        elif not isinstance(item, dict):
            return False
        expected_keys = {"height", "kind", "payload", "payload_hash", "entry_hash"}
        if set(item) != expected_keys:
            return False
        payload = item["payload"]
        if not isinstance(payload, dict):
            return False
        if item["height"] != position:
            return False
        if item["kind"] not in ENTRY_KINDS or payload.get("kind") != item["kind"]:
            return False
        try:
            payload_hash = canon.hash_value(payload)
        except Exception:
            return False
        if payload_hash != item["payload_hash"]:
            return False
        entry_hash = chain_entry_hash(previous, payload_hash)
        if entry_hash != item["entry_hash"]:
            return False
        previous = entry_hash
    return True


def entries_from_export(value):
    """Rebuild LedgerEntry objects from an exported list, verifying first."""
    if not isinstance(value, list):
        raise ParseError("ledger export must be a list of entries")
    if not verify_entries(value):
        raise TamperedLedger("exported ledger fails hash chain verification")
    return [
        LedgerEntry(
            height=item["height"],
            kind=item["kind"],
            payload=item["payload"],
            payload_hash=item["payload_hash"],
            entry_hash=item["entry_hash"],
        )
        for item in value
    ]
