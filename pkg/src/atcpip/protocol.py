"""Licensing session protocol.

Twelve wire actions drive a provider and a requester state machine
through negotiation, payment, token minting, and delivery. Transitions
are pure: they take a session plus one event (an inbound message, a
timer expiry, or an internal decision injected by the agent runtime)
and return outbound messages and side-effect commands. Everything that
touches a ledger, wallet, or policy happens in the runtime, which feeds
the result back in as the next internal decision. That keeps every
state change replayable from the event log alone.

The wire format is a 4-byte big-endian length prefix over the canonical
JSON of the message map, and decoding rejects any frame whose payload
is not byte-identical to its own re-encoding.
"""

import enum
from dataclasses import dataclass, field
from typing import Optional

from . import canon
from .errors import AbortedExchange, MalformedFrame, ParseError, ProtocolViolation
from .ledger import token_from_value, token_to_value
from .terms import terms_from_value

ACTIONS = (
    "request_info",
    "non_ip_notice",
    "propose_terms",
    "counter_terms",
    "final_terms",
    "accept_terms",
    "payment_required",
    "payment_confirmed",
    "license_token",
    "deliver_ip",
    "acknowledge_receipt",
    "reject",
)

REQUIRED_BODY_KEYS = {
    "request_info": ("content_id",),
    "non_ip_notice": ("content_id", "content", "note"),
    "propose_terms": ("terms", "round"),
    "counter_terms": ("suggestions", "round"),
    "final_terms": ("terms", "round"),
    "accept_terms": ("terms_hash",),
    "payment_required": ("amount", "split"),
    "payment_confirmed": ("amount",),
    "license_token": ("token",),
    "deliver_ip": ("content_id", "content", "token"),
    "acknowledge_receipt": ("license_id",),
    "reject": ("reason",),
}

NON_IP_NOTE = "Content not considered IP; no license required."
NON_IP_MEMORY = "Non-IP content sent without contract."

NO_TOKEN_FAILURE = "No valid license token received."
NO_PAYMENT_FAILURE = "Payment not confirmed by requester."
NO_TERMS_FAILURE = "No terms received."
NO_FINAL_TERMS_FAILURE = "No final terms received."
NO_PAYMENT_REQUEST_FAILURE = "No payment request received."
NO_DELIVERY_FAILURE = "IP delivery not received."


@dataclass(frozen=True)
class ProtocolMessage:
    session_id: str
    seq: int
    sender: str
    recipient: str
    action: str
    body: dict

    def to_value(self):
        return {
            "session_id": self.session_id,
            "seq": self.seq,
            "sender": self.sender,
            "recipient": self.recipient,
            "action": self.action,
            "body": self.body,
        }


def message_from_value(value):
    if not isinstance(value, dict):
        raise ParseError("message must be a map")
    expected = {"session_id", "seq", "sender", "recipient", "action", "body"}
    if set(value) != expected:
        raise ParseError("message must carry exactly session_id/seq/sender/recipient/action/body")
    action = value["action"]
    if action not in REQUIRED_BODY_KEYS:
        raise ParseError(f"unknown action {action!r}")
    seq = value["seq"]
    if isinstance(seq, bool) or not isinstance(seq, int) or seq < 0:
        raise ParseError("seq must be a non-negative integer")
    for name in ("session_id", "sender", "recipient"):
        if not isinstance(value[name], str) or not value[name]:
            raise ParseError(f"{name} must be a non-empty string")
    body = value["body"]
    if not isinstance(body, dict):
        raise ParseError("body must be a map")
    missing = [key for key in REQUIRED_BODY_KEYS[action] if key not in body]
    if missing:
        raise ParseError(f"{action} body missing {missing[0]!r}")
    return ProtocolMessage(
        session_id=value["session_id"],
        seq=seq,
        sender=value["sender"],
        recipient=value["recipient"],
        action=action,
        body=body,
    )


FRAME_HEADER = 4


def encode_message(message):
    payload = canon.dumps(message.to_value())
    return len(payload).to_bytes(FRAME_HEADER, "big") + payload


def read_frame(data):
    """Split one frame off the front; returns (message, remaining bytes)."""
    if not isinstance(data, (bytes, bytearray)):
        raise MalformedFrame("frames are raw bytes")
    data = bytes(data)
    if len(data) < FRAME_HEADER:
        raise MalformedFrame("frame shorter than its length header")
    declared = int.from_bytes(data[:FRAME_HEADER], "big")
    end = FRAME_HEADER + declared
    if len(data) < end:
        raise MalformedFrame(f"frame truncated: declares {declared} payload bytes")
    payload = data[FRAME_HEADER:end]
    try:
        value = canon.loads(payload)
    except ParseError as exc:
        raise MalformedFrame(f"payload is not canonical JSON: {exc}") from None
    try:
        message = message_from_value(value)
    except ParseError as exc:
        raise MalformedFrame(str(exc)) from None
    if canon.dumps(value) != payload:
        raise MalformedFrame("payload bytes are not in canonical form")
    return message, data[end:]


def decode_message(data):
    """Decode exactly one frame; trailing bytes are an error."""
    message, rest = read_frame(data)
    if rest:
        raise MalformedFrame(f"{len(rest)} trailing bytes after frame")
    return message


# -- session plumbing ---------------------------------------------------------


@dataclass(frozen=True)
class SessionConfig:
    negotiation_timeout: int = 10
    settlement_timeout: int = 30
    ack_required: bool = False
    onchain_drafts: bool = True

    def __post_init__(self):
        for name in ("negotiation_timeout", "settlement_timeout"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise ValueError(f"{name} must be a positive tick count")


class ProviderState(enum.Enum):
    IDLE = "idle"
    EVALUATING = "evaluating"
    TERMS_PROPOSED = "terms_proposed"
    NEGOTIATING = "negotiating"
    AWAITING_PAYMENT = "awaiting_payment"
    AWAITING_TOKEN = "awaiting_token"
    DELIVERING = "delivering"
    AWAITING_ACK = "awaiting_ack"
    COMPLETED = "completed"
    REJECTED = "rejected"
    FAILED = "failed"


class RequesterState(enum.Enum):
    REQUESTING = "requesting"
    AWAITING_TERMS = "awaiting_terms"
    EVALUATING_TERMS = "evaluating_terms"
    COUNTERING = "countering"
    PAYING = "paying"
    MINTING = "minting"
    AWAITING_DELIVERY = "awaiting_delivery"
    ACKNOWLEDGING = "acknowledging"
    COMPLETED = "completed"
    REJECTED = "rejected"
    FAILED = "failed"


PROVIDER_TERMINAL = frozenset(
    {ProviderState.COMPLETED, ProviderState.REJECTED, ProviderState.FAILED}
)
REQUESTER_TERMINAL = frozenset(
    {RequesterState.COMPLETED, RequesterState.REJECTED, RequesterState.FAILED}
)

# State entry (re)starts the listed timer; entering any other state
# cancels the previous one. Ack waits reuse the negotiation timeout.
PROVIDER_TIMERS = {
    ProviderState.TERMS_PROPOSED: ("negotiation", "negotiation_timeout"),
    ProviderState.NEGOTIATING: ("negotiation", "negotiation_timeout"),
    ProviderState.AWAITING_PAYMENT: ("settlement", "settlement_timeout"),
    ProviderState.AWAITING_TOKEN: ("settlement", "settlement_timeout"),
    ProviderState.AWAITING_ACK: ("ack", "negotiation_timeout"),
}
REQUESTER_TIMERS = {
    RequesterState.AWAITING_TERMS: ("negotiation", "negotiation_timeout"),
    RequesterState.COUNTERING: ("negotiation", "negotiation_timeout"),
    RequesterState.PAYING: ("settlement", "settlement_timeout"),
    RequesterState.AWAITING_DELIVERY: ("settlement", "settlement_timeout"),
}


@dataclass(frozen=True)
class TimerExpired:
    kind: str  # "negotiation" | "settlement" | "ack"


@dataclass(frozen=True)
class InternalDecision:
    """Outcome of a command, fed back by the runtime at the same tick."""

    kind: str
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Command:
    """Side effect for the runtime: evaluate, settle, mint, record, log."""

    kind: str
    data: dict = field(default_factory=dict)


@dataclass
class ProviderSession:
    session_id: str
    provider_id: str
    requester_id: str
    config: SessionConfig
    state: ProviderState = ProviderState.IDLE
    content_id: str = ""
    request_body: dict = field(default_factory=dict)
    terms: object = None
    terms_hash: str = ""
    previous_license_id: Optional[str] = None
    round: int = 0
    plan_amount: int = 0
    plan_value: Optional[dict] = None
    accepted: bool = False
    unconfirmed: bool = False
    committed_token: object = None
    acknowledged: bool = False
    failure_reason: str = ""
    reject_reason: str = ""
    out_seq: int = 0
    last_seq_seen: int = -1

    role = "provider"

    @property
    def peer_id(self):
        return self.requester_id

    @property
    def agent_id(self):
        return self.provider_id

    def terminal(self):
        return self.state in PROVIDER_TERMINAL


@dataclass
class RequesterSession:
    session_id: str
    requester_id: str
    provider_id: str
    config: SessionConfig
    state: RequesterState = RequesterState.REQUESTING
    content_id: str = ""
    offer: dict = field(default_factory=dict)
    offered_terms: object = None
    offered_terms_hash: str = ""
    offered_previous_license_id: Optional[str] = None
    round: int = 0
    counters_used: int = 0
    accepted_terms: object = None
    accepted_terms_hash: str = ""
    prepared_token: object = None
    received_token: object = None
    content: object = None
    content_licensed: bool = False
    failure_reason: str = ""
    reject_reason: str = ""
    out_seq: int = 0
    last_seq_seen: int = -1

    role = "requester"

    @property
    def peer_id(self):
        return self.provider_id

    @property
    def agent_id(self):
        return self.requester_id

    def terminal(self):
        return self.state in REQUESTER_TERMINAL


def _send(session, action, body):
    message = ProtocolMessage(
        session_id=session.session_id,
        seq=session.out_seq,
        sender=session.agent_id,
        recipient=session.peer_id,
        action=action,
        body=body,
    )
    session.out_seq += 1
    return message


def _violation(session, event):
    kind = getattr(event, "action", None) or getattr(event, "kind", type(event).__name__)
    return ProtocolViolation(
        f"{session.role} session {session.session_id!r} in {session.state.value}"
        f" cannot take event {kind!r}"
    )


def _fail(session, reason, state_enum):
    session.failure_reason = reason
    session.state = state_enum.FAILED
    return [Command("log_memory", {"text": f"Session failed: {reason}"})]


# -- provider transition --------------------------------------------------------


def provider_transition(session, event):
    """Apply one event; returns outbound messages and commands in order."""
    state = session.state

    if isinstance(event, ProtocolMessage):
        if event.action == "reject" and not session.terminal():
            session.reject_reason = event.body.get("reason", "")
            session.state = ProviderState.REJECTED
            return []

        if state is ProviderState.IDLE and event.action == "request_info":
            session.content_id = event.body["content_id"]
            session.request_body = dict(event.body)
            session.state = ProviderState.EVALUATING
            return [Command("evaluate_request", {"body": dict(event.body)})]

        if state in (ProviderState.TERMS_PROPOSED, ProviderState.NEGOTIATING):
            if event.action == "counter_terms":
                session.round = max(session.round, _round_of(event))
                session.state = ProviderState.NEGOTIATING
                return [Command("evaluate_counter", {"suggestions": event.body["suggestions"]})]
            if event.action == "accept_terms":
                if event.body["terms_hash"] != session.terms_hash:
                    raise _violation(session, event)
                session.accepted = True
                return _provider_enter_settlement(session)

        if state is ProviderState.AWAITING_PAYMENT and event.action == "payment_confirmed":
            if event.body["amount"] != session.plan_amount:
                raise _violation(session, event)
            session.state = ProviderState.AWAITING_TOKEN
            return []

        if state is ProviderState.AWAITING_TOKEN and event.action == "license_token":
            session.state = ProviderState.DELIVERING
            return [Command("atomic_exchange", {"token": event.body["token"]})]

        if state is ProviderState.AWAITING_ACK and event.action == "acknowledge_receipt":
            session.acknowledged = True
            session.state = ProviderState.COMPLETED
            return [Command("record_transaction", {})]

        raise _violation(session, event)

    if isinstance(event, TimerExpired):
        expected = PROVIDER_TIMERS.get(state)
        if expected is None or expected[0] != event.kind:
            raise _violation(session, event)
        if state in (ProviderState.TERMS_PROPOSED, ProviderState.NEGOTIATING):
            # Silent requester: proceed on the standing terms, unconfirmed.
            session.unconfirmed = True
            return _provider_enter_settlement(session)
        if state is ProviderState.AWAITING_PAYMENT:
            return _fail(session, NO_PAYMENT_FAILURE, ProviderState)
        if state is ProviderState.AWAITING_TOKEN:
            return _fail(session, NO_TOKEN_FAILURE, ProviderState)
        if state is ProviderState.AWAITING_ACK:
            session.acknowledged = False
            session.state = ProviderState.COMPLETED
            return [Command("record_transaction", {})]
        raise _violation(session, event)

    if isinstance(event, InternalDecision):
        return _provider_decision(session, event)

    raise _violation(session, event)


def _round_of(event):
    round_number = event.body.get("round", 0)
    if isinstance(round_number, bool) or not isinstance(round_number, int):
        return 0
    return round_number


def _provider_enter_settlement(session):
    if session.terms is not None and session.terms.upfront_fee > 0:
        session.state = ProviderState.AWAITING_PAYMENT
        return [Command("request_payment", {})]
    session.state = ProviderState.AWAITING_TOKEN
    return []


def _provider_decision(session, event):
    state = session.state

    if state is ProviderState.EVALUATING:
        if event.kind == "propose":
            session.terms = event.data["terms"]
            session.terms_hash = event.data["terms_hash"]
            session.previous_license_id = event.data.get("previous_license_id")
            session.round += 1
            session.state = ProviderState.TERMS_PROPOSED
            outputs = []
            if session.config.onchain_drafts:
                outputs.append(Command("mint_draft", {"terms": session.terms}))
            body = {"terms": session.terms.to_value(), "round": session.round}
            if session.previous_license_id is not None:
                body["previous_license_id"] = session.previous_license_id
            outputs.append(_send(session, "propose_terms", body))
            return outputs
        if event.kind == "non_ip":
            session.state = ProviderState.COMPLETED
            return [
                _send(
                    session,
                    "non_ip_notice",
                    {
                        "content_id": session.content_id,
                        "content": event.data["content"],
                        "note": NON_IP_NOTE,
                    },
                ),
                Command("log_memory", {"text": NON_IP_MEMORY}),
            ]
        if event.kind == "gate_fail":
            session.reject_reason = event.data["reason"]
            session.state = ProviderState.REJECTED
            return [_send(session, "reject", {"reason": event.data["reason"]})]
        if event.kind == "hold":
            # Courtship: the decision comes later via a scheduled event.
            return []

    if state is ProviderState.NEGOTIATING:
        if event.kind == "revised":
            session.terms = event.data["terms"]
            session.terms_hash = event.data["terms_hash"]
            session.round += 1
            outputs = []
            if session.config.onchain_drafts and not event.data.get("echo", False):
                outputs.append(Command("mint_draft", {"terms": session.terms}))
            outputs.append(
                _send(
                    session,
                    "final_terms",
                    {"terms": session.terms.to_value(), "round": session.round},
                )
            )
            return outputs
        if event.kind == "revision_reject":
            session.reject_reason = event.data["reason"]
            session.state = ProviderState.REJECTED
            return [_send(session, "reject", {"reason": event.data["reason"]})]

    if state is ProviderState.AWAITING_PAYMENT and event.kind == "payment_plan":
        session.plan_amount = event.data["amount"]
        session.plan_value = event.data["plan_value"]
        return [
            _send(
                session,
                "payment_required",
                {"amount": event.data["amount"], "split": event.data["plan_value"]["split"]},
            )
        ]

    if state is ProviderState.DELIVERING:
        if event.kind == "exchange_committed":
            session.committed_token = event.data["token"]
            outputs = [
                _send(
                    session,
                    "deliver_ip",
                    {
                        "content_id": session.content_id,
                        "content": event.data["content"],
                        "token": token_to_value(event.data["token"]),
                    },
                )
            ]
            if session.config.ack_required:
                session.state = ProviderState.AWAITING_ACK
            else:
                session.state = ProviderState.COMPLETED
                outputs.append(Command("record_transaction", {}))
            return outputs
        if event.kind == "exchange_aborted":
            return _fail(session, NO_TOKEN_FAILURE, ProviderState)

    raise _violation(session, event)


# -- requester transition ---------------------------------------------------------


def requester_transition(session, event):
    """Apply one event; returns outbound messages and commands in order."""
    state = session.state

    if isinstance(event, ProtocolMessage):
        if event.action == "reject" and not session.terminal():
            session.reject_reason = event.body.get("reason", "")
            session.state = RequesterState.REJECTED
            return []

        if state is RequesterState.AWAITING_TERMS and event.action == "non_ip_notice":
            session.content = event.body["content"]
            session.content_licensed = False
            session.state = RequesterState.COMPLETED
            return [
                Command(
                    "receive_content",
                    {"content_id": event.body["content_id"], "content": event.body["content"],
                     "licensed": False},
                )
            ]

        if (
            state in (RequesterState.AWAITING_TERMS, RequesterState.COUNTERING)
            and event.action in ("propose_terms", "final_terms")
        ):
            session.offered_terms = _parse_terms(session, event.body["terms"])
            session.offered_previous_license_id = event.body.get("previous_license_id")
            session.round = max(session.round, _round_of(event))
            session.state = RequesterState.EVALUATING_TERMS
            return [Command("evaluate_offer", {"terms": session.offered_terms})]

        if state is RequesterState.PAYING and event.action == "payment_required":
            amount = event.body["amount"]
            split = event.body["split"]
            if (
                isinstance(amount, bool)
                or not isinstance(amount, int)
                or session.accepted_terms is None
                or amount != session.accepted_terms.upfront_fee
            ):
                raise _violation(session, event)
            if not isinstance(split, list) or any(
                not isinstance(line, dict) or set(line) != {"to", "amount"} for line in split
            ):
                raise _violation(session, event)
            if sum(line["amount"] for line in split) != amount:
                raise _violation(session, event)
            return [Command("settle", {"amount": amount, "split": split})]

        if state is RequesterState.AWAITING_DELIVERY and event.action == "deliver_ip":
            token = _parse_token(session, event.body["token"])
            if token.height is None or token.terms_hash != session.accepted_terms_hash:
                raise _violation(session, event)
            session.received_token = token
            session.content = event.body["content"]
            session.content_licensed = True
            session.state = RequesterState.ACKNOWLEDGING
            outputs = []
            if session.config.ack_required:
                outputs.append(
                    _send(session, "acknowledge_receipt", {"license_id": token.license_id})
                )
            outputs.append(
                Command(
                    "record_transaction",
                    {"content_id": event.body["content_id"], "content": event.body["content"]},
                )
            )
            return outputs

        raise _violation(session, event)

    if isinstance(event, TimerExpired):
        expected = REQUESTER_TIMERS.get(state)
        if expected is None or expected[0] != event.kind:
            raise _violation(session, event)
        if state is RequesterState.AWAITING_TERMS:
            return _fail(session, NO_TERMS_FAILURE, RequesterState)
        if state is RequesterState.COUNTERING:
            return _fail(session, NO_FINAL_TERMS_FAILURE, RequesterState)
        if state is RequesterState.PAYING:
            return _fail(session, NO_PAYMENT_REQUEST_FAILURE, RequesterState)
        if state is RequesterState.AWAITING_DELIVERY:
            return _fail(session, NO_DELIVERY_FAILURE, RequesterState)
        raise _violation(session, event)

    if isinstance(event, InternalDecision):
        return _requester_decision(session, event)

    raise _violation(session, event)


def _parse_terms(session, value):
    try:
        return terms_from_value(value)
    except ParseError as exc:
        raise ProtocolViolation(f"terms in message do not parse: {exc}") from None


def _parse_token(session, value):
    try:
        return token_from_value(value)
    except ParseError as exc:
        raise ProtocolViolation(f"token in message does not parse: {exc}") from None


def _requester_decision(session, event):
    state = session.state

    if state is RequesterState.REQUESTING and event.kind == "start":
        session.content_id = event.data["content_id"]
        session.offer = dict(event.data.get("offer") or {})
        session.state = RequesterState.AWAITING_TERMS
        body = {"content_id": session.content_id}
        if "jurisdiction" in event.data:
            body["jurisdiction"] = event.data["jurisdiction"]
        if session.offer:
            body["offer"] = dict(session.offer)
        return [_send(session, "request_info", body)]

    if state is RequesterState.EVALUATING_TERMS:
        if event.kind == "offer_accept":
            session.accepted_terms = session.offered_terms
            session.accepted_terms_hash = event.data["terms_hash"]
            outputs = [
                _send(session, "accept_terms", {"terms_hash": session.accepted_terms_hash})
            ]
            if session.accepted_terms.upfront_fee > 0:
                session.state = RequesterState.PAYING
            else:
                session.state = RequesterState.MINTING
                outputs.append(Command("prepare_token", {}))
            return outputs
        if event.kind == "offer_counter":
            session.counters_used += 1
            session.round += 1
            outputs = []
            if session.config.onchain_drafts:
                outputs.append(Command("mint_draft", {"terms": event.data["countered_terms"]}))
            outputs.append(
                _send(
                    session,
                    "counter_terms",
                    {"suggestions": event.data["delta_value"], "round": session.round},
                )
            )
            session.state = RequesterState.COUNTERING
            return outputs
        if event.kind == "offer_reject":
            session.reject_reason = event.data["reason"]
            session.state = RequesterState.REJECTED
            return [_send(session, "reject", {"reason": event.data["reason"]})]

    if state is RequesterState.PAYING:
        if event.kind == "payment_settled":
            session.state = RequesterState.MINTING
            return [
                _send(session, "payment_confirmed", {"amount": event.data["amount"]}),
                Command("prepare_token", {}),
            ]
        if event.kind == "payment_failed":
            return _fail(session, event.data["reason"], RequesterState)

    if state is RequesterState.MINTING:
        if event.kind == "token_prepared":
            session.prepared_token = event.data["token"]
            session.state = RequesterState.AWAITING_DELIVERY
            return [
                _send(
                    session, "license_token", {"token": token_to_value(session.prepared_token)}
                )
            ]
        if event.kind == "prepare_failed":
            return _fail(session, event.data["reason"], RequesterState)

    if state is RequesterState.ACKNOWLEDGING and event.kind == "finalize":
        session.state = RequesterState.COMPLETED
        return []

    raise _violation(session, event)


# -- atomic exchange ----------------------------------------------------------------


def atomic_exchange(ledger, token, expected_terms_hash):
    """Commit the requester's prepared token against the agreed terms.

    Either the commit lands on the ledger and the caller must emit the
    paired delivery at the same tick, or AbortedExchange propagates and
    nothing was written. There is no third outcome.
    """
    if token.terms_hash != expected_terms_hash:
        raise AbortedExchange("token terms differ from the agreed terms")
    return ledger.commit_agreement(token)
