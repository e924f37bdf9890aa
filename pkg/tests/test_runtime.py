"""Runtime: catalogs, gating, negotiation wiring, settlement, courtship."""

from collections import deque
from decimal import Decimal

import pytest

from atcpip.ledger import Ledger
from atcpip.negotiation import (
    ChoiceBound,
    NegotiationPolicy,
    NumericBound,
    RISK_TIERS,
    SetBound,
)
from atcpip.payments import WalletSystem
from atcpip.ledger import token_to_value
from atcpip.protocol import (
    NO_PAYMENT_FAILURE,
    NO_TOKEN_FAILURE,
    NON_IP_MEMORY,
    ProtocolMessage,
    ProviderState,
    RequesterState,
    SessionConfig,
    message_from_value,
)
from atcpip.runtime import AgentRuntime, CatalogItem
from atcpip.terms import terms_hash
from atcpip.trust import (
    CompatibilityRules,
    JurisdictionProfile,
    JurisdictionRegistry,
    ReputationBoard,
)
from conftest import make_terms

US = JurisdictionProfile("US", "common_law", ("ccpa",), ("US", "CA", "GB"))
EU = JurisdictionProfile("EU", "civil_law", ("gdpr",), ("EU",))


def make_world(agents, rules=None, config=None):
    """agents: {agent_id: kwargs}; returns (ledger, wallets, board, runtimes)."""
    ledger = Ledger(current_date="2024-01-01")
    wallets = WalletSystem(ledger)
    board = ReputationBoard(ledger)
    registry = JurisdictionRegistry((US, EU))
    directory = {}
    runtimes = {}
    for agent_id, kwargs in agents.items():
        kwargs = dict(kwargs)
        jurisdiction = kwargs.pop("jurisdiction", "US")
        balance = kwargs.pop("balance", 0)
        items = kwargs.pop("items", ())
        ledger.register_agent(agent_id, agent_id.encode() + b"-key")
        wallets.open_account(agent_id, balance)
        directory[agent_id] = jurisdiction
        runtime = AgentRuntime(
            agent_id,
            ledger,
            wallets,
            board,
            registry,
            rules or CompatibilityRules(),
            directory,
            config=config,
            **kwargs,
        )
        for item in items:
            runtime.add_item(item)
        runtimes[agent_id] = runtime
    return ledger, wallets, board, runtimes


def pump(runtimes, messages):
    """Deliver messages directly until both sides go quiet."""
    queue = deque(messages)
    delivered = 0
    while queue:
        message = queue.popleft()
        queue.extend(runtimes[message.recipient].receive_message(message))
        delivered += 1
        assert delivered < 200, "message storm"
    return delivered


IP_TERMS = make_terms(
    name="dataset license",
    scope=("personal",),
    duration="2030-01-01",
    upfront_fee=10_000_000,
    royalty_rate="0.0500",
)

DATASET = CatalogItem("weather-data-2023", "temp,rain\n12,0.3", tags=("dataset",), terms=IP_TERMS)


def run_simple_deal(fee=10_000_000, balance=50_000_000, **world_kwargs):
    terms = IP_TERMS.replace(upfront_fee=fee)
    item = CatalogItem("weather-data-2023", DATASET.content, tags=("dataset",), terms=terms)
    ledger, wallets, board, runtimes = make_world(
        {"prov": {"items": (item,)}, "req": {"balance": balance}}, **world_kwargs
    )
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "weather-data-2023"))
    return ledger, wallets, board, runtimes


def test_full_deal_completes_with_token_payment_and_reputation():
    ledger, wallets, board, runtimes = run_simple_deal()
    prov = runtimes["prov"].session("s1")
    req = runtimes["req"].session("s1")
    assert prov.state is ProviderState.COMPLETED
    assert req.state is RequesterState.COMPLETED
    token = runtimes["req"].tokens["weather-data-2023"]
    assert ledger.verify_token(token, token.terms)
    assert token.metadata.issuer_id == "prov"
    assert token.metadata.holder_id == "req"
    assert wallets.balance("prov") == 10_000_000
    assert wallets.balance("req") == 40_000_000
    assert board.record("prov").successful_deals == 1
    assert board.record("req").successful_deals == 1
    assert f"License issued: {token.license_id}" in runtimes["prov"].memory_texts()
    assert f"License token accepted: {token.license_id}" in runtimes["req"].memory_texts()
    assert runtimes["req"].inventory["weather-data-2023"]["licensed"] is True
    assert runtimes["req"].inventory["weather-data-2023"]["content"] == DATASET.content


def test_both_sides_keep_matching_transaction_records():
    _, _, _, runtimes = run_simple_deal()
    prov_records = runtimes["prov"].transaction_records()
    req_records = runtimes["req"].transaction_records()
    assert len(prov_records) == 1 and len(req_records) == 1
    mine, theirs = prov_records[0], req_records[0]
    assert mine.terms_hash == theirs.terms_hash == terms_hash(IP_TERMS)
    assert mine.license_id == theirs.license_id
    assert mine.requester_id == theirs.requester_id == "req"
    assert mine.content_id == theirs.content_id == "weather-data-2023"
    assert mine.acknowledged is False and theirs.acknowledged is False
    assert mine.to_value()["kind"] == "transaction"


def test_acknowledged_flag_follows_the_ack_exchange():
    _, _, _, runtimes = run_simple_deal(config=SessionConfig(ack_required=True))
    assert runtimes["prov"].session("s1").state is ProviderState.COMPLETED
    assert runtimes["req"].session("s1").state is RequesterState.COMPLETED
    assert runtimes["prov"].transaction_records()[0].acknowledged is True
    assert runtimes["req"].transaction_records()[0].acknowledged is True


def test_fine_tuning_purpose_logs_the_upgrade_event():
    item = CatalogItem("weather-data-2023", DATASET.content, tags=("dataset",), terms=IP_TERMS)
    _, _, _, runtimes = make_world(
        {"prov": {"items": (item,)}, "req": {"balance": 50_000_000}}
    )
    pump(runtimes, runtimes["req"].start_request(
        "s1", "prov", "weather-data-2023", purpose="fine_tuning"))
    assert "fine_tuned_on:weather-data-2023" in runtimes["req"].memory_texts()


def test_ip_significance_flag_overrides_tags():
    flagged = CatalogItem("memo", "text", tags=(), ip_significant=True,
                          terms=IP_TERMS.replace(upfront_fee=0))
    unflagged = CatalogItem("corpus", "rows", tags=("dataset",), ip_significant=False)
    _, _, _, runtimes = make_world({"prov": {"items": (flagged, unflagged)}, "req": {}})
    assert runtimes["prov"].is_ip_significant("memo") is True
    assert runtimes["prov"].is_ip_significant("corpus") is False
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "corpus"))
    assert runtimes["req"].inventory["corpus"]["licensed"] is False
    pump(runtimes, runtimes["req"].start_request("s2", "prov", "memo"))
    assert runtimes["req"].tokens["memo"].license_id


def test_opening_offer_mints_a_draft_before_terms_go_out():
    ledger, _, _, _ = run_simple_deal()
    drafts = [entry for entry in ledger.entries() if entry.kind == "draft_token"]
    assert len(drafts) == 1
    assert drafts[0].payload["round"] == 1
    assert drafts[0].payload["proposer_id"] == "prov"
    assert drafts[0].payload["terms_hash"] == terms_hash(IP_TERMS)


def test_zero_fee_deal_skips_payment_entirely():
    ledger, wallets, _, runtimes = run_simple_deal(fee=0, balance=0)
    assert runtimes["req"].session("s1").state is RequesterState.COMPLETED
    assert wallets.balance("prov") == 0
    assert not [entry for entry in ledger.entries() if entry.kind == "payment"]


def test_non_ip_content_ships_without_contract():
    item = CatalogItem("forecast-today", "sunny, 21C", tags=("forecast",))
    ledger, wallets, _, runtimes = make_world(
        {"prov": {"items": (item,)}, "req": {}}
    )
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "forecast-today"))
    assert runtimes["prov"].session("s1").state is ProviderState.COMPLETED
    assert runtimes["req"].session("s1").state is RequesterState.COMPLETED
    assert runtimes["req"].inventory["forecast-today"]["licensed"] is False
    assert NON_IP_MEMORY in runtimes["prov"].memory_texts()
    assert not [e for e in ledger.entries() if e.kind in ("agreement_token", "draft_token")]


def test_unknown_content_is_rejected():
    _, _, _, runtimes = make_world({"prov": {}, "req": {}})
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "nothing"))
    req = runtimes["req"].session("s1")
    assert req.state is RequesterState.REJECTED
    assert "no such content" in req.reject_reason


def test_blocked_jurisdiction_pair_is_rejected():
    rules = CompatibilityRules(blocked_pairs=(("US", "EU"),))
    _, _, _, runtimes = make_world(
        {"prov": {"items": (DATASET,), "jurisdiction": "EU"}, "req": {"jurisdiction": "US"}},
        rules=rules,
    )
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "weather-data-2023"))
    req = runtimes["req"].session("s1")
    assert req.state is RequesterState.REJECTED
    assert "blocked" in req.reject_reason


def personal_data_item(compliance):
    terms = IP_TERMS.replace(compliance_requirements=compliance, upfront_fee=0)
    return CatalogItem(
        "patients", "id,age\n1,44", tags=("dataset",), flags=("personal_data",), terms=terms
    )


def test_personal_data_needs_covered_compliance_requirements():
    # EU provider, US requester, no adequacy: only a ccpa commitment passes.
    _, _, _, runtimes = make_world(
        {
            "prov": {"items": (personal_data_item(("ccpa",)),), "jurisdiction": "EU"},
            "req": {"jurisdiction": "US"},
        }
    )
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "patients"))
    assert runtimes["req"].session("s1").state is RequesterState.COMPLETED


def test_personal_data_without_compliance_terms_is_refused():
    _, _, _, runtimes = make_world(
        {
            "prov": {"items": (personal_data_item(()),), "jurisdiction": "EU"},
            "req": {"jurisdiction": "US"},
        }
    )
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "patients"))
    req = runtimes["req"].session("s1")
    assert req.state is RequesterState.REJECTED


def test_counter_inside_provider_bounds_is_taken_verbatim():
    terms = IP_TERMS.replace(royalty_rate=Decimal("0.2000"))
    item = CatalogItem("weather-data-2023", DATASET.content, tags=("dataset",), terms=terms)
    provider_policy = NegotiationPolicy(
        role="provider",
        bounds={"royalty_rate": NumericBound(Decimal("0.0500"), Decimal("0.2000"))},
    )
    requester_policy = NegotiationPolicy(
        role="requester",
        bounds={"royalty_rate": NumericBound(Decimal("0.0000"), Decimal("0.1000"))},
    )
    ledger, _, _, runtimes = make_world(
        {
            "prov": {"items": (item,), "provider_policy": provider_policy,
                     "tier": RISK_TIERS["conservative"]},
            "req": {"balance": 50_000_000, "requester_policy": requester_policy},
        }
    )
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "weather-data-2023"))
    req = runtimes["req"].session("s1")
    assert req.state is RequesterState.COMPLETED
    assert req.accepted_terms.royalty_rate == Decimal("0.1000")
    token = runtimes["req"].tokens["weather-data-2023"]
    assert token.terms.royalty_rate == Decimal("0.1000")
    rounds = [e.payload["round"] for e in ledger.entries() if e.kind == "draft_token"]
    # opening draft, counter draft; the verbatim accept re-mints nothing
    assert rounds == [1, 2]
    assert ledger.next_round("s1") == 3


def test_arbiter_auto_accepts_small_fee_movement():
    terms = IP_TERMS.replace(upfront_fee=10_000_000)
    item = CatalogItem("weather-data-2023", DATASET.content, tags=("dataset",), terms=terms)
    requester_policy = NegotiationPolicy(
        role="requester",
        bounds={"upfront_fee": NumericBound(0, 9_800_000)},
    )
    _, wallets, _, runtimes = make_world(
        {
            "prov": {"items": (item,), "tier": RISK_TIERS["standard"]},
            "req": {"balance": 50_000_000, "requester_policy": requester_policy},
        }
    )
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "weather-data-2023"))
    req = runtimes["req"].session("s1")
    # 2% under asking sits inside the standard tier's 5% band.
    assert req.state is RequesterState.COMPLETED
    assert req.accepted_terms.upfront_fee == 9_800_000
    assert wallets.balance("prov") == 9_800_000


def test_non_negotiable_offer_is_rejected_outright():
    terms = IP_TERMS.replace(scope=("commercial",), upfront_fee=0)
    item = CatalogItem("weather-data-2023", DATASET.content, tags=("dataset",), terms=terms)
    requester_policy = NegotiationPolicy(
        role="requester",
        bounds={"scope": SetBound({"personal"})},
        non_negotiable={"scope"},
    )
    _, _, _, runtimes = make_world(
        {"prov": {"items": (item,)}, "req": {"requester_policy": requester_policy}}
    )
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "weather-data-2023"))
    assert runtimes["req"].session("s1").state is RequesterState.REJECTED
    prov = runtimes["prov"].session("s1")
    assert prov.state is ProviderState.REJECTED
    assert "not negotiable" in prov.reject_reason


def test_stalled_negotiation_times_out_into_unconfirmed_then_fails():
    terms = IP_TERMS.replace(royalty_rate=Decimal("0.3000"))
    item = CatalogItem("weather-data-2023", DATASET.content, tags=("dataset",), terms=terms)
    provider_policy = NegotiationPolicy(role="provider", non_negotiable={"royalty_rate"})
    requester_policy = NegotiationPolicy(
        role="requester",
        bounds={"royalty_rate": NumericBound(Decimal("0.0000"), Decimal("0.0100"))},
        max_rounds=1,
    )
    _, _, _, runtimes = make_world(
        {
            "prov": {"items": (item,), "provider_policy": provider_policy,
                     "tier": RISK_TIERS["conservative"]},
            "req": {"balance": 50_000_000, "requester_policy": requester_policy},
        }
    )
    pump(runtimes, runtimes["req"].start_request("s1", "prov", "weather-data-2023"))
    prov = runtimes["prov"].session("s1")
    assert prov.state is ProviderState.NEGOTIATING
    assert "Counter budget exhausted; going silent." in runtimes["req"].memory_texts()
    # negotiation timer: provider proceeds on standing terms, unconfirmed
    pump(runtimes, runtimes["prov"].expire_timer("s1", "negotiation"))
    assert prov.unconfirmed is True
    assert prov.state is ProviderState.AWAITING_PAYMENT
    # the payment request lands on a requester who cannot take it
    assert any("Protocol violation" in note for note in runtimes["req"].memory_texts())
    # settlement timer: the deal fails with the payment reason
    pump(runtimes, runtimes["prov"].expire_timer("s1", "settlement"))
    assert prov.state is ProviderState.FAILED
    assert prov.failure_reason == NO_PAYMENT_FAILURE
    assert f"Session failed: {NO_PAYMENT_FAILURE}" in runtimes["prov"].memory_texts()


def test_insufficient_funds_fail_the_requester_side():
    _, wallets, _, runtimes = run_simple_deal(balance=5_000_000)
    req = runtimes["req"].session("s1")
    assert req.state is RequesterState.FAILED
    assert "holds 5000000" in req.failure_reason
    assert wallets.balance("req") == 5_000_000
    assert wallets.balance("prov") == 0
    prov = runtimes["prov"].session("s1")
    assert prov.state is ProviderState.AWAITING_PAYMENT
    pump(runtimes, runtimes["prov"].expire_timer("s1", "settlement"))
    assert prov.failure_reason == NO_PAYMENT_FAILURE


def test_renewal_extends_the_lineage():
    ledger, _, _, runtimes = run_simple_deal(balance=50_000_000)
    first = runtimes["req"].tokens["weather-data-2023"]
    pump(runtimes, runtimes["req"].start_request("s2", "prov", "weather-data-2023"))
    second = runtimes["req"].tokens["weather-data-2023"]
    assert second.metadata.version == 2
    assert second.metadata.previous_license_id == first.license_id
    chain = ledger.chain_of_ownership(second.license_id)
    assert [token.license_id for token in chain] == [first.license_id, second.license_id]


def test_derived_work_routes_royalties_upstream():
    stats_terms = make_terms(
        name="stats license", duration="2030-01-01",
        royalty_rate="0.0500", upfront_fee=0, scope=("personal", "sublicensable"),
    )
    stats = CatalogItem("stats-fn", "def sharpe(): ...", tags=("algorithm",), terms=stats_terms)
    algo_terms = make_terms(
        name="algo license", duration="2030-01-01",
        royalty_rate="0.0000", upfront_fee=100_000_000,
    )
    ledger, wallets, _, runtimes = make_world(
        {
            "g": {"items": (stats,)},
            "f": {"balance": 0},
            "e": {"balance": 120_000_000},
        }
    )
    pump(runtimes, runtimes["f"].start_request("s1", "g", "stats-fn"))
    assert runtimes["f"].tokens["stats-fn"].metadata.issuer_id == "g"
    algo = CatalogItem(
        "trading-algo", "if sharpe() > 2: buy()", tags=("algorithm",),
        terms=algo_terms, derived_from="stats-fn", extra_royalties=(("g", "0.1000"),),
    )
    runtimes["f"].add_item(algo)
    pump(runtimes, runtimes["e"].start_request("s2", "f", "trading-algo"))
    assert runtimes["e"].session("s2").state is RequesterState.COMPLETED
    assert wallets.balance("g") == 15_000_000
    assert wallets.balance("f") == 85_000_000
    assert wallets.balance("e") == 20_000_000
    lines = [
        (entry.payload["to"], entry.payload["amount"])
        for entry in ledger.entries()
        if entry.kind == "payment" and entry.payload.get("session_id") == "s2"
    ]
    assert lines == [("g", 15_000_000), ("f", 85_000_000)]
    # the sold license chains onto the upstream one
    token = runtimes["e"].tokens["trading-algo"]
    chain = ledger.chain_of_ownership(token.license_id)
    assert [t.metadata.issuer_id for t in chain] == ["g", "f"]


def test_downstream_sale_pays_rev_share_through_the_chain():
    guide_terms = make_terms(
        name="style guide", duration="2030-01-01",
        upfront_fee=0, royalty_rate="0.0000", rev_share="0.1000",
    )
    guide = CatalogItem("house-style", "always earnest", tags=("style_guide",), terms=guide_terms)
    ledger, wallets, _, runtimes = make_world(
        {"d": {"items": (guide,)}, "c": {}, "gallery": {"balance": 50_000_000}}
    )
    pump(runtimes, runtimes["c"].start_request("s1", "d", "house-style"))
    runtimes["c"].add_item(
        CatalogItem("painting-1", "<canvas>", tags=("artwork",), derived_from="house-style")
    )
    plan = runtimes["c"].sell("painting-1", "gallery", 50_000_000, session_id="sale-1")
    assert plan.lines == (("d", 5_000_000), ("c", 45_000_000))
    assert wallets.balance("d") == 5_000_000
    assert wallets.balance("c") == 45_000_000
    assert wallets.balance("gallery") == 0
    sale_entries = [
        entry for entry in ledger.entries()
        if entry.kind == "payment" and entry.payload.get("session_id") == "sale-1"
    ]
    assert [entry.payload["purpose"] for entry in sale_entries] == ["downstream_sale"] * 2


def test_style_guide_items_default_to_rev_share_terms():
    guide = CatalogItem("house-style", "always earnest", tags=("style_guide",))
    _, _, _, runtimes = make_world({"d": {"items": (guide,)}})
    opening = runtimes["d"]._opening_terms(guide, {})
    assert opening.upfront_fee == 0
    assert opening.rev_share == Decimal("0.1000")


def courtship_world():
    item = CatalogItem(
        "model-weights", "0xdeadbeef", tags=("personality",),
        terms=IP_TERMS.replace(upfront_fee=0), courtship=True,
    )
    return make_world(
        {
            "prov": {"items": (item,)},
            "r1": {"balance": 50_000_000},
            "r2": {"balance": 50_000_000},
            "r3": {"balance": 50_000_000},
        }
    )


def test_courtship_picks_the_highest_weighted_offer():
    _, wallets, _, runtimes = courtship_world()
    pump(runtimes, runtimes["r1"].start_request(
        "c1", "prov", "model-weights", offer={"upfront_fee": 12_000_000}))
    pump(runtimes, runtimes["r2"].start_request(
        "c2", "prov", "model-weights",
        offer={"upfront_fee": 10_000_000, "royalty_rate": "0.0300"}))
    pump(runtimes, runtimes["r3"].start_request(
        "c3", "prov", "model-weights",
        offer={"upfront_fee": 11_000_000, "royalty_rate": "0.0100"}))
    for session_id in ("c1", "c2", "c3"):
        assert runtimes["prov"].session(session_id).state is ProviderState.EVALUATING
    pump(runtimes, runtimes["prov"].decide_courtship("model-weights"))
    # 10M + 0.03 * 100M = 13M beats 12M flat and 11M + 1M
    assert runtimes["r2"].session("c2").state is RequesterState.COMPLETED
    token = runtimes["r2"].tokens["model-weights"]
    assert token.terms.upfront_fee == 10_000_000
    assert token.terms.royalty_rate == Decimal("0.0300")
    assert wallets.balance("prov") == 10_000_000
    for loser in ("r1", "r3"):
        session = runtimes[loser].sessions()[f"c{loser[-1]}"]
        assert session.state is RequesterState.REJECTED
        assert session.reject_reason == "another offer was selected"


def test_courtship_tie_goes_to_the_smaller_agent_id():
    _, _, _, runtimes = courtship_world()
    pump(runtimes, runtimes["r3"].start_request(
        "c3", "prov", "model-weights", offer={"upfront_fee": 12_000_000}))
    pump(runtimes, runtimes["r1"].start_request(
        "c1", "prov", "model-weights", offer={"upfront_fee": 12_000_000}))
    pump(runtimes, runtimes["prov"].decide_courtship("model-weights"))
    assert runtimes["r1"].session("c1").state is RequesterState.COMPLETED
    assert runtimes["r3"].session("c3").state is RequesterState.REJECTED


def test_replayed_messages_are_dropped():
    item = CatalogItem("forecast-today", "sunny", tags=("forecast",))
    _, _, _, runtimes = make_world({"prov": {"items": (item,)}, "req": {}})
    opening = runtimes["req"].start_request("s1", "prov", "forecast-today")
    first = runtimes["prov"].receive_message(opening[0])
    assert runtimes["prov"].receive_message(opening[0]) == []
    assert any("Dropped replayed" in note for note in runtimes["prov"].memory_texts())
    pump(runtimes, first)


def test_messages_for_unknown_sessions_are_dropped():
    _, _, _, runtimes = make_world({"prov": {"items": (DATASET,)}, "req": {}})
    opening = runtimes["req"].start_request("s1", "prov", "weather-data-2023")
    stray = opening[0]
    ghost = stray.to_value() | {"session_id": "ghost", "action": "accept_terms",
                                "body": {"terms_hash": "0" * 64}}
    assert runtimes["prov"].receive_message(message_from_value(ghost)) == []
    assert any("unknown session" in note for note in runtimes["prov"].memory_texts())


def test_timer_for_follows_session_state():
    config = SessionConfig(negotiation_timeout=7, settlement_timeout=19)
    _, _, _, runtimes = make_world(
        {"prov": {"items": (DATASET,)}, "req": {"balance": 50_000_000}}, config=config
    )
    outbound = runtimes["req"].start_request("s1", "prov", "weather-data-2023")
    assert runtimes["req"].timer_for("s1") == ("negotiation", 7)
    pump(runtimes, outbound)
    assert runtimes["req"].timer_for("s1") is None
    assert runtimes["prov"].timer_for("s1") is None


def step(runtimes, messages):
    """Deliver one hop and return whatever came back."""
    out = []
    for message in messages:
        out.extend(runtimes[message.recipient].receive_message(message))
    return out


def test_forged_token_aborts_the_exchange_without_commit():
    item = CatalogItem("weather-data-2023", DATASET.content, tags=("dataset",), terms=IP_TERMS)
    ledger, wallets, _, runtimes = make_world(
        {"prov": {"items": (item,)}, "req": {"balance": 50_000_000}}
    )
    msgs = runtimes["req"].start_request("s1", "prov", "weather-data-2023")
    msgs = step(runtimes, msgs)  # request_info -> propose_terms
    msgs = step(runtimes, msgs)  # propose_terms -> accept_terms
    msgs = step(runtimes, msgs)  # accept_terms -> payment_required
    msgs = step(runtimes, msgs)  # payment_required -> payment_confirmed + license_token
    assert sorted(message.action for message in msgs) == ["license_token", "payment_confirmed"]
    step(runtimes, [m for m in msgs if m.action == "payment_confirmed"])
    assert runtimes["prov"].session("s1").state is ProviderState.AWAITING_TOKEN
    # swallow the real token and forge one bound to different terms
    forged = ledger.prepare_agreement(
        "req", "prov", IP_TERMS.replace(upfront_fee=1), "2030-01-01", session_id="s1"
    )
    fake = ProtocolMessage(
        "s1", 3, "req", "prov", "license_token", {"token": token_to_value(forged)}
    )
    step(runtimes, [fake])
    prov = runtimes["prov"].session("s1")
    assert prov.state is ProviderState.FAILED
    assert prov.failure_reason == NO_TOKEN_FAILURE
    assert ledger.session_agreement("s1") is None
    assert not [e for e in ledger.entries() if e.kind == "agreement_token"]
    # payment went through before the abort; the token never landed
    assert wallets.balance("prov") == 10_000_000


def test_token_with_swapped_parties_is_refused():
    item = CatalogItem("weather-data-2023", DATASET.content, tags=("dataset",),
                       terms=IP_TERMS.replace(upfront_fee=0))
    ledger, _, _, runtimes = make_world({"prov": {"items": (item,)}, "req": {}})
    msgs = runtimes["req"].start_request("s1", "prov", "weather-data-2023")
    msgs = step(runtimes, msgs)  # request_info -> propose_terms
    msgs = step(runtimes, msgs)  # propose_terms -> accept_terms + license_token
    step(runtimes, [m for m in msgs if m.action == "accept_terms"])
    assert runtimes["prov"].session("s1").state is ProviderState.AWAITING_TOKEN
    swapped = ledger.prepare_agreement(
        "prov", "req", IP_TERMS.replace(upfront_fee=0), "2030-01-01", session_id="s1"
    )
    fake = ProtocolMessage(
        "s1", 2, "req", "prov", "license_token", {"token": token_to_value(swapped)}
    )
    step(runtimes, [fake])
    prov = runtimes["prov"].session("s1")
    assert prov.state is ProviderState.FAILED
    assert prov.failure_reason == NO_TOKEN_FAILURE
    assert ledger.session_agreement("s1") is None


def test_expired_timer_on_terminal_session_is_ignored():
    _, _, _, runtimes = run_simple_deal()
    assert runtimes["prov"].expire_timer("s1", "settlement") == []
