from datetime import datetime, timedelta, timezone
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpw import domain
from dpw.bots import (
    BotEngine,
    BundlePolicy,
    GroupBy,
    NegotiationPolicy,
    ProposalKind,
    RunStatus,
    bundle_rfqs,
    negotiate_low_risk,
    reference_price_for,
)
from dpw.errors import ConflictError, NotFoundError, ValidationError
from dpw.store import Store

NOW = datetime(2025, 7, 21, 12, 0, tzinfo=timezone.utc)


def make_rfq(rid, department="ENG", material="m-1", qty="10", price=100,
             created=NOW - timedelta(days=1), status=domain.RfqStatus.OPEN,
             owner="u-x", supplier=None):
    return domain.Rfq(
        id=rid, owner_user_id=owner, department=department, material_id=material,
        quantity=Decimal(qty), target_price=price, status=status,
        created_at=created, due_at=created + timedelta(days=14), supplier_id=supplier,
    )


POLICY = BundlePolicy(group_by=GroupBy.MATERIAL, window=timedelta(days=30), min_bundle_size=2)


def test_bundle_two_departments_one_proposal():
    rfqs = [make_rfq("r-1", "ENG"), make_rfq("r-2", "OPS")]
    proposals = bundle_rfqs(rfqs, POLICY, NOW)
    assert len(proposals) == 1
    assert proposals[0].kind is ProposalKind.BUNDLE
    assert proposals[0].member_rfq_ids == ("r-1", "r-2")
    assert proposals[0].payload["combinedQuantity"] == Decimal(20)
    assert proposals[0].payload["departments"] == ["ENG", "OPS"]


def test_bundle_single_department_is_skipped():
    rfqs = [make_rfq("r-1", "ENG"), make_rfq("r-2", "ENG")]
    assert bundle_rfqs(rfqs, POLICY, NOW) == []


def test_bundle_respects_window():
    inside = make_rfq("r-1", "ENG", created=NOW - timedelta(days=29))
    outside = make_rfq("r-2", "OPS", created=NOW - timedelta(days=31))
    assert bundle_rfqs([inside, outside], POLICY, NOW) == []
    boundary = make_rfq("r-2", "OPS", created=NOW - timedelta(days=30))
    assert len(bundle_rfqs([inside, boundary], POLICY, NOW)) == 1


def test_bundle_ignores_future_rfqs():
    rfqs = [make_rfq("r-1", "ENG"), make_rfq("r-2", "OPS", created=NOW + timedelta(hours=1))]
    assert bundle_rfqs(rfqs, POLICY, NOW) == []


def test_bundle_min_size():
    policy = BundlePolicy(min_bundle_size=3)
    rfqs = [make_rfq("r-1", "ENG"), make_rfq("r-2", "OPS")]
    assert bundle_rfqs(rfqs, policy, NOW) == []
    rfqs.append(make_rfq("r-3", "FIN"))
    assert len(bundle_rfqs(rfqs, policy, NOW)) == 1


def test_bundle_members_sorted_by_created_then_id():
    rfqs = [
        make_rfq("r-b", "ENG", created=NOW - timedelta(days=2)),
        make_rfq("r-a", "OPS", created=NOW - timedelta(days=1)),
        make_rfq("r-c", "FIN", created=NOW - timedelta(days=2)),
    ]
    (proposal,) = bundle_rfqs(rfqs, POLICY, NOW)
    assert proposal.member_rfq_ids == ("r-b", "r-c", "r-a")


def test_bundle_groups_by_material_separately():
    rfqs = [
        make_rfq("r-1", "ENG", material="m-a"),
        make_rfq("r-2", "OPS", material="m-a"),
        make_rfq("r-3", "ENG", material="m-b"),
        make_rfq("r-4", "OPS", material="m-b"),
    ]
    proposals = bundle_rfqs(rfqs, POLICY, NOW)
    assert [p.payload["groupKey"] for p in proposals] == ["m-a", "m-b"]


def test_bundle_by_material_group_merges_sibling_materials():
    materials = {
        "m-a": domain.Material(id="m-a", material_group_id="mg-1", name="A", unit="pcs"),
        "m-b": domain.Material(id="m-b", material_group_id="mg-1", name="B", unit="pcs"),
    }
    rfqs = [make_rfq("r-1", "ENG", material="m-a"), make_rfq("r-2", "OPS", material="m-b")]
    policy = BundlePolicy(group_by=GroupBy.MATERIAL_GROUP)
    (proposal,) = bundle_rfqs(rfqs, policy, NOW, materials)
    assert proposal.payload["groupKey"] == "mg-1"
    assert proposal.member_rfq_ids == ("r-1", "r-2")


def test_bundle_by_material_group_needs_master_data():
    rfqs = [make_rfq("r-1", "ENG"), make_rfq("r-2", "OPS")]
    policy = BundlePolicy(group_by=GroupBy.MATERIAL_GROUP)
    with pytest.raises(ValidationError):
        bundle_rfqs(rfqs, policy, NOW, materials=None)


def test_bundle_rejects_non_open_input():
    closed = make_rfq("r-1", status=domain.RfqStatus.APPROVED)
    with pytest.raises(ValidationError):
        bundle_rfqs([closed], POLICY, NOW)


def test_bundle_policy_validation():
    with pytest.raises(ValidationError):
        BundlePolicy(min_bundle_size=1)
    with pytest.raises(ValidationError):
        BundlePolicy(window=timedelta(0))


NEGOTIATION = NegotiationPolicy(
    max_volume_eur=1_000_000 * 100,
    accept_tolerance=Decimal("0.02"),
    counter_margin=Decimal("0.01"),
)


def test_negotiate_accepts_within_tolerance():
    rfq = make_rfq("r-1", qty="100")
    proposal = negotiate_low_risk(rfq, offer_price=10_200, reference_price=10_000, policy=NEGOTIATION)
    assert proposal.kind is ProposalKind.ACCEPT  # 10200 == 10000 * 1.02 exactly


def test_negotiate_counters_just_above_tolerance():
    rfq = make_rfq("r-1", qty="100")
    proposal = negotiate_low_risk(rfq, offer_price=10_201, reference_price=10_000, policy=NEGOTIATION)
    assert proposal.kind is ProposalKind.COUNTER
    assert proposal.payload["counterPrice"] == 10_100  # reference * 1.01


def test_negotiate_counter_rounds_half_up():
    rfq = make_rfq("r-1", qty="1")
    proposal = negotiate_low_risk(rfq, offer_price=200, reference_price=150, policy=NEGOTIATION)
    # 150 * 1.01 = 151.5 -> 152
    assert proposal.payload["counterPrice"] == 152


def test_negotiate_escalates_above_ceiling():
    policy = NegotiationPolicy(max_volume_eur=1_000)
    rfq = make_rfq("r-1", qty="11")
    proposal = negotiate_low_risk(rfq, offer_price=100, reference_price=100, policy=policy)
    assert proposal.kind is ProposalKind.ESCALATE
    assert "reason" in proposal.payload


def test_negotiate_ceiling_boundary_is_inclusive():
    policy = NegotiationPolicy(max_volume_eur=1_000)
    rfq = make_rfq("r-1", qty="10")
    proposal = negotiate_low_risk(rfq, offer_price=100, reference_price=100, policy=policy)
    assert proposal.kind is ProposalKind.ACCEPT  # volume == ceiling may be handled


def test_negotiate_validation():
    with pytest.raises(ValidationError):
        negotiate_low_risk(make_rfq("r-1", status=domain.RfqStatus.REJECTED), 100, 100, NEGOTIATION)
    with pytest.raises(ValidationError):
        negotiate_low_risk(make_rfq("r-1"), 100, 0, NEGOTIATION)
    with pytest.raises(ValidationError):
        negotiate_low_risk(make_rfq("r-1"), -1, 100, NEGOTIATION)


def test_negotiation_policy_validation():
    with pytest.raises(ValidationError):
        NegotiationPolicy(accept_tolerance=Decimal("1"))
    with pytest.raises(ValidationError):
        NegotiationPolicy(counter_margin=Decimal("-0.1"))
    with pytest.raises(ValidationError):
        NegotiationPolicy(max_volume_eur=-1)


@settings(max_examples=200, deadline=None)
@given(
    qty=st.integers(min_value=1, max_value=10_000),
    offer=st.integers(min_value=0, max_value=50_000),
    reference=st.integers(min_value=1, max_value=50_000),
    ceiling=st.integers(min_value=0, max_value=10_000_000),
)
def test_negotiator_never_commits_above_ceiling(qty, offer, reference, ceiling):
    policy = NegotiationPolicy(max_volume_eur=ceiling)
    rfq = make_rfq("r-1", qty=str(qty))
    proposal = negotiate_low_risk(rfq, offer, reference, policy)
    volume = qty * offer
    if volume > ceiling:
        assert proposal.kind is ProposalKind.ESCALATE
    else:
        assert proposal.kind in (ProposalKind.ACCEPT, ProposalKind.COUNTER)
        if proposal.kind is ProposalKind.ACCEPT:
            assert Decimal(offer) <= Decimal(reference) * Decimal("1.02")
        else:
            assert Decimal(offer) > Decimal(reference) * Decimal("1.02")


def test_reference_price_prefers_latest_purchase_order(seeded_store):
    store = seeded_store
    for pid, day, volume, qty in (("po-x1", 1, 500_00, 10), ("po-x2", 9, 900_00, 10)):
        store.upsert(
            "purchase_order",
            domain.PurchaseOrder(
                id=pid, supplier_id="s-alpha", material_id="m-screw-m6",
                quantity=Decimal(qty), volume_eur=volume,
                order_date=datetime(2025, 6, day, tzinfo=timezone.utc).date(),
                department="ENG", owner_user_id="u-anna",
            ),
        )
    rfq = make_rfq("r-1", material="m-screw-m6", price=42)
    assert reference_price_for(store, rfq) == 900_00 // 10  # the newer order wins


def test_reference_price_falls_back_to_target(seeded_store):
    rfq = make_rfq("r-1", material="m-never-ordered", price=4_242)
    assert reference_price_for(seeded_store, rfq) == 4_242


# -- engine over the fixture corpus ------------------------------------


def test_bundler_run_on_fixture_corpus(full_store, config):
    engine = BotEngine(full_store, config.bundle_policy, config.negotiation_policy)
    run = engine.execute("bundler", {}, triggered_by="u-anna")
    assert run.status is RunStatus.PROPOSED
    assert run.bot_id == "bundler"
    assert len(run.proposals) == 1
    proposal = run.proposals[0]
    assert proposal.member_rfq_ids == ("rfq-2001", "rfq-2002", "rfq-2003", "rfq-2004", "rfq-2005")
    assert proposal.payload["combinedQuantity"] == Decimal(150)
    assert proposal.payload["departments"] == ["ENG", "FIN", "OPS"]
    assert engine.get_run(run.run_id).run_id == run.run_id


def test_dry_run_records_nothing(full_store, config):
    engine = BotEngine(full_store, config.bundle_policy, config.negotiation_policy)
    before = full_store.state_hash()
    run = engine.execute("bundler", {}, triggered_by="u-anna", dry_run=True)
    assert len(run.proposals) == 1
    assert full_store.state_hash() == before
    assert engine.list_runs() == []
    with pytest.raises(NotFoundError):
        engine.get_run(run.run_id)


def test_execute_unknown_bot_or_user(full_store):
    engine = BotEngine(full_store)
    with pytest.raises(NotFoundError):
        engine.execute("optimizer", {}, triggered_by="u-anna")
    with pytest.raises(NotFoundError):
        engine.execute("bundler", {}, triggered_by="u-ghost")


def test_negotiator_param_validation(full_store):
    engine = BotEngine(full_store)
    with pytest.raises(ValidationError):
        engine.execute("negotiator", {}, triggered_by="u-anna")
    with pytest.raises(ValidationError):
        engine.execute("negotiator", {"rfqId": "rfq-2006"}, triggered_by="u-anna")
    with pytest.raises(NotFoundError):
        engine.execute("negotiator", {"rfqId": "rfq-nope", "offerPrice": "1.00"}, triggered_by="u-anna")


def test_approve_bundle_merges_and_retires_members(full_store, config):
    engine = BotEngine(full_store, config.bundle_policy, config.negotiation_policy)
    run = engine.execute("bundler", {}, triggered_by="u-anna")
    applied = engine.approve(run.run_id, approved_by="u-bjorn")
    assert applied.status is RunStatus.APPLIED

    merged_id = f"rfq-{run.run_id}-m1"
    merged = full_store.require("rfq", merged_id)
    assert merged.quantity == Decimal(150)
    assert merged.target_price == 28  # round(4250 / 150)
    assert merged.department == "CROSS_DEPARTMENT"
    assert merged.material_id == "m-screw-m4"
    assert merged.supplier_id is None  # members disagree
    assert merged.status is domain.RfqStatus.OPEN

    for member_id in run.proposals[0].member_rfq_ids:
        member = full_store.require("rfq", member_id)
        assert member.status is domain.RfqStatus.REJECTED
        assert member.superseded_by == merged_id


def test_double_approve_is_idempotent(full_store, config):
    engine = BotEngine(full_store, config.bundle_policy, config.negotiation_policy)
    run = engine.execute("bundler", {}, triggered_by="u-anna")
    engine.approve(run.run_id, approved_by="u-anna")
    before = full_store.state_hash()
    again = engine.approve(run.run_id, approved_by="u-anna")
    assert again.status is RunStatus.APPLIED
    assert full_store.state_hash() == before


def test_approve_stale_run_conflicts_and_applies_nothing(full_store, config):
    engine = BotEngine(full_store, config.bundle_policy, config.negotiation_policy)
    run = engine.execute("bundler", {}, triggered_by="u-anna")
    # one member is approved by hand between proposal and review
    member = full_store.require("rfq", "rfq-2003")
    full_store.upsert("rfq", domain.Rfq(
        id=member.id, owner_user_id=member.owner_user_id, department=member.department,
        material_id=member.material_id, quantity=member.quantity,
        target_price=member.target_price, status=domain.RfqStatus.APPROVED,
        created_at=member.created_at, due_at=member.due_at, supplier_id=member.supplier_id,
    ))
    before = full_store.state_hash()
    with pytest.raises(ConflictError):
        engine.approve(run.run_id, approved_by="u-anna")
    assert full_store.state_hash() == before  # nothing else was touched
    assert full_store.require("rfq", "rfq-2001").status is domain.RfqStatus.OPEN


def test_atomicity_across_proposals():
    store = Store()
    store.upsert("user", domain.User(id="u-1", name="U", team_id="t-1"))
    for rid, dept, material in (
        ("r-1", "ENG", "m-a"), ("r-2", "OPS", "m-a"),
        ("r-3", "ENG", "m-b"), ("r-4", "OPS", "m-b"),
    ):
        store.upsert("rfq", make_rfq(rid, dept, material, owner="u-1"))
    engine = BotEngine(store)
    run = engine.execute("bundler", {}, triggered_by="u-1")
    assert len(run.proposals) == 2

    # the second group goes stale; approving must apply neither group
    stale = store.require("rfq", "r-4")
    store.upsert("rfq", make_rfq("r-4", stale.department, stale.material_id,
                                 status=domain.RfqStatus.REJECTED, owner="u-1"))
    with pytest.raises(ConflictError):
        engine.approve(run.run_id, approved_by="u-1")
    assert store.require("rfq", "r-1").status is domain.RfqStatus.OPEN
    assert store.require("rfq", "r-2").status is domain.RfqStatus.OPEN
    assert store.get("rfq", f"rfq-{run.run_id}-m1") is None


def test_reject_then_approve_conflicts(full_store, config):
    engine = BotEngine(full_store, config.bundle_policy, config.negotiation_policy)
    run = engine.execute("bundler", {}, triggered_by="u-anna")
    rejected = engine.reject(run.run_id, rejected_by="u-bjorn")
    assert rejected.status is RunStatus.REJECTED
    with pytest.raises(ConflictError):
        engine.approve(run.run_id, approved_by="u-anna")
    assert full_store.require("rfq", "rfq-2001").status is domain.RfqStatus.OPEN


def test_reject_applied_run_conflicts(full_store, config):
    engine = BotEngine(full_store, config.bundle_policy, config.negotiation_policy)
    run = engine.execute("bundler", {}, triggered_by="u-anna")
    engine.approve(run.run_id, approved_by="u-anna")
    with pytest.raises(ConflictError):
        engine.reject(run.run_id, rejected_by="u-anna")


def test_accept_apply_approves_rfq_at_offer(full_store, config):
    engine = BotEngine(full_store, config.bundle_policy, config.negotiation_policy)
    run = engine.execute(
        "negotiator",
        {"rfqId": "rfq-2006", "offerPrice": "121.00"},
        triggered_by="u-anna",
    )
    # reference: po-1007 is the latest m-pcb-a order (61000 EUR / 500) = 122 EUR
    assert run.proposals[0].kind is ProposalKind.ACCEPT
    engine.approve(run.run_id, approved_by="u-anna")
    rfq = full_store.require("rfq", "rfq-2006")
    assert rfq.status is domain.RfqStatus.APPROVED
    assert rfq.target_price == 121_00


def test_counter_apply_updates_target_keeps_open(full_store, config):
    engine = BotEngine(full_store, config.bundle_policy, config.negotiation_policy)
    run = engine.execute(
        "negotiator",
        {"rfqId": "rfq-2006", "offerPrice": "130.00"},
        triggered_by="u-anna",
    )
    proposal = run.proposals[0]
    assert proposal.kind is ProposalKind.COUNTER
    assert proposal.payload["counterPrice"] == 123_22  # 12200 * 1.01
    engine.approve(run.run_id, approved_by="u-anna")
    rfq = full_store.require("rfq", "rfq-2006")
    assert rfq.status is domain.RfqStatus.OPEN
    assert rfq.target_price == 123_22


def test_escalate_apply_opens_task_for_trigger_user(full_store, config):
    engine = BotEngine(full_store, config.bundle_policy, config.negotiation_policy)
    run = engine.execute(
        "negotiator",
        {"rfqId": "rfq-2006", "offerPrice": "99999.00", "referencePrice": "120.00"},
        triggered_by="u-clara",
    )
    assert run.proposals[0].kind is ProposalKind.ESCALATE
    engine.approve(run.run_id, approved_by="u-clara")
    task = full_store.require("task", f"task-{run.run_id}-rfq-2006")
    assert task.assignee_user_id == "u-clara"
    assert task.state is domain.TaskState.OPEN
    assert full_store.require("rfq", "rfq-2006").status is domain.RfqStatus.OPEN
