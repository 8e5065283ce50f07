"""Bicameral governance: voting math, state machine, vetoes, forks."""

from fractions import Fraction

import pytest

from _helpers import approve, execute_after_timelock, expert_arc
from scholarly_commons import Commons
from scholarly_commons.errors import (
    BadConfig,
    BelowThreshold,
    CorruptSnapshot,
    CycleDetected,
    InsufficientCredits,
    InsufficientSigners,
    ModeMismatch,
    NotAuthorized,
    NotMember,
    NotQueued,
    NotVoting,
    SelfDelegation,
    TimelockActive,
    VotingOpen,
)
from scholarly_commons.governance import (
    GovernanceConfig,
    GovMode,
    QvMode,
    affordable_votes,
    founder_veto_weight,
    qv_cost,
)


@pytest.fixture
def world():
    commons = Commons(seed=4)
    arc, souls = expert_arc(commons, n=5, treasury=50_000)
    return commons, arc, souls


def spend(commons, arc, proposer, to, amount=100):
    return commons.governance.submit_proposal(
        arc, proposer, "TreasurySpend", {"to": to, "amount": amount}
    )


# --- voting math -----------------------------------------------------------------


def test_qv_cost_tables():
    assert [qv_cost(v, QvMode.CUMULATIVE_SQUARE) for v in range(1, 5)] == [1, 4, 9, 16]
    assert [qv_cost(v, QvMode.MARGINAL_SQUARE) for v in range(1, 5)] == [1, 5, 14, 30]
    assert qv_cost(-3, QvMode.CUMULATIVE_SQUARE) == 9  # sign buys direction, not discount


def test_marginal_cost_grows_faster_each_vote():
    for mode in QvMode:
        costs = [qv_cost(v, mode) for v in range(0, 12)]
        steps = [b - a for a, b in zip(costs, costs[1:])]
        assert all(b > a for a, b in zip(steps, steps[1:]))


def test_affordable_votes_inverts_cost():
    assert affordable_votes(100, QvMode.CUMULATIVE_SQUARE) == 10
    assert affordable_votes(100, QvMode.MARGINAL_SQUARE) == 6
    for credits in (0, 1, 5, 99, 100, 101):
        for mode in QvMode:
            v = affordable_votes(credits, mode)
            assert qv_cost(v, mode) <= credits < qv_cost(v + 1, mode)


def test_voice_credits_budget_and_refund(world):
    commons, arc, souls = world
    gov = commons.governance
    voter = souls[0]
    p1 = spend(commons, arc, souls[1], souls[2])
    p2 = spend(commons, arc, souls[1], souls[2])
    assert gov.cast_plural_vote(p1, voter, 6) == 64
    with pytest.raises(InsufficientCredits):
        gov.cast_plural_vote(p2, voter, 9)  # 81 > 64 left
    assert gov.credits_remaining(arc, voter) == 64
    # replacing the first ballot refunds before recharging
    assert gov.cast_plural_vote(p1, voter, -8) == 36
    assert gov.cast_plural_vote(p2, voter, 6) == 0
    with pytest.raises(InsufficientCredits):
        gov.cast_plural_vote(p1, voter, -9)
    commons.advance_epoch(1)
    assert gov.credits_remaining(arc, voter) == 100  # fresh round


def test_vote_replacement_refunds_to_original_epoch(world):
    commons, arc, souls = world
    gov = commons.governance
    voter = souls[0]
    pid = spend(commons, arc, souls[1], souls[2])
    gov.cast_plural_vote(pid, voter, 10)  # spends all of this epoch's credits
    commons.advance_epoch(1)
    # replacement happens next epoch: old epoch gets its credits back,
    # the new epoch's budget pays the new cost
    assert gov.cast_plural_vote(pid, voter, 4) == 84
    assert gov.credits_remaining(arc, voter) == 84


# --- proposal state machine -----------------------------------------------------


def test_tally_requires_closed_voting(world):
    commons, arc, souls = world
    gov = commons.governance
    pid = spend(commons, arc, souls[0], souls[1])
    gov.cast_plural_vote(pid, souls[0], 2)
    with pytest.raises(VotingOpen):
        gov.tally(pid)
    gov.close_voting(pid)
    with pytest.raises(NotVoting):
        gov.cast_plural_vote(pid, souls[1], 2)


def test_rejection_reasons_in_precedence_order():
    commons = Commons(seed=9)
    config = GovernanceConfig(plural_quorum=Fraction(1, 2))
    arc, souls = expert_arc(commons, n=4, treasury=1_000, config=config)
    gov = commons.governance

    quiet = spend(commons, arc, souls[0], souls[1])
    gov.cast_plural_vote(quiet, souls[0], 3)
    gov.close_voting(quiet)
    assert gov.tally(quiet)["reason"] == "QuorumFail"  # 1 of 4 < 50%

    negative = spend(commons, arc, souls[0], souls[1])
    for voter in souls[:3]:
        gov.cast_plural_vote(negative, voter, -1)
    gov.close_voting(negative)
    assert gov.tally(negative)["reason"] == "PluralRejected"

    split = spend(commons, arc, souls[0], souls[1])
    for voter in souls[:3]:
        gov.cast_plural_vote(split, voter, 1)
    gov.cast_epistemic_vote(split, souls[0], False)
    gov.close_voting(split)
    assert gov.tally(split)["reason"] == "EpistemicRejected"  # no unopposed yes weight


def test_minority_veto_blocks_constitutional_changes():
    commons = Commons(seed=10)
    arc, souls = expert_arc(commons, n=5, treasury=1_000)
    gov = commons.governance
    pid = gov.submit_proposal(arc, souls[0], "Constitutional", {"action": None})
    for voter in souls:
        gov.cast_plural_vote(pid, voter, 1)
    for voter in souls[:4]:
        gov.cast_epistemic_vote(pid, voter, True)
    gov.cast_epistemic_vote(pid, souls[4], False)  # one dissenter holds 20% of reputation
    gov.close_voting(pid)
    outcome = gov.tally(pid)
    assert outcome["reason"] == "MinorityVeto"

    # the same split passes an ordinary proposal
    ordinary = spend(commons, arc, souls[0], souls[1])
    for voter in souls:
        gov.cast_plural_vote(ordinary, voter, 1)
    for voter in souls[:4]:
        gov.cast_epistemic_vote(ordinary, voter, True)
    gov.cast_epistemic_vote(ordinary, souls[4], False)
    gov.close_voting(ordinary)
    assert gov.tally(ordinary)["approved"]


def test_timelock_boundary(world):
    commons, arc, souls = world
    gov = commons.governance
    pid = spend(commons, arc, souls[0], souls[1], amount=500)
    outcome = approve(commons, pid, souls)
    assert outcome["approved"]
    queued_at = commons.epoch
    assert gov.proposals[pid].queued_until == queued_at + 3
    commons.advance_epoch(2)
    with pytest.raises(TimelockActive):
        gov.execute(pid)
    commons.advance_epoch(1)
    before = commons.ledger.souls[souls[1]].balance
    gov.execute(pid)
    assert commons.ledger.souls[souls[1]].balance == before + 500
    with pytest.raises(NotQueued):
        gov.execute(pid)  # already executed


def test_non_member_cannot_propose(world):
    commons, arc, souls = world
    outsider = commons.ledger.create_soul()
    with pytest.raises(NotMember):
        spend(commons, arc, outsider, souls[0])


def test_parameter_change_applies_on_execute(world):
    commons, arc, souls = world
    gov = commons.governance
    pid = gov.submit_proposal(
        arc, souls[0], "ParameterChange", {"param": "plural_quorum", "value": "3/10"}
    )
    approve(commons, pid, souls)
    execute_after_timelock(commons, pid)
    assert gov.arcs[arc].config.plural_quorum == Fraction(3, 10)


# --- epistemic chamber and delegation ---------------------------------------------


def test_epistemic_needs_reputation_or_inflow(world):
    commons, arc, souls = world
    gov = commons.governance
    novice = commons.ledger.create_soul()
    commons.ledger.mint(novice, 100)
    # rebuild the arc with the novice included
    arc2 = gov.create_arc(souls + [novice], treasury=1_000)
    commons.advance_epoch(1)
    pid = gov.submit_proposal(arc2, souls[0], "TreasurySpend", {"to": souls[1], "amount": 10})
    with pytest.raises(BelowThreshold):
        gov.cast_epistemic_vote(pid, novice, True)
    gov.delegate(arc2, souls[0], novice)  # inflow turns the novice into a caster
    gov.cast_epistemic_vote(pid, novice, True)
    assert gov.proposals[pid].epistemic_ballots[novice].support


def test_delegated_weight_flows_to_first_caster():
    commons = Commons(seed=12)
    arc, souls = expert_arc(commons, n=4, treasury=1_000)
    gov = commons.governance
    a, b, c, d = souls
    gov.delegate(arc, a, b)
    gov.delegate(arc, b, c)
    pid = gov.submit_proposal(arc, a, "TreasurySpend", {"to": d, "amount": 10})
    gov.cast_epistemic_vote(pid, c, True)  # c casts: a and b flow through to c
    gov.cast_epistemic_vote(pid, d, False)
    for voter in souls:
        gov.cast_plural_vote(pid, voter, 1)
    gov.close_voting(pid)
    outcome = gov.tally(pid)
    assert outcome["epistemic_yes"] == 18.0  # 6 (c) + 6 (a) + 6 (b)
    assert outcome["epistemic_no"] == 6.0
    assert outcome["approved"]


def test_delegation_cycles_rejected(world):
    commons, arc, souls = world
    gov = commons.governance
    a, b, c = souls[:3]
    with pytest.raises(SelfDelegation):
        gov.delegate(arc, a, a)
    gov.delegate(arc, a, b)
    gov.delegate(arc, b, c)
    with pytest.raises(CycleDetected):
        gov.delegate(arc, c, a)
    gov.undelegate(arc, b)
    gov.delegate(arc, c, a)  # fine once the chain is broken


def test_caster_keeps_own_ballot_despite_delegation():
    commons = Commons(seed=14)
    arc, souls = expert_arc(commons, n=3, treasury=1_000)
    gov = commons.governance
    a, b, c = souls
    gov.delegate(arc, a, b)
    pid = gov.submit_proposal(arc, a, "TreasurySpend", {"to": c, "amount": 10})
    gov.cast_epistemic_vote(pid, a, False)  # a votes personally: nothing flows to b
    gov.cast_epistemic_vote(pid, b, True)
    for voter in souls:
        gov.cast_plural_vote(pid, voter, 1)
    gov.close_voting(pid)
    outcome = gov.tally(pid)
    assert outcome["epistemic_yes"] == 6.0
    assert outcome["epistemic_no"] == 6.0
    assert outcome["reason"] == "EpistemicRejected"


# --- token-only baseline -----------------------------------------------------------


def test_token_mode_majority_of_supply():
    commons = Commons(seed=15)
    config = GovernanceConfig(mode=GovMode.TOKEN_ONLY, timelock_epochs=2)
    ledger = commons.ledger
    whale = ledger.create_soul()
    ledger.mint(whale, 510)
    minnows = []
    for _ in range(5):
        soul = ledger.create_soul()
        ledger.mint(soul, 98)
        minnows.append(soul)
    gov = commons.governance
    arc = gov.create_arc([whale] + minnows, treasury=1_000, config=config)
    commons.advance_epoch(1)

    pid = gov.submit_proposal(arc, whale, "TreasurySpend", {"to": whale, "amount": 900})
    gov.cast_token_vote(pid, whale, True)
    for soul in minnows:
        gov.cast_token_vote(pid, soul, False)
    with pytest.raises(ModeMismatch):
        gov.cast_plural_vote(pid, whale, 1)
    gov.close_voting(pid)
    assert gov.tally(pid)["approved"]  # 510 of 1000 carries it

    # a plurality short of half the supply does not
    pid2 = gov.submit_proposal(arc, minnows[0], "TreasurySpend", {"to": whale, "amount": 10})
    gov.cast_token_vote(pid2, minnows[0], True)
    gov.cast_token_vote(pid2, minnows[1], True)
    gov.cast_token_vote(pid2, minnows[2], False)
    gov.close_voting(pid2)
    outcome = gov.tally(pid2)
    assert outcome["reason"] == "NoTokenMajority"


def test_token_votes_rejected_in_bicameral_mode(world):
    commons, arc, souls = world
    pid = spend(commons, arc, souls[0], souls[1])
    with pytest.raises(ModeMismatch):
        commons.governance.cast_token_vote(pid, souls[0], True)


def test_snapshot_neutralizes_mid_epoch_mints():
    commons = Commons(seed=16)
    config = GovernanceConfig(mode=GovMode.TOKEN_ONLY, timelock_epochs=0)
    ledger = commons.ledger
    honest = []
    for _ in range(3):
        soul = ledger.create_soul()
        ledger.mint(soul, 100)
        honest.append(soul)
    schemer = ledger.create_soul()
    ledger.mint(schemer, 1)
    gov = commons.governance
    arc = gov.create_arc(honest + [schemer], treasury=500, config=config)
    commons.advance_epoch(1)

    ledger.mint(schemer, 1_000_000)  # arrives after the epoch opened
    pid = gov.submit_proposal(arc, schemer, "TreasurySpend", {"to": schemer, "amount": 500})
    gov.cast_token_vote(pid, schemer, True)
    gov.close_voting(pid)
    outcome = gov.tally(pid)
    assert not outcome["approved"]  # snapshot weight is 1, not 1,000,001
    assert outcome["reason"] == "NoTokenMajority"


# --- founder council ------------------------------------------------------------


def test_founder_schedule_decays_to_zero():
    config = GovernanceConfig()
    expected = {0: Fraction(51, 100), 359: Fraction(51, 100), 360: Fraction(2, 5),
                720: Fraction(1, 5), 1080: Fraction(0), 5000: Fraction(0)}
    for epoch, weight in expected.items():
        assert founder_veto_weight(config, epoch) == weight


def test_council_veto_m_of_n(world):
    commons = Commons(seed=18)
    arc, souls = expert_arc(commons, n=5, treasury=10_000, council=None)
    # council must be members, so rebuild with an explicit council
    gov = commons.governance
    arc2 = gov.create_arc(souls, treasury=10_000, founder_council=souls)
    commons.advance_epoch(1)
    pid = gov.submit_proposal(arc2, souls[0], "TreasurySpend", {"to": souls[1], "amount": 100})
    # 3 yes / 2 no: approval share 0.6 < 0.755 override bar at founder weight 0.51
    for voter in souls[:3]:
        gov.cast_plural_vote(pid, voter, 1)
        gov.cast_epistemic_vote(pid, voter, True)
    for voter in souls[3:]:
        gov.cast_plural_vote(pid, voter, -1)
        gov.cast_epistemic_vote(pid, voter, False)
    gov.close_voting(pid)

    outcome = gov.tally(pid)
    assert outcome["approved"]
    with pytest.raises(InsufficientSigners):
        gov.council_veto(pid, souls[:2])
    outsider = commons.ledger.create_soul()
    with pytest.raises(InsufficientSigners):
        gov.council_veto(pid, souls[:2] + [outsider, outsider])  # strangers do not count
    gov.council_veto(pid, souls[:3])
    assert gov.proposals[pid].state.value == "Vetoed"
    with pytest.raises(NotQueued):
        gov.execute(pid)


def test_veto_powerless_after_sunset():
    commons = Commons(seed=19)
    souls = []
    for _ in range(5):
        soul = commons.ledger.create_soul()
        commons.ledger.mint(soul, 1_000)
        souls.append(soul)
    gov = commons.governance
    arc = gov.create_arc(souls, treasury=10_000, founder_council=souls)
    for soul in souls:
        for _ in range(3):
            commons.reputation.issue_sbt(arc, soul, "Publication")
    commons.advance_epoch(1080)

    pid = gov.submit_proposal(arc, souls[0], "TreasurySpend", {"to": souls[1], "amount": 100})
    for voter in souls[:3]:
        gov.cast_plural_vote(pid, voter, 1)
        gov.cast_epistemic_vote(pid, voter, True)
    for voter in souls[3:]:
        gov.cast_plural_vote(pid, voter, -1)
        gov.cast_epistemic_vote(pid, voter, False)
    gov.close_voting(pid)
    assert gov.tally(pid)["approved"]
    with pytest.raises(NotAuthorized):
        gov.council_veto(pid, souls[:3])  # weight 0: any approval overrides


def test_unanimous_approval_overrides_early_veto(world):
    commons, arc, souls = world
    gov = commons.governance
    arc2 = gov.create_arc(souls, treasury=10_000, founder_council=souls)
    commons.advance_epoch(1)
    pid = gov.submit_proposal(arc2, souls[0], "TreasurySpend", {"to": souls[1], "amount": 100})
    outcome = approve(commons, pid, souls)
    assert outcome["approved"]
    # approval share 1.0 >= 0.5 + 0.51/2 even at full founder weight
    with pytest.raises(NotAuthorized):
        gov.council_veto(pid, souls[:3])


# --- configuration and forks --------------------------------------------------------


def test_config_validation():
    with pytest.raises(BadConfig):
        GovernanceConfig(timelock_epochs=1).validate()  # below the 2..7 window
    with pytest.raises(BadConfig):
        GovernanceConfig(timelock_epochs=8).validate()
    GovernanceConfig(timelock_epochs=0).validate()  # explicit opt-out
    with pytest.raises(BadConfig):
        GovernanceConfig(minority_veto_threshold=Fraction(1, 20)).validate()
    with pytest.raises(BadConfig):
        GovernanceConfig(founder_schedule=((0, Fraction(1, 2)), (10, Fraction(3, 4)))).validate()
    with pytest.raises(BadConfig):
        GovernanceConfig.from_dict({"mode": "Bicameral", "bogus_knob": 1})
    round_trip = GovernanceConfig.from_dict(GovernanceConfig().to_dict())
    assert round_trip == GovernanceConfig()


def test_fork_roundtrip_preserves_history(world):
    commons, arc, souls = world
    gov = commons.governance
    pid = spend(commons, arc, souls[0], souls[1], amount=200)
    approve(commons, pid, souls)
    execute_after_timelock(commons, pid)

    snapshot = gov.fork_export(arc)
    treasury_before = gov.treasury_balance(arc)
    forked = gov.fork_import(snapshot)
    assert forked != arc
    assert gov.treasury_balance(forked) == treasury_before
    assert gov.arcs[forked].members == gov.arcs[arc].members
    digest = gov.proposals[pid].history_digest()
    assert digest in gov.arcs[forked].imported_history

    minted_matches = sum(s.balance for s in commons.ledger.souls.values())
    assert minted_matches == commons.ledger.minted - commons.ledger.burned


def test_fork_import_rejects_tampering(world):
    commons, arc, souls = world
    gov = commons.governance
    snapshot = bytearray(gov.fork_export(arc))
    target = snapshot.find(b'"treasury"')
    digit = snapshot.find(b":", target) + 1
    while not chr(snapshot[digit]).isdigit():
        digit += 1
    snapshot[digit] = ord("9") if snapshot[digit] != ord("9") else ord("8")
    with pytest.raises(CorruptSnapshot):
        gov.fork_import(bytes(snapshot))
