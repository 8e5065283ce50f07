"""Acceptance gate: twelve checks, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see every line. Each
check states its tolerance inline; most are exact because the protocol math
is integer or Fraction arithmetic end to end.
"""

import json
import random
import re
from fractions import Fraction

from _helpers import approve, expert_arc
from scholarly_commons import Commons
from scholarly_commons import harness
from scholarly_commons.errors import (
    InsufficientFree,
    NonTransferable,
    NotAuthorized,
    TimelockActive,
)
from scholarly_commons.governance import (
    GovernanceConfig,
    QvMode,
    founder_veto_weight,
    qv_cost,
)
from scholarly_commons.reputation import SbtCategory, SbtRegistry


def _check(label: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {label}")
    assert ok, f"{label}: {detail}"


def test_01_matching_headline_numbers():
    """Pool 1010, 100 backers of 1 vs 1 backer of 100 -> 1000 and 10, exact."""
    commons = Commons(seed=101)
    arc, _ = expert_arc(commons, n=3, treasury=2_000)
    ledger = commons.ledger
    broad, deep = ledger.create_soul(), ledger.create_soul()
    rid = commons.funding.open_round(arc, 1_010, [broad, deep])
    for _ in range(100):
        backer = ledger.create_soul()
        ledger.mint(backer, 1)
        commons.funding.contribute(rid, backer, broad, 1)
    patron = ledger.create_soul()
    ledger.mint(patron, 100)
    commons.funding.contribute(rid, patron, deep, 100)
    matches = commons.funding.compute_matching(rid).matches
    ok = matches == {broad: 1_000, deep: 10} and sum(matches.values()) == 1_010
    _check("01 matching pool 1010 -> 1000:10, integer-exact", ok, f"got {matches}")


def test_02_vote_cost_tables():
    cumulative = [qv_cost(v, QvMode.CUMULATIVE_SQUARE) for v in range(1, 5)]
    marginal = [qv_cost(v, QvMode.MARGINAL_SQUARE) for v in range(1, 5)]
    ok = cumulative == [1, 4, 9, 16] and marginal == [1, 5, 14, 30]
    _check("02 quadratic cost tables (1,4,9,16) and (1,5,14,30)", ok,
           f"got {cumulative} and {marginal}")


def test_03_flash_loan_defense_matrix():
    observed = {}
    for timelock in (True, False):
        for snapshot in (True, False):
            result = harness.run_attack_flashloan(timelock_on=timelock, snapshot_on=snapshot)
            observed[(timelock, snapshot)] = (result.succeeded, result.treasury_delta)
    ok = (
        observed[(False, False)] == (True, -182_000_000)
        and observed[(True, False)] == (False, 0)
        and observed[(False, True)] == (False, 0)
        and observed[(True, True)] == (False, 0)
    )
    _check("03 flash loan drains only with timelock and snapshot both off", ok,
           f"got {observed}")


def test_04_thousand_transfer_attempts_all_refused():
    commons = Commons(seed=104)
    arc, souls = expert_arc(commons, n=6)
    rep = commons.reputation
    rng = random.Random(104)
    sbts = list(rep.sbts)
    for _ in range(20):
        sbts.append(rep.issue_sbt(arc, rng.choice(souls), rng.choice(list(SbtCategory))))
    frozen_hash = commons.state_digest()
    frozen_events = len(commons.ledger.events)
    refused = 0
    for _ in range(1_000):
        try:
            rep.attempt_transfer_sbt(rng.choice(sbts), rng.choice(souls))
        except NonTransferable:
            refused += 1
    ok = (
        refused == 1_000
        and commons.state_digest() == frozen_hash
        and len(commons.ledger.events) == frozen_events
    )
    _check("04 1000 credential transfer attempts refused, state untouched", ok,
           f"refused={refused}")


def test_05_whale_wins_tokens_loses_chambers():
    token = harness.run(harness.load_bundled("whale_capture_token")).report
    bicameral = harness.run(harness.load_bundled("whale_capture_bicameral")).report
    t_prop, b_prop = token.proposals[0], bicameral.proposals[0]
    gini_token = token.epochs[1]["gini"]
    gini_bi = bicameral.epochs[1]["gini"]
    ok = (
        t_prop["state"] == "Executed"
        and b_prop["state"] == "Rejected"
        and gini_bi < gini_token
    )
    _check("05 whale captures token vote, blocked bicamerally, gini drops", ok,
           f"token={t_prop['state']} bicameral={b_prop['state']} "
           f"gini {gini_token:.4f} vs {gini_bi:.4f}")


def test_06_royalty_conservation_ten_thousand_cases():
    commons = Commons(seed=106)
    _, souls = expert_arc(commons, n=8, tokens=10**15)
    market = commons.market
    market.set_fee_recipient(souls[7])
    rng = random.Random(106)
    bad = 0
    for _ in range(10_000):
        k = rng.randint(1, 6)
        recipients = rng.sample(souls[:6], k)
        cuts = sorted(rng.sample(range(1, 10_000), k - 1)) + [10_000]
        split = []
        last = 0
        for soul, cut in zip(recipients, cuts):
            split.append([soul, cut - last])
            last = cut
        asset = market.mint_ipnft(recipients[0], "x", False, split)
        revenue = rng.randint(1, 10**9)
        receipt = market.distribute_royalties(asset, revenue, payer=souls[6])
        if sum(receipt.payouts.values()) + receipt.protocol_fee != revenue:
            bad += 1
    conserved = sum(s.balance for s in commons.ledger.souls.values()) == (
        commons.ledger.minted - commons.ledger.burned
    )
    _check("06 royalty split conserves revenue in 10^4 random cases",
           bad == 0 and conserved, f"bad={bad}")


def test_07_immediate_roundtrips_always_lose():
    commons = Commons(seed=107)
    _, souls = expert_arc(commons, n=2, tokens=10**12)
    market = commons.market
    rng = random.Random(107)
    trader = souls[1]
    failures = []
    for i in range(1_000):
        asset = market.mint_ipnft(souls[0], f"case-{i}", False, [[souls[0], 10_000]])
        p0 = Fraction(rng.randint(1, 1_000), rng.randint(1, 100))
        slope = Fraction(rng.randint(0, 500), rng.randint(1, 100))
        phi0 = Fraction(rng.randint(1, 100), 100)
        horizon = rng.randint(1, 365)
        units = rng.randint(1, 50)
        pool_id = market.fractionalize(asset, units, p0, slope, phi0, horizon)
        cost = market.curve_buy(pool_id, trader, units)
        gross = market.pools[pool_id].price_integral(0, units)
        net = market.curve_sell(pool_id, trader, units)
        loss = cost - net
        if not (loss > 0 and Fraction(loss) >= phi0 * gross - 2):
            failures.append((i, loss, float(phi0 * gross)))
    _check("07 1000 same-epoch round trips all strictly lose >= phi0*gross - 2",
           not failures, f"first failures: {failures[:3]}")


def test_08_founder_veto_decays_and_expires():
    config = GovernanceConfig()
    points = {0: Fraction(51, 100), 360: Fraction(2, 5), 720: Fraction(1, 5), 1080: Fraction(0)}
    schedule_ok = all(founder_veto_weight(config, e) == w for e, w in points.items())

    commons = Commons(seed=108)
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
    commons.advance_epoch(1_080)
    pid = gov.submit_proposal(arc, souls[0], "TreasurySpend", {"to": souls[1], "amount": 5})
    for voter in souls[:3]:
        gov.cast_plural_vote(pid, voter, 1)
        gov.cast_epistemic_vote(pid, voter, True)
    for voter in souls[3:]:
        gov.cast_plural_vote(pid, voter, -1)
        gov.cast_epistemic_vote(pid, voter, False)
    gov.close_voting(pid)
    gov.tally(pid)
    try:
        gov.council_veto(pid, souls[:3])
        veto_refused = False
    except NotAuthorized:
        veto_refused = True
    _check("08 founder veto weight 0.51/0.40/0.20/0 by epoch 1080, then powerless",
           schedule_ok and veto_refused)


def test_09_vesting_cliff_and_linearity():
    commons = Commons(seed=109)
    ledger = commons.ledger
    owner, friend = ledger.create_soul(), ledger.create_soul()
    ledger.mint(owner, 1_200)
    vest = ledger.create_vesting(owner, 1_200, 6, 12)
    points_ok = (
        ledger.claimable(vest, at_epoch=3) == 0
        and ledger.claimable(vest, at_epoch=6) == 600
        and ledger.claimable(vest, at_epoch=12) == 1_200
    )
    commons.advance_epoch(3)
    try:
        ledger.transfer(owner, friend, 1)
        locked_ok = False
    except InsufficientFree:
        locked_ok = True
    _check("09 vesting 1200/cliff 6/duration 12 -> 0/600/1200; locked funds stay put",
           points_ok and locked_ok)


def test_10_disclosure_proofs_complete_and_sound():
    commons = Commons(seed=110)
    arc, souls = expert_arc(commons, n=10)
    rep = commons.reputation
    rng = random.Random(110)
    categories = list(SbtCategory)
    for soul in souls:
        for category in categories:
            for _ in range(rng.randint(0, 4)):
                rep.issue_sbt(arc, soul, category)

    def counts(soul, category):
        return sum(
            1 for s in rep.sbts.values()
            if s.subject == soul and s.category is category and s.countable
        )

    digest_span = re.compile(r'"[0-9a-f]{64}"')
    complete = sound = trials = 0
    for _ in range(1_000):
        soul = rng.choice(souls)
        category = rng.choice(categories)
        have = counts(soul, category)
        k = rng.randint(0, have)
        proof = rep.prove_count_at_least(soul, category, k)
        root = rep.current_root(soul)
        if SbtRegistry.verify_proof(root, proof):
            complete += 1

        # flip one hex character somewhere in the committed digests
        trials += 1
        blob = json.dumps(proof, sort_keys=True)
        span = rng.choice(list(digest_span.finditer(blob)))
        pos = rng.randrange(span.start() + 1, span.end() - 1)
        flip = rng.choice([c for c in "0123456789abcdef" if c != blob[pos]])
        tampered = json.loads(blob[:pos] + flip + blob[pos + 1 :])
        if not SbtRegistry.verify_proof(root, tampered):
            sound += 1

        if k >= 2:
            trials += 1
            doubled = json.loads(blob)
            doubled["branches"][1] = doubled["branches"][0]
            if not SbtRegistry.verify_proof(root, doubled):
                sound += 1
    ok = complete == 1_000 and sound == trials
    _check("10 1000 disclosure proofs verify; tampering and branch reuse all rejected",
           ok, f"complete={complete} sound={sound}/{trials}")


def test_11_every_scenario_is_deterministic(tmp_path):
    all_ok = True
    detail = []
    for name in harness.bundled_scenario_names():
        scenario = harness.load_bundled(name)
        first = harness.run(scenario)
        second = harness.run(scenario)
        same_hash = first.report.content_hash == second.report.content_hash

        log = tmp_path / f"{name}.jsonl"
        first.commons.ledger.write_events(log)
        replayed, _ = Commons.replay_file(log)
        replay_ok = replayed.state_digest() == first.report.final_state_hash
        if not (same_hash and replay_ok):
            all_ok = False
            detail.append(name)
    _check("11 bundled scenarios rerun and replay to identical hashes", all_ok,
           f"diverged: {detail}")


def test_12_timelock_boundary():
    commons = Commons(seed=112)
    arc, souls = expert_arc(commons, n=3, treasury=1_000)
    gov = commons.governance
    pid = gov.submit_proposal(arc, souls[0], "TreasurySpend", {"to": souls[1], "amount": 10})
    approve(commons, pid, souls)
    queued_epoch = commons.epoch
    assert gov.proposals[pid].queued_until == queued_epoch + 3
    commons.advance_epoch(2)
    try:
        gov.execute(pid)
        early_blocked = False
    except TimelockActive:
        early_blocked = True
    commons.advance_epoch(1)
    gov.execute(pid)
    on_time = gov.proposals[pid].state.value == "Executed"
    _check("12 queued + timelock 3: execute fails at +2, lands at +3",
           early_blocked and on_time)
