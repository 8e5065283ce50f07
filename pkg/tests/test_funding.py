"""Quadratic funding rounds and milestone-gated mission programs."""

import math
import random

import pytest

from _helpers import expert_arc
from scholarly_commons import Commons
from scholarly_commons.canonical import largest_remainder
from scholarly_commons.errors import (
    AlreadyReported,
    AlreadySettled,
    BadConfig,
    BudgetExceeded,
    EmptyProjects,
    InsufficientTreasury,
    NoContributions,
    NotReported,
    OutOfOrder,
    RoundClosed,
    StakeRequired,
    UnknownProject,
)
from scholarly_commons.funding import MatchingMode, match_scores


def world(treasury=100_000, n=3):
    commons = Commons(seed=21)
    arc, souls = expert_arc(commons, n=n, tokens=100_000, treasury=treasury)
    return commons, arc, souls


def fund_round(commons, arc, projects, pool=1_010, **kwargs):
    return commons.funding.open_round(arc, pool, projects, **kwargs)


def test_breadth_beats_depth_headline():
    commons, arc, souls = world()
    ledger = commons.ledger
    a_project, b_project = ledger.create_soul(), ledger.create_soul()
    backers = []
    for _ in range(100):
        soul = ledger.create_soul()
        ledger.mint(soul, 1)
        backers.append(soul)
    deep = ledger.create_soul()
    ledger.mint(deep, 100)

    rid = fund_round(commons, arc, [a_project, b_project])
    for backer in backers:
        commons.funding.contribute(rid, backer, a_project, 1)
    commons.funding.contribute(rid, deep, b_project, 100)

    result = commons.funding.compute_matching(rid)
    assert result.matches[a_project] == 1_000
    assert result.matches[b_project] == 10
    payouts = commons.funding.settle_round(rid)
    assert payouts[a_project] == 1_000 + 100  # match plus the escrowed contributions
    assert payouts[b_project] == 10 + 100
    assert commons.ledger.souls[a_project].balance == 1_100


def test_score_is_squared_sum_of_roots():
    totals = {"p": {"x": 4, "y": 9, "z": 25}}
    scores = match_scores(totals)
    assert scores["p"] == pytest.approx((2 + 3 + 5) ** 2)


def test_splitting_a_budget_never_lowers_the_score():
    # all partitions of 12 units among up to 4 backers, brute force
    def partitions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(1, total + 1):
            for rest in partitions(total - first, parts - 1) if total - first else [()]:
                yield (first,) + rest

    seen = {}
    for k in range(1, 5):
        for split in partitions(12, k):
            if 0 in split:
                continue
            contributions = {f"b{i}": amount for i, amount in enumerate(split)}
            seen[split] = match_scores({"p": contributions})["p"]
    lump = seen[(12,)]
    spread = seen[(3, 3, 3, 3)]
    assert lump == pytest.approx(12.0)
    assert spread == pytest.approx(48.0)
    for split, score in seen.items():
        if len(split) > 1:
            assert score > lump  # any real split strictly beats one deep pocket
        assert score <= spread + 1e-9  # the even four-way split tops the table


def test_repeat_contributions_pool_per_contributor():
    commons, arc, souls = world()
    project = commons.ledger.create_soul()
    rid = fund_round(commons, arc, [project], pool=500)
    commons.funding.contribute(rid, souls[0], project, 9)
    commons.funding.contribute(rid, souls[0], project, 16)
    result = commons.funding.compute_matching(rid)
    assert result.scores[project] == pytest.approx(25.0)  # sqrt(25)^2, not (3+4)^2


def test_matches_exhaust_pool_exactly():
    rng = random.Random(100)
    for _ in range(100):
        n = rng.randint(1, 6)
        weights = [rng.random() * rng.choice([0, 1, 1, 1]) for _ in range(n)]
        keys = [f"p{i}" for i in range(n)]
        pool = rng.randint(1, 10_000)
        shares = largest_remainder(pool, weights, keys)
        assert sum(shares.values()) == pool
        assert all(v >= 0 for v in shares.values())


def test_clr_surplus_subtracts_own_funds():
    commons, arc, souls = world()
    ledger = commons.ledger
    crowd_project, solo_project = ledger.create_soul(), ledger.create_soul()
    rid = fund_round(commons, arc, [crowd_project, solo_project], pool=900,
                     mode=MatchingMode.CLR_SURPLUS)
    for i in range(3):
        commons.funding.contribute(rid, souls[i], crowd_project, 100)
    commons.funding.contribute(rid, souls[0], solo_project, 300)
    result = commons.funding.compute_matching(rid)
    # crowd surplus: (3*10)^2 - 300 = 600; solo surplus: 300 - 300 = 0
    assert result.matches[crowd_project] == 900
    assert result.matches[solo_project] == 0


def test_clr_all_surplus_zero_splits_evenly():
    commons, arc, souls = world()
    ledger = commons.ledger
    p1, p2 = ledger.create_soul(), ledger.create_soul()
    rid = fund_round(commons, arc, [p1, p2], pool=501, mode=MatchingMode.CLR_SURPLUS)
    commons.funding.contribute(rid, souls[0], p1, 100)
    commons.funding.contribute(rid, souls[1], p2, 100)
    result = commons.funding.compute_matching(rid)
    assert sorted(result.matches.values()) == [250, 251]


def test_round_validation():
    commons, arc, souls = world(treasury=100)
    project = commons.ledger.create_soul()
    with pytest.raises(EmptyProjects):
        fund_round(commons, arc, [], pool=50)
    with pytest.raises(EmptyProjects):
        fund_round(commons, arc, [project, project], pool=50)
    with pytest.raises(BadConfig):
        fund_round(commons, arc, [project], pool=50, mode="GeometricMean")
    with pytest.raises(InsufficientTreasury):
        fund_round(commons, arc, [project], pool=101)
    rid = fund_round(commons, arc, [project], pool=50)
    with pytest.raises(UnknownProject):
        commons.funding.contribute(rid, souls[0], souls[1], 5)
    with pytest.raises(NoContributions):
        commons.funding.compute_matching(rid)


def test_empty_round_refunds_pool():
    commons, arc, souls = world(treasury=1_000)
    project = commons.ledger.create_soul()
    rid = fund_round(commons, arc, [project], pool=400)
    assert commons.governance.treasury_balance(arc) == 600
    payouts = commons.funding.settle_round(rid)
    assert payouts == {project: 0}
    assert commons.governance.treasury_balance(arc) == 1_000
    with pytest.raises(AlreadySettled):
        commons.funding.settle_round(rid)
    with pytest.raises(RoundClosed):
        commons.funding.contribute(rid, souls[0], project, 5)


def test_stake_gated_round():
    commons, arc, souls = world()
    project = commons.ledger.create_soul()
    sbt = commons.reputation.issue_sbt(arc, souls[0], "Replication")
    rid = fund_round(commons, arc, [project], pool=100, require_stake="Replication")
    with pytest.raises(StakeRequired):
        commons.funding.contribute(rid, souls[0], project, 10)
    commons.reputation.stake_sbt(souls[0], sbt, until_epoch=commons.epoch + 10)
    commons.funding.contribute(rid, souls[0], project, 10)
    with pytest.raises(StakeRequired):
        commons.funding.contribute(rid, souls[1], project, 10)  # holds no stake


def test_mission_program_releases_in_order():
    commons, arc, souls = world(treasury=5_000)
    funding = commons.funding
    director, worker = souls[0], souls[1]
    prog = funding.create_mission_program(
        arc, director, 3_000, [("phase-1", 1_000), ("phase-2", 1_500)]
    )
    assert commons.governance.treasury_balance(arc) == 2_000
    with pytest.raises(NotReported):
        funding.release_tranche(prog, 0, worker)
    funding.report_milestone(prog, 1)
    with pytest.raises(OutOfOrder):
        funding.release_tranche(prog, 1, worker)
    funding.report_milestone(prog, 0)
    with pytest.raises(AlreadyReported):
        funding.report_milestone(prog, 0)
    assert funding.release_tranche(prog, 0, worker) == 1_000
    assert funding.release_tranche(prog, 1, worker) == 1_500
    assert commons.ledger.souls[worker].balance == 100_000 + 2_500

    refund = funding.cancel_program(prog)
    assert refund == 500  # the unallocated slack comes home
    assert commons.governance.treasury_balance(arc) == 2_500


def test_program_budget_checked_up_front():
    commons, arc, souls = world(treasury=1_000)
    with pytest.raises(BudgetExceeded):
        commons.funding.create_mission_program(
            arc, souls[0], 500, [("a", 300), ("b", 300)]
        )
    with pytest.raises(InsufficientTreasury):
        commons.funding.create_mission_program(arc, souls[0], 1_500, [("a", 1_500)])
