"""Property-based checks of the core invariants."""

from collections import Counter
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from dhondt_oracle import sequential_quotient_awards
from gentools import honest_scenario

from ivotesim import crypto
from ivotesim.allocation import (
    CHANNEL_INTERNET,
    VoteEvent,
    dhondt_award_sequence,
    resolve_effective_votes,
)
from ivotesim.auditlog import AuditLogs, check_consistency
from ivotesim.rng import DeterministicRng
from ivotesim.simulation import run

_KEYS = crypto.generate_election_keypair(DeterministicRng(424242))


@settings(max_examples=60, deadline=None)
@given(
    candidate=st.integers(min_value=0, max_value=10**15),
    r=st.binary(min_size=32, max_size=32),
)
def test_encryption_roundtrip_and_determinism(candidate, r):
    randomness = crypto.BallotRandomness(r)
    ct = crypto.encrypt_ballot(_KEYS.public_key, candidate, randomness)
    assert ct == crypto.encrypt_ballot(_KEYS.public_key, candidate, randomness)
    assert crypto.decrypt_ballot(_KEYS.private_key, ct) == candidate


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32),
    n=st.integers(min_value=1, max_value=5),
    data=st.data(),
)
def test_threshold_sharing_reconstructs_for_any_k_subset(seed, n, data):
    k = data.draw(st.integers(min_value=1, max_value=n))
    rng = DeterministicRng(seed)
    key = rng.bytes(32)
    shares = crypto.split_key(key, n, k, rng)
    subset = data.draw(
        st.lists(st.sampled_from(shares), min_size=k, max_size=n, unique_by=lambda s: s.share_index)
    )
    assert crypto.combine_shares(subset) == key


_hash_strategy = st.integers(min_value=0, max_value=30).map(lambda i: format(i, "064x"))


@settings(max_examples=60, deadline=None)
@given(
    log1=st.lists(_hash_strategy, max_size=12),
    split=st.data(),
)
def test_consistency_verdict_is_permutation_invariant(log1, split):
    logs = AuditLogs()
    for i, h in enumerate(log1):
        logs.append(1, h, i, voter_id=f"V{i}")
        # Route each hash into LOG2 or LOG3 (and LOG3 onward to LOG4/LOG5).
        if split.draw(st.booleans()):
            logs.append(2, h, i, voter_id=f"V{i}", reason="revote")
        else:
            logs.append(3, h, i)
            logs.append(5 if split.draw(st.booleans()) else 4, h, i)
    baseline = check_consistency(logs)
    assert baseline.passed
    for log_id in (1, 2, 3, 4, 5):
        entries = logs.log(log_id)
        permuted = split.draw(st.permutations(entries))
        entries[:] = permuted
    assert check_consistency(logs).passed == baseline.passed
    # Dropping any single entry from LOG1 must flip the verdict.
    if logs.log1:
        removed = logs.log1.pop()
        report = check_consistency(logs)
        assert not report.passed
        assert any(d.ballot_hash == removed.ballot_hash for d in report.discrepancies)


_votes_strategy = st.dictionaries(
    keys=st.integers(min_value=1, max_value=5),
    values=st.integers(min_value=0, max_value=200),
    min_size=1,
    max_size=5,
)


@settings(max_examples=120, deadline=None)
@given(
    votes=_votes_strategy,
    seats=st.integers(min_value=0, max_value=8),
    exponent_is_modified=st.booleans(),
    use_threshold=st.booleans(),
)
def test_dhondt_matches_decimal_oracle(votes, seats, exponent_is_modified, use_threshold):
    exponent = Fraction(9, 10) if exponent_is_modified else Fraction(1)
    threshold = Fraction(1, 20) if use_threshold else Fraction(0)
    capacity = {p: 10**9 for p in votes}
    sequence, _ = dhondt_award_sequence(
        votes, seats, exponent, threshold, sum(votes.values()), {}, capacity
    )
    expected = sequential_quotient_awards(
        votes, seats, "0.9" if exponent_is_modified else "1", threshold
    )
    assert [p for p, _, _ in sequence] == expected


@settings(max_examples=80, deadline=None)
@given(
    votes=_votes_strategy,
    seats=st.integers(min_value=0, max_value=8),
    multiplier=st.integers(min_value=1, max_value=50),
    exponent_is_modified=st.booleans(),
)
def test_dhondt_award_order_is_scale_invariant(votes, seats, multiplier, exponent_is_modified):
    exponent = Fraction(9, 10) if exponent_is_modified else Fraction(1)
    capacity = {p: 10**9 for p in votes}
    base, _ = dhondt_award_sequence(
        votes, seats, exponent, Fraction(1, 20), sum(votes.values()), {}, capacity
    )
    scaled_votes = {p: v * multiplier for p, v in votes.items()}
    scaled, _ = dhondt_award_sequence(
        scaled_votes, seats, exponent, Fraction(1, 20), sum(scaled_votes.values()), {}, capacity
    )
    assert [p for p, _, _ in base] == [p for p, _, _ in scaled]


@settings(max_examples=80, deadline=None)
@given(
    votes=_votes_strategy,
    seats=st.integers(min_value=0, max_value=8),
    t1_pct=st.integers(min_value=0, max_value=20),
    t2_pct=st.integers(min_value=0, max_value=20),
)
def test_raising_threshold_never_helps_a_small_party(votes, seats, t1_pct, t2_pct):
    t1, t2 = sorted((Fraction(t1_pct, 100), Fraction(t2_pct, 100)))
    total = sum(votes.values())
    capacity = {p: 10**9 for p in votes}
    low, _ = dhondt_award_sequence(votes, seats, Fraction(1), t1, total, {}, capacity)
    high, _ = dhondt_award_sequence(votes, seats, Fraction(1), t2, total, {}, capacity)
    seats_low = Counter(p for p, _, _ in low)
    seats_high = Counter(p for p, _, _ in high)
    for p, v in votes.items():
        if v * t2.denominator < t2.numerator * total:  # below the raised bar
            assert seats_high[p] == 0
            assert seats_high[p] <= seats_low[p]


_channel = st.sampled_from(
    ["internet", "advance_inside", "advance_outside", "polling_day", "home"]
)


@settings(max_examples=120, deadline=None)
@given(
    timelines=st.dictionaries(
        keys=st.sampled_from(["V1", "V2", "V3"]),
        values=st.lists(
            st.tuples(_channel, st.integers(1, 9), st.integers(0, 5000), st.booleans()),
            max_size=6,
        ),
        max_size=3,
    )
)
def test_resolution_invariants(timelines):
    events = {
        voter: [
            VoteEvent(voter, ch, cand, t, admitted_in_error=adm)
            for ch, cand, t, adm in evs
        ]
        for voter, evs in timelines.items()
    }
    res = resolve_effective_votes(events)
    for voter, evs in events.items():
        effective = res.effective[voter]
        assert effective is None or effective in evs  # at most one, from input
        internet = [e for e in evs if e.channel == CHANNEL_INTERNET]
        cancelled = [c for c in res.cancellations if c[0] == voter]
        assert len(cancelled) <= 1
        if cancelled:
            # A cancellation implies e-votes existed and lost to paper.
            assert internet
            assert effective is not None and effective.channel != CHANNEL_INTERNET
        if effective is not None and effective.channel == CHANNEL_INTERNET:
            # Latest internet vote wins when internet is effective.
            assert effective.timestamp == max(e.timestamp for e in internet)
            assert not cancelled


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10**6))
def test_honest_scenarios_always_pass_audit(seed):
    scenario = honest_scenario(seed=seed, n_voters=18)
    report = run(scenario)
    assert report.audit_passed
    assert report.evote_total() == len(report.logs.log5)
    assert not report.had_integrity_alarm


def test_thousand_voter_honest_scenario():
    report = run(honest_scenario(seed=314, n_voters=1000, n_districts=3))
    assert report.audit_passed
    assert report.evote_total() == len(report.logs.log5)
    multiset = lambda e: Counter(x.ballot_hash for x in e)  # noqa: E731
    assert multiset(report.logs.log1) == multiset(report.logs.log2) + multiset(
        report.logs.log3
    )
