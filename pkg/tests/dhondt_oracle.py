"""Independent brute-force allocation oracles.

These recompute seat awards the slow, literal way: every quotient is
re-evaluated from scratch for every seat using 60-digit Decimal arithmetic,
and the whole three-round parliamentary procedure is restated here with
Fractions. Nothing is shared with the package implementation, which compares
quotients by exact integer cross-multiplication instead.
"""

from __future__ import annotations

from decimal import Decimal, getcontext
from fractions import Fraction
from math import floor

getcontext().prec = 60

_TIE_EPS = Decimal("1e-30")
_DIVISORS: dict[tuple[int, str], Decimal] = {}


def _divisor(seats_so_far: int, exponent: str) -> Decimal:
    key = (seats_so_far, exponent)
    if key not in _DIVISORS:
        base = Decimal(1 + seats_so_far)
        _DIVISORS[key] = base if exponent == "1" else base ** Decimal(exponent)
    return _DIVISORS[key]


def sequential_quotient_awards(
    votes: dict[int, int],
    seats: int,
    exponent: str,
    threshold: Fraction,
    initial: dict[int, int] | None = None,
    capacity: dict[int, int] | None = None,
) -> list[int]:
    """Party ids in seat-award order, recomputing all quotients per seat.

    A party strictly below `threshold` of the total votes never wins.
    Ties (quotients within 1e-30 relative) go to more votes, then lower id.
    """
    initial = initial or {}
    total = sum(votes.values())
    eligible = [
        p for p in sorted(votes)
        if Fraction(votes[p]) >= threshold * total
    ]
    have = {p: initial.get(p, 0) for p in votes}
    left = dict(capacity) if capacity is not None else {p: 10**9 for p in votes}
    sequence: list[int] = []
    for _ in range(seats):
        quotients = {
            p: Decimal(votes[p]) / _divisor(have[p], exponent)
            for p in eligible
            if left.get(p, 0) > 0
        }
        if not quotients:
            break
        top = max(quotients.values())
        scale = top if top > 1 else Decimal(1)
        contenders = [p for p, q in quotients.items() if top - q <= _TIE_EPS * scale]
        contenders.sort(key=lambda p: (-votes[p], p))
        winner = contenders[0]
        sequence.append(winner)
        have[winner] += 1
        left[winner] = left.get(winner, 10**9) - 1
    return sequence


def _candidate_sort_key(tallies, positions, cid):
    return (-tallies.get(cid, 0), positions.get(cid, 10**9), cid)


def reference_allocation(
    district_seats: dict[int, int],
    candidate_party: dict[int, int | None],
    candidate_district: dict[int, int],
    party_lists: dict[int, list[int]],
    district_tallies: dict[int, dict[int, int]],
    threshold: Fraction,
    exponent: str,
    skip_quota_rounds: bool = False,
    quota_round_only_round1: bool = False,
) -> list[tuple[int, int | None, int | None, int]]:
    """Full multi-round allocation: (round, district|None, party|None, candidate).

    Round 1: candidates whose votes reach district_votes/district_seats.
    Round 2: per-district party seats, floor(party votes / quota) minus round-1
    winners, parties under the threshold of district votes excluded.
    Round 3: nationwide sequential quotients over the pre-submitted lists,
    starting from seats already won, threshold taken over national votes.
    """
    positions: dict[int, int] = {}
    for pid, lst in party_lists.items():
        for i, cid in enumerate(lst):
            positions[cid] = i

    awards: list[tuple[int, int | None, int | None, int]] = []
    elected: set[int] = set()

    if not skip_quota_rounds:
        for d in sorted(district_tallies):
            tallies = district_tallies[d]
            seats = district_seats[d]
            cast = sum(tallies.values())
            quota = Fraction(cast, seats)
            winners = [cid for cid in sorted(tallies) if Fraction(tallies[cid]) >= quota]
            winners.sort(key=lambda cid: _candidate_sort_key(tallies, positions, cid))
            for cid in winners[:seats]:
                awards.append((1, d, candidate_party[cid], cid))
                elected.add(cid)

        if not quota_round_only_round1:
            for d in sorted(district_tallies):
                tallies = district_tallies[d]
                seats = district_seats[d]
                cast = sum(tallies.values())
                if cast == 0:
                    continue
                quota = Fraction(cast, seats)
                taken = sum(1 for a in awards if a[1] == d)
                remaining = seats - taken
                pvotes: dict[int, int] = {}
                for cid in sorted(tallies):
                    pid = candidate_party[cid]
                    if pid is not None:
                        pvotes[pid] = pvotes.get(pid, 0) + tallies[cid]
                for pid in sorted(pvotes, key=lambda p: (-pvotes[p], p)):
                    if remaining <= 0:
                        break
                    if Fraction(pvotes[pid]) < threshold * cast:
                        continue
                    r1 = sum(
                        1 for cid in tallies
                        if candidate_party[cid] == pid and cid in elected
                    )
                    due = max(0, floor(Fraction(pvotes[pid]) / quota) - r1)
                    pool = [
                        cid for cid in sorted(tallies)
                        if candidate_party[cid] == pid and cid not in elected
                    ]
                    pool.sort(key=lambda cid: _candidate_sort_key(tallies, positions, cid))
                    for cid in pool[:due]:
                        if remaining <= 0:
                            break
                        awards.append((2, d, pid, cid))
                        elected.add(cid)
                        remaining -= 1

    total_seats = sum(district_seats.values())
    seats_left = total_seats - len(awards)
    if seats_left > 0:
        national: dict[int, int] = {pid: 0 for pid in party_lists}
        total_votes = 0
        for d in district_tallies:
            for cid, v in district_tallies[d].items():
                total_votes += v
                pid = candidate_party[cid]
                if pid is not None:
                    national[pid] = national.get(pid, 0) + v
        initial: dict[int, int] = {}
        for _, _, pid, _ in awards:
            if pid is not None:
                initial[pid] = initial.get(pid, 0) + 1
        capacity = {
            pid: sum(1 for cid in party_lists.get(pid, []) if cid not in elected)
            for pid in national
        }
        order = sequential_quotient_awards(
            national, seats_left, exponent, threshold, initial, capacity
        )
        pools = {
            pid: [cid for cid in party_lists.get(pid, []) if cid not in elected]
            for pid in national
        }
        for pid in order:
            cid = pools[pid].pop(0)
            awards.append((3, None, pid, cid))
            elected.add(cid)
    return awards
