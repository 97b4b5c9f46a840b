"""Vote precedence resolution, tallying, and seat allocation.

Seat mathematics covers all three election types: a district-level simple
quota round, a district-level party-proportional round, and a national
highest-averages round using divisors (1+n)^0.9 for parliamentary elections
and 1+n otherwise.

All quota and quotient comparisons are exact. The simple quota is never
materialized as a rounded number: candidate_votes >= votes_cast/seats is
evaluated as candidate_votes * seats >= votes_cast. Fractional-exponent
quotients v/(1+n)^(p/q) are compared by cross-multiplying the q-th powers:
a/(1+na)^(p/q) > b/(1+nb)^(p/q) iff a^q * (1+nb)^p > b^q * (1+na)^p, which
is an exact integer test, so no tolerance policy is needed and mathematical
ties are detected exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .electoral import (
    EUROPEAN_PARLIAMENT,
    MUNICIPAL,
    RIIGIKOGU,
    ElectionConfig,
)

CHANNEL_INTERNET = "internet"
CHANNEL_ADVANCE_OUTSIDE = "advance_outside"
CHANNEL_ADVANCE_INSIDE = "advance_inside"
CHANNEL_POLLING_DAY = "polling_day"
CHANNEL_HOME = "home"
VOTE_CHANNELS = (
    CHANNEL_INTERNET,
    CHANNEL_ADVANCE_OUTSIDE,
    CHANNEL_ADVANCE_INSIDE,
    CHANNEL_POLLING_DAY,
    CHANNEL_HOME,
)
PAPER_ADVANCE_CHANNELS = (CHANNEL_ADVANCE_OUTSIDE, CHANNEL_ADVANCE_INSIDE)
ELECTION_DAY_CHANNELS = (CHANNEL_POLLING_DAY, CHANNEL_HOME)


# --- vote precedence ---

@dataclass(frozen=True)
class VoteEvent:
    voter_id: str
    channel: str
    candidate_id: int
    timestamp: int
    # Error case: the polling-station roll admitted a voter who had already
    # voted by internet or advance paper. Their election-day ballot then
    # counts and the e-vote is cancelled.
    admitted_in_error: bool = False


@dataclass
class EffectiveVoteResolution:
    effective: dict[str, VoteEvent | None]
    # (voter_id, reason) pairs the storage server must process as e-vote
    # cancellations: reason polling_station or advance_paper.
    cancellations: list[tuple[str, str]]
    rejected: list[tuple[VoteEvent, str]]


def resolve_effective_votes(events_by_voter) -> EffectiveVoteResolution:
    """Reduce each voter's timeline to at most one effective vote.

    Channel precedence: an accepted election-day vote beats everything, an
    inside-district advance vote beats an outside-district one, and any paper
    advance vote beats internet votes. Among internet votes the latest
    timestamp wins. Election-day votes are refused at the station for anyone
    with a prior internet or advance event, unless the event is flagged
    admitted_in_error. Second paper votes on an already-used channel are
    refused.
    """
    effective: dict[str, VoteEvent | None] = {}
    cancellations: list[tuple[str, str]] = []
    rejected: list[tuple[VoteEvent, str]] = []

    for voter_id in sorted(events_by_voter):
        events = sorted(
            events_by_voter[voter_id], key=lambda e: e.timestamp
        )
        internet: list[VoteEvent] = []
        advance_inside: VoteEvent | None = None
        advance_outside: VoteEvent | None = None
        polling: VoteEvent | None = None
        for e in events:
            if e.channel == CHANNEL_INTERNET:
                internet.append(e)
            elif e.channel == CHANNEL_ADVANCE_INSIDE:
                if advance_inside is not None:
                    rejected.append((e, "duplicate_advance_inside"))
                else:
                    advance_inside = e
            elif e.channel == CHANNEL_ADVANCE_OUTSIDE:
                if advance_inside is not None:
                    rejected.append((e, "advance_outside_after_inside"))
                elif advance_outside is not None:
                    rejected.append((e, "duplicate_advance_outside"))
                else:
                    advance_outside = e
            elif e.channel in ELECTION_DAY_CHANNELS:
                prior = internet or advance_inside or advance_outside
                if polling is not None:
                    rejected.append((e, "duplicate_election_day"))
                elif prior and not e.admitted_in_error:
                    rejected.append((e, "polling_station_refused"))
                else:
                    polling = e
            else:
                raise ValueError(f"unknown vote channel {e.channel!r}")

        chosen = polling or advance_inside or advance_outside
        if chosen is None and internet:
            chosen = internet[-1]
        effective[voter_id] = chosen
        if internet and chosen is not None and chosen.channel != CHANNEL_INTERNET:
            if chosen.channel in ELECTION_DAY_CHANNELS:
                cancellations.append((voter_id, "polling_station"))
            else:
                cancellations.append((voter_id, "advance_paper"))
    return EffectiveVoteResolution(effective, cancellations, rejected)


# --- quota and quotient arithmetic ---

@dataclass(frozen=True)
class Quota:
    """The simple quota votes_cast/seats, kept as an exact ratio."""

    votes_cast: int
    seats: int

    def met_by(self, candidate_votes: int) -> bool:
        return candidate_votes * self.seats >= self.votes_cast

    def entitlement(self, party_votes: int) -> int:
        """floor(party_votes / quota), exactly."""
        if self.votes_cast == 0:
            return 0
        return (party_votes * self.seats) // self.votes_cast

    def render(self) -> str:
        return f"quota={self.votes_cast}/{self.seats}"


@dataclass(frozen=True)
class DHondtParams:
    exponent: Fraction  # 9/10 for Riigikogu round 3, 1 otherwise
    threshold_fraction: Fraction
    initial_seats: dict  # party_id -> seats already won in earlier rounds


def meets_threshold(votes: int, total_votes: int, threshold: Fraction) -> bool:
    """A party strictly below the threshold share gets no further seats."""
    return votes * threshold.denominator >= threshold.numerator * total_votes


def _cmp_quotients(va: int, na: int, vb: int, nb: int, exponent: Fraction) -> int:
    """Exact sign of va/(1+na)^exponent - vb/(1+nb)^exponent."""
    p, q = exponent.numerator, exponent.denominator
    lhs = va**q * (1 + nb) ** p
    rhs = vb**q * (1 + na) ** p
    return (lhs > rhs) - (lhs < rhs)


def _render_quotient(votes: int, n: int, exponent: Fraction) -> str:
    divisor = 1 + n
    if exponent == 1:
        return f"{votes}/{divisor}"
    value = votes / divisor ** float(exponent)
    return f"{votes}/{divisor}^{float(exponent)}={value:.4f}"


# --- allocation results ---

@dataclass(frozen=True)
class SeatAward:
    round_no: int
    district_id: int | None  # None for the national round
    seat_no: int  # 1-based across the whole allocation
    party_id: int | None
    candidate_id: int
    basis: str  # quota or quotient rendering
    tiebreak: str = ""


@dataclass
class AllocationResult:
    awards: list[SeatAward] = field(default_factory=list)
    party_seats: dict = field(default_factory=dict)  # party_id|None -> count
    unfilled: int = 0

    def elected(self) -> list[int]:
        return [a.candidate_id for a in self.awards]

    def round_awards(self, round_no: int) -> list[SeatAward]:
        return [a for a in self.awards if a.round_no == round_no]

    def add(self, award: SeatAward) -> None:
        self.awards.append(award)
        self.party_seats[award.party_id] = self.party_seats.get(award.party_id, 0) + 1


def render_allocation(result: AllocationResult, cfg: ElectionConfig) -> str:
    """One line per seat: round, district, seat#, party, candidate, basis."""
    lines = []
    for a in result.awards:
        where = "NATIONAL" if a.district_id is None else str(a.district_id)
        party = "-" if a.party_id is None else cfg.party(a.party_id).name
        candidate = cfg.candidate(a.candidate_id).name
        lines.append(
            "\t".join(
                [str(a.round_no), where, str(a.seat_no), party, candidate, a.basis, a.tiebreak]
            )
        )
    if result.unfilled:
        lines.append(f"# unfilled seats: {result.unfilled}")
    return "\n".join(lines) + "\n"


# --- candidate ordering helpers ---

def _list_position(cfg: ElectionConfig, candidate_id: int) -> int:
    c = cfg.candidate(candidate_id)
    if c.party_id is not None:
        national = cfg.party(c.party_id).national_ordered_list
        if candidate_id in national:
            return national.index(candidate_id)
    return 10**9


def _candidate_order_key(cfg: ElectionConfig, tallies, candidate_id: int):
    # Personal votes descending, then national-list position, then id.
    return (-tallies.get(candidate_id, 0), _list_position(cfg, candidate_id), candidate_id)


# --- allocation rounds ---

def simple_quota_round(
    cfg: ElectionConfig, district_id: int, tallies, seats: int
) -> list[tuple[int, str, str]]:
    """Round 1: every candidate at or above votes_cast/seats is elected.

    Returns (candidate_id, basis, tiebreak) triples. More qualifiers than
    seats (possible only in degenerate zero-vote districts) are cut by vote
    count, then the standard candidate tie-break.
    """
    votes_cast = sum(tallies.values())
    quota = Quota(votes_cast, seats)
    qualifiers = [
        cid
        for cid in sorted(tallies)
        if quota.met_by(tallies[cid])
    ]
    qualifiers.sort(key=lambda cid: _candidate_order_key(cfg, tallies, cid))
    elected = qualifiers[:seats]
    note = "cut_to_seats" if len(qualifiers) > seats else ""
    return [
        (cid, f"{tallies.get(cid, 0)}>={quota.render()}", note)
        for cid in elected
    ]


def round2_district(
    cfg: ElectionConfig,
    district_id: int,
    tallies,
    seats_remaining: int,
    quota: Quota,
    round1_elected: set,
) -> list[tuple[int, int, str, str]]:
    """Round 2: district party seats by floor(party_votes/quota) minus round-1 wins.

    Parties strictly below the threshold share of district votes cast get
    nothing. Seats are filled from each party's district candidates by
    personal votes. Returns (party_id, candidate_id, basis, tiebreak).
    """
    if seats_remaining <= 0 or quota.votes_cast == 0:
        return []
    party_votes: dict[int, int] = {}
    party_candidates: dict[int, list[int]] = {}
    for cid in sorted(tallies):
        pid = cfg.candidate(cid).party_id
        if pid is None:
            continue
        party_votes[pid] = party_votes.get(pid, 0) + tallies[cid]
        party_candidates.setdefault(pid, []).append(cid)

    awards: list[tuple[int, int, str, str]] = []
    order = sorted(party_votes, key=lambda pid: (-party_votes[pid], pid))
    for pid in order:
        if seats_remaining <= 0:
            break
        votes = party_votes[pid]
        if not meets_threshold(votes, quota.votes_cast, cfg.threshold_fraction):
            continue
        round1_wins = sum(
            1 for cid in party_candidates[pid] if cid in round1_elected
        )
        entitlement = max(0, quota.entitlement(votes) - round1_wins)
        pool = [c for c in party_candidates[pid] if c not in round1_elected]
        pool.sort(key=lambda cid: _candidate_order_key(cfg, tallies, cid))
        for cid in pool[:entitlement]:
            if seats_remaining <= 0:
                break
            awards.append((pid, cid, f"{votes}:{quota.render()}", ""))
            seats_remaining -= 1
    return awards


def dhondt_award_sequence(
    party_votes,
    seats: int,
    exponent: Fraction,
    threshold_fraction: Fraction,
    total_votes: int,
    initial_seats,
    available,
) -> tuple[list[tuple[int, str, str]], int]:
    """The highest-averages seat loop, detached from candidate bookkeeping.

    Awards seats one at a time to the eligible party maximizing
    votes/(1+n)^exponent, where n counts that party's seats so far including
    initial_seats. Ties go to the larger vote count, then the lower party id.
    `available` caps how many more seats each party's list can absorb.
    Returns ([(party_id, quotient_render, tiebreak_note)], unfilled_count).
    """
    seats_so_far = {pid: initial_seats.get(pid, 0) for pid in party_votes}
    remaining = {pid: available.get(pid, 0) for pid in party_votes}
    eligible = [
        pid
        for pid in sorted(party_votes)
        if meets_threshold(party_votes[pid], total_votes, threshold_fraction)
    ]
    awards: list[tuple[int, str, str]] = []
    for _ in range(seats):
        best = None
        note = ""
        for pid in eligible:
            if remaining[pid] <= 0:
                continue
            if best is None:
                best = pid
                note = ""
                continue
            c = _cmp_quotients(
                party_votes[pid], seats_so_far[pid],
                party_votes[best], seats_so_far[best], exponent,
            )
            if c > 0:
                best = pid
                note = ""
            elif c == 0:
                if party_votes[pid] > party_votes[best]:
                    best = pid
                    note = "tie:votes"
                else:
                    note = "tie:votes" if party_votes[pid] < party_votes[best] else "tie:party_id"
        if best is None:
            return awards, seats - len(awards)
        awards.append(
            (best, _render_quotient(party_votes[best], seats_so_far[best], exponent), note)
        )
        seats_so_far[best] += 1
        remaining[best] -= 1
    return awards, 0


def dhondt_allocate(
    cfg: ElectionConfig,
    party_votes,
    seats: int,
    params: DHondtParams,
    total_votes: int,
    already_elected: set,
) -> tuple[list[tuple[int, int, str, str]], int]:
    """National round: run the seat loop and fill from ordered party lists.

    Candidates already elected in earlier rounds are skipped when walking a
    list. Returns (party_id, candidate_id, basis, tiebreak) plus the count of
    seats left unfilled because every eligible list ran out.
    """
    pools: dict[int, list[int]] = {}
    for pid in sorted(party_votes):
        national = cfg.party(pid).national_ordered_list
        pools[pid] = [cid for cid in national if cid not in already_elected]
    available = {pid: len(pool) for pid, pool in pools.items()}
    sequence, unfilled = dhondt_award_sequence(
        party_votes,
        seats,
        params.exponent,
        params.threshold_fraction,
        total_votes,
        params.initial_seats,
        available,
    )
    awards = []
    for pid, basis, note in sequence:
        cid = pools[pid].pop(0)
        awards.append((pid, cid, basis, note))
    return awards, unfilled


# --- full election-type compositions ---

def _district_party_votes(cfg: ElectionConfig, tallies) -> dict[int, int]:
    out: dict[int, int] = {}
    for cid in sorted(tallies):
        pid = cfg.candidate(cid).party_id
        if pid is not None:
            out[pid] = out.get(pid, 0) + tallies[cid]
    return out


def _national_party_votes(cfg: ElectionConfig, district_tallies) -> dict[int, int]:
    out: dict[int, int] = {}
    for district_id in sorted(district_tallies):
        for pid, votes in _district_party_votes(cfg, district_tallies[district_id]).items():
            out[pid] = out.get(pid, 0) + votes
    # Parties with a list but no votes still participate (with zero votes).
    for p in cfg.parties:
        out.setdefault(p.party_id, 0)
    return out


def _district_rounds(
    cfg: ElectionConfig, district_tallies, result: AllocationResult
) -> set:
    """Rounds 1 and 2 across all districts; mutates result, returns elected set."""
    elected: set[int] = set()
    round2_queue = []
    for district_id in sorted(district_tallies):
        tallies = district_tallies[district_id]
        seats = cfg.district(district_id).seats
        r1 = simple_quota_round(cfg, district_id, tallies, seats)
        for cid, basis, note in r1:
            result.add(
                SeatAward(
                    1, district_id, len(result.awards) + 1,
                    cfg.candidate(cid).party_id, cid, basis, note,
                )
            )
            elected.add(cid)
        round2_queue.append((district_id, tallies, seats, {cid for cid, _, _ in r1}))
    for district_id, tallies, seats, r1_elected in round2_queue:
        votes_cast = sum(tallies.values())
        remaining = seats - len(r1_elected)
        r2 = round2_district(
            cfg, district_id, tallies, remaining, Quota(votes_cast, seats), r1_elected
        )
        for pid, cid, basis, note in r2:
            result.add(SeatAward(2, district_id, len(result.awards) + 1, pid, cid, basis, note))
            elected.add(cid)
    return elected


def _national_round(
    cfg: ElectionConfig,
    district_tallies,
    result: AllocationResult,
    elected: set,
    exponent: Fraction,
) -> None:
    total_seats = cfg.total_seats()
    seats_left = total_seats - len(result.awards)
    if seats_left <= 0:
        return
    party_votes = _national_party_votes(cfg, district_tallies)
    total_votes = sum(
        sum(t.values()) for t in district_tallies.values()
    )
    initial = {
        pid: n for pid, n in result.party_seats.items() if pid is not None
    }
    params = DHondtParams(exponent, cfg.threshold_fraction, initial)
    awards, unfilled = dhondt_allocate(
        cfg, party_votes, seats_left, params, total_votes, elected
    )
    for pid, cid, basis, note in awards:
        result.add(SeatAward(3, None, len(result.awards) + 1, pid, cid, basis, note))
        elected.add(cid)
    result.unfilled = unfilled


def allocate_riigikogu(cfg: ElectionConfig, district_tallies) -> AllocationResult:
    """Three rounds: district simple quota, district party seats, then the
    national modified d'Hondt round with divisor exponent 9/10."""
    result = AllocationResult()
    elected = _district_rounds(cfg, district_tallies, result)
    _national_round(cfg, district_tallies, result, elected, Fraction(9, 10))
    return result


def allocate_ep(cfg: ElectionConfig, national_tallies) -> AllocationResult:
    """Single national district; pure d'Hondt over ordered lists with
    independents as synthesized single-member lists."""
    result = AllocationResult()
    district_id = cfg.districts[0].district_id
    elected: set[int] = set()
    _national_round(cfg, {district_id: dict(national_tallies)}, result, elected, Fraction(1))
    return result


def allocate_municipal(cfg: ElectionConfig, district_tallies) -> AllocationResult:
    """Single district: quota round then d'Hondt (exponent 1) remainder.
    Multiple districts: district rounds 1-2 then a municipality-wide
    d'Hondt (exponent 1) round."""
    result = AllocationResult()
    if len(cfg.districts) == 1:
        district_id = cfg.districts[0].district_id
        tallies = district_tallies.get(district_id, {})
        seats = cfg.district(district_id).seats
        elected: set[int] = set()
        for cid, basis, note in simple_quota_round(cfg, district_id, tallies, seats):
            result.add(
                SeatAward(
                    1, district_id, len(result.awards) + 1,
                    cfg.candidate(cid).party_id, cid, basis, note,
                )
            )
            elected.add(cid)
        _national_round(cfg, {district_id: tallies}, result, elected, Fraction(1))
        return result
    elected = _district_rounds(cfg, district_tallies, result)
    _national_round(cfg, district_tallies, result, elected, Fraction(1))
    return result


def allocate(cfg: ElectionConfig, district_tallies) -> AllocationResult:
    """Dispatch on election type; tallies keyed district -> candidate -> votes."""
    if cfg.election_type == RIIGIKOGU:
        return allocate_riigikogu(cfg, district_tallies)
    if cfg.election_type == EUROPEAN_PARLIAMENT:
        district_id = cfg.districts[0].district_id
        return allocate_ep(cfg, district_tallies.get(district_id, {}))
    if cfg.election_type == MUNICIPAL:
        return allocate_municipal(cfg, district_tallies)
    raise ValueError(f"unknown election type {cfg.election_type!r}")
