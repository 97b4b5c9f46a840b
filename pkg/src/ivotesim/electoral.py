"""Election configuration: districts, parties, candidates, voters.

Registers are immutable after construction and safe to share read-only.
The configuration is what the vote forwarding server consults to answer
eligibility and candidate-list queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

RIIGIKOGU = "riigikogu"
EUROPEAN_PARLIAMENT = "european_parliament"
MUNICIPAL = "municipal"
ELECTION_TYPES = (RIIGIKOGU, EUROPEAN_PARLIAMENT, MUNICIPAL)

EP_SEATS = 6


class IneligibleVoterError(KeyError):
    """Raised when a voter id is not in the register."""


@dataclass(frozen=True)
class District:
    district_id: int
    name: str
    seats: int


@dataclass(frozen=True)
class Party:
    party_id: int
    name: str
    # Pre-submitted ordered national candidate list; decides who fills
    # party seats in the national allocation round.
    national_ordered_list: tuple[int, ...] = ()
    # True for the single-member lists synthesized for independents in
    # EP/municipal allocation.
    synthetic: bool = False


@dataclass(frozen=True)
class Candidate:
    candidate_id: int
    name: str
    party_id: int | None
    district_id: int


@dataclass(frozen=True)
class Voter:
    voter_id: str
    district_id: int
    auth_cert_id: str = ""
    signing_cert_id: str = ""

    def __post_init__(self):
        if not self.auth_cert_id:
            object.__setattr__(self, "auth_cert_id", f"{self.voter_id}-auth")
        if not self.signing_cert_id:
            object.__setattr__(self, "signing_cert_id", f"{self.voter_id}-sign")


@dataclass(frozen=True)
class ElectionConfig:
    election_type: str
    districts: tuple[District, ...]
    parties: tuple[Party, ...]
    candidates: tuple[Candidate, ...]
    voters: tuple[Voter, ...]
    threshold_fraction: Fraction = Fraction(1, 20)
    # Divisor exponent for the national allocation round: 9/10 for
    # Riigikogu, 1 for EP and municipal.
    dhondt_exponent: Fraction = Fraction(1)

    _district_by_id: dict = field(init=False, repr=False, compare=False, default=None)
    _party_by_id: dict = field(init=False, repr=False, compare=False, default=None)
    _candidate_by_id: dict = field(init=False, repr=False, compare=False, default=None)
    _voter_by_id: dict = field(init=False, repr=False, compare=False, default=None)
    _candidates_by_district: dict = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_district_by_id", {d.district_id: d for d in self.districts})
        object.__setattr__(self, "_party_by_id", {p.party_id: p for p in self.parties})
        object.__setattr__(self, "_candidate_by_id", {c.candidate_id: c for c in self.candidates})
        object.__setattr__(self, "_voter_by_id", {v.voter_id: v for v in self.voters})
        by_district: dict[int, list[Candidate]] = {d.district_id: [] for d in self.districts}
        for c in self.candidates:
            by_district.setdefault(c.district_id, []).append(c)
        for cs in by_district.values():
            cs.sort(key=lambda c: c.candidate_id)
        object.__setattr__(
            self, "_candidates_by_district", {k: tuple(v) for k, v in by_district.items()}
        )

    def district(self, district_id: int) -> District:
        return self._district_by_id[district_id]

    def party(self, party_id: int) -> Party:
        return self._party_by_id[party_id]

    def candidate(self, candidate_id: int) -> Candidate:
        return self._candidate_by_id[candidate_id]

    def voter(self, voter_id: str) -> Voter:
        return self._voter_by_id[voter_id]

    def has_voter(self, voter_id: str) -> bool:
        return voter_id in self._voter_by_id

    def has_candidate(self, candidate_id: int) -> bool:
        return candidate_id in self._candidate_by_id

    def candidates_in_district(self, district_id: int) -> tuple[Candidate, ...]:
        return self._candidates_by_district.get(district_id, ())

    def total_seats(self) -> int:
        return sum(d.seats for d in self.districts)


def make_config(
    election_type: str,
    districts,
    parties,
    candidates,
    voters,
    threshold_fraction: Fraction = Fraction(1, 20),
) -> ElectionConfig:
    """Build a config, applying per-type load transforms.

    For EP and municipal elections, independents are folded into synthesized
    single-member party lists so the national allocation round can treat
    every candidate uniformly.
    """
    districts = tuple(districts)
    parties = tuple(parties)
    candidates = tuple(candidates)
    voters = tuple(voters)
    if election_type in (EUROPEAN_PARLIAMENT, MUNICIPAL):
        parties, candidates = synthesize_independent_lists(parties, candidates)
    exponent = Fraction(9, 10) if election_type == RIIGIKOGU else Fraction(1)
    return ElectionConfig(
        election_type=election_type,
        districts=districts,
        parties=parties,
        candidates=candidates,
        voters=voters,
        threshold_fraction=threshold_fraction,
        dhondt_exponent=exponent,
    )


def synthesize_independent_lists(parties, candidates):
    """Give each independent candidate a synthetic one-candidate party."""
    parties = list(parties)
    candidates = list(candidates)
    next_id = max((p.party_id for p in parties), default=0) + 1
    out_candidates = []
    for c in sorted(candidates, key=lambda c: c.candidate_id):
        if c.party_id is None:
            parties.append(
                Party(
                    party_id=next_id,
                    name=f"(independent) {c.name}",
                    national_ordered_list=(c.candidate_id,),
                    synthetic=True,
                )
            )
            out_candidates.append(
                Candidate(c.candidate_id, c.name, next_id, c.district_id)
            )
            next_id += 1
        else:
            out_candidates.append(c)
    out_candidates.sort(key=lambda c: c.candidate_id)
    return tuple(parties), tuple(out_candidates)


def validate_config(cfg: ElectionConfig) -> list[str]:
    """Check every register invariant; returns one message per violation.

    Empty list means the configuration is valid. Violations are report
    entries, not exceptions, so a scenario loader can surface all of them
    at once.
    """
    violations: list[str] = []
    if cfg.election_type not in ELECTION_TYPES:
        violations.append(f"unknown election type {cfg.election_type!r}")
    if not (0 <= cfg.threshold_fraction < 1):
        violations.append(f"threshold_fraction {cfg.threshold_fraction} outside [0,1)")

    seen_districts: set[int] = set()
    for d in sorted(cfg.districts, key=lambda d: d.district_id):
        if d.district_id in seen_districts:
            violations.append(f"duplicate district_id {d.district_id}")
        seen_districts.add(d.district_id)
        if d.seats < 1:
            violations.append(f"district {d.district_id} has {d.seats} seats (must be >= 1)")

    if not cfg.districts:
        violations.append("election must have at least one district")
    if cfg.election_type == EUROPEAN_PARLIAMENT:
        if len(cfg.districts) != 1:
            violations.append("EP must be single national district")
        elif cfg.districts[0].seats != EP_SEATS:
            violations.append(
                f"EP national district must have {EP_SEATS} seats, "
                f"got {cfg.districts[0].seats}"
            )

    candidate_ids = {c.candidate_id for c in cfg.candidates}
    seen_parties: set[int] = set()
    for p in sorted(cfg.parties, key=lambda p: p.party_id):
        if p.party_id in seen_parties:
            violations.append(f"duplicate party_id {p.party_id}")
        seen_parties.add(p.party_id)
        listed: set[int] = set()
        for cid in p.national_ordered_list:
            if cid in listed:
                violations.append(f"party {p.party_id} lists candidate {cid} twice")
            listed.add(cid)
            if cid not in candidate_ids:
                violations.append(f"party {p.party_id} lists unknown candidate {cid}")

    seen_candidates: set[int] = set()
    for c in sorted(cfg.candidates, key=lambda c: c.candidate_id):
        if c.candidate_id in seen_candidates:
            violations.append(f"duplicate candidate_id {c.candidate_id}")
        seen_candidates.add(c.candidate_id)
        if c.district_id not in seen_districts:
            violations.append(
                f"candidate {c.candidate_id} stands in nonexistent district {c.district_id}"
            )
        if c.party_id is not None and c.party_id not in seen_parties:
            violations.append(f"candidate {c.candidate_id} names unknown party {c.party_id}")

    seen_voters: set[str] = set()
    for v in sorted(cfg.voters, key=lambda v: v.voter_id):
        if v.voter_id in seen_voters:
            violations.append(f"duplicate voter_id {v.voter_id}")
        seen_voters.add(v.voter_id)
        if v.district_id not in seen_districts:
            violations.append(
                f"voter {v.voter_id} registered in nonexistent district {v.district_id}"
            )
    return violations


def district_candidate_list(cfg: ElectionConfig, voter_id: str) -> tuple[Candidate, ...]:
    """Candidates standing in the voter's district, ascending candidate_id.

    This is the list the forwarding server sends to the voting client.
    """
    if not cfg.has_voter(voter_id):
        raise IneligibleVoterError(voter_id)
    return cfg.candidates_in_district(cfg.voter(voter_id).district_id)


# 2011 Riigikogu electoral districts. 12 districts, 101 seats total.
RIIGIKOGU_2011_DISTRICTS: tuple[District, ...] = (
    District(1, "Tallinn (Haabersti, Põhja-Tallinn and Kristiine districts)", 9),
    District(2, "Tallinn (Kesklinn, Lasnamäe and Pirita districts)", 11),
    District(3, "Tallinn (Mustamäe and Nõmme districts)", 8),
    District(4, "Harjumaa (excluding Tallinn) and Raplamaa", 14),
    District(5, "Hiiumaa, Läänemaa and Saaremaa", 6),
    District(6, "Lääne-Virumaa", 5),
    District(7, "Ida-Virumaa", 8),
    District(8, "Järvamaa and Viljandimaa", 8),
    District(9, "Jõgevamaa and Tartumaa (excluding Tartu)", 7),
    District(10, "Tartu", 8),
    District(11, "Võrumaa, Valgamaa and Põlvamaa", 9),
    District(12, "Pärnumaa", 8),
)


def riigikogu_2011_config(parties=(), candidates=(), voters=()) -> ElectionConfig:
    """The shipped 2011 parliamentary district map, with caller-supplied registers."""
    return make_config(
        RIIGIKOGU, RIIGIKOGU_2011_DISTRICTS, parties, candidates, voters
    )
