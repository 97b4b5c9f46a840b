"""Scenario definition, file format, and validation.

A scenario is a line-oriented text file with tab-separated fields and `#`
comments, split into sections:

    [election]    type / period_end / seed / threshold_percent /
                  threshold (n k) / present_shares (indices)
    [districts]   district_id  name  seats
    [parties]     party_id  name  comma-separated national list
    [candidates]  candidate_id  name  party_id-or-dash  district_id
    [voters]      voter_id  district_id  [key=value ...]
    [events]      time  kind  voter_id  [key=value ...]
    [attacks]     time  kind  voter_id
    [network]     edge  A  B          (optional extra channels)

Event kinds: cast, verify, advance_inside, advance_outside, polling_day,
home. Cast events accept candidate=, pin1=ok|fail, pin2=ok|fail, and paper
events candidate= plus admitted=1 for the roll-error case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .allocation import ELECTION_DAY_CHANNELS, VOTE_CHANNELS
from .components import CLIENT, LS, VA, VCA, VCS, VFS, VSS
from .electoral import ELECTION_TYPES, ElectionConfig, make_config
from .electoral import Candidate, District, Party, Voter, validate_config

ATTACK_MALICIOUS_CLIENT = "malicious_client_invalid_candidate"
ATTACK_DELETE_BALLOT = "vss_delete_ballot"
ATTACK_DELETE_BALLOT_AND_LOG = "vss_delete_ballot_and_log"
ATTACK_SUBSTITUTE_ON_VERIFY = "vss_substitute_ciphertext_on_verify"
ATTACK_LOG_REWRITE = "log_rewrite_coherent"
ATTACK_KINDS = (
    ATTACK_MALICIOUS_CLIENT,
    ATTACK_DELETE_BALLOT,
    ATTACK_DELETE_BALLOT_AND_LOG,
    ATTACK_SUBSTITUTE_ON_VERIFY,
    ATTACK_LOG_REWRITE,
)

EVENT_CAST = "cast"
EVENT_VERIFY = "verify"
EVENT_KINDS = (EVENT_CAST, EVENT_VERIFY) + tuple(
    c for c in VOTE_CHANNELS if c != "internet"
)

KNOWN_COMPONENTS = (CLIENT, VA, VFS, LS, VSS, VCS, VCA)

DEFAULT_CERT_END = 10**9


class ScenarioError(ValueError):
    """Parse or validation failure; message carries line/field context."""


@dataclass(frozen=True)
class VoterProvisioning:
    revoked: bool = False
    revoked_at: int | None = None
    cert_start: int = 0
    cert_end: int = DEFAULT_CERT_END


@dataclass(frozen=True)
class ScenarioEvent:
    time: int
    seq: int
    kind: str
    voter_id: str
    candidate_id: int | None = None
    pin1_ok: bool = True
    pin2_ok: bool = True
    admitted: bool = False


@dataclass(frozen=True)
class AttackInjection:
    kind: str
    voter_id: str
    activation_time: int


@dataclass
class Scenario:
    config: ElectionConfig
    period_end: int
    seed: int = 0
    threshold_n: int = 1
    threshold_k: int = 1
    present_shares: tuple[int, ...] = (1,)
    events: tuple[ScenarioEvent, ...] = ()
    attacks: tuple[AttackInjection, ...] = ()
    provisioning: dict = field(default_factory=dict)  # voter_id -> VoterProvisioning
    extra_edges: tuple[tuple[str, str], ...] = ()


def validate_scenario(sc: Scenario) -> list[str]:
    """All static checks in one pass; empty list means runnable."""
    violations = list(validate_config(sc.config))
    cfg = sc.config
    if sc.period_end <= 0:
        violations.append(f"period_end must be positive, got {sc.period_end}")
    if not (1 <= sc.threshold_k <= sc.threshold_n):
        violations.append(
            f"threshold must satisfy 1 <= k <= n, got k={sc.threshold_k} n={sc.threshold_n}"
        )
    if len(set(sc.present_shares)) != len(sc.present_shares):
        violations.append("present_shares lists a share index twice")
    for idx in sc.present_shares:
        if not (1 <= idx <= sc.threshold_n):
            violations.append(f"present share index {idx} outside 1..{sc.threshold_n}")

    casts_by_voter: dict[str, list[int]] = {}
    for ev in sc.events:
        if ev.kind == EVENT_CAST:
            casts_by_voter.setdefault(ev.voter_id, []).append(ev.time)
    for ev in sc.events:
        where = f"event t={ev.time} {ev.kind} {ev.voter_id}"
        if ev.kind not in EVENT_KINDS:
            violations.append(f"{where}: unknown event kind")
            continue
        if not (0 <= ev.time <= sc.period_end):
            violations.append(f"{where}: timestamp outside voting period [0, {sc.period_end}]")
        if not cfg.has_voter(ev.voter_id):
            violations.append(f"{where}: unknown voter")
            continue
        if ev.kind == EVENT_VERIFY:
            earlier = casts_by_voter.get(ev.voter_id, [])
            if not earlier or min(earlier) > ev.time:
                violations.append(f"{where}: verification attempt before any cast")
            continue
        if ev.candidate_id is None:
            violations.append(f"{where}: vote event requires candidate=")
            continue
        if not cfg.has_candidate(ev.candidate_id):
            violations.append(f"{where}: unknown candidate {ev.candidate_id}")
            continue
        if ev.kind != EVENT_CAST:
            # Paper ballots physically list only the voter's district.
            voter_district = cfg.voter(ev.voter_id).district_id
            if cfg.candidate(ev.candidate_id).district_id != voter_district:
                violations.append(
                    f"{where}: paper ballot names candidate outside district {voter_district}"
                )
        if ev.admitted and ev.kind not in ELECTION_DAY_CHANNELS:
            violations.append(f"{where}: admitted= applies to election-day events only")

    for atk in sc.attacks:
        where = f"attack t={atk.activation_time} {atk.kind} {atk.voter_id}"
        if atk.kind not in ATTACK_KINDS:
            violations.append(f"{where}: unknown attack kind")
        if not cfg.has_voter(atk.voter_id):
            violations.append(f"{where}: unknown voter")
        if not (0 <= atk.activation_time <= sc.period_end):
            violations.append(f"{where}: activation outside voting period")

    for a, b in sc.extra_edges:
        if a not in KNOWN_COMPONENTS or b not in KNOWN_COMPONENTS:
            violations.append(f"network edge {a}-{b}: unknown component")
        elif VCA in (a, b):
            violations.append(f"network edge {a}-{b}: the VCA is air-gapped")
    return violations


# --- parsing ---

def _parse_kv(fields, where: str) -> dict[str, str]:
    out = {}
    for f in fields:
        if "=" not in f:
            raise ScenarioError(f"{where}: expected key=value, got {f!r}")
        key, value = f.split("=", 1)
        out[key] = value
    return out


def _int(value: str, where: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ScenarioError(f"{where}: expected integer, got {value!r}") from exc


def parse_scenario(text: str) -> Scenario:
    election: dict[str, list[str]] = {}
    districts: list[District] = []
    parties: list[Party] = []
    candidates: list[Candidate] = []
    voters: list[Voter] = []
    provisioning: dict[str, VoterProvisioning] = {}
    events: list[ScenarioEvent] = []
    attacks: list[AttackInjection] = []
    edges: list[tuple[str, str]] = []

    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        where = f"line {lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            if section not in (
                "election", "districts", "parties", "candidates",
                "voters", "events", "attacks", "network",
            ):
                raise ScenarioError(f"{where}: unknown section [{section}]")
            continue
        if section is None:
            raise ScenarioError(f"{where}: content before any [section]")
        fields = line.split("\t")
        if section == "election":
            election[fields[0]] = fields[1:]
        elif section == "districts":
            if len(fields) != 3:
                raise ScenarioError(f"{where}: district needs id, name, seats")
            districts.append(
                District(_int(fields[0], where), fields[1], _int(fields[2], where))
            )
        elif section == "parties":
            if len(fields) not in (2, 3):
                raise ScenarioError(f"{where}: party needs id, name [, national list]")
            national = ()
            if len(fields) == 3 and fields[2]:
                national = tuple(_int(x, where) for x in fields[2].split(","))
            parties.append(Party(_int(fields[0], where), fields[1], national))
        elif section == "candidates":
            if len(fields) != 4:
                raise ScenarioError(f"{where}: candidate needs id, name, party, district")
            party_id = None if fields[2] == "-" else _int(fields[2], where)
            candidates.append(
                Candidate(_int(fields[0], where), fields[1], party_id, _int(fields[3], where))
            )
        elif section == "voters":
            if len(fields) < 2:
                raise ScenarioError(f"{where}: voter needs id, district")
            voters.append(Voter(fields[0], _int(fields[1], where)))
            kv = _parse_kv(fields[2:], where)
            provisioning[fields[0]] = VoterProvisioning(
                revoked=kv.get("revoked", "0") == "1",
                revoked_at=_int(kv["revoked_at"], where) if "revoked_at" in kv else None,
                cert_start=_int(kv.get("cert_start", "0"), where),
                cert_end=_int(kv.get("cert_end", str(DEFAULT_CERT_END)), where),
            )
        elif section == "events":
            if len(fields) < 3:
                raise ScenarioError(f"{where}: event needs time, kind, voter")
            kv = _parse_kv(fields[3:], where)
            events.append(
                ScenarioEvent(
                    time=_int(fields[0], where),
                    seq=len(events),
                    kind=fields[1],
                    voter_id=fields[2],
                    candidate_id=_int(kv["candidate"], where) if "candidate" in kv else None,
                    pin1_ok=kv.get("pin1", "ok") == "ok",
                    pin2_ok=kv.get("pin2", "ok") == "ok",
                    admitted=kv.get("admitted", "0") == "1",
                )
            )
        elif section == "attacks":
            if len(fields) != 3:
                raise ScenarioError(f"{where}: attack needs time, kind, voter")
            attacks.append(
                AttackInjection(
                    kind=fields[1], voter_id=fields[2],
                    activation_time=_int(fields[0], where),
                )
            )
        elif section == "network":
            if len(fields) != 3 or fields[0] != "edge":
                raise ScenarioError(f"{where}: network line must be edge\\tA\\tB")
            edges.append((fields[1], fields[2]))

    def election_value(key: str, default=None) -> str | None:
        if key in election:
            if len(election[key]) != 1:
                raise ScenarioError(f"[election] {key} takes one value")
            return election[key][0]
        return default

    election_type = election_value("type")
    if election_type not in ELECTION_TYPES:
        raise ScenarioError(f"[election] type must be one of {ELECTION_TYPES}")
    period_end = _int(election_value("period_end", "86400"), "[election] period_end")
    seed = _int(election_value("seed", "0"), "[election] seed")
    threshold_percent = _int(
        election_value("threshold_percent", "5"), "[election] threshold_percent"
    )
    if "threshold" in election:
        if len(election["threshold"]) != 2:
            raise ScenarioError("[election] threshold takes n and k")
        n = _int(election["threshold"][0], "[election] threshold n")
        k = _int(election["threshold"][1], "[election] threshold k")
    else:
        n, k = 1, 1
    if "present_shares" in election:
        present = tuple(
            _int(x, "[election] present_shares") for x in election["present_shares"]
        )
    else:
        present = tuple(range(1, k + 1))

    cfg = make_config(
        election_type, districts, parties, candidates, voters,
        threshold_fraction=Fraction(threshold_percent, 100),
    )
    return Scenario(
        config=cfg,
        period_end=period_end,
        seed=seed,
        threshold_n=n,
        threshold_k=k,
        present_shares=present,
        events=tuple(events),
        attacks=tuple(attacks),
        provisioning=provisioning,
        extra_edges=tuple(edges),
    )


def load_scenario(path) -> Scenario:
    """Parse and fully validate; raises ScenarioError listing every problem."""
    text = Path(path).read_text(encoding="utf-8")
    sc = parse_scenario(text)
    violations = validate_scenario(sc)
    if violations:
        raise ScenarioError(
            f"{path}: invalid scenario:\n" + "\n".join(f"  - {v}" for v in violations)
        )
    return sc
