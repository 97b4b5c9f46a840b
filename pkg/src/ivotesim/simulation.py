"""The deterministic run pipeline: provisioning, event loop, close-of-period
batch, counting, allocation, audit, and report writing.

One seeded generator supplies every byte of randomness (keys, ballot
randomness, session codes), events execute in (timestamp, sequence) order,
and all output files are assembled from sorted data, so two runs of the same
scenario and seed produce byte-identical output directories.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from . import crypto
from .allocation import (
    CHANNEL_INTERNET,
    AllocationResult,
    VoteEvent,
    allocate,
    render_allocation,
    resolve_effective_votes,
)
from .auditlog import AuditLogs, AuditReport, check_consistency
from .components import (
    CLIENT,
    LS,
    VA,
    VCS,
    VFS,
    VSS,
    AnonymizedBallotExport,
    BallotRandomness,
    ConstituencyTallies,
    IntegrityAlarmError,
    LogServer,
    Network,
    ValidityConfirmationServer,
    VerificationApp,
    VerificationError,
    VoteCountingApp,
    VoteForwardingServer,
    VoteStorageServer,
    VotingClient,
)
from .crypto import InsufficientSharesError, VoterCertificate, ballot_hash
from .electoral import ElectionConfig
from .rng import DeterministicRng
from .scenario import (
    ATTACK_DELETE_BALLOT,
    ATTACK_DELETE_BALLOT_AND_LOG,
    ATTACK_LOG_REWRITE,
    ATTACK_MALICIOUS_CLIENT,
    ATTACK_SUBSTITUTE_ON_VERIFY,
    EVENT_CAST,
    EVENT_VERIFY,
    AttackInjection,
    Scenario,
    ScenarioError,
    VoterProvisioning,
    validate_scenario,
)

VERDICT_DETECTED = "detected"
VERDICT_UNDETECTED = "undetected"
VERDICT_BY_VERIFICATION = "detected_by_verification"

OUT_DIR_ENV = "IVOTE_SIM_OUT"


@dataclass
class CryptoMaterial:
    election_keys: crypto.ElectionKeyPair
    vcs_state: crypto.VcsState
    certificates: dict[str, VoterCertificate]
    signing_keys: dict[str, bytes]  # voter_id -> private key
    cert_ids: dict[str, str]  # voter_id -> signing certificate id
    shares: list[crypto.KeyShare]


def provision(cfg: ElectionConfig, sc: Scenario, rng: DeterministicRng) -> CryptoMaterial:
    """Derive all key material from the run generator in register order."""
    election_keys = crypto.generate_election_keypair(rng)
    vcs_state = crypto.VcsState(crypto.generate_signing_keypair(rng))
    certificates: dict[str, VoterCertificate] = {}
    signing_keys: dict[str, bytes] = {}
    cert_ids: dict[str, str] = {}
    for voter in sorted(cfg.voters, key=lambda v: v.voter_id):
        keys = crypto.generate_signing_keypair(rng)
        prov = sc.provisioning.get(voter.voter_id, VoterProvisioning())
        cert = VoterCertificate(
            cert_id=voter.signing_cert_id,
            voter_id=voter.voter_id,
            public_key=keys.public_key,
            valid_from=prov.cert_start,
            valid_until=prov.cert_end,
            revoked=prov.revoked,
        )
        if prov.revoked_at is not None:
            vcs_state.revoke(cert.cert_id, prov.revoked_at)
        certificates[cert.cert_id] = cert
        signing_keys[voter.voter_id] = keys.private_key
        cert_ids[voter.voter_id] = cert.cert_id
    shares = crypto.split_key(
        election_keys.private_key, sc.threshold_n, sc.threshold_k, rng
    )
    return CryptoMaterial(
        election_keys, vcs_state, certificates, signing_keys, cert_ids, shares
    )


@dataclass
class EventOutcome:
    time: int
    seq: int
    description: str
    outcome: str

    def to_line(self) -> str:
        return f"{self.time}\t{self.seq}\t{self.description}\t{self.outcome}"


@dataclass
class VerificationOutcome:
    voter_id: str
    time: int
    result: str  # verified | window_expired | attempts_exhausted |
    #              unknown_session | vote_absent | integrity_alarm | no_session
    candidate_id: int | None
    expected_candidate_id: int | None


@dataclass
class AttackVerdict:
    attack: AttackInjection
    verdict: str

    def to_line(self) -> str:
        return f"{self.attack.kind}\t{self.attack.voter_id}\t{self.verdict}"


@dataclass
class RunReport:
    scenario_seed: int
    election_type: str
    period_end: int
    event_outcomes: list[EventOutcome] = field(default_factory=list)
    verifications: list[VerificationOutcome] = field(default_factory=list)
    cancellations: list[tuple[str, str, bool, str | None]] = field(default_factory=list)
    rejected_paper_events: list[tuple[str, int, str, str]] = field(default_factory=list)
    evote_tallies: ConstituencyTallies | None = None
    paper_tallies: dict = field(default_factory=dict)
    combined_tallies: dict = field(default_factory=dict)
    allocation: AllocationResult | None = None
    audit: AuditReport | None = None
    count_error: str | None = None
    verdicts: list[AttackVerdict] = field(default_factory=list)
    integrity_alarms: list[tuple[str, int]] = field(default_factory=list)
    logs: AuditLogs = field(default_factory=AuditLogs)
    export: AnonymizedBallotExport | None = None
    verify_state_rows: list[str] = field(default_factory=list)
    # voter_id -> serialized QR payload of their latest accepted cast; the
    # client-side artifact a voter would scan with the verification app.
    qr_payloads: dict = field(default_factory=dict)

    @property
    def audit_passed(self) -> bool:
        return self.audit is not None and self.audit.passed

    @property
    def had_integrity_alarm(self) -> bool:
        return bool(self.integrity_alarms)

    def evote_total(self) -> int:
        return self.evote_tallies.total() if self.evote_tallies else 0

    def render(self) -> str:
        lines = [
            "ivotesim run report",
            f"election_type\t{self.election_type}",
            f"seed\t{self.scenario_seed}",
            f"period_end\t{self.period_end}",
            "",
            "[events]",
        ]
        lines.extend(e.to_line() for e in self.event_outcomes)
        lines.append("")
        lines.append("[cancellations]")
        for voter_id, reason, cancelled, h in self.cancellations:
            status = h if cancelled else "no_stored_ballot"
            lines.append(f"{voter_id}\t{reason}\t{status}")
        lines.append("")
        lines.append("[rejected_paper_votes]")
        for voter_id, time, kind, reason in self.rejected_paper_events:
            lines.append(f"{voter_id}\t{time}\t{kind}\t{reason}")
        lines.append("")
        lines.append("[summary]")
        for log_id in (1, 2, 3, 4, 5):
            lines.append(f"log{log_id}_entries\t{len(self.logs.log(log_id))}")
        lines.append(f"evote_tally_total\t{self.evote_total()}")
        paper_total = sum(sum(t.values()) for t in self.paper_tallies.values())
        lines.append(f"paper_tally_total\t{paper_total}")
        if self.count_error:
            lines.append(f"count_error\t{self.count_error}")
        if self.audit is None:
            lines.append("audit\tSKIPPED")
        else:
            lines.append(f"audit\t{'PASS' if self.audit.passed else 'FAIL'}")
        lines.append(f"integrity_alarms\t{len(self.integrity_alarms)}")
        lines.append("")
        lines.append("[attack_verdicts]")
        lines.extend(v.to_line() for v in self.verdicts)
        lines.append("")
        return "\n".join(lines)


def _merge_queue(sc: Scenario):
    """Events and attack activations as one queue, (time, kind-order, seq).

    Attacks carry their index in the scenario so verdicts can be matched
    back one-to-one."""
    queue = [(ev.time, 0, ev.seq, "event", None, ev) for ev in sc.events]
    base = len(sc.events)
    queue += [
        (atk.activation_time, 1, base + i, "attack", i, atk)
        for i, atk in enumerate(sc.attacks)
    ]
    queue.sort(key=lambda item: (item[0], item[1], item[2]))
    return queue


def run(sc: Scenario, out_dir=None) -> RunReport:
    violations = validate_scenario(sc)
    if violations:
        raise ScenarioError("invalid scenario:\n" + "\n".join(f"  - {v}" for v in violations))

    cfg = sc.config
    rng = DeterministicRng(sc.seed)
    material = provision(cfg, sc, rng)
    logs = AuditLogs()
    network = Network()
    report = RunReport(sc.seed, cfg.election_type, sc.period_end, logs=logs)

    log_server = LogServer()
    vcs = ValidityConfirmationServer(material.vcs_state)
    vfs = VoteForwardingServer(cfg, network)
    vss = VoteStorageServer(cfg, material.certificates, logs, network, rng, sc.period_end)
    client = VotingClient(
        material.election_keys.public_key,
        material.signing_keys,
        material.cert_ids,
        network,
        rng,
    )
    va = VerificationApp(material.election_keys.public_key, network)
    for name, component in (
        (CLIENT, client), (VA, va), (VFS, vfs), (LS, log_server), (VSS, vss), (VCS, vcs),
    ):
        network.register(name, component)
    for a, b in ((CLIENT, VFS), (VA, VFS), (VFS, VSS), (VFS, LS), (VSS, LS), (VSS, VCS)):
        network.connect(a, b)
    for a, b in sc.extra_edges:
        network.connect(a, b)

    timeline: dict[str, list[VoteEvent]] = {}
    paper_event_index: dict[int, EventOutcome] = {}
    accepted_cast_hashes: dict[str, list[str]] = {}
    last_accepted_candidate: dict[str, int] = {}
    malicious_armed: set[str] = set()
    attack_hashes: dict[int, set[str]] = {}  # attack index -> hashes it touched

    for time, _, seq, kind, attack_index, item in _merge_queue(sc):
        if kind == "attack":
            outcome, touched = _activate_attack(item, cfg, vss, logs, rng, material)
            if item.kind == ATTACK_MALICIOUS_CLIENT:
                malicious_armed.add(item.voter_id)
            attack_hashes[attack_index] = touched
            report.event_outcomes.append(
                EventOutcome(time, seq, f"attack:{item.kind}:{item.voter_id}", outcome)
            )
            continue
        ev = item
        if ev.kind == EVENT_CAST:
            result = client.cast(
                ev.voter_id,
                ev.candidate_id,
                now=ev.time,
                pin1_ok=ev.pin1_ok,
                pin2_ok=ev.pin2_ok,
                malicious=ev.voter_id in malicious_armed,
            )
            if result.accepted:
                timeline.setdefault(ev.voter_id, []).append(
                    VoteEvent(ev.voter_id, CHANNEL_INTERNET, ev.candidate_id, ev.time)
                )
                accepted_cast_hashes.setdefault(ev.voter_id, []).append(
                    ballot_hash(result.ballot.ciphertext)
                )
                last_accepted_candidate[ev.voter_id] = ev.candidate_id
            report.event_outcomes.append(
                EventOutcome(
                    ev.time, seq,
                    f"cast:{ev.voter_id}:candidate={ev.candidate_id}", result.status,
                )
            )
        elif ev.kind == EVENT_VERIFY:
            outcome = _run_verification(
                client, va, ev, last_accepted_candidate, report
            )
            report.event_outcomes.append(
                EventOutcome(ev.time, seq, f"verify:{ev.voter_id}", outcome)
            )
        else:
            vote = VoteEvent(
                ev.voter_id, ev.kind, ev.candidate_id, ev.time,
                admitted_in_error=ev.admitted,
            )
            timeline.setdefault(ev.voter_id, []).append(vote)
            placeholder = EventOutcome(
                ev.time, seq, f"{ev.kind}:{ev.voter_id}:candidate={ev.candidate_id}",
                "recorded",
            )
            paper_event_index[id(vote)] = placeholder
            report.event_outcomes.append(placeholder)

    # Close of period: compare lists, cancel, export, count, allocate, audit.
    now = sc.period_end
    resolution = resolve_effective_votes(timeline)
    for vote, reason in resolution.rejected:
        outcome = paper_event_index.get(id(vote))
        if outcome is not None:
            outcome.outcome = reason
        report.rejected_paper_events.append(
            (vote.voter_id, vote.timestamp, vote.channel, reason)
        )
    for voter_id, reason in sorted(resolution.cancellations):
        result = vss.on_cancel(voter_id, reason, now)
        report.cancellations.append((voter_id, reason, result.cancelled, result.ballot_hash))

    export = vss.on_export(now)
    report.export = export
    try:
        vca = VoteCountingApp(cfg, logs)
        presented = [material.shares[i - 1] for i in sorted(sc.present_shares)]
        report.evote_tallies = vca.count(export, presented, now)
    except InsufficientSharesError as exc:
        report.count_error = f"insufficient_shares: {exc}"

    report.paper_tallies = _paper_tallies(cfg, resolution)
    if report.evote_tallies is not None:
        report.combined_tallies = _combined_tallies(
            cfg, report.evote_tallies, report.paper_tallies
        )
        report.allocation = allocate(cfg, report.combined_tallies)
        report.audit = check_consistency(logs)
    report.verdicts = _attack_verdicts(sc, report, accepted_cast_hashes, attack_hashes)
    report.verify_state_rows = _verify_state_rows(cfg, material, vss)
    report.qr_payloads = {
        voter_id: client.qr_payload(voter_id).serialize()
        for voter_id in sorted(client.tickets)
    }

    if out_dir is not None:
        write_outputs(report, cfg, Path(out_dir))
    return report


def _activate_attack(
    atk: AttackInjection,
    cfg: ElectionConfig,
    vss: VoteStorageServer,
    logs: AuditLogs,
    rng: DeterministicRng,
    material: CryptoMaterial,
) -> tuple[str, set[str]]:
    """Apply one tamper hook; returns (outcome, ballot hashes it touched)."""
    public_key = material.election_keys.public_key
    if atk.kind == ATTACK_MALICIOUS_CLIENT:
        # Takes effect at the voter's next cast: the client skips the
        # candidate-list check. Tracked via the armed set in run().
        return "armed", set()
    if atk.kind == ATTACK_DELETE_BALLOT:
        removed = vss.tamper_delete(atk.voter_id)
        if removed is None:
            return "no_stored_ballot", set()
        return f"deleted:{removed}", {removed}
    if atk.kind == ATTACK_DELETE_BALLOT_AND_LOG:
        removed = vss.tamper_delete(atk.voter_id)
        if removed is None:
            return "no_stored_ballot", set()
        logs.tamper_remove(1, removed)
        return f"deleted_with_log:{removed}", {removed}
    if atk.kind == ATTACK_SUBSTITUTE_ON_VERIFY:
        district = cfg.voter(atk.voter_id).district_id
        candidates = cfg.candidates_in_district(district)
        if not candidates:
            return "no_candidates", set()
        fake = crypto.encrypt_ballot(
            public_key,
            candidates[0].candidate_id,
            BallotRandomness(rng.bytes(crypto.RANDOMNESS_LEN)),
        )
        vss.tamper_substitute_on_verify(atk.voter_id, fake)
        return "substitution_armed", set()
    if atk.kind == ATTACK_LOG_REWRITE:
        district = cfg.voter(atk.voter_id).district_id
        candidates = cfg.candidates_in_district(district)
        if not candidates:
            return "no_candidates", set()
        replacement = crypto.encrypt_ballot(
            public_key,
            candidates[-1].candidate_id,
            BallotRandomness(rng.bytes(crypto.RANDOMNESS_LEN)),
        )
        swapped = vss.tamper_replace_stored(atk.voter_id, replacement)
        if swapped is None:
            return "no_stored_ballot", set()
        old_hash, new_hash = swapped
        logs.tamper_replace_hash(1, old_hash, new_hash)
        return f"rewrote:{old_hash[:12]}->{new_hash[:12]}", {old_hash, new_hash}
    raise ValueError(f"unknown attack kind {atk.kind!r}")


def _run_verification(client, va, ev, last_accepted_candidate, report) -> str:
    payload = client.qr_payload(ev.voter_id)
    expected = last_accepted_candidate.get(ev.voter_id)
    if payload is None:
        report.verifications.append(
            VerificationOutcome(ev.voter_id, ev.time, "no_session", None, expected)
        )
        return "no_session"
    try:
        candidate = va.verify(payload, now=ev.time)
    except IntegrityAlarmError:
        report.integrity_alarms.append((ev.voter_id, ev.time))
        report.verifications.append(
            VerificationOutcome(ev.voter_id, ev.time, "integrity_alarm", None, expected)
        )
        return "integrity_alarm"
    except VerificationError as exc:
        kind = {
            "UnknownSessionError": "unknown_session",
            "VoteAbsentError": "vote_absent",
            "WindowExpiredError": "window_expired",
            "AttemptsExhaustedError": "attempts_exhausted",
        }[type(exc).__name__]
        report.verifications.append(
            VerificationOutcome(ev.voter_id, ev.time, kind, None, expected)
        )
        return kind
    report.verifications.append(
        VerificationOutcome(
            ev.voter_id, ev.time, "verified", candidate.candidate_id, expected
        )
    )
    return f"verified:{candidate.candidate_id}"


def _paper_tallies(cfg: ElectionConfig, resolution) -> dict:
    tallies: dict[int, dict[int, int]] = {}
    for voter_id in sorted(resolution.effective):
        vote = resolution.effective[voter_id]
        if vote is None or vote.channel == CHANNEL_INTERNET:
            continue
        district = cfg.candidate(vote.candidate_id).district_id
        d = tallies.setdefault(district, {})
        d[vote.candidate_id] = d.get(vote.candidate_id, 0) + 1
    return tallies


def _combined_tallies(cfg: ElectionConfig, evote: ConstituencyTallies, paper: dict) -> dict:
    combined: dict[int, dict[int, int]] = {
        d.district_id: {c.candidate_id: 0 for c in cfg.candidates_in_district(d.district_id)}
        for d in cfg.districts
    }
    for source in (evote.by_district, paper):
        for district_id, tallies in source.items():
            for candidate_id, votes in tallies.items():
                combined[district_id][candidate_id] = (
                    combined[district_id].get(candidate_id, 0) + votes
                )
    return combined


def _attack_verdicts(
    sc: Scenario, report: RunReport, accepted_hashes: dict, attack_hashes: dict
) -> list:
    log4_hashes = {e.ballot_hash for e in report.logs.log4}
    alarmed_voters = {voter for voter, _ in report.integrity_alarms}
    named_in_audit = (
        {d.ballot_hash for d in report.audit.discrepancies} if report.audit else set()
    )
    verdicts = []
    for i, atk in enumerate(sc.attacks):
        if atk.kind == ATTACK_MALICIOUS_CLIENT:
            mine = set(accepted_hashes.get(atk.voter_id, ()))
            verdict = VERDICT_DETECTED if mine & log4_hashes else VERDICT_UNDETECTED
        elif atk.kind == ATTACK_SUBSTITUTE_ON_VERIFY:
            verdict = (
                VERDICT_BY_VERIFICATION
                if atk.voter_id in alarmed_voters
                else VERDICT_UNDETECTED
            )
        else:
            # Storage/log tampering is detected exactly when the audit
            # discrepancies name a hash this attack touched.
            touched = attack_hashes.get(i, set())
            verdict = (
                VERDICT_DETECTED if touched & named_in_audit else VERDICT_UNDETECTED
            )
        verdicts.append(AttackVerdict(atk, verdict))
    return verdicts


def _verify_state_rows(cfg, material, vss) -> list[str]:
    """Everything the standalone verify command needs to replay a session."""
    rows = [f"pubkey\t{material.election_keys.public_key.hex()}"]
    for district in sorted(d.district_id for d in cfg.districts):
        for c in cfg.candidates_in_district(district):
            rows.append(f"candidate\t{c.candidate_id}\t{district}\t{c.name}")
    for code in sorted(vss.sessions):
        session = vss.sessions[code]
        stored = vss.stored.get(session.voter_id)
        if stored is not None and stored.ballot_hash == session.ballot_hash:
            status, ct_hex = "stored", stored.ballot.ciphertext.hex()
        else:
            status, ct_hex = "absent", ""
        district = cfg.voter(session.voter_id).district_id
        rows.append(
            f"session\t{code}\t{session.voter_id}\t{district}\t{session.issue_time}"
            f"\t{session.attempts}\t{status}\t{ct_hex}"
        )
    return rows


def _tallies_tsv(cfg: ElectionConfig, report: RunReport) -> str:
    lines = ["# district\tcandidate_id\tcandidate\tevotes\tpaper\ttotal"]
    evote = report.evote_tallies.by_district if report.evote_tallies else {}
    for d in sorted(x.district_id for x in cfg.districts):
        for c in cfg.candidates_in_district(d):
            ev = evote.get(d, {}).get(c.candidate_id, 0)
            pv = report.paper_tallies.get(d, {}).get(c.candidate_id, 0)
            lines.append(f"{d}\t{c.candidate_id}\t{c.name}\t{ev}\t{pv}\t{ev + pv}")
    return "\n".join(lines) + "\n"


def write_outputs(report: RunReport, cfg: ElectionConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for log_id in (1, 2, 3, 4, 5):
        (out_dir / f"log{log_id}.tsv").write_text(
            report.logs.serialize(log_id), encoding="utf-8"
        )
    if report.audit is None:
        audit_text = f"SKIPPED\t{report.count_error or 'counting incomplete'}\n"
    else:
        audit_text = report.audit.render()
    (out_dir / "audit_report.txt").write_text(audit_text, encoding="utf-8")
    (out_dir / "tallies.tsv").write_text(_tallies_tsv(cfg, report), encoding="utf-8")
    if report.allocation is not None:
        alloc_text = render_allocation(report.allocation, cfg)
    else:
        alloc_text = "# allocation skipped: counting incomplete\n"
    (out_dir / "allocation.tsv").write_text(alloc_text, encoding="utf-8")
    (out_dir / "run_report.txt").write_text(report.render(), encoding="utf-8")
    (out_dir / "verify_state.tsv").write_text(
        "\n".join(report.verify_state_rows) + "\n", encoding="utf-8"
    )
    (out_dir / "qr_payloads.tsv").write_text(
        "".join(f"{v}\t{p}\n" for v, p in sorted(report.qr_payloads.items())),
        encoding="utf-8",
    )


def default_out_dir() -> Path | None:
    value = os.environ.get(OUT_DIR_ENV)
    return Path(value) if value else None
