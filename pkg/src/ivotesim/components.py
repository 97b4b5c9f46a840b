"""The seven pipeline components as state machines on a simulated network.

Voting client, verification application (VA), vote forwarding server (VFS),
log server (LS), vote storage server (VSS), validity confirmation server
(VCS), and vote counting application (VCA). Messages travel synchronously
over declared channels with deterministic delivery; the VCA has no channel
at all and receives its input as a physical-media value handoff.

The VFS is the only publicly reachable server and writes operational entries
to the LS but never touches the ballot logs; LOG1-LOG3 belong to the VSS and
LOG4/LOG5 to the VCA.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import crypto
from .auditlog import (
    REASON_ADVANCE_PAPER,
    REASON_POLLING_STATION,
    REASON_REVOTE,
    AuditLogs,
)
from .crypto import (
    BallotRandomness,
    DecryptionError,
    ValidityRejection,
    VoterCertificate,
    ballot_hash,
)
from .electoral import ElectionConfig, district_candidate_list
from .rng import DeterministicRng

VERIFICATION_WINDOW = 1800  # simulated seconds; [issue, issue + window)
VERIFICATION_ATTEMPTS = 3  # requests reaching the VSS per session

CANCEL_REASONS = (REASON_POLLING_STATION, REASON_ADVANCE_PAPER)


class ProtocolError(Exception):
    pass


class AirGapViolation(ProtocolError):
    """Attempt to give the counting application a network channel."""


class NoChannelError(ProtocolError):
    """Message sent between components with no declared channel."""


class SequencingError(ProtocolError):
    """Pipeline stage invoked before its precondition stage completed."""


class ClockViolation(ProtocolError):
    """A component observed a decreasing timestamp."""


class VerificationError(ProtocolError):
    pass


class UnknownSessionError(VerificationError):
    pass


class VoteAbsentError(VerificationError):
    """Session exists but its ballot was cancelled or superseded."""


class WindowExpiredError(VerificationError):
    pass


class AttemptsExhaustedError(VerificationError):
    pass


class IntegrityAlarmError(VerificationError):
    """No candidate re-encryption matched the returned ciphertext: the
    detection signal for a storage server substituting ciphertexts."""


# --- wire/value types ---

@dataclass(frozen=True)
class SignedEncryptedBallot:
    voter_id: str
    ciphertext: bytes
    signature: bytes
    certificate_id: str
    cast_time: int


@dataclass
class StoredBallotRecord:
    ballot: SignedEncryptedBallot
    ballot_hash: str
    vcs_confirmation: object


@dataclass(frozen=True)
class VerificationTicket:
    session_code: str
    r: BallotRandomness
    issue_time: int


@dataclass(frozen=True)
class QRPayload:
    session_code: str
    r: BallotRandomness

    def serialize(self) -> str:
        return f"session={self.session_code};r={self.r.value.hex()}"

    @classmethod
    def parse(cls, text: str) -> "QRPayload":
        try:
            session_part, r_part = text.strip().split(";")
            session = session_part.split("=", 1)[1]
            r_hex = r_part.split("=", 1)[1]
        except (ValueError, IndexError) as exc:
            raise ValueError(f"malformed QR payload {text!r}") from exc
        return cls(session, BallotRandomness(bytes.fromhex(r_hex)))


@dataclass(frozen=True)
class AnonymizedBallotExport:
    # district_id -> bare ciphertexts, ordered by ciphertext hash.
    groups: dict


@dataclass(frozen=True)
class CastReceipt:
    session_code: str
    issue_time: int


@dataclass(frozen=True)
class CastRejection:
    reason: str


@dataclass(frozen=True)
class CancelResult:
    cancelled: bool
    ballot_hash: str | None


# --- simulated network ---

CLIENT = "client"
VA = "VA"
VFS = "VFS"
LS = "LS"
VSS = "VSS"
VCS = "VCS"
VCA = "VCA"


class Network:
    """Synchronous request/response over declared channels, FIFO by
    construction (one event at a time). The VCA may never be wired in."""

    def __init__(self):
        self._components: dict[str, object] = {}
        self._edges: set[frozenset] = set()
        self.message_count = 0

    def register(self, name: str, component) -> None:
        if name == VCA:
            raise AirGapViolation("the counting application is air-gapped")
        self._components[name] = component

    def connect(self, a: str, b: str) -> None:
        if VCA in (a, b):
            raise AirGapViolation(f"cannot declare channel {a}-{b}: VCA is air-gapped")
        self._edges.add(frozenset((a, b)))

    def has_edge(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self._edges

    def request(self, src: str, dst: str, kind: str, **payload):
        if frozenset((src, dst)) not in self._edges:
            raise NoChannelError(f"no channel {src}-{dst}")
        self.message_count += 1
        handler = getattr(self._components[dst], "on_" + kind)
        return handler(**payload)


class _ClockGuard:
    def __init__(self):
        self._last = None

    def check(self, now: int) -> None:
        if self._last is not None and now < self._last:
            raise ClockViolation(f"time went backwards: {now} < {self._last}")
        self._last = now


# --- components ---

class LogServer:
    """Operational log sink for the VFS and VSS, distinct from LOG1-LOG5."""

    def __init__(self):
        self.entries: list[tuple[int, str, str, str]] = []

    def on_log(self, now: int, source: str, event: str, detail: str = ""):
        self.entries.append((now, source, event, detail))
        return True


class ValidityConfirmationServer:
    """External certificate-validity oracle; answers with signed confirmations."""

    def __init__(self, state: crypto.VcsState):
        self.state = state

    def on_confirm(self, certificate: VoterCertificate, at_time: int):
        return crypto.confirm_validity(self.state, certificate, at_time)


class VoteForwardingServer:
    """Authenticates voters, serves candidate lists, and relays everything
    between the client/VA and the storage server. Holds the voter and
    candidate registers; produces no voting-activity logs."""

    def __init__(self, cfg: ElectionConfig, network: Network):
        self.cfg = cfg
        self.network = network
        self._clock = _ClockGuard()

    def _ops_log(self, now: int, event: str) -> None:
        # Web/application log entries only: no voter ids, no ballot hashes.
        self.network.request(VFS, LS, "log", now=now, source=VFS, event=event)

    def on_authenticate(self, voter_id: str, now: int):
        self._clock.check(now)
        self._ops_log(now, "auth_request")
        if not self.cfg.has_voter(voter_id):
            return CastRejection("ineligible_voter")
        return True

    def on_candidate_list(self, voter_id: str, now: int):
        self._clock.check(now)
        self._ops_log(now, "candidate_list_request")
        return district_candidate_list(self.cfg, voter_id)

    def on_submit(self, ballot: SignedEncryptedBallot, now: int):
        self._clock.check(now)
        self._ops_log(now, "ballot_relay")
        return self.network.request(VFS, VSS, "store_ballot", ballot=ballot, now=now)

    def on_verify_fetch(self, session_code: str, now: int):
        self._clock.check(now)
        self._ops_log(now, "verify_relay")
        ciphertext, voter_id = self.network.request(
            VFS, VSS, "verify_fetch", session_code=session_code, now=now
        )
        candidates = district_candidate_list(self.cfg, voter_id)
        return ciphertext, candidates


@dataclass
class _SessionRecord:
    voter_id: str
    ballot_hash: str
    issue_time: int
    attempts: int = 0


class VoteStorageServer:
    """Stores signed encrypted ballots, handles revotes and cancellations,
    issues verification sessions, and writes LOG1-LOG3."""

    def __init__(
        self,
        cfg: ElectionConfig,
        certificates: dict[str, VoterCertificate],
        logs: AuditLogs,
        network: Network,
        rng: DeterministicRng,
        period_end: int,
    ):
        self.cfg = cfg
        self.certificates = certificates
        self.logs = logs
        self.network = network
        self.rng = rng
        self.period_end = period_end
        self.stored: dict[str, StoredBallotRecord] = {}
        self.sessions: dict[str, _SessionRecord] = {}
        self.participation_proof: list[tuple[str, bytes]] = []
        self.exported = False
        self._clock = _ClockGuard()
        # voter_id -> fabricated ciphertext served on verification fetches.
        self._substitute_on_verify: dict[str, bytes] = {}

    def _ops_log(self, now: int, event: str, detail: str = "") -> None:
        self.network.request(VSS, LS, "log", now=now, source=VSS, event=event, detail=detail)

    def on_store_ballot(self, ballot: SignedEncryptedBallot, now: int):
        self._clock.check(now)
        cert = self.certificates.get(ballot.certificate_id)
        if cert is None or not crypto.verify(cert, ballot.ciphertext, ballot.signature):
            self._ops_log(now, "ballot_rejected", "bad_signature")
            return CastRejection("bad_signature")
        confirmation = self.network.request(
            VSS, VCS, "confirm", certificate=cert, at_time=now
        )
        if isinstance(confirmation, ValidityRejection):
            self._ops_log(now, "ballot_rejected", f"certificate_{confirmation.reason}")
            return CastRejection(f"certificate_{confirmation.reason}")

        new_hash = ballot_hash(ballot.ciphertext)
        prior = self.stored.get(ballot.voter_id)
        self.stored[ballot.voter_id] = StoredBallotRecord(ballot, new_hash, confirmation)
        self.logs.append(1, new_hash, now, voter_id=ballot.voter_id, source=VSS)
        if prior is not None:
            self.logs.append(
                2, prior.ballot_hash, now,
                voter_id=ballot.voter_id, reason=REASON_REVOTE, source=VSS,
            )
        session_code = self.rng.bytes(16).hex()
        self.sessions[session_code] = _SessionRecord(ballot.voter_id, new_hash, now)
        self._ops_log(now, "ballot_stored", "revote" if prior else "first_vote")
        return CastReceipt(session_code=session_code, issue_time=now)

    def on_cancel(self, voter_id: str, reason: str, now: int) -> CancelResult:
        self._clock.check(now)
        if reason not in CANCEL_REASONS:
            raise ValueError(f"invalid cancellation reason {reason!r}")
        record = self.stored.pop(voter_id, None)
        if record is None:
            return CancelResult(False, None)
        self.logs.append(
            2, record.ballot_hash, now, voter_id=voter_id, reason=reason, source=VSS
        )
        self._ops_log(now, "ballot_cancelled", reason)
        return CancelResult(True, record.ballot_hash)

    def on_export(self, now: int) -> AnonymizedBallotExport:
        self._clock.check(now)
        if now < self.period_end:
            raise SequencingError(
                f"export at t={now} before voting period end t={self.period_end}"
            )
        groups: dict[int, list] = {}
        for voter_id in sorted(self.stored):
            record = self.stored[voter_id]
            district = self.cfg.voter(voter_id).district_id
            groups.setdefault(district, []).append(record)
            self.participation_proof.append((voter_id, record.ballot.signature))
        export: dict[int, tuple] = {}
        for district in sorted(groups):
            records = sorted(groups[district], key=lambda r: r.ballot_hash)
            for record in records:
                self.logs.append(3, record.ballot_hash, now, source=VSS)
            export[district] = tuple(r.ballot.ciphertext for r in records)
        self.exported = True
        self._ops_log(now, "export", f"{sum(len(v) for v in export.values())} ballots")
        return AnonymizedBallotExport(groups=export)

    def on_verify_fetch(self, session_code: str, now: int):
        self._clock.check(now)
        record = self.sessions.get(session_code)
        if record is None:
            raise UnknownSessionError(session_code)
        # Every request reaching this server consumes an attempt, whatever
        # its outcome; the window is checked only while attempts remain.
        record.attempts += 1
        if record.attempts > VERIFICATION_ATTEMPTS:
            raise AttemptsExhaustedError(
                f"session used {record.attempts} times, limit {VERIFICATION_ATTEMPTS}"
            )
        if now - record.issue_time >= VERIFICATION_WINDOW:
            raise WindowExpiredError(
                f"{now - record.issue_time}s since issue, window {VERIFICATION_WINDOW}s"
            )
        stored = self.stored.get(record.voter_id)
        if stored is None or stored.ballot_hash != record.ballot_hash:
            raise VoteAbsentError(session_code)
        substitute = self._substitute_on_verify.get(record.voter_id)
        if substitute is not None:
            return substitute, record.voter_id
        return stored.ballot.ciphertext, record.voter_id

    # Attack hooks: a compromised storage server acting outside the protocol.

    def tamper_delete(self, voter_id: str) -> str | None:
        record = self.stored.pop(voter_id, None)
        return record.ballot_hash if record else None

    def tamper_substitute_on_verify(self, voter_id: str, ciphertext: bytes) -> None:
        self._substitute_on_verify[voter_id] = ciphertext

    def tamper_replace_stored(self, voter_id: str, new_ciphertext: bytes):
        record = self.stored.get(voter_id)
        if record is None:
            return None
        old_hash = record.ballot_hash
        new_hash = ballot_hash(new_ciphertext)
        record.ballot = SignedEncryptedBallot(
            record.ballot.voter_id,
            new_ciphertext,
            record.ballot.signature,
            record.ballot.certificate_id,
            record.ballot.cast_time,
        )
        record.ballot_hash = new_hash
        for session in self.sessions.values():
            if session.voter_id == voter_id and session.ballot_hash == old_hash:
                session.ballot_hash = new_hash
        return old_hash, new_hash


@dataclass
class _CardState:
    pin1_failures: int = 0
    pin2_failures: int = 0
    locked: bool = False


@dataclass
class CastOutcome:
    status: str  # accepted | card_locked | auth_pin_failed | sign_pin_failed |
    #              candidate_not_in_list | ineligible_voter | rejected_<reason>
    ballot: SignedEncryptedBallot | None = None
    ticket: VerificationTicket | None = None

    @property
    def accepted(self) -> bool:
        return self.status == "accepted"


class VotingClient:
    """The voter-side application plus the simulated ID card.

    Three consecutive wrong entries of either PIN lock the card for the rest
    of the run. An honest client refuses candidates missing from the list the
    forwarding server returned; the malicious flag models a compromised
    client skipping that check.
    """

    def __init__(
        self,
        election_public_key: bytes,
        signing_keys: dict[str, bytes],
        cert_ids: dict[str, str],
        network: Network,
        rng: DeterministicRng,
    ):
        self.election_public_key = election_public_key
        self.signing_keys = signing_keys
        self.cert_ids = cert_ids
        self.network = network
        self.rng = rng
        self.cards: dict[str, _CardState] = {}
        self.tickets: dict[str, VerificationTicket] = {}

    def _card(self, voter_id: str) -> _CardState:
        return self.cards.setdefault(voter_id, _CardState())

    def cast(
        self,
        voter_id: str,
        candidate_id: int,
        now: int,
        pin1_ok: bool = True,
        pin2_ok: bool = True,
        malicious: bool = False,
    ) -> CastOutcome:
        card = self._card(voter_id)
        if card.locked:
            return CastOutcome("card_locked")
        if not pin1_ok:
            card.pin1_failures += 1
            if card.pin1_failures >= 3:
                card.locked = True
            return CastOutcome("auth_pin_failed")
        card.pin1_failures = 0

        auth = self.network.request(CLIENT, VFS, "authenticate", voter_id=voter_id, now=now)
        if isinstance(auth, CastRejection):
            return CastOutcome(auth.reason)
        candidates = self.network.request(
            CLIENT, VFS, "candidate_list", voter_id=voter_id, now=now
        )
        if not malicious and candidate_id not in [c.candidate_id for c in candidates]:
            return CastOutcome("candidate_not_in_list")

        r = BallotRandomness(self.rng.bytes(crypto.RANDOMNESS_LEN))
        ciphertext = crypto.encrypt_ballot(self.election_public_key, candidate_id, r)
        if not pin2_ok:
            card.pin2_failures += 1
            if card.pin2_failures >= 3:
                card.locked = True
            return CastOutcome("sign_pin_failed")
        card.pin2_failures = 0
        signature = crypto.sign(self.signing_keys[voter_id], ciphertext)
        ballot = SignedEncryptedBallot(
            voter_id, ciphertext, signature, self.cert_ids[voter_id], now
        )
        response = self.network.request(CLIENT, VFS, "submit", ballot=ballot, now=now)
        if isinstance(response, CastRejection):
            return CastOutcome(f"rejected_{response.reason}")
        ticket = VerificationTicket(response.session_code, r, response.issue_time)
        self.tickets[voter_id] = ticket
        return CastOutcome("accepted", ballot=ballot, ticket=ticket)

    def qr_payload(self, voter_id: str) -> QRPayload | None:
        ticket = self.tickets.get(voter_id)
        if ticket is None:
            return None
        return QRPayload(ticket.session_code, ticket.r)


class VerificationApp:
    """Second-device verifier: re-encrypts every candidate on the district
    list with the disclosed randomness and looks for a byte match."""

    def __init__(self, election_public_key: bytes, network: Network):
        self.election_public_key = election_public_key
        self.network = network

    def verify(self, payload: QRPayload, now: int):
        ciphertext, candidates = self.network.request(
            VA, VFS, "verify_fetch", session_code=payload.session_code, now=now
        )
        for candidate in candidates:
            attempt = crypto.encrypt_ballot(
                self.election_public_key, candidate.candidate_id, payload.r
            )
            if attempt == ciphertext:
                return candidate
        raise IntegrityAlarmError(
            "no candidate on the district list re-encrypts to the returned ciphertext"
        )


@dataclass
class ConstituencyTallies:
    # district_id -> candidate_id -> counted e-votes
    by_district: dict = field(default_factory=dict)

    def total(self) -> int:
        return sum(sum(t.values()) for t in self.by_district.values())

    def increment(self, district_id: int, candidate_id: int) -> None:
        d = self.by_district.setdefault(district_id, {})
        d[candidate_id] = d.get(candidate_id, 0) + 1


class VoteCountingApp:
    """Air-gapped tallier. Receives the anonymized export as a value handoff,
    reconstructs the election key from threshold shares, decrypts, checks
    candidate validity per constituency, and writes LOG4/LOG5."""

    def __init__(self, cfg: ElectionConfig, logs: AuditLogs):
        self.cfg = cfg
        self.logs = logs

    def count(self, export: AnonymizedBallotExport, shares, now: int) -> ConstituencyTallies:
        private_key = crypto.combine_shares(shares)  # raises before any log write
        tallies = ConstituencyTallies()
        for district_id in sorted(export.groups):
            for ciphertext in export.groups[district_id]:
                h = ballot_hash(ciphertext)
                try:
                    candidate_id = crypto.decrypt_ballot(private_key, ciphertext)
                except DecryptionError:
                    self.logs.append(4, h, now, source=VCA)
                    continue
                valid = (
                    self.cfg.has_candidate(candidate_id)
                    and self.cfg.candidate(candidate_id).district_id == district_id
                )
                if not valid:
                    self.logs.append(4, h, now, source=VCA)
                    continue
                tallies.increment(district_id, candidate_id)
                self.logs.append(5, h, now, source=VCA)
        return tallies
