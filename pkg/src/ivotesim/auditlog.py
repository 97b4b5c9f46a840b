"""The five append-only ballot-hash logs and their consistency checker.

LOG1 records every stored ballot (with voter id), LOG2 every revocation
(with voter id and reason), LOG3 the ballots exported for counting, LOG4 the
ballots rejected during counting, LOG5 the ballots counted. The checker
asserts, as multisets over ballot hash, LOG1 = LOG2 + LOG3 and
LOG3 = LOG4 + LOG5.

The logs are deliberately plain: no hash chains, no signatures. An intruder
who can rewrite them coherently defeats the checker, and exhibiting that
blind spot is part of what the simulator is for. The tamper_* methods exist
solely for attack injection.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

REASON_REVOTE = "revote"
REASON_POLLING_STATION = "polling_station"
REASON_ADVANCE_PAPER = "advance_paper"
LOG2_REASONS = (REASON_REVOTE, REASON_POLLING_STATION, REASON_ADVANCE_PAPER)

_HEX_DIGITS = set("0123456789abcdef")


class LogSchemaError(ValueError):
    """Entry fields do not match the target log's schema."""


@dataclass
class LogEntry:
    sequence: int
    timestamp: int
    ballot_hash: str
    voter_id: str | None = None
    reason: str | None = None

    def to_line(self) -> str:
        fields = [str(self.sequence), str(self.timestamp), self.ballot_hash]
        if self.voter_id is not None:
            fields.append(self.voter_id)
        if self.reason is not None:
            fields.append(self.reason)
        return "\t".join(fields)


@dataclass
class AuditLogs:
    log1: list[LogEntry] = field(default_factory=list)
    log2: list[LogEntry] = field(default_factory=list)
    log3: list[LogEntry] = field(default_factory=list)
    log4: list[LogEntry] = field(default_factory=list)
    log5: list[LogEntry] = field(default_factory=list)
    # Which component wrote each entry, keyed by log id; not serialized.
    # Lets tests assert the forwarding server never writes voting logs.
    sources: list[tuple[int, str]] = field(default_factory=list)

    def log(self, log_id: int) -> list[LogEntry]:
        return {1: self.log1, 2: self.log2, 3: self.log3, 4: self.log4, 5: self.log5}[log_id]

    def append(
        self,
        log_id: int,
        ballot_hash: str,
        timestamp: int,
        voter_id: str | None = None,
        reason: str | None = None,
        source: str = "",
    ) -> LogEntry:
        if log_id not in (1, 2, 3, 4, 5):
            raise LogSchemaError(f"unknown log id {log_id}")
        if len(ballot_hash) != 64 or not set(ballot_hash) <= _HEX_DIGITS:
            raise LogSchemaError("ballot_hash must be 64 lowercase hex chars")
        if log_id in (1, 2) and voter_id is None:
            raise LogSchemaError(f"LOG{log_id} entries require a voter_id")
        if log_id in (3, 4, 5) and voter_id is not None:
            raise LogSchemaError(f"LOG{log_id} entries are anonymized; voter_id forbidden")
        if log_id == 2:
            if reason not in LOG2_REASONS:
                raise LogSchemaError(f"LOG2 reason must be one of {LOG2_REASONS}")
        elif reason is not None:
            raise LogSchemaError(f"LOG{log_id} entries carry no reason")
        target = self.log(log_id)
        entry = LogEntry(
            sequence=len(target) + 1,
            timestamp=timestamp,
            ballot_hash=ballot_hash,
            voter_id=voter_id,
            reason=reason,
        )
        target.append(entry)
        self.sources.append((log_id, source))
        return entry

    # Attack hooks. A real intruder controlling a log server edits the files;
    # these model exactly that and bypass the append-only discipline.

    def tamper_remove(self, log_id: int, ballot_hash: str) -> bool:
        target = self.log(log_id)
        for i, entry in enumerate(target):
            if entry.ballot_hash == ballot_hash:
                del target[i]
                return True
        return False

    def tamper_replace_hash(self, log_id: int, old_hash: str, new_hash: str) -> bool:
        for entry in self.log(log_id):
            if entry.ballot_hash == old_hash:
                entry.ballot_hash = new_hash
                return True
        return False

    def serialize(self, log_id: int) -> str:
        return "".join(entry.to_line() + "\n" for entry in self.log(log_id))


@dataclass(frozen=True)
class Discrepancy:
    equation: str  # "LOG1=LOG2+LOG3" or "LOG3=LOG4+LOG5"
    ballot_hash: str
    kind: str  # "surplus_left" (extra on left side) | "deficit_left" (missing)
    count: int

    def to_line(self) -> str:
        return f"{self.equation}\t{self.kind}\t{self.ballot_hash}\tx{self.count}"


@dataclass(frozen=True)
class AuditReport:
    passed: bool
    discrepancies: tuple[Discrepancy, ...]

    def render(self) -> str:
        lines = ["PASS" if self.passed else "FAIL"]
        lines.extend(d.to_line() for d in self.discrepancies)
        return "\n".join(lines) + "\n"


def _hashes(entries) -> Counter:
    return Counter(e.ballot_hash for e in entries)


def _compare(equation: str, left: Counter, right: Counter) -> list[Discrepancy]:
    out = []
    for h in sorted(set(left) | set(right)):
        delta = left[h] - right[h]
        if delta > 0:
            out.append(Discrepancy(equation, h, "surplus_left", delta))
        elif delta < 0:
            out.append(Discrepancy(equation, h, "deficit_left", -delta))
    return out


def check_consistency(logs: AuditLogs) -> AuditReport:
    """Multiset equality checks over ballot hashes; order never matters."""
    discrepancies = _compare(
        "LOG1=LOG2+LOG3", _hashes(logs.log1), _hashes(logs.log2) + _hashes(logs.log3)
    )
    discrepancies += _compare(
        "LOG3=LOG4+LOG5", _hashes(logs.log3), _hashes(logs.log4) + _hashes(logs.log5)
    )
    return AuditReport(passed=not discrepancies, discrepancies=tuple(discrepancies))


def parse_log_file(log_id: int, text: str) -> list[LogEntry]:
    """Inverse of AuditLogs.serialize, for the standalone audit command."""
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        want = 4 if log_id == 1 else 5 if log_id == 2 else 3
        if len(fields) != want:
            raise LogSchemaError(
                f"log{log_id} line {lineno}: expected {want} fields, got {len(fields)}"
            )
        entry = LogEntry(
            sequence=int(fields[0]),
            timestamp=int(fields[1]),
            ballot_hash=fields[2],
            voter_id=fields[3] if log_id in (1, 2) else None,
            reason=fields[4] if log_id == 2 else None,
        )
        entries.append(entry)
    return entries
