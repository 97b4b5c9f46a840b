"""Command-line entry points.

    ivotesim run <scenario> [--out DIR] [--seed N]   full pipeline
    ivotesim allocate <tallies-file> --type TYPE     seat allocation only
    ivotesim audit <log-dir>                         consistency check only
    ivotesim verify <qr-payload> --state <run-dir>   replay a verification

Exit codes: 0 success/PASS, 1 audit FAIL or verification failure (including
integrity alarm), 2 usage or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import crypto
from .allocation import allocate, render_allocation
from .auditlog import AuditLogs, LogSchemaError, check_consistency, parse_log_file
from .components import (
    VERIFICATION_ATTEMPTS,
    VERIFICATION_WINDOW,
    QRPayload,
)
from .electoral import (
    EUROPEAN_PARLIAMENT,
    MUNICIPAL,
    RIIGIKOGU,
    Candidate,
    District,
    Party,
    Voter,
    make_config,
    validate_config,
)
from .scenario import ScenarioError, load_scenario
from .simulation import default_out_dir, run

TYPE_ALIASES = {
    "riigikogu": RIIGIKOGU,
    "ep": EUROPEAN_PARLIAMENT,
    "european_parliament": EUROPEAN_PARLIAMENT,
    "municipal": MUNICIPAL,
}


def _cmd_run(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        sc.seed = args.seed
    out_dir = Path(args.out) if args.out else default_out_dir()
    report = run(sc, out_dir=out_dir)
    if report.audit is None:
        print(f"audit: SKIPPED ({report.count_error})")
    else:
        print(f"audit: {'PASS' if report.audit.passed else 'FAIL'}")
    print(f"integrity alarms: {len(report.integrity_alarms)}")
    for verdict in report.verdicts:
        print(f"attack {verdict.attack.kind} on {verdict.attack.voter_id}: {verdict.verdict}")
    if out_dir is not None:
        print(f"outputs written to {out_dir}")
    if not report.audit_passed or report.had_integrity_alarm:
        return 1
    return 0


def _parse_tallies_file(path: Path, election_type: str):
    """Sections [districts], [parties], [candidates], [tallies]; optional
    [election] with threshold_percent."""
    districts, parties, candidates = [], [], []
    tallies: dict[int, int] = {}
    threshold_percent = 5
    section = None
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            continue
        fields = line.split("\t")
        where = f"{path}:{lineno}"
        try:
            if section == "election":
                if fields[0] == "threshold_percent":
                    threshold_percent = int(fields[1])
            elif section == "districts":
                districts.append(District(int(fields[0]), fields[1], int(fields[2])))
            elif section == "parties":
                national = ()
                if len(fields) > 2 and fields[2]:
                    national = tuple(int(x) for x in fields[2].split(","))
                parties.append(Party(int(fields[0]), fields[1], national))
            elif section == "candidates":
                party_id = None if fields[2] == "-" else int(fields[2])
                candidates.append(
                    Candidate(int(fields[0]), fields[1], party_id, int(fields[3]))
                )
            elif section == "tallies":
                tallies[int(fields[0])] = int(fields[1])
            else:
                raise ValueError(f"line outside a known section: {line!r}")
        except (ValueError, IndexError) as exc:
            raise ScenarioError(f"{where}: {exc}") from exc

    cfg = make_config(
        election_type, districts, parties, candidates, voters=(),
        threshold_fraction=Fraction(threshold_percent, 100),
    )
    violations = validate_config(cfg)
    if violations:
        raise ScenarioError(
            f"{path}: invalid configuration:\n" + "\n".join(f"  - {v}" for v in violations)
        )
    for cid in tallies:
        if not cfg.has_candidate(cid):
            raise ScenarioError(f"{path}: tally names unknown candidate {cid}")
    district_tallies: dict[int, dict[int, int]] = {
        d.district_id: {} for d in cfg.districts
    }
    for d in cfg.districts:
        for c in cfg.candidates_in_district(d.district_id):
            district_tallies[d.district_id][c.candidate_id] = tallies.get(c.candidate_id, 0)
    return cfg, district_tallies


def _cmd_allocate(args) -> int:
    election_type = TYPE_ALIASES[args.type]
    try:
        cfg, district_tallies = _parse_tallies_file(Path(args.tallies), election_type)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = allocate(cfg, district_tallies)
    sys.stdout.write(render_allocation(result, cfg))
    seats = {}
    for award in result.awards:
        name = "-" if award.party_id is None else cfg.party(award.party_id).name
        seats[name] = seats.get(name, 0) + 1
    summary = ",".join(f"{name}={count}" for name, count in sorted(seats.items()))
    print(f"# party seats: {summary}")
    return 0


def _cmd_audit(args) -> int:
    logs = AuditLogs()
    try:
        for log_id in (1, 2, 3, 4, 5):
            path = Path(args.log_dir) / f"log{log_id}.tsv"
            entries = parse_log_file(log_id, path.read_text(encoding="utf-8"))
            logs.log(log_id).extend(entries)
    except (OSError, LogSchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = check_consistency(logs)
    sys.stdout.write(report.render())
    return 0 if report.passed else 1


def _cmd_verify(args) -> int:
    try:
        payload = QRPayload.parse(args.payload)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    state_path = Path(args.state) / "verify_state.tsv"
    try:
        rows = state_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    public_key = None
    candidates_by_district: dict[int, list[tuple[int, str]]] = {}
    session = None
    for row in rows:
        if not row.strip() or row.startswith("#"):
            continue
        fields = row.split("\t")
        if fields[0] == "pubkey":
            public_key = bytes.fromhex(fields[1])
        elif fields[0] == "candidate":
            candidates_by_district.setdefault(int(fields[2]), []).append(
                (int(fields[1]), fields[3])
            )
        elif fields[0] == "session" and fields[1] == payload.session_code:
            session = fields
    if public_key is None:
        print("error: state file carries no public key", file=sys.stderr)
        return 2
    if session is None:
        print("verification failed: unknown session")
        return 1
    _, _, _voter, district, issue_time, attempts, status, ct_hex = session
    if int(attempts) >= VERIFICATION_ATTEMPTS:
        print("verification failed: attempts exhausted")
        return 1
    at = args.at if args.at is not None else int(issue_time)
    if at - int(issue_time) >= VERIFICATION_WINDOW:
        print("verification failed: window expired")
        return 1
    if status != "stored":
        print("verification failed: vote absent (cancelled or superseded)")
        return 1
    ciphertext = bytes.fromhex(ct_hex)
    for candidate_id, name in sorted(candidates_by_district.get(int(district), [])):
        if crypto.encrypt_ballot(public_key, candidate_id, payload.r) == ciphertext:
            print(f"verified: {name}")
            return 0
    print("INTEGRITY ALARM: no candidate matches the stored ciphertext")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ivotesim",
        description="Deterministic internet-voting pipeline simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario end to end")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_run.set_defaults(func=_cmd_run)

    p_alloc = sub.add_parser("allocate", help="seat allocation from a tallies file")
    p_alloc.add_argument("tallies")
    p_alloc.add_argument("--type", required=True, choices=sorted(TYPE_ALIASES))
    p_alloc.set_defaults(func=_cmd_allocate)

    p_audit = sub.add_parser("audit", help="run the log consistency checker")
    p_audit.add_argument("log_dir")
    p_audit.set_defaults(func=_cmd_audit)

    p_verify = sub.add_parser("verify", help="replay a vote verification")
    p_verify.add_argument("payload", help="QR payload text: session=<hex>;r=<hex>")
    p_verify.add_argument("--state", required=True, help="run output directory")
    p_verify.add_argument("--at", type=int, default=None, help="simulated time of the request")
    p_verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
