import pytest

from ivotesim.electoral import (
    Candidate,
    District,
    IneligibleVoterError,
    Party,
    Voter,
    district_candidate_list,
    make_config,
    riigikogu_2011_config,
    validate_config,
)


def test_2011_riigikogu_config_valid_with_101_seats():
    cfg = riigikogu_2011_config()
    assert validate_config(cfg) == []
    assert cfg.total_seats() == 101
    assert [d.seats for d in cfg.districts] == [9, 11, 8, 14, 6, 5, 8, 8, 7, 8, 9, 8]


def test_candidate_in_nonexistent_district_is_one_violation():
    cfg = make_config(
        "riigikogu",
        [District(1, "D1", 3)],
        [],
        [Candidate(10, "ghost", None, 99)],
        [],
    )
    violations = validate_config(cfg)
    assert len(violations) == 1
    assert "nonexistent district 99" in violations[0]


def test_ep_with_two_districts_is_rejected():
    cfg = make_config(
        "european_parliament",
        [District(1, "A", 6), District(2, "B", 6)],
        [], [], [],
    )
    assert any("single national district" in v for v in validate_config(cfg))


def test_ep_national_district_must_have_six_seats():
    cfg = make_config("european_parliament", [District(1, "National", 5)], [], [], [])
    assert any("6 seats" in v for v in validate_config(cfg))


def test_validate_reports_every_violation_at_once():
    cfg = make_config(
        "riigikogu",
        [District(1, "D1", 0), District(1, "D1-dup", 2)],
        [Party(5, "P", (77,))],
        [],
        [Voter("V1", 9)],
    )
    violations = validate_config(cfg)
    assert len(violations) >= 4  # zero seats, dup district, ghost listed, bad voter


def test_validate_is_idempotent():
    cfg = riigikogu_2011_config()
    assert validate_config(cfg) == validate_config(cfg) == []


def test_validate_is_order_independent():
    base = _three_candidate_config()
    shuffled = make_config(
        "riigikogu",
        tuple(reversed(base.districts)),
        base.parties,
        tuple(reversed(base.candidates)),
        tuple(reversed(base.voters)),
    )
    assert validate_config(shuffled) == validate_config(base)


def _three_candidate_config():
    return make_config(
        "riigikogu",
        [District(10, "Ten", 2), District(11, "Eleven", 2)],
        [Party(1, "P1", ())],
        [
            Candidate(103, "c", 1, 10),
            Candidate(101, "a", 1, 10),
            Candidate(102, "b", None, 10),
            Candidate(201, "other", 1, 11),
        ],
        [Voter("V1", 10), Voter("V2", 11)],
    )


def test_district_candidate_list_filters_and_orders_by_id():
    cfg = _three_candidate_config()
    listed = district_candidate_list(cfg, "V1")
    assert [c.candidate_id for c in listed] == [101, 102, 103]
    assert all(c.district_id == 10 for c in listed)


def test_district_with_no_candidates_yields_empty_list():
    cfg = make_config(
        "riigikogu",
        [District(1, "D1", 2)],
        [], [],
        [Voter("V1", 1)],
    )
    assert district_candidate_list(cfg, "V1") == ()


def test_unknown_voter_is_ineligible():
    cfg = _three_candidate_config()
    with pytest.raises(IneligibleVoterError):
        district_candidate_list(cfg, "nobody")


def test_ep_independents_become_singleton_lists():
    cfg = make_config(
        "european_parliament",
        [District(1, "National", 6)],
        [Party(1, "P1", (101,))],
        [Candidate(101, "listed", 1, 1), Candidate(102, "lone", None, 1)],
        [],
    )
    synthetic = [p for p in cfg.parties if p.synthetic]
    assert len(synthetic) == 1
    assert synthetic[0].national_ordered_list == (102,)
    assert cfg.candidate(102).party_id == synthetic[0].party_id
    assert validate_config(cfg) == []
