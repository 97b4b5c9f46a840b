from itertools import combinations

import pytest

from ivotesim import crypto
from ivotesim.crypto import (
    BallotRandomness,
    DecryptionError,
    DuplicateShareError,
    EncodingError,
    InsufficientSharesError,
    VoterCertificate,
)
from ivotesim.rng import DeterministicRng


@pytest.fixture
def rng():
    return DeterministicRng(20240901)


@pytest.fixture
def keys(rng):
    return crypto.generate_election_keypair(rng)


def fresh_r(rng) -> BallotRandomness:
    return BallotRandomness(rng.bytes(32))


def test_encrypt_is_deterministic(keys, rng):
    r = fresh_r(rng)
    assert crypto.encrypt_ballot(keys.public_key, 42, r) == crypto.encrypt_ballot(
        keys.public_key, 42, r
    )


def test_distinct_candidates_same_randomness_differ(keys, rng):
    r = fresh_r(rng)
    c1 = crypto.encrypt_ballot(keys.public_key, 1, r)
    c2 = crypto.encrypt_ballot(keys.public_key, 2, r)
    assert c1 != c2


def test_roundtrip_over_100_random_draws(keys, rng):
    # Oracle: decryption of a fresh encryption must return the input, for
    # 100 seeded (candidate, randomness) draws.
    for _ in range(100):
        candidate = rng.randint(1, 10**9)
        r = fresh_r(rng)
        ct = crypto.encrypt_ballot(keys.public_key, candidate, r)
        assert crypto.decrypt_ballot(keys.private_key, ct) == candidate


def test_oversized_candidate_encoding_rejected(keys, rng):
    with pytest.raises(EncodingError):
        crypto.encrypt_ballot(keys.public_key, 10**16, fresh_r(rng))
    with pytest.raises(EncodingError):
        crypto.encrypt_ballot(keys.public_key, -1, fresh_r(rng))


def test_truncated_ciphertext_fails(keys, rng):
    ct = crypto.encrypt_ballot(keys.public_key, 7, fresh_r(rng))
    with pytest.raises(DecryptionError):
        crypto.decrypt_ballot(keys.private_key, ct[:-1])
    with pytest.raises(DecryptionError):
        crypto.decrypt_ballot(keys.private_key, b"\x02" + ct[1:])


def test_wrong_keypair_fails_decryption(keys, rng):
    other = crypto.generate_election_keypair(DeterministicRng(999))
    ct = crypto.encrypt_ballot(keys.public_key, 7, fresh_r(rng))
    with pytest.raises(DecryptionError):
        crypto.decrypt_ballot(other.private_key, ct)


def test_ciphertext_carries_version_prefix(keys, rng):
    ct = crypto.encrypt_ballot(keys.public_key, 7, fresh_r(rng))
    assert ct[:1] == b"\x01"
    assert len(ct) == crypto.CIPHERTEXT_LEN


def _cert(keypair, voter="V1", start=0, end=1000, revoked=False):
    return VoterCertificate(
        cert_id=f"{voter}-sign",
        voter_id=voter,
        public_key=keypair.public_key,
        valid_from=start,
        valid_until=end,
        revoked=revoked,
    )


def test_sign_verify_roundtrip(rng):
    keypair = crypto.generate_signing_keypair(rng)
    cert = _cert(keypair)
    message = b"the encrypted ballot bytes"
    signature = crypto.sign(keypair.private_key, message)
    assert signature[:1] == b"\x01"
    assert crypto.verify(cert, message, signature)


def test_flipped_bit_fails_verification(rng):
    keypair = crypto.generate_signing_keypair(rng)
    cert = _cert(keypair)
    message = bytearray(b"the encrypted ballot bytes")
    signature = crypto.sign(keypair.private_key, bytes(message))
    message[0] ^= 1
    assert not crypto.verify(cert, bytes(message), signature)


def test_other_voters_certificate_fails_verification(rng):
    alice = crypto.generate_signing_keypair(rng)
    bob = crypto.generate_signing_keypair(rng)
    message = b"ballot"
    signature = crypto.sign(alice.private_key, message)
    assert crypto.verify(_cert(alice, "alice"), message, signature)
    assert not crypto.verify(_cert(bob, "bob"), message, signature)


class TestValidityConfirmation:
    def setup_method(self):
        rng = DeterministicRng(5)
        self.voter_keys = crypto.generate_signing_keypair(rng)
        self.vcs = crypto.VcsState(crypto.generate_signing_keypair(rng))

    def test_valid_cert_mid_window_gets_signed_confirmation(self):
        cert = _cert(self.voter_keys, start=0, end=1000)
        result = crypto.confirm_validity(self.vcs, cert, at_time=500)
        assert isinstance(result, crypto.ValidityConfirmation)
        assert result.verifies_under(self.vcs.keypair.public_key)

    def test_confirmation_does_not_verify_under_other_key(self):
        cert = _cert(self.voter_keys)
        result = crypto.confirm_validity(self.vcs, cert, at_time=500)
        other = crypto.generate_signing_keypair(DeterministicRng(6))
        assert not result.verifies_under(other.public_key)

    def test_revoked_cert_rejected(self):
        cert = _cert(self.voter_keys, revoked=True)
        result = crypto.confirm_validity(self.vcs, cert, at_time=500)
        assert isinstance(result, crypto.ValidityRejection)
        assert result.reason == crypto.REJECT_REVOKED

    def test_revocation_time_is_respected(self):
        cert = _cert(self.voter_keys)
        self.vcs.revoke(cert.cert_id, at_time=300)
        ok = crypto.confirm_validity(self.vcs, cert, at_time=299)
        assert isinstance(ok, crypto.ValidityConfirmation)
        rejected = crypto.confirm_validity(self.vcs, cert, at_time=300)
        assert isinstance(rejected, crypto.ValidityRejection)
        assert rejected.reason == crypto.REJECT_REVOKED

    def test_window_is_start_inclusive_end_exclusive(self):
        cert = _cert(self.voter_keys, start=100, end=1000)
        assert isinstance(
            crypto.confirm_validity(self.vcs, cert, 100), crypto.ValidityConfirmation
        )
        at_end = crypto.confirm_validity(self.vcs, cert, 1000)
        assert isinstance(at_end, crypto.ValidityRejection)
        assert at_end.reason == crypto.REJECT_EXPIRED
        past = crypto.confirm_validity(self.vcs, cert, 1001)
        assert isinstance(past, crypto.ValidityRejection)


class TestThresholdShares:
    def test_any_3_of_5_reconstruct(self):
        rng = DeterministicRng(7)
        key = rng.bytes(32)
        shares = crypto.split_key(key, 5, 3, rng)
        assert crypto.combine_shares([shares[0], shares[2], shares[4]]) == key

    def test_2_of_3_required_shares_insufficient(self):
        rng = DeterministicRng(8)
        key = rng.bytes(32)
        shares = crypto.split_key(key, 5, 3, rng)
        with pytest.raises(InsufficientSharesError):
            crypto.combine_shares(shares[:2])

    def test_duplicate_share_index_rejected(self):
        rng = DeterministicRng(9)
        shares = crypto.split_key(rng.bytes(32), 4, 2, rng)
        with pytest.raises(DuplicateShareError):
            crypto.combine_shares([shares[0], shares[0]])

    def test_all_subsets_n4_k2_reconstruct_identically(self):
        # Exhaustive subset oracle: every >= k subset agrees, every < k fails.
        rng = DeterministicRng(10)
        key = rng.bytes(32)
        shares = crypto.split_key(key, 4, 2, rng)
        for size in (2, 3, 4):
            for subset in combinations(shares, size):
                assert crypto.combine_shares(subset) == key
        for subset in combinations(shares, 1):
            with pytest.raises(InsufficientSharesError):
                crypto.combine_shares(subset)

    def test_exhaustive_thresholds_up_to_n5(self):
        rng = DeterministicRng(11)
        for n in range(1, 6):
            for k in range(1, n + 1):
                key = rng.bytes(32)
                shares = crypto.split_key(key, n, k, rng)
                for size in range(1, n + 1):
                    for subset in combinations(shares, size):
                        if size >= k:
                            assert crypto.combine_shares(subset) == key
                        else:
                            with pytest.raises(InsufficientSharesError):
                                crypto.combine_shares(subset)

    def test_invalid_threshold_params(self):
        rng = DeterministicRng(12)
        with pytest.raises(ValueError):
            crypto.split_key(rng.bytes(32), 3, 4, rng)
        with pytest.raises(ValueError):
            crypto.split_key(rng.bytes(32), 3, 0, rng)
