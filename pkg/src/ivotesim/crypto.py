"""Simulation-fidelity cryptographic primitives.

Ballot encryption is a hybrid construction over X25519: the ephemeral key is
derived by hashing the ballot randomness, so identical (public key, candidate,
randomness) inputs always produce the identical ciphertext. That determinism
is what lets the verification application re-encrypt every candidate on the
district list and compare bytes. Signatures are Ed25519. Threshold key
custody is plain polynomial secret sharing over a prime field.

None of this aims at production hardness; the contracts are determinism,
roundtrip correctness, signature binding at simulation fidelity, and the
exhaustively checkable k-of-n reconstruction property.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .rng import DeterministicRng

VERSION_BYTE = b"\x01"

# Fixed-width decimal encoding of the candidate id; a fixed message length
# keeps ciphertext length from leaking the choice.
MESSAGE_LEN = 16
RANDOMNESS_LEN = 32
CIPHERTEXT_LEN = 1 + 32 + MESSAGE_LEN + 16  # version | eph pub | masked | tag

# Prime just above 2^256, so any 32-byte secret fits in the field.
_SHAMIR_PRIME = 2**256 + 297


class EncodingError(ValueError):
    """Candidate id does not fit the fixed message width."""


class DecryptionError(ValueError):
    """Ciphertext malformed, truncated, or not produced under this key."""


class InsufficientSharesError(ValueError):
    """Fewer shares presented than the reconstruction threshold."""


class DuplicateShareError(ValueError):
    """Two presented shares carry the same index."""


def ballot_hash(ciphertext: bytes) -> str:
    """256-bit hash of a ciphertext, hex-encoded; the join key across logs."""
    return hashlib.sha256(ciphertext).hexdigest()


@dataclass(frozen=True)
class ElectionKeyPair:
    public_key: bytes  # raw X25519, 32 bytes
    private_key: bytes  # raw X25519, 32 bytes


@dataclass(frozen=True)
class SigningKeyPair:
    public_key: bytes  # raw Ed25519, 32 bytes
    private_key: bytes  # raw Ed25519 seed, 32 bytes


@dataclass(frozen=True)
class BallotRandomness:
    value: bytes

    def __post_init__(self):
        if len(self.value) != RANDOMNESS_LEN:
            raise ValueError(f"ballot randomness must be {RANDOMNESS_LEN} bytes")


def generate_election_keypair(rng: DeterministicRng) -> ElectionKeyPair:
    private = rng.bytes(32)
    public = (
        X25519PrivateKey.from_private_bytes(private)
        .public_key()
        .public_bytes(Encoding.Raw, PublicFormat.Raw)
    )
    return ElectionKeyPair(public_key=public, private_key=private)


def generate_signing_keypair(rng: DeterministicRng) -> SigningKeyPair:
    private = rng.bytes(32)
    public = (
        Ed25519PrivateKey.from_private_bytes(private)
        .public_key()
        .public_bytes(Encoding.Raw, PublicFormat.Raw)
    )
    return SigningKeyPair(public_key=public, private_key=private)


def encode_candidate(candidate_id: int) -> bytes:
    text = str(candidate_id)
    if candidate_id < 0 or len(text) > MESSAGE_LEN:
        raise EncodingError(f"candidate id {candidate_id} exceeds {MESSAGE_LEN} digits")
    return text.zfill(MESSAGE_LEN).encode("ascii")


def _mask_and_tag(shared: bytes, public_key: bytes, padded: bytes) -> tuple[bytes, bytes]:
    mask = hashlib.sha256(b"ivotesim.mask:" + shared + public_key).digest()[:MESSAGE_LEN]
    masked = bytes(a ^ b for a, b in zip(padded, mask))
    tag = hashlib.sha256(b"ivotesim.tag:" + shared + padded).digest()[:16]
    return masked, tag


def encrypt_ballot(public_key: bytes, candidate_id: int, r: BallotRandomness) -> bytes:
    """Deterministic encryption of a candidate choice under the election key.

    The ephemeral X25519 scalar is derived from r alone, so the ciphertext is
    a pure function of (public_key, candidate_id, r).
    """
    padded = encode_candidate(candidate_id)
    eph_private = hashlib.sha256(b"ivotesim.eph:" + r.value).digest()
    eph = X25519PrivateKey.from_private_bytes(eph_private)
    eph_public = eph.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    shared = eph.exchange(X25519PublicKey.from_public_bytes(public_key))
    masked, tag = _mask_and_tag(shared, public_key, padded)
    return VERSION_BYTE + eph_public + masked + tag


def decrypt_ballot(private_key: bytes, ciphertext: bytes) -> int:
    """Invert encrypt_ballot; raises DecryptionError on any mismatch."""
    if len(ciphertext) != CIPHERTEXT_LEN:
        raise DecryptionError(f"ciphertext length {len(ciphertext)} != {CIPHERTEXT_LEN}")
    if ciphertext[:1] != VERSION_BYTE:
        raise DecryptionError("unknown ciphertext version")
    eph_public = ciphertext[1 : 1 + 32]
    masked = ciphertext[1 + 32 : 1 + 32 + MESSAGE_LEN]
    tag = ciphertext[1 + 32 + MESSAGE_LEN :]
    sk = X25519PrivateKey.from_private_bytes(private_key)
    public_key = sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    try:
        shared = sk.exchange(X25519PublicKey.from_public_bytes(eph_public))
    except ValueError as exc:
        raise DecryptionError(str(exc)) from exc
    mask = hashlib.sha256(b"ivotesim.mask:" + shared + public_key).digest()[:MESSAGE_LEN]
    padded = bytes(a ^ b for a, b in zip(masked, mask))
    expect_tag = hashlib.sha256(b"ivotesim.tag:" + shared + padded).digest()[:16]
    if expect_tag != tag:
        raise DecryptionError("integrity tag mismatch")
    return int(padded.decode("ascii"))


def sign(signing_private_key: bytes, message: bytes) -> bytes:
    raw = Ed25519PrivateKey.from_private_bytes(signing_private_key).sign(message)
    return VERSION_BYTE + raw


def verify(certificate: "VoterCertificate", message: bytes, signature: bytes) -> bool:
    return verify_with_key(certificate.public_key, message, signature)


def verify_with_key(public_key: bytes, message: bytes, signature: bytes) -> bool:
    if len(signature) != 65 or signature[:1] != VERSION_BYTE:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature[1:], message)
        return True
    except InvalidSignature:
        return False


# --- certificates and the validity confirmation service ---

@dataclass(frozen=True)
class VoterCertificate:
    cert_id: str
    voter_id: str
    public_key: bytes
    valid_from: int
    valid_until: int  # window is [valid_from, valid_until)
    revoked: bool = False


REJECT_REVOKED = "revoked"
REJECT_EXPIRED = "expired"


@dataclass(frozen=True)
class ValidityConfirmation:
    cert_id: str
    at_time: int
    payload: bytes
    signature: bytes

    def verifies_under(self, vcs_public_key: bytes) -> bool:
        return verify_with_key(vcs_public_key, self.payload, self.signature)


@dataclass(frozen=True)
class ValidityRejection:
    cert_id: str
    at_time: int
    reason: str  # REJECT_REVOKED | REJECT_EXPIRED


class VcsState:
    """Certificate registry plus time-stamped revocations."""

    def __init__(self, keypair: SigningKeyPair):
        self.keypair = keypair
        self._revoked_at: dict[str, int] = {}

    def revoke(self, cert_id: str, at_time: int) -> None:
        prev = self._revoked_at.get(cert_id)
        if prev is None or at_time < prev:
            self._revoked_at[cert_id] = at_time

    def is_revoked(self, certificate: VoterCertificate, at_time: int) -> bool:
        if certificate.revoked:
            return True
        revoked_at = self._revoked_at.get(certificate.cert_id)
        return revoked_at is not None and at_time >= revoked_at


def confirm_validity(
    vcs_state: VcsState, certificate: VoterCertificate, at_time: int
) -> ValidityConfirmation | ValidityRejection:
    """Signed confirmation iff the certificate is unrevoked and in-window."""
    if vcs_state.is_revoked(certificate, at_time):
        return ValidityRejection(certificate.cert_id, at_time, REJECT_REVOKED)
    if not (certificate.valid_from <= at_time < certificate.valid_until):
        return ValidityRejection(certificate.cert_id, at_time, REJECT_EXPIRED)
    payload = (
        VERSION_BYTE
        + certificate.cert_id.encode("utf-8")
        + b"|valid-at|"
        + str(at_time).encode("ascii")
    )
    signature = sign(vcs_state.keypair.private_key, payload)
    return ValidityConfirmation(certificate.cert_id, at_time, payload, signature)


# --- threshold key custody ---

@dataclass(frozen=True)
class KeyShare:
    share_index: int
    share_payload: bytes  # version | k | 33-byte field element


def split_key(private_key: bytes, n: int, k: int, rng: DeterministicRng) -> list[KeyShare]:
    """Split a 32-byte key into n shares, any k of which reconstruct it."""
    if not (1 <= k <= n):
        raise ValueError(f"threshold must satisfy 1 <= k <= n, got k={k} n={n}")
    if len(private_key) != 32:
        raise ValueError("private key must be 32 bytes")
    secret = int.from_bytes(private_key, "big")
    coeffs = [secret] + [
        int.from_bytes(rng.bytes(33), "big") % _SHAMIR_PRIME for _ in range(k - 1)
    ]
    shares = []
    for index in range(1, n + 1):
        y = 0
        for coeff in reversed(coeffs):
            y = (y * index + coeff) % _SHAMIR_PRIME
        payload = VERSION_BYTE + bytes([k]) + y.to_bytes(33, "big")
        shares.append(KeyShare(share_index=index, share_payload=payload))
    return shares


def combine_shares(shares) -> bytes:
    """Reconstruct the key from any k distinct shares of one split."""
    shares = list(shares)
    if not shares:
        raise InsufficientSharesError("no shares presented")
    seen: set[int] = set()
    k = None
    points = []
    for share in shares:
        if share.share_index in seen:
            raise DuplicateShareError(f"share index {share.share_index} presented twice")
        seen.add(share.share_index)
        payload = share.share_payload
        if len(payload) != 2 + 33 or payload[:1] != VERSION_BYTE:
            raise ValueError("malformed share payload")
        share_k = payload[1]
        if k is None:
            k = share_k
        elif k != share_k:
            raise ValueError("shares disagree on threshold")
        points.append((share.share_index, int.from_bytes(payload[2:], "big")))
    if len(points) < k:
        raise InsufficientSharesError(f"{len(points)} shares presented, {k} required")
    secret = 0
    for i, (xi, yi) in enumerate(points):
        num = den = 1
        for j, (xj, _) in enumerate(points):
            if i == j:
                continue
            num = (num * -xj) % _SHAMIR_PRIME
            den = (den * (xi - xj)) % _SHAMIR_PRIME
        secret = (secret + yi * num * pow(den, -1, _SHAMIR_PRIME)) % _SHAMIR_PRIME
    return secret.to_bytes(32, "big")
