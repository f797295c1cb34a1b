"""Hashing, Ed25519 keys and node identities.

Every protocol hash is taken over an ASCII string, usually a concatenation
of lowercase hex fields. Keccak-256 here is the original (pre-FIPS 202)
padding, the variant Ethereum uses, not ``hashlib.sha3_256``.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import base58
from Crypto.Hash import keccak
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .errors import MalformedInput

NODE_ID_PREFIX = b"\x00\x20"
SEED_LEN = 32
DIGEST_HEX_LEN = 64
SIGNATURE_HEX_LEN = 128

_HEX_RE = re.compile(r"[0-9a-f]*")
_DIGEST_RE = re.compile(r"[0-9a-f]{64}")
_SIGNATURE_RE = re.compile(r"[0-9a-f]{128}")
_B58_ALPHABET = base58.BITCOIN_ALPHABET.decode("ascii")


def is_hex(value: object) -> bool:
    """True for an even-length lowercase hex string (empty allowed)."""
    return isinstance(value, str) and len(value) % 2 == 0 and _HEX_RE.fullmatch(value) is not None


def is_digest(value: object) -> bool:
    return isinstance(value, str) and _DIGEST_RE.fullmatch(value) is not None


def is_signature(value: object) -> bool:
    return isinstance(value, str) and _SIGNATURE_RE.fullmatch(value) is not None


def require_hex(value: object, what: str = "value") -> str:
    if not is_hex(value):
        raise MalformedInput(f"{what} must be lowercase hex, got {value!r:.80}")
    return value  # type: ignore[return-value]


def require_digest(value: object, what: str = "digest") -> str:
    if not is_digest(value):
        raise MalformedInput(f"{what} must be 64 lowercase hex chars, got {value!r:.80}")
    return value  # type: ignore[return-value]


def require_signature(value: object, what: str = "signature") -> str:
    if not is_signature(value):
        raise MalformedInput(f"{what} must be 128 lowercase hex chars, got {value!r:.80}")
    return value  # type: ignore[return-value]


def keccak256(text: str) -> str:
    """Keccak-256 of the ASCII bytes of ``text`` as 64 lowercase hex chars.

    >>> keccak256("")
    'c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470'
    """
    return keccak.new(digest_bits=256, data=text.encode("ascii")).hexdigest()


@dataclass(frozen=True)
class KeyPair:
    private_key: bytes
    public_key: bytes

    @cached_property
    def node_id(self) -> str:
        return derive_node_id(self.public_key)


@lru_cache(maxsize=4096)
def _signing_key(private_key: bytes) -> Ed25519PrivateKey:
    if not isinstance(private_key, bytes) or len(private_key) != SEED_LEN:
        raise MalformedInput("Ed25519 private key must be 32 bytes")
    return Ed25519PrivateKey.from_private_bytes(private_key)


@lru_cache(maxsize=4096)
def _verifying_key(public_key: bytes) -> Ed25519PublicKey:
    if not isinstance(public_key, bytes) or len(public_key) != 32:
        raise MalformedInput("Ed25519 public key must be 32 bytes")
    try:
        return Ed25519PublicKey.from_public_bytes(public_key)
    except ValueError as exc:
        raise MalformedInput(f"invalid Ed25519 public key: {exc}") from exc


def generate_keypair(seed: bytes) -> KeyPair:
    """Derive an Ed25519 key pair from a 32-byte seed (the RFC 8032 private key)."""
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != SEED_LEN:
        raise MalformedInput(f"seed must be {SEED_LEN} bytes")
    seed = bytes(seed)
    pub = _signing_key(seed).public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    return KeyPair(private_key=seed, public_key=pub)


def random_keypair() -> KeyPair:
    return generate_keypair(os.urandom(SEED_LEN))


def derive_node_id(public_key: bytes) -> str:
    """base58(0x00 0x20 || public_key).

    Shaped like a libp2p peer ID (mixed-case base58), but not byte-compatible
    with one.
    """
    if not isinstance(public_key, bytes) or len(public_key) != 32:
        raise MalformedInput("public key must be 32 bytes")
    return base58.b58encode(NODE_ID_PREFIX + public_key).decode("ascii")


def public_key_from_node_id(node_id: str) -> bytes:
    """Inverse of :func:`derive_node_id`."""
    if not isinstance(node_id, str) or not node_id or any(c not in _B58_ALPHABET for c in node_id):
        raise MalformedInput(f"not a base58 node id: {node_id!r:.80}")
    raw = base58.b58decode(node_id)
    if len(raw) != 34 or raw[:2] != NODE_ID_PREFIX:
        raise MalformedInput(f"node id {node_id!r} does not wrap a 32-byte key")
    return raw[2:]


def sign(private_key: bytes, message: bytes) -> str:
    """Deterministic Ed25519 signature, 128 lowercase hex chars."""
    return _signing_key(bytes(private_key)).sign(bytes(message)).hex()


def verify(public_key: bytes, message: bytes, signature: str) -> bool:
    """Check an Ed25519 signature.

    Returns False for a well-formed but wrong signature. Raises
    :class:`MalformedInput` when the key or the signature encoding is broken.
    """
    key = _verifying_key(bytes(public_key))
    require_signature(signature)
    try:
        key.verify(bytes.fromhex(signature), bytes(message))
    except InvalidSignature:
        return False
    return True


# key files: {"seed_hex": "<64 hex>"}


def dump_key_file(path: str | Path, seed: bytes) -> None:
    if len(seed) != SEED_LEN:
        raise MalformedInput(f"seed must be {SEED_LEN} bytes")
    Path(path).write_text(json.dumps({"seed_hex": seed.hex()}) + "\n", encoding="ascii")


def load_key_file(path: str | Path) -> KeyPair:
    try:
        data = json.loads(Path(path).read_text(encoding="ascii"))
        seed_hex = data["seed_hex"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise MalformedInput(f"unreadable key file {path}: {exc}") from exc
    if not is_digest(seed_hex):
        raise MalformedInput("seed_hex must be 64 lowercase hex chars")
    return generate_keypair(bytes.fromhex(seed_hex))
