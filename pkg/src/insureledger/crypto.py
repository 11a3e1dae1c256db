"""RS256 primitives: RSASSA-PKCS1-v1_5 with SHA-256 over canonical payloads.

Keys travel as big-endian base64url integers (exponent, modulus); private
keys are stored as JWK-style JSON documents so the CLI and the web client
share one key-file format.
"""
from __future__ import annotations

import base64
import json
from pathlib import Path

from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

MIN_MODULUS_BITS = 2048
ALLOWED_MODULUS_BITS = (2048, 3072, 4096)


class KeyTooSmallError(ValueError):
    """Signing key modulus below the 2048-bit floor (KEY_TOO_SMALL)."""


def b64url_uint(value: int) -> str:
    raw = value.to_bytes((value.bit_length() + 7) // 8 or 1, "big")
    return base64.urlsafe_b64encode(raw).rstrip(b"=").decode("ascii")


def uint_from_b64url(text: str) -> int:
    pad = "=" * (-len(text) % 4)
    return int.from_bytes(base64.urlsafe_b64decode(text + pad), "big")


def generate_private_key(bits: int = 2048) -> rsa.RSAPrivateKey:
    if bits < MIN_MODULUS_BITS:
        raise KeyTooSmallError(f"{bits}-bit modulus below {MIN_MODULUS_BITS}")
    return rsa.generate_private_key(public_exponent=65537, key_size=bits)


def public_numbers(private_key: rsa.RSAPrivateKey) -> tuple[int, int]:
    pub = private_key.public_key().public_numbers()
    return pub.e, pub.n


def sign_bytes(private_key: rsa.RSAPrivateKey, payload: bytes) -> bytes:
    if private_key.key_size < MIN_MODULUS_BITS:
        raise KeyTooSmallError(f"{private_key.key_size}-bit key rejected")
    return private_key.sign(payload, padding.PKCS1v15(), hashes.SHA256())


def verify_bytes(exponent: int, modulus: int, signature: bytes, payload: bytes) -> bool:
    """True iff ``signature`` is a valid RS256 signature; never raises."""
    try:
        pub = rsa.RSAPublicNumbers(exponent, modulus).public_key()
        pub.verify(signature, payload, padding.PKCS1v15(), hashes.SHA256())
        return True
    except Exception:
        return False


def private_key_to_jwk(private_key: rsa.RSAPrivateKey) -> dict:
    nums = private_key.private_numbers()
    pub = nums.public_numbers
    return {
        "kty": "RSA",
        "e": b64url_uint(pub.e),
        "n": b64url_uint(pub.n),
        "d": b64url_uint(nums.d),
        "p": b64url_uint(nums.p),
        "q": b64url_uint(nums.q),
        "dp": b64url_uint(nums.dmp1),
        "dq": b64url_uint(nums.dmq1),
        "qi": b64url_uint(nums.iqmp),
    }


def private_key_from_jwk(jwk: dict) -> rsa.RSAPrivateKey:
    if jwk.get("kty") != "RSA":
        raise ValueError("only RSA keys are supported")
    nums = rsa.RSAPrivateNumbers(
        p=uint_from_b64url(jwk["p"]),
        q=uint_from_b64url(jwk["q"]),
        d=uint_from_b64url(jwk["d"]),
        dmp1=uint_from_b64url(jwk["dp"]),
        dmq1=uint_from_b64url(jwk["dq"]),
        iqmp=uint_from_b64url(jwk["qi"]),
        public_numbers=rsa.RSAPublicNumbers(
            uint_from_b64url(jwk["e"]), uint_from_b64url(jwk["n"])
        ),
    )
    return nums.private_key()


def save_private_key(private_key: rsa.RSAPrivateKey, path: str | Path) -> None:
    Path(path).write_text(json.dumps(private_key_to_jwk(private_key), indent=2))


def load_private_key(path: str | Path) -> rsa.RSAPrivateKey:
    return private_key_from_jwk(json.loads(Path(path).read_text()))


def load_private_key_pem(path: str | Path) -> rsa.RSAPrivateKey:
    key = serialization.load_pem_private_key(Path(path).read_bytes(), password=None)
    if not isinstance(key, rsa.RSAPrivateKey):
        raise ValueError("not an RSA private key")
    return key
