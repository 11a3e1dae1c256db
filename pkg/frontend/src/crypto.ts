/**
 * RS256 (RSASSA-PKCS1-v1_5 + SHA-256) via WebCrypto.
 *
 * Private keys are JWK documents — the same file format the CLI writes —
 * imported as non-extractable signing keys wherever possible. Public keys
 * travel as base64url big-endian integers ({exponent, modulus}).
 */

import { bytesToBase64, base64ToBytes } from "./b64.js";

export const RS256_PARAMS: RsaHashedImportParams = {
  name: "RSASSA-PKCS1-v1_5",
  hash: "SHA-256",
};

export interface PublicKeyWire {
  exponent: string; // base64url big-endian
  modulus: string;
}

export interface SignatureWire {
  sigBytes: string; // standard base64
  algorithm: string; // always "RS256"
}

export interface RsaJwk {
  kty: string;
  e: string;
  n: string;
  d?: string;
  p?: string;
  q?: string;
  dp?: string;
  dq?: string;
  qi?: string;
}

export async function importPrivateJwk(jwk: RsaJwk): Promise<CryptoKey> {
  if (jwk.kty !== "RSA" || !jwk.d) {
    throw new Error("expected an RSA private key JWK");
  }
  return crypto.subtle.importKey("jwk", jwk as JsonWebKey, RS256_PARAMS, false, ["sign"]);
}

export async function importPublicWire(wire: PublicKeyWire): Promise<CryptoKey> {
  const jwk: JsonWebKey = { kty: "RSA", e: wire.exponent, n: wire.modulus };
  return crypto.subtle.importKey("jwk", jwk, RS256_PARAMS, false, ["verify"]);
}

/** The on-wire public half of a private JWK. */
export function publicWireOfJwk(jwk: RsaJwk): PublicKeyWire {
  return { exponent: jwk.e, modulus: jwk.n };
}

export async function sign(key: CryptoKey, payload: Uint8Array): Promise<SignatureWire> {
  const raw = await crypto.subtle.sign(RS256_PARAMS, key, payload as BufferSource);
  return { sigBytes: bytesToBase64(new Uint8Array(raw)), algorithm: "RS256" };
}

export async function verify(
  key: CryptoKey,
  payload: Uint8Array,
  signature: SignatureWire,
): Promise<boolean> {
  if (signature.algorithm !== "RS256") return false;
  let raw: Uint8Array;
  try {
    raw = base64ToBytes(signature.sigBytes);
  } catch {
    return false;
  }
  try {
    return await crypto.subtle.verify(
      RS256_PARAMS,
      key,
      raw as BufferSource,
      payload as BufferSource,
    );
  } catch {
    return false;
  }
}

export async function sha256Hex(payload: Uint8Array): Promise<string> {
  const digest = await crypto.subtle.digest("SHA-256", payload as BufferSource);
  return [...new Uint8Array(digest)].map((b) => b.toString(16).padStart(2, "0")).join("");
}

export function randomNonce(): string {
  const bytes = new Uint8Array(16);
  crypto.getRandomValues(bytes);
  return [...bytes].map((b) => b.toString(16).padStart(2, "0")).join("");
}
