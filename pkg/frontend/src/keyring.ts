/**
 * LocalKeyring: the participant's credentials, held in browser storage.
 *
 * Two independent credential sets, as everywhere else in the system:
 *  - the DID keypair, signing ledger content (documents, contracts, claims)
 *  - the MSP credential (certificate + private key), signing requests
 *
 * Key files are the same JWK / certificate JSON documents the CLI writes.
 * Private keys are imported into WebCrypto as non-extractable sign-only
 * keys; nothing here ever serializes a private key into a request.
 */

import { importPrivateJwk, publicWireOfJwk, type PublicKeyWire, type RsaJwk } from "./crypto.js";
import type { Credential } from "./api.js";
import type { EntityType } from "./model.js";

const STORAGE_KEY = "insureledger.keyring.v1";

export interface StoredKeyring {
  did: string;
  entityType: EntityType;
  didKeyJwk: RsaJwk;
  mspKeyJwk: RsaJwk;
  certificate: Record<string, unknown>;
}

export interface Keyring {
  did: string;
  entityType: EntityType;
  didKey: CryptoKey;
  didPublicKey: PublicKeyWire;
  credential: Credential;
}

export async function activateKeyring(stored: StoredKeyring): Promise<Keyring> {
  const didKey = await importPrivateJwk(stored.didKeyJwk);
  const mspKey = await importPrivateJwk(stored.mspKeyJwk);
  return {
    did: stored.did,
    entityType: stored.entityType,
    didKey,
    didPublicKey: publicWireOfJwk(stored.didKeyJwk),
    credential: { certificate: stored.certificate, privateKey: mspKey },
  };
}

export function parseStoredKeyring(json: string): StoredKeyring {
  const raw = JSON.parse(json) as Partial<StoredKeyring>;
  for (const field of ["did", "entityType", "didKeyJwk", "mspKeyJwk", "certificate"] as const) {
    if (raw[field] === undefined) throw new Error(`keyring file missing "${field}"`);
  }
  return raw as StoredKeyring;
}

/** Assemble a keyring file from the individual documents the CLI produces. */
export function assembleKeyring(
  profile: { did: string; entityType: EntityType },
  didKeyJwk: RsaJwk,
  mspKeyJwk: RsaJwk,
  certificate: Record<string, unknown>,
): StoredKeyring {
  return { did: profile.did, entityType: profile.entityType, didKeyJwk, mspKeyJwk, certificate };
}

export function saveKeyring(storage: Pick<Storage, "setItem">, keyring: StoredKeyring): void {
  storage.setItem(STORAGE_KEY, JSON.stringify(keyring));
}

export function loadKeyring(storage: Pick<Storage, "getItem">): StoredKeyring | null {
  const text = storage.getItem(STORAGE_KEY);
  return text ? parseStoredKeyring(text) : null;
}

export function clearKeyring(storage: Pick<Storage, "removeItem">): void {
  storage.removeItem(STORAGE_KEY);
}

/** Export is an explicit user action; this is the only private-key egress. */
export function exportKeyring(keyring: StoredKeyring): Blob {
  return new Blob([JSON.stringify(keyring, null, 2)], { type: "application/json" });
}
