import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { verify, importPublicWire, sign, type RsaJwk } from "../src/crypto.js";
import {
  activateKeyring,
  assembleKeyring,
  clearKeyring,
  exportKeyring,
  loadKeyring,
  parseStoredKeyring,
  saveKeyring,
  type StoredKeyring,
} from "../src/keyring.js";

const fixtures = JSON.parse(
  readFileSync(new URL("./fixtures/parity.json", import.meta.url), "utf-8"),
) as { privateJwk: RsaJwk; publicKeyWire: { exponent: string; modulus: string } };

function makeStored(): StoredKeyring {
  return assembleKeyring(
    { did: "did:insure:client-00000001", entityType: "CLIENT" },
    fixtures.privateJwk,
    fixtures.privateJwk,
    { subject: "did:insure:client-00000001", issuer: "ca" },
  );
}

function mockStorage(): Storage {
  const map = new Map<string, string>();
  return {
    get length() {
      return map.size;
    },
    key: (i: number) => [...map.keys()][i] ?? null,
    getItem: (k: string) => map.get(k) ?? null,
    setItem: (k: string, v: string) => void map.set(k, v),
    removeItem: (k: string) => void map.delete(k),
    clear: () => map.clear(),
  };
}

describe("keyring storage", () => {
  it("round-trips through storage", () => {
    const storage = mockStorage();
    expect(loadKeyring(storage)).toBeNull();
    saveKeyring(storage, makeStored());
    expect(loadKeyring(storage)).toEqual(makeStored());
    clearKeyring(storage);
    expect(loadKeyring(storage)).toBeNull();
  });

  it("rejects keyring files with missing fields", () => {
    const incomplete = { ...makeStored() } as Partial<StoredKeyring>;
    delete incomplete.mspKeyJwk;
    expect(() => parseStoredKeyring(JSON.stringify(incomplete))).toThrow(/mspKeyJwk/);
  });

  it("export round-trips byte-for-byte", async () => {
    const stored = makeStored();
    const text = await exportKeyring(stored).text();
    expect(parseStoredKeyring(text)).toEqual(stored);
  });
});

describe("activated keyring", () => {
  it("yields non-extractable signing keys that verify", async () => {
    const keyring = await activateKeyring(makeStored());
    expect(keyring.credential.privateKey.extractable).toBe(false);
    expect(keyring.didKey.usages).toEqual(["sign"]);
    const payload = new TextEncoder().encode("hello");
    const sig = await sign(keyring.didKey, payload);
    const pub = await importPublicWire(keyring.didPublicKey);
    expect(await verify(pub, payload, sig)).toBe(true);
  });
});
