/**
 * Gateway HTTP client with client-side request signing.
 *
 * Every authenticated request carries the MSP certificate, a fresh nonce,
 * and an RS256 signature over the canonical JSON of
 * {argsSha256, nonce, operation} — the same payload the CLI signs, so the
 * gateway cannot tell the two clients apart. Private keys never leave the
 * browser.
 */

import { canonicalBytes } from "./canonical.js";
import { randomNonce, sha256Hex, sign } from "./crypto.js";

export interface Credential {
  certificate: Record<string, unknown>;
  privateKey: CryptoKey; // MSP key, sign-only
}

export const OPERATION_ROUTES: Record<string, [string, string]> = {
  createDidDocument: ["POST", "/dids"],
  getDidDocument: ["GET", "/dids/{did}"],
  createInsuranceContract: ["POST", "/contracts"],
  updateInsuranceContract: ["PATCH", "/contracts/{id}"],
  updateClientSignature: ["POST", "/contracts/{id}/client-signature"],
  getContracts: ["GET", "/contracts"],
  createClaim: ["POST", "/claims"],
  updateClaimState: ["PATCH", "/claims/{id}/state"],
  assignAuditor: ["PATCH", "/claims/{id}/auditor"],
  getClaims: ["GET", "/claims"],
};

export async function requestAuthPayload(
  operation: string,
  args: unknown,
  nonce: string,
): Promise<Uint8Array> {
  const argsSha256 = await sha256Hex(canonicalBytes(args));
  return canonicalBytes({ argsSha256, nonce, operation });
}

export async function authHeaders(
  credential: Credential,
  operation: string,
  args: unknown,
  nonce?: string,
): Promise<Record<string, string>> {
  const n = nonce ?? randomNonce();
  const payload = await requestAuthPayload(operation, args, n);
  const sig = await sign(credential.privateKey, payload);
  return {
    "x-certificate": btoa(JSON.stringify(credential.certificate)),
    "x-signature": sig.sigBytes,
    "x-nonce": n,
    "content-type": "application/json",
  };
}

export interface BuiltRequest {
  method: string;
  path: string;
  body: string | null;
  headers: Record<string, string>;
}

type Args = Record<string, unknown>;

export async function buildRequest(
  operation: string,
  args: Args,
  credential: Credential,
  nonce?: string,
): Promise<BuiltRequest> {
  const route = OPERATION_ROUTES[operation];
  if (!route) throw new Error(`unknown operation ${operation}`);
  const [method, template] = route;
  let path = template;
  let body: string | null = null;
  switch (operation) {
    case "createDidDocument":
      body = JSON.stringify(args.document);
      break;
    case "getDidDocument":
      path = template.replace("{did}", String(args.did));
      break;
    case "createInsuranceContract":
      body = JSON.stringify(args.contract);
      break;
    case "updateInsuranceContract": {
      path = template.replace("{id}", String(args.contractId));
      const { contractId: _omit, ...rest } = args;
      body = JSON.stringify(rest);
      break;
    }
    case "updateClientSignature":
      path = template.replace("{id}", String(args.contractId));
      body = JSON.stringify({ clientSignature: args.clientSignature });
      break;
    case "getContracts":
      path = `${template}?did=${args.did}`;
      break;
    case "createClaim":
      body = JSON.stringify(args.claim);
      break;
    case "updateClaimState":
    case "assignAuditor": {
      path = template.replace("{id}", String(args.claimId));
      const { claimId: _omit, ...rest } = args;
      body = JSON.stringify(rest);
      break;
    }
    case "getClaims":
      path = `${template}?selector=${args.selector}`;
      break;
  }
  const headers = await authHeaders(credential, operation, args, nonce);
  return { method, path, body, headers };
}

export class GatewayError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
  ) {
    super(`${code} (HTTP ${status})${detail ? ": " + detail : ""}`);
  }
}

export class GatewayClient {
  constructor(
    public baseUrl: string,
    public credential: Credential,
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  async invoke(operation: string, args: Args): Promise<unknown> {
    const req = await buildRequest(operation, args, this.credential);
    const response = await fetch(this.baseUrl + req.path, {
      method: req.method,
      headers: req.headers,
      body: req.body,
    });
    const text = await response.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      /* non-JSON error body */
    }
    if (!response.ok) {
      const err = (parsed ?? {}) as { error?: string; message?: string };
      throw new GatewayError(response.status, err.error ?? "ERROR", err.message ?? "");
    }
    return parsed;
  }

  // Storage routes carry no request signature.
  async putBlob(data: Uint8Array | Blob): Promise<string> {
    const response = await fetch(this.baseUrl + "/storage/blob", {
      method: "POST",
      body: data instanceof Blob ? data : new Blob([data as BlobPart]),
    });
    if (!response.ok) throw new GatewayError(response.status, "STORAGE", await response.text());
    return ((await response.json()) as { cid: string }).cid;
  }

  async putDirectory(entries: [string, string][]): Promise<string> {
    const response = await fetch(this.baseUrl + "/storage/dir", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ entries }),
    });
    if (!response.ok) throw new GatewayError(response.status, "STORAGE", await response.text());
    return ((await response.json()) as { cid: string }).cid;
  }

  async pin(cid: string): Promise<void> {
    const response = await fetch(`${this.baseUrl}/storage/pin/${cid}`, { method: "POST" });
    if (!response.ok) throw new GatewayError(response.status, "STORAGE", await response.text());
  }
}
