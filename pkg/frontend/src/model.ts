/**
 * Ledger wire types and client-side content signing.
 *
 * Signing payloads are the canonical bytes of each object's wire form with
 * its signature fields excluded — identical to what the CLI signs, so the
 * gateway accepts either client interchangeably.
 */

import { canonicalBytes } from "./canonical.js";
import { sign, type PublicKeyWire, type SignatureWire } from "./crypto.js";

export type EntityType = "HIGHER_AUTHORITY" | "INSURANCE_COMPANY" | "CLIENT" | "AUDITOR";
export type ClaimState = "PRESENTED" | "PROCESSING" | "HANDLED" | "CANCELED";

export const ENTITY_TYPES: EntityType[] = [
  "HIGHER_AUTHORITY",
  "INSURANCE_COMPANY",
  "CLIENT",
  "AUDITOR",
];

export const CLAIM_STATES: ClaimState[] = ["PRESENTED", "PROCESSING", "HANDLED", "CANCELED"];

/** Forward progression only; HANDLED and CANCELED are terminal. */
export const ALLOWED_CLAIM_TRANSITIONS: Record<ClaimState, ClaimState[]> = {
  PRESENTED: ["PROCESSING", "CANCELED"],
  PROCESSING: ["HANDLED", "CANCELED"],
  HANDLED: [],
  CANCELED: [],
};

/** Which roles may invoke each gateway operation (mirrors the ledger's matrix). */
export const ROLE_PERMISSIONS: Record<string, EntityType[]> = {
  createDidDocument: ["HIGHER_AUTHORITY", "INSURANCE_COMPANY"],
  getDidDocument: ["HIGHER_AUTHORITY", "INSURANCE_COMPANY", "CLIENT", "AUDITOR"],
  createInsuranceContract: ["INSURANCE_COMPANY"],
  updateInsuranceContract: ["INSURANCE_COMPANY"],
  updateClientSignature: ["CLIENT"],
  getContracts: ["INSURANCE_COMPANY", "CLIENT"],
  createClaim: ["INSURANCE_COMPANY", "CLIENT"],
  updateClaimState: ["INSURANCE_COMPANY", "CLIENT"],
  assignAuditor: ["INSURANCE_COMPANY"],
  getClaims: ["INSURANCE_COMPANY", "CLIENT", "AUDITOR"],
};

export interface DidDocumentWire {
  did: string;
  key: PublicKeyWire;
  kty: string;
  dateTime: string;
  entityType: EntityType;
  authoritySignature?: SignatureWire;
}

export interface ContractWire {
  contractId: string;
  insuranceCompanyDid: string;
  clientDid: string;
  landRegistrationVc: string;
  ipfsHash: string;
  dateTime: string;
  insuranceCompanySignature?: SignatureWire;
  clientSignature?: SignatureWire;
}

export interface ClaimWire {
  claimId: string;
  contractId: string;
  ipfsHash: string;
  dateTime: string;
  claimState: ClaimState;
  lastSignerDid: string;
  auditorDid?: string;
  contentsSignature?: SignatureWire;
}

export const DID_DOCUMENT_SIGNING_EXCLUSIONS = ["authoritySignature"];
export const CONTRACT_SIGNING_EXCLUSIONS = ["insuranceCompanySignature", "clientSignature"];
export const CLAIM_SIGNING_EXCLUSIONS = ["contentsSignature"];

export function didDocumentSigningPayload(wire: DidDocumentWire): Uint8Array {
  return canonicalBytes(wire, DID_DOCUMENT_SIGNING_EXCLUSIONS);
}

export function contractSigningPayload(wire: ContractWire): Uint8Array {
  return canonicalBytes(wire, CONTRACT_SIGNING_EXCLUSIONS);
}

export function claimSigningPayload(wire: ClaimWire): Uint8Array {
  return canonicalBytes(wire, CLAIM_SIGNING_EXCLUSIONS);
}

/** RFC 3339 UTC timestamp with second precision, `Z` suffix. */
export function utcNowRfc3339(): string {
  return new Date().toISOString().replace(/\.\d{3}Z$/, "Z");
}

export function uuid4(): string {
  return crypto.randomUUID();
}

// ----------------------------------------------------------- content signing

export async function buildDidDocument(
  did: string,
  publicKey: PublicKeyWire,
  entityType: EntityType,
  authorityKey: CryptoKey,
  dateTime?: string,
): Promise<DidDocumentWire> {
  const doc: DidDocumentWire = {
    did,
    key: publicKey,
    kty: "RSA",
    dateTime: dateTime ?? utcNowRfc3339(),
    entityType,
  };
  doc.authoritySignature = await sign(authorityKey, didDocumentSigningPayload(doc));
  return doc;
}

export async function buildContract(
  contractId: string,
  companyDid: string,
  clientDid: string,
  landRegistrationVc: string,
  ipfsHash: string,
  companyKey: CryptoKey,
  dateTime?: string,
): Promise<ContractWire> {
  const contract: ContractWire = {
    contractId,
    insuranceCompanyDid: companyDid,
    clientDid,
    landRegistrationVc,
    ipfsHash,
    dateTime: dateTime ?? utcNowRfc3339(),
  };
  contract.insuranceCompanySignature = await sign(companyKey, contractSigningPayload(contract));
  return contract;
}

/** Body for updateInsuranceContract: updated fields + fresh company signature
 * over the post-update payload (the stored client signature is erased). */
export async function contractUpdateFields(
  contract: ContractWire,
  newIpfsHash: string,
  companyKey: CryptoKey,
  dateTime?: string,
): Promise<{ ipfsHash: string; dateTime: string; insuranceCompanySignature: SignatureWire }> {
  const updated: ContractWire = {
    contractId: contract.contractId,
    insuranceCompanyDid: contract.insuranceCompanyDid,
    clientDid: contract.clientDid,
    landRegistrationVc: contract.landRegistrationVc,
    ipfsHash: newIpfsHash,
    dateTime: dateTime ?? utcNowRfc3339(),
  };
  const sig = await sign(companyKey, contractSigningPayload(updated));
  return { ipfsHash: updated.ipfsHash, dateTime: updated.dateTime, insuranceCompanySignature: sig };
}

export async function countersignContract(
  contract: ContractWire,
  clientKey: CryptoKey,
): Promise<SignatureWire> {
  return sign(clientKey, contractSigningPayload(contract));
}

export async function buildClaim(
  claimId: string,
  contractId: string,
  ipfsHash: string,
  issuerDid: string,
  issuerKey: CryptoKey,
  dateTime?: string,
): Promise<ClaimWire> {
  // The signature covers the claim exactly as stored: PRESENTED, no auditor.
  const claim: ClaimWire = {
    claimId,
    contractId,
    ipfsHash,
    dateTime: dateTime ?? utcNowRfc3339(),
    claimState: "PRESENTED",
    lastSignerDid: issuerDid,
  };
  claim.contentsSignature = await sign(issuerKey, claimSigningPayload(claim));
  return claim;
}

export async function claimStateUpdateFields(
  claim: ClaimWire,
  newState: ClaimState,
  signerDid: string,
  signerKey: CryptoKey,
  dateTime?: string,
): Promise<{ claimState: ClaimState; dateTime: string; contentsSignature: SignatureWire }> {
  const updated: ClaimWire = {
    claimId: claim.claimId,
    contractId: claim.contractId,
    ipfsHash: claim.ipfsHash,
    dateTime: dateTime ?? utcNowRfc3339(),
    claimState: newState,
    lastSignerDid: signerDid,
  };
  if (claim.auditorDid !== undefined) updated.auditorDid = claim.auditorDid;
  const sig = await sign(signerKey, claimSigningPayload(updated));
  return { claimState: newState, dateTime: updated.dateTime, contentsSignature: sig };
}

export async function auditorAssignFields(
  claim: ClaimWire,
  auditorDid: string,
  signerDid: string,
  signerKey: CryptoKey,
  dateTime?: string,
): Promise<{ auditorDid: string; dateTime: string; contentsSignature: SignatureWire }> {
  const updated: ClaimWire = {
    claimId: claim.claimId,
    contractId: claim.contractId,
    ipfsHash: claim.ipfsHash,
    dateTime: dateTime ?? utcNowRfc3339(),
    claimState: claim.claimState,
    lastSignerDid: signerDid,
    auditorDid,
  };
  const sig = await sign(signerKey, claimSigningPayload(updated));
  return { auditorDid, dateTime: updated.dateTime, contentsSignature: sig };
}
