/**
 * Single-page UI: four menus — identity, contracts, claims, keyring.
 *
 * All signatures are produced in the browser from the loaded keyring;
 * operations a role may not invoke are greyed out up front, mirroring the
 * ledger's permission matrix (the ledger still enforces it).
 */

import { GatewayClient, GatewayError } from "./api.js";
import { canonicalString } from "./canonical.js";
import {
  ALLOWED_CLAIM_TRANSITIONS,
  CLAIM_STATES,
  CONTRACT_SIGNING_EXCLUSIONS,
  ENTITY_TYPES,
  ROLE_PERMISSIONS,
  buildClaim,
  buildContract,
  buildDidDocument,
  claimStateUpdateFields,
  auditorAssignFields,
  contractUpdateFields,
  countersignContract,
  utcNowRfc3339,
  uuid4,
  type ClaimWire,
  type ContractWire,
  type EntityType,
} from "./model.js";
import {
  activateKeyring,
  clearKeyring,
  exportKeyring,
  loadKeyring,
  parseStoredKeyring,
  saveKeyring,
  type Keyring,
} from "./keyring.js";

interface AppState {
  gatewayUrl: string;
  keyring: Keyring | null;
  client: GatewayClient | null;
}

const state: AppState = { gatewayUrl: "http://127.0.0.1:8080", keyring: null, client: null };

// ------------------------------------------------------------- tiny DOM helpers

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

function field(labelText: string, input: HTMLElement): HTMLElement {
  return el("label", { class: "field" }, el("span", {}, labelText), input);
}

function textInput(id: string, placeholder = ""): HTMLInputElement {
  return el("input", { id, type: "text", placeholder });
}

let banner: HTMLElement;

function notify(kind: "ok" | "error", message: string): void {
  banner.textContent = message;
  banner.className = `banner ${kind}`;
}

async function run(action: () => Promise<string>): Promise<void> {
  try {
    notify("ok", await action());
  } catch (err) {
    if (err instanceof GatewayError) notify("error", err.message);
    else notify("error", String(err));
  }
}

function requireSession(): { keyring: Keyring; client: GatewayClient } {
  if (!state.keyring || !state.client) throw new Error("load a keyring first");
  return { keyring: state.keyring, client: state.client };
}

function allowed(operation: string): boolean {
  if (!state.keyring) return false;
  return (ROLE_PERMISSIONS[operation] ?? []).includes(state.keyring.entityType);
}

/** Disable every control tagged with a data-op its role may not invoke. */
function applyRoleGates(root: ParentNode): void {
  root.querySelectorAll<HTMLElement>("[data-op]").forEach((node) => {
    const operation = node.dataset.op!;
    const off = !allowed(operation);
    node.classList.toggle("forbidden", off);
    node.querySelectorAll<HTMLButtonElement>("button").forEach((b) => (b.disabled = off));
  });
}

function renderJson(target: HTMLElement, value: unknown): void {
  target.textContent = JSON.stringify(value, null, 2);
}

// ------------------------------------------------------------------ file inputs

function readFile(input: HTMLInputElement): Promise<string> {
  const file = input.files?.[0];
  if (!file) return Promise.reject(new Error("choose a file first"));
  return file.text();
}

async function uploadEvidence(client: GatewayClient, input: HTMLInputElement): Promise<string> {
  const files = input.files;
  if (!files || files.length === 0) throw new Error("choose evidence files first");
  if (files.length === 1) {
    const cid = await client.putBlob(files[0]!);
    return cid;
  }
  const entries: [string, string][] = [];
  for (const file of files) entries.push([file.name, await client.putBlob(file)]);
  return client.putDirectory(entries);
}

// -------------------------------------------------------------------- menus

function identityMenu(): HTMLElement {
  const didInput = textInput("id-did", "did:insure:new-subject-01");
  const keyFile = el("input", { type: "file", id: "id-keyfile" }) as HTMLInputElement;
  const typeSelect = el("select", { id: "id-type" }) as HTMLSelectElement;
  for (const t of ENTITY_TYPES) typeSelect.append(el("option", { value: t }, t));
  const output = el("pre", { class: "output" });

  const createButton = el("button", {}, "Create DID document");
  createButton.onclick = () =>
    run(async () => {
      const { keyring, client } = requireSession();
      const jwk = JSON.parse(await readFile(keyFile)) as { e?: string; n?: string };
      if (!jwk.e || !jwk.n) throw new Error("subject key file must be a JWK");
      const doc = await buildDidDocument(
        didInput.value.trim(),
        { exponent: jwk.e, modulus: jwk.n },
        typeSelect.value as EntityType,
        keyring.didKey,
      );
      const stored = await client.invoke("createDidDocument", { document: doc });
      renderJson(output, stored);
      return `DID document created for ${didInput.value.trim()}`;
    });

  const lookupInput = textInput("id-lookup", "did:insure:someone-0001");
  const lookupButton = el("button", {}, "Check DID document");
  lookupButton.onclick = () =>
    run(async () => {
      const { client } = requireSession();
      const doc = await client.invoke("getDidDocument", { did: lookupInput.value.trim() });
      renderJson(output, doc);
      return `found ${lookupInput.value.trim()}`;
    });

  return el(
    "section",
    { id: "menu-identity", class: "menu" },
    el("h2", {}, "Identity management"),
    el(
      "div",
      { "data-op": "createDidDocument", class: "panel" },
      el("h3", {}, "Register a participant"),
      field("Subject DID", didInput),
      field("Subject public key (JWK file)", keyFile),
      field("Entity type", typeSelect),
      createButton,
    ),
    el(
      "div",
      { "data-op": "getDidDocument", class: "panel" },
      el("h3", {}, "Check a DID"),
      field("DID", lookupInput),
      lookupButton,
    ),
    output,
  );
}

function contractsMenu(): HTMLElement {
  const output = el("pre", { class: "output" });
  const list = el("div", { class: "list" });

  const clientDid = textInput("c-client", "did:insure:client-0001");
  const landVc = textInput("c-vc", "vc:land:...");
  const ipfsHash = textInput("c-cid", "b256:… (upload to fill)");
  const evidence = el("input", { type: "file", id: "c-evidence", multiple: "" }) as HTMLInputElement;

  const uploadButton = el("button", {}, "Upload evidence → CID");
  uploadButton.onclick = () =>
    run(async () => {
      const { client } = requireSession();
      ipfsHash.value = await uploadEvidence(client, evidence);
      return `evidence stored at ${ipfsHash.value}`;
    });

  const createButton = el("button", {}, "Create contract");
  createButton.onclick = () =>
    run(async () => {
      const { keyring, client } = requireSession();
      const contract = await buildContract(
        uuid4(),
        keyring.did,
        clientDid.value.trim(),
        landVc.value.trim(),
        ipfsHash.value.trim(),
        keyring.didKey,
      );
      const stored = await client.invoke("createInsuranceContract", { contract });
      renderJson(output, stored);
      return "contract created (awaiting client countersignature)";
    });

  const updateId = textInput("c-update-id", "contract uuid");
  const updateCid = textInput("c-update-cid", "new b256:…");
  const updateButton = el("button", {}, "Update imagery (erases signatures)");
  updateButton.onclick = () =>
    run(async () => {
      const { keyring, client } = requireSession();
      const listing = (await client.invoke("getContracts", { did: keyring.did })) as ContractWire[];
      const current = listing.find((c) => c.contractId === updateId.value.trim());
      if (!current) throw new Error("no such contract among yours");
      const fields = await contractUpdateFields(current, updateCid.value.trim(), keyring.didKey);
      const stored = await client.invoke("updateInsuranceContract", {
        contractId: current.contractId,
        ...fields,
      });
      renderJson(output, stored);
      return "contract updated — client signature cleared, re-sign required";
    });

  const signId = textInput("c-sign-id", "contract uuid");
  const payloadPreview = el("pre", { class: "output" });
  const previewButton = el("button", {}, "Show payload to sign");
  previewButton.onclick = () =>
    run(async () => {
      const { keyring, client } = requireSession();
      const listing = (await client.invoke("getContracts", { did: keyring.did })) as ContractWire[];
      const current = listing.find((c) => c.contractId === signId.value.trim());
      if (!current) throw new Error("no such contract among yours");
      payloadPreview.textContent = canonicalString(current, CONTRACT_SIGNING_EXCLUSIONS);
      return "this exact canonical payload will be signed";
    });
  const signButton = el("button", {}, "Countersign");
  signButton.onclick = () =>
    run(async () => {
      const { keyring, client } = requireSession();
      const listing = (await client.invoke("getContracts", { did: keyring.did })) as ContractWire[];
      const current = listing.find((c) => c.contractId === signId.value.trim());
      if (!current) throw new Error("no such contract among yours");
      const clientSignature = await countersignContract(current, keyring.didKey);
      const stored = await client.invoke("updateClientSignature", {
        contractId: current.contractId,
        clientSignature,
      });
      renderJson(output, stored);
      return "contract countersigned — now VALID";
    });

  const listButton = el("button", {}, "List my contracts");
  listButton.onclick = () =>
    run(async () => {
      const { keyring, client } = requireSession();
      const listing = (await client.invoke("getContracts", { did: keyring.did })) as ContractWire[];
      list.replaceChildren(
        ...listing.map((c) =>
          el(
            "div",
            { class: "card" },
            el("code", {}, c.contractId),
            el(
              "span",
              { class: c.clientSignature ? "state ok" : "state warn" },
              c.clientSignature ? "VALID (doubly signed)" : "awaiting client signature",
            ),
            el("span", {}, ` ${c.ipfsHash} · ${c.dateTime}`),
          ),
        ),
      );
      return `${listing.length} contract(s)`;
    });

  return el(
    "section",
    { id: "menu-contracts", class: "menu" },
    el("h2", {}, "Insurance contracts"),
    el(
      "div",
      { "data-op": "createInsuranceContract", class: "panel" },
      el("h3", {}, "Create"),
      field("Client DID", clientDid),
      field("Land registration VC", landVc),
      field("Evidence", evidence),
      uploadButton,
      field("Imagery CID", ipfsHash),
      createButton,
    ),
    el(
      "div",
      { "data-op": "updateInsuranceContract", class: "panel" },
      el("h3", {}, "Update"),
      field("Contract", updateId),
      field("New imagery CID", updateCid),
      updateButton,
    ),
    el(
      "div",
      { "data-op": "updateClientSignature", class: "panel" },
      el("h3", {}, "Countersign"),
      field("Contract", signId),
      previewButton,
      payloadPreview,
      signButton,
    ),
    el("div", { "data-op": "getContracts", class: "panel" }, el("h3", {}, "My contracts"), listButton, list),
    output,
  );
}

function lifecycleStrip(current: string): HTMLElement {
  const strip = el("div", { class: "lifecycle" });
  for (const s of CLAIM_STATES) {
    strip.append(el("span", { class: s === current ? "stage current" : "stage" }, s));
  }
  return strip;
}

function claimsMenu(): HTMLElement {
  const output = el("pre", { class: "output" });
  const list = el("div", { class: "list" });

  const contractId = textInput("cl-contract", "contract uuid");
  const cid = textInput("cl-cid", "b256:… (upload to fill)");
  const evidence = el("input", { type: "file", id: "cl-evidence", multiple: "" }) as HTMLInputElement;
  const uploadButton = el("button", {}, "Upload damage evidence → CID");
  uploadButton.onclick = () =>
    run(async () => {
      const { client } = requireSession();
      cid.value = await uploadEvidence(client, evidence);
      return `evidence stored at ${cid.value}`;
    });

  const createButton = el("button", {}, "File claim");
  createButton.onclick = () =>
    run(async () => {
      const { keyring, client } = requireSession();
      const claim = await buildClaim(
        uuid4(),
        contractId.value.trim(),
        cid.value.trim(),
        keyring.did,
        keyring.didKey,
      );
      const stored = await client.invoke("createClaim", { claim });
      renderJson(output, stored);
      return "claim filed (PRESENTED)";
    });

  const stateClaimId = textInput("cl-state-id", "claim uuid");
  const stateSelect = el("select", { id: "cl-state" }) as HTMLSelectElement;
  const refreshTransitions = (claim: ClaimWire | null) => {
    stateSelect.replaceChildren();
    const options = claim ? ALLOWED_CLAIM_TRANSITIONS[claim.claimState] : [];
    for (const s of options) stateSelect.append(el("option", { value: s }, s));
    stateSelect.disabled = options.length === 0;
  };
  refreshTransitions(null);
  const loadButton = el("button", {}, "Load claim");
  const loadClaim = async (): Promise<ClaimWire> => {
    const { client } = requireSession();
    const found = (await client.invoke("getClaims", {
      selector: stateClaimId.value.trim(),
    })) as ClaimWire[];
    const claim = found[0];
    if (!claim) throw new Error("claim not found");
    return claim;
  };
  loadButton.onclick = () =>
    run(async () => {
      const claim = await loadClaim();
      refreshTransitions(claim);
      output.replaceChildren(lifecycleStrip(claim.claimState));
      output.append("\n" + JSON.stringify(claim, null, 2));
      return stateSelect.disabled
        ? `claim is ${claim.claimState} (terminal — no further updates)`
        : `claim is ${claim.claimState}; legal transitions loaded`;
    });
  const advanceButton = el("button", {}, "Advance state");
  advanceButton.onclick = () =>
    run(async () => {
      const { keyring, client } = requireSession();
      const claim = await loadClaim();
      const fields = await claimStateUpdateFields(
        claim,
        stateSelect.value as ClaimWire["claimState"],
        keyring.did,
        keyring.didKey,
      );
      const stored = (await client.invoke("updateClaimState", {
        claimId: claim.claimId,
        ...fields,
      })) as { result: ClaimWire };
      refreshTransitions(stored.result);
      output.replaceChildren(lifecycleStrip(stored.result.claimState));
      output.append("\n" + JSON.stringify(stored.result, null, 2));
      return `claim is now ${stored.result.claimState}`;
    });

  const auditorDid = textInput("cl-auditor", "did:insure:auditor-001");
  const assignButton = el("button", {}, "Assign auditor");
  assignButton.onclick = () =>
    run(async () => {
      const { keyring, client } = requireSession();
      const claim = await loadClaim();
      const fields = await auditorAssignFields(
        claim,
        auditorDid.value.trim(),
        keyring.did,
        keyring.didKey,
      );
      const stored = await client.invoke("assignAuditor", { claimId: claim.claimId, ...fields });
      renderJson(output, stored);
      return `auditor ${auditorDid.value.trim()} assigned`;
    });

  const listButton = el("button", {}, "List my claims");
  listButton.onclick = () =>
    run(async () => {
      const { keyring, client } = requireSession();
      const claims = (await client.invoke("getClaims", { selector: keyring.did })) as ClaimWire[];
      list.replaceChildren(
        ...claims.map((c) =>
          el(
            "div",
            { class: "card" },
            el("code", {}, c.claimId),
            lifecycleStrip(c.claimState),
            el("span", {}, c.auditorDid ? `auditor: ${c.auditorDid}` : "no auditor"),
          ),
        ),
      );
      return `${claims.length} claim(s)`;
    });

  return el(
    "section",
    { id: "menu-claims", class: "menu" },
    el("h2", {}, "Damage claims"),
    el(
      "div",
      { "data-op": "createClaim", class: "panel" },
      el("h3", {}, "File a claim"),
      field("Contract", contractId),
      field("Evidence", evidence),
      uploadButton,
      field("Damage CID", cid),
      createButton,
    ),
    el(
      "div",
      { "data-op": "updateClaimState", class: "panel" },
      el("h3", {}, "Process"),
      field("Claim", stateClaimId),
      loadButton,
      field("Transition", stateSelect),
      advanceButton,
    ),
    el(
      "div",
      { "data-op": "assignAuditor", class: "panel" },
      el("h3", {}, "Dispute"),
      field("Auditor DID", auditorDid),
      assignButton,
    ),
    el("div", { "data-op": "getClaims", class: "panel" }, el("h3", {}, "My claims"), listButton, list),
    output,
  );
}

function keyringMenu(onChange: () => void): HTMLElement {
  const status = el("p", { id: "keyring-status" }, "no keyring loaded");
  const gatewayInput = textInput("kr-gateway", state.gatewayUrl);
  gatewayInput.value = state.gatewayUrl;

  const refreshStatus = () => {
    status.textContent = state.keyring
      ? `${state.keyring.did} — ${state.keyring.entityType}`
      : "no keyring loaded";
    onChange();
  };

  const keyringFile = el("input", { type: "file", id: "kr-file" }) as HTMLInputElement;
  const importButton = el("button", {}, "Import keyring file");
  importButton.onclick = () =>
    run(async () => {
      const stored = parseStoredKeyring(await readFile(keyringFile));
      saveKeyring(localStorage, stored);
      state.gatewayUrl = gatewayInput.value.trim() || state.gatewayUrl;
      state.keyring = await activateKeyring(stored);
      state.client = new GatewayClient(state.gatewayUrl, state.keyring.credential);
      refreshStatus();
      return `keyring loaded: ${stored.did} (${stored.entityType})`;
    });

  const exportButton = el("button", {}, "Export keyring");
  exportButton.onclick = () =>
    run(async () => {
      const stored = loadKeyring(localStorage);
      if (!stored) throw new Error("nothing to export");
      const url = URL.createObjectURL(exportKeyring(stored));
      const a = el("a", { href: url, download: "keyring.json" });
      a.click();
      URL.revokeObjectURL(url);
      return "keyring exported (explicit action — the only private-key egress)";
    });

  const forgetButton = el("button", {}, "Forget keyring");
  forgetButton.onclick = () =>
    run(async () => {
      clearKeyring(localStorage);
      state.keyring = null;
      state.client = null;
      refreshStatus();
      return "keyring cleared from this browser";
    });

  // Restore a previous session.
  const stored = loadKeyring(localStorage);
  if (stored) {
    void activateKeyring(stored).then((kr) => {
      state.keyring = kr;
      state.client = new GatewayClient(state.gatewayUrl, kr.credential);
      refreshStatus();
    });
  }

  return el(
    "section",
    { id: "menu-keyring", class: "menu" },
    el("h2", {}, "Keys & credentials"),
    status,
    el(
      "div",
      { class: "panel" },
      field("Gateway URL", gatewayInput),
      field("Keyring file (did/msp keys + certificate)", keyringFile),
      importButton,
      exportButton,
      forgetButton,
    ),
  );
}

export function mount(root: HTMLElement): void {
  banner = el("div", { class: "banner" });
  const menus = el("main", {});
  const rerenderGates = () => applyRoleGates(menus);
  menus.append(keyringMenu(rerenderGates), identityMenu(), contractsMenu(), claimsMenu());
  root.append(el("h1", {}, "insureledger"), banner, menus);
  rerenderGates();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app")!);
}
