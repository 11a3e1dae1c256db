/**
 * Canonical JSON serialization — the universal signing payload format.
 *
 * Rules: map keys sorted by code point, no insignificant whitespace,
 * minimal string escaping (only `"`, `\` and control characters), UTF-8
 * output, excluded fields omitted at the top level only. Every signature
 * in the system covers bytes produced by these exact rules, so this
 * implementation must stay byte-compatible with the gateway's.
 *
 * All ledger wire values are trees of strings, booleans, null, arrays and
 * objects; integers are supported exactly, while non-integer numbers use
 * the shortest round-trip decimal form.
 */

export class CanonicalizationError extends Error {}

const ESCAPES: Record<string, string> = {
  '"': '\\"',
  "\\": "\\\\",
  "\b": "\\b",
  "\f": "\\f",
  "\n": "\\n",
  "\r": "\\r",
  "\t": "\\t",
};

function escapeString(value: string): string {
  let out = '"';
  for (const ch of value) {
    const code = ch.codePointAt(0)!;
    const mapped = ESCAPES[ch];
    if (mapped !== undefined) {
      out += mapped;
    } else if (code < 0x20) {
      out += "\\u" + code.toString(16).padStart(4, "0");
    } else {
      out += ch;
    }
  }
  return out + '"';
}

function render(value: unknown): string {
  if (value === null) return "null";
  switch (typeof value) {
    case "string":
      return escapeString(value);
    case "boolean":
      return value ? "true" : "false";
    case "number":
      if (!Number.isFinite(value)) {
        throw new CanonicalizationError("non-finite number");
      }
      return String(value); // shortest round-trip decimal form
    case "object":
      break;
    default:
      throw new CanonicalizationError(`unserializable value of type ${typeof value}`);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(render).join(",") + "]";
  }
  if (value instanceof Uint8Array || value instanceof ArrayBuffer) {
    throw new CanonicalizationError("binary field without a declared text encoding");
  }
  const record = value as Record<string, unknown>;
  const keys = Object.keys(record).sort(); // JS sorts by UTF-16 code unit;
  // all wire keys are ASCII, where this equals code-point order.
  const parts = keys.map((k) => escapeString(k) + ":" + render(record[k]));
  return "{" + parts.join(",") + "}";
}

/** Canonical JSON text of `obj`, with `excludedFields` omitted at the top level. */
export function canonicalString(obj: unknown, excludedFields: Iterable<string> = []): string {
  const excluded = new Set(excludedFields);
  if (excluded.size > 0) {
    if (obj === null || typeof obj !== "object" || Array.isArray(obj)) {
      throw new CanonicalizationError("field exclusion requires a map at the top level");
    }
    const filtered: Record<string, unknown> = {};
    for (const [k, v] of Object.entries(obj as Record<string, unknown>)) {
      if (!excluded.has(k)) filtered[k] = v;
    }
    obj = filtered;
  }
  return render(obj);
}

/** Canonical UTF-8 bytes of `obj`; this is what gets signed. */
export function canonicalBytes(obj: unknown, excludedFields: Iterable<string> = []): Uint8Array {
  return new TextEncoder().encode(canonicalString(obj, excludedFields));
}
