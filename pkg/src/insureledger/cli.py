"""Command-line client.

A profile directory holds one participant's material: ``msp_key.json`` and
``cert.json`` (request signing), ``did_key.json`` and ``profile.json``
(content signing). Every command that talks to the gateway takes
``--gateway`` and ``--profile``.
"""
from __future__ import annotations

import argparse
import json
import sys
import uuid
from pathlib import Path

import httpx

from . import bench, client, crypto
from .model import ClaimState, EntityType, RsaPublicKey


def _load_profile(profile_dir: str) -> tuple[client.Credential, dict]:
    root = Path(profile_dir)
    credential = client.Credential(
        certificate=json.loads((root / "cert.json").read_text()),
        private_key=crypto.load_private_key(root / "msp_key.json"),
    )
    meta = json.loads((root / "profile.json").read_text())
    return credential, meta


def _did_key(profile_dir: str):
    return crypto.load_private_key(Path(profile_dir) / "did_key.json")


def _gateway(args) -> client.GatewayClient:
    credential, _ = _load_profile(args.profile)
    return client.GatewayClient(args.gateway, credential)


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


# ---------------------------------------------------------------- subcommands

def cmd_keygen(args) -> int:
    key = crypto.generate_private_key(args.bits)
    crypto.save_private_key(key, args.out)
    _emit({"saved": args.out, "publicKey": RsaPublicKey.of_private(key).to_wire()})
    return 0


def cmd_register(args) -> int:
    admin_credential, _ = _load_profile(args.profile)
    response = httpx.post(
        f"{args.ca}/register",
        json={
            "adminCert": admin_credential.certificate,
            "participantId": args.participant_id,
            "entityType": args.entity_type,
            "boundDid": args.did,
        },
        timeout=30.0,
    )
    _emit({"status": response.status_code, **response.json()})
    return 0 if response.status_code < 400 else 1


def cmd_enroll(args) -> int:
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    msp_key = crypto.generate_private_key()
    crypto.save_private_key(msp_key, root / "msp_key.json")
    response = httpx.post(
        f"{args.ca}/enroll",
        json={
            "participantId": args.participant_id,
            "secret": args.secret,
            "publicKey": RsaPublicKey.of_private(msp_key).to_wire(),
        },
        timeout=30.0,
    )
    if response.status_code >= 400:
        _emit({"status": response.status_code, **response.json()})
        return 1
    cert = response.json()
    (root / "cert.json").write_text(json.dumps(cert, indent=2))
    did_key = crypto.generate_private_key()
    crypto.save_private_key(did_key, root / "did_key.json")
    (root / "profile.json").write_text(
        json.dumps({"did": cert["boundDid"], "entityType": cert["entityType"]}, indent=2)
    )
    _emit({"profile": str(root), "did": cert["boundDid"]})
    return 0


def cmd_did_create(args) -> int:
    gateway = _gateway(args)
    subject_key = crypto.load_private_key(args.key)
    doc = client.build_did_document(
        args.did,
        RsaPublicKey.of_private(subject_key),
        EntityType(args.entity_type),
        _did_key(args.profile),
    )
    _emit(gateway.invoke_ok("createDidDocument", {"document": doc}))
    return 0


def cmd_did_get(args) -> int:
    _emit(_gateway(args).invoke_ok("getDidDocument", {"did": args.did}))
    return 0


def cmd_contract_create(args) -> int:
    gateway = _gateway(args)
    _, meta = _load_profile(args.profile)
    wire = client.build_contract(
        args.id or str(uuid.uuid4()),
        meta["did"],
        args.client_did,
        args.land_vc,
        args.ipfs_hash,
        _did_key(args.profile),
    )
    _emit(gateway.invoke_ok("createInsuranceContract", {"contract": wire}))
    return 0


def cmd_contract_update(args) -> int:
    gateway = _gateway(args)
    _, meta = _load_profile(args.profile)
    current = gateway.invoke_ok("getContracts", {"did": meta["did"]})
    match = [c for c in current if c["contractId"] == args.id]
    if not match:
        _emit({"error": "NOT_FOUND", "contractId": args.id})
        return 1
    fields = client.contract_update_fields(match[0], args.ipfs_hash, _did_key(args.profile))
    _emit(gateway.invoke_ok("updateInsuranceContract", {"contractId": args.id, **fields}))
    return 0


def cmd_contract_sign(args) -> int:
    gateway = _gateway(args)
    _, meta = _load_profile(args.profile)
    current = gateway.invoke_ok("getContracts", {"did": meta["did"]})
    match = [c for c in current if c["contractId"] == args.id]
    if not match:
        _emit({"error": "NOT_FOUND", "contractId": args.id})
        return 1
    sig = client.countersign_contract(match[0], _did_key(args.profile))
    _emit(
        gateway.invoke_ok(
            "updateClientSignature", {"contractId": args.id, "clientSignature": sig}
        )
    )
    return 0


def cmd_contract_list(args) -> int:
    _, meta = _load_profile(args.profile)
    _emit(_gateway(args).invoke_ok("getContracts", {"did": args.did or meta["did"]}))
    return 0


def cmd_claim_create(args) -> int:
    gateway = _gateway(args)
    _, meta = _load_profile(args.profile)
    wire = client.build_claim(
        args.id or str(uuid.uuid4()),
        args.contract_id,
        args.ipfs_hash,
        meta["did"],
        _did_key(args.profile),
    )
    _emit(gateway.invoke_ok("createClaim", {"claim": wire}))
    return 0


def _fetch_claim(gateway: client.GatewayClient, claim_id: str) -> dict:
    found = gateway.invoke_ok("getClaims", {"selector": claim_id})
    return found[0] if isinstance(found, list) else found


def cmd_claim_state(args) -> int:
    gateway = _gateway(args)
    _, meta = _load_profile(args.profile)
    claim = _fetch_claim(gateway, args.id)
    fields = client.claim_state_update_fields(
        claim, ClaimState(args.state), meta["did"], _did_key(args.profile)
    )
    _emit(gateway.invoke_ok("updateClaimState", {"claimId": args.id, **fields}))
    return 0


def cmd_claim_assign(args) -> int:
    gateway = _gateway(args)
    _, meta = _load_profile(args.profile)
    claim = _fetch_claim(gateway, args.id)
    fields = client.auditor_assign_fields(
        claim, args.auditor_did, meta["did"], _did_key(args.profile)
    )
    _emit(gateway.invoke_ok("assignAuditor", {"claimId": args.id, **fields}))
    return 0


def cmd_claim_list(args) -> int:
    _, meta = _load_profile(args.profile)
    _emit(_gateway(args).invoke_ok("getClaims", {"selector": args.selector or meta["did"]}))
    return 0


def cmd_blob_put(args) -> int:
    gateway = client.GatewayClient(args.gateway)
    paths = [Path(p) for p in args.paths]
    if len(paths) == 1 and paths[0].is_file():
        cid = gateway.put_blob(paths[0].read_bytes())
    else:
        entries = []
        for path in paths:
            entries.append((path.name, gateway.put_blob(path.read_bytes())))
        cid = gateway.put_directory(entries)
    if args.pin:
        gateway.pin(cid)
    _emit({"cid": cid, "pinned": bool(args.pin)})
    return 0


def cmd_blob_pin(args) -> int:
    client.GatewayClient(args.gateway).pin(args.cid)
    _emit({"pinned": args.cid})
    return 0


def cmd_bench(args) -> int:
    from .network import Participant

    admin_credential, meta = _load_profile(args.profile)
    admin = Participant(
        meta["did"], _did_key(args.profile), admin_credential,
        EntityType(meta["entityType"]),
    )
    env = bench.BenchEnv(gateway_url=args.target, ca_url=args.ca, admin=admin)
    operations = args.op or list(bench.WRITE_OPERATIONS)
    all_rows: list[bench.SweepRow] = []
    for operation in operations:
        spec = bench.SweepSpec(
            operation=operation,
            target=args.target,
            seed=args.seed,
            levels=tuple(args.levels),
        )
        rows = bench.run_sweep(spec, env)
        all_rows.extend(rows)
        for row in rows:
            print(
                f"{operation} n={row.n}: mean={row.latency_mean_s:.3f}s "
                f"p95={row.latency_p95_s:.3f}s tps={row.throughput_tps:.1f} "
                f"drops={row.error_rate_pct:.1f}%"
            )
    if args.out:
        bench.write_csv(all_rows, Path(args.out))
        print(f"wrote {args.out}")
    measured = [dict(zip(bench.CSV_HEADER, r.as_csv())) for r in all_rows]
    reference = (
        bench.read_csv(Path(args.reference))
        if args.reference
        else bench.bundled_reference_rows()
    )
    reference = [
        r for r in reference
        if r["operation"] in operations and int(r["n"]) in set(args.levels)
    ]
    print()
    print(bench.summarize(measured, reference))
    return 0


# --------------------------------------------------------------------- parser

def _add_gateway_args(parser, profile=True) -> None:
    parser.add_argument("--gateway", required=True, help="gateway base URL")
    if profile:
        parser.add_argument("--profile", required=True, help="profile directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="insureledger")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate an RSA private key (JWK file)")
    p.add_argument("--out", required=True)
    p.add_argument("--bits", type=int, default=2048)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("register", help="register a participant at the CA")
    p.add_argument("--ca", required=True, help="CA base URL")
    p.add_argument("--profile", required=True, help="admin profile directory")
    p.add_argument("--participant-id", required=True)
    p.add_argument("--entity-type", required=True, choices=[e.value for e in EntityType])
    p.add_argument("--did", required=True, help="DID bound to the new certificate")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("enroll", help="enroll with a one-time secret")
    p.add_argument("--ca", required=True)
    p.add_argument("--participant-id", required=True)
    p.add_argument("--secret", required=True)
    p.add_argument("--out", required=True, help="profile directory to create")
    p.set_defaults(func=cmd_enroll)

    did = sub.add_parser("did", help="DID document operations").add_subparsers(
        dest="sub", required=True
    )
    p = did.add_parser("create")
    _add_gateway_args(p)
    p.add_argument("--did", required=True)
    p.add_argument("--key", required=True, help="subject key file (JWK)")
    p.add_argument("--entity-type", required=True, choices=[e.value for e in EntityType])
    p.set_defaults(func=cmd_did_create)
    p = did.add_parser("get")
    _add_gateway_args(p)
    p.add_argument("--did", required=True)
    p.set_defaults(func=cmd_did_get)

    contract = sub.add_parser("contract", help="insurance contract operations").add_subparsers(
        dest="sub", required=True
    )
    p = contract.add_parser("create")
    _add_gateway_args(p)
    p.add_argument("--id", help="contract uuid (generated if omitted)")
    p.add_argument("--client-did", required=True)
    p.add_argument("--land-vc", required=True)
    p.add_argument("--ipfs-hash", required=True)
    p.set_defaults(func=cmd_contract_create)
    p = contract.add_parser("update")
    _add_gateway_args(p)
    p.add_argument("--id", required=True)
    p.add_argument("--ipfs-hash", required=True)
    p.set_defaults(func=cmd_contract_update)
    p = contract.add_parser("sign")
    _add_gateway_args(p)
    p.add_argument("--id", required=True)
    p.set_defaults(func=cmd_contract_sign)
    p = contract.add_parser("list")
    _add_gateway_args(p)
    p.add_argument("--did", help="party DID (defaults to own)")
    p.set_defaults(func=cmd_contract_list)

    claim = sub.add_parser("claim", help="damage claim operations").add_subparsers(
        dest="sub", required=True
    )
    p = claim.add_parser("create")
    _add_gateway_args(p)
    p.add_argument("--id", help="claim uuid (generated if omitted)")
    p.add_argument("--contract-id", required=True)
    p.add_argument("--ipfs-hash", required=True)
    p.set_defaults(func=cmd_claim_create)
    p = claim.add_parser("state")
    _add_gateway_args(p)
    p.add_argument("--id", required=True)
    p.add_argument("--state", required=True, choices=[s.value for s in ClaimState])
    p.set_defaults(func=cmd_claim_state)
    p = claim.add_parser("assign")
    _add_gateway_args(p)
    p.add_argument("--id", required=True)
    p.add_argument("--auditor-did", required=True)
    p.set_defaults(func=cmd_claim_assign)
    p = claim.add_parser("list")
    _add_gateway_args(p)
    p.add_argument("--selector", help="claim uuid, contract uuid, or DID")
    p.set_defaults(func=cmd_claim_list)

    blob = sub.add_parser("blob", help="content-addressed storage").add_subparsers(
        dest="sub", required=True
    )
    p = blob.add_parser("put")
    p.add_argument("--gateway", required=True)
    p.add_argument("--pin", action="store_true")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_blob_put)
    p = blob.add_parser("pin")
    p.add_argument("--gateway", required=True)
    p.add_argument("cid")
    p.set_defaults(func=cmd_blob_pin)

    p = sub.add_parser("bench", help="concurrency sweep against a gateway")
    p.add_argument("--target", required=True, help="gateway base URL")
    p.add_argument("--ca", required=True, help="CA base URL")
    p.add_argument("--profile", required=True, help="admin profile directory")
    p.add_argument("--op", action="append", choices=bench.WRITE_OPERATIONS,
                   help="operation to sweep (repeatable; default: all five)")
    p.add_argument("--levels", type=int, nargs="+", default=list(bench.DEFAULT_LEVELS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--reference", help="reference CSV (default: bundled baseline)")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except client.GatewayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
