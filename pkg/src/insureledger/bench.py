"""Load harness: fires N concurrent requests per operation at the gateway,
measures latency, throughput, and dropped connections, and compares the
results against bundled baseline measurements.

Open-loop burst model: every request of a level starts at a shared barrier.
A request counts as dropped iff the connection is refused or reset before
any response arrives.
"""
from __future__ import annotations

import asyncio
import csv
import random
import statistics
import time
import uuid
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from . import client
from .model import ClaimState, EntityType, RsaPublicKey
from .network import Participant, provision_participant
from .wire import parse_addr

WRITE_OPERATIONS = (
    "createDidDocument",
    "createInsuranceContract",
    "updateClientSignature",
    "createClaim",
    "updateClaimState",
)

DEFAULT_LEVELS = (50, 100, 250, 500, 1000, 1500, 2000, 2500, 3000)

CSV_HEADER = [
    "operation",
    "n",
    "latency_mean_s",
    "latency_p95_s",
    "throughput_tps",
    "error_rate_pct",
]

PROVISION_PARALLELISM = 64


class TargetUnreachableError(Exception):
    pass


class KeyMismatchError(Exception):
    pass


@dataclass(frozen=True)
class SweepSpec:
    operation: str
    target: str
    seed: int = 0
    levels: tuple[int, ...] = DEFAULT_LEVELS

    def __post_init__(self):
        if self.operation not in WRITE_OPERATIONS:
            raise ValueError(f"operation must be one of {WRITE_OPERATIONS}")
        if list(self.levels) != sorted(set(self.levels)):
            raise ValueError("levels must be strictly increasing")


@dataclass
class SweepRow:
    operation: str
    n: int
    latency_mean_s: float
    latency_p95_s: float
    throughput_tps: float
    error_rate_pct: float
    successes: int = 0
    failures: int = 0
    dropped: int = 0
    # HTTP status -> count, for every response received; diagnostic only,
    # never serialized to CSV.
    status_counts: dict = field(default_factory=dict)

    def as_csv(self) -> list:
        return [
            self.operation,
            self.n,
            round(self.latency_mean_s, 4),
            round(self.latency_p95_s, 4),
            round(self.throughput_tps, 2),
            round(self.error_rate_pct, 2),
        ]


@dataclass
class BenchEnv:
    """Where to aim the sweep and who provisions its fixtures."""

    gateway_url: str
    ca_url: str
    admin: Participant  # Higher Authority admin
    shared_key: object = None  # one RSA key reused for all fixture identities


# ------------------------------------------------------------------ request burst

async def _fire_one(
    host: str,
    port: int,
    method: str,
    path: str,
    body: bytes,
    headers: dict,
    barrier: asyncio.Event,
) -> tuple[str, float, Optional[int]]:
    """Returns (outcome, latency, status): outcome in {success, failure, dropped}."""
    await barrier.wait()
    start = time.monotonic()
    try:
        reader, writer = await asyncio.open_connection(host, port)
    except OSError:
        return "dropped", time.monotonic() - start, None
    try:
        head = f"{method} {path} HTTP/1.1\r\nHost: {host}\r\nConnection: close\r\n"
        head += f"Content-Length: {len(body)}\r\n"
        for name, value in headers.items():
            head += f"{name}: {value}\r\n"
        writer.write(head.encode("latin-1") + b"\r\n" + body)
        await writer.drain()
        raw = await reader.read(-1)
    except (OSError, ConnectionError):
        return "dropped", time.monotonic() - start, None
    finally:
        writer.close()
        try:
            await writer.wait_closed()
        except Exception:
            pass
    latency = time.monotonic() - start
    if not raw.startswith(b"HTTP/1.1 "):
        return "dropped", latency, None
    status = int(raw.split(b" ", 2)[1])
    return ("success" if status < 400 else "failure"), latency, status


async def _run_burst(target: str, requests: list[tuple[str, str, bytes, dict]]) -> SweepRow:
    host, port = parse_addr(target.replace("http://", ""))
    barrier = asyncio.Event()
    tasks = [
        asyncio.ensure_future(_fire_one(host, port, m, p, b, h, barrier))
        for m, p, b, h in requests
    ]
    await asyncio.sleep(0.05)  # let every task reach the barrier
    span_start = time.monotonic()
    barrier.set()
    outcomes = await asyncio.gather(*tasks)
    span = max(time.monotonic() - span_start, 1e-9)

    latencies = [lat for outcome, lat, _ in outcomes if outcome == "success"]
    successes = sum(1 for o, _, _ in outcomes if o == "success")
    failures = sum(1 for o, _, _ in outcomes if o == "failure")
    dropped = sum(1 for o, _, _ in outcomes if o == "dropped")
    status_counts: dict[int, int] = {}
    for _, _, status in outcomes:
        if status is not None:
            status_counts[status] = status_counts.get(status, 0) + 1
    n = len(requests)
    mean = statistics.fmean(latencies) if latencies else 0.0
    p95 = _percentile(latencies, 0.95) if latencies else 0.0
    return SweepRow(
        operation="",
        n=n,
        latency_mean_s=mean,
        latency_p95_s=p95,
        throughput_tps=successes / span,
        error_rate_pct=dropped / n * 100 if n else 0.0,
        successes=successes,
        failures=failures,
        dropped=dropped,
        status_counts=status_counts,
    )


def _percentile(values: list[float], q: float) -> float:
    ordered = sorted(values)
    index = min(len(ordered) - 1, max(0, round(q * (len(ordered) - 1))))
    return ordered[index]


# -------------------------------------------------------------------- fixtures

def _seeded_uuid(rng: random.Random) -> str:
    return str(uuid.UUID(int=rng.getrandbits(128), version=4))


class FixtureBuilder:
    """Deterministic fixture data: same seed, same payloads.

    One RSA keypair is shared by every fixture identity; identities differ
    by DID, so signatures still differ per payload.
    """

    def __init__(self, env: BenchEnv, spec: SweepSpec):
        self.env = env
        self.spec = spec
        self.rng = random.Random(f"{spec.seed}:{spec.operation}")
        if env.shared_key is None:
            from . import crypto

            env.shared_key = crypto.generate_private_key()
        self.key = env.shared_key
        self.public_key = RsaPublicKey.of_private(self.key)
        tag = f"{spec.seed}-{self._slug()[:6]}"
        self.company = provision_participant(
            env.ca_url,
            env.gateway_url,
            env.admin,
            f"bench-ic-{tag}",
            EntityType.INSURANCE_COMPANY,
            did=f"did:insure:bench-ic-{self._slug()}",
            did_key=self.key,
            msp_key=self.key,
        )
        self.client_party = provision_participant(
            env.ca_url,
            env.gateway_url,
            self.company,
            f"bench-client-{tag}",
            EntityType.CLIENT,
            did=f"did:insure:bench-cl-{self._slug()}",
            did_key=self.key,
            msp_key=self.key,
        )

    def _slug(self) -> str:
        return "".join(self.rng.choice("abcdefghijklmnopqrstuvwxyz0123456789") for _ in range(12))

    def _cid(self) -> str:
        return "b256:" + "".join(self.rng.choice("0123456789abcdef") for _ in range(64))

    async def requests_for_level(self, n: int) -> list[tuple[str, str, bytes, dict]]:
        op = self.spec.operation
        if op == "createDidDocument":
            return [self._did_request() for _ in range(n)]
        if op == "createInsuranceContract":
            return [self._contract_request() for _ in range(n)]
        if op == "updateClientSignature":
            contracts = await self._provision_contracts(n)
            return [self._countersign_request(c) for c in contracts]
        if op == "createClaim":
            await self._provision_valid_contract()
            return [self._claim_request() for _ in range(n)]
        if op == "updateClaimState":
            claims = await self._provision_claims(n)
            return [self._claim_update_request(c) for c in claims]
        raise ValueError(op)

    def _did_request(self):
        doc = client.build_did_document(
            f"did:insure:bench-did-{self._slug()}",
            self.public_key,
            EntityType.CLIENT,
            self.company.did_key,
        )
        return client.build_request(
            "createDidDocument", {"document": doc}, self.company.credential
        )

    def _contract_wire(self) -> dict:
        return client.build_contract(
            _seeded_uuid(self.rng),
            self.company.did,
            self.client_party.did,
            "vc:land-registry:opaque",
            self._cid(),
            self.company.did_key,
        )

    def _contract_request(self):
        return client.build_request(
            "createInsuranceContract",
            {"contract": self._contract_wire()},
            self.company.credential,
        )

    def _countersign_request(self, contract_wire: dict):
        args = {
            "contractId": contract_wire["contractId"],
            "clientSignature": client.countersign_contract(
                contract_wire, self.client_party.did_key
            ),
        }
        return client.build_request(
            "updateClientSignature", args, self.client_party.credential
        )

    def _claim_request(self):
        claim = client.build_claim(
            _seeded_uuid(self.rng),
            self.valid_contract_id,
            self._cid(),
            self.client_party.did,
            self.client_party.did_key,
        )
        return client.build_request(
            "createClaim", {"claim": claim}, self.client_party.credential
        )

    def _claim_update_request(self, claim_wire: dict):
        args = {
            "claimId": claim_wire["claimId"],
            **client.claim_state_update_fields(
                claim_wire,
                ClaimState.PROCESSING,
                self.company.did,
                self.company.did_key,
            ),
        }
        return client.build_request("updateClaimState", args, self.company.credential)

    # -------------------------------------------------- pre-provisioned objects

    async def _provision(self, requests: list[tuple[str, str, bytes, dict]]) -> None:
        host, port = parse_addr(self.spec.target.replace("http://", ""))
        semaphore = asyncio.Semaphore(PROVISION_PARALLELISM)
        barrier = asyncio.Event()
        barrier.set()

        async def run(req):
            async with semaphore:
                outcome, _, status = await _fire_one(host, port, *req, barrier)
                if outcome != "success":
                    raise TargetUnreachableError(
                        f"fixture provisioning failed: {outcome} (status {status})"
                    )

        await asyncio.gather(*(run(r) for r in requests))

    async def _provision_contracts(self, n: int) -> list[dict]:
        wires = [self._contract_wire() for _ in range(n)]
        await self._provision(
            [
                client.build_request(
                    "createInsuranceContract", {"contract": w}, self.company.credential
                )
                for w in wires
            ]
        )
        return wires

    async def _provision_valid_contract(self) -> None:
        wires = await self._provision_contracts(1)
        await self._provision([self._countersign_request(wires[0])])
        self.valid_contract_id = wires[0]["contractId"]

    async def _provision_claims(self, n: int) -> list[dict]:
        await self._provision_valid_contract()
        claims = [
            client.build_claim(
                _seeded_uuid(self.rng),
                self.valid_contract_id,
                self._cid(),
                self.client_party.did,
                self.client_party.did_key,
            )
            for _ in range(n)
        ]
        await self._provision(
            [
                client.build_request("createClaim", {"claim": c}, self.client_party.credential)
                for c in claims
            ]
        )
        return claims


# ----------------------------------------------------------------------- sweeps

def run_sweep(spec: SweepSpec, env: BenchEnv, out_csv: Optional[Path] = None) -> list[SweepRow]:
    return asyncio.run(run_sweep_async(spec, env, out_csv))


async def run_sweep_async(
    spec: SweepSpec, env: BenchEnv, out_csv: Optional[Path] = None
) -> list[SweepRow]:
    try:
        fixtures = FixtureBuilder(env, spec)
    except Exception as exc:
        raise TargetUnreachableError(str(exc)) from exc
    rows = []
    for level in spec.levels:
        requests = await fixtures.requests_for_level(level)
        row = await _run_burst(spec.target, requests)
        row.operation = spec.operation
        rows.append(row)
    if out_csv is not None:
        write_csv(rows, out_csv)
    return rows


def write_csv(rows: list[SweepRow], path: Path, append: bool = False) -> None:
    path = Path(path)
    new_file = not (append and path.exists())
    with path.open("a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.as_csv())


def read_csv(path: Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


def bundled_reference_rows() -> list[dict]:
    ref = resources.files("insureledger.reference").joinpath("baseline_results.csv")
    with ref.open(newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


# ----------------------------------------------------------------------- report

def summarize(measured: list[dict], reference: list[dict]) -> str:
    """Side-by-side comparison table with ratio columns and trend flags."""
    ref_index = {(r["operation"], int(r["n"])): r for r in reference}
    lines = []
    header = (
        f"{'operation':<26}{'n':>6}{'lat_s':>10}{'ref_lat':>10}{'ratio':>8}"
        f"{'tps':>10}{'ref_tps':>10}{'ratio':>8}{'err%':>7}{'ref%':>7}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    by_op: dict[str, list[tuple[int, float]]] = {}
    for row in measured:
        key = (row["operation"], int(row["n"]))
        if reference and key not in ref_index:
            raise KeyMismatchError(f"no reference row for {key}")
        ref = ref_index.get(key)
        lat = float(row["latency_mean_s"])
        tps = float(row["throughput_tps"])
        err = float(row["error_rate_pct"])
        by_op.setdefault(row["operation"], []).append((int(row["n"]), lat))
        if ref:
            ref_lat = float(ref["latency_mean_s"])
            ref_tps = float(ref["throughput_tps"])
            lat_ratio = lat / ref_lat if ref_lat else float("nan")
            tps_ratio = tps / ref_tps if ref_tps else float("nan")
            lines.append(
                f"{row['operation']:<26}{row['n']:>6}{lat:>10.3f}{ref_lat:>10.3f}"
                f"{lat_ratio:>8.2f}{tps:>10.2f}{ref_tps:>10.2f}{tps_ratio:>8.2f}"
                f"{err:>7.1f}{float(ref['error_rate_pct']):>7.1f}"
            )
        else:
            lines.append(
                f"{row['operation']:<26}{row['n']:>6}{lat:>10.3f}{'-':>10}"
                f"{'-':>8}{tps:>10.2f}{'-':>10}{'-':>8}{err:>7.1f}{'-':>7}"
            )
    flags = []
    for op, points in by_op.items():
        points.sort()
        for n_low, lat_low in points:
            for n_high, lat_high in points:
                if n_high >= 8 * n_low and lat_high <= lat_low:
                    flags.append(
                        f"TREND: {op} latency not increasing from n={n_low} "
                        f"({lat_low:.3f}s) to n={n_high} ({lat_high:.3f}s)"
                    )
    lines.append("")
    if flags:
        lines.extend(flags)
    else:
        lines.append("trend check: latency increases across every 8x load step")
    return "\n".join(lines)
