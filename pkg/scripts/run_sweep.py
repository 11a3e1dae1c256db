#!/usr/bin/env python3
"""Spin up a fresh local network, run the full concurrency sweep for all five
write operations, write the CSV, and print the comparison report against the
bundled baseline results.
"""
import argparse
import sys
import tempfile
from pathlib import Path

from insureledger import bench
from insureledger.network import LocalNetwork, Participant


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--levels", type=int, nargs="+", default=list(bench.DEFAULT_LEVELS))
    parser.add_argument("--op", action="append", choices=bench.WRITE_OPERATIONS)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="sweep_results.csv")
    args = parser.parse_args()

    operations = args.op or list(bench.WRITE_OPERATIONS)
    with tempfile.TemporaryDirectory() as workdir:
        with LocalNetwork(workdir) as network:
            admin = Participant(
                network.ha_did, network.ha_did_key, network.ha_credential, None
            )
            env = bench.BenchEnv(
                gateway_url=network.gateway_url, ca_url=network.ca_url, admin=admin
            )
            all_rows = []
            for operation in operations:
                spec = bench.SweepSpec(
                    operation=operation,
                    target=network.gateway_url,
                    seed=args.seed,
                    levels=tuple(args.levels),
                )
                for row in bench.run_sweep(spec, env):
                    all_rows.append(row)
                    print(
                        f"{operation} n={row.n}: mean={row.latency_mean_s:.3f}s "
                        f"tps={row.throughput_tps:.1f} drops={row.error_rate_pct:.1f}%"
                    )
    bench.write_csv(all_rows, Path(args.out))
    print(f"\nwrote {args.out}\n")
    measured = [dict(zip(bench.CSV_HEADER, r.as_csv())) for r in all_rows]
    reference = [
        r
        for r in bench.bundled_reference_rows()
        if r["operation"] in operations and int(r["n"]) in set(args.levels)
    ]
    print(bench.summarize(measured, reference))
    return 0


if __name__ == "__main__":
    sys.exit(main())
