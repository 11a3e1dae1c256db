#!/usr/bin/env python3
"""Start a local network (peers, orderers, CA, blob store, gateway) and keep
it running until interrupted. Writes a ready-to-use Higher Authority admin
profile into the workdir so the CLI can drive the network immediately.
"""
import argparse
import json
import signal
import sys
from pathlib import Path

from insureledger import crypto
from insureledger.network import LocalNetwork


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="./network-data")
    parser.add_argument("--peers", type=int, default=2)
    parser.add_argument("--orderers", type=int, default=3)
    parser.add_argument("--endorsement-k", type=int, default=1)
    parser.add_argument("--max-in-flight", type=int, default=4096)
    args = parser.parse_args()

    network = LocalNetwork(
        args.workdir,
        n_peers=args.peers,
        n_orderers=args.orderers,
        endorsement_k=args.endorsement_k,
        max_in_flight=args.max_in_flight,
    )
    network.start()

    profile = Path(args.workdir) / "ha-admin"
    profile.mkdir(parents=True, exist_ok=True)
    crypto.save_private_key(network.ha_credential.private_key, profile / "msp_key.json")
    crypto.save_private_key(network.ha_did_key, profile / "did_key.json")
    (profile / "cert.json").write_text(json.dumps(network.ha_credential.certificate, indent=2))
    (profile / "profile.json").write_text(
        json.dumps({"did": network.ha_did, "entityType": "HIGHER_AUTHORITY"}, indent=2)
    )

    print(f"gateway   {network.gateway_url}")
    print(f"ca        {network.ca_url}")
    print(f"peers     {network.peer_addrs}")
    print(f"orderers  {network.orderer_addrs}")
    print(f"blob      http://{network.blob_addr}")
    print(f"admin profile: {profile}")
    print("running; Ctrl-C to stop")
    try:
        signal.pause()
    except KeyboardInterrupt:
        pass
    network.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
