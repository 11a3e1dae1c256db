"""Permissioned ledger for property-insurance workflows.

DID registration, doubly-signed insurance contracts with content-addressed
imagery, and an auditable damage-claim lifecycle, committed through an
execute-order-validate pipeline over a Raft-ordered blockchain.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    ClaimState,
    DamageClaim,
    DidDocument,
    EntityType,
    InsuranceContract,
    RsaPublicKey,
    Signature,
)
