"""Peer endorsement and block validation: authentication, endorsement
policy, hash-chain integrity, persistence, and MVCC against an independent
staleness oracle over randomized interleavings."""
from __future__ import annotations

import random
import uuid

import pytest

from insureledger import client, ledger
from insureledger.model import EntityType, RsaPublicKey
from insureledger.peer import ChainBrokenError, EndorseError, EndorseErrorCode

from .peer_world import PeerRig


@pytest.fixture(scope="module")
def rig(key_pool):
    return PeerRig(key_pool)


@pytest.fixture()
def peer(rig):
    peer = rig.new_peer()
    rig.seed_company_and_client(peer)
    return peer


# -------------------------------------------------------------- endorsement

def test_endorse_happy_path(rig, peer):
    doc = rig.company_doc("did:insure:company-new1", rig.company.did_key)
    proposal = rig.proposal(rig.ha, "createDidDocument", {"document": doc})
    endorsement = peer.endorse(proposal)
    assert endorsement["proposalDigest"] == ledger.proposal_digest(proposal)
    assert "ok" in endorsement["result"]
    assert endorsement["writeSet"]
    # The endorsement signature verifies under the peer's public key.
    from insureledger.peer import endorsement_signing_payload
    from insureledger.model import Signature

    sig = Signature.from_wire(endorsement["signature"])
    assert peer.public_key.verify(
        endorsement_signing_payload({k: v for k, v in endorsement.items() if k != "signature"}),
        sig,
    )


def test_endorse_nonce_replay_rejected(rig, peer):
    doc = rig.company_doc("did:insure:company-new2", rig.company.did_key)
    proposal = rig.proposal(rig.ha, "createDidDocument", {"document": doc})
    peer.endorse(proposal)
    with pytest.raises(EndorseError) as err:
        peer.endorse(proposal)
    assert err.value.code is EndorseErrorCode.REPLAY


def test_endorse_bad_certificate_rejected(rig, peer):
    doc = rig.company_doc("did:insure:company-new3", rig.company.did_key)
    proposal = rig.proposal(rig.ha, "createDidDocument", {"document": doc})
    proposal["certificate"] = dict(proposal["certificate"], entityType="CLIENT")
    with pytest.raises(EndorseError) as err:
        peer.endorse(proposal)
    assert err.value.code is EndorseErrorCode.BAD_CREDENTIAL


def test_endorse_tampered_args_rejected(rig, peer):
    doc = rig.company_doc("did:insure:company-new4", rig.company.did_key)
    proposal = rig.proposal(rig.ha, "createDidDocument", {"document": doc})
    proposal["args"] = {"document": dict(doc, dateTime="2026-01-01T00:00:00Z")}
    with pytest.raises(EndorseError) as err:
        peer.endorse(proposal)
    assert err.value.code is EndorseErrorCode.BAD_CREDENTIAL


def test_chaincode_error_is_endorsed_result(rig, peer):
    proposal = rig.proposal(rig.client, "getDidDocument", {"did": "did:insure:missing-000"})
    endorsement = peer.endorse(proposal)
    assert endorsement["result"]["error"] == "NOT_FOUND"
    assert endorsement["writeSet"] == []


# ---------------------------------------------------------------- validation

def test_commit_happy_path_and_wait(rig, peer):
    doc = rig.company_doc("did:insure:company-new5", rig.company.did_key)
    env = rig.envelope(peer, rig.ha, "createDidDocument", {"document": doc})
    block = rig.block_for(peer, [env])
    assert peer.validate_and_commit(block) == [ledger.VALID]
    tx_id = ledger.envelope_tx_id(env)
    assert peer.wait_tx(tx_id, timeout=1) == (block["number"], ledger.VALID)
    stored, version = peer.get_state("did/did:insure:company-new5")
    assert stored["did"] == "did:insure:company-new5"
    assert version == (block["number"], 0)


def test_commit_rejects_broken_chain(rig, peer):
    doc = rig.company_doc("did:insure:company-new6", rig.company.did_key)
    env = rig.envelope(peer, rig.ha, "createDidDocument", {"document": doc})
    wrong_number = ledger.make_block(peer.block_store.height + 1, peer.block_store.tip_hash(), [env])
    with pytest.raises(ChainBrokenError):
        peer.validate_and_commit(wrong_number)
    wrong_prev = ledger.make_block(peer.block_store.height, "f" * 64, [env])
    with pytest.raises(ChainBrokenError):
        peer.validate_and_commit(wrong_prev)
    tampered = rig.block_for(peer, [env])
    tampered["dataHash"] = "0" * 64
    with pytest.raises(ChainBrokenError):
        peer.validate_and_commit(tampered)


def test_commit_flags_bad_request_signature(rig, peer):
    doc = rig.company_doc("did:insure:company-new7", rig.company.did_key)
    env = rig.envelope(peer, rig.ha, "createDidDocument", {"document": doc})
    env["proposal"]["nonce"] = "different-nonce"  # breaks the request signature
    codes = peer.validate_and_commit(rig.block_for(peer, [env]))
    assert codes == [ledger.BAD_SIGNATURE]
    assert peer.get_state("did/did:insure:company-new7") is None


def test_commit_flags_tampered_endorsement(rig, peer):
    doc = rig.company_doc("did:insure:company-new8", rig.company.did_key)
    env = rig.envelope(peer, rig.ha, "createDidDocument", {"document": doc})
    env["endorsements"][0]["writeSet"] = []  # breaks the endorsement signature
    codes = peer.validate_and_commit(rig.block_for(peer, [env]))
    assert codes == [ledger.INVALID_ENDORSEMENT]


def test_commit_flags_error_result_endorsement(rig, peer):
    proposal = rig.proposal(rig.client, "getDidDocument", {"did": "did:insure:missing-000"})
    env = {"proposal": proposal, "endorsements": [peer.endorse(proposal)]}
    codes = peer.validate_and_commit(rig.block_for(peer, [env]))
    assert codes == [ledger.INVALID_ENDORSEMENT]


def test_commit_unknown_endorser_rejected(rig, peer, key_pool):
    # An endorsement signed by a key outside the genesis peer set is invalid.
    rogue = rig.new_peer(peer_id="rogue", key=key_pool[5])
    rig.seed_company_and_client(rogue)
    doc = rig.company_doc("did:insure:company-new9", rig.company.did_key)
    env = rig.envelope(rogue, rig.ha, "createDidDocument", {"document": doc})
    codes = peer.validate_and_commit(rig.block_for(peer, [env]))
    assert codes == [ledger.INVALID_ENDORSEMENT]


def test_duplicate_create_in_one_block_conflicts(rig, peer):
    """Phantom-create protection: the read miss is versioned, so the second
    create of the same DID inside one block is an MVCC conflict."""
    doc = rig.company_doc("did:insure:company-dup0", rig.company.did_key)
    env1 = rig.envelope(peer, rig.ha, "createDidDocument", {"document": doc})
    env2 = rig.envelope(peer, rig.ha, "createDidDocument", {"document": doc})
    codes = peer.validate_and_commit(rig.block_for(peer, [env1, env2]))
    assert codes == [ledger.VALID, ledger.MVCC_CONFLICT]


def test_stale_read_across_blocks_conflicts(rig, peer):
    contract = rig.make_valid_contract(peer)
    # Two claim creations against the same contract endorsed concurrently do
    # NOT conflict (distinct write keys, unchanged reads).
    def claim_env():
        wire = client.build_claim(
            str(uuid.uuid4()), contract["contractId"], "b256:" + "1" * 64,
            rig.client.did, rig.client.did_key,
        )
        return rig.envelope(peer, rig.client, "createClaim", {"claim": wire})

    env_a, env_b = claim_env(), claim_env()
    codes = peer.validate_and_commit(rig.block_for(peer, [env_a, env_b]))
    assert codes == [ledger.VALID, ledger.VALID]
    # But an update endorsed before another update of the same contract lands
    # is stale once it commits afterwards.
    fields_1 = client.contract_update_fields(contract, "b256:" + "2" * 64, rig.company.did_key)
    env_1 = rig.envelope(
        peer, rig.company, "updateInsuranceContract",
        {"contractId": contract["contractId"], **fields_1},
    )
    fields_2 = client.contract_update_fields(contract, "b256:" + "3" * 64, rig.company.did_key)
    env_2 = rig.envelope(
        peer, rig.company, "updateInsuranceContract",
        {"contractId": contract["contractId"], **fields_2},
    )
    codes = peer.validate_and_commit(rig.block_for(peer, [env_1, env_2]))
    assert codes == [ledger.VALID, ledger.MVCC_CONFLICT]


# --------------------------------------------------------------- persistence

def test_peer_restart_recovers_state(rig, tmp_path, key_pool):
    peer = rig.new_peer(data_dir=tmp_path / "peer")
    rig.seed_company_and_client(peer)
    doc = rig.company_doc("did:insure:company-newa", key_pool[6])
    env = rig.envelope(peer, rig.ha, "createDidDocument", {"document": doc})
    peer.validate_and_commit(rig.block_for(peer, [env]))
    state_hash = peer.world_state.state_hash()
    chain_hash = peer.block_store.chain_hash()
    height = peer.block_store.height
    peer.close()

    revived = rig.new_peer(data_dir=tmp_path / "peer")
    assert revived.block_store.height == height
    assert revived.world_state.state_hash() == state_hash
    assert revived.block_store.chain_hash() == chain_hash
    assert revived.tx_code(ledger.envelope_tx_id(env)) == (height - 1, ledger.VALID)
    revived.close()


def test_two_peers_commit_identically(rig):
    peer_a = rig.new_peer()
    peer_b = rig.new_peer()
    rig.seed_company_and_client(peer_a)
    doc = rig.company_doc("did:insure:company-newb", rig.company.did_key)
    env = rig.envelope(peer_a, rig.ha, "createDidDocument", {"document": doc})
    blocks = [rig.block_for(peer_a, [env])]
    peer_a.validate_and_commit(blocks[0])
    # peer_b receives the exact same block stream.
    for number in range(1, peer_a.block_store.height):
        peer_b.validate_and_commit(peer_a.block_store.get(number)["block"])
    assert peer_a.world_state.state_hash() == peer_b.world_state.state_hash()
    assert peer_a.block_store.chain_hash() == peer_b.block_store.chain_hash()


# ------------------------------------------------- randomized MVCC vs oracle

def run_mvcc_scenario(rig, seed: int) -> None:
    """Random interleaving of DID creates endorsed in batches, committed in
    blocks; predicted codes come from an independent staleness oracle that
    tracks only (key -> generation) and knows nothing of the peer's MVCC."""
    rng = random.Random(seed)
    peer = rig.new_peer()
    rig.seed_company_and_client(peer)

    did_names = [f"did:insure:company-mv{i}" for i in range(3)]
    docs = {d: rig.company_doc(d, rig.company.did_key) for d in did_names}

    oracle_gen: dict[str, int] = {}  # key -> generation of last applied write

    for _ in range(rng.randint(1, 3)):  # blocks
        batch = []
        for _ in range(rng.randint(1, 4)):  # txs endorsed against the same state
            did = rng.choice(did_names)
            env = rig.envelope(peer, rig.ha, "createDidDocument", {"document": docs[did]})
            endorsement = env["endorsements"][0]
            snapshot = {key: oracle_gen.get(key) for key, _ in endorsement["readSet"]}
            batch.append((env, endorsement, snapshot))

        predicted = []
        for env, endorsement, snapshot in batch:
            if "error" in endorsement["result"]:
                predicted.append(ledger.INVALID_ENDORSEMENT)
                continue
            stale = any(oracle_gen.get(key) != gen for key, gen in snapshot.items())
            if stale:
                predicted.append(ledger.MVCC_CONFLICT)
                continue
            predicted.append(ledger.VALID)
            generation = len(oracle_gen) + sum(g or 0 for g in oracle_gen.values()) + 1
            for key, _ in endorsement["writeSet"]:
                oracle_gen[key] = generation

        codes = peer.validate_and_commit(rig.block_for(peer, [env for env, _, _ in batch]))
        assert codes == predicted, f"seed={seed}: {codes} != {predicted}"


@pytest.mark.parametrize("seed", range(25))
def test_mvcc_matches_staleness_oracle(rig, seed):
    run_mvcc_scenario(rig, seed)
