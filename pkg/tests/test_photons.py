import numpy as np
import pytest

from qsdcnet import qudit
from qsdcnet import transcript as tr
from qsdcnet.channel import ChannelLeg, QuantumChannel
from qsdcnet.errors import DomainError, ProtocolOrderError
from qsdcnet.photons import (
    Consumed,
    Decoy,
    EntangledHalf,
    Photon,
    bell_measure_photons,
    fresh_pair,
    prepare_pairs,
)
from qsdcnet.qudit import PauliIndex


def test_pair_measurement_splits_and_correlates(rng):
    bs = qudit.builtin_basis_set(3, 2)
    a, b = fresh_pair(3)
    assert a.entangled and b.entangled
    with pytest.raises(DomainError):
        a.local_state()
    k = a.measure(bs[0], rng)
    assert not a.entangled and not b.entangled
    assert b.measure(bs[0], rng) == k
    assert a.local_state().same_ray(bs[0].vector(k))


def test_superdense_round_trip(rng):
    for d in (2, 3, 4):
        for n in range(d):
            for m in range(d):
                a, b = fresh_pair(d)
                b.apply(qudit.pauli_unitary(n, m, d))
                assert bell_measure_photons(a, b, rng) == PauliIndex(n, m, d)
                assert a.destroyed and b.destroyed


def test_destroyed_photon_cannot_be_reused(rng):
    a, b = fresh_pair(2)
    bell_measure_photons(a, b, rng)
    with pytest.raises(ProtocolOrderError):
        b.measure(qudit.builtin_basis_set(2, 2)[0], rng)


def test_bell_measure_on_broken_pair_is_random(rng):
    # after a local Z measurement the pair is a product state: outcome n is uniform
    bs = qudit.builtin_basis_set(3, 2)
    seen = set()
    for _ in range(200):
        a, b = fresh_pair(3)
        b.measure(bs[0], rng)
        seen.add(bell_measure_photons(a, b, rng).n)
    assert seen == {0, 1, 2}


def test_standalone_photon():
    bs = qudit.builtin_basis_set(2, 2)
    p = Photon.standalone(bs[1].vector(1))
    assert not p.entangled
    with pytest.raises(DomainError):
        Photon()


def test_sequence_ledger():
    s_a, s_b = prepare_pairs(2, 4)
    assert s_b.entangled_slots() == [0, 1, 2, 3]
    assert s_a.photon(0).pair is s_b.photon(0).pair
    s_b.consume(1, "first-check")
    assert s_b.live() == [0, 2, 3]
    assert s_b.outgoing()[1] is None
    with pytest.raises(ProtocolOrderError):
        s_b.consume(1, "decoy-check")
    with pytest.raises(ProtocolOrderError):
        s_b.photon(1)
    decoy = Photon.standalone(qudit.QuditState.basis_ket(0, 2))
    s_b.replace_with_decoy(2, Decoy(0, 0), decoy)
    assert s_b.slots[2] == Decoy(0, 0)
    with pytest.raises(ProtocolOrderError):
        s_b.replace_with_decoy(2, Decoy(0, 1), decoy)
    with pytest.raises(DomainError):
        Consumed("lost")


def test_received_sequence_hides_decoys():
    s_a, s_b = prepare_pairs(2, 3)
    out = s_b.outgoing()
    out[1] = None
    seq = type(s_b).received(2, out)
    assert seq.slots == [EntangledHalf(0), Consumed("removed"), EntangledHalf(2)]


# -- transcript and channel ----------------------------------------------------

def test_transcript_roundtrip_and_visibility():
    t = tr.Transcript()
    t.log("alice", tr.BELL_RESULT, {"slot": 0, "n": 1, "m": 2})
    t.log("charlie", "key", {"slot": 0, "n": 0, "m": 1}, public=False)
    assert [r.seq_no for r in t] == [0, 1]
    assert len(t.public()) == 1
    text = t.to_ndjson()
    assert text.splitlines()[0] == '{"kind": "qsdc-transcript", "schema_version": 1}'
    back = tr.Transcript.from_ndjson(text)
    assert back.records == t.records
    assert back.to_ndjson() == text


def test_transcript_rejects_unknown_schema():
    with pytest.raises(ValueError):
        tr.Transcript.from_ndjson('{"schema_version": 2}\n')


def test_channel_logs_hops_and_taps_in_order():
    t = tr.Transcript()
    ch = QuantumChannel(t, {ChannelLeg.CHARLIE_TO_BOB: ["s1", "s2"]})
    seen = []

    class Tap:
        def intercept(self, photons, leg, transcript):
            seen.append(len(transcript))
            return photons

    ch.attach(ChannelLeg.CHARLIE_TO_BOB, Tap(), hop="s2")
    ch.transmit([None], ChannelLeg.CHARLIE_TO_BOB)
    kinds = [(r.actor, r.event_type) for r in t]
    assert kinds == [("channel", "transmit"), ("relay:s1", "hop"), ("relay:s2", "hop"),
                     ("channel", "deliver")]
    assert seen == [3]
    with pytest.raises(ProtocolOrderError):
        ch.transmit([None], ChannelLeg.CHARLIE_TO_BOB)
    with pytest.raises(ValueError):
        ch.attach(ChannelLeg.ALICE_TO_CHARLIE, Tap(), hop="s1")


def test_rng_not_needed_for_deterministic_paths():
    # measuring a basis eigenstate in its own basis never consumes randomness meaningfully
    bs = qudit.builtin_basis_set(3, 4)
    r1, r2 = np.random.default_rng(1), np.random.default_rng(2)
    for b in bs.bases:
        assert Photon.standalone(b.vector(2)).measure(b, r1) == Photon.standalone(b.vector(2)).measure(b, r2)
