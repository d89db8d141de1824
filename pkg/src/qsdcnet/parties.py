"""State machines of the server (Alice), receiver (Charlie) and sender (Bob).

Parties never touch one another's attributes. Everything they learn about
each other arrives either as photons handed over the quantum channel or as
public records on the shared transcript.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import qudit
from . import transcript as tr
from .errors import ConfigError, DomainError
from .photons import (
    Decoy,
    EntangledHalf,
    Photon,
    PhotonSequence,
    bell_measure_photons,
    prepare_pairs,
)
from .qudit import BasisSet, PauliIndex, RandomStream


def decode_symbol(announced: PauliIndex, key: PauliIndex) -> PauliIndex:
    """Undo the receiver's encryption: ``U_A = U_C U_B`` gives ``B = A - C`` index-wise."""
    if announced.dim != key.dim:
        raise DomainError("dimension mismatch")
    d = key.dim
    return PauliIndex((announced.n - key.n) % d, (announced.m - key.m) % d, d)


def random_index(d: int, rng: RandomStream) -> PauliIndex:
    k = int(rng.integers(d * d))
    return PauliIndex(k // d, k % d, d)


def _index(payload: dict, d: int) -> PauliIndex:
    return PauliIndex(payload["n"], payload["m"], d)


class Party:
    actor = "party"

    def __init__(self, basis_set: BasisSet, rng: RandomStream, transcript: tr.Transcript):
        self.dim = basis_set.dim
        self.basis_set = basis_set
        self.rng = rng
        self.transcript = transcript

    def announce(self, event_type: str, payload: dict) -> tr.Record:
        return self.transcript.log(self.actor, event_type, payload, public=True)

    def note(self, event_type: str, payload: dict) -> tr.Record:
        return self.transcript.log(self.actor, event_type, payload, public=False)


class Server(Party):
    actor = "alice"

    def __init__(self, basis_set, rng, transcript):
        super().__init__(basis_set, rng, transcript)
        self._s_a: PhotonSequence | None = None
        self._returned: list[Photon | None] | None = None

    def prepare(self, n: int) -> list[Photon | None]:
        """Step S1: keep S_A, return S_B for the channel."""
        if n < 1:
            raise ConfigError("need at least one EPR pair")
        self._s_a, s_b = prepare_pairs(self.dim, n)
        self.note("prepare", {"pairs": n})
        return s_b.outgoing()

    @property
    def retained(self) -> PhotonSequence:
        return self._s_a

    def answer_sample_request(self) -> None:
        """Measure each requested partner in a random allowed basis and announce it."""
        request = self.transcript.public(tr.SAMPLE_REQUEST)[-1].payload
        allowed = request["bases"]
        for slot in request["slots"]:
            label = allowed[int(self.rng.integers(len(allowed)))]
            outcome = self._s_a.photon(slot).measure(self.basis_set[label], self.rng)
            self._s_a.consume(slot, "first-check", keep_photon=True)
            self.announce(tr.BASIS_AND_OUTCOME,
                          {"slot": slot, "basis_id": label, "outcome": outcome})

    def note_decoy_reveal(self) -> None:
        # partners of displaced originals take no part in the Bell measurements
        for rec in self.transcript.public(tr.DECOY_REVEAL):
            slot = rec.payload["slot"]
            if isinstance(self._s_a.slots[slot], EntangledHalf):
                self._s_a.consume(slot, "removed", keep_photon=True)

    def receive(self, photons: list[Photon | None]) -> None:
        self._returned = list(photons)

    def bell_measure_and_announce(self) -> list[tr.Record]:
        """Step S6."""
        out = []
        for slot in self._s_a.entangled_slots():
            incoming = self._returned[slot]
            if incoming is None:
                continue
            result = bell_measure_photons(self._s_a.photon(slot), incoming, self.rng)
            self._s_a.consume(slot, "bell-measured")
            out.append(self.announce(tr.BELL_RESULT, {"slot": slot, "n": result.n, "m": result.m}))
        return out


class Receiver(Party):
    actor = "charlie"

    def __init__(self, basis_set, rng, transcript):
        super().__init__(basis_set, rng, transcript)
        self._s_b: PhotonSequence | None = None
        self._pending: list[int] = []
        self._keep: set[int] = set()
        self._key: dict[int, PauliIndex] = {}
        self._decoys: dict[int, Decoy] = {}
        self._maps: dict[int, tuple[int, dict[int, int]]] = {}

    def receive(self, photons: list[Photon | None]) -> None:
        self._s_b = PhotonSequence.received(self.dim, photons)

    def request_samples(self, count: int, bases: Sequence[int] | None = None,
                        keep: int = 0) -> list[int]:
        """Pick ``count`` random live slots and ask the server to measure their partners.

        The last ``keep`` of them (chosen secretly) are not measured by the
        receiver but kept as decoys whose state the announcement reveals.
        """
        live = self._s_b.live()
        if count > len(live):
            raise ConfigError(f"{count} samples requested but only {len(live)} live slots")
        chosen = self.rng.choice(live, size=count, replace=False) if count else []
        self._pending = sorted(int(s) for s in chosen)
        kept = self.rng.choice(self._pending, size=keep, replace=False) if keep else []
        self._keep = {int(s) for s in kept}
        labels = qudit.checkable_labels(self.basis_set) if bases is None else list(bases)
        self.announce(tr.SAMPLE_REQUEST, {"slots": self._pending, "bases": labels})
        return self._pending

    def score_first_check(self, rotate_kept: bool = False) -> tuple[int, int]:
        """Compare own partner measurements with the server's announcements."""
        announced = {r.payload["slot"]: r.payload
                     for r in self.transcript.public(tr.BASIS_AND_OUTCOME)}
        errors = samples = 0
        for slot in self._pending:
            if slot not in announced:
                raise DomainError(f"server did not announce sample slot {slot}")
            a_label, a_outcome = announced[slot]["basis_id"], announced[slot]["outcome"]
            b_label, cmap = self._pairing(a_label)
            expected = cmap[a_outcome]
            if slot in self._keep:
                self._keep_as_decoy(slot, b_label, expected, rotate_kept)
                continue
            outcome = self._s_b.photon(slot).measure(self.basis_set[b_label], self.rng)
            self._s_b.consume(slot, "first-check")
            self.note("first_check_measurement",
                      {"slot": slot, "basis_id": b_label, "outcome": outcome})
            samples += 1
            errors += outcome != expected
        return errors, samples

    def _pairing(self, label: int) -> tuple[int, dict[int, int]]:
        if label not in self._maps:
            partner = qudit.partner_label(self.basis_set, label)
            cmap = qudit.correlation_map(self.basis_set[label], self.dim, self.basis_set[partner])
            self._maps[label] = (partner, cmap)
        return self._maps[label]

    def _keep_as_decoy(self, slot: int, label: int, index: int, rotate: bool) -> None:
        photon = self._s_b.photon(slot)
        target = label
        if rotate:
            target = int(self.rng.integers(len(self.basis_set)))
            rot = self.basis_set[target].to_columns() @ _dagger(self.basis_set[label].to_columns())
            photon.apply(rot)
        decoy = Decoy(target, index)
        self._s_b.replace_with_decoy(slot, decoy, photon)
        self._decoys[slot] = decoy
        self.note("decoy_kept", {"slot": slot, "from_basis": label,
                                 "basis_id": target, "vector_index": index})

    def publish_check(self, check_id: str, errors: int, samples: int,
                      passed: bool, reveal_rate: bool = True) -> None:
        payload = {"check": check_id, "passed": passed}
        if reveal_rate:
            payload.update(errors=errors, samples=samples)
        else:
            self.note("check_tally", {"check": check_id, "errors": errors, "samples": samples})
        self.announce(tr.CHECK_RESULT, payload)

    def encrypt_and_insert_decoys(self, decoy_count: int) -> list[Photon | None]:
        """Step S3 with freshly prepared decoys."""
        entangled = self._s_b.entangled_slots()
        if decoy_count > len(entangled):
            raise ConfigError(f"decoy_count={decoy_count} exceeds {len(entangled)} live slots")
        picked = self.rng.choice(entangled, size=decoy_count, replace=False) if decoy_count else []
        z = self.basis_set[0]
        for slot in sorted(int(s) for s in picked):
            # displaced original: read out in Z_d and discarded
            self._s_b.photon(slot).measure(z, self.rng)
            label = int(self.rng.integers(len(self.basis_set)))
            index = int(self.rng.integers(self.dim))
            decoy = Decoy(label, index)
            self._s_b.replace_with_decoy(slot, decoy,
                                         Photon.standalone(self.basis_set[label].vector(index)))
            self._decoys[slot] = decoy
            self.note("decoy_prepared", {"slot": slot, "basis_id": label, "vector_index": index})
        return self.encrypt()

    def encrypt(self) -> list[Photon | None]:
        for slot in self._s_b.entangled_slots():
            key = random_index(self.dim, self.rng)
            self._s_b.photon(slot).apply(qudit.pauli(key))
            self._key[slot] = key
            self.note("key", {"slot": slot, "n": key.n, "m": key.m})
        return self._s_b.outgoing()

    def reveal_decoys(self) -> None:
        """Step S4(a), only once the sequence is in the sender's hands."""
        for slot in sorted(self._decoys):
            d = self._decoys[slot]
            self.announce(tr.DECOY_REVEAL,
                          {"slot": slot, "basis_id": d.basis_id, "vector_index": d.vector_index})

    def score_final_check(self) -> tuple[int, int]:
        bell = {r.payload["slot"]: _index(r.payload, self.dim)
                for r in self.transcript.public(tr.BELL_RESULT)}
        errors = samples = 0
        for rec in self.transcript.public(tr.CHECK_OP_REVEAL):
            slot = rec.payload["slot"]
            expected, _ = qudit.compose_indices(self._key[slot], _index(rec.payload, self.dim))
            samples += 1
            errors += bell.get(slot) != expected
        return errors, samples

    def decode(self) -> list[PauliIndex]:
        """Step S7 read-out, in slot order."""
        checks = {r.payload["slot"] for r in self.transcript.public(tr.CHECK_OP_REVEAL)}
        out = []
        for rec in sorted(self.transcript.public(tr.BELL_RESULT), key=lambda r: r.payload["slot"]):
            slot = rec.payload["slot"]
            if slot in checks or slot not in self._key:
                continue
            out.append(decode_symbol(_index(rec.payload, self.dim), self._key[slot]))
        return out


class Sender(Party):
    actor = "bob"

    def __init__(self, basis_set, rng, transcript):
        super().__init__(basis_set, rng, transcript)
        self._s_b: PhotonSequence | None = None
        self._check_ops: dict[int, PauliIndex] = {}

    def receive(self, photons: list[Photon | None]) -> None:
        self._s_b = PhotonSequence.received(self.dim, photons)

    def live_slots(self) -> list[int]:
        return self._s_b.live()

    def check_decoys(self) -> tuple[int, int]:
        """Step S4(b-c): measure each revealed decoy in its announced basis."""
        errors = samples = 0
        for rec in self.transcript.public(tr.DECOY_REVEAL):
            slot, label, index = (rec.payload[k] for k in ("slot", "basis_id", "vector_index"))
            outcome = self._s_b.photon(slot).measure(self.basis_set[label], self.rng)
            self._s_b.consume(slot, "decoy-check")
            self.note("decoy_measurement", {"slot": slot, "outcome": outcome})
            samples += 1
            errors += outcome != index
        return errors, samples

    def publish_check(self, check_id: str, errors: int, samples: int, passed: bool) -> None:
        self.announce(tr.CHECK_RESULT,
                      {"check": check_id, "passed": passed, "errors": errors, "samples": samples})

    def encode(self, message: Sequence[PauliIndex], s_e2_count: int) -> list[Photon | None]:
        """Step S5: random check operations on ``s_e2_count`` slots, message on the rest."""
        live = self._s_b.live()
        if s_e2_count > len(live):
            raise ConfigError(f"s_e2_count={s_e2_count} exceeds {len(live)} live slots")
        if len(message) != len(live) - s_e2_count:
            raise DomainError(
                f"message has {len(message)} symbols, {len(live) - s_e2_count} slots available")
        picked = self.rng.choice(live, size=s_e2_count, replace=False) if s_e2_count else []
        check_slots = {int(s) for s in picked}
        symbols = iter(message)
        for slot in live:
            if slot in check_slots:
                op = random_index(self.dim, self.rng)
                self._check_ops[slot] = op
                self.note("check_op", {"slot": slot, "n": op.n, "m": op.m})
            else:
                op = next(symbols)
                if op.dim != self.dim:
                    raise DomainError("message symbol of wrong dimension")
                self.note("message_symbol", {"slot": slot, "n": op.n, "m": op.m})
            self._s_b.photon(slot).apply(qudit.pauli(op))
        return self._s_b.outgoing()

    def reveal_check_ops(self) -> None:
        for slot in sorted(self._check_ops):
            op = self._check_ops[slot]
            self.announce(tr.CHECK_OP_REVEAL, {"slot": slot, "n": op.n, "m": op.m})


def _dagger(u: qudit.Unitary) -> qudit.Unitary:
    return qudit.Unitary(np.conj(u.matrix).T)
