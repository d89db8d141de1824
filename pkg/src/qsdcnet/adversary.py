"""Eavesdroppers: random-MUB intercept-resend and the dishonest server."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from . import qudit
from . import transcript as tr
from .channel import ChannelLeg
from .parties import Server, random_index
from .photons import EntangledHalf, Photon, PhotonSequence, bell_measure_photons, fresh_pair
from .qudit import BasisSet, PauliIndex, RandomStream

EVE = "eve"


@dataclass(frozen=True)
class NoEve:
    kind = "none"


@dataclass(frozen=True)
class InterceptResendMUB:
    legs: frozenset[ChannelLeg] = frozenset({ChannelLeg.CHARLIE_TO_BOB})
    # relay server at which the attack sits; None means the leg entry
    hop: str | None = None
    kind = "intercept_resend"

    def __post_init__(self):
        object.__setattr__(self, "legs", frozenset(ChannelLeg(leg) for leg in self.legs))
        if not self.legs:
            raise ValueError("intercept-resend needs at least one leg")


@dataclass(frozen=True)
class DishonestServer:
    kind = "dishonest_server"


EveStrategy = Union[NoEve, InterceptResendMUB, DishonestServer]


@dataclass
class EveKnowledge:
    dim: int
    guessed_key: list[PauliIndex | None]
    guessed_message: list[PauliIndex | None]
    confidence: list[float]
    observations: list[dict] = field(default_factory=list)

    @classmethod
    def blank(cls, n_slots: int, dim: int) -> EveKnowledge:
        return cls(dim, [None] * n_slots, [None] * n_slots, [1.0 / dim ** 2] * n_slots)


def intercept_resend_mub(photons: list[Photon | None], basis_set: BasisSet,
                         rng: RandomStream) -> tuple[list[Photon | None], list[dict]]:
    """Measure every photon in a uniformly random basis of the set, resend the eigenstate."""
    forwarded: list[Photon | None] = []
    seen = []
    for slot, photon in enumerate(photons):
        if photon is None:
            forwarded.append(None)
            continue
        label = int(rng.integers(len(basis_set)))
        outcome = photon.measure(basis_set[label], rng)
        forwarded.append(Photon.standalone(basis_set[label].vector(outcome)))
        seen.append({"slot": slot, "basis_id": label, "outcome": outcome})
    return forwarded, seen


class InterceptResendAttack:
    def __init__(self, basis_set: BasisSet, rng: RandomStream, knowledge: EveKnowledge):
        self.basis_set = basis_set
        self.rng = rng
        self.knowledge = knowledge

    def intercept(self, photons, leg, transcript):
        forwarded, seen = intercept_resend_mub(photons, self.basis_set, self.rng)
        for obs in seen:
            transcript.log(EVE, "intercept", {"leg": leg.value, **obs}, public=False)
            self.knowledge.observations.append({"leg": leg.value, **obs})
        return forwarded


def dishonest_server_attack(retained: PhotonSequence, intercepted: list[Photon | None],
                            rng: RandomStream) -> tuple[list[Photon | None], list[PauliIndex | None],
                                                        dict[int, Photon]]:
    """Bell-measure each intercepted photon with the retained partner and forward a fresh half.

    Returns the substitute photons, the learned key index per slot, and the
    kept halves of the fresh pairs (read out again when the photons return).
    Decoys cannot be told apart, so every slot is treated the same way.
    """
    key: list[PauliIndex | None] = [None] * len(intercepted)
    kept: dict[int, Photon] = {}
    out: list[Photon | None] = []
    for slot, photon in enumerate(intercepted):
        if photon is None:
            out.append(None)
            continue
        key[slot] = bell_measure_photons(retained.photons[slot], photon, rng)
        a, b = fresh_pair(retained.dim)
        kept[slot] = a
        out.append(b)
    return out, key, kept


class MaliciousServer(Server):
    """The server acting as eavesdropper on the Charlie-to-Bob leg.

    She knows S_A and hears every announcement. On the return leg she reads
    Bob's operation from her fresh pairs and announces it combined with the
    key she learned, so the final check sees what an honest run would.
    """

    def __init__(self, basis_set, rng, transcript, eve_rng: RandomStream):
        super().__init__(basis_set, rng, transcript)
        self.eve_rng = eve_rng
        self.knowledge: EveKnowledge | None = None
        self._kept: dict[int, Photon] = {}

    def prepare(self, n: int):
        out = super().prepare(n)
        self.knowledge = EveKnowledge.blank(n, self.dim)
        return out

    def intercept(self, photons, leg, transcript):
        out, key, self._kept = dishonest_server_attack(self.retained, photons, self.eve_rng)
        for slot, guess in enumerate(key):
            if guess is None:
                continue
            self.knowledge.guessed_key[slot] = guess
            self.knowledge.confidence[slot] = 1.0
            transcript.log(EVE, "key_guess", {"slot": slot, "n": guess.n, "m": guess.m},
                           public=False)
        return out

    def bell_measure_and_announce(self):
        out = []
        for slot, incoming in enumerate(self._returned):
            if incoming is None or slot not in self._kept:
                continue
            if not isinstance(self.retained.slots[slot], EntangledHalf):
                continue
            bob_op = bell_measure_photons(self._kept[slot], incoming, self.eve_rng)
            self.knowledge.guessed_message[slot] = bob_op
            self.transcript.log(EVE, "message_guess", {"slot": slot, "n": bob_op.n, "m": bob_op.m},
                                public=False)
            announced, _ = qudit.compose_indices(self.knowledge.guessed_key[slot], bob_op)
            self.retained.consume(slot, "bell-measured")
            out.append(self.announce(tr.BELL_RESULT,
                                     {"slot": slot, "n": announced.n, "m": announced.m}))
        return out


def eve_report(knowledge: EveKnowledge | None, key_truth: dict[int, PauliIndex],
               message_truth: dict[int, PauliIndex], rng: RandomStream) -> dict:
    """Fraction of slots where Eve's guess matches the truth.

    Slots without a guess are filled with a uniform random guess, so an
    attacker who learned nothing scores about ``1/d**2``.
    """
    def rate(guesses, truth):
        if not truth:
            return None
        hits = 0
        for slot in sorted(truth):
            real = truth[slot]
            guess = guesses[slot] if guesses is not None else None
            if guess is None:
                guess = random_index(real.dim, rng)
            hits += guess == real
        return hits / len(truth)

    return {
        "key_recovery_rate": rate(knowledge.guessed_key if knowledge else None, key_truth),
        "message_recovery_rate": rate(knowledge.guessed_message if knowledge else None,
                                      message_truth),
    }
