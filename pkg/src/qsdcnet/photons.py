"""Photons in flight and the per-party slot ledgers of the ordered sequences.

A :class:`Photon` is either one half of an :class:`EntangledPair` or a
standalone qudit. A pair stays a joint two-qudit state until one half is
measured locally, after which both halves carry their own pure state; no
cross-pair Hilbert space ever exists.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from . import qudit
from .errors import DomainError, ProtocolOrderError
from .qudit import Basis, PairState, PauliIndex, QuditState, RandomStream, Unitary


class EntangledPair:
    __slots__ = ("dim", "joint", "halves")

    def __init__(self, state: PairState):
        self.dim = state.dim
        self.joint: PairState | None = state
        self.halves: dict[str, QuditState] | None = None

    @property
    def entangled(self) -> bool:
        return self.joint is not None

    def split(self, side: str, measured: QuditState, partner: QuditState) -> None:
        other = "A" if side == "B" else "B"
        self.joint = None
        self.halves = {side: measured, other: partner}


class Photon:
    """One qudit. Mutable: it is the physical object handed between parties."""

    __slots__ = ("pair", "side", "_state", "destroyed")

    def __init__(self, pair: EntangledPair | None = None, side: str = "B",
                 state: QuditState | None = None):
        if (pair is None) == (state is None):
            raise DomainError("photon needs exactly one of pair or state")
        self.pair = pair
        self.side = side
        self._state = state
        self.destroyed = False

    @classmethod
    def standalone(cls, state: QuditState) -> Photon:
        return cls(state=state)

    @property
    def dim(self) -> int:
        return self.pair.dim if self.pair is not None else self._state.dim

    @property
    def entangled(self) -> bool:
        return self.pair is not None and self.pair.entangled

    def _alive(self) -> None:
        if self.destroyed:
            raise ProtocolOrderError("photon already destroyed by a joint measurement")

    def local_state(self) -> QuditState:
        self._alive()
        if self.pair is None:
            return self._state
        if self.pair.entangled:
            raise DomainError("photon is entangled; it has no local pure state")
        return self.pair.halves[self.side]

    def apply(self, u: Unitary) -> None:
        self._alive()
        if self.pair is None:
            self._state = u.apply(self._state)
        elif self.pair.entangled:
            op = qudit.apply_to_photon_b if self.side == "B" else qudit.apply_to_photon_a
            self.pair.joint = op(self.pair.joint, u)
        else:
            self.pair.halves[self.side] = u.apply(self.pair.halves[self.side])

    def measure(self, basis: Basis, rng: RandomStream) -> int:
        """Projective measurement; the photon is left in the outcome eigenstate."""
        self._alive()
        if self.entangled:
            k, partner = qudit.measure_pair_local(self.pair.joint, self.side, basis, rng)
            self.pair.split(self.side, basis.vector(k), partner)
            return k
        k, collapsed = qudit.measure_single(self.local_state(), basis, rng)
        if self.pair is None:
            self._state = collapsed
        else:
            self.pair.halves[self.side] = collapsed
        return k


def fresh_pair(dim: int) -> tuple[Photon, Photon]:
    pair = EntangledPair(qudit.make_bell_state(0, 0, dim))
    return Photon(pair, "A"), Photon(pair, "B")


def bell_measure_photons(a: Photon, b: Photon, rng: RandomStream) -> PauliIndex:
    """Joint Bell measurement of photon ``a`` (first factor) with ``b``; destroys both."""
    a._alive()
    b._alive()
    if a.pair is not None and a.pair is b.pair and a.pair.entangled:
        if a.side != "A":
            raise DomainError("first photon must be the A half of its pair")
        state = a.pair.joint
    else:
        state = PairState.product(a.local_state(), b.local_state())
    result = qudit.bell_measure(state, rng)
    a.destroyed = b.destroyed = True
    return result


# -- slot ledger ---------------------------------------------------------------

@dataclass(frozen=True)
class EntangledHalf:
    pair_id: int


@dataclass(frozen=True)
class Decoy:
    basis_id: int
    vector_index: int


CONSUMED_REASONS = ("first-check", "decoy-check", "bell-measured", "removed")


@dataclass(frozen=True)
class Consumed:
    reason: str

    def __post_init__(self):
        if self.reason not in CONSUMED_REASONS:
            raise DomainError(f"unknown consume reason {self.reason!r}")


SlotState = Union[EntangledHalf, Decoy, Consumed]


class PhotonSequence:
    """An ordered sequence of slots as seen by its current holder.

    ``slots`` is the holder's private ledger; ``photons`` is what physically
    sits in each slot (``None`` once a photon has left the sequence).
    """

    def __init__(self, dim: int, slots: list[SlotState], photons: list[Photon | None]):
        if len(slots) != len(photons):
            raise DomainError("slots and photons must have equal length")
        self.dim = dim
        self.slots = list(slots)
        self.photons = list(photons)

    @classmethod
    def received(cls, dim: int, photons: list[Photon | None]) -> PhotonSequence:
        """Ledger of a party that cannot tell decoys from entangled halves."""
        slots = [EntangledHalf(i) if p is not None else Consumed("removed")
                 for i, p in enumerate(photons)]
        return cls(dim, slots, photons)

    def __len__(self) -> int:
        return len(self.slots)

    def live(self) -> list[int]:
        return [i for i, s in enumerate(self.slots) if not isinstance(s, Consumed)]

    def entangled_slots(self) -> list[int]:
        return [i for i, s in enumerate(self.slots) if isinstance(s, EntangledHalf)]

    def photon(self, i: int) -> Photon:
        if isinstance(self.slots[i], Consumed) or self.photons[i] is None:
            raise ProtocolOrderError(f"slot {i} is already consumed")
        return self.photons[i]

    def replace_with_decoy(self, i: int, decoy: Decoy, photon: Photon) -> None:
        if not isinstance(self.slots[i], EntangledHalf):
            raise ProtocolOrderError(f"slot {i} cannot take a decoy from state {self.slots[i]}")
        self.slots[i] = decoy
        self.photons[i] = photon

    def consume(self, i: int, reason: str, keep_photon: bool = False) -> Photon | None:
        if isinstance(self.slots[i], Consumed):
            raise ProtocolOrderError(f"slot {i} consumed twice")
        self.slots[i] = Consumed(reason)
        photon = self.photons[i]
        if not keep_photon:
            self.photons[i] = None
        return photon

    def outgoing(self) -> list[Photon | None]:
        """Photons handed to the quantum channel; consumed slots travel empty."""
        return [None if isinstance(s, Consumed) else p for s, p in zip(self.slots, self.photons)]


def prepare_pairs(dim: int, n: int) -> tuple[PhotonSequence, PhotonSequence]:
    """``n`` pairs in ``Psi_00``; slot ``i`` of both sequences holds pair ``i``."""
    halves = [fresh_pair(dim) for _ in range(n)]
    s_a = PhotonSequence(dim, [EntangledHalf(i) for i in range(n)], [a for a, _ in halves])
    s_b = PhotonSequence(dim, [EntangledHalf(i) for i in range(n)], [b for _, b in halves])
    return s_a, s_b
