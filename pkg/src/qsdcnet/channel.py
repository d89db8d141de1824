"""Lossless quantum channel legs with optional interceptors and relay hops."""
from __future__ import annotations

from enum import Enum
from typing import Protocol

from . import transcript as tr
from .errors import ProtocolOrderError
from .photons import Photon


class ChannelLeg(str, Enum):
    ALICE_TO_CHARLIE = "alice_to_charlie"
    CHARLIE_TO_BOB = "charlie_to_bob"
    BOB_TO_ALICE = "bob_to_alice"


class Interceptor(Protocol):
    def intercept(self, photons: list[Photon | None], leg: ChannelLeg,
                  transcript: tr.Transcript) -> list[Photon | None]:
        ...


class QuantumChannel:
    """Carries S_B once over each leg.

    ``hops`` lists the pass-through relay servers on each leg, in travel
    order. An interceptor attached with ``hop=None`` acts at the leg entry.
    """

    def __init__(self, transcript: tr.Transcript, hops: dict[ChannelLeg, list[str]] | None = None):
        self.transcript = transcript
        self.hops = {leg: list((hops or {}).get(leg, [])) for leg in ChannelLeg}
        self._taps: list[tuple[ChannelLeg, str | None, Interceptor]] = []
        self._used: set[ChannelLeg] = set()

    def attach(self, leg: ChannelLeg, interceptor: Interceptor, hop: str | None = None) -> None:
        if hop is not None and hop not in self.hops[leg]:
            raise ValueError(f"{hop!r} is not a relay on leg {leg.value}")
        self._taps.append((leg, hop, interceptor))

    def _run_taps(self, photons, leg, hop):
        for tap_leg, tap_hop, interceptor in self._taps:
            if tap_leg is leg and tap_hop == hop:
                photons = interceptor.intercept(photons, leg, self.transcript)
        return photons

    def transmit(self, photons: list[Photon | None], leg: ChannelLeg) -> list[Photon | None]:
        if leg in self._used:
            raise ProtocolOrderError(f"leg {leg.value} already carried the sequence")
        self._used.add(leg)
        n = sum(p is not None for p in photons)
        self.transcript.log("channel", tr.TRANSMIT, {"leg": leg.value, "photons": n})
        photons = self._run_taps(list(photons), leg, None)
        for relay in self.hops[leg]:
            self.transcript.log(f"relay:{relay}", tr.HOP, {"leg": leg.value, "relay": relay})
            photons = self._run_taps(photons, leg, relay)
        self.transcript.log("channel", tr.DELIVER, {"leg": leg.value})
        return photons
