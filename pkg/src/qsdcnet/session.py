"""One QSDC subsystem session: server Alice, receiver Charlie, sender Bob.

Steps S1-S7 run in order; a check whose error rate exceeds ``epsilon_t``
aborts the session and later steps are skipped. The transcript holds every
channel event, public announcement and party-private record, and
:func:`replay_transcript` recomputes the result from it alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import qudit
from . import transcript as tr
from .adversary import (
    DishonestServer,
    EveKnowledge,
    EveStrategy,
    InterceptResendAttack,
    InterceptResendMUB,
    MaliciousServer,
    NoEve,
)
from .channel import ChannelLeg, QuantumChannel
from .errors import ConfigError
from .parties import Receiver, Sender, Server, decode_symbol, random_index
from .photons import PhotonSequence, prepare_pairs
from .qudit import PauliIndex
from .stats import Decision, RateEstimate, abort_decision, estimate_rate

FIRST_CHECK = "first_check"
DECOY_CHECK = "decoy_check"
FINAL_CHECK = "final_check"
CHECKS = (FIRST_CHECK, DECOY_CHECK, FINAL_CHECK)

COMPLETED = "completed"
ABORTED = "aborted"

MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True)
class FreshDecoys:
    kind = "fresh"


@dataclass(frozen=True)
class ByMeasurement:
    """Decoys made from first-check samples: ``n1`` are checked, ``n2`` kept as decoys."""

    n1: int
    n2: int
    rotate: bool = True
    kind = "by_measurement"


DecoySource = Union[FreshDecoys, ByMeasurement]


@dataclass(frozen=True)
class SessionConfig:
    d: int = 2
    M: int = 2
    N: int = 256
    p_check: float = 0.25
    decoy_count: int | None = None   # default ceil(0.1 N)
    s_e2_count: int | None = None    # default ceil(0.1 N)
    epsilon_t: float = 0.05
    decoy_source: DecoySource = field(default_factory=FreshDecoys)
    eve: EveStrategy = field(default_factory=NoEve)
    seed: int = 0

    def __post_init__(self):
        if self.decoy_count is None:
            object.__setattr__(self, "decoy_count", math.ceil(0.1 * self.N))
        if self.s_e2_count is None:
            object.__setattr__(self, "s_e2_count", math.ceil(0.1 * self.N))
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.N, int) or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N!r}")
        if not (0.0 <= self.p_check < 1.0):
            raise ConfigError(f"p_check must lie in [0, 1), got {self.p_check!r}")
        if not (0.0 < self.epsilon_t < 1.0):
            raise ConfigError(f"epsilon_t must lie in (0, 1), got {self.epsilon_t!r}")
        if not (0 <= self.seed <= MAX_SEED):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in ("decoy_count", "s_e2_count"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if isinstance(self.decoy_source, ByMeasurement):
            if self.decoy_source.n2 != self.decoy_count:
                raise ConfigError("by-measurement decoys need n2 == decoy_count")
            if self.decoy_source.n1 < 0:
                raise ConfigError("n1 must be non-negative")
        qudit.builtin_basis_set(self.d, self.M)
        if self.n_first_check + self.decoy_count + self.s_e2_count >= self.N:
            raise ConfigError(
                f"checks use {self.n_first_check}+{self.decoy_count}+{self.s_e2_count} "
                f"of {self.N} pairs; no room left for a message")

    @property
    def n_first_check(self) -> int:
        if isinstance(self.decoy_source, ByMeasurement):
            return self.decoy_source.n1
        return math.ceil(self.p_check * self.N)

    @property
    def message_length(self) -> int:
        return self.N - self.n_first_check - self.decoy_count - self.s_e2_count

    def to_dict(self) -> dict:
        src = self.decoy_source
        eve = self.eve
        return {
            "d": self.d,
            "m_bases": self.M,
            "n_pairs": self.N,
            "p_check": self.p_check,
            "decoy_count": self.decoy_count,
            "s_e2_count": self.s_e2_count,
            "epsilon_t": self.epsilon_t,
            "decoy_source": ("fresh" if isinstance(src, FreshDecoys) else
                             {"kind": src.kind, "n1": src.n1, "n2": src.n2, "rotate": src.rotate}),
            "eve": {"kind": eve.kind,
                    "legs": sorted(leg.value for leg in getattr(eve, "legs", ())),
                    "hop": getattr(eve, "hop", None)},
            "seed": self.seed,
        }


@dataclass
class SessionResult:
    status: str
    aborted_at: str | None
    decoded_message: list[PauliIndex]
    checks: dict[str, RateEstimate | None]
    transcript: tr.Transcript
    config: SessionConfig
    eve_knowledge: EveKnowledge | None = None

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED

    @property
    def error_rates(self) -> dict[str, float | None]:
        return {k: (v.rate if v is not None else None) for k, v in self.checks.items()}

    @property
    def capacity_bits(self) -> float:
        """Bits delivered: ``2 log2 d`` per decoded symbol."""
        return len(self.decoded_message) * 2 * math.log2(self.config.d)

    def sent_message(self) -> list[PauliIndex]:
        return [PauliIndex(r.payload["n"], r.payload["m"], self.config.d)
                for r in self.transcript.select("bob", "message_symbol")]

    def message_slots(self) -> list[int]:
        return [r.payload["slot"] for r in self.transcript.select("bob", "message_symbol")]

    def key(self) -> dict[int, PauliIndex]:
        return {r.payload["slot"]: PauliIndex(r.payload["n"], r.payload["m"], self.config.d)
                for r in self.transcript.select("charlie", "key")}

    def summary(self) -> dict:
        """Result without the transcript, in a JSON-ready shape."""
        return {
            "status": self.status,
            "aborted_at": self.aborted_at,
            "checks": {k: (v.to_dict() if v is not None else None) for k, v in self.checks.items()},
            "decoded_message": [p.as_list() for p in self.decoded_message],
            "capacity_bits": self.capacity_bits,
        }


def _estimate(errors: int, samples: int) -> RateEstimate:
    # a check with no samples is vacuous and reports rate 0
    if samples == 0:
        return RateEstimate(0, 0, 0.0, (0.0, 0.0))
    return estimate_rate(errors, samples)


# -- steps --------------------------------------------------------------------

def prepare_sequences(config: SessionConfig) -> tuple[PhotonSequence, PhotonSequence]:
    """Step S1 on its own: ``N`` pairs in ``Psi_00`` split into S_A and S_B."""
    if config.N < 1:
        raise ConfigError("N must be positive")
    return prepare_pairs(config.d, config.N)


def first_check(alice: Server, charlie: Receiver, n_samples: int) -> RateEstimate:
    """Step S2: the server measures random samples in random bases; the receiver compares."""
    charlie.request_samples(n_samples)
    alice.answer_sample_request()
    errors, samples = charlie.score_first_check()
    return _estimate(errors, samples)


def decoys_by_measurement(alice: Server, charlie: Receiver, n1: int, n2: int,
                          rotate: bool = True) -> RateEstimate:
    """Step S2 variant: of ``n1 + n2`` server-measured samples, ``n2`` become decoys.

    The server uses only ``Z_d`` and ``X_d``. The receiver publishes pass/fail only.
    """
    bases = list(range(min(2, len(charlie.basis_set))))
    charlie.request_samples(n1 + n2, bases=bases, keep=n2)
    alice.answer_sample_request()
    errors, samples = charlie.score_first_check(rotate_kept=rotate)
    return _estimate(errors, samples)


def encrypt_and_insert_decoys(charlie: Receiver, config: SessionConfig):
    """Step S3."""
    if isinstance(config.decoy_source, ByMeasurement):
        return charlie.encrypt()
    return charlie.encrypt_and_insert_decoys(config.decoy_count)


def decoy_check(bob: Sender, charlie: Receiver) -> RateEstimate:
    """Step S4: reveal decoys after delivery; the sender measures them."""
    charlie.reveal_decoys()
    errors, samples = bob.check_decoys()
    return _estimate(errors, samples)


def encode_message(bob: Sender, message: Sequence[PauliIndex], config: SessionConfig):
    """Step S5."""
    return bob.encode(message, config.s_e2_count)


def server_bell_measure(alice: Server) -> list[tr.Record]:
    """Step S6."""
    return alice.bell_measure_and_announce()


def final_check_and_decode(charlie: Receiver, bob: Sender) -> tuple[RateEstimate, list[PauliIndex]]:
    """Step S7: score the sender's check slots, then decode the rest."""
    bob.reveal_check_ops()
    errors, samples = charlie.score_final_check()
    return _estimate(errors, samples), charlie.decode()


# -- orchestration ------------------------------------------------------------

def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("alice", "charlie", "bob", "eve")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


def _gate(check_id, estimate, epsilon_t, publisher, transcript, **publish_opts) -> bool:
    passed = abort_decision(estimate, epsilon_t) is Decision.CONTINUE
    publisher.publish_check(check_id, estimate.errors, estimate.samples, passed, **publish_opts)
    if not passed:
        transcript.log(publisher.actor, tr.ABORT_NOTICE, {"check": check_id, "rate": estimate.rate})
    return passed


def run_session(config: SessionConfig, message: Sequence[PauliIndex] | None = None,
                hops: dict[ChannelLeg, list[str]] | None = None) -> SessionResult:
    """Run S1-S7 once. Deterministic given ``config.seed``.

    ``message`` defaults to uniformly random symbols drawn by the sender.
    ``hops`` names pass-through relays per leg (see :mod:`qsdcnet.netsim`).
    """
    config.validate()
    rngs = _streams(config.seed)
    transcript = tr.Transcript()
    basis_set = qudit.builtin_basis_set(config.d, config.M)
    channel = QuantumChannel(transcript, hops)
    eve = config.eve
    knowledge = None

    if isinstance(eve, DishonestServer):
        alice: Server = MaliciousServer(basis_set, rngs["alice"], transcript, rngs["eve"])
        channel.attach(ChannelLeg.CHARLIE_TO_BOB, alice)
    else:
        alice = Server(basis_set, rngs["alice"], transcript)
    charlie = Receiver(basis_set, rngs["charlie"], transcript)
    bob = Sender(basis_set, rngs["bob"], transcript)

    if message is None:
        message = [random_index(config.d, rngs["bob"]) for _ in range(config.message_length)]
    message = list(message)
    if len(message) != config.message_length:
        raise ConfigError(f"message must have {config.message_length} symbols, got {len(message)}")

    checks: dict[str, RateEstimate | None] = dict.fromkeys(CHECKS)

    def result(status, at=None, decoded=()):
        if isinstance(alice, MaliciousServer):
            k = alice.knowledge
        else:
            k = knowledge
        return SessionResult(status, at, list(decoded), checks, transcript, config, k)

    # S1
    s_b = alice.prepare(config.N)
    if isinstance(eve, InterceptResendMUB):
        knowledge = EveKnowledge.blank(config.N, config.d)
        attack = InterceptResendAttack(basis_set, rngs["eve"], knowledge)
        for leg in sorted(eve.legs, key=list(ChannelLeg).index):
            if eve.hop is not None and eve.hop not in channel.hops[leg]:
                raise ConfigError(f"relay {eve.hop!r} is not on leg {leg.value}")
            channel.attach(leg, attack, hop=eve.hop)
    charlie.receive(channel.transmit(s_b, ChannelLeg.ALICE_TO_CHARLIE))

    # S2
    src = config.decoy_source
    if isinstance(src, ByMeasurement):
        checks[FIRST_CHECK] = decoys_by_measurement(alice, charlie, src.n1, src.n2, src.rotate)
        ok = _gate(FIRST_CHECK, checks[FIRST_CHECK], config.epsilon_t, charlie, transcript,
                   reveal_rate=False)
    else:
        checks[FIRST_CHECK] = first_check(alice, charlie, config.n_first_check)
        ok = _gate(FIRST_CHECK, checks[FIRST_CHECK], config.epsilon_t, charlie, transcript)
    if not ok:
        return result(ABORTED, FIRST_CHECK)

    # S3, S4
    s_b = encrypt_and_insert_decoys(charlie, config)
    bob.receive(channel.transmit(s_b, ChannelLeg.CHARLIE_TO_BOB))
    checks[DECOY_CHECK] = decoy_check(bob, charlie)
    alice.note_decoy_reveal()
    if not _gate(DECOY_CHECK, checks[DECOY_CHECK], config.epsilon_t, bob, transcript):
        return result(ABORTED, DECOY_CHECK)

    # S5, S6
    s_b = encode_message(bob, message, config)
    alice.receive(channel.transmit(s_b, ChannelLeg.BOB_TO_ALICE))
    server_bell_measure(alice)

    # S7
    checks[FINAL_CHECK], decoded = final_check_and_decode(charlie, bob)
    if not _gate(FINAL_CHECK, checks[FINAL_CHECK], config.epsilon_t, charlie, transcript):
        return result(ABORTED, FINAL_CHECK)
    return result(COMPLETED, None, decoded)


# -- replay -------------------------------------------------------------------

def replay_transcript(transcript: tr.Transcript, config: SessionConfig) -> SessionResult:
    """Recompute checks, status and decoded message from transcript records only."""
    d = config.d
    basis_set = qudit.builtin_basis_set(d, config.M)
    idx = lambda p: PauliIndex(p["n"], p["m"], d)  # noqa: E731
    ran = {r.payload["check"] for r in transcript.public(tr.CHECK_RESULT)}
    checks: dict[str, RateEstimate | None] = dict.fromkeys(CHECKS)

    if FIRST_CHECK in ran:
        alice_said = {r.payload["slot"]: r.payload for r in transcript.public(tr.BASIS_AND_OUTCOME)}
        errors = samples = 0
        for rec in transcript.select("charlie", "first_check_measurement"):
            p = rec.payload
            a = alice_said[p["slot"]]
            cmap = qudit.correlation_map(basis_set[a["basis_id"]], d, basis_set[p["basis_id"]])
            samples += 1
            errors += p["outcome"] != cmap[a["outcome"]]
        checks[FIRST_CHECK] = _estimate(errors, samples)

    if DECOY_CHECK in ran:
        revealed = {r.payload["slot"]: r.payload["vector_index"]
                    for r in transcript.public(tr.DECOY_REVEAL)}
        seen = transcript.select("bob", "decoy_measurement")
        errors = sum(r.payload["outcome"] != revealed[r.payload["slot"]] for r in seen)
        checks[DECOY_CHECK] = _estimate(errors, len(seen))

    decoded: list[PauliIndex] = []
    if FINAL_CHECK in ran:
        key = {r.payload["slot"]: idx(r.payload) for r in transcript.select("charlie", "key")}
        bell = {r.payload["slot"]: idx(r.payload) for r in transcript.public(tr.BELL_RESULT)}
        ops = {r.payload["slot"]: idx(r.payload) for r in transcript.public(tr.CHECK_OP_REVEAL)}
        errors = sum(bell.get(s) != qudit.compose_indices(key[s], op)[0] for s, op in ops.items())
        checks[FINAL_CHECK] = _estimate(errors, len(ops))
        decoded = [decode_symbol(bell[s], key[s]) for s in sorted(bell)
                   if s not in ops and s in key]

    status, at = COMPLETED, None
    for check in CHECKS:
        est = checks[check]
        if est is not None and abort_decision(est, config.epsilon_t) is Decision.ABORT:
            status, at = ABORTED, check
            break
    if status == ABORTED:
        decoded = []
    return SessionResult(status, at, decoded, checks, transcript, config)
