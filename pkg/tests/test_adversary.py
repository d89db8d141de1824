import numpy as np
import pytest

from qsdcnet import qudit, stats
from qsdcnet.adversary import (
    DishonestServer,
    EveKnowledge,
    InterceptResendMUB,
    NoEve,
    dishonest_server_attack,
    eve_report,
    intercept_resend_mub,
)
from qsdcnet.channel import ChannelLeg
from qsdcnet.photons import Photon, prepare_pairs
from qsdcnet.qudit import PauliIndex
from qsdcnet.session import DECOY_CHECK, FIRST_CHECK, SessionConfig, run_session


def _decoy_error_rate(d, M, n, seed):
    """Intercept-resend on standalone decoys, scored against the prepared state."""
    rng = np.random.default_rng(seed)
    bs = qudit.builtin_basis_set(d, M)
    labels = rng.integers(M, size=n)
    ks = rng.integers(d, size=n)
    photons = [Photon.standalone(bs[int(a)].vector(int(k))) for a, k in zip(labels, ks)]
    forwarded, seen = intercept_resend_mub(photons, bs, rng)
    assert len(seen) == n
    errs = sum(p.measure(bs[int(a)], rng) != k for p, a, k in zip(forwarded, labels, ks))
    return errs / n


@pytest.mark.parametrize("d,M", [(2, 2), (2, 3), (3, 2), (3, 4), (5, 2)])
def test_intercept_resend_primitive_matches_formula(d, M):
    n = 6000
    p = stats.theoretical_eve_error_rate(d, M)
    got = _decoy_error_rate(d, M, n, seed=d * 10 + M)
    assert abs(got - p) <= 4 * stats.binomial_sigma(p, n)


def test_intercept_skips_empty_slots(rng):
    bs = qudit.builtin_basis_set(2, 2)
    out, seen = intercept_resend_mub([None, Photon.standalone(bs[0].vector(0))], bs, rng)
    assert out[0] is None and [s["slot"] for s in seen] == [1]


def test_dishonest_primitive_learns_key(rng):
    d = 3
    s_a, s_b = prepare_pairs(d, 9)
    truth = []
    for i in range(9):
        k = PauliIndex(i // 3, i % 3, d)
        s_b.photons[i].apply(qudit.pauli(k))
        truth.append(k)
    out, key, kept = dishonest_server_attack(s_a, s_b.outgoing(), rng)
    assert key == truth
    assert all(p.entangled for p in out) and set(kept) == set(range(9))


def test_dishonest_server_without_decoys_is_invisible():
    cfg = SessionConfig(d=3, M=4, N=128, decoy_count=0, eve=DishonestServer(), seed=3)
    r = run_session(cfg)
    assert r.completed and all(est.errors == 0 for est in r.checks.values())
    truth_msg = dict(zip(r.message_slots(), r.sent_message()))
    rep = eve_report(r.eve_knowledge, r.key(), truth_msg, np.random.default_rng(0))
    assert rep == {"key_recovery_rate": 1.0, "message_recovery_rate": 1.0}


def test_dishonest_server_with_decoys_is_caught():
    cfg = SessionConfig(d=3, M=4, N=256, decoy_count=32, eve=DishonestServer(), seed=3)
    r = run_session(cfg)
    assert r.aborted_at == DECOY_CHECK
    # substituted half of a fresh pair reads uniformly in any basis
    assert r.checks[DECOY_CHECK].rate == pytest.approx(2 / 3, abs=0.3)


@pytest.mark.parametrize("d", [2, 3])
def test_blank_knowledge_scores_chance(d):
    n = 10_000
    truth = {i: PauliIndex(i % d, (i // d) % d, d) for i in range(n)}
    rep = eve_report(EveKnowledge.blank(n, d), truth, truth, np.random.default_rng(d))
    p = 1 / d ** 2
    for rate in rep.values():
        assert abs(rate - p) <= 3 * stats.binomial_sigma(p, n)
    assert eve_report(None, truth, {}, np.random.default_rng(0))["message_recovery_rate"] is None


def test_intercept_on_first_leg_is_caught_by_first_check():
    eve = InterceptResendMUB(frozenset({ChannelLeg.ALICE_TO_CHARLIE}))
    r = run_session(SessionConfig(d=2, M=2, N=256, eve=eve, seed=5))
    assert r.aborted_at == FIRST_CHECK
    assert r.transcript.select("eve", "intercept")
    assert not [x for x in r.transcript.select("eve") if x.public]


def test_strategy_kinds_and_validation():
    assert NoEve().kind == "none"
    assert DishonestServer().kind == "dishonest_server"
    assert InterceptResendMUB(frozenset({"bob_to_alice"})).legs == {ChannelLeg.BOB_TO_ALICE}
    with pytest.raises(ValueError):
        InterceptResendMUB(frozenset())
