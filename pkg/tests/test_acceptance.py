"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""
import itertools
import json
import math
import time

import numpy as np
import pytest

from qsdcnet import cli, qudit, stats
from qsdcnet.adversary import DishonestServer, InterceptResendMUB, eve_report
from qsdcnet.channel import ChannelLeg
from qsdcnet.qudit import PauliIndex
from qsdcnet.session import DECOY_CHECK, SessionConfig, run_session

from oracles import bell_oracle, global_phase, hadamard_oracle

TOL = 1e-10
CTOB = frozenset({ChannelLeg.CHARLIE_TO_BOB})


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}")
        assert ok, detail
    return emit


def _decoy_session(d, M, decoys, seed):
    cfg = SessionConfig(d=d, M=M, N=decoys + 1000, p_check=0.02, decoy_count=decoys,
                        s_e2_count=100, eve=InterceptResendMUB(CTOB), seed=seed)
    return run_session(cfg).checks[DECOY_CHECK]


def test_c1_intercept_resend_headline(verdict):
    start = time.perf_counter()
    est = _decoy_session(3, 4, 20_000, seed=2024)
    elapsed = time.perf_counter() - start
    ok = est.samples >= 20_000 and abs(est.rate - 0.50) <= 0.011 and elapsed < 10
    verdict(1, "d=3 M=4 intercept-resend decoy error 0.50 +/- 0.011", ok,
            f"{est.errors}/{est.samples} = {est.rate:.4f} in {elapsed:.1f}s")


def test_c2_formula_sweep(verdict):
    expected = {(2, 2): 0.25, (2, 3): 1 / 3, (3, 2): 1 / 3, (3, 4): 0.5}
    parts, ok = [], True
    for (d, M), p in expected.items():
        assert stats.theoretical_eve_error_rate(d, M) == pytest.approx(p)
        est = _decoy_session(d, M, 10_000, seed=100 + 10 * d + M)
        z = (est.rate - p) / stats.binomial_sigma(p, est.samples)
        ok &= est.samples >= 10_000 and abs(z) <= 3
        parts.append(f"({d},{M}) {est.rate:.4f} vs {p:.4f} z={z:+.2f}")
    verdict(2, "(d,M) sweep within 3 sigma at 10k samples", ok, "; ".join(parts))


def test_c3_honest_end_to_end(verdict):
    bad, runs = [], 0
    for d in (2, 3):
        for M in (2, qudit.max_builtin_bases(d)):
            for seed in range(100):
                r = run_session(SessionConfig(d=d, M=M, N=256, seed=seed))
                runs += 1
                clean = r.completed and all(est.errors == 0 for est in r.checks.values())
                if not (clean and r.decoded_message == r.sent_message()):
                    bad.append((d, M, seed))
    verdict(3, "honest sessions complete with zero errors and exact decode", not bad,
            f"{runs - len(bad)}/{runs} clean" + (f", failures {bad[:5]}" if bad else ""))


def test_c4_algebraic_identities(verdict):
    worst = 0.0
    for d in (2, 3, 4, 5):
        psi00 = qudit.make_bell_state(0, 0, d)
        for n, m in itertools.product(range(d), repeat=2):
            got = qudit.apply_to_photon_b(psi00, qudit.pauli_unitary(n, m, d)).amps
            worst = max(worst, np.max(np.abs(got - bell_oracle(n, m, d))))
        h = qudit.hadamard_matrix(d).matrix
        worst = max(worst, np.max(np.abs(h - hadamard_oracle(d))))
        for j in range(d):
            x_j = np.exp(2j * np.pi * j * np.arange(d) / d) / np.sqrt(d)
            worst = max(worst, np.max(np.abs(h @ np.eye(d)[j] - x_j)))
    for d in range(2, 8):
        for M in range(2, qudit.max_builtin_bases(d) + 1):
            bases = qudit.builtin_basis_set(d, M).bases
            for a, b in itertools.combinations(bases, 2):
                ov = np.abs(a.vectors.conj() @ b.vectors.T) ** 2
                worst = max(worst, np.max(np.abs(ov - 1 / d)))
    verdict(4, "Bell, Hadamard and MUB identities within 1e-10", worst <= TOL,
            f"max deviation {worst:.1e}")


def test_c5_composition_oracle(verdict):
    checked = mismatched = 0
    for d in (2, 3, 5):
        idx = [PauliIndex(n, m, d) for n in range(d) for m in range(d)]
        for a, b in itertools.product(idx, repeat=2):
            got, phase = qudit.compose_indices(a, b)
            prod = qudit.pauli_unitary(b.n, b.m, d).matrix @ qudit.pauli_unitary(a.n, a.m, d).matrix
            c = global_phase(prod, qudit.pauli_unitary(got.n, got.m, d).matrix)
            checked += 1
            mismatched += c is None or abs(c - phase) > TOL
    verdict(5, "compose_indices equals explicit products up to phase", mismatched == 0,
            f"{checked} ordered pairs over d in {{2,3,5}}, {mismatched} mismatches")


def test_c6_dishonest_server_dichotomy(verdict):
    open_runs = [run_session(SessionConfig(d=3, M=4, N=128, decoy_count=0,
                                           eve=DishonestServer(), seed=s)) for s in range(100)]
    silent = all(r.completed and all(e.errors == 0 for e in r.checks.values()) for r in open_runs)
    key_rates = [eve_report(r.eve_knowledge, r.key(), {}, np.random.default_rng(0))["key_recovery_rate"]
                 for r in open_runs]
    guarded = [run_session(SessionConfig(d=3, M=4, N=256, decoy_count=32,
                                         eve=DishonestServer(), seed=s)) for s in range(100)]
    caught = sum(r.aborted_at == DECOY_CHECK for r in guarded)
    bound = stats.detection_probability((3 - 1) / 3, 32)
    ok = silent and min(key_rates) == 1.0 and caught >= 99
    verdict(6, "dishonest server: invisible without decoys, caught with 32", ok,
            f"no decoys: silent={silent}, min key recovery {min(key_rates)}; "
            f"32 decoys: {caught}/100 aborted at decoy check (single-error bound {bound:.12f})")


def test_c7_capacity_bookkeeping(verdict):
    parts, ok = [], True
    for d in (2, 3, 4):
        r = run_session(SessionConfig(d=d, M=2, N=256, seed=d))
        slots = r.config.message_length
        symbols = len(r.decoded_message)
        ok &= r.completed and symbols == slots and r.capacity_bits == slots * 2 * math.log2(d)
        parts.append(f"d={d}: {symbols}/{slots} symbols, {r.capacity_bits:.3f} bits")
    verdict(7, "completed session carries 2 log2 d bits per message slot", ok, "; ".join(parts))


def test_c8_determinism(verdict, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d": 3, "m_bases": 4, "n_pairs": 256, "trials": 3, "seed": 99,
                               "eve": {"kind": "intercept_resend", "legs": ["charlie_to_bob"]}}))
    outputs = []
    for run in ("a", "b"):
        out, tx = tmp_path / f"{run}.json", tmp_path / f"tx_{run}"
        assert cli.main(["run", "--config", str(cfg), "--out", str(out),
                         "--transcripts", str(tx)]) == 0
        outputs.append((out.read_bytes(), {p.name: p.read_bytes() for p in sorted(tx.iterdir())}))
    (rep_a, tx_a), (rep_b, tx_b) = outputs
    ok = rep_a == rep_b and tx_a == tx_b and len(tx_a) == 3
    verdict(8, "same config and seed give byte-identical report and transcripts", ok,
            f"report {len(rep_a)} bytes, {len(tx_a)} transcripts compared")
