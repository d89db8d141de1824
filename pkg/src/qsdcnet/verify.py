"""Built-in invariant suite behind ``qsdcnet verify``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import qudit
from .qudit import ALGEBRA_TOL


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _bell_identity(dims=(2, 3, 4, 5)) -> Check:
    worst = 0.0
    for d in dims:
        psi00 = qudit.make_bell_state(0, 0, d)
        for n in range(d):
            for m in range(d):
                got = qudit.apply_to_photon_b(psi00, qudit.pauli_unitary(n, m, d))
                worst = max(worst, float(np.max(np.abs(got.amps - qudit.make_bell_state(n, m, d).amps))))
    return Check("bell_identity (I x U_nm)|Psi_00> = |Psi_nm>, d<=5", worst <= ALGEBRA_TOL,
                 f"max deviation {worst:.2e}")


def _hadamard_rows(hadamard: Callable[[int], np.ndarray], dims=(2, 3, 4, 5)) -> Check:
    worst = 0.0
    for d in dims:
        h = hadamard(d)
        for j in range(d):
            x_j = np.exp(2j * np.pi * j * np.arange(d) / d) / np.sqrt(d)
            worst = max(worst, float(np.max(np.abs(h[:, j] - x_j))))
    return Check("hadamard H_d|j> = |j>_x, d<=5", worst <= ALGEBRA_TOL, f"max deviation {worst:.2e}")


def _unbiasedness(hadamard: Callable[[int], np.ndarray]) -> Check:
    worst = 0.0
    for d in (2, 3, 4, 5):
        for M in range(2, qudit.max_builtin_bases(d) + 1):
            raw = [b.vectors for b in qudit.builtin_basis_set(d, M).bases]
            raw[1] = hadamard(d).T
            for i in range(M):
                for j in range(i + 1, M):
                    ov = np.abs(raw[i].conj() @ raw[j].T) ** 2
                    worst = max(worst, float(np.max(np.abs(ov - 1.0 / d))))
    return Check("mub_unbiasedness |<a|b>|^2 = 1/d for all built-in sets", worst <= ALGEBRA_TOL,
                 f"max deviation {worst:.2e}")


def _composition(dims=(2, 3, 5)) -> Check:
    bad = 0
    for d in dims:
        pairs = [(n, m) for n in range(d) for m in range(d)]
        for n1, m1 in pairs:
            for n2, m2 in pairs:
                idx, phase = qudit.compose_indices(qudit.PauliIndex(n1, m1, d), qudit.PauliIndex(n2, m2, d))
                prod = qudit.pauli_unitary(n2, m2, d).matrix @ qudit.pauli_unitary(n1, m1, d).matrix
                bad += not np.allclose(prod, phase * qudit.pauli(idx).matrix, atol=ALGEBRA_TOL)
    return Check("composition U2 U1 = phase * U_(i1+i2), d in {2,3,5}", bad == 0, f"{bad} mismatches")


def _honest_end_to_end() -> Check:
    from .session import SessionConfig, run_session

    failures = []
    for d in (2, 3):
        for M in (2, qudit.max_builtin_bases(d)):
            r = run_session(SessionConfig(d=d, M=M, N=128, seed=7))
            if not (r.completed and all(v == 0 for v in r.error_rates.values())
                    and r.decoded_message == r.sent_message()):
                failures.append(f"d={d},M={M}")
    return Check("honest_end_to_end zero errors and intact message", not failures,
                 ", ".join(failures) or "4 configurations")


def _perturbed_hadamard(d: int) -> np.ndarray:
    # unitary but no longer unbiased against Z_d
    h = qudit.hadamard_matrix(d).matrix.copy()
    t = 0.05
    rot = np.eye(d, dtype=complex)
    rot[:2, :2] = [[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]]
    return h @ rot


FAULTS = {"hadamard": _perturbed_hadamard}


def run_verify(fault: str | None = None) -> list[Check]:
    """Run every property; ``fault`` injects a known defect as a negative control."""
    hadamard = FAULTS[fault] if fault else (lambda d: qudit.hadamard_matrix(d).matrix)
    return [
        _bell_identity(),
        _hadamard_rows(hadamard),
        _unbiasedness(hadamard),
        _composition(),
        _honest_end_to_end(),
    ]
