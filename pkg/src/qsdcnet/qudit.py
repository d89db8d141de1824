"""Amplitude-level simulation of single qudits and qudit pairs.

Every EPR pair is simulated as an isolated two-qudit pure state (``d**2``
amplitudes, row-major ``index = j_A * d + j_B``); single photons are ``d``
amplitudes. All value types are immutable; randomness always comes from an
explicit :class:`numpy.random.Generator`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from .errors import CapabilityError, DomainError

ALGEBRA_TOL = 1e-10
# Born probabilities below this are treated as exact zeros before sampling.
_PROB_FLOOR = 1e-12

RandomStream = np.random.Generator
Photon = Literal["A", "B"]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


def _check_dim(d: int) -> None:
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {d!r}")


def omega(d: int) -> complex:
    return complex(np.exp(2j * np.pi / d))


@dataclass(frozen=True, eq=False)
class QuditState:
    amps: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amps)
        if amps.ndim != 1 or amps.size < 2:
            raise DomainError("qudit state needs a 1-d amplitude vector of length >= 2")
        if not np.all(np.isfinite(amps)):
            raise DomainError("non-finite amplitude")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ALGEBRA_TOL:
            raise DomainError(f"state not normalised (|psi|^2 = {norm!r})")
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return self.amps.size

    @classmethod
    def basis_ket(cls, j: int, d: int) -> QuditState:
        v = np.zeros(d, dtype=np.complex128)
        v[j] = 1.0
        return cls(v)

    def fidelity(self, other: QuditState) -> float:
        """``|<self|other>|^2``; 1 means equal up to global phase."""
        return float(abs(np.vdot(self.amps, other.amps)) ** 2)

    def same_ray(self, other: QuditState, tol: float = ALGEBRA_TOL) -> bool:
        return self.dim == other.dim and abs(1.0 - self.fidelity(other)) <= tol


@dataclass(frozen=True, eq=False)
class PairState:
    dim: int
    amps: np.ndarray

    def __post_init__(self):
        _check_dim(self.dim)
        amps = _frozen(self.amps)
        if amps.shape != (self.dim * self.dim,):
            raise DomainError(f"pair state of dim {self.dim} needs {self.dim ** 2} amplitudes")
        if not np.all(np.isfinite(amps)):
            raise DomainError("non-finite amplitude")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ALGEBRA_TOL:
            raise DomainError(f"state not normalised (|psi|^2 = {norm!r})")
        object.__setattr__(self, "amps", amps)

    @classmethod
    def product(cls, a: QuditState, b: QuditState) -> PairState:
        if a.dim != b.dim:
            raise DomainError("product of qudits with different dimensions")
        return cls(a.dim, np.kron(a.amps, b.amps))

    def matrix(self) -> np.ndarray:
        """Amplitudes as a ``d x d`` array indexed ``[j_A, j_B]``."""
        return self.amps.reshape(self.dim, self.dim)

    def same_ray(self, other: PairState, tol: float = ALGEBRA_TOL) -> bool:
        if self.dim != other.dim:
            return False
        return abs(1.0 - abs(np.vdot(self.amps, other.amps)) ** 2) <= tol

    def allclose(self, other: PairState, tol: float = ALGEBRA_TOL) -> bool:
        return self.dim == other.dim and bool(np.max(np.abs(self.amps - other.amps)) <= tol)


@dataclass(frozen=True, order=True)
class PauliIndex:
    """Label ``(n, m)`` of the operator ``U_nm``; also a Bell outcome or message symbol."""

    n: int
    m: int
    dim: int

    def __post_init__(self):
        _check_dim(self.dim)
        if not (0 <= self.n < self.dim and 0 <= self.m < self.dim):
            raise DomainError(f"index ({self.n}, {self.m}) out of range for d={self.dim}")

    def as_list(self) -> list[int]:
        return [int(self.n), int(self.m)]


@dataclass(frozen=True, eq=False)
class Unitary:
    matrix: np.ndarray

    def __post_init__(self):
        u = _frozen(self.matrix)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise DomainError("unitary must be a square matrix")
        if not np.all(np.isfinite(u)):
            raise DomainError("non-finite matrix entry")
        if np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))) > ALGEBRA_TOL:
            raise DomainError("matrix is not unitary")
        object.__setattr__(self, "matrix", u)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: Unitary) -> Unitary:
        return Unitary(self.matrix @ other.matrix)

    def apply(self, state: QuditState) -> QuditState:
        if state.dim != self.dim:
            raise DomainError("dimension mismatch")
        return QuditState(self.matrix @ state.amps)


@dataclass(frozen=True, eq=False)
class Basis:
    """Orthonormal measurement basis; row ``k`` of ``vectors`` is basis vector ``k``."""

    label: int
    vectors: np.ndarray

    def __post_init__(self):
        v = _frozen(self.vectors)
        d = v.shape[0]
        if v.shape != (d, d):
            raise DomainError("basis needs d vectors of length d")
        if np.max(np.abs(v.conj() @ v.T - np.eye(d))) > ALGEBRA_TOL:
            raise DomainError(f"basis {self.label} is not orthonormal")
        object.__setattr__(self, "vectors", v)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def vector(self, k: int) -> QuditState:
        return QuditState(self.vectors[k])

    def to_columns(self) -> Unitary:
        """Unitary mapping ``|k>`` to basis vector ``k``."""
        return Unitary(self.vectors.T)


@dataclass(frozen=True, eq=False)
class BasisSet:
    bases: tuple[Basis, ...]

    def __post_init__(self):
        bases = tuple(self.bases)
        if not bases:
            raise DomainError("basis set is empty")
        d = bases[0].dim
        if any(b.dim != d for b in bases):
            raise DomainError("bases of mixed dimension")
        if len(bases) > d + 1:
            raise DomainError(f"at most {d + 1} mutually unbiased bases exist for d={d}")
        for i, a in enumerate(bases):
            for b in bases[i + 1:]:
                overlaps = np.abs(a.vectors.conj() @ b.vectors.T) ** 2
                if np.max(np.abs(overlaps - 1.0 / d)) > ALGEBRA_TOL:
                    raise DomainError(f"bases {a.label} and {b.label} are not mutually unbiased")
        object.__setattr__(self, "bases", bases)

    @property
    def dim(self) -> int:
        return self.bases[0].dim

    def __len__(self) -> int:
        return len(self.bases)

    def __getitem__(self, label: int) -> Basis:
        return self.bases[label]


# -- constructors -------------------------------------------------------------

def make_bell_state(n: int, m: int, d: int) -> PairState:
    """``|Psi_nm> = sum_j w^(jn)/sqrt(d) |j>_A |j+m>_B``."""
    _check_dim(d)
    PauliIndex(n, m, d)
    return PairState(d, _bell_matrix(d)[:, n * d + m])


@lru_cache(maxsize=None)
def _bell_matrix(d: int) -> np.ndarray:
    # column n*d + m holds |Psi_nm>
    cols = np.zeros((d * d, d * d), dtype=np.complex128)
    w = omega(d)
    for n in range(d):
        for m in range(d):
            for j in range(d):
                cols[j * d + (j + m) % d, n * d + m] = w ** (j * n) / np.sqrt(d)
    cols.setflags(write=False)
    return cols


def pauli_unitary(n: int, m: int, d: int) -> Unitary:
    """``U_nm = sum_j w^(jn) |j+m mod d><j|`` (shift ``m`` after phase ``n``)."""
    _check_dim(d)
    PauliIndex(n, m, d)
    return _pauli_cached(int(n), int(m), int(d))


@lru_cache(maxsize=4096)
def _pauli_cached(n: int, m: int, d: int) -> Unitary:
    u = np.zeros((d, d), dtype=np.complex128)
    w = omega(d)
    for j in range(d):
        u[(j + m) % d, j] = w ** (j * n)
    return Unitary(u)


def pauli(index: PauliIndex) -> Unitary:
    return pauli_unitary(index.n, index.m, index.dim)


def compose_indices(first: PauliIndex, second: PauliIndex) -> tuple[PauliIndex, complex]:
    """Index and phase of ``U_second @ U_first`` (``first`` acts on the photon first).

    ``U_{n2 m2} U_{n1 m1} = w^(m1 n2) U_{n1+n2, m1+m2}``.
    """
    if first.dim != second.dim:
        raise DomainError("cannot compose indices of different dimensions")
    d = first.dim
    idx = PauliIndex((first.n + second.n) % d, (first.m + second.m) % d, d)
    return idx, omega(d) ** ((first.m * second.n) % d)


def hadamard_matrix(d: int) -> Unitary:
    _check_dim(d)
    return _hadamard_cached(int(d))


@lru_cache(maxsize=None)
def _hadamard_cached(d: int) -> Unitary:
    k, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    return Unitary(np.exp(2j * np.pi * j * k / d) / np.sqrt(d))


def apply_to_photon_b(pair: PairState, u: Unitary) -> PairState:
    """``(I (x) U) |pair>``."""
    if pair.dim != u.dim:
        raise DomainError("dimension mismatch between pair and unitary")
    return PairState(pair.dim, (pair.matrix() @ u.matrix.T).reshape(-1))


def apply_to_photon_a(pair: PairState, u: Unitary) -> PairState:
    if pair.dim != u.dim:
        raise DomainError("dimension mismatch between pair and unitary")
    return PairState(pair.dim, (u.matrix @ pair.matrix()).reshape(-1))


# -- bases --------------------------------------------------------------------

def _z_basis(d: int) -> np.ndarray:
    return np.eye(d, dtype=np.complex128)


def _x_basis(d: int) -> np.ndarray:
    # |l>_x = H_d |l> is column l of H_d
    return hadamard_matrix(d).matrix.T.copy()


def _builtin_vectors(d: int) -> list[np.ndarray]:
    out = [_z_basis(d), _x_basis(d)]
    if d == 2:
        out.append(np.array([[1, 1j], [1, -1j]]) / np.sqrt(2))
    elif d == 3:
        w = omega(3)
        for phase in (w, w.conjugate()):
            # phase on |0>, then cycled onto |1>, then |2>
            out.append((np.ones((3, 3)) + (phase - 1) * np.eye(3)) / np.sqrt(3))
    return out


def max_builtin_bases(d: int) -> int:
    _check_dim(d)
    return {2: 3, 3: 4}.get(int(d), 2)


def builtin_basis_set(d: int, M: int) -> BasisSet:
    """The first ``M`` built-in bases: ``[Z_d, X_d]``, plus Y for d=2 and the two cyclic bases for d=3."""
    _check_dim(d)
    limit = max_builtin_bases(d)
    if not (1 <= M <= limit):
        raise CapabilityError(
            f"no built-in set of {M} bases for d={d}; supported: M<=2 for any d>=2, "
            "M<=3 for d=2, M<=4 for d=3"
        )
    return _basis_set_cached(int(d), int(M))


@lru_cache(maxsize=None)
def _basis_set_cached(d: int, M: int) -> BasisSet:
    vecs = _builtin_vectors(d)[:M]
    return BasisSet(tuple(Basis(i, v) for i, v in enumerate(vecs)))


# -- measurement --------------------------------------------------------------

def _sample(probs: np.ndarray, rng: RandomStream) -> int:
    p = np.where(probs < _PROB_FLOOR, 0.0, probs)
    return int(rng.choice(p.size, p=p / p.sum()))


def born_probabilities(state: QuditState, basis: Basis) -> np.ndarray:
    if state.dim != basis.dim:
        raise DomainError("dimension mismatch between state and basis")
    return np.abs(basis.vectors.conj() @ state.amps) ** 2


def measure_single(state: QuditState, basis: Basis, rng: RandomStream) -> tuple[int, QuditState]:
    k = _sample(born_probabilities(state, basis), rng)
    return k, basis.vector(k)


def measure_pair_local(
    pair: PairState, photon: Photon, basis: Basis, rng: RandomStream
) -> tuple[int, QuditState]:
    """Measure one photon of ``pair`` in ``basis``.

    Returns the outcome and the conditional state of the *other* photon; the
    measured photon itself is left in basis vector ``outcome``.
    """
    if pair.dim != basis.dim:
        raise DomainError("dimension mismatch between pair and basis")
    psi = pair.matrix()
    if photon == "A":
        cond = basis.vectors.conj() @ psi  # row k: unnormalised partner state on B
    elif photon == "B":
        cond = basis.vectors.conj() @ psi.T
    else:
        raise DomainError(f"photon must be 'A' or 'B', got {photon!r}")
    probs = np.sum(np.abs(cond) ** 2, axis=1)
    k = _sample(probs, rng)
    return k, QuditState(cond[k] / np.sqrt(probs[k]))


def bell_probabilities(pair: PairState) -> np.ndarray:
    """Probabilities of ``(n, m)`` outcomes, flattened as ``n * d + m``."""
    return np.abs(_bell_matrix(pair.dim).conj().T @ pair.amps) ** 2


def bell_measure(pair: PairState, rng: RandomStream) -> PauliIndex:
    d = pair.dim
    k = _sample(bell_probabilities(pair), rng)
    return PauliIndex(k // d, k % d, d)


def correlation_map(basis: Basis, d: int, partner: Basis | None = None) -> dict[int, int] | None:
    """Outcome pairing when photon A of ``Psi_00`` is measured in ``basis`` and B in ``partner``.

    Found by expanding ``Psi_00`` in the product basis. Returns ``None`` unless
    every A outcome fixes the B outcome with certainty.
    """
    partner = basis if partner is None else partner
    if basis.dim != d or partner.dim != d:
        raise DomainError("dimension mismatch")
    psi00 = make_bell_state(0, 0, d).amps
    joint = np.empty((d, d))
    for k in range(d):
        for j in range(d):
            joint[k, j] = abs(np.vdot(np.kron(basis.vectors[k], partner.vectors[j]), psi00)) ** 2
    mapping = {}
    for k in range(d):
        row = joint[k] / joint[k].sum()
        hits = np.flatnonzero(row > 1 - ALGEBRA_TOL)
        if hits.size != 1:
            return None
        mapping[k] = int(hits[0])
    if len(set(mapping.values())) != d:
        return None
    return mapping


def partner_label(basis_set: BasisSet, label: int) -> int:
    """Basis in which photon B must be read so it tracks an A-measurement in ``label``.

    The same basis is preferred; for bases not closed under complex conjugation
    (the cyclic pair at d=3) this is the conjugate basis.
    """
    d = basis_set.dim
    a = basis_set[label]
    if correlation_map(a, d) is not None:
        return label
    for b in basis_set.bases:
        if correlation_map(a, d, b) is not None:
            return b.label
    raise CapabilityError(f"basis {label} has no correlated partner in this set")


def checkable_labels(basis_set: BasisSet) -> list[int]:
    """Bases usable for an entanglement check: their partner basis is in the set too."""
    out = []
    for b in basis_set.bases:
        try:
            partner_label(basis_set, b.label)
        except CapabilityError:
            continue
        out.append(b.label)
    return out
