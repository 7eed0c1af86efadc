"""Spin systems and their Hamiltonians.

A :class:`SpinSystem` bundles pairwise dipolar couplings, per-spin chemical
shifts, per-spin disorder fields and a global resonance offset, all in Hz.
Hamiltonian builders return dense matrices in rad/s on the 2**N product
space with the ``|up> = (1, 0)`` single-spin convention and ``S = sigma/2``.

Matrix elements are assembled directly from basis-state bit patterns (spin
``i`` occupies bit ``n - 1 - i``, so spin 0 is the leftmost tensor factor);
the Kronecker-product route is kept only as ``embedded_spin`` for embedding
arbitrary single-site operators and for cross-checks.

Random ensembles use the counter-based Philox generator keyed directly by
the user seed, so samples are reproducible bit-for-bit across runs and
platforms for a fixed NumPy version.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .operators import MAX_SPINS, Operator, kron

__all__ = [
    "SIGMA",
    "SPIN_HALF",
    "DEFAULT_COUPLING_SIGMA_HZ",
    "SpinSystem",
    "spin_operator",
    "embedded_spin",
    "collective_operator",
    "dipolar_hamiltonian",
    "offset_hamiltonian",
    "internal_hamiltonian",
    "dq_hamiltonian",
    "coupling_from_geometry",
    "sample_couplings",
    "sample_disorder",
]

TWO_PI = 2.0 * np.pi

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
SPIN_HALF = {axis: m / 2.0 for axis, m in SIGMA.items()}

# sigma chosen so that 3*sigma = 5000 Hz, the default maximum coupling scale
DEFAULT_COUPLING_SIGMA_HZ = 5000.0 / 3.0


def _bit_table(n_spins: int) -> npt.NDArray[np.int64]:
    """(dim, n) array of basis-state bits; bit 0 means spin up (m = +1/2)."""
    states = np.arange(1 << n_spins, dtype=np.int64)
    shifts = n_spins - 1 - np.arange(n_spins)
    return (states[:, None] >> shifts[None, :]) & 1


def spin_operator(axis: str) -> Operator:
    """Single-spin operator ``S_axis = sigma_axis / 2``."""
    if axis not in SPIN_HALF:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}")
    return SPIN_HALF[axis].copy()


def embedded_spin(n_spins: int, site: int, axis: str) -> Operator:
    """``S_axis`` of one spin embedded in the ``n_spins`` product space."""
    if not 0 <= site < n_spins:
        raise ValueError(f"site {site} outside 0..{n_spins - 1}")
    op = np.eye(1, dtype=np.complex128)
    for k in range(n_spins):
        op = kron(op, spin_operator(axis) if k == site else np.eye(2))
    return op


def collective_operator(n_spins: int, axis: str) -> Operator:
    """Collective spin operator ``sum_i S_axis^i`` on ``n_spins`` spins."""
    if not 1 <= n_spins <= MAX_SPINS:
        raise ValueError(f"n_spins must be in 1..{MAX_SPINS}, got {n_spins}")
    if axis not in SPIN_HALF:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}")
    dim = 1 << n_spins
    bits = _bit_table(n_spins)
    m_values = 0.5 - bits
    out = np.zeros((dim, dim), dtype=np.complex128)
    states = np.arange(dim)
    if axis == "z":
        out[states, states] = m_values.sum(axis=1)
        return out
    for i in range(n_spins):
        flipped = states ^ (1 << (n_spins - 1 - i))
        if axis == "x":
            out[flipped, states] += 0.5
        else:
            # <down|S_y|up> = +i/2, <up|S_y|down> = -i/2
            out[flipped, states] += np.where(bits[:, i] == 0, 0.5j, -0.5j)
    return out


@dataclass(frozen=True)
class SpinSystem:
    """N coupled spins-1/2 with offsets, all input frequencies in Hz.

    Attributes:
        n_spins: number of spins, 2..10.
        couplings_hz: symmetric (n, n) dipolar coupling matrix, zero diagonal.
        chemical_shifts_hz: per-spin chemical shifts delta_i.
        disorder_hz: per-spin local disorder fields h_i.
        global_offset_hz: resonance offset applied to every spin.
    """

    n_spins: int
    couplings_hz: np.ndarray
    chemical_shifts_hz: np.ndarray
    disorder_hz: np.ndarray
    global_offset_hz: float = 0.0

    def __post_init__(self):
        n = self.n_spins
        if not 2 <= n <= MAX_SPINS:
            raise ValueError(f"n_spins must be in 2..{MAX_SPINS}, got {n}")
        d = np.array(self.couplings_hz, dtype=np.float64)
        if d.shape != (n, n):
            raise ValueError(f"couplings must have shape ({n}, {n}), got {d.shape}")
        if not np.allclose(d, d.T, rtol=0.0, atol=1e-9 * max(1.0, np.abs(d).max())):
            raise ValueError("coupling matrix must be symmetric")
        if np.any(np.diag(d) != 0.0):
            raise ValueError("coupling matrix must have zero diagonal")
        d = (d + d.T) / 2.0
        shifts = np.array(self.chemical_shifts_hz, dtype=np.float64)
        disorder = np.array(self.disorder_hz, dtype=np.float64)
        for name, arr in (("chemical_shifts_hz", shifts), ("disorder_hz", disorder)):
            if arr.shape != (n,):
                raise ValueError(f"{name} must have length {n}, got shape {arr.shape}")
        for arr in (d, shifts, disorder):
            arr.flags.writeable = False
        object.__setattr__(self, "couplings_hz", d)
        object.__setattr__(self, "chemical_shifts_hz", shifts)
        object.__setattr__(self, "disorder_hz", disorder)
        object.__setattr__(self, "global_offset_hz", float(self.global_offset_hz))

    @classmethod
    def create(
        cls,
        couplings_hz: npt.ArrayLike,
        chemical_shifts_hz: npt.ArrayLike | None = None,
        disorder_hz: npt.ArrayLike | None = None,
        global_offset_hz: float = 0.0,
    ) -> "SpinSystem":
        """Build a system from a coupling matrix, defaulting offsets to zero."""
        d = np.asarray(couplings_hz, dtype=np.float64)
        n = d.shape[0]
        zeros = np.zeros(n)
        return cls(
            n_spins=n,
            couplings_hz=d,
            chemical_shifts_hz=zeros if chemical_shifts_hz is None else chemical_shifts_hz,
            disorder_hz=zeros if disorder_hz is None else disorder_hz,
            global_offset_hz=global_offset_hz,
        )

    def replace(self, **changes) -> "SpinSystem":
        return dataclasses.replace(self, **changes)

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    @property
    def total_offsets_hz(self) -> np.ndarray:
        """Per-spin a_i = delta_i + h_i + global offset, in Hz."""
        return self.chemical_shifts_hz + self.disorder_hz + self.global_offset_hz

    def to_dict(self) -> dict:
        n = self.n_spins
        iu = np.triu_indices(n, k=1)
        return {
            "n_spins": n,
            "couplings_hz": [float(v) for v in self.couplings_hz[iu]],
            "chemical_shifts_hz": [float(v) for v in self.chemical_shifts_hz],
            "disorder_hz": [float(v) for v in self.disorder_hz],
            "global_offset_hz": float(self.global_offset_hz),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SpinSystem":
        n = int(doc["n_spins"])
        flat = np.asarray(doc["couplings_hz"], dtype=np.float64)
        expected = n * (n - 1) // 2
        if flat.shape != (expected,):
            raise ValueError(
                f"couplings_hz must list the upper triangle row-major "
                f"({expected} values for {n} spins), got {flat.shape}"
            )
        d = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        d[iu] = flat
        d = d + d.T
        return cls(
            n_spins=n,
            couplings_hz=d,
            chemical_shifts_hz=doc.get("chemical_shifts_hz", np.zeros(n)),
            disorder_hz=doc.get("disorder_hz", np.zeros(n)),
            global_offset_hz=doc.get("global_offset_hz", 0.0),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SpinSystem":
        return cls.from_dict(json.loads(text))


def dipolar_hamiltonian(system: SpinSystem) -> Operator:
    """Secular dipolar Hamiltonian in rad/s.

    ``H_D = sum_{i<j} d_ij (3 S_z^i S_z^j - S^i . S^j)``, i.e. per pair
    ``d_ij (2 S_z^i S_z^j - (S_+^i S_-^j + S_-^i S_+^j)/2)``.  Traceless and
    commuting with the total z magnetization.
    """
    n = system.n_spins
    dim = system.dim
    bits = _bit_table(n)
    m_values = 0.5 - bits
    h = np.zeros((dim, dim), dtype=np.complex128)
    diag = np.zeros(dim)
    states = np.arange(dim)
    for i in range(n):
        for j in range(i + 1, n):
            d = TWO_PI * system.couplings_hz[i, j]
            if d == 0.0:
                continue
            diag += 2.0 * d * m_values[:, i] * m_values[:, j]
            mask = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
            src = states[bits[:, i] != bits[:, j]]
            h[src ^ mask, src] += -d / 2.0
    h[states, states] += diag
    return h


def offset_hamiltonian(system: SpinSystem) -> Operator:
    """Diagonal offset Hamiltonian ``sum_i a_i S_z^i`` in rad/s."""
    m_values = 0.5 - _bit_table(system.n_spins)
    a = TWO_PI * system.total_offsets_hz
    return np.diag((m_values * a[None, :]).sum(axis=1)).astype(np.complex128)


def internal_hamiltonian(system: SpinSystem) -> Operator:
    """Full internal Hamiltonian ``H_D + H_offset`` in rad/s."""
    return dipolar_hamiltonian(system) + offset_hamiltonian(system)


def dq_hamiltonian(system: SpinSystem, couplings_hz: npt.ArrayLike | None = None) -> Operator:
    """Double-quantum Hamiltonian in rad/s.

    ``H_DQ = (1/2) sum_{j<k} J_jk (S_x^j S_x^k - S_y^j S_y^k)``; connects
    basis states differing by two units of total z magnetization.  ``J``
    defaults to the system's dipolar couplings.
    """
    n = system.n_spins
    dim = system.dim
    j_matrix = system.couplings_hz if couplings_hz is None else np.asarray(couplings_hz)
    bits = _bit_table(n)
    h = np.zeros((dim, dim), dtype=np.complex128)
    states = np.arange(dim)
    for j in range(n):
        for k in range(j + 1, n):
            val = TWO_PI * j_matrix[j, k] / 4.0
            if val == 0.0:
                continue
            mask = (1 << (n - 1 - j)) | (1 << (n - 1 - k))
            src = states[(bits[:, j] == 1) & (bits[:, k] == 1)]
            h[src ^ mask, src] += val
            h[src, src ^ mask] += val
    return h


def coupling_from_geometry(r: float, theta: float, scale: float = 1.0) -> float:
    """Dipolar coupling from pair geometry: ``scale * (1 - 3 cos^2 theta) / r^3``.

    ``scale`` carries all physical prefactors (gyromagnetic ratios and
    constants) in Hz * m^3; with the default 1.0 the bare angular/radial
    factor is returned.  Vanishes at the magic angle.
    """
    if r <= 0:
        raise ValueError(f"spin-pair distance must be positive, got {r}")
    return scale * (1.0 - 3.0 * np.cos(theta) ** 2) / r**3


def _philox(seed: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    return np.random.Generator(np.random.Philox(key=seed))


def sample_couplings(seed: int, n_spins: int, sigma_hz: float = DEFAULT_COUPLING_SIGMA_HZ) -> np.ndarray:
    """Symmetric coupling matrix with i.i.d. ``N(0, sigma^2)`` upper triangle.

    Entries fill the upper triangle row-major; the draw is a pure function
    of ``seed``.
    """
    if sigma_hz <= 0:
        raise ValueError("sigma_hz must be positive")
    draws = _philox(seed).normal(0.0, sigma_hz, size=n_spins * (n_spins - 1) // 2)
    d = np.zeros((n_spins, n_spins))
    d[np.triu_indices(n_spins, k=1)] = draws
    return d + d.T


def sample_disorder(seed: int, n_spins: int, sigma_hz: float) -> np.ndarray:
    """Per-spin disorder fields ``h_i ~ N(0, sigma_h^2)``, reproducible from seed.

    The unit draw depends only on ``seed``, so sweeping ``sigma_hz`` rescales
    one fixed sample instead of resampling.
    """
    if sigma_hz < 0:
        raise ValueError("sigma_hz must be nonnegative")
    return sigma_hz * _philox(seed).normal(0.0, 1.0, size=n_spins)
