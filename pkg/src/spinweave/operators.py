"""Dense complex operator algebra on small spin-1/2 Hilbert spaces.

Conventions used throughout the package:

* Hamiltonians are Hermitian matrices in angular-frequency units (rad/s),
  with hbar = 1.  User-facing frequencies are given in Hz and multiplied by
  2*pi at module boundaries.
* Propagators are unitary and dimensionless; evolution under a Hamiltonian
  ``h`` for time ``t`` is ``exp(-i h t)``.
* Everything is dense ``complex128``.  Dimensions are powers of two up to
  ``2**MAX_SPINS``; matrix exponentials and roots go through exact
  eigendecompositions, which at these sizes is both precise and cheap, and
  lets a single factorization serve repeated evolution times.
"""

from __future__ import annotations

import warnings

import numpy as np
import numpy.typing as npt
import scipy.linalg

Operator = npt.NDArray[np.complex128]

MAX_SPINS = 10
MAX_DIM = 2**MAX_SPINS

__all__ = [
    "Operator",
    "MAX_SPINS",
    "MAX_DIM",
    "BranchCutWarning",
    "as_operator",
    "kron",
    "commutator",
    "dagger",
    "hermiticity_defect",
    "unitarity_defect",
    "require_hermitian",
    "require_unitary",
    "expm_hermitian",
    "HermitianPropagator",
    "unitary_eigenphases",
    "unitary_root",
    "frobenius_magnitude",
    "spectral_norm",
]


class BranchCutWarning(UserWarning):
    """A unitary eigenphase lies within tolerance of the +/-pi branch cut."""


def as_operator(a: npt.ArrayLike) -> Operator:
    """Coerce ``a`` to a square complex matrix on a power-of-two dimension."""
    m = np.ascontiguousarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {m.shape}")
    dim = m.shape[0]
    if dim < 1 or dim > MAX_DIM or (dim & (dim - 1)) != 0:
        raise ValueError(
            f"operator dimension must be a power of two <= {MAX_DIM}, got {dim}"
        )
    return m


def kron(a: npt.ArrayLike, b: npt.ArrayLike) -> Operator:
    """Tensor product of two square operators (dimension ``dim(a) * dim(b)``)."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("kron requires two square matrices")
    return np.kron(a, b)


def commutator(a: npt.ArrayLike, b: npt.ArrayLike) -> Operator:
    return np.asarray(a) @ np.asarray(b) - np.asarray(b) @ np.asarray(a)


def dagger(a: npt.ArrayLike) -> Operator:
    return np.asarray(a).conj().T


def hermiticity_defect(h: npt.ArrayLike) -> float:
    """Relative Frobenius-norm asymmetry ``|h - h^dag| / |h|`` (0 for h = 0)."""
    h = np.asarray(h)
    scale = np.linalg.norm(h)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(h - h.conj().T) / scale)


def unitarity_defect(u: npt.ArrayLike) -> float:
    """Frobenius norm of ``u^dag u - I`` normalized by ``sqrt(dim)``."""
    u = np.asarray(u)
    dim = u.shape[0]
    return float(np.linalg.norm(u.conj().T @ u - np.eye(dim)) / np.sqrt(dim))


def require_hermitian(h: npt.ArrayLike, tol: float = 1e-10) -> Operator:
    h = as_operator(h)
    defect = hermiticity_defect(h)
    if defect > tol:
        raise ValueError(f"matrix is not Hermitian (relative asymmetry {defect:.3e})")
    return h


def require_unitary(u: npt.ArrayLike, tol: float = 1e-10) -> Operator:
    u = as_operator(u)
    defect = unitarity_defect(u)
    if defect > tol:
        raise ValueError(f"matrix is not unitary (defect {defect:.3e})")
    return u


def expm_hermitian(h: npt.ArrayLike, t: float) -> Operator:
    """Unitary propagator ``exp(-i h t)`` of a Hermitian generator.

    Computed by eigendecomposition of ``h``, so the result is exact up to
    roundoff for any ``t``.  Inputs with relative asymmetry above 1e-10 are
    rejected.
    """
    return HermitianPropagator(h).at(t)


class HermitianPropagator:
    """Factory for ``exp(-i h t)`` reusing a single eigendecomposition of ``h``.

    Useful when the same Hamiltonian generates propagators for many delays,
    e.g. every free-evolution window of a pulse cycle.
    """

    def __init__(self, h: npt.ArrayLike, tol: float = 1e-10):
        h = require_hermitian(h, tol)
        # eigh of the Hermitian average removes the O(tol) asymmetry
        self._w, self._v = np.linalg.eigh((h + h.conj().T) / 2.0)

    @property
    def eigenvalues(self) -> npt.NDArray[np.float64]:
        return self._w

    def at(self, t: float) -> Operator:
        phases = np.exp(-1j * self._w * t)
        return (self._v * phases) @ self._v.conj().T


def unitary_eigenphases(
    u: npt.ArrayLike, tol: float = 1e-10
) -> tuple[npt.NDArray[np.float64], Operator]:
    """Eigenphases and unitary eigenbasis of a unitary matrix.

    Returns ``(theta, q)`` with ``u = q diag(exp(i theta)) q^dag`` and
    ``theta`` in ``(-pi, pi]``.  Uses a complex Schur decomposition: for a
    unitary (normal) input the Schur factor is diagonal up to roundoff, and
    ``q`` is exactly unitary, which keeps reconstruction errors at machine
    level even for high matrix powers.
    """
    u = require_unitary(u, tol)
    t, q = scipy.linalg.schur(u, output="complex")
    dim = u.shape[0]
    diag = np.diag(t).copy()
    offdiag = np.linalg.norm(t - np.diag(diag)) / np.sqrt(dim)
    if offdiag > 1e3 * tol:
        raise ValueError(
            f"Schur factor of claimed-unitary input is not diagonal (residual {offdiag:.3e})"
        )
    theta = np.angle(diag)
    theta[theta <= -np.pi] = np.pi
    return theta, q


def unitary_root(u: npt.ArrayLike, m: int, branch_tol: float = 1e-9) -> Operator:
    """Principal ``m``-th root of a unitary matrix.

    Each eigenvalue ``exp(i theta)`` with ``theta`` in ``(-pi, pi]`` maps to
    ``exp(i theta / m)``.  Eigenphases within ``branch_tol`` of the branch
    cut at ``pi`` are ambiguous; they are computed with the ``theta = pi``
    convention and reported through a :class:`BranchCutWarning`.
    """
    if m < 1 or int(m) != m:
        raise ValueError(f"root order must be a positive integer, got {m}")
    u = as_operator(u)
    if m == 1:
        require_unitary(u)
        return u.copy()
    theta, q = unitary_eigenphases(u)
    near_cut = np.abs(np.pi - np.abs(theta)) < branch_tol
    if np.any(near_cut):
        warnings.warn(
            f"{int(near_cut.sum())} eigenphase(s) within {branch_tol:g} of the "
            "branch cut at pi; principal root may be discontinuous here",
            BranchCutWarning,
            stacklevel=2,
        )
    return (q * np.exp(1j * theta / m)) @ q.conj().T


def frobenius_magnitude(h: npt.ArrayLike) -> float:
    """``sqrt(Tr(h^dag h))``, the Frobenius size measure used for Hamiltonian terms.

    For Hermitian ``h`` this equals ``sqrt(Tr(h h))``.  Callers comparing
    effective-Hamiltonian terms normalize by the same measure of the bare
    dipolar Hamiltonian.
    """
    return float(np.linalg.norm(np.asarray(h)))


def spectral_norm(h: npt.ArrayLike) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    h = require_hermitian(h)
    if h.shape[0] == 0:
        return 0.0
    w = np.linalg.eigvalsh((h + h.conj().T) / 2.0)
    return float(np.max(np.abs(w))) if w.size else 0.0
