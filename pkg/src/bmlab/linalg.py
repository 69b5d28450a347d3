"""Small dense Hermitian linear algebra for d <= 8.

Eigendecomposition is a cyclic Jacobi sweep specialized to complex
Hermitian matrices: at these sizes it is simple, deterministic, and
accurate far beyond what the estimators need.  Fractional powers
A^alpha go through the eigenbasis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NumericError(RuntimeError):
    """A numeric contract was violated (non-Hermitian input, lost PD-ness, ...)."""


@dataclass(frozen=True)
class NumericPolicy:
    """Central record of the numeric tolerances used across the package."""

    hermitian_tol: float = 1e-10       # relative asymmetry allowed in inputs
    eig_residual_tol: float = 1e-12    # relative reconstruction residual
    jacobi_off_tol: float = 1e-15      # relative off-diagonal mass at convergence
    jacobi_max_sweeps: int = 60
    pd_clip_floor: float = 1e-14       # eigenvalues below floor*lambda_max are an error
    power_roundtrip_tol: float = 1e-10
    inverse_tol: float = 1e-10


DEFAULT_POLICY = NumericPolicy()


@dataclass
class EigenPair:
    """Ascending eigenvalues and the unitary diagonalizing basis."""

    eigenvalues: np.ndarray
    basis: np.ndarray


def _as_complex_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericError(f"expected a square matrix, got shape {a.shape}")
    return a


def hermitian_residual(a) -> float:
    """Relative deviation ||A - A*|| / ||A|| (Frobenius)."""
    a = _as_complex_matrix(a)
    denom = np.linalg.norm(a)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(a - a.conj().T) / denom)


def assert_hermitian(a, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    a = _as_complex_matrix(a)
    res = hermitian_residual(a)
    if res > policy.hermitian_tol:
        raise NumericError(f"matrix is not Hermitian: relative residual {res:.3e}")
    return 0.5 * (a + a.conj().T)


def hermitian_eig(a, policy: NumericPolicy = DEFAULT_POLICY) -> EigenPair:
    """Diagonalize a Hermitian matrix by cyclic Jacobi rotations.

    Returns eigenvalues sorted ascending with the matching unitary basis,
    so that A = U diag(lam) U*.  Raises NumericError if the input is not
    Hermitian within tolerance or the sweep cap is hit.
    """
    a = assert_hermitian(a, policy)
    d = a.shape[0]
    u = np.eye(d, dtype=complex)
    if d == 1:
        return EigenPair(np.array([a[0, 0].real]), u)

    scale = max(np.linalg.norm(a), 1.0)
    work = a.copy()
    for _ in range(policy.jacobi_max_sweeps):
        off = np.sqrt(np.sum(np.abs(work - np.diag(np.diag(work))) ** 2))
        if off <= policy.jacobi_off_tol * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = work[p, q]
                if abs(apq) <= 1e-300:
                    continue
                app = work[p, p].real
                aqq = work[q, q].real
                # phase so the rotated off-diagonal entry is real
                phase = apq / abs(apq)
                tau = (aqq - app) / (2.0 * abs(apq))
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # columns/rows p,q of the unitary G: G[p,p]=c, G[q,q]=c,
                # G[p,q]=s*phase, G[q,p]=-s*conj(phase)
                gp = work[:, p] * c - work[:, q] * (s * np.conj(phase))
                gq = work[:, p] * (s * phase) + work[:, q] * c
                work[:, p], work[:, q] = gp, gq
                hp = work[p, :] * c - work[q, :] * (s * phase)
                hq = work[p, :] * (s * np.conj(phase)) + work[q, :] * c
                work[p, :], work[q, :] = hp, hq
                up = u[:, p] * c - u[:, q] * (s * np.conj(phase))
                uq = u[:, p] * (s * phase) + u[:, q] * c
                u[:, p], u[:, q] = up, uq
    else:
        raise NumericError("Jacobi eigensolver did not converge within the sweep cap")

    lam = np.diag(work).real.copy()
    order = np.argsort(lam, kind="stable")
    return EigenPair(lam[order], u[:, order])


def matrix_power(a, alpha: float, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    """A^alpha for Hermitian positive-definite A via the eigenbasis.

    Eigenvalues at or below the PD floor raise instead of being clipped:
    silent regularization would corrupt every characteristic built on top.
    """
    pair = hermitian_eig(a, policy)
    lam = pair.eigenvalues
    if alpha == 0.0:
        return np.eye(pair.basis.shape[0], dtype=complex)
    lam_max = lam[-1]
    if lam_max <= 0 or lam[0] <= policy.pd_clip_floor * lam_max:
        raise NumericError(
            f"matrix is not safely positive definite (eigenvalues {lam}); "
            "fractional powers are undefined"
        )
    powered = (pair.basis * (lam**alpha)) @ pair.basis.conj().T
    return 0.5 * (powered + powered.conj().T)


def spectral_norm(a) -> float:
    """Largest singular value of a (possibly rectangular) complex matrix."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise NumericError(f"expected a matrix, got shape {a.shape}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        return 0.0
    gram = a.conj().T @ a if a.shape[1] <= a.shape[0] else a @ a.conj().T
    lam = hermitian_eig(gram).eigenvalues
    return float(np.sqrt(max(lam[-1], 0.0)))


def vector_norm(x, q: float) -> float:
    """The l^q norm of a complex vector, q in [1, inf]."""
    x = np.asarray(x, dtype=complex).ravel()
    if q == np.inf:
        return float(np.max(np.abs(x))) if x.size else 0.0
    if q < 1:
        raise ValueError("vector norms require q >= 1")
    if q == 2:
        return float(np.linalg.norm(x))
    return float(np.sum(np.abs(x) ** q) ** (1.0 / q))
