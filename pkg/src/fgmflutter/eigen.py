"""In-vacuo modal analysis, modal reduction, and the small unsymmetric eigensolve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

from .fem import GlobalSystem, NondimScales


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModalBasis:
    """Lowest in-vacuo eigenpairs: Phi^T M Phi = I, Phi^T K Phi = diag(omega2)."""

    omega2: np.ndarray  # (m,) ascending [rad^2/s^2]
    phi: np.ndarray  # (n_free, m), mass-orthonormal

    @property
    def m(self) -> int:
        return self.omega2.size

    def omega(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.omega2, 0.0))


@dataclass(frozen=True)
class ReducedPencil:
    """Modal pencil diag(omega2) + lambda * Ar with identity reduced mass."""

    omega2: np.ndarray
    ar: np.ndarray
    scales: NondimScales | None = None

    @property
    def m(self) -> int:
        return self.omega2.size

    def matrix(self, lam: float) -> np.ndarray:
        return np.diag(self.omega2) + lam * self.ar

    def nondimensional(self) -> "ReducedPencil":
        """Rescale so eigenvalues are Omega^2 and lambda is the nondimensional pressure."""
        if self.scales is None:
            return self
        f2 = self.scales.omega_factor**2
        return ReducedPencil(omega2=self.omega2 * f2,
                             ar=self.ar * (f2 / self.scales.lambda_factor),
                             scales=None)


def free_vibration(system: GlobalSystem, m: int, dense_threshold: int = 800) -> ModalBasis:
    """Lowest m eigenpairs of K phi = omega^2 M phi, mass-orthonormalized.

    Small systems are solved densely; larger ones with shift-invert Lanczos.
    A Rayleigh-Ritz pass on the converged subspace enforces the orthonormality
    invariants to machine precision.
    """
    k_mat, m_mat = system.K, system.M
    n = k_mat.shape[0]
    if n == 0:
        raise SolverError("system has no free DOFs")
    if not 1 <= m <= n:
        raise ValueError(f"mode count m={m} outside [1, {n}]")

    if n <= dense_threshold or m > n // 3:
        w, phi0 = sla.eigh(k_mat.toarray(), m_mat.toarray(), subset_by_index=[0, m - 1])
    else:
        v0 = np.ones(n)
        try:
            w, phi0 = spla.eigsh(k_mat, k=m, M=m_mat, sigma=0.0, which="LM", v0=v0)
        except RuntimeError:
            # Singular K (unsupported plate): shift below the spectrum.
            sigma = -1e-6 * (k_mat.diagonal().sum() / max(m_mat.diagonal().sum(), 1e-300))
            try:
                w, phi0 = spla.eigsh(k_mat, k=m, M=m_mat, sigma=sigma, which="LM", v0=v0)
            except spla.ArpackNoConvergence as exc:
                raise SolverError(f"modal solve failed to converge: {exc}") from exc
        except spla.ArpackNoConvergence as exc:
            res = getattr(exc, "eigenvalues", None)
            raise SolverError(
                f"modal solve converged only {0 if res is None else len(res)}/{m} modes"
            ) from exc

    # Rayleigh-Ritz cleanup on the converged subspace.
    g = phi0.T @ (m_mat @ phi0)
    try:
        chol = np.linalg.cholesky(0.5 * (g + g.T))
    except np.linalg.LinAlgError as exc:
        raise SolverError("modal basis is mass-degenerate") from exc
    phi_o = sla.solve_triangular(chol, phi0.T, lower=True).T
    kp = phi_o.T @ (k_mat @ phi_o)
    w2, q = np.linalg.eigh(0.5 * (kp + kp.T))
    phi = phi_o @ q
    return ModalBasis(omega2=w2, phi=phi)


def reduce_system(system: GlobalSystem, basis: ModalBasis) -> ReducedPencil:
    """Project the aerodynamic matrix onto the modal basis."""
    ar = basis.phi.T @ (system.Abar @ basis.phi)
    return ReducedPencil(omega2=basis.omega2.copy(), ar=ar, scales=system.scales)


def complex_eigs(pencil: ReducedPencil, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of Kr + lambda*Ar, sorted by real part (conjugates adjacent)."""
    if not np.isfinite(lam) or lam < 0.0:
        raise ValueError(f"lambda must be finite and non-negative, got {lam}")
    a = pencil.matrix(lam)
    w, v = np.linalg.eig(a)
    order = np.lexsort((w.imag, w.real))
    return w[order], v[:, order]


def eig_residuals(pencil: ReducedPencil, lam: float, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Relative residuals ||A v - w v|| / ||A|| for each returned pair."""
    a = pencil.matrix(lam)
    norm_a = np.linalg.norm(a)
    return np.linalg.norm(a @ v - v * w[None, :], axis=0) / max(norm_a, 1e-300)


def mac_match(v_prev: np.ndarray, v_cur: np.ndarray) -> np.ndarray:
    """Pair current eigenvectors to previous ones by modal assurance.

    Returns the permutation `perm` such that column perm[j] of v_cur continues
    branch j of v_prev.
    """
    np_prev = v_prev / np.linalg.norm(v_prev, axis=0, keepdims=True)
    nc = v_cur / np.linalg.norm(v_cur, axis=0, keepdims=True)
    mac = np.abs(np_prev.conj().T @ nc)
    row, col = linear_sum_assignment(-mac)
    perm = np.empty_like(col)
    perm[row] = col
    return perm
