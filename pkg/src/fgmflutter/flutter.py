"""Aerodynamic pressure sweep, first-coalescence detection and refinement.

The sweep and the bisection operate on the nondimensional pencil: lambda values
in the configuration are the nondimensional pressure and the reported
eigenvalues are the nondimensional squared frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import ReducedPencil, complex_eigs, mac_match
from .materials import FgmPlate
from .fem import NondimScales


class FlutterError(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    """Sweep grid (nondimensional pressure) and coalescence tolerances."""

    lambda_start: float = 0.0
    lambda_step: float = 5.0
    lambda_max: float = 1200.0
    imag_tolerance: float = 1e-6
    refine_tolerance: float = 1e-4

    def __post_init__(self):
        if self.lambda_step <= 0.0:
            raise ValueError("lambda_step must be positive")
        if not 0.0 < self.imag_tolerance < 1.0 or not 0.0 < self.refine_tolerance < 1.0:
            raise ValueError("tolerances must lie in (0, 1)")
        if self.lambda_max < self.lambda_start:
            raise ValueError("lambda_max must be >= lambda_start")


@dataclass(frozen=True)
class FlutterPoint:
    """Critical pressure and coalescence frequency, dimensional and nondimensional."""

    lambda_cr: float  # dimensional pressure parameter [Pa]
    omega_cr: float  # [rad/s]
    mode_pair: tuple[int, int]  # 1-based in-vacuo mode indices of the merging branches
    lambda_cr_nd: float
    omega_cr_nd: float
    omega2_cr_nd: float  # squared-frequency convention used by legacy tables


@dataclass(frozen=True)
class SweepResult:
    """Mode-tracked branch traces and the first coalescence bracket (or None)."""

    lambdas: np.ndarray  # (ns,)
    branches: np.ndarray  # (ns, m) complex, tracked across steps
    bracket: tuple[float, float] | None


def _coalesced(w: np.ndarray, v: np.ndarray, imag_tol: float) -> bool:
    """A conjugate pair has appeared.

    Primary signature: an eigenvalue with relative imaginary part above the
    tolerance. Exactly at the coalescence point the pair can be numerically
    real but defective; that is caught by near-identical eigenvalues with
    near-parallel eigenvectors (semisimple symmetric crossings keep
    independent eigenvectors and do not trigger).
    """
    scale = float(np.max(np.abs(w))) or 1.0
    if np.any(np.abs(w.imag) > imag_tol * np.maximum(np.abs(w), 1e-300 * scale)):
        return True
    re = w.real
    for i in range(w.size - 1):
        if abs(re[i + 1] - re[i]) <= 1e-10 * scale:
            vi = v[:, i] / np.linalg.norm(v[:, i])
            vj = v[:, i + 1] / np.linalg.norm(v[:, i + 1])
            if abs(np.vdot(vi, vj)) > 0.9:
                return True
    return False


def sweep(pencil: ReducedPencil, cfg: SweepConfig) -> SweepResult:
    """Trace eigenvalues over the pressure grid and bracket the first coalescence."""
    pnd = pencil.nondimensional()
    n_steps = int(np.floor((cfg.lambda_max - cfg.lambda_start) / cfg.lambda_step + 1e-9)) + 1
    lambdas = cfg.lambda_start + cfg.lambda_step * np.arange(n_steps)

    traces = np.empty((n_steps, pnd.m), dtype=complex)
    bracket = None
    v_prev = None
    for i, lam in enumerate(lambdas):
        w, v = complex_eigs(pnd, float(lam))
        if v_prev is not None:
            perm = mac_match(v_prev, v)
            w, v = w[perm], v[:, perm]
        traces[i] = w
        v_prev = v
        if bracket is None and _coalesced(w, v, cfg.imag_tolerance):
            if i == 0:
                raise FlutterError("eigenvalues already coalesced at lambda_start")
            bracket = (float(lambdas[i - 1]), float(lambdas[i]))
            traces = traces[: i + 1]
            lambdas = lambdas[: i + 1]
            break
    return SweepResult(lambdas=np.asarray(lambdas, dtype=float), branches=traces, bracket=bracket)


def _merging_pair(w: np.ndarray, v: np.ndarray, imag_tol: float) -> tuple[int, int]:
    """Indices of the conjugate (or defective) pair in a coalesced spectrum."""
    scale = float(np.max(np.abs(w))) or 1.0
    imag = np.abs(w.imag)
    if np.max(imag) > imag_tol * scale:
        i = int(np.argmax(imag))
        # conjugate partner: closest real part with opposite-sign imaginary part
        partners = [j for j in range(w.size) if j != i and w[j].imag * w[i].imag < 0]
        j = min(partners, key=lambda j: abs(w[j].real - w[i].real))
        return (i, j) if i < j else (j, i)
    for i in range(w.size - 1):
        if abs(w[i + 1].real - w[i].real) <= 1e-8 * scale:
            return (i, i + 1)
    raise FlutterError("no merging pair found in a coalesced spectrum")


def refine(pencil: ReducedPencil, bracket: tuple[float, float], cfg: SweepConfig) -> FlutterPoint:
    """Bisect the coalescence onset and build the flutter point.

    The coalescence frequency is the mean real part of the merging pair at the
    bracket midpoint (continuous through the onset).
    """
    pnd = pencil.nondimensional()
    lo, hi = float(bracket[0]), float(bracket[1])
    w_lo, v_lo = complex_eigs(pnd, lo)
    w_hi, v_hi = complex_eigs(pnd, hi)
    if _coalesced(w_lo, v_lo, cfg.imag_tolerance) or not _coalesced(w_hi, v_hi, cfg.imag_tolerance):
        raise FlutterError(f"bracket [{lo}, {hi}] does not straddle the coalescence onset")

    while hi - lo > cfg.refine_tolerance * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        w, v = complex_eigs(pnd, mid)
        if _coalesced(w, v, cfg.imag_tolerance):
            hi, w_hi, v_hi = mid, w, v
        else:
            lo = mid

    lam_nd = 0.5 * (lo + hi)
    i, j = _merging_pair(w_hi, v_hi, cfg.imag_tolerance)
    r0 = 0.5 * (w_hi[i].real + w_hi[j].real)

    # modal identity from the eigenvector components in the in-vacuo basis
    vec = np.abs(v_hi[:, i])
    top = np.argsort(vec)[::-1][:2]
    mode_pair = (int(min(top)) + 1, int(max(top)) + 1)

    w_mid, _ = complex_eigs(pnd, lam_nd)
    nearest = np.argsort(np.abs(w_mid.real - r0))[:2]
    omega2_nd = float(np.mean(w_mid.real[nearest]))
    omega_nd = float(np.sqrt(max(omega2_nd, 0.0)))

    scales = pencil.scales
    if scales is not None:
        lam_dim = lam_nd / scales.lambda_factor
        omega_dim = omega_nd / scales.omega_factor
    else:
        lam_dim = lam_nd
        omega_dim = omega_nd
    return FlutterPoint(lambda_cr=lam_dim, omega_cr=omega_dim, mode_pair=mode_pair,
                        lambda_cr_nd=lam_nd, omega_cr_nd=omega_nd, omega2_cr_nd=omega2_nd)


def solve_flutter(pencil: ReducedPencil, cfg: SweepConfig) -> tuple[FlutterPoint | None, SweepResult]:
    """Sweep then refine; flutter point is None when no coalescence occurs in range."""
    result = sweep(pencil, cfg)
    if result.bracket is None:
        return None, result
    return refine(pencil, result.bracket, cfg), result


def nondimensionalize(point: FlutterPoint, plate: FgmPlate) -> tuple[float, float, float]:
    """(lambda_nd, Omega, Omega^2) of a flutter point using ceramic reference properties."""
    scales = NondimScales.from_plate(plate)
    lam_nd = point.lambda_cr * scales.lambda_factor
    omega_nd = point.omega_cr * scales.omega_factor
    return lam_nd, omega_nd, omega_nd**2


def write_traces_csv(result: SweepResult, path) -> None:
    """Branch traces as CSV with columns (lambda_nd, branch_id, re_omega2_nd, im_omega2_nd)."""
    with open(path, "w") as f:
        f.write("lambda_nd,branch_id,re_omega2_nd,im_omega2_nd\n")
        for i, lam in enumerate(result.lambdas):
            for b in range(result.branches.shape[1]):
                s = result.branches[i, b]
                f.write(f"{lam!r},{b},{s.real!r},{s.imag!r}\n")
