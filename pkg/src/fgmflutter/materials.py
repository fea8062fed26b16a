"""Constituent properties, power-law grading and through-thickness section integrals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# 20-point Gauss-Legendre is exact for the polynomial integrands that arise for
# integer gradient index up to ~30 and is accurate to machine precision for the
# fractional exponents used in practice.
_GAUSS_Z, _GAUSS_W = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class TemperatureCoefficients:
    """Coefficients of the cubic-in-temperature property law.

    The property at temperature T (Kelvin) is
        P(T) = p0 * (p_minus1 / T + 1 + p1 * T + p2 * T**2 + p3 * T**3)
    with p0 in the property's own units and p_minus1..p3 in K, 1/K, 1/K^2, 1/K^3.
    """

    p0: float
    p_minus1: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    p3: float = 0.0

    @classmethod
    def constant(cls, value: float) -> "TemperatureCoefficients":
        return cls(p0=value)


def property_at(coeffs: TemperatureCoefficients, temperature: float) -> float:
    """Evaluate the cubic property law at a temperature in Kelvin."""
    if temperature <= 0.0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    t = temperature
    value = coeffs.p0 * (coeffs.p_minus1 / t + 1.0 + coeffs.p1 * t + coeffs.p2 * t**2 + coeffs.p3 * t**3)
    if not np.isfinite(value):
        raise ValueError(f"property evaluation produced a non-finite value at T={t}")
    return value


@dataclass(frozen=True)
class MaterialPhase:
    """One constituent phase (ceramic or metal).

    Attributes:
        name: identifier
        e_coeffs: Young's modulus law [Pa]
        alpha_coeffs: thermal expansion law [1/K] (stored; no thermal load case uses it)
        nu: Poisson ratio [-]
        rho: mass density [kg/m^3]
    """

    name: str
    e_coeffs: TemperatureCoefficients
    alpha_coeffs: TemperatureCoefficients
    nu: float
    rho: float

    def __post_init__(self):
        if not 0.0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio must be in (0, 0.5), got {self.nu}")
        if self.rho <= 0.0:
            raise ValueError(f"density must be positive, got {self.rho}")

    def youngs_modulus(self, temperature: float) -> float:
        return property_at(self.e_coeffs, temperature)

    def thermal_expansion(self, temperature: float) -> float:
        return property_at(self.alpha_coeffs, temperature)


# Si3N4 / SUS304 coefficient set. Densities and Poisson ratios are the standard
# values for this pair; both are overridable through the run configuration.
SI3N4 = MaterialPhase(
    name="Si3N4",
    e_coeffs=TemperatureCoefficients(p0=348.43e9, p1=-3.070e-4, p2=2.160e-7, p3=-8.946e-11),
    alpha_coeffs=TemperatureCoefficients(p0=5.8723e-6, p1=9.095e-4),
    nu=0.28,
    rho=2370.0,
)

SUS304 = MaterialPhase(
    name="SUS304",
    e_coeffs=TemperatureCoefficients(p0=201.04e9, p1=3.079e-4, p2=-6.534e-7),
    alpha_coeffs=TemperatureCoefficients(p0=12.330e-6, p1=8.086e-4),
    nu=0.28,
    rho=8166.0,
)

MATERIAL_PAIRS: dict[str, tuple[MaterialPhase, MaterialPhase]] = {
    "si3n4_sus304": (SI3N4, SUS304),
}


@dataclass(frozen=True)
class FgmPlate:
    """Rectangular plate graded from ceramic (top, z=+h/2) to metal (bottom, z=-h/2).

    Attributes:
        a, b: in-plane dimensions [m]
        h: thickness [m]
        k: gradient index (k=0 is pure ceramic)
        ceramic, metal: constituent phases
        temperature: reference temperature [K]
    """

    a: float
    b: float
    h: float
    k: float
    ceramic: MaterialPhase
    metal: MaterialPhase
    temperature: float = 300.0

    def __post_init__(self):
        if self.a <= 0.0 or self.b <= 0.0 or self.h <= 0.0:
            raise ValueError("plate dimensions a, b, h must all be positive")
        if self.k < 0.0:
            raise ValueError(f"gradient index must be non-negative, got {self.k}")
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")

    @classmethod
    def isotropic(cls, a: float, b: float, h: float, e: float, nu: float, rho: float,
                  temperature: float = 300.0) -> "FgmPlate":
        """Homogeneous plate: both phases identical, k=0."""
        phase = MaterialPhase(
            name="isotropic",
            e_coeffs=TemperatureCoefficients.constant(e),
            alpha_coeffs=TemperatureCoefficients.constant(0.0),
            nu=nu,
            rho=rho,
        )
        return cls(a=a, b=b, h=h, k=0.0, ceramic=phase, metal=phase, temperature=temperature)

    def bending_rigidity_ceramic(self) -> float:
        """Reference bending rigidity D_c = E_c h^3 / (12 (1 - nu_c^2)) used for normalization."""
        e_c = self.ceramic.youngs_modulus(self.temperature)
        return e_c * self.h**3 / (12.0 * (1.0 - self.ceramic.nu**2))


def volume_fraction_ceramic(z: float | np.ndarray, plate: FgmPlate) -> float | np.ndarray:
    """Ceramic volume fraction V_c(z) = ((2z + h) / 2h)^k, z in [-h/2, h/2]."""
    z = np.asarray(z, dtype=float)
    h = plate.h
    if np.any(z < -h / 2 - 1e-12 * h) or np.any(z > h / 2 + 1e-12 * h):
        raise ValueError("z outside the plate thickness [-h/2, h/2]")
    base = np.clip((2.0 * z + h) / (2.0 * h), 0.0, 1.0)
    vc = base**plate.k
    return float(vc) if vc.ndim == 0 else vc


def effective_properties(z: float | np.ndarray, plate: FgmPlate) -> tuple:
    """Rule-of-mixtures (E, nu, rho) at height z, phases evaluated at the plate temperature."""
    vc = volume_fraction_ceramic(z, plate)
    vm = 1.0 - vc
    t = plate.temperature
    e = plate.ceramic.youngs_modulus(t) * vc + plate.metal.youngs_modulus(t) * vm
    nu = plate.ceramic.nu * vc + plate.metal.nu * vm
    rho = plate.ceramic.rho * vc + plate.metal.rho * vm
    return e, nu, rho


@dataclass(frozen=True)
class SectionProperties:
    """Through-thickness section integrals consumed by the element routines.

    A [N/m], B [N], Db [N m]: (1, z, z^2)-weighted integrals of the plane-stress
    reduced stiffness. Es [N/m]: shear-corrected integral of the shear modulus
    matrix. i0 [kg/m^2], i1 [kg]: (1, z^2)-weighted density integrals.
    """

    A: np.ndarray
    B: np.ndarray
    Db: np.ndarray
    Es: np.ndarray
    i0: float
    i1: float
    kappa: float = 5.0 / 6.0


def _thickness_points(plate: FgmPlate) -> tuple[np.ndarray, np.ndarray]:
    z = 0.5 * plate.h * _GAUSS_Z
    w = 0.5 * plate.h * _GAUSS_W
    return z, w


def shear_correction(plate: FgmPlate, mode: str = "default") -> float:
    """Shear correction factor.

    'default' returns the classical 5/6. 'energy' equates the first-order shear
    energy with the energy of the equilibrium-consistent parabolic transverse
    shear stress distribution through the graded section.
    """
    if mode == "default":
        return 5.0 / 6.0
    if mode != "energy":
        raise ValueError(f"unknown shear correction mode {mode!r}")

    h = plate.h
    n = 2001
    z = np.linspace(-h / 2, h / 2, n)
    e, nu, _ = effective_properties(z, plate)
    q11 = e / (1.0 - nu**2)
    g = e / (2.0 * (1.0 + nu))

    from scipy.integrate import cumulative_trapezoid, trapezoid

    # Bending stress referenced to the neutral height z0 (zero net membrane force).
    z0 = trapezoid(q11 * z, z) / trapezoid(q11, z)
    gz = cumulative_trapezoid(q11 * (z - z0), z, initial=0.0)
    shear_force = trapezoid(gz, z)
    kappa = shear_force**2 / (trapezoid(g, z) * trapezoid(gz**2 / g, z))
    if not 0.0 < kappa <= 1.0 + 1e-9:
        raise ValueError(f"energy-equivalence shear correction out of range: {kappa}")
    return min(kappa, 1.0)


def section_properties(plate: FgmPlate, kappa_mode: str = "default") -> SectionProperties:
    """Integrate A, B, Db, Es, i0, i1 through the thickness (20-pt Gauss-Legendre)."""
    z, w = _thickness_points(plate)
    e, nu, rho = effective_properties(z, plate)

    q11 = e / (1.0 - nu**2)
    q12 = nu * q11
    q66 = e / (2.0 * (1.0 + nu))

    def stack(weight):
        m = np.zeros((3, 3))
        m[0, 0] = m[1, 1] = np.sum(w * weight * q11)
        m[0, 1] = m[1, 0] = np.sum(w * weight * q12)
        m[2, 2] = np.sum(w * weight * q66)
        return m

    a_mat = stack(1.0)
    b_mat = stack(z)
    db_mat = stack(z**2)

    kappa = shear_correction(plate, kappa_mode)
    gs = np.sum(w * q66)
    es_mat = kappa * gs * np.eye(2)

    i0 = float(np.sum(w * rho))
    i1 = float(np.sum(w * z**2 * rho))
    if not np.all(np.isfinite(a_mat)) or i0 <= 0.0 or i1 <= 0.0:
        raise ValueError("section integration produced invalid values")

    return SectionProperties(A=a_mat, B=b_mat, Db=db_mat, Es=es_mat, i0=i0, i1=i1, kappa=kappa)
