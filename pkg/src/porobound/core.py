"""Contracted-notation constitutive algebra for anisotropic poroelasticity.

Generalized strain ``gamma`` is the 7-vector ``(e11, e22, e33, 2e23, 2e31, 2e12, p)``
and generalized stress ``kappa`` is ``(s11, s22, s33, s23, s31, s12, zeta)``.
Shear strains are engineering shears so that ``kappa @ gamma`` equals the
tensor invariant ``sigma : eps + p * zeta``.

The 7x7 matrix ``A`` maps ``gamma`` to ``kappa``::

    [ M     -alpha ]
    [ alpha  1/Mb  ]
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# (i, j) -> contracted index, 1-based on both sides.
_PAIR_TO_INDEX = {
    (1, 1): 1, (2, 2): 2, (3, 3): 3,
    (2, 3): 4, (3, 2): 4,
    (3, 1): 5, (1, 3): 5,
    (1, 2): 6, (2, 1): 6,
}
_INDEX_TO_PAIR = {1: (1, 1), 2: (2, 2), 3: (3, 3), 4: (2, 3), 5: (1, 3), 6: (1, 2)}

# 0-based tensor index pairs for each contracted slot.
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))

CONDITION_LIMIT = 1e14


class NumericalError(RuntimeError):
    """A computation became singular, ill-conditioned or failed to converge."""


class MaterialError(ValueError):
    """A material definition violates symmetry or positivity requirements."""

    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)


def contract_index(i: int, j: int) -> int:
    """Map a symmetric tensor index pair ``(i, j)`` (1-based) to 1..6."""
    try:
        return _PAIR_TO_INDEX[(int(i), int(j))]
    except KeyError:
        raise ValueError(f"tensor indices must lie in 1..3, got ({i}, {j})") from None


def expand_index(beta: int) -> tuple[int, int]:
    """Inverse of :func:`contract_index`; off-diagonal pairs come smaller-first."""
    try:
        return _INDEX_TO_PAIR[int(beta)]
    except KeyError:
        raise ValueError(f"contracted index must lie in 1..6, got {beta}") from None


def strain_to_tensor(e):
    """Contracted strain (engineering shear) -> symmetric 3x3 tensor."""
    e = np.asarray(e, dtype=float)
    return np.array([
        [e[0], e[5] / 2, e[4] / 2],
        [e[5] / 2, e[1], e[3] / 2],
        [e[4] / 2, e[3] / 2, e[2]],
    ])


def tensor_to_strain(eps):
    eps = np.asarray(eps, dtype=float)
    return np.array([eps[0, 0], eps[1, 1], eps[2, 2],
                     eps[1, 2] + eps[2, 1], eps[0, 2] + eps[2, 0], eps[0, 1] + eps[1, 0]])


def stress_to_tensor(s):
    s = np.asarray(s, dtype=float)
    return np.array([
        [s[0], s[5], s[4]],
        [s[5], s[1], s[3]],
        [s[4], s[3], s[2]],
    ])


def tensor_to_stress(sig):
    sig = np.asarray(sig, dtype=float)
    return np.array([sig[0, 0], sig[1, 1], sig[2, 2],
                     0.5 * (sig[1, 2] + sig[2, 1]),
                     0.5 * (sig[0, 2] + sig[2, 0]),
                     0.5 * (sig[0, 1] + sig[1, 0])])


def gamma_vector(strain=None, pressure=0.0):
    """Pack a contracted strain and a pressure into a generalized strain."""
    g = np.zeros(7)
    if strain is not None:
        g[:6] = strain
    g[6] = pressure
    return g


def kappa_vector(stress=None, fluid_content=0.0):
    k = np.zeros(7)
    if stress is not None:
        k[:6] = stress
    k[6] = fluid_content
    return k


@dataclass(frozen=True)
class ValidationReport:
    symmetry_violation: float
    min_eigenvalue: float
    eigenvalue_tolerance: float
    biot_modulus: float
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def as_dict(self):
        return {
            "ok": self.ok,
            "symmetry_violation": self.symmetry_violation,
            "min_eigenvalue": self.min_eigenvalue,
            "eigenvalue_tolerance": self.eigenvalue_tolerance,
            "biot_modulus": self.biot_modulus,
            "failures": list(self.failures),
        }


@dataclass(frozen=True, eq=False)
class PoroelasticMaterial:
    """One poroelastic phase: drained stiffness, Biot coupling and Biot modulus.

    Construction does not validate; call :func:`validate_material` or
    :meth:`checked` for that.
    """

    stiffness: np.ndarray
    biot_alpha: np.ndarray
    biot_modulus: float

    def __post_init__(self):
        stiffness = np.array(self.stiffness, dtype=float).reshape(6, 6)
        alpha = np.array(self.biot_alpha, dtype=float).reshape(6)
        stiffness.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "stiffness", stiffness)
        object.__setattr__(self, "biot_alpha", alpha)
        object.__setattr__(self, "biot_modulus", float(self.biot_modulus))

    def checked(self) -> "PoroelasticMaterial":
        report = validate_material(self)
        if not report.ok:
            raise MaterialError("; ".join(report.failures), report.failures)
        return self

    @property
    def undrained_stiffness(self) -> np.ndarray:
        a = self.biot_alpha
        return self.stiffness + self.biot_modulus * np.outer(a, a)

    def scaled(self, c: float) -> "PoroelasticMaterial":
        """Material whose ``A`` is ``c * A``."""
        return PoroelasticMaterial(c * self.stiffness, c * self.biot_alpha, self.biot_modulus / c)

    def to_dict(self):
        return {
            "stiffness": [float(x) for x in self.stiffness.ravel()],
            "biot_alpha": [float(x) for x in self.biot_alpha],
            "biot_modulus_pa": self.biot_modulus,
        }


def isotropic_stiffness(lam: float, mu: float) -> np.ndarray:
    m = np.zeros((6, 6))
    m[:3, :3] = lam
    m[[0, 1, 2], [0, 1, 2]] = lam + 2 * mu
    m[[3, 4, 5], [3, 4, 5]] = mu
    return m


def validate_material(m: PoroelasticMaterial) -> ValidationReport:
    """Check symmetry, positive definiteness and Biot modulus positivity.

    Never raises for an invalid material; failures are itemized in the report.
    """
    failures = []
    M = np.asarray(m.stiffness, dtype=float)
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(m.biot_alpha))
            and np.isfinite(m.biot_modulus)):
        failures.append("non-finite entries in material definition")
        return ValidationReport(float("nan"), float("nan"), float("nan"),
                                float(m.biot_modulus), failures)

    sym = float(np.max(np.abs(M - M.T)))
    if sym != 0.0:
        failures.append(f"stiffness is not symmetric (max |M - M^T| = {sym:.3e})")

    scale = float(np.max(np.abs(M)))
    tol = 1e-12 * scale
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (M + M.T))))
    if not min_eig > tol:
        failures.append(f"stiffness is not positive definite (min eigenvalue {min_eig:.6e})")

    if not m.biot_modulus > 0:
        failures.append(f"biot modulus must be positive, got {m.biot_modulus!r}")

    return ValidationReport(sym, min_eig, tol, float(m.biot_modulus), failures)


def apply_constitutive(m: PoroelasticMaterial, g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    eps, p = g[:6], g[6]
    k = np.empty(7)
    k[:6] = m.stiffness @ eps - m.biot_alpha * p
    k[6] = m.biot_alpha @ eps + p / m.biot_modulus
    return k


def assemble_A(m: PoroelasticMaterial) -> np.ndarray:
    A = np.zeros((7, 7))
    A[:6, :6] = m.stiffness
    A[:6, 6] = -m.biot_alpha
    A[6, :6] = m.biot_alpha
    A[6, 6] = 1.0 / m.biot_modulus
    return A


def scaled_condition(A) -> float:
    """2-norm condition number after symmetric Jacobi scaling.

    Blocks of ``A`` carry different units (Pa vs 1/Pa), so the raw condition
    number mostly measures the unit system. Scaling by ``|diag|^-1/2``
    removes that before judging singularity.
    """
    A = np.asarray(A, dtype=float)
    d = np.abs(np.diag(A))
    if np.any(d == 0) or not np.all(np.isfinite(A)):
        return float(np.linalg.cond(A))
    s = 1.0 / np.sqrt(d)
    return float(np.linalg.cond(A * s[:, None] * s[None, :]))


@dataclass(frozen=True, eq=False)
class ComplianceForm:
    """Compliance-side parameters read off ``A^-1``.

    ``eps = C sigma + (1/3) C_h B p`` and ``C_h`` is the (7,7) entry of ``A^-1``.
    """

    compliance: np.ndarray
    hooke_constant: float
    skempton: np.ndarray


def invert_A(A, condition_limit: float = CONDITION_LIMIT):
    """Invert a 7x7 poroelastic matrix and read off its compliance form."""
    A = np.asarray(A, dtype=float)
    if A.shape != (7, 7):
        raise ValueError(f"expected a 7x7 matrix, got shape {A.shape}")
    cond = scaled_condition(A)
    if not cond < condition_limit:
        raise NumericalError(f"poroelastic matrix is singular or ill-conditioned (cond ~ {cond:.3e})")
    Ainv = np.linalg.inv(A)
    ch = float(Ainv[6, 6])
    if ch == 0.0:
        raise NumericalError("compliance (7,7) entry vanishes; Skempton vector undefined")
    form = ComplianceForm(compliance=Ainv[:6, :6].copy(), hooke_constant=ch,
                          skempton=3.0 * Ainv[:6, 6] / ch)
    return Ainv, form


def strain_energy(k, g) -> float:
    """Energy density ``0.5 * kappa . gamma``."""
    return 0.5 * float(np.dot(np.asarray(k, dtype=float), np.asarray(g, dtype=float)))

