"""Upper/lower bounds on effective 7x7 poroelastic moduli of a voxel RVE."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import NumericalError, assemble_A, scaled_condition, strain_to_tensor, stress_to_tensor
from .fem import (
    DISPLACEMENT_PRESSURE,
    TRACTION_FLUID_CONTENT,
    SolverError,
    average_energy,
    average_gamma,
    average_kappa,
    average_strain,
    average_stress,
    solve_displacement_pressure_case,
    solve_traction_fluid_content_case,
)
from .microstructure import Microstructure, volume_fractions
from .validation import check_generalized, check_microstructure, check_poro_matrix

log = logging.getLogger(__name__)

BOTH = "both"
BC_FAMILIES = (DISPLACEMENT_PRESSURE, TRACTION_FLUID_CONTENT, BOTH)
COMPLIANCE_CONDITION_LIMIT = 1e12


def canonical_gamma_cases() -> np.ndarray:
    """Unit generalized strains, one per row: six strains then the pressure."""
    return np.eye(7)


def canonical_kappa_cases() -> np.ndarray:
    return np.eye(7)


def boundary_displacement(gamma0, x) -> np.ndarray:
    """Boundary displacement ``eps0 x`` of a displacement-pressure load."""
    return strain_to_tensor(np.asarray(gamma0)[:6]) @ np.asarray(x, dtype=float)


def boundary_traction(kappa0, n) -> np.ndarray:
    """Boundary traction ``sigma0 n`` of a traction-fluid-content load."""
    return stress_to_tensor(np.asarray(kappa0)[:6]) @ np.asarray(n, dtype=float)


@dataclass
class CaseDiagnostics:
    family: str
    index: int
    residual: float
    iterations: int
    theorem_deviation: float
    surface_volume_gap: float
    energy_gap: float = 0.0
    reaction_norm: float = 0.0
    seconds: float = 0.0

    def as_dict(self):
        return {
            "family": self.family, "case": self.index, "residual": self.residual,
            "iterations": self.iterations, "averaging_theorem_deviation": self.theorem_deviation,
            "surface_volume_gap": self.surface_volume_gap, "hill_energy_gap": self.energy_gap,
            "reaction_norm": self.reaction_norm,
        }


def _threads(n_jobs=None) -> int:
    if n_jobs is None:
        raw = os.environ.get("POROBOUND_THREADS", "").strip()
        n_jobs = int(raw) if raw else 0
    if n_jobs is None or n_jobs <= 0:
        return min(7, os.cpu_count() or 1)
    return int(n_jobs)


def _run_cases(fn, n_jobs):
    """Run ``fn(k)`` for k in 0..6; results come back ordered by k."""
    workers = _threads(n_jobs)
    if workers == 1:
        return [fn(k) for k in range(7)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(7)))


def _upper_case(m, k, tol, max_iter_factor):
    t0 = time.perf_counter()
    g = canonical_gamma_cases()[k]
    try:
        sol = solve_displacement_pressure_case(m, g, tol, max_iter_factor, case_label=f"gamma{k + 1}")
    except SolverError as exc:
        raise SolverError(f"displacement-pressure case {k + 1}: {exc}", exc.residual_history) from exc
    strain = average_strain(sol)
    kbar = average_kappa(sol)
    energy = average_energy(sol)
    ref = 0.5 * float(kbar @ g)
    diag = CaseDiagnostics(
        DISPLACEMENT_PRESSURE, k + 1, sol.residual_norm, sol.iterations,
        theorem_deviation=float(np.max(np.abs(strain.volume - g[:6]))),
        surface_volume_gap=strain.discrepancy,
        energy_gap=abs(energy - ref) / max(abs(ref), np.finfo(float).tiny),
        seconds=time.perf_counter() - t0)
    return sol, kbar, diag


def _lower_case(m, k, tol, max_iter_factor):
    t0 = time.perf_counter()
    kap = canonical_kappa_cases()[k]
    try:
        sol = solve_traction_fluid_content_case(m, kap, tol, max_iter_factor, case_label=f"kappa{k + 1}")
    except SolverError as exc:
        raise SolverError(f"traction-fluid-content case {k + 1}: {exc}", exc.residual_history) from exc
    stress = average_stress(sol)
    diag = CaseDiagnostics(
        TRACTION_FLUID_CONTENT, k + 1, sol.residual_norm, sol.iterations,
        theorem_deviation=float(np.max(np.abs(stress.volume - kap[:6]))),
        surface_volume_gap=stress.discrepancy,
        reaction_norm=sol.reaction_norm,
        seconds=time.perf_counter() - t0)
    return sol, average_gamma(sol), diag


def upper_bound(m: Microstructure, tol: float = 1e-10, max_iter_factor: float = 50.0, n_jobs=None):
    """Column k is the average generalized stress under unit generalized strain k.

    Returns ``(A_upper, diagnostics)``.
    """
    out = _run_cases(lambda k: _upper_case(m, k, tol, max_iter_factor), n_jobs)
    A = np.column_stack([kbar for _, kbar, _ in out])
    return A, [d for _, _, d in out]


def lower_bound(m: Microstructure, tol: float = 1e-10, max_iter_factor: float = 50.0, n_jobs=None):
    """Inverse of the effective compliance assembled from unit traction/fluid-content loads.

    Returns ``(A_lower, compliance, diagnostics)``.
    """
    out = _run_cases(lambda k: _lower_case(m, k, tol, max_iter_factor), n_jobs)
    compliance = np.column_stack([gbar for _, gbar, _ in out])
    cond = scaled_condition(compliance)
    if not cond < COMPLIANCE_CONDITION_LIMIT:
        raise NumericalError(f"assembled effective compliance is near-singular (cond ~ {cond:.3e})")
    return np.linalg.inv(compliance), compliance, [d for _, _, d in out]


def voigt_estimate(m: Microstructure) -> np.ndarray:
    phi = volume_fractions(m)
    return sum(f * assemble_A(p) for f, p in zip(phi, m.phases))


def reuss_estimate(m: Microstructure) -> np.ndarray:
    phi = volume_fractions(m)
    inverses = []
    for n, p in enumerate(m.phases):
        A = assemble_A(p)
        if not scaled_condition(A) < 1e14:
            raise NumericalError(f"phase {n} poroelastic matrix is singular")
        inverses.append(np.linalg.inv(A))
    return np.linalg.inv(sum(f * Ai for f, Ai in zip(phi, inverses)))


@dataclass(frozen=True)
class OrderingReport:
    """Energy-block gap ``stiffer - softer``: 6x6 stiffness block and (7,7) entry."""

    min_eigenvalue: float
    storage_gap: float

    @property
    def margin(self) -> float:
        return min(self.min_eigenvalue, self.storage_gap)

    def holds(self, tol: float) -> bool:
        return self.min_eigenvalue >= -tol and self.storage_gap >= -tol

    def as_dict(self):
        return {"min_eigenvalue_6x6": self.min_eigenvalue, "gap_77": self.storage_gap,
                "margin": self.margin}


def ordering_check(upper, lower) -> OrderingReport:
    """Compare the symmetric energy blocks of two 7x7 matrices.

    The +/-alpha coupling blocks are skipped: they cancel in ``gamma^T A gamma``.
    """
    upper = check_poro_matrix(upper)
    lower = check_poro_matrix(lower)
    d = upper - lower
    block = 0.5 * (d[:6, :6] + d[:6, :6].T)
    return OrderingReport(float(np.min(np.linalg.eigvalsh(block))), float(d[6, 6]))


_FLIP = np.diag([1.0, 1, 1, 1, 1, 1, -1])


def saddle_gap(stiffer, softer, compliance=False) -> float:
    """Smallest eigenvalue of ``J (stiffer - softer)`` symmetrized, ``J = diag(1,..,1,-1)``.

    ``J A`` is the Hessian of the mixed potential in (eps, p), convex in
    strain and concave in pressure, so the (7,7) entry orders opposite to
    the stiffness block. With ``compliance=True`` the inverses are compared
    as ``J (softer^-1 - stiffer^-1)``, the complementary-side analogue in
    (sigma, zeta).
    """
    stiffer = check_poro_matrix(stiffer)
    softer = check_poro_matrix(softer)
    d = np.linalg.inv(softer) - np.linalg.inv(stiffer) if compliance else stiffer - softer
    h = _FLIP @ d
    return float(np.min(np.linalg.eigvalsh(0.5 * (h + h.T))))


def effective_biot(A) -> tuple[np.ndarray, float]:
    """Effective Biot vector from the coupling blocks and their mismatch."""
    A = np.asarray(A, dtype=float)
    column = -A[:6, 6]
    row = A[6, :6]
    return 0.5 * (column + row), float(np.max(np.abs(column - row)))


@dataclass
class BoundsResult:
    a_upper: np.ndarray | None
    a_lower: np.ndarray | None
    a_voigt: np.ndarray
    a_reuss: np.ndarray
    compliance: np.ndarray | None = None
    diagnostics: list = field(default_factory=list)
    orderings: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)
    saddle_gaps: dict = field(default_factory=dict)

    @property
    def ordering_margin(self) -> float | None:
        rep = self.orderings.get("upper_vs_lower")
        return None if rep is None else rep.margin

    @property
    def scale(self) -> float:
        return float(np.linalg.norm(self.a_voigt))


def compute_bounds(m: Microstructure, bc: str = BOTH, tol: float = 1e-10,
                   max_iter_factor: float = 50.0, n_jobs=None) -> BoundsResult:
    if bc not in BC_FAMILIES:
        raise ValueError(f"bc must be one of {BC_FAMILIES}, got {bc!r}")
    seconds = {}
    t0 = time.perf_counter()
    voigt = voigt_estimate(m)
    reuss = reuss_estimate(m)
    seconds["estimates"] = time.perf_counter() - t0

    upper = lower = compliance = None
    diagnostics = []
    if bc in (DISPLACEMENT_PRESSURE, BOTH):
        t0 = time.perf_counter()
        upper, diag = upper_bound(m, tol, max_iter_factor, n_jobs)
        diagnostics += diag
        seconds["upper"] = time.perf_counter() - t0
    if bc in (TRACTION_FLUID_CONTENT, BOTH):
        t0 = time.perf_counter()
        lower, compliance, diag = lower_bound(m, tol, max_iter_factor, n_jobs)
        diagnostics += diag
        seconds["lower"] = time.perf_counter() - t0

    saddle = {}
    orderings = {"voigt_vs_reuss": ordering_check(voigt, reuss)}
    if upper is not None:
        orderings["voigt_vs_upper"] = ordering_check(voigt, upper)
        saddle["voigt_vs_upper"] = saddle_gap(voigt, upper)
    if lower is not None:
        orderings["lower_vs_reuss"] = ordering_check(lower, reuss)
        saddle["lower_vs_reuss"] = saddle_gap(lower, reuss, compliance=True)
    if upper is not None and lower is not None:
        orderings["upper_vs_lower"] = ordering_check(upper, lower)
    return BoundsResult(upper, lower, voigt, reuss, compliance, diagnostics, orderings, seconds, saddle)


class PoroelasticBounds(BaseEstimator):
    """Apparent-moduli bounds of a poroelastic RVE as an estimator.

    ``fit`` takes a :class:`Microstructure` (or an RVE document/path) and
    solves the canonical load cases of the selected boundary-condition
    families. ``predict`` maps generalized strains to averaged generalized
    stresses with the chosen bound.

    Parameters
    ----------
    bc : {"both", "displacement-pressure", "traction-fluid-content"}
    tol : float
        Relative residual tolerance of the conjugate-gradient solves.
    max_iter_factor : float
        Iteration cap is ``max_iter_factor * sqrt(n_unknowns)``.
    n_jobs : int or None
        Parallel case solves; ``None`` reads ``POROBOUND_THREADS``.
    """

    def __init__(self, bc=BOTH, tol=1e-10, max_iter_factor=50.0, n_jobs=None):
        self.bc = bc
        self.tol = tol
        self.max_iter_factor = max_iter_factor
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        m = check_microstructure(X)
        if not (np.isfinite(self.tol) and self.tol > 0):
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if not self.max_iter_factor > 0:
            raise ValueError(f"max_iter_factor must be positive, got {self.max_iter_factor!r}")
        res = compute_bounds(m, self.bc, self.tol, self.max_iter_factor, self.n_jobs)
        self.result_ = res
        self.a_upper_ = res.a_upper
        self.a_lower_ = res.a_lower
        self.a_voigt_ = res.a_voigt
        self.a_reuss_ = res.a_reuss
        self.volume_fractions_ = volume_fractions(m)
        self.n_phases_ = m.n_phases
        return self

    def _matrix(self, bound):
        check_is_fitted(self, "result_")
        A = {"upper": self.a_upper_, "lower": self.a_lower_,
             "voigt": self.a_voigt_, "reuss": self.a_reuss_}.get(bound, "missing")
        if isinstance(A, str):
            raise ValueError(f"unknown bound {bound!r}")
        if A is None:
            raise ValueError(f"the {bound} bound was not computed (bc={self.bc!r})")
        return A

    def predict(self, X, bound="upper"):
        """Averaged generalized stress ``A* gamma`` for each row of ``X``."""
        A = self._matrix(bound)
        return check_generalized(X) @ A.T

    def compliance(self, bound="lower"):
        return np.linalg.inv(self._matrix(bound))
