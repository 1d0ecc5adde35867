import numpy as np
import pytest

from porobound.bounds import (
    BOTH,
    boundary_displacement,
    boundary_traction,
    canonical_gamma_cases,
    canonical_kappa_cases,
    compute_bounds,
    effective_biot,
    lower_bound,
    ordering_check,
    reuss_estimate,
    saddle_gap,
    upper_bound,
    voigt_estimate,
)
from porobound.core import NumericalError, PoroelasticMaterial, assemble_A
from porobound.fem import DISPLACEMENT_PRESSURE, TRACTION_FLUID_CONTENT
from porobound.microstructure import Microstructure

from conftest import contrast_pair, laminate_z, random_material
from oracles import laminate_traction_1d

LAYERS = [0, 1, 1, 0, 0, 1, 0, 1]


def relative(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_canonical_cases_are_unit_vectors():
    np.testing.assert_array_equal(canonical_gamma_cases(), np.eye(7))
    np.testing.assert_array_equal(canonical_kappa_cases(), np.eye(7))


def test_boundary_displacement_uses_engineering_shear():
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(boundary_displacement(np.eye(7)[0], x), [1, 0, 0])
    # unit engineering shear in 23 -> half-shear in each off-diagonal slot
    np.testing.assert_allclose(boundary_displacement(np.eye(7)[3], x), [0, 1.5, 1.0])
    np.testing.assert_allclose(boundary_displacement(np.eye(7)[6], x), 0.0)


@pytest.mark.parametrize("k, expected", [
    (0, lambda n: [n[0], 0, 0]),
    (3, lambda n: [0, n[2], n[1]]),
    (4, lambda n: [n[2], 0, n[0]]),
    (5, lambda n: [n[1], n[0], 0]),
    (6, lambda n: [0, 0, 0]),
])
def test_boundary_traction_follows_contraction_table(k, expected):
    n = np.array([0.2, -0.6, 0.8])
    np.testing.assert_allclose(boundary_traction(np.eye(7)[k], n), expected(n))


def test_homogeneous_rve_collapses_all_estimates(rng):
    mat = random_material(rng)
    m = Microstructure(np.zeros((3, 3, 3), dtype=int), (mat,), (1.0, 0.5, 2.0))
    res = compute_bounds(m)
    A = assemble_A(mat)
    for name in ("a_upper", "a_lower", "a_voigt", "a_reuss"):
        assert relative(getattr(res, name), A) < 1e-9, name
    for rep in res.orderings.values():
        assert abs(rep.margin) < 1e-9 * np.linalg.norm(A)


def test_voigt_and_reuss_closed_forms(rng):
    a, b = contrast_pair(rng)
    ids = np.zeros((2, 2, 2), dtype=int)
    ids[0] = 1  # half the voxels
    m = Microstructure(ids, (a, b))
    A1, A2 = assemble_A(a), assemble_A(b)
    np.testing.assert_allclose(voigt_estimate(m), 0.5 * (A1 + A2), rtol=1e-14)
    np.testing.assert_allclose(voigt_estimate(m)[6, 6], 0.5 * (1 / a.biot_modulus + 1 / b.biot_modulus))
    expected = np.linalg.inv(0.5 * (np.linalg.inv(A1) + np.linalg.inv(A2)))
    np.testing.assert_allclose(reuss_estimate(m), expected, rtol=1e-12)
    assert ordering_check(voigt_estimate(m), reuss_estimate(m)).min_eigenvalue > 0


def test_stiffness_blocks_are_ordered(two_phase_rve):
    res = compute_bounds(two_phase_rve)
    tol = 1e-9 * res.scale
    assert res.orderings["voigt_vs_upper"].min_eigenvalue >= -tol
    assert res.orderings["lower_vs_reuss"].min_eigenvalue >= -tol
    assert res.orderings["voigt_vs_reuss"].holds(tol)


def test_saddle_forms_are_ordered(two_phase_rve):
    # J A with J = diag(1,..,1,-1) is the Hessian that the closures actually bound
    res = compute_bounds(two_phase_rve)
    tol = 1e-9 * res.scale
    assert res.saddle_gaps["voigt_vs_upper"] >= -tol
    assert res.saddle_gaps["lower_vs_reuss"] >= -tol


def test_storage_entry_of_upper_exceeds_voigt_under_alpha_contrast(two_phase_rve):
    # with p fixed, the (7,7) entry picks up the mean of eps.M.eps: the reverse of the stiffness order
    res = compute_bounds(two_phase_rve, bc=DISPLACEMENT_PRESSURE)
    assert res.a_upper[6, 6] > res.a_voigt[6, 6]


def test_saddle_gap_detects_reversal():
    A = np.eye(7)
    B = np.eye(7)
    B[6, 6] = 2.0
    assert saddle_gap(B, A) == pytest.approx(-1.0)
    assert saddle_gap(A, B) == pytest.approx(0.0)


def test_laminate_upper_is_arithmetic_mean(rng):
    phases = contrast_pair(rng)
    m = laminate_z(LAYERS, phases)
    upper, _ = upper_bound(m)
    mean = 0.5 * (assemble_A(phases[0]) + assemble_A(phases[1]))
    inplane = np.ix_([0, 1, 5], [0, 1, 5])
    np.testing.assert_allclose(upper[inplane], mean[inplane], rtol=1e-6)
    np.testing.assert_allclose(upper, mean, rtol=1e-9, atol=1e-12)


def test_laminate_lower_matches_1d_oracle():
    phases = (PoroelasticMaterial(np.diag([10.0, 9.0, 8.0, 4.0, 4.0, 4.0]), [0, 0, 0.9, 0, 0, 0], 1.0),
              PoroelasticMaterial(np.diag([1.0, 1.2, 0.8, 0.4, 0.4, 0.4]), [0, 0, 0.3, 0, 0, 0], 10.0))
    m = laminate_z(LAYERS, phases)
    _, compliance, _ = lower_bound(m)
    m33 = [p.stiffness[2, 2] for p in phases]
    a3 = [p.biot_alpha[2] for p in phases]
    mb = [p.biot_modulus for p in phases]
    eps, p = laminate_traction_1d(LAYERS, m33, a3, mb, 1.0, 1.0, 0.0)
    assert compliance[2, 2] == pytest.approx(eps.mean(), rel=1e-6)
    assert compliance[6, 2] == pytest.approx(p.mean(), rel=1e-6)
    eps, p = laminate_traction_1d(LAYERS, m33, a3, mb, 1.0, 0.0, 1.0)
    assert compliance[2, 6] == pytest.approx(eps.mean(), rel=1e-6)
    assert compliance[6, 6] == pytest.approx(p.mean(), rel=1e-6)


def test_upper_columns_are_linear_responses(two_phase_rve):
    upper, _ = upper_bound(two_phase_rve)
    from porobound.fem import average_kappa, solve_displacement_pressure_case
    g = np.array([0.3, -0.1, 0.2, 0.05, 0.0, -0.4, 0.7])
    sol = solve_displacement_pressure_case(two_phase_rve, g, tol=1e-12)
    np.testing.assert_allclose(average_kappa(sol), upper @ g, atol=1e-9)


def test_scaling_equivariance(rng):
    a, b = contrast_pair(rng)
    ids = rng.integers(0, 2, size=(4, 4, 4))
    base = compute_bounds(Microstructure(ids, (a, b)))
    c = 3.0
    scaled = compute_bounds(Microstructure(ids, (a.scaled(c), b.scaled(c))))
    # c M, c alpha, Mb / c multiplies every block of A by c
    for name in ("a_upper", "a_lower", "a_voigt", "a_reuss"):
        np.testing.assert_allclose(getattr(scaled, name), c * getattr(base, name), rtol=1e-8, atol=1e-12)


def test_effective_biot_of_homogeneous(rng):
    mat = random_material(rng)
    alpha, mismatch = effective_biot(assemble_A(mat))
    np.testing.assert_allclose(alpha, mat.biot_alpha)
    assert mismatch == 0.0


def test_single_family_leaves_other_bound_empty(rng):
    m = Microstructure(rng.integers(0, 2, size=(2, 2, 2)), contrast_pair(rng))
    res = compute_bounds(m, bc=TRACTION_FLUID_CONTENT)
    assert res.a_upper is None and res.a_lower is not None
    assert "upper_vs_lower" not in res.orderings
    with pytest.raises(ValueError):
        compute_bounds(m, bc="periodic")


def test_results_do_not_depend_on_thread_count(two_phase_rve):
    one = compute_bounds(two_phase_rve, BOTH, n_jobs=1)
    many = compute_bounds(two_phase_rve, BOTH, n_jobs=4)
    np.testing.assert_array_equal(one.a_upper, many.a_upper)
    np.testing.assert_array_equal(one.a_lower, many.a_lower)


def test_solver_failure_raises_numerical_error(two_phase_rve):
    with pytest.raises(NumericalError):
        upper_bound(two_phase_rve, tol=1e-14, max_iter_factor=0.01)
