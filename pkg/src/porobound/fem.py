"""Voxel finite-element solves of the two homogeneous-boundary RVE problems.

Elements are regular 8-node hexahedra (one per voxel) with trilinear
displacements, 2x2x2 Gauss quadrature and element-constant material.

* displacement-pressure: ``u = eps0 x`` on every boundary node and
  ``p = p0`` everywhere; pressure acts as eigenstress ``-alpha p0``.
* traction-fluid-content: tractions ``sigma0 n`` on the box faces and
  ``zeta = zeta0`` everywhere; pressure is eliminated per element through
  ``p = Mb (zeta0 - alpha . eps)``, which gives the undrained stiffness
  ``M + Mb alpha alpha^T`` and eigenstress ``-alpha Mb zeta0``. Rigid modes
  are removed with a 3-2-1 support.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .core import NumericalError, strain_to_tensor, stress_to_tensor, tensor_to_strain, tensor_to_stress
from .microstructure import Microstructure

log = logging.getLogger(__name__)

DISPLACEMENT_PRESSURE = "displacement-pressure"
TRACTION_FLUID_CONTENT = "traction-fluid-content"

_CORNERS = np.array([(a, b, c) for c in (0, 1) for b in (0, 1) for a in (0, 1)])
_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)


class SolverError(NumericalError):
    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


@lru_cache(maxsize=32)
def _gauss_b_matrices(hx: float, hy: float, hz: float) -> np.ndarray:
    """Strain-displacement matrices at the 8 Gauss points, shape (8, 6, 24)."""
    signs = 2.0 * _CORNERS - 1.0
    out = np.zeros((8, 6, 24))
    g = 0
    for zt in _GAUSS:
        for et in _GAUSS:
            for xi in _GAUSS:
                nx_ = signs[:, 0] * (1 + signs[:, 1] * et) * (1 + signs[:, 2] * zt) / 8 * (2 / hx)
                ny_ = signs[:, 1] * (1 + signs[:, 0] * xi) * (1 + signs[:, 2] * zt) / 8 * (2 / hy)
                nz_ = signs[:, 2] * (1 + signs[:, 0] * xi) * (1 + signs[:, 1] * et) / 8 * (2 / hz)
                B = out[g]
                B[0, 0::3] = nx_
                B[1, 1::3] = ny_
                B[2, 2::3] = nz_
                B[3, 1::3] = nz_
                B[3, 2::3] = ny_
                B[4, 0::3] = nz_
                B[4, 2::3] = nx_
                B[5, 0::3] = ny_
                B[5, 1::3] = nx_
                g += 1
    out.setflags(write=False)
    return out


def element_stiffness(D, spacing) -> np.ndarray:
    B = _gauss_b_matrices(*spacing)
    ve = spacing[0] * spacing[1] * spacing[2]
    return ve / 8.0 * np.einsum("gia,ij,gjb->ab", B, D, B)


class VoxelMesh:
    """Node numbering and element connectivity of a voxel grid."""

    def __init__(self, dims, spacing):
        self.dims = tuple(dims)
        self.spacing = tuple(spacing)
        nx, ny, nz = self.dims
        self.node_shape = (nx + 1, ny + 1, nz + 1)
        self.n_nodes = (nx + 1) * (ny + 1) * (nz + 1)
        self.n_elements = nx * ny * nz
        self.element_volume = self.spacing[0] * self.spacing[1] * self.spacing[2]
        self.volume = self.n_elements * self.element_volume

        ii, jj, kk = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij")
        nid = lambda i, j, k: i + (nx + 1) * (j + (ny + 1) * k)  # noqa: E731
        self.coords = np.zeros((self.n_nodes, 3))
        flat = nid(ii, jj, kk).ravel()
        self.coords[flat, 0] = ii.ravel() * self.spacing[0]
        self.coords[flat, 1] = jj.ravel() * self.spacing[1]
        self.coords[flat, 2] = kk.ravel() * self.spacing[2]

        # element order matches Fortran ravel of phase_of (x fastest)
        ei, ej, ek = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        ei, ej, ek = (a.ravel(order="F") for a in (ei, ej, ek))
        self.connectivity = np.stack(
            [nid(ei + a, ej + b, ek + c) for a, b, c in _CORNERS], axis=1)
        self.element_dofs = (3 * self.connectivity[:, :, None] + np.arange(3)).reshape(-1, 24)
        self.element_centroids = np.stack(
            [(ei + 0.5) * self.spacing[0], (ej + 0.5) * self.spacing[1], (ek + 0.5) * self.spacing[2]],
            axis=1)

        on_bnd = ((ii == 0) | (ii == nx) | (jj == 0) | (jj == ny) | (kk == 0) | (kk == nz)).ravel()
        self.boundary_nodes = np.sort(flat[on_bnd])
        self._nid = nid

    def node(self, i, j, k) -> int:
        return int(self._nid(i, j, k))

    def faces(self):
        """Yield ``(axis, side, cell_nodes, cell_area)`` for the six box faces.

        ``cell_nodes`` has shape (n_cells, 4); ``side`` is -1 or +1 (normal sign).
        """
        n = self.dims
        h = self.spacing
        for axis in range(3):
            a1, a2 = [d for d in range(3) if d != axis]
            p, q = np.meshgrid(np.arange(n[a1]), np.arange(n[a2]), indexing="ij")
            p, q = p.ravel(), q.ravel()
            area = h[a1] * h[a2]
            for side, level in ((-1, 0), (1, n[axis])):
                corners = []
                for dp, dq in ((0, 0), (1, 0), (0, 1), (1, 1)):
                    idx = [None, None, None]
                    idx[axis] = np.full_like(p, level)
                    idx[a1] = p + dp
                    idx[a2] = q + dq
                    corners.append(self._nid(*idx))
                yield axis, side, np.stack(corners, axis=1), area


@lru_cache(maxsize=16)
def _mesh_for(dims, spacing) -> VoxelMesh:
    return VoxelMesh(dims, spacing)


def build_mesh(m: Microstructure) -> VoxelMesh:
    return _mesh_for(m.dims, m.spacing)


def assemble_stiffness(mesh: VoxelMesh, phase_ids, stiffnesses) -> sp.csr_matrix:
    """Global stiffness from per-phase 6x6 matrices; deterministic summation."""
    ke = np.stack([element_stiffness(D, mesh.spacing) for D in stiffnesses])
    data = ke[phase_ids].ravel()
    dofs = mesh.element_dofs
    rows = np.repeat(dofs, 24, axis=1).ravel()
    cols = np.tile(dofs, (1, 24)).ravel()
    n = 3 * mesh.n_nodes
    K = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def eigenstress_load(mesh: VoxelMesh, element_eigenstress) -> np.ndarray:
    """Nodal forces equivalent to removing an element-constant eigenstress.

    For ``sigma = D eps + s`` the equilibrium system reads ``K u = f_ext + f``
    with ``f = -sum_e V_e Bbar^T s_e``.
    """
    B = _gauss_b_matrices(*mesh.spacing)
    bbar = B.mean(axis=0)
    fe = -mesh.element_volume * element_eigenstress @ bbar
    f = np.zeros(3 * mesh.n_nodes)
    np.add.at(f, mesh.element_dofs.ravel(), fe.ravel())
    return f


def body_force_load(mesh: VoxelMesh, body_force) -> np.ndarray:
    fe = np.repeat(np.asarray(body_force, dtype=float)[:, None, :] * mesh.element_volume / 8.0, 8, axis=1)
    f = np.zeros(3 * mesh.n_nodes)
    np.add.at(f, mesh.element_dofs.ravel(), fe.ravel())
    return f


def traction_load(mesh: VoxelMesh, stress_tensor) -> np.ndarray:
    """Consistent nodal loads of the uniform traction ``sigma0 n`` on the box."""
    f = np.zeros((mesh.n_nodes, 3))
    sig = np.asarray(stress_tensor, dtype=float)
    for axis, side, cells, area in mesh.faces():
        t = sig[:, axis] * side
        if not np.any(t):
            continue
        np.add.at(f, cells.ravel(), np.tile(t * area / 4.0, (cells.size, 1)))
    return f.ravel()


def pcg(A, b, tol: float, maxiter: int, x0=None):
    """Jacobi-preconditioned CG. Returns ``(x, relative residual, history)``.

    Raises :class:`SolverError` when ``tol`` is not reached within ``maxiter``.
    """
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0, [0.0]
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("stiffness matrix has a non-positive diagonal entry")
    precond = sp.diags(1.0 / diag)
    history = []

    def record(xk):
        history.append(float(np.linalg.norm(b - A @ xk)) / bnorm)

    x = np.zeros_like(b) if x0 is None else x0
    used = 0
    # scipy's stopping test uses the recurrence residual; restart until the
    # true residual meets tol.
    for _ in range(4):
        x, _info = cg(A, b, x0=x, rtol=tol, atol=0.0, maxiter=max(1, maxiter - used),
                      M=precond, callback=record)
        used = len(history)
        res = float(np.linalg.norm(b - A @ x)) / bnorm
        if res <= tol:
            return x, res, history
        if used >= maxiter:
            break
    raise SolverError(
        f"conjugate gradient did not reach relative residual {tol:.1e} in {maxiter} iterations "
        f"(final {res:.3e})", history)


@dataclass(eq=False)
class FieldSolution:
    """Solved displacement/pressure field of one canonical load case."""

    microstructure: Microstructure
    kind: str
    load: np.ndarray
    displacement: np.ndarray
    pressure: np.ndarray
    element_gamma: np.ndarray
    element_kappa: np.ndarray
    element_energy: np.ndarray
    boundary_force: np.ndarray
    residual_norm: float
    iterations: int
    residual_history: list = field(default_factory=list)
    reaction_norm: float = 0.0
    case_label: str = ""

    @property
    def mesh(self) -> VoxelMesh:
        return build_mesh(self.microstructure)


def _phase_arrays(m: Microstructure):
    ids = m.phase_of.ravel(order="F")
    alpha = np.stack([p.biot_alpha for p in m.phases])
    mb = np.array([p.biot_modulus for p in m.phases])
    stiff = np.stack([p.stiffness for p in m.phases])
    return ids, stiff, alpha, mb


def _max_iter(n_unknowns: int, factor: float) -> int:
    return max(1, int(np.ceil(factor * np.sqrt(max(n_unknowns, 1)))))


def _gauss_strains(mesh: VoxelMesh, u: np.ndarray) -> np.ndarray:
    B = _gauss_b_matrices(*mesh.spacing)
    ue = u.reshape(-1)[mesh.element_dofs]
    return np.einsum("gia,ea->egi", B, ue)


def _check_tol(tol):
    if not (np.isfinite(tol) and tol > 0):
        raise ValueError(f"solver tolerance must be positive, got {tol!r}")


def solve_displacement_pressure_case(m: Microstructure, gamma0, tol: float = 1e-10,
                                     max_iter_factor: float = 50.0, body_force=None,
                                     case_label: str = "") -> FieldSolution:
    """Affine boundary displacement ``eps0 x`` with uniform pressure ``p0``."""
    _check_tol(tol)
    gamma0 = np.asarray(gamma0, dtype=float).reshape(7)
    mesh = build_mesh(m)
    ids, stiff, alpha, mb = _phase_arrays(m)
    p0 = gamma0[6]
    eps0 = strain_to_tensor(gamma0[:6])

    K = assemble_stiffness(mesh, ids, stiff)
    f = eigenstress_load(mesh, -alpha[ids] * p0)
    if body_force is not None:
        body_force = np.asarray(body_force, dtype=float).reshape(mesh.n_elements, 3)
        fb = body_force_load(mesh, body_force)
    else:
        fb = np.zeros_like(f)
    f = f + fb

    u = np.zeros(3 * mesh.n_nodes)
    bnd = mesh.boundary_nodes
    u.reshape(-1, 3)[bnd] = mesh.coords[bnd] @ eps0.T
    fixed = np.zeros(3 * mesh.n_nodes, dtype=bool)
    fixed.reshape(-1, 3)[bnd] = True
    free = np.flatnonzero(~fixed)

    history = [0.0]
    residual = 0.0
    if free.size:
        rhs = f[free] - K[free][:, fixed] @ u[fixed]
        Kff = K[free][:, free]
        # the affine field is exact for homogeneous media
        guess = (mesh.coords @ eps0.T).ravel()[free]
        x, residual, history = pcg(Kff, rhs, tol, _max_iter(free.size, max_iter_factor), x0=guess)
        u[free] = x

    f_int = K @ u - (f - fb)
    bforce = np.zeros((mesh.n_nodes, 3))
    bforce[bnd] = (f_int - fb).reshape(-1, 3)[bnd]

    eps_g = _gauss_strains(mesh, u)
    pressure = np.full(mesh.n_elements, p0)
    sol = _finish(m, mesh, DISPLACEMENT_PRESSURE, gamma0, u, eps_g, pressure, None, bforce,
                  residual, history, 0.0, case_label)
    return sol


def pinned_dofs(mesh: VoxelMesh) -> np.ndarray:
    """3-2-1 support: all of node (0,0,0); y,z of (nx,0,0); z of (0,ny,0)."""
    nx, ny, _ = mesh.dims
    n0 = mesh.node(0, 0, 0)
    n1 = mesh.node(nx, 0, 0)
    n2 = mesh.node(0, ny, 0)
    return np.array([3 * n0, 3 * n0 + 1, 3 * n0 + 2, 3 * n1 + 1, 3 * n1 + 2, 3 * n2 + 2])


def _uniform_stress_guess(m, mesh, kappa0, undrained, alpha_mb):
    """Affine displacement carrying the volume-averaged uniform-stress strain.

    The rigid rotation is chosen so the 3-2-1 supported components vanish,
    which leaves an upper-triangular displacement gradient.
    """
    phi = np.bincount(m.phase_of.ravel(), minlength=m.n_phases) / m.n_voxels
    load = kappa0[:6][None, :] + alpha_mb * kappa0[6]
    eps = sum(f * np.linalg.solve(Mu, rhs) for f, Mu, rhs in zip(phi, undrained, load))
    G = np.triu(2.0 * strain_to_tensor(eps))
    G[np.diag_indices(3)] *= 0.5
    return (mesh.coords @ G.T).ravel()


def solve_traction_fluid_content_case(m: Microstructure, kappa0, tol: float = 1e-10,
                                      max_iter_factor: float = 50.0,
                                      case_label: str = "") -> FieldSolution:
    """Uniform boundary traction ``sigma0 n`` with uniform fluid content ``zeta0``."""
    _check_tol(tol)
    kappa0 = np.asarray(kappa0, dtype=float).reshape(7)
    mesh = build_mesh(m)
    ids, stiff, alpha, mb = _phase_arrays(m)
    zeta0 = kappa0[6]
    sig0 = stress_to_tensor(kappa0[:6])

    undrained = stiff + mb[:, None, None] * np.einsum("pi,pj->pij", alpha, alpha)
    K = assemble_stiffness(mesh, ids, undrained)
    f_eig = eigenstress_load(mesh, -(alpha * mb[:, None])[ids] * zeta0)
    f_ext = traction_load(mesh, sig0)
    f = f_ext + f_eig

    pins = pinned_dofs(mesh)
    fixed = np.zeros(3 * mesh.n_nodes, dtype=bool)
    fixed[pins] = True
    free = np.flatnonzero(~fixed)
    Kff = K[free][:, free]
    u = np.zeros(3 * mesh.n_nodes)
    guess = _uniform_stress_guess(m, mesh, kappa0, undrained, alpha * mb[:, None])[free]
    x, residual, history = pcg(Kff, f[free], tol, _max_iter(free.size, max_iter_factor), x0=guess)
    u[free] = x

    reactions = K @ u - f
    reaction_norm = float(np.linalg.norm(reactions[pins]))
    load_norm = float(np.linalg.norm(f))
    if load_norm > 0 and reaction_norm > max(tol, 1e-12) * load_norm * 1e3:
        log.warning("3-2-1 support reactions %.3e are large relative to load %.3e",
                    reaction_norm, load_norm)
    total = f_ext.copy()
    total[pins] += reactions[pins]
    bforce = total.reshape(-1, 3)

    eps_g = _gauss_strains(mesh, u)
    p_g = mb[ids][:, None] * (zeta0 - np.einsum("egi,ei->eg", eps_g, alpha[ids]))
    pressure = p_g.mean(axis=1)
    return _finish(m, mesh, TRACTION_FLUID_CONTENT, kappa0, u, eps_g, pressure, p_g, bforce,
                   residual, history, reaction_norm, case_label)


def _finish(m, mesh, kind, load, u, eps_g, pressure, p_g, bforce, residual, history,
            reaction_norm, label):
    ids, stiff, alpha, mb = _phase_arrays(m)
    M = stiff[ids]
    a = alpha[ids]
    if p_g is None:
        p_g = np.repeat(pressure[:, None], 8, axis=1)
    sig_g = np.einsum("eij,egj->egi", M, eps_g) - a[:, None, :] * p_g[:, :, None]
    zeta_g = np.einsum("egi,ei->eg", eps_g, a) + p_g / mb[ids][:, None]
    energy = 0.5 * (np.einsum("egi,egi->eg", sig_g, eps_g) + p_g * zeta_g).mean(axis=1)

    eps = eps_g.mean(axis=1)
    gamma = np.concatenate([eps, pressure[:, None]], axis=1)
    kappa = np.empty_like(gamma)
    kappa[:, :6] = np.einsum("eij,ej->ei", M, eps) - a * pressure[:, None]
    kappa[:, 6] = np.einsum("ei,ei->e", a, eps) + pressure / mb[ids]
    return FieldSolution(
        microstructure=m, kind=kind, load=load, displacement=u.reshape(-1, 3).copy(),
        pressure=pressure, element_gamma=gamma, element_kappa=kappa, element_energy=energy,
        boundary_force=bforce, residual_norm=float(residual), iterations=len(history),
        residual_history=list(history), reaction_norm=reaction_norm, case_label=label)


def average_gamma(sol: FieldSolution) -> np.ndarray:
    return sol.element_gamma.mean(axis=0)


def average_kappa(sol: FieldSolution) -> np.ndarray:
    return sol.element_kappa.mean(axis=0)


def average_energy(sol: FieldSolution) -> float:
    """Volume average of ``0.5 kappa . gamma`` integrated at the Gauss points."""
    return float(sol.element_energy.mean())


@dataclass(frozen=True)
class AveragePair:
    volume: np.ndarray
    surface: np.ndarray

    @property
    def discrepancy(self) -> float:
        return float(np.max(np.abs(self.volume - self.surface)))


def average_strain(sol: FieldSolution) -> AveragePair:
    """Volume average of element strains and the boundary integral of ``u (x) n``."""
    mesh = sol.mesh
    u = sol.displacement
    grad = np.zeros((3, 3))
    for axis, side, cells, area in mesh.faces():
        # exact for bilinear face traces
        grad[:, axis] += side * area / 4.0 * u[cells].sum(axis=(0, 1))
    surface = tensor_to_strain(0.5 * (grad + grad.T) / mesh.volume)
    volume = sol.element_gamma[:, :6].mean(axis=0)
    return AveragePair(volume, surface)


def average_stress(sol: FieldSolution, body_force=None) -> AveragePair:
    """Volume average of element stresses and the symmetrized boundary moment.

    The surface part uses the nodal boundary forces stored on the solution
    (prescribed loads for traction cases, reactions for displacement cases);
    ``body_force`` adds the volume moment of per-element body forces.
    """
    mesh = sol.mesh
    moment = mesh.coords.T @ sol.boundary_force  # moment[j, i] = sum x_j F_i
    moment = moment.T
    if body_force is not None:
        fb = np.asarray(body_force, dtype=float).reshape(mesh.n_elements, 3)
        moment = moment + mesh.element_volume * fb.T @ mesh.element_centroids
    surface = tensor_to_stress(0.5 * (moment + moment.T) / mesh.volume)
    volume = sol.element_kappa[:, :6].mean(axis=0)
    return AveragePair(volume, surface)
