"""Voxel RVE representation, file ingestion and two-point phase statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import MaterialError, PoroelasticMaterial, validate_material


class RVEFormatError(ValueError):
    """The RVE document is malformed or inconsistent."""


@dataclass(frozen=True, eq=False)
class Microstructure:
    """Regular voxel grid of phase ids with a phase material table.

    ``phase_of`` is indexed ``[i, j, k]`` along x, y, z. Files store voxels
    x-fastest, which is the Fortran-order ravel of this array.
    """

    phase_of: np.ndarray
    phases: tuple
    spacing: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        ids = np.asarray(self.phase_of)
        if ids.ndim != 3 or min(ids.shape) < 1:
            raise RVEFormatError(f"phase_of must be a non-empty 3D array, got shape {ids.shape}")
        if not np.issubdtype(ids.dtype, np.integer):
            if not np.all(ids == np.round(ids)):
                raise RVEFormatError("phase ids must be integers")
        ids = np.array(ids, dtype=np.int64)
        ids.setflags(write=False)
        phases = tuple(self.phases)
        if not phases:
            raise RVEFormatError("at least one phase is required")
        if ids.min() < 0 or ids.max() >= len(phases):
            raise RVEFormatError(
                f"voxel phase ids must lie in 0..{len(phases) - 1}, "
                f"found range {ids.min()}..{ids.max()}")
        spacing = tuple(float(h) for h in self.spacing)
        if len(spacing) != 3 or not all(np.isfinite(h) and h > 0 for h in spacing):
            raise RVEFormatError(f"spacing must be three positive numbers, got {self.spacing!r}")
        for n, mat in enumerate(phases):
            report = validate_material(mat)
            if not report.ok:
                raise MaterialError(f"phase {n}: " + "; ".join(report.failures),
                                    [f"phase {n}: {f}" for f in report.failures])
        object.__setattr__(self, "phase_of", ids)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple:
        return tuple(int(n) for n in self.phase_of.shape)

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    @property
    def n_voxels(self) -> int:
        return int(self.phase_of.size)

    @property
    def voxel_volume(self) -> float:
        hx, hy, hz = self.spacing
        return hx * hy * hz

    @property
    def volume(self) -> float:
        return self.n_voxels * self.voxel_volume

    @property
    def lengths(self) -> tuple:
        return tuple(n * h for n, h in zip(self.dims, self.spacing))

    def to_document(self) -> dict:
        """Inverse of :func:`load_rve` with inline voxels."""
        return {
            "dims": list(self.dims),
            "spacing_m": list(self.spacing),
            "phases": [m.to_dict() for m in self.phases],
            "voxels": [int(v) for v in self.phase_of.ravel(order="F")],
        }


def _material_from_entry(entry, n):
    try:
        stiffness = np.asarray(entry["stiffness"], dtype=float)
        alpha = np.asarray(entry["biot_alpha"], dtype=float)
        mb = float(entry["biot_modulus_pa"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RVEFormatError(f"phase {n}: malformed material entry ({exc})") from None
    if stiffness.size != 36:
        raise RVEFormatError(f"phase {n}: stiffness needs 36 values, got {stiffness.size}")
    if alpha.size != 6:
        raise RVEFormatError(f"phase {n}: biot_alpha needs 6 values, got {alpha.size}")
    return PoroelasticMaterial(stiffness.reshape(6, 6), alpha, mb)


def parse_document(doc: dict, base_dir=None):
    """Split a raw RVE document into ``(dims, spacing, voxel ids, materials)``.

    Materials are parsed but not validated, so callers can report on them.
    """
    if not isinstance(doc, dict):
        raise RVEFormatError("RVE document must be an object")
    for key in ("dims", "spacing_m", "phases", "voxels"):
        if key not in doc:
            raise RVEFormatError(f"missing field {key!r}")
    try:
        dims = tuple(int(n) for n in doc["dims"])
        spacing = tuple(float(h) for h in doc["spacing_m"])
    except (TypeError, ValueError):
        raise RVEFormatError("dims and spacing_m must be numeric arrays") from None
    if len(dims) != 3 or min(dims) < 1:
        raise RVEFormatError(f"dims must be three positive integers, got {doc['dims']!r}")
    if len(spacing) != 3:
        raise RVEFormatError("spacing_m must have three entries")
    if not isinstance(doc["phases"], list) or not doc["phases"]:
        raise RVEFormatError("phases must be a non-empty array")
    materials = [_material_from_entry(e, n) for n, e in enumerate(doc["phases"])]

    voxels = doc["voxels"]
    if isinstance(voxels, str):
        path = Path(voxels)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        try:
            ids = np.frombuffer(path.read_bytes(), dtype="<u1").astype(np.int64)
        except OSError as exc:
            raise RVEFormatError(f"cannot read voxel payload {voxels!r}: {exc}") from None
    elif isinstance(voxels, list):
        ids = np.asarray(voxels)
        if ids.ndim != 1 or (ids.size and not np.issubdtype(ids.dtype, np.integer)):
            raise RVEFormatError("inline voxels must be a flat array of integers")
        ids = ids.astype(np.int64)
    else:
        raise RVEFormatError("voxels must be an inline array or a relative file path")

    expected = dims[0] * dims[1] * dims[2]
    if ids.size != expected:
        raise RVEFormatError(
            f"dimension mismatch: dims {dims} need {expected} voxels, got {ids.size}")
    if ids.min() < 0 or ids.max() >= len(materials):
        raise RVEFormatError(
            f"unknown phase id {int(ids.max()) if ids.max() >= len(materials) else int(ids.min())}"
            f" (phases 0..{len(materials) - 1})")
    return dims, spacing, ids.reshape(dims, order="F"), materials


def load_rve(source, base_dir=None) -> Microstructure:
    """Load a Microstructure from a path, a JSON string or an already-parsed dict."""
    if isinstance(source, dict):
        doc = source
    else:
        text = None
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            path = Path(source)
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise RVEFormatError(f"cannot read {path}: {exc}") from None
            if base_dir is None:
                base_dir = path.parent
        else:
            text = source
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RVEFormatError(f"parse error: {exc}") from None
    _, spacing, ids, materials = parse_document(doc, base_dir)
    return Microstructure(ids, tuple(materials), spacing)


def volume_fractions(m: Microstructure) -> np.ndarray:
    counts = np.bincount(m.phase_of.ravel(), minlength=m.n_phases)
    return counts / m.n_voxels


def _two_point(ids: np.ndarray, n_phases: int, shift) -> np.ndarray:
    shift = tuple(int(s) % n for s, n in zip(shift, ids.shape))
    # shifted[x] == ids[x + r] with periodic wrap
    shifted = np.roll(ids, tuple(-s for s in shift), axis=(0, 1, 2))
    pair = ids.ravel() * n_phases + shifted.ravel()
    counts = np.bincount(pair, minlength=n_phases * n_phases)
    return counts.reshape(n_phases, n_phases) / ids.size


@dataclass(frozen=True)
class TwoPointTable:
    shift: tuple
    prob: np.ndarray

    def as_dict(self):
        return {"shift": list(self.shift), "prob": self.prob.tolist()}


def two_point_probability(m: Microstructure, r) -> TwoPointTable:
    """Periodic two-point phase probabilities ``P[a, b](r)``.

    ``P[a, b]`` is the fraction of voxels ``x`` with phase ``a`` at ``x`` and
    phase ``b`` at ``x + r``.
    """
    r = tuple(int(s) for s in r)
    if len(r) != 3:
        raise ValueError(f"shift must have three components, got {r!r}")
    return TwoPointTable(r, _two_point(m.phase_of, m.n_phases, r))


@dataclass(frozen=True)
class HomogeneityReport:
    score: float
    subdivisions: int
    shifts: tuple
    per_shift: tuple

    def as_dict(self):
        return {"score": self.score, "subdivisions": self.subdivisions,
                "shifts": [list(s) for s in self.shifts],
                "per_shift": list(self.per_shift)}


def homogeneity_score(m: Microstructure, subdivisions: int = 2, shifts=((0, 0, 0),)) -> HomogeneityReport:
    """Largest deviation of subwindow two-point estimates from the whole-grid one.

    Each of the ``subdivisions**3`` subwindows is treated as periodic on its own.
    The score is 0 when every subwindow reproduces the global statistics.
    """
    s = int(subdivisions)
    if s < 2:
        raise ValueError("subdivisions must be at least 2")
    if any(n % s for n in m.dims):
        raise ValueError(f"dims {m.dims} are not divisible by {s} along every axis")
    shifts = tuple(tuple(int(c) for c in r) for r in shifts)
    if not shifts:
        raise ValueError("at least one shift is required")
    wx, wy, wz = (n // s for n in m.dims)
    ids = m.phase_of
    per_shift = []
    for r in shifts:
        whole = _two_point(ids, m.n_phases, r)
        worst = 0.0
        for a in range(s):
            for b in range(s):
                for c in range(s):
                    sub = ids[a * wx:(a + 1) * wx, b * wy:(b + 1) * wy, c * wz:(c + 1) * wz]
                    est = _two_point(sub, m.n_phases, r)
                    worst = max(worst, float(np.max(np.abs(est - whole))))
        per_shift.append(worst)
    return HomogeneityReport(max(per_shift), s, shifts, tuple(per_shift))
