import json

import numpy as np
import pytest

from porobound.core import PoroelasticMaterial, isotropic_stiffness
from porobound.microstructure import Microstructure


def random_spd(rng, scale=1.0, shift=0.5):
    B = rng.normal(size=(6, 6))
    M = B @ B.T + shift * 6 * np.eye(6)
    M = 0.5 * (M + M.T)
    return scale * M / np.max(np.abs(M))


def random_material(rng, scale=1.0, alpha_scale=0.5, biot_modulus=None):
    alpha = alpha_scale * rng.uniform(0.2, 1.0, size=6) * np.array([1, 1, 1, 0.3, 0.3, 0.3])
    mb = biot_modulus if biot_modulus is not None else rng.uniform(0.5, 5.0)
    return PoroelasticMaterial(random_spd(rng, scale), alpha, mb)


def iso_material(lam=1.0, mu=1.0, alpha0=0.8, mb=2.0):
    return PoroelasticMaterial(isotropic_stiffness(lam, mu), alpha0 * np.array([1, 1, 1, 0, 0, 0.0]), mb)


def contrast_pair(rng, stiffness=10.0, alpha=(0.9, 0.3), mb=(1.0, 10.0)):
    """Two anisotropic phases with stiffness, Biot coefficient and Biot modulus contrast."""
    base = random_spd(rng)
    direction = rng.uniform(0.6, 1.0, size=6) * np.array([1, 1, 1, 0.2, 0.2, 0.2])
    stiff = PoroelasticMaterial(stiffness * base, alpha[0] * direction, mb[0])
    soft = PoroelasticMaterial(base, alpha[1] * direction, mb[1])
    return stiff, soft


def checkerboard(n, phases):
    i, j, k = np.indices((n, n, n))
    return Microstructure((i + j + k) % 2, phases)


def laminate_z(layers, phases, spacing=(1.0, 1.0, 1.0)):
    ids = np.asarray(layers).reshape(1, 1, -1)
    return Microstructure(ids, phases, spacing)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture
def two_phase_rve(rng):
    phases = contrast_pair(rng)
    ids = rng.integers(0, 2, size=(8, 8, 8))
    return Microstructure(ids, phases)


@pytest.fixture
def write_rve(tmp_path):
    def _write(m, name="rve.json", doc=None):
        path = tmp_path / name
        path.write_text(json.dumps(doc if doc is not None else m.to_document()), encoding="utf-8")
        return path
    return _write
