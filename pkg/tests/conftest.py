import numpy as np
import pytest

from patchdg.assembly import default_quadrature
from patchdg.mesh import PolyMesh, general_voronoi_mesh, polygonal_mesh, triangulate_unit_square
from patchdg.patch import build_patches, default_patch_size
from patchdg.reconstruct import build_reconstruction_basis


@pytest.fixture(scope="session")
def tri4():
    return triangulate_unit_square(4)


@pytest.fixture(scope="session")
def poly40():
    return polygonal_mesh(40, rng_seed=1)


@pytest.fixture(scope="session")
def vor160():
    return general_voronoi_mesh(160, rng_seed=2)


@pytest.fixture(scope="session")
def two_squares():
    """Unit square split at x = 1/2 into two rectangles."""
    v = [[0, 0], [0.5, 0], [1, 0], [1, 1], [0.5, 1], [0, 1]]
    return PolyMesh(v, [[0, 1, 4, 5], [1, 2, 3, 4]])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_recon(mesh, k, M=None):
    M = default_patch_size(mesh.family, k) if M is None else M
    return build_reconstruction_basis(mesh, build_patches(mesh, M), k)


def make_quad(recon):
    return default_quadrature(recon)


def random_poly(rng, k):
    """Random polynomial of total degree <= k as a callable ``p(points)``."""
    from patchdg.reconstruct import exponents

    ex = exponents(k)
    coef = rng.normal(size=len(ex))

    def p(pts):
        pts = np.atleast_2d(pts)
        return sum(c * pts[:, 0] ** a * pts[:, 1] ** b for c, (a, b) in zip(coef, ex))

    return p


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
