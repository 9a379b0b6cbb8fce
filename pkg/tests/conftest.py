import numpy as np
import pytest

from strohsign.config import load_material
from strohsign.elastic import ElasticMaterial, ElasticTensor
from strohsign.stroh import Geometry


def rayleigh_cubic_speed(mat: ElasticMaterial) -> float:
    """Rayleigh speed from the rationalized secular equation.

    x^3 - 8x^2 + (24 - 16 kappa) x - 16 (1 - kappa) = 0, x = (v / v_t)^2,
    kappa = (v_t / v_l)^2; the physical root is the unique one in (0, 1).
    Independent of the package: polynomial roots, not bisection or Stroh.
    """
    V = mat.stiffness.voigt
    mu, lam2mu = V[3, 3], V[0, 0]
    kappa = mu / lam2mu
    roots = np.roots([1.0, -8.0, 24.0 - 16.0 * kappa, -16.0 * (1.0 - kappa)])
    x = [r.real for r in roots if abs(r.imag) < 1e-12 and 0 < r.real < 1]
    assert len(x) == 1
    return float(np.sqrt(x[0] * mu / mat.density))


@pytest.fixture(scope="session")
def copper():
    return load_material("copper")


@pytest.fixture(scope="session")
def aluminum():
    return load_material("aluminum")


@pytest.fixture(scope="session")
def steel():
    return load_material("steel")


@pytest.fixture(scope="session")
def materials(copper, aluminum, steel):
    return {"copper": copper, "aluminum": aluminum, "steel": steel}


@pytest.fixture
def geom():
    return Geometry(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_anisotropic(rng, scale=100e9, rho=5000.0) -> ElasticMaterial:
    """Random positive-definite Voigt stiffness (triclinic)."""
    A = rng.standard_normal((6, 6))
    V = scale * (A @ A.T / 6 + np.eye(6))
    return ElasticMaterial(ElasticTensor.from_voigt(V), rho, "random")


def random_offaxis(rng, n, margin=0.3):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    w, V = np.linalg.eig(X)
    w = np.where(np.abs(w.real) < margin, w + np.sign(w.real) * margin, w)
    return V @ np.diag(w) @ np.linalg.inv(V)


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(label: str, passed: bool, detail: str, seconds: float) -> None:
    line = f"{'PASS' if passed else 'FAIL'} {label}: {detail} ({seconds:.2f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
