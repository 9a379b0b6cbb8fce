"""Elastic constitutive data.

Stiffness tensors are kept in full rank-4 form ``c[i, j, k, l]`` (Pa) so the
``(pq)`` contraction can read them directly; the 6x6 Voigt matrix is only used
for input and for the positive-definiteness check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "ElasticTensor",
    "ElasticMaterial",
    "IsotropicParams",
    "isotropic_material",
    "isotropic_tensor",
    "contract_pq",
    "voigt_to_tensor",
    "tensor_to_voigt",
    "lame_parameters",
]

# Voigt index of each (i, j) pair.
_VOIGT = np.array([[0, 5, 4], [5, 1, 3], [4, 3, 2]])

_SYM_RTOL = 1e-10


def voigt_to_tensor(cv) -> np.ndarray:
    """Expand a symmetric 6x6 Voigt stiffness matrix to rank-4 form."""
    cv = np.asarray(cv, dtype=float)
    if cv.shape != (6, 6):
        raise InvalidParameterError(f"Voigt matrix must be 6x6, got {cv.shape}")
    return cv[_VOIGT[:, :, None, None], _VOIGT[None, None, :, :]]


def tensor_to_voigt(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    cv = np.empty((6, 6))
    pairs = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            cv[a, b] = c[i, j, k, l]
    return cv


@dataclass(frozen=True)
class ElasticTensor:
    """Rank-4 stiffness tensor with minor and major symmetries.

    Construction checks the symmetries to a relative tolerance, then
    symmetrizes exactly, and rejects tensors that are not positive definite
    on symmetric strains.
    """

    c: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.shape != (3, 3, 3, 3):
            raise InvalidParameterError(f"stiffness must have shape (3,3,3,3), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InvalidParameterError("stiffness has non-finite entries")
        scale = np.max(np.abs(c))
        if scale == 0.0:
            raise InvalidParameterError("stiffness tensor is identically zero")
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if np.max(np.abs(c - c.transpose(perm))) > _SYM_RTOL * scale:
                raise InvalidParameterError(f"stiffness lacks symmetry under index permutation {perm}")
        c = (c + c.transpose(1, 0, 2, 3)) / 2
        c = (c + c.transpose(0, 1, 3, 2)) / 2
        c = (c + c.transpose(2, 3, 0, 1)) / 2
        eig = np.linalg.eigvalsh(tensor_to_voigt(c))
        if eig[0] <= 0.0:
            raise InvalidParameterError(
                f"stiffness is not positive definite (smallest Voigt eigenvalue {eig[0]:.6g})"
            )
        c.flags.writeable = False
        object.__setattr__(self, "c", c)

    @classmethod
    def from_voigt(cls, cv) -> ElasticTensor:
        return cls(voigt_to_tensor(cv))

    @property
    def voigt(self) -> np.ndarray:
        return tensor_to_voigt(self.c)


@dataclass(frozen=True)
class ElasticMaterial:
    stiffness: ElasticTensor
    density: float
    name: str = ""

    def __post_init__(self):
        if not np.isfinite(self.density) or self.density <= 0.0:
            raise InvalidParameterError(f"density must be positive, got {self.density}")
        object.__setattr__(self, "density", float(self.density))

    @property
    def c(self) -> np.ndarray:
        return self.stiffness.c

    def reference_modulus(self) -> float:
        """Mean diagonal Voigt stiffness, used to nondimensionalize."""
        return float(np.trace(self.stiffness.voigt) / 6.0)


@dataclass(frozen=True)
class IsotropicParams:
    """Young's modulus ``E`` (Pa), Poisson ratio ``nu`` and density ``rho``."""

    E: float
    nu: float
    rho: float

    def __post_init__(self):
        if not self.E > 0.0:
            raise InvalidParameterError(f"Young's modulus must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise InvalidParameterError(f"Poisson ratio must lie in (-1, 0.5), got {self.nu}")
        if not self.rho > 0.0:
            raise InvalidParameterError(f"density must be positive, got {self.rho}")


def lame_parameters(E: float, nu: float) -> tuple[float, float]:
    """Return ``(lam, mu)`` from Young's modulus and Poisson ratio."""
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


def isotropic_tensor(lam: float, mu: float) -> np.ndarray:
    d = np.eye(3)
    return (
        lam * np.einsum("ij,kl->ijkl", d, d)
        + mu * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d))
    )


def isotropic_material(p: IsotropicParams, name: str = "") -> ElasticMaterial:
    """Build an isotropic material from engineering constants.

    Examples
    --------
    >>> cu = isotropic_material(IsotropicParams(E=115e9, nu=0.355, rho=8920.0))
    >>> round(cu.c[0, 1, 0, 1] / 1e9, 3)
    42.435
    """
    if not isinstance(p, IsotropicParams):
        p = IsotropicParams(*p)
    lam, mu = lame_parameters(p.E, p.nu)
    return ElasticMaterial(ElasticTensor(isotropic_tensor(lam, mu)), p.rho, name)


def contract_pq(mat, p, q) -> np.ndarray:
    """Return the 3x3 matrix ``(pq)_jk = p_i c_ijkl q_l``.

    ``mat`` may be an :class:`ElasticMaterial`, an :class:`ElasticTensor` or a
    raw (possibly complex) rank-4 array, which is how Fourier coefficients of
    the stiffness are contracted in the periodic solver.
    """
    if isinstance(mat, ElasticMaterial):
        c = mat.c
    elif isinstance(mat, ElasticTensor):
        c = mat.c
    else:
        c = np.asarray(mat)
    return np.einsum("i,ijkl,l->jk", np.asarray(p, dtype=float), c, np.asarray(q, dtype=float))
