"""Stroh matrix, fundamental elasticity tensor and limiting speed.

Conventions: ``m`` is the unit propagation direction in the surface, ``n``
the unit inward normal.  The 6x6 Stroh matrix acts on ``(a, l)`` with
``a`` the displacement amplitude and ``l`` the traction amplitude divided by
``-ik``, so its blocks carry mixed units (1, 1/Pa, Pa).  :func:`balance`
rescales the traction half so the sign kernels see an O(1) matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .elastic import ElasticMaterial, contract_pq
from .errors import GeometryError, NotSubsonicError

__all__ = [
    "Geometry",
    "StrohMatrix",
    "FundamentalTensor",
    "LimitingSpeed",
    "block_swap",
    "symplectic_unit",
    "balance",
    "unbalance",
    "build_stroh",
    "stroh_blocks",
    "bracket_blocks",
    "build_fundamental",
    "fundamental_stack",
    "stroh_factorization",
    "limiting_speed",
]

_GEOM_TOL = 1e-12


@dataclass(frozen=True)
class Geometry:
    """Propagation direction ``m`` and inward surface normal ``n``."""

    m: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    n: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(-1)
        n = np.array(self.n, dtype=float).reshape(-1)
        if m.shape != (3,) or n.shape != (3,):
            raise GeometryError("m and n must be 3-vectors")
        if abs(np.linalg.norm(m) - 1.0) > _GEOM_TOL or abs(np.linalg.norm(n) - 1.0) > _GEOM_TOL:
            raise GeometryError(f"m and n must be unit vectors (|m|={np.linalg.norm(m)}, |n|={np.linalg.norm(n)})")
        if abs(m @ n) > _GEOM_TOL:
            raise GeometryError(f"m and n must be orthogonal (m.n = {m @ n:.3g})")
        m.flags.writeable = False
        n.flags.writeable = False
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_vectors(cls, m, n) -> Geometry:
        """Normalize ``m`` and ``n`` first; they must still be orthogonal."""
        m = np.asarray(m, dtype=float)
        n = np.asarray(n, dtype=float)
        return cls(m / np.linalg.norm(m), n / np.linalg.norm(n))

    def rotated(self, theta: float) -> tuple[np.ndarray, np.ndarray]:
        """The pair ``r = cos t m + sin t n``, ``s = -sin t m + cos t n``."""
        c, s = np.cos(theta), np.sin(theta)
        return c * self.m + s * self.n, -s * self.m + c * self.n

    def in_plane(self, psi: float) -> Geometry:
        """Rotate ``m`` by ``psi`` about ``n``, keeping the normal fixed."""
        t = np.cross(self.n, self.m)
        return Geometry(np.cos(psi) * self.m + np.sin(psi) * t, self.n)


def block_swap(n: int = 3) -> np.ndarray:
    """``K`` with zero diagonal blocks and identity off-diagonal blocks."""
    K = np.zeros((2 * n, 2 * n))
    K[:n, n:] = np.eye(n)
    K[n:, :n] = np.eye(n)
    return K


def symplectic_unit(n: int = 3) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def balance(A: np.ndarray, scale: float) -> np.ndarray:
    """Similarity ``D^-1 A D`` with ``D = diag(I, scale I)``.

    For a Stroh-type matrix with ``scale`` a representative stiffness this
    makes every block dimensionless.  The sign function commutes with it.
    """
    h = A.shape[0] // 2
    B = np.array(A, dtype=np.result_type(A, float))
    B[:h, h:] *= scale
    B[h:, :h] /= scale
    return B


def unbalance(A: np.ndarray, scale: float) -> np.ndarray:
    return balance(A, 1.0 / scale)


@dataclass(frozen=True)
class StrohMatrix:
    entries: np.ndarray
    v: float
    geometry: Geometry
    material: ElasticMaterial

    @property
    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(N1, N2, N3)`` with ``N = [[N1, N2], [N3, N1^T]]``."""
        N = self.entries
        return N[:3, :3], N[:3, 3:], N[3:, :3]


@dataclass(frozen=True)
class FundamentalTensor:
    entries: np.ndarray
    theta: float
    v: float
    geometry: Geometry
    material: ElasticMaterial


@dataclass(frozen=True)
class LimitingSpeed:
    """Subsonic limiting speed ``v_hat`` and the angle where ``[[ss]]`` degenerates."""

    v_hat: float
    theta: float
    grid_v_hat: float


def _stroh_from_blocks(T, R, P) -> np.ndarray:
    # N = -[[T^-1 R^T, T^-1], [R T^-1 R^T - P, R T^-1]]
    Tinv = np.linalg.inv(T)
    RT = R @ Tinv
    N = np.empty((6, 6))
    N[:3, :3] = -Tinv @ R.T
    N[:3, 3:] = -Tinv
    N[3:, :3] = -(RT @ R.T - P)
    N[3:, 3:] = -RT
    return N


def stroh_blocks(mat: ElasticMaterial, g: Geometry, v: float):
    """Return ``(nn), (mn), (mm) - rho v^2 I``."""
    nn = contract_pq(mat, g.n, g.n)
    mn = contract_pq(mat, g.m, g.n)
    mm = contract_pq(mat, g.m, g.m) - mat.density * v**2 * np.eye(3)
    return nn, mn, mm


def build_stroh(mat: ElasticMaterial, g: Geometry, v: float) -> StrohMatrix:
    """Stroh matrix ``N`` at phase speed ``v`` (m/s).

    Examples
    --------
    >>> from strohsign.elastic import isotropic_material, IsotropicParams
    >>> mat = isotropic_material(IsotropicParams(115e9, 0.355, 8920.0))
    >>> N = build_stroh(mat, Geometry(), 1000.0).entries
    >>> K = block_swap()
    >>> bool(np.allclose(K @ N @ K, N.T, rtol=0, atol=1e-12 * np.abs(N).max()))
    True
    """
    if not isinstance(g, Geometry):
        raise GeometryError("geometry must be a Geometry instance")
    nn, mn, mm = stroh_blocks(mat, g, v)
    return StrohMatrix(_stroh_from_blocks(nn, mn, mm), float(v), g, mat)


def bracket_blocks(mat: ElasticMaterial, g: Geometry, v: float, thetas):
    """``[[ss]], [[sr]], [[rs]], [[rr]]`` stacked over ``thetas``.

    ``[[pq]] = (pq) - (m.p)(m.q) rho v^2 I`` with the rotated pair ``(r, s)``.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    c = mat.c
    m, n = g.m, g.n
    mm = np.einsum("i,ijkl,l->jk", m, c, m)
    nn = np.einsum("i,ijkl,l->jk", n, c, n)
    mn = np.einsum("i,ijkl,l->jk", m, c, n)
    nm = mn.T
    co = np.cos(thetas)[:, None, None]
    si = np.sin(thetas)[:, None, None]
    rv2 = mat.density * v**2 * np.eye(3)
    # r = c m + s n, s = -s m + c n, and m.r = c, m.s = -s
    ss = si**2 * mm + co**2 * nn - si * co * (mn + nm) - si**2 * rv2
    rr = co**2 * mm + si**2 * nn + si * co * (mn + nm) - co**2 * rv2
    rs = -si * co * mm + co**2 * mn - si**2 * nm + si * co * nn + si * co * rv2
    sr = np.swapaxes(rs, 1, 2)
    return ss, sr, rs, rr


def fundamental_stack(mat: ElasticMaterial, g: Geometry, v: float, thetas) -> np.ndarray:
    """``N_theta`` stacked over ``thetas``; raises if ``[[ss]]`` is singular."""
    ss, sr, rs, rr = bracket_blocks(mat, g, v, thetas)
    eig = np.linalg.eigvalsh(ss)
    bad = np.abs(eig[:, 0]) <= 1e-12 * np.abs(eig[:, -1])
    if np.any(bad):
        t = np.atleast_1d(thetas)[np.argmax(bad)]
        raise NotSubsonicError(f"[[ss]] is singular at theta = {t!r}, v = {v!r}")
    ss_inv = np.linalg.inv(ss)
    out = np.empty((ss.shape[0], 6, 6))
    out[:, :3, :3] = -ss_inv @ sr
    out[:, :3, 3:] = -ss_inv
    out[:, 3:, :3] = -(rs @ ss_inv @ sr - rr)
    out[:, 3:, 3:] = -rs @ ss_inv
    return out


def build_fundamental(mat: ElasticMaterial, g: Geometry, v: float, theta: float) -> FundamentalTensor:
    """Fundamental elasticity tensor ``N_theta`` (equal to ``N`` at ``theta = 0``)."""
    return FundamentalTensor(fundamental_stack(mat, g, v, [theta])[0], float(theta), float(v), g, mat)


def stroh_factorization(mat: ElasticMaterial, g: Geometry, v: float):
    """Return ``(X - Y, X + Y, J)`` with ``N = (X - Y)^-1 J (X + Y)``."""
    nn, mn, mm = stroh_blocks(mat, g, v)
    XmY = np.zeros((6, 6))
    XmY[:3, :3] = nn
    XmY[3:, :3] = mn
    XmY[3:, 3:] = -np.eye(3)
    XpY = np.zeros((6, 6))
    XpY[:3, :3] = mm
    XpY[3:, :3] = -mn.T
    XpY[3:, 3:] = -np.eye(3)
    return XmY, XpY, symplectic_unit()


def _min_ss_eig(mat, g, v, thetas) -> float:
    ss = bracket_blocks(mat, g, v, thetas)[0]
    return float(np.linalg.eigvalsh(ss)[:, 0].min())


def limiting_speed(mat: ElasticMaterial, g: Geometry, tol: float = 1e-10, n_theta: int = 181) -> LimitingSpeed:
    """Lowest speed at which ``[[ss]]`` stops being positive definite.

    The minimum eigenvalue of ``[[ss]]`` over a uniform angle grid is
    bisected in ``v``; the angle of the grid minimizer is then refined
    locally, using that at fixed angle ``[[ss]] = (ss) - rho v^2 sin^2 t I``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    thetas = np.linspace(0.0, np.pi, n_theta)
    mm = contract_pq(mat, g.m, g.m)
    lo = 0.0
    hi = np.sqrt(np.linalg.eigvalsh(mm)[0] / mat.density) * (1.0 + 1e-6)
    while (hi - lo) > tol * hi:
        mid = 0.5 * (lo + hi)
        if _min_ss_eig(mat, g, mid, thetas) > 0.0:
            lo = mid
        else:
            hi = mid
    grid_v = 0.5 * (lo + hi)

    def critical(theta):
        s = np.sin(theta)
        if abs(s) < 1e-12:
            return np.inf
        ss0 = bracket_blocks(mat, g, 0.0, [theta])[0][0]
        return np.sqrt(max(np.linalg.eigvalsh(ss0)[0], 0.0) / mat.density) / abs(s)

    crit = np.array([critical(t) for t in thetas])
    j = int(np.argmin(crit))
    step = thetas[1] - thetas[0]
    res = minimize_scalar(
        critical,
        bounds=(max(thetas[j] - step, 1e-9), min(thetas[j] + step, np.pi - 1e-9)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    v_hat, theta_star = grid_v, thetas[j]
    if res.success and res.fun < v_hat:
        v_hat, theta_star = float(res.fun), float(res.x)
    return LimitingSpeed(float(v_hat), float(theta_star), float(grid_v))
