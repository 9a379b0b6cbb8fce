"""Laterally periodic half-spaces by plane-wave expansion.

The material is periodic in the surface plane and uniform in depth.  Fields
are expanded over a truncated set of reciprocal lattice vectors ``g``; the
result is a constant 6N x 6N Stroh-like matrix ``Nt`` whose sign function
gives the blocks ``St, Qt, Bt`` and the impedance ``Zt``, exactly as in the
homogeneous case.

State vectors are ordered ``(u(g_1), ..., u(g_N), t(g_1), ..., t(g_N))`` with
three components each.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import matsign
from .elastic import ElasticMaterial
from .errors import (
    AxisSpectrumError,
    ConvergenceError,
    InvalidParameterError,
    NoSurfaceWaveError,
    NotSubsonicError,
    SingularMatrixError,
    StrohSignError,
)
from .stroh import Geometry, balance, limiting_speed, unbalance
from .surface import SurfaceWaveSolution
from .table import (
    STATUS_ERROR,
    STATUS_NO_ROOT,
    STATUS_OK,
    STATUS_WINDOW_EMPTY,
    DispersionRow,
    DispersionTable,
)

__all__ = [
    "SurfaceFrame",
    "Lattice",
    "LaminateSpec",
    "FourierTable",
    "PeriodicStroh",
    "PeriodicBlocks",
    "PWESystem",
    "laminate_fourier",
    "assemble_pwe",
    "periodic_blocks",
    "periodic_blocks_integral",
    "rotated_pwe_blocks",
    "subsonic_window",
    "solve_periodic_speed",
    "dispersion_sweep",
    "DEFAULT_NH",
]

DEFAULT_NH = 5


@dataclass(frozen=True)
class SurfaceFrame:
    """Embedding of 2-D surface coordinates into 3-D.

    ``z = (z1, z2)`` maps to ``z1 u1 + z2 u2``; ``n`` is the inward normal.
    """

    u1: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    u2: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    n: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))

    def __post_init__(self):
        B = np.array([self.u1, self.u2, self.n], dtype=float)
        if not np.allclose(B @ B.T, np.eye(3), atol=1e-12):
            raise InvalidParameterError("surface frame must be orthonormal")

    def embed(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z[..., 0, None] * self.u1 + z[..., 1, None] * self.u2


@dataclass(frozen=True)
class Lattice:
    """Surface lattice with translation vectors ``a1, a2`` and a truncation.

    ``nh = (n1_max, n2_max)`` bounds the harmonic indices of the retained
    reciprocal vectors ``g = 2 pi (n1 b1 + n2 b2)``, where ``a_i . b_j = delta_ij``.
    """

    a1: np.ndarray
    a2: np.ndarray
    nh: tuple[int, int] = (DEFAULT_NH, 0)

    def __post_init__(self):
        a1 = np.asarray(self.a1, dtype=float)
        a2 = np.asarray(self.a2, dtype=float)
        A = np.column_stack([a1, a2])
        if A.shape != (2, 2) or abs(np.linalg.det(A)) < 1e-12 * np.linalg.norm(A) ** 2:
            raise InvalidParameterError("lattice vectors must be linearly independent 2-vectors")
        nh = tuple(int(x) for x in self.nh)
        if len(nh) != 2 or min(nh) < 0:
            raise InvalidParameterError(f"bad truncation {self.nh}")
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)
        object.__setattr__(self, "nh", nh)

    @classmethod
    def laminate(cls, period: float, axis=(1.0, 0.0), nh: int = DEFAULT_NH) -> Lattice:
        """Square lattice aligned with the layering ``axis``, harmonics along it only."""
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        perp = np.array([-axis[1], axis[0]])
        return cls(period * axis, period * perp, (nh, 0))

    @property
    def A(self) -> np.ndarray:
        return np.column_stack([self.a1, self.a2])

    @property
    def reciprocal(self) -> tuple[np.ndarray, np.ndarray]:
        Binv = np.linalg.inv(self.A).T
        return Binv[:, 0], Binv[:, 1]

    @property
    def orders(self) -> np.ndarray:
        n1, n2 = self.nh
        return np.array([(i, j) for i in range(-n1, n1 + 1) for j in range(-n2, n2 + 1)], dtype=int)

    @property
    def size(self) -> int:
        return len(self.orders)

    def g_vectors(self, orders=None) -> np.ndarray:
        orders = self.orders if orders is None else np.asarray(orders)
        b1, b2 = self.reciprocal
        return 2 * np.pi * (orders[:, 0, None] * b1 + orders[:, 1, None] * b2)

    def in_first_zone(self, kvec) -> bool:
        """Wigner-Seitz test against the neighbouring reciprocal vectors of periodic axes."""
        kvec = np.asarray(kvec, dtype=float)
        r1 = range(-1, 2) if self.nh[0] > 0 else (0,)
        r2 = range(-1, 2) if self.nh[1] > 0 else (0,)
        G = self.g_vectors(np.array([(i, j) for i in r1 for j in r2 if (i, j) != (0, 0)], dtype=int).reshape(-1, 2))
        k2 = kvec @ kvec
        return bool(np.all(k2 <= np.sum((kvec - G) ** 2, axis=1) * (1 + 1e-12)))


@dataclass(frozen=True)
class LaminateSpec:
    """Two-material laminate with interfaces normal to the surface.

    Layer 1 (volume fraction ``f``) is centred at ``offset * period`` along the
    layering axis; ``offset = 0`` gives the symmetric cell with real Fourier
    coefficients.
    """

    mat1: ElasticMaterial
    mat2: ElasticMaterial
    fraction: float = 0.5
    period: float = 1.0
    axis: tuple[float, float] = (1.0, 0.0)
    offset: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise InvalidParameterError(f"volume fraction must lie in (0, 1), got {self.fraction}")
        if not self.period > 0.0:
            raise InvalidParameterError(f"period must be positive, got {self.period}")
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (2,) or abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise InvalidParameterError("layering axis must be a unit 2-vector")

    @property
    def name(self) -> str:
        a = self.mat1.name or "mat1"
        b = self.mat2.name or "mat2"
        return f"{a}/{b}"

    @property
    def axis2(self) -> np.ndarray:
        return np.asarray(self.axis, dtype=float)

    @property
    def transverse(self) -> np.ndarray:
        a = self.axis2
        return np.array([-a[1], a[0]])

    def lattice(self, nh: int = DEFAULT_NH) -> Lattice:
        return Lattice.laminate(self.period, self.axis2, nh)

    def material_at(self, x: float) -> ElasticMaterial:
        """Material at layering coordinate ``x`` (m)."""
        t = (x / self.period - self.offset + 0.5) % 1.0 - 0.5
        return self.mat1 if abs(t) < self.fraction / 2 else self.mat2

    def direction(self, psi: float) -> np.ndarray:
        """In-plane unit direction at angle ``psi`` from the layering axis."""
        return np.cos(psi) * self.axis2 + np.sin(psi) * self.transverse


@dataclass(frozen=True)
class FourierTable:
    """Fourier coefficients ``c_hat(g)``, ``rho_hat(g)`` keyed by harmonic orders."""

    c: dict
    rho: dict

    def stiffness(self, order) -> np.ndarray:
        return self.c[tuple(order)]

    def density(self, order) -> complex:
        return self.rho[tuple(order)]

    @property
    def orders(self) -> list:
        return sorted(self.c)


def _profile_coefficient(h1, h2, f: float, n: int, offset: float):
    if n == 0:
        return f * h1 + (1 - f) * h2
    return (h1 - h2) * (np.sin(np.pi * n * f) / (np.pi * n)) * np.exp(-2j * np.pi * n * offset)


def laminate_fourier(spec: LaminateSpec, lattice: Lattice) -> FourierTable:
    """Closed-form Fourier coefficients of the piecewise-constant laminate.

    Covers every order difference needed by :func:`assemble_pwe`.  The
    lattice must have ``a1`` along the layering axis with length ``period``.
    """
    if not np.allclose(lattice.a1, spec.period * spec.axis2, atol=1e-12 * spec.period):
        raise InvalidParameterError("lattice vector a1 must equal period * layering axis")
    n1, n2 = lattice.nh
    c1, c2 = spec.mat1.c, spec.mat2.c
    r1, r2 = spec.mat1.density, spec.mat2.density
    zero_c = np.zeros((3, 3, 3, 3), dtype=complex)
    c_tab, rho_tab = {}, {}
    for i in range(-2 * n1, 2 * n1 + 1):
        for j in range(-2 * n2, 2 * n2 + 1):
            if j != 0:
                c_tab[(i, j)] = zero_c
                rho_tab[(i, j)] = 0j
                continue
            c_tab[(i, j)] = np.asarray(_profile_coefficient(c1, c2, spec.fraction, i, spec.offset), dtype=complex)
            rho_tab[(i, j)] = complex(_profile_coefficient(r1, r2, spec.fraction, i, spec.offset))
    return FourierTable(c_tab, rho_tab)


@dataclass(frozen=True)
class PeriodicStroh:
    """Assembled PWE system matrix ``Nt`` and its building blocks."""

    entries: np.ndarray
    T: np.ndarray
    R: np.ndarray
    P: np.ndarray
    k: float
    psi: float
    v: float
    m: np.ndarray
    t_inertia: tuple[int, int]

    @property
    def omega(self) -> float:
        return self.k * self.v

    @property
    def size(self) -> int:
        return self.T.shape[0] // 3


class PWESystem:
    """Speed-independent parts of the PWE assembly at fixed ``(k, psi)``.

    Only ``P`` depends on the speed, through ``-omega^2 rho_hat``, so ``T``,
    ``R`` and the static part of ``P`` are built once and reused.
    """

    def __init__(self, spec: LaminateSpec, lattice: Lattice, k: float, psi: float, frame: SurfaceFrame | None = None, table: FourierTable | None = None):
        if not k > 0:
            raise InvalidParameterError(f"wavenumber must be positive, got {k}")
        self.spec = spec
        self.lattice = lattice
        self.k = float(k)
        self.psi = float(psi)
        self.frame = SurfaceFrame() if frame is None else frame
        self.table = laminate_fourier(spec, lattice) if table is None else table
        m2 = spec.direction(psi)
        if not lattice.in_first_zone(self.k * m2):
            warnings.warn(f"k m = {self.k * m2} lies outside the first Brillouin zone", stacklevel=2)
        self.m = self.frame.embed(m2)
        orders = lattice.orders
        N = len(orders)
        q = self.k * self.m + self.frame.embed(lattice.g_vectors())  # k + g as 3-vectors
        nvec = self.frame.n
        diff = orders[:, None, :] - orders[None, :, :]
        C = np.array([[self.table.stiffness(d) for d in row] for row in diff])  # (N, N, 3,3,3,3)
        rho = np.array([[self.table.density(d) for d in row] for row in diff])
        T = np.einsum("i,abijkl,l->ajbk", nvec, C, nvec)
        R = np.einsum("ai,abijkl,l->ajbk", q, C, nvec)
        P0 = np.einsum("ai,abijkl,bl->ajbk", q, C, q)
        self.N = N
        self.T = T.reshape(3 * N, 3 * N)
        self.R = R.reshape(3 * N, 3 * N)
        self.P0 = P0.reshape(3 * N, 3 * N)
        self.Rho = np.kron(rho, np.eye(3))
        herm = np.linalg.norm(self.T - self.T.conj().T) / np.linalg.norm(self.T)
        if herm > 1e-10:
            raise InvalidParameterError(f"T is not Hermitian (residual {herm:.3g}); check the Fourier table")
        eig = np.linalg.eigvalsh(0.5 * (self.T + self.T.conj().T))
        if np.min(np.abs(eig)) < 1e-12 * np.max(np.abs(eig)):
            raise SingularMatrixError("T is singular")
        self.t_inertia = (int(np.sum(eig > 0)), int(np.sum(eig < 0)))
        self.Tinv = np.linalg.inv(self.T)
        # static parts of the system matrix
        self._N11 = -self.Tinv @ self.R.conj().T
        self._N12 = -self.Tinv
        self._N22 = -self.R @ self.Tinv
        self._N21_0 = -(self.R @ self.Tinv @ self.R.conj().T - self.P0)

    def P(self, v: float) -> np.ndarray:
        omega = self.k * v
        return self.P0 - omega**2 * self.Rho

    def stroh_matrix(self, v: float) -> np.ndarray:
        omega = self.k * v
        return np.block([[self._N11, self._N12], [self._N21_0 - omega**2 * self.Rho, self._N22]])

    def stroh(self, v: float) -> PeriodicStroh:
        return PeriodicStroh(
            self.stroh_matrix(v), self.T, self.R, self.P(v), self.k, self.psi, float(v), self.m, self.t_inertia
        )

    def balance_scale(self, v: float = 0.0) -> float:
        return _balance_scale(self.stroh_matrix(v))


def _balance_scale(Nt: np.ndarray) -> float:
    h = Nt.shape[0] // 2
    return float(np.sqrt(np.linalg.norm(Nt[h:, :h]) / np.linalg.norm(Nt[:h, h:])))


def assemble_pwe(spec: LaminateSpec, lattice: Lattice, k: float, psi: float, v: float, frame: SurfaceFrame | None = None) -> PeriodicStroh:
    """Assemble ``Nt = -[[T^-1 R^+, T^-1], [R T^-1 R^+ - P, R T^-1]]``.

    ``T_gg' = (n, n)(g - g')``, ``R_gg' = (k+g, n)(g - g')`` and
    ``P_gg' = (k+g, k+g')(g - g') - omega^2 rho_hat(g - g') I``.
    """
    return PWESystem(spec, lattice, k, psi, frame).stroh(v)


@dataclass(frozen=True)
class PeriodicBlocks:
    """Blocks of ``sign(iNt) = i [[St, Qt], [Bt, St^+]]`` and the impedance ``Zt``."""

    S: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    Z: np.ndarray | None
    v: float
    method: str
    lower_right: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.S.shape[0]

    def identity_residuals(self) -> dict[str, float]:
        S, Q, B = self.S, self.Q, self.B
        I = np.eye(S.shape[0])
        nQ, nB = np.linalg.norm(Q), np.linalg.norm(B)
        nS = max(np.linalg.norm(S), 1.0)
        out = {
            "BS+S+B": float(np.linalg.norm(B @ S + S.conj().T @ B) / (nB * nS)),
            "SQ+QS+": float(np.linalg.norm(S @ Q + Q @ S.conj().T) / (nQ * nS)),
            "S2+QB+I": float(np.linalg.norm(S @ S + Q @ B + I)),
            "Q-Q+": float(np.linalg.norm(Q - Q.conj().T) / nQ),
            "B-B+": float(np.linalg.norm(B - B.conj().T) / nB),
            "trS": float(abs(np.trace(S)) / nS),
        }
        if self.lower_right is not None:
            out["S22-S+"] = float(np.linalg.norm(self.lower_right - S.conj().T) / nS)
        if self.Z is not None:
            out["Z-Z+"] = float(np.linalg.norm(self.Z - self.Z.conj().T) / np.linalg.norm(self.Z))
        return out

    def det_I_plus_iS(self) -> complex:
        return complex(np.linalg.det(np.eye(self.size) + 1j * self.S))

    def min_eig_Z(self) -> float:
        if self.Z is None:
            raise SingularMatrixError("impedance unavailable: Qt is singular")
        return float(np.linalg.eigvalsh(0.5 * (self.Z + self.Z.conj().T))[0])

    def combined_indicator(self) -> np.ndarray:
        """``(I + iSt)^+ (I + iSt) + Bt^+ Bt`` (Hermitian, positive semidefinite)."""
        A = np.eye(self.size) + 1j * self.S
        return A.conj().T @ A + self.B.conj().T @ self.B


def _impedance(S, Q) -> np.ndarray | None:
    if np.linalg.cond(Q) > 1e12:
        return None
    return -np.linalg.solve(Q, np.eye(S.shape[0]) + 1j * S)


def _sign_periodic(Nt: np.ndarray, method: str, **kwargs) -> np.ndarray:
    scale = _balance_scale(Nt)
    try:
        X = matsign.sign(1j * balance(Nt, scale), method, **kwargs)
    except AxisSpectrumError as exc:
        raise NotSubsonicError(f"iNt has spectrum on the imaginary axis: {exc}") from exc
    return unbalance(X, scale)


def periodic_blocks(ps: PeriodicStroh, method: str = "newton", **kwargs) -> PeriodicBlocks:
    """Extract ``St, Qt, Bt`` from ``sign(iNt) / i`` and form ``Zt = -Qt^-1 (I + iSt)``."""
    X = _sign_periodic(ps.entries, method, **kwargs) / 1j
    h = X.shape[0] // 2
    S, Q, B, S22 = X[:h, :h], X[:h, h:], X[h:, :h], X[h:, h:]
    return PeriodicBlocks(S, Q, B, _impedance(S, Q), ps.v, method, S22)


def rotated_pwe_blocks(T, R, P, thetas):
    """``T_theta``, ``R_theta`` and ``T_(theta + pi/2)`` stacked over ``thetas``.

    ``T_t = c^2 T + s^2 P - sc (R + R^+)``,
    ``R_t = c^2 R - s^2 R^+ + sc (T - P)``,
    ``T_(t+pi/2) = s^2 T + c^2 P + sc (R + R^+)``.
    These reduce to ``[[ss]]``, ``[[rs]]``, ``[[rr]]`` for a homogeneous medium.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    c = np.cos(thetas)[:, None, None]
    s = np.sin(thetas)[:, None, None]
    Rh = R.conj().T
    Tt = c**2 * T + s**2 * P - s * c * (R + Rh)
    Rt = c**2 * R - s**2 * Rh + s * c * (T - P)
    Tq = s**2 * T + c**2 * P + s * c * (R + Rh)
    return Tt, Rt, Tq


def _rotated_means(ps: PeriodicStroh, thetas: np.ndarray):
    Tt, Rt, Tq = rotated_pwe_blocks(ps.T, ps.R, ps.P, thetas)
    Rth = np.conj(np.swapaxes(Rt, 1, 2))
    try:
        Tinv = np.linalg.inv(Tt)
    except np.linalg.LinAlgError:
        for t, A in zip(thetas, Tt):
            if np.linalg.matrix_rank(A) < A.shape[0]:
                raise NotSubsonicError(f"T_theta is singular at theta = {t!r}") from None
        raise
    S = -(Tinv @ Rth).mean(axis=0)
    Q = -Tinv.mean(axis=0)
    B = (Tq - Rt @ Tinv @ Rth).mean(axis=0)
    return S, Q, B


def periodic_blocks_integral(
    ps: PeriodicStroh,
    n_nodes: int | None = None,
    tol: float = 1e-9,
    start_nodes: int = 128,
    max_nodes: int = 8192,
) -> PeriodicBlocks:
    """Angular averages ``St = -<T_t^-1 R_t^+>``, ``Qt = -<T_t^-1>``,
    ``Bt = <T_(t+pi/2) - R_t T_t^-1 R_t^+>`` by the periodic trapezoid rule.

    With ``n_nodes=None`` the node count starts at ``start_nodes`` and is
    doubled (reusing previous nodes) until the nondimensional blocks of two
    successive levels agree to ``tol``.
    """
    if n_nodes is not None:
        if n_nodes < 8:
            raise InvalidParameterError("n_nodes must be at least 8")
        S, Q, B = _rotated_means(ps, np.pi * np.arange(n_nodes) / n_nodes)
        return PeriodicBlocks(S, Q, B, _impedance(S, Q), ps.v, f"integral[{n_nodes}]")
    n = start_nodes
    S, Q, B = _rotated_means(ps, np.pi * np.arange(n) / n)
    while True:
        Sm, Qm, Bm = _rotated_means(ps, np.pi * (np.arange(n) + 0.5) / n)
        S2, Q2, B2 = 0.5 * (S + Sm), 0.5 * (Q + Qm), 0.5 * (B + Bm)
        change = max(
            np.linalg.norm(S2 - S) / max(np.linalg.norm(S2), 1.0),
            np.linalg.norm(Q2 - Q) / np.linalg.norm(Q2),
            np.linalg.norm(B2 - B) / np.linalg.norm(B2),
        )
        S, Q, B, n = S2, Q2, B2, 2 * n
        if change < tol:
            break
        if n >= max_nodes:
            raise ConvergenceError(f"angular average not converged at {n} nodes (change {change:.3g})")
    return PeriodicBlocks(S, Q, B, _impedance(S, Q), ps.v, f"integral[{n}]")


def _homogeneous_limits(spec: LaminateSpec, frame: SurfaceFrame, m3: np.ndarray) -> float:
    g = Geometry(m3, frame.n)
    return max(limiting_speed(spec.mat1, g, tol=1e-8).v_hat, limiting_speed(spec.mat2, g, tol=1e-8).v_hat)


def _is_subsonic(system: PWESystem, v: float) -> bool:
    Nt = system.stroh_matrix(v)
    M = 1j * balance(Nt, _balance_scale(Nt))
    return matsign.axis_distance(M) >= matsign.AXIS_RTOL


def subsonic_window(system: PWESystem, v_upper: float | None = None, n_scan: int = 24, rtol: float = 1e-7) -> float:
    """Lowest speed at which ``iNt`` acquires an eigenvalue on the imaginary axis.

    Coarse scan up to ``v_upper`` followed by bisection.  Returns ``v_upper``
    when no crossing is found below it.
    """
    if v_upper is None:
        v_upper = 1.05 * _homogeneous_limits(system.spec, system.frame, system.m)
    if not _is_subsonic(system, 1e-6 * v_upper):
        return 0.0
    lo, hi = 0.0, None
    for v in v_upper * np.arange(1, n_scan + 1) / n_scan:
        if _is_subsonic(system, v):
            lo = v
        else:
            hi = v
            break
    if hi is None:
        return float(v_upper)
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _is_subsonic(system, mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


def _mode_diagnostics(Nt: np.ndarray) -> dict[str, float]:
    """Smallest singular values of the traction parts of the decaying and growing subspaces."""
    h = Nt.shape[0] // 2
    scale = _balance_scale(Nt)
    w, V = np.linalg.eig(1j * balance(Nt, scale))
    out = {}
    for label, mask in (("L1", w.real < 0), ("L2", w.real > 0)):
        Qb, _ = np.linalg.qr(V[:, mask])
        out[f"sigma_min_{label}"] = float(np.linalg.svd(Qb[h:, :], compute_uv=False)[-1])
    return out


def solve_periodic_speed(
    spec: LaminateSpec,
    k: float,
    psi: float,
    nh: int = DEFAULT_NH,
    tol: float = 1e-8,
    method: str = "newton",
    lattice: Lattice | None = None,
    frame: SurfaceFrame | None = None,
    diagnose: bool = False,
) -> SurfaceWaveSolution:
    """Subsonic surface-wave speed of a laminated half-space at ``(k, psi)``.

    ``psi`` (rad) is measured from the layering axis.  The smallest eigenvalue
    of ``Zt`` is scanned upward inside the subsonic window and the first sign
    change is refined with Brent's method to relative tolerance ``tol``.

    Raises
    ------
    NoSurfaceWaveError
        When the window is empty or ``min eig Zt`` stays positive across it.
    """
    lattice = spec.lattice(nh) if lattice is None else lattice
    system = PWESystem(spec, lattice, k, psi, frame)
    v_max = subsonic_window(system)
    if v_max <= 0.0:
        raise NoSurfaceWaveError("subsonic window is empty")
    count = 0

    def f(v):
        nonlocal count
        count += 1
        return periodic_blocks(system.stroh(v), method).min_eig_Z()

    lo, hi = 0.0, None
    fractions = np.concatenate([np.linspace(0.05, 0.95, 19), 1.0 - np.logspace(-2, -6, 9)])
    for frac in fractions:
        v = frac * v_max
        try:
            fv = f(v)
        except (NotSubsonicError, SingularMatrixError):
            break
        if fv <= 0.0:
            hi = v
            break
        lo = v
    if hi is None:
        raise NoSurfaceWaveError(f"min eig Zt stays positive up to {lo:.6g} m/s (window edge {v_max:.6g} m/s)")
    v_s = brentq(f, lo, hi, xtol=tol * v_max, rtol=max(tol, 4 * np.finfo(float).eps))

    ps = system.stroh(v_s)
    blocks = periodic_blocks(ps, method)
    A = np.eye(blocks.size) + 1j * blocks.S
    _, sv, Vh = np.linalg.svd(A)
    vec = Vh[-1].conj()
    j = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[j]) / vec[j])
    H = blocks.combined_indicator()
    hev = np.linalg.eigvalsh(H)
    scale = _balance_scale(ps.entries)
    lam = np.linalg.eigvals(1j * balance(ps.entries, scale))
    lam = lam[lam.real < 0]
    lam = lam[np.argsort(-lam.real)]
    nB = np.linalg.norm(blocks.B)
    residuals = {
        "I+iS_null": float(sv[-1]),
        "B_null": float(np.linalg.norm(blocks.B @ vec) / nB),
        "combined_min_eig_rel": float(hev[0] / hev[-1]),
        "min_eig_Z_rel": blocks.min_eig_Z() / float(np.linalg.norm(blocks.Z)),
        "det_I+iS_imag_rel": float(abs(blocks.det_I_plus_iS().imag) / max(1.0, abs(blocks.det_I_plus_iS()))),
        "window": v_max,
        "t_pos": float(system.t_inertia[0]),
        "t_neg": float(system.t_inertia[1]),
    }
    if diagnose:
        residuals.update(_mode_diagnostics(ps.entries))
    return SurfaceWaveSolution(float(v_s), vec, lam, residuals, float(v_max), method, count)


def _sweep_point(args) -> DispersionRow:
    spec, k, psi_deg, nh, tol, method = args
    row = DispersionRow(spec.name, spec.fraction, nh, float(psi_deg), float(k), math.nan, STATUS_ERROR)
    try:
        sol = solve_periodic_speed(spec, k, math.radians(psi_deg), nh=nh, tol=tol, method=method)
    except NoSurfaceWaveError as exc:
        row.status = STATUS_WINDOW_EMPTY if "window is empty" in str(exc) else STATUS_NO_ROOT
        row.diagnostics = {"message": str(exc)}
        return row
    except (StrohSignError, np.linalg.LinAlgError, ValueError) as exc:
        row.diagnostics = {"message": f"{type(exc).__name__}: {exc}"}
        return row
    row.v_s = sol.v_s
    row.status = STATUS_OK
    row.residual = sol.residuals["I+iS_null"]
    row.diagnostics = {key: float(val) for key, val in sol.residuals.items()}
    row.diagnostics["evaluations"] = sol.evaluations
    return row


def _worker_count(workers: int | None) -> int:
    cap = os.environ.get("STROH_SIGN_THREADS")
    n = workers if workers is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InvalidParameterError(f"STROH_SIGN_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def dispersion_sweep(
    spec: LaminateSpec,
    k_grid,
    psi_grid_deg,
    nh: int = DEFAULT_NH,
    tol: float = 1e-8,
    method: str = "newton",
    workers: int | None = None,
) -> DispersionTable:
    """Solve every ``(psi, k)`` grid point independently.

    Rows come out ordered by ``psi`` then ``k`` regardless of the number of
    worker processes; failed points are kept with a non-``ok`` status.
    """
    k_grid = [float(k) for k in k_grid]
    psi_grid_deg = [float(p) for p in psi_grid_deg]
    if not k_grid or not psi_grid_deg:
        raise InvalidParameterError("k and psi grids must be nonempty")
    tasks = [(spec, k, p, nh, tol, method) for p in psi_grid_deg for k in k_grid]
    n = _worker_count(workers)
    if n > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    meta = {
        "bimaterial": spec.name,
        "fraction": spec.fraction,
        "period": spec.period,
        "N_h": nh,
        "tol": tol,
        "method": method,
    }
    return DispersionTable(rows, meta)

