"""Barnett-Lothe blocks, surface impedance and the homogeneous surface-wave solver.

All quantities are in SI units.  ``S`` is dimensionless, ``Q`` has units of
compliance (1/Pa), ``B`` and ``Z`` of stiffness (Pa); residuals reported by
this module are made relative to the natural scale of each block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import matsign
from .elastic import ElasticMaterial, contract_pq
from .errors import (
    AxisSpectrumError,
    ConvergenceError,
    InvalidParameterError,
    NoSurfaceWaveError,
    NotSubsonicError,
    SingularMatrixError,
)
from .stroh import (
    Geometry,
    balance,
    block_swap,
    bracket_blocks,
    build_stroh,
    fundamental_stack,
    limiting_speed,
    unbalance,
)

__all__ = [
    "DEFAULT_METHOD",
    "BarnettLotheBlocks",
    "Impedance",
    "StrohModes",
    "RiccatiLemmaReport",
    "SurfaceWaveSolution",
    "sign_iN",
    "stroh_modes",
    "barnett_lothe",
    "barnett_lothe_integral",
    "impedance",
    "riccati_residual",
    "verify_riccati_lemma",
    "dispersion_functions",
    "solve_surface_speed",
    "indicator_root",
    "surface_indicator",
    "fundamental_average",
    "solve_sylvester_vec",
    "riccati_scale",
]

DEFAULT_METHOD = "integral"


def _rel(a, scale) -> float:
    return float(np.linalg.norm(a) / scale) if scale > 0 else float(np.linalg.norm(a))


@dataclass(frozen=True)
class BarnettLotheBlocks:
    """Real blocks of ``sign(iN) = i [[S, Q], [B, S^T]]``."""

    S: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    v: float
    method: str
    imag_residual: float = 0.0
    spectral_residual: float | None = None

    @property
    def sign_matrix(self) -> np.ndarray:
        return 1j * np.block([[self.S, self.Q], [self.B, self.S.T]])

    def identity_residuals(self) -> dict[str, float]:
        """Relative residuals of the involution identities and block symmetries."""
        S, Q, B = self.S, self.Q, self.B
        nQ, nB = np.linalg.norm(Q), np.linalg.norm(B)
        nS = max(np.linalg.norm(S), 1.0)
        return {
            "BS+STB": _rel(B @ S + S.T @ B, nB * nS),
            "SQ+QST": _rel(S @ Q + Q @ S.T, nQ * nS),
            "S2+QB+I": float(np.linalg.norm(S @ S + Q @ B + np.eye(3))),
            "Q-QT": _rel(Q - Q.T, nQ),
            "B-BT": _rel(B - B.T, nB),
            "trS": float(abs(np.trace(S))),
            "detS": float(abs(np.linalg.det(S)) / nS**3),
            "imag": self.imag_residual,
        }


@dataclass(frozen=True)
class Impedance:
    Z: np.ndarray
    v: float

    @property
    def hermitian(self) -> np.ndarray:
        return 0.5 * (self.Z + self.Z.conj().T)

    @property
    def hermitian_residual(self) -> float:
        return _rel(self.Z - self.Z.conj().T, np.linalg.norm(self.Z))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.hermitian)

    @property
    def min_eig(self) -> float:
        return float(self.eigenvalues[0])


@dataclass(frozen=True)
class StrohModes:
    """Eigenvectors of ``iN`` normalized by ``xi^T K xi = 1``.

    Columns 0-2 are the physical (decaying, ``Re lambda < 0``) modes and
    columns 3-5 their complex conjugates.
    """

    eigenvalues: np.ndarray
    Gamma: np.ndarray
    min_gap: float

    @property
    def A1(self):
        return self.Gamma[:3, :3]

    @property
    def L1(self):
        return self.Gamma[3:, :3]

    @property
    def A2(self):
        return self.Gamma[:3, 3:]

    @property
    def L2(self):
        return self.Gamma[3:, 3:]

    def impedance(self) -> np.ndarray:
        """``Z = i L1 A1^-1``."""
        return 1j * np.linalg.solve(self.A1.T, self.L1.T).T


def _bilinear_orthonormalize(V: np.ndarray, K: np.ndarray, rng=None) -> np.ndarray:
    """Gram-Schmidt under the complex bilinear form ``x^T K y``.

    Needed inside clusters of repeated eigenvalues, where the eigensolver
    returns an arbitrary basis of the eigenspace.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    for _ in range(8):
        out = []
        ok = True
        for x in V.T:
            x = x.astype(complex)
            for e in out:
                x = x - (e @ K @ x) * e
            nrm = x @ K @ x
            if abs(nrm) < 1e-8 * np.linalg.norm(x) ** 2:
                ok = False
                break
            out.append(x / np.sqrt(nrm))
        if ok:
            return np.array(out).T
        # isotropic vector hit: retry with a random basis of the same span
        V = V @ (rng.standard_normal((V.shape[1],) * 2) + 1j * rng.standard_normal((V.shape[1],) * 2))
    raise SingularMatrixError("could not K-normalize a degenerate eigenspace")


def stroh_modes(mat: ElasticMaterial, g: Geometry, v: float, cluster_rtol: float = 1e-6) -> StrohModes:
    """Normalized eigenvector matrix ``Gamma`` of ``iN`` at subsonic ``v``."""
    N = build_stroh(mat, g, v).entries
    c0 = mat.reference_modulus()
    M = 1j * balance(N, c0)
    try:
        _, split = matsign.sign_spectral(M)
    except AxisSpectrumError as exc:
        raise NotSubsonicError(f"v = {v} is not subsonic: {exc}") from exc
    if split.minus.size != 3:
        raise NotSubsonicError(f"expected 3 decaying modes, found {split.minus.size}")
    lam = split.eigenvalues[split.minus]
    V = split.vectors[:, split.minus]
    K = block_swap()
    scale = max(1.0, np.abs(lam).max())
    cols = np.empty_like(V)
    done = np.zeros(3, dtype=bool)
    for i in range(3):
        if done[i]:
            continue
        idx = [j for j in range(3) if not done[j] and abs(lam[j] - lam[i]) <= cluster_rtol * scale]
        cols[:, idx] = _bilinear_orthonormalize(V[:, idx], K)
        done[idx] = True
    # back to SI: x -> D x / sqrt(c0) keeps x^T K x = 1 since D K D = c0 K
    cols = cols / np.sqrt(c0)
    cols[3:, :] *= c0
    Gamma = np.hstack([cols, cols.conj()])
    eig = np.concatenate([lam, -lam.conj()])
    return StrohModes(eig, Gamma, split.min_gap)


def sign_iN(mat: ElasticMaterial, g: Geometry, v: float, method: str = DEFAULT_METHOD, **kwargs) -> np.ndarray:
    """``sign(iN)`` in SI units, evaluated on the balanced Stroh matrix."""
    if not v >= 0:
        raise InvalidParameterError(f"speed must be non-negative, got {v}")
    N = build_stroh(mat, g, v).entries
    c0 = mat.reference_modulus()
    try:
        X = matsign.sign(1j * balance(N, c0), method, **kwargs)
    except AxisSpectrumError as exc:
        raise NotSubsonicError(f"v = {v} is not subsonic: {exc}") from exc
    return unbalance(X, c0)


def _blocks_from_sign(X: np.ndarray, v: float, method: str) -> BarnettLotheBlocks:
    Y = X / 1j
    S, Q, B, ST = Y[:3, :3], Y[:3, 3:], Y[3:, :3], Y[3:, 3:]
    imag = max(
        _rel(S.imag, max(np.linalg.norm(S), 1.0)),
        _rel(Q.imag, np.linalg.norm(Q)),
        _rel(B.imag, np.linalg.norm(B)),
        _rel(ST.imag, max(np.linalg.norm(ST), 1.0)),
    )
    return BarnettLotheBlocks(S.real.copy(), Q.real.copy(), B.real.copy(), float(v), method, imag)


def barnett_lothe(
    mat: ElasticMaterial, g: Geometry, v: float, method: str = DEFAULT_METHOD, **kwargs
) -> BarnettLotheBlocks:
    """Barnett-Lothe matrices extracted from ``sign(iN) / i``.

    With ``method="spectral"`` the blocks are also rebuilt from the
    normalized eigenvectors (``S = i(2 A1 L1^T - I)``, ``Q = 2i A1 A1^T``,
    ``B = 2i L1 L1^T``) and the largest relative discrepancy is stored in
    ``spectral_residual``.
    """
    X = sign_iN(mat, g, v, method, **kwargs)
    blocks = _blocks_from_sign(X, v, method)
    if method != "spectral":
        return blocks
    modes = stroh_modes(mat, g, v)
    A1, L1 = modes.A1, modes.L1
    S2 = 1j * (2 * A1 @ L1.T - np.eye(3))
    Q2 = 2j * A1 @ A1.T
    B2 = 2j * L1 @ L1.T
    resid = max(
        _rel(S2 - blocks.S, max(np.linalg.norm(blocks.S), 1.0)),
        _rel(Q2 - blocks.Q, np.linalg.norm(blocks.Q)),
        _rel(B2 - blocks.B, np.linalg.norm(blocks.B)),
    )
    return BarnettLotheBlocks(blocks.S, blocks.Q, blocks.B, blocks.v, method, blocks.imag_residual, resid)


def barnett_lothe_integral(mat: ElasticMaterial, g: Geometry, v: float, n_nodes: int = 128) -> BarnettLotheBlocks:
    """Angular averages ``S = -<[[ss]]^-1 [[sr]]>``, ``Q = -<[[ss]]^-1>``,
    ``B = <[[rr]] - [[rs]][[ss]]^-1[[sr]]>`` on a periodic trapezoid grid."""
    if n_nodes < 8:
        raise InvalidParameterError("n_nodes must be at least 8")
    thetas = np.pi * np.arange(n_nodes) / n_nodes
    ss, sr, rs, rr = bracket_blocks(mat, g, v, thetas)
    eig = np.linalg.eigvalsh(ss)
    if np.any(eig[:, 0] <= 0.0):
        t = thetas[np.argmax(eig[:, 0] <= 0.0)]
        raise NotSubsonicError(f"[[ss]] is not positive definite at theta = {t!r}, v = {v!r}")
    ss_inv = np.linalg.inv(ss)
    S = -(ss_inv @ sr).mean(axis=0)
    Q = -ss_inv.mean(axis=0)
    B = (rr - rs @ ss_inv @ sr).mean(axis=0)
    return BarnettLotheBlocks(S, Q, B, float(v), f"lemma-integral[{n_nodes}]")


def fundamental_average(mat: ElasticMaterial, g: Geometry, v: float, n_nodes: int = 128) -> np.ndarray:
    """``<N_theta>`` assembled from full fundamental tensors (second assembly path)."""
    thetas = np.pi * np.arange(n_nodes) / n_nodes
    return fundamental_stack(mat, g, v, thetas).mean(axis=0)


def impedance(blocks: BarnettLotheBlocks) -> Impedance:
    """Surface impedance ``Z = -Q^-1 (I + iS)``."""
    Q = blocks.Q
    if np.linalg.cond(Q) > 1e12:
        raise SingularMatrixError(f"Q is singular at v = {blocks.v} (not subsonic?)")
    Z = -np.linalg.solve(Q, np.eye(3) + 1j * blocks.S)
    return Impedance(Z, blocks.v)


def riccati_residual(Z, mat: ElasticMaterial, g: Geometry, v: float) -> np.ndarray:
    """Left-hand side ``(Z - i(mn))(nn)^-1 (Z + i(nm)) - (mm) + rho v^2 I``."""
    Z = np.asarray(Z, dtype=complex)
    nn = contract_pq(mat, g.n, g.n)
    mn = contract_pq(mat, g.m, g.n)
    mm = contract_pq(mat, g.m, g.m)
    return (Z - 1j * mn) @ np.linalg.solve(nn, Z + 1j * mn.T) - mm + mat.density * v**2 * np.eye(3)


def riccati_scale(mat: ElasticMaterial, g: Geometry, v: float) -> float:
    return float(np.linalg.norm(contract_pq(mat, g.m, g.m)) + mat.density * v**2)


def solve_sylvester_vec(A, B, C) -> np.ndarray:
    """Solve ``X B - A X = C`` through the Kronecker (vectorized) form."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    C = np.asarray(C, dtype=complex)
    n, m = C.shape
    # column-major vec: vec(X B) = (B^T kron I) vec X, vec(A X) = (I kron A) vec X
    L = np.kron(B.T, np.eye(n)) - np.kron(np.eye(m), A)
    if np.linalg.cond(L) > 1e12:
        raise SingularMatrixError("Sylvester operator is singular (spectra of A and B overlap)")
    x = np.linalg.solve(L, C.reshape(-1, order="F"))
    return x.reshape((n, m), order="F")


@dataclass
class RiccatiLemmaReport:
    R: np.ndarray
    Z: np.ndarray
    residuals: dict[str, float] = field(default_factory=dict)
    max_re_M1: float = math.nan
    min_re_M2: float = math.nan

    def passed(self, tol: float = 1e-8) -> bool:
        return all(r <= tol for r in self.residuals.values()) and self.max_re_M1 < 0 < self.min_re_M2


def verify_riccati_lemma(mat: ElasticMaterial, g: Geometry, v: float, method: str = "newton") -> RiccatiLemmaReport:
    """Check the sign-function solution of the impedance Riccati equation.

    With ``T = [[-I, I], [iZ, 0]]`` the Riccati equation is equivalent to
    ``iN = T [[M1, M0], [0, M2]] T^-1`` where ``M0 = Z^-1 N3``,
    ``M1 = -Z^-1 (N3 - i N1^T Z)`` and ``M2 = Z^-1 (N3 + i Z N1)``.  The
    Sylvester equation ``R M2 - M1 R = 2 M0`` then gives
    ``sign(iN) = T [[-I, R], [0, I]] T^-1`` with ``R = I - iS``.
    """
    N = build_stroh(mat, g, v).entries
    N1, N3 = N[:3, :3], N[3:, :3]
    X = sign_iN(mat, g, v, method)
    blocks = _blocks_from_sign(X, v, method)
    Z = impedance(blocks).Z
    Zinv = np.linalg.inv(Z)
    M0 = Zinv @ N3
    M1 = -Zinv @ (N3 - 1j * N1.T @ Z)
    M2 = Zinv @ (N3 + 1j * Z @ N1)
    R = solve_sylvester_vec(M1, M2, 2 * M0)
    eye = np.eye(3)
    T = np.block([[-eye, eye], [1j * Z, np.zeros((3, 3))]])
    U = np.block([[-eye, R], [np.zeros((3, 3)), eye]])
    recon = T @ U @ np.linalg.inv(T)
    W = np.block([[M1, M0], [np.zeros((3, 3)), M2]])
    c0 = mat.reference_modulus()
    iN_bal = balance(1j * N, c0)
    report = RiccatiLemmaReport(R=R, Z=Z)
    report.residuals = {
        "sylvester": _rel(R @ M2 - M1 @ R - 2 * M0, max(np.linalg.norm(M0), 1.0)),
        "R=I-iS": float(np.linalg.norm(R - (eye - 1j * blocks.S))),
        "sign_reconstruction": _rel(balance(recon - X, c0), np.linalg.norm(balance(X, c0))),
        "block_triangularization": _rel(balance(T @ W @ np.linalg.inv(T), c0) - iN_bal, np.linalg.norm(iN_bal)),
        "riccati": _rel(riccati_residual(Z, mat, g, v), riccati_scale(mat, g, v)),
    }
    report.max_re_M1 = float(np.linalg.eigvals(M1).real.max())
    report.min_re_M2 = float(np.linalg.eigvals(M2).real.min())
    return report


def dispersion_functions(blocks: BarnettLotheBlocks, Z) -> dict[str, float]:
    """The equivalent real dispersion functions, all vanishing at ``v_s``.

    ``rank1_B`` is ``(tr B)^2 - tr(B^2)``, zero when ``B`` has rank one.
    """
    if isinstance(Z, Impedance):
        Z = Z.Z
    S, B = blocks.S, blocks.B
    return {
        "det_Z": float(np.linalg.det(0.5 * (Z + Z.conj().T)).real),
        "trS2_plus2": float(np.trace(S @ S) + 2.0),
        "det_B": float(np.linalg.det(B)),
        "rank1_B": float(np.trace(B) ** 2 - np.trace(B @ B)),
    }


@dataclass
class SurfaceWaveSolution:
    """Converged surface-wave speed with the surface null vector and residuals.

    ``exponents`` are the three eigenvalues of ``iN`` (or ``iN~``) with negative
    real part: the partial modes decay as ``exp(k lambda y)`` with depth.
    """

    v_s: float
    null_vector: np.ndarray
    exponents: np.ndarray
    residuals: dict[str, float]
    v_hat: float
    method: str
    evaluations: int = 0

    def to_record(self) -> dict:
        return {
            "v_s": self.v_s,
            "v_hat": self.v_hat,
            "method": self.method,
            "null_vector": [[float(z.real), float(z.imag)] for z in self.null_vector],
            "exponents": [[float(z.real), float(z.imag)] for z in self.exponents],
            "residuals": dict(self.residuals),
        }


def surface_indicator(mat, g, v, which: str = "min_eig_Z", method: str = DEFAULT_METHOD) -> float:
    """Scalar dispersion indicator at speed ``v``.

    ``which`` is one of ``min_eig_Z``, ``det_Z``, ``trS2_plus2``.
    """
    blocks = barnett_lothe(mat, g, v, method)
    Z = impedance(blocks)
    if which == "min_eig_Z":
        return Z.min_eig
    return dispersion_functions(blocks, Z)[which]


def indicator_root(mat, g, which: str, lo: float, hi: float, tol: float = 1e-10, method: str = DEFAULT_METHOD) -> float:
    """Root of a dispersion indicator bracketed in ``[lo, hi]``."""
    f = lambda v: surface_indicator(mat, g, v, which, method)  # noqa: E731
    return brentq(f, lo, hi, xtol=tol * hi, rtol=max(tol, 4 * np.finfo(float).eps))


def _scan_fractions(tol: float) -> np.ndarray:
    coarse = np.linspace(0.05, 0.95, 19)
    fine = 1.0 - np.logspace(-2, np.log10(max(tol, 1e-12)), 12)
    return np.concatenate([coarse, fine])


def solve_surface_speed(
    mat: ElasticMaterial,
    g: Geometry | None = None,
    tol: float = 1e-10,
    method: str = DEFAULT_METHOD,
) -> SurfaceWaveSolution:
    """Subsonic surface-wave speed of a homogeneous half-space.

    The smallest eigenvalue of the impedance is positive below ``v_s`` and
    changes sign there; it is scanned upward towards the limiting speed to
    find a bracket, then refined with Brent's method to relative tolerance
    ``tol``.

    Raises
    ------
    NoSurfaceWaveError
        If ``min eig Z`` stays positive up to ``v_hat (1 - tol)``.
    """
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    g = Geometry() if g is None else g
    v_hat = limiting_speed(mat, g, tol=min(tol, 1e-10)).v_hat
    count = 0

    def f(v):
        nonlocal count
        count += 1
        try:
            return impedance(barnett_lothe(mat, g, v, method)).min_eig
        except ConvergenceError:
            # quadrature stalls as v -> v_hat; Newton does not
            return impedance(barnett_lothe(mat, g, v, "scaled_newton")).min_eig

    lo, f_lo = 0.0, f(0.0)
    hi = None
    for frac in _scan_fractions(tol):
        v = frac * v_hat
        try:
            fv = f(v)
        except (NotSubsonicError, SingularMatrixError):
            break
        if fv <= 0.0:
            hi = v
            break
        lo, f_lo = v, fv
    if hi is None:
        raise NoSurfaceWaveError(f"min eig Z stays positive up to {lo:.6g} m/s (v_hat = {v_hat:.6g} m/s)")
    v_s = brentq(f, lo, hi, xtol=tol * v_hat, rtol=max(tol, 4 * np.finfo(float).eps))
    return _finish_solution(mat, g, v_s, v_hat, method, count)


def _finish_solution(mat, g, v_s, v_hat, method, count) -> SurfaceWaveSolution:
    blocks = barnett_lothe(mat, g, v_s, method)
    Z = impedance(blocks)
    A = np.eye(3) + 1j * blocks.S
    _, sv, Vh = np.linalg.svd(A)
    vec = Vh[-1].conj()
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[k]) / vec[k])  # fix the phase: largest component real
    N = build_stroh(mat, g, v_s).entries
    lam = np.linalg.eigvals(1j * balance(N, mat.reference_modulus()))
    lam = np.sort_complex(lam[lam.real < 0])
    disp = dispersion_functions(blocks, Z)
    nB = np.linalg.norm(blocks.B)
    residuals = {
        "I+iS_null": float(sv[-1]),
        "B_null": float(np.linalg.norm(blocks.B @ vec) / nB),
        "min_eig_Z_rel": Z.min_eig / float(np.linalg.norm(Z.Z)),
        "trS2_plus2": disp["trS2_plus2"],
        "rank1_B_rel": disp["rank1_B"] / nB**2,
        "riccati": _rel(riccati_residual(Z.Z, mat, g, v_s), riccati_scale(mat, g, v_s)),
    }
    return SurfaceWaveSolution(float(v_s), vec, lam, residuals, float(v_hat), method, count)

