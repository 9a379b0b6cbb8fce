"""Invariant checks across all modules, used by ``strohsign verify``.

Every check returns a :class:`CheckResult` carrying the measured residual and
the tolerance it was held to.  ``inject`` names a check whose principal
computed quantity is perturbed before testing (a negative control).
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, replace
from typing import Callable

import numpy as np

from . import matsign
from .config import load_material
from .elastic import ElasticMaterial
from .errors import InvalidParameterError
from .periodic import LaminateSpec, PWESystem, periodic_blocks, periodic_blocks_integral, solve_periodic_speed
from .stroh import Geometry, balance, block_swap, build_stroh, fundamental_stack, limiting_speed
from .surface import (
    barnett_lothe,
    barnett_lothe_integral,
    impedance,
    riccati_residual,
    riccati_scale,
    solve_surface_speed,
    stroh_modes,
    verify_riccati_lemma,
)

__all__ = ["CheckResult", "CHECKS", "SUBSETS", "run_checks", "rayleigh_secular_root"]

_SEED = 20240611
_PERTURBATION = 1e-4


@dataclass
class CheckResult:
    name: str
    family: str
    residual: float
    tol: float
    passed: bool
    seconds: float = 0.0
    detail: str = ""

    def to_record(self) -> dict:
        return asdict(self)


def rayleigh_secular_root(mat: ElasticMaterial, tol: float = 1e-15) -> float:
    """Isotropic Rayleigh speed from the scalar secular equation, by bisection.

    ``(2 - x)^2 = 4 sqrt(1 - kappa x) sqrt(1 - x)`` with ``x = v^2 / v_t^2`` and
    ``kappa = v_t^2 / v_l^2``; read ``mu`` and ``lambda + 2 mu`` off the
    stiffness diagonal.
    """
    V = mat.stiffness.voigt
    mu, lam2mu = V[3, 3], V[0, 0]
    kappa = mu / lam2mu

    def f(x):
        return (2 - x) ** 2 - 4 * np.sqrt(1 - kappa * x) * np.sqrt(1 - x)

    lo, hi = 1e-6, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return float(np.sqrt(0.5 * (lo + hi) * mu / mat.density))


def _random_offaxis(n: int, rng, margin: float = 0.2) -> np.ndarray:
    """Random complex matrix whose eigenvalues keep |Re| >= margin."""
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    w, V = np.linalg.eig(X)
    w = np.where(np.abs(w.real) < margin, w + np.sign(w.real + 1e-300) * margin, w)
    return V @ np.diag(w) @ np.linalg.inv(V)


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


class _Context:
    def __init__(self, inject: str | None):
        self.inject = inject
        self.rng = np.random.default_rng(_SEED)
        self._materials: dict[str, ElasticMaterial] = {}
        self.geometry = Geometry(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))

    def material(self, name: str) -> ElasticMaterial:
        if name not in self._materials:
            self._materials[name] = load_material(name)
        return self._materials[name]

    def perturb(self, name: str, X: np.ndarray) -> np.ndarray:
        if self.inject != name:
            return X
        E = np.random.default_rng(1).standard_normal(X.shape)
        return X + _PERTURBATION * np.linalg.norm(X) * E / np.linalg.norm(E)


Check = Callable[[_Context], tuple[float, float, str]]
CHECKS: dict[str, tuple[str, Check]] = {}


def _check(name: str, family: str):
    def deco(fn: Check) -> Check:
        CHECKS[name] = (family, fn)
        return fn

    return deco


# kernel


@_check("involution", "kernel")
def _involution(ctx):
    worst = 0.0
    for n in (6, 30):
        M = _random_offaxis(n, ctx.rng)
        for method in matsign.METHODS:
            S = ctx.perturb("involution", matsign.sign(M, method))
            worst = max(worst, np.linalg.norm(S @ S - np.eye(n)) / n)
    return worst, 1e-9, "max ||S^2 - I|| / n over methods, n in {6, 30}"


@_check("commutation", "kernel")
def _commutation(ctx):
    M = _random_offaxis(6, ctx.rng)
    S = ctx.perturb("commutation", matsign.sign(M))
    return float(np.linalg.norm(S @ M - M @ S) / (np.linalg.norm(S) * np.linalg.norm(M))), 1e-9, ""


@_check("similarity_covariance", "kernel")
def _similarity(ctx):
    M = _random_offaxis(6, ctx.rng)
    Q, _ = np.linalg.qr(ctx.rng.standard_normal((6, 6)))
    U = Q @ np.diag(np.linspace(1.0, 3.0, 6))
    Ui = np.linalg.inv(U)
    lhs = ctx.perturb("similarity_covariance", matsign.sign(U @ M @ Ui))
    return _rel(lhs, U @ matsign.sign(M) @ Ui), 1e-9, "U with condition number 3"


@_check("shift_invariance", "kernel")
def _shift(ctx):
    M = _random_offaxis(6, ctx.rng)
    S = matsign.sign(M)
    worst = 0.0
    for a in (0.5, 2.0):
        for b in (-1.0, 1.0):
            Sab = ctx.perturb("shift_invariance", matsign.sign(a * M + 1j * b * np.eye(6)))
            worst = max(worst, _rel(Sab, S))
    return worst, 1e-9, "a in {0.5, 2}, b in {-1, 1}"


@_check("phi_identity", "kernel")
def _phi_identity(ctx):
    phi = np.pi / 4
    M = _random_offaxis(4, ctx.rng, margin=0.5)
    thetas = np.pi * np.arange(1024) / 1024
    fam = matsign.mobius_family(M, thetas)
    sin_avg = np.mean([matsign.spectral_function(phi * A, np.sin) for A in fam], axis=0) / np.sin(phi)
    cos_avg = np.mean([A @ matsign.spectral_function(phi * A, np.cos) for A in fam], axis=0) / np.cos(phi)
    S = matsign.sign_spectral(M)[0]
    sin_avg = ctx.perturb("phi_identity", sin_avg)
    return max(_rel(sin_avg, S), _rel(cos_avg, S)), 1e-6, "phi = pi/4, sine and cosine forms"


def _second_order(err_h: float, err_h2: float, floor: float) -> float:
    """0 when the error ratio shows O(h^2) (or both errors sit at the floor); else |log2 ratio - 2|."""
    if err_h < floor and err_h2 < floor:
        return 0.0
    return abs(np.log2(err_h / err_h2) - 2.0)


@_check("mobius_ode", "kernel")
def _mobius_ode(ctx):
    M = _random_offaxis(6, ctx.rng, margin=0.5)
    t0 = 0.7
    exact = 1j * (matsign.mobius_family(M, [t0])[0] @ matsign.mobius_family(M, [t0])[0] - np.eye(6))
    exact = ctx.perturb("mobius_ode", exact)
    errs = []
    for h in (2e-3, 1e-3):
        Mp, Mm = matsign.mobius_family(M, [t0 + h, t0 - h])
        errs.append(np.linalg.norm((Mp - Mm) / (2 * h) - exact) / np.linalg.norm(exact))
    return _second_order(*errs, floor=1e-10), 0.1, f"FD errors {errs[0]:.3e}, {errs[1]:.3e}"


@_check("fundamental_ode", "kernel")
def _fundamental_ode(ctx):
    mat, g = ctx.material("copper"), ctx.geometry
    v = 0.5 * limiting_speed(mat, g).v_hat
    c0 = mat.reference_modulus()
    t0, errs = 0.4, []
    Nt = balance(fundamental_stack(mat, g, v, [t0])[0], c0)
    exact = ctx.perturb("fundamental_ode", -np.eye(6) - Nt @ Nt)
    for h in (2e-3, 1e-3):
        Np, Nm = (balance(X, c0) for X in fundamental_stack(mat, g, v, [t0 + h, t0 - h]))
        errs.append(np.linalg.norm((Np - Nm) / (2 * h) - exact) / np.linalg.norm(exact))
    return _second_order(*errs, floor=1e-10), 0.1, f"FD errors {errs[0]:.3e}, {errs[1]:.3e}"


@_check("fundamental_commutation", "kernel")
def _fundamental_commutation(ctx):
    mat, g = ctx.material("steel"), ctx.geometry
    v = 0.6 * limiting_speed(mat, g).v_hat
    c0 = mat.reference_modulus()
    A, B = (balance(X, c0) for X in fundamental_stack(mat, g, v, [0.3, 1.9]))
    A = ctx.perturb("fundamental_commutation", A)
    return float(np.linalg.norm(A @ B - B @ A) / (np.linalg.norm(A) * np.linalg.norm(B))), 1e-9, ""


@_check("method_agreement", "kernel")
def _method_agreement(ctx):
    worst = 0.0
    for name in ("copper", "aluminum", "steel"):
        mat, g = ctx.material(name), ctx.geometry
        vh = limiting_speed(mat, g).v_hat
        for frac in (0.3, 0.6, 0.9):
            M = 1j * balance(build_stroh(mat, g, frac * vh).entries, mat.reference_modulus())
            ref = ctx.perturb("method_agreement", matsign.sign_newton(M))
            for method in matsign.METHODS[1:]:
                worst = max(worst, float(np.linalg.norm(matsign.sign(M, method) - ref)))
    return worst, 1e-8, "balanced iN, three materials, v/v_hat in {0.3, 0.6, 0.9}"


# homogeneous half-space


def _v_grid(ctx, name, fracs=(0.3, 0.6, 0.9)):
    mat, g = ctx.material(name), ctx.geometry
    vh = limiting_speed(mat, g).v_hat
    return mat, g, [f * vh for f in fracs]


@_check("barnett_lothe_identities", "homogeneous")
def _bl_identities(ctx):
    worst, nS = 0.0, 0.0
    for name in ("copper", "aluminum", "steel"):
        mat, g, vs = _v_grid(ctx, name)
        for v in vs:
            b = barnett_lothe(mat, g, v, "newton")
            if ctx.inject == "barnett_lothe_identities":
                b = replace(b, S=ctx.perturb("barnett_lothe_identities", b.S))
            res = b.identity_residuals()
            worst = max(worst, max(res.values()))
    return worst, 1e-9, "BS + S^T B, SQ + QS^T, S^2 + QB + I, symmetry, trace, det S, realness"


@_check("lemma1_integral", "homogeneous")
def _lemma1(ctx):
    worst = 0.0
    for name in ("copper", "aluminum", "steel"):
        mat, g, vs = _v_grid(ctx, name)
        for v in vs:
            a = barnett_lothe(mat, g, v, "newton")
            b = barnett_lothe_integral(mat, g, v)
            c0 = mat.reference_modulus()
            S = ctx.perturb("lemma1_integral", a.S)
            worst = max(worst, _rel(b.S, S), _rel(b.Q * c0, a.Q * c0), _rel(b.B / c0, a.B / c0))
    return worst, 1e-8, "angular averages of N_theta vs sign(iN) blocks"


@_check("riccati_residual", "homogeneous")
def _riccati(ctx):
    worst = 0.0
    for name in ("copper", "aluminum", "steel"):
        mat, g, vs = _v_grid(ctx, name, np.linspace(0.02, 0.98, 50))
        for v in vs:
            Z = ctx.perturb("riccati_residual", impedance(barnett_lothe(mat, g, v, "newton")).Z)
            r = np.linalg.norm(riccati_residual(Z, mat, g, v)) / riccati_scale(mat, g, v)
            worst = max(worst, float(r))
    return worst, 1e-8, "50-point subsonic grid per material"


@_check("riccati_lemma", "homogeneous")
def _riccati_lemma(ctx):
    worst = 0.0
    for name in ("copper", "aluminum", "steel"):
        mat, g, vs = _v_grid(ctx, name)
        for v in vs:
            rep = verify_riccati_lemma(mat, g, v)
            res = dict(rep.residuals)
            if ctx.inject == "riccati_lemma":
                res["sylvester"] += _PERTURBATION
            worst = max(worst, max(res.values()))
            if not (rep.max_re_M1 < 0 < rep.min_re_M2):
                return np.inf, 1e-8, f"spectrum split violated for {name} at v = {v}"
    return worst, 1e-8, "Sylvester solve, R = I - iS, sign reconstruction"


@_check("orthogonality", "homogeneous")
def _orthogonality(ctx):
    K = block_swap()
    worst = 0.0
    for name in ("copper", "aluminum", "steel"):
        mat, g, vs = _v_grid(ctx, name)
        for v in vs:
            G = stroh_modes(mat, g, v).Gamma
            G = ctx.perturb("orthogonality", G)
            worst = max(worst, float(np.linalg.norm(G.T @ K @ G - np.eye(6))))
    return worst, 1e-9, "Gamma^T K Gamma = I, nondimensional normalization"


@_check("rayleigh_oracle", "homogeneous")
def _rayleigh(ctx):
    worst = 0.0
    for name in ("copper", "aluminum", "steel"):
        mat = ctx.material(name)
        v = solve_surface_speed(mat, ctx.geometry).v_s
        if ctx.inject == "rayleigh_oracle":
            v *= 1 + _PERTURBATION
        ref = rayleigh_secular_root(mat)
        worst = max(worst, abs(v - ref) / ref)
    return worst, 1e-6, "secular-equation bisection"


# periodic


def _cu_al(ctx) -> LaminateSpec:
    return LaminateSpec(ctx.material("copper"), ctx.material("aluminum"), 0.5, 1.0)


@_check("periodic_identities", "periodic")
def _periodic_identities(ctx):
    spec = _cu_al(ctx)
    worst = 0.0
    for psi in (0.0, 0.8):
        ps = PWESystem(spec, spec.lattice(3), np.pi / 2, psi).stroh(1500.0)
        b = periodic_blocks(ps)
        b = replace(b, S=ctx.perturb("periodic_identities", b.S))
        worst = max(worst, max(b.identity_residuals().values()))
        d = b.det_I_plus_iS()
        worst = max(worst, abs(d.imag) / max(1.0, abs(d)))
    return worst, 1e-9, "Cu/Al, N_h = 3"


@_check("periodic_integral", "periodic")
def _periodic_integral(ctx):
    spec = _cu_al(ctx)
    ps = PWESystem(spec, spec.lattice(3), np.pi / 2, 0.4).stroh(1500.0)
    a, b = periodic_blocks(ps), periodic_blocks_integral(ps, 512)
    S = ctx.perturb("periodic_integral", a.S)
    return max(_rel(b.S, S), _rel(b.Q, a.Q), _rel(b.B, a.B)), 1e-7, "rotated-block averages vs Newton"


@_check("homogenization", "periodic")
def _homogenization(ctx):
    cu = ctx.material("copper")
    spec = LaminateSpec(cu, cu, 0.5, 1.0)
    ref = solve_surface_speed(cu, ctx.geometry).v_s
    worst = 0.0
    for nh, k, psi in ((1, 0.5, 0.0), (2, 2.0, 0.6), (3, 3.0, 1.4)):
        v = solve_periodic_speed(spec, k, psi, nh=nh).v_s
        if ctx.inject == "homogenization":
            v *= 1 + _PERTURBATION
        worst = max(worst, abs(v - ref) / ref)
    return worst, 1e-6, "identical-material laminate vs homogeneous solver"


SUBSETS = {
    "all": None,
    "kernel": ("kernel",),
    "homogeneous": ("homogeneous",),
    "periodic": ("periodic",),
}


def run_checks(subset: str = "all", inject: str | None = None, names=None) -> list[CheckResult]:
    """Run the checks of ``subset`` (or the explicit ``names``) in registry order."""
    if subset not in SUBSETS:
        raise InvalidParameterError(f"unknown subset {subset!r}; choose from {sorted(SUBSETS)}")
    if inject is not None and inject not in CHECKS:
        raise InvalidParameterError(f"unknown check {inject!r} for injection; choose from {sorted(CHECKS)}")
    families = SUBSETS[subset]
    ctx = _Context(inject)
    out = []
    for name, (family, fn) in CHECKS.items():
        if names is not None and name not in names:
            continue
        if names is None and families is not None and family not in families:
            continue
        t0 = time.perf_counter()
        try:
            residual, tol, detail = fn(ctx)
        except Exception as exc:  # a crashing check is a failed check
            residual, tol, detail = np.inf, 0.0, f"{type(exc).__name__}: {exc}"
        residual = float(residual)
        out.append(CheckResult(name, family, residual, tol, bool(residual <= tol), time.perf_counter() - t0, detail))
    return out
