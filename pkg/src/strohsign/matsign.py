"""Dense matrix sign, spectral projector and disk function kernels.

Every kernel accepts a square (real or complex) array and returns complex
arrays.  The sign function is undefined for eigenvalues on the imaginary
axis, so all entry points run :func:`check_axis` first.

Available evaluation routes for ``sign M``:

* ``newton`` / ``scaled_newton`` -- the iteration ``M <- (M + M^-1) / 2``,
  optionally with determinant scaling;
* ``integral`` -- the angular average ``<M_theta>`` of the Mobius family
  ``M_theta = (cos t I - i sin t M)^-1 (cos t M - i sin t I)`` by the
  periodic trapezoid rule;
* ``spectral`` -- eigendecomposition, ``Gamma diag(+-1) Gamma^-1``;
* ``disk`` -- ``I - 2 disk((M - I)^-1 (M + I))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AxisSpectrumError,
    ConvergenceError,
    DefectiveMatrixError,
    InvalidParameterError,
    SingularMatrixError,
)

__all__ = [
    "AXIS_RTOL",
    "GAP_RTOL",
    "METHODS",
    "SpectralSplit",
    "axis_distance",
    "check_axis",
    "sign",
    "sign_newton",
    "sign_integral",
    "sign_spectral",
    "sign_via_disk",
    "mobius_family",
    "projectors",
    "projector_contour",
    "cayley",
    "disk",
    "spectral_function",
    "min_gap",
]

AXIS_RTOL = 1e-8
GAP_RTOL = 1e-8
_COND_MAX = 1e14
_EIGVEC_COND_MAX = 1e10

METHODS = ("newton", "scaled_newton", "integral", "spectral", "disk")

CONTOUR_SHIFTS = (1.0, 1 + 0.3j, 1 - 0.3j, 2.0, 0.5, 2 + 0.6j, 2 - 0.6j, 4.0)


def _square(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidParameterError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidParameterError("matrix has non-finite entries")
    return M


def axis_distance(M, eigvals=None) -> float:
    """Smallest ``|Re lambda|`` relative to ``max(1, ||M||_F)``."""
    M = _square(M)
    if eigvals is None:
        eigvals = np.linalg.eigvals(M)
    return float(np.min(np.abs(eigvals.real)) / max(1.0, np.linalg.norm(M)))


def check_axis(M, eigvals=None, rtol: float = AXIS_RTOL) -> np.ndarray:
    """Raise :class:`AxisSpectrumError` if an eigenvalue is too close to the axis.

    Returns the eigenvalues so callers can reuse them.
    """
    M = _square(M)
    if eigvals is None:
        eigvals = np.linalg.eigvals(M)
    d = axis_distance(M, eigvals)
    if d < rtol:
        k = int(np.argmin(np.abs(eigvals.real)))
        raise AxisSpectrumError(
            f"eigenvalue {eigvals[k]:.6g} within {d:.3g} (relative) of the imaginary axis"
        )
    return eigvals


def _inv(A: np.ndarray, what: str = "iterate") -> np.ndarray:
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"singular {what}") from exc
    if not np.all(np.isfinite(Ainv)) or np.linalg.norm(A) * np.linalg.norm(Ainv) > _COND_MAX:
        raise SingularMatrixError(f"numerically singular {what}")
    return Ainv


def sign_newton(
    M,
    tol: float = 1e-12,
    max_iter: int = 100,
    scaled: bool = False,
    full_output: bool = False,
    precheck: bool = True,
):
    """Matrix sign by Newton iteration.

    Parameters
    ----------
    M : array_like
        Square matrix with no eigenvalue on the imaginary axis.
    tol : float
        Stop once the relative Frobenius step falls below ``tol``.
    max_iter : int
    scaled : bool
        Apply determinant scaling ``M_k / |det M_k|^(1/n)`` while the
        iteration is still far from converged.
    full_output : bool
        Also return a dict with ``iterations`` and ``involution`` residual.

    Raises
    ------
    AxisSpectrumError, SingularMatrixError, ConvergenceError
    """
    X = _square(M)
    if precheck:
        check_axis(X)
    n = X.shape[0]
    step = np.inf
    for it in range(1, max_iter + 1):
        Xinv = _inv(X)
        if scaled and step > 1e-2:
            _, logdet = np.linalg.slogdet(X)
            mu = np.exp(-logdet / n)
            Xnew = 0.5 * (mu * X + Xinv / mu)
        else:
            Xnew = 0.5 * (X + Xinv)
        step = np.linalg.norm(Xnew - X) / np.linalg.norm(Xnew)
        X = Xnew
        if step <= tol:
            break
    else:
        raise ConvergenceError(f"Newton sign iteration did not converge in {max_iter} steps (last step {step:.3g})")
    if full_output:
        info = {"iterations": it, "involution": float(np.linalg.norm(X @ X - np.eye(n)))}
        return X, info
    return X


def mobius_family(M, thetas) -> np.ndarray:
    """Stack of ``M_theta = (cos t I - i sin t M)^-1 (cos t M - i sin t I)``."""
    M = _square(M)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    n = M.shape[0]
    eye = np.eye(n)
    c = np.cos(thetas)[:, None, None]
    s = np.sin(thetas)[:, None, None]
    lhs = c * eye - 1j * s * M
    rhs = c * M - 1j * s * eye
    try:
        return np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        for t, A in zip(thetas, lhs):
            if np.linalg.matrix_rank(A) < n:
                raise SingularMatrixError(f"cos(t) I - i sin(t) M is singular at theta = {t!r}") from None
        raise


def _trapezoid_mean(M, n_nodes: int, offset: bool = False) -> np.ndarray:
    # periodic trapezoid on [0, pi); offset=True gives the midpoints
    j = np.arange(n_nodes) + (0.5 if offset else 0.0)
    return mobius_family(M, np.pi * j / n_nodes).mean(axis=0)


def sign_integral(
    M,
    n_nodes: int | None = None,
    tol: float = 1e-9,
    start_nodes: int = 128,
    max_nodes: int = 1 << 16,
    full_output: bool = False,
    precheck: bool = True,
):
    """Matrix sign as the angular average ``<M_theta>`` over ``[0, pi]``.

    With ``n_nodes`` given, a single periodic trapezoid rule with that many
    nodes is used.  Otherwise the node count starts at ``start_nodes`` and is
    doubled (reusing previous nodes) until two successive averages agree to
    ``tol`` relative.
    """
    M = _square(M)
    if precheck:
        check_axis(M)
    if n_nodes is not None:
        if n_nodes < 8:
            raise InvalidParameterError("n_nodes must be at least 8")
        S = _trapezoid_mean(M, int(n_nodes))
        return (S, {"nodes": int(n_nodes), "change": np.nan}) if full_output else S
    n = int(start_nodes)
    if n < 8:
        raise InvalidParameterError("start_nodes must be at least 8")
    S = _trapezoid_mean(M, n)
    while True:
        S2 = 0.5 * (S + _trapezoid_mean(M, n, offset=True))
        n *= 2
        change = np.linalg.norm(S2 - S) / max(1.0, np.linalg.norm(S2))
        S = S2
        if change <= tol:
            break
        if n >= max_nodes:
            raise ConvergenceError(f"quadrature not converged at {n} nodes (change {change:.3g})")
    return (S, {"nodes": n, "change": float(change)}) if full_output else S


@dataclass(frozen=True)
class SpectralSplit:
    """Eigendecomposition of ``M`` partitioned by the sign of ``Re lambda``.

    ``minus`` and ``plus`` index the columns of ``vectors`` whose eigenvalues
    lie in the left and right half-planes respectively.  ``minus`` is sorted
    so the physical (decaying) modes come out in a stable order.
    ``min_gap`` is the smallest eigenvalue separation relative to
    ``max(1, ||M||_F)``; repeated but semisimple eigenvalues are accepted.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    minus: np.ndarray
    plus: np.ndarray
    condition: float
    min_gap: float

    @property
    def distinct(self) -> bool:
        return self.min_gap >= GAP_RTOL

    @property
    def signs(self) -> np.ndarray:
        return np.where(self.eigenvalues.real > 0, 1.0, -1.0)


def min_gap(eigvals: np.ndarray, scale: float = 1.0) -> float:
    """Smallest pairwise eigenvalue distance relative to ``max(1, scale)``."""
    n = eigvals.size
    if n < 2:
        return np.inf
    diff = np.abs(eigvals[:, None] - eigvals[None, :]) + np.diag(np.full(n, np.inf))
    return float(diff.min() / max(1.0, scale))


def _eig_checked(M: np.ndarray):
    w, V = np.linalg.eig(M)
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > _EIGVEC_COND_MAX:
        raise DefectiveMatrixError(f"matrix is (nearly) defective: eigenvector condition number {cond:.3g}")
    return w, V, cond


def sign_spectral(M) -> tuple[np.ndarray, SpectralSplit]:
    """Matrix sign through an eigendecomposition.

    Returns the sign matrix together with the :class:`SpectralSplit` so
    callers can extract blocks of the eigenvector matrix.
    """
    M = _square(M)
    w, V, cond = _eig_checked(M)
    check_axis(M, w)
    minus = np.flatnonzero(w.real < 0)
    minus = minus[np.lexsort((w[minus].imag, w[minus].real))]
    plus = np.flatnonzero(w.real > 0)
    plus = plus[np.lexsort((w[plus].imag, w[plus].real))]
    s = np.where(w.real > 0, 1.0, -1.0)
    S = np.linalg.solve(V.T, (V * s).T).T
    return S, SpectralSplit(w, V, minus, plus, cond, min_gap(w, np.linalg.norm(M)))


def spectral_function(A, f) -> np.ndarray:
    """Evaluate ``f(A)`` for a diagonalizable matrix via its eigenvectors."""
    A = np.asarray(A, dtype=complex)
    w, V = np.linalg.eig(A)
    return np.linalg.solve(V.T, (V * f(w)).T).T


def _disk_spectral(W: np.ndarray) -> np.ndarray:
    w, V, _ = _eig_checked(W)
    mod = np.abs(w)
    bad = np.abs(mod - 1.0) < AXIS_RTOL * max(1.0, mod.max())
    if np.any(bad):
        raise AxisSpectrumError(f"eigenvalue {w[bad][0]:.6g} on the unit circle")
    inside = (mod < 1.0).astype(float)
    return np.linalg.solve(V.T, (V * inside).T).T


def disk(W) -> np.ndarray:
    """Disk function: projector onto the eigenvalues of ``W`` inside the unit circle."""
    return _disk_spectral(_square(W))


def sign_via_disk(M) -> np.ndarray:
    """``sign M = I - 2 disk((M - I)^-1 (M + I))``."""
    M = _square(M)
    check_axis(M)
    n = M.shape[0]
    eye = np.eye(n)
    W = _inv(M - eye, "matrix M - I") @ (M + eye)
    return eye - 2.0 * disk(W)


def sign(M, method: str = "newton", **kwargs) -> np.ndarray:
    """Dispatch to one of the sign kernels by name (see :data:`METHODS`)."""
    if method == "newton":
        return sign_newton(M, **kwargs)
    if method == "scaled_newton":
        return sign_newton(M, scaled=True, **kwargs)
    if method == "integral":
        return sign_integral(M, **kwargs)
    if method == "spectral":
        return sign_spectral(M)[0]
    if method == "disk":
        return sign_via_disk(M)
    raise InvalidParameterError(f"unknown sign method {method!r}; expected one of {METHODS}")


def projectors(M, method: str = "newton", **kwargs) -> tuple[np.ndarray, np.ndarray]:
    """Spectral projectors ``P+ = (I + sign M)/2`` and ``P- = I - P+``."""
    S = sign(M, method, **kwargs)
    eye = np.eye(S.shape[0])
    P_plus = 0.5 * (eye + S)
    return P_plus, eye - P_plus


def cayley(M, alpha: complex = 1.0, cond_max: float = 1e8) -> tuple[np.ndarray, np.ndarray]:
    """Return ``F = (M - a I)(M + a* I)^-1`` and ``F^-1``.

    Eigenvalues of ``M`` in the right (left) half-plane map inside (outside)
    the unit circle whenever ``Re a > 0``.
    """
    M = _square(M)
    if not np.real(alpha) > 0:
        raise InvalidParameterError("the Cayley shift must lie in the right half-plane")
    eye = np.eye(M.shape[0])
    A = M - alpha * eye
    B = M + np.conj(alpha) * eye
    for mat, label in ((A, "M - a I"), (B, "M + a* I")):
        if np.linalg.cond(mat) > cond_max:
            raise SingularMatrixError(f"{label} is singular for a = {alpha}")
    F = np.linalg.solve(B.T, A.T).T
    Finv = np.linalg.solve(A.T, B.T).T
    return F, Finv


def _unit_circle_projector(F: np.ndarray, n_nodes: int) -> np.ndarray:
    n = F.shape[0]
    z = np.exp(2j * np.pi * np.arange(n_nodes) / n_nodes)
    resolvents = np.linalg.solve(z[:, None, None] * np.eye(n) - F, np.broadcast_to(np.eye(n), (n_nodes, n, n)))
    return (z[:, None, None] * resolvents).mean(axis=0)


def projector_contour(M, n_nodes: int = 256, shifts=CONTOUR_SHIFTS, full_output: bool = False):
    """Projectors ``P+-`` from trapezoidal quadrature around the unit circle.

    ``P+`` integrates the resolvent of the Cayley transform ``F`` and ``P-``
    that of ``F^-1``.  Shifts are tried in order until both Cayley factors
    are well conditioned.
    """
    M = _square(M)
    check_axis(M)
    for alpha in list(shifts)[:8]:
        try:
            F, Finv = cayley(M, alpha)
        except SingularMatrixError:
            continue
        P_plus = _unit_circle_projector(F, n_nodes)
        P_minus = _unit_circle_projector(Finv, n_nodes)
        if full_output:
            return P_plus, P_minus, {"alpha": alpha}
        return P_plus, P_minus
    raise SingularMatrixError("no admissible Cayley shift found")
