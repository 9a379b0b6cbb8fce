import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from strohsign.elastic import ElasticMaterial, ElasticTensor
from strohsign.errors import InvalidParameterError, NoSurfaceWaveError
from strohsign.matsign import sign_newton
from strohsign.periodic import (
    LaminateSpec,
    Lattice,
    PWESystem,
    assemble_pwe,
    dispersion_sweep,
    laminate_fourier,
    periodic_blocks,
    periodic_blocks_integral,
    rotated_pwe_blocks,
    solve_periodic_speed,
    subsonic_window,
    _worker_count,
)
from strohsign.stroh import Geometry, balance, block_swap, build_stroh
from strohsign.surface import barnett_lothe, solve_surface_speed
from strohsign.table import STATUS_NO_ROOT, STATUS_OK


def backus(m1: ElasticMaterial, m2: ElasticMaterial, f: float) -> ElasticMaterial:
    """Long-wave effective medium of a laminate with layer normal e1.

    Tractions on the layer planes (Voigt 11, 12, 13) and in-plane strains
    (22, 33, 23) are continuous; averaging the mixed compliance/stiffness
    partition gives the exact static homogenization.
    """
    N, T = [0, 5, 4], [1, 2, 3]

    def parts(mat):
        C = mat.stiffness.voigt
        iNN = np.linalg.inv(C[np.ix_(N, N)])
        return iNN, iNN @ C[np.ix_(N, T)], C[np.ix_(T, T)] - C[np.ix_(T, N)] @ iNN @ C[np.ix_(N, T)], C[np.ix_(T, N)] @ iNN

    avg = [f * a + (1 - f) * b for a, b in zip(parts(m1), parts(m2))]
    CNN = np.linalg.inv(avg[0])
    CNT = CNN @ avg[1]
    V = np.zeros((6, 6))
    V[np.ix_(N, N)] = CNN
    V[np.ix_(N, T)] = CNT
    V[np.ix_(T, N)] = CNT.T
    V[np.ix_(T, T)] = avg[2] + avg[3] @ CNN @ avg[1]
    return ElasticMaterial(ElasticTensor.from_voigt(V), f * m1.density + (1 - f) * m2.density, "effective")


@pytest.fixture(scope="module")
def cu_al(copper, aluminum):
    return LaminateSpec(copper, aluminum, 0.5, 1.0)


@pytest.fixture(scope="module")
def cu_st(copper, steel):
    return LaminateSpec(copper, steel, 0.5, 1.0)


# lattice and Fourier data


def test_reciprocal_vectors():
    lat = Lattice(np.array([2.0, 0.5]), np.array([-0.3, 1.5]), (1, 1))
    b1, b2 = lat.reciprocal
    A = np.column_stack([lat.a1, lat.a2])
    assert np.allclose(A.T @ np.column_stack([b1, b2]), np.eye(2))
    assert lat.size == 9
    assert np.allclose(lat.g_vectors()[lat.size // 2], 0)


def test_lattice_validation():
    with pytest.raises(InvalidParameterError):
        Lattice(np.array([1.0, 0.0]), np.array([2.0, 0.0]))
    with pytest.raises(InvalidParameterError):
        Lattice(np.array([1.0, 0.0]), np.array([0.0, 1.0]), (-1, 0))


def test_first_zone():
    lat = Lattice.laminate(1.0, nh=3)
    assert lat.in_first_zone([np.pi, 0.0])
    assert not lat.in_first_zone([1.2 * np.pi, 0.0])
    # no periodicity transversely, so any transverse wavenumber is admissible
    assert lat.in_first_zone([0.0, 10.0])


def test_spec_validation(copper, aluminum):
    with pytest.raises(InvalidParameterError):
        LaminateSpec(copper, aluminum, 1.0)
    with pytest.raises(InvalidParameterError):
        LaminateSpec(copper, aluminum, 0.5, -1.0)
    with pytest.raises(InvalidParameterError):
        LaminateSpec(copper, aluminum, 0.5, 1.0, axis=(1.0, 1.0))


def test_even_harmonics_vanish(cu_al):
    tab = laminate_fourier(cu_al, cu_al.lattice(3))
    scale = np.abs(tab.stiffness((0, 0))).max()
    for n in (2, 4, -2, 6):
        assert np.abs(tab.stiffness((n, 0))).max() < 1e-15 * scale
        assert abs(tab.density((n, 0))) < 1e-12


def test_identical_materials_no_harmonics(copper):
    spec = LaminateSpec(copper, copper, 0.3, 1.0)
    tab = laminate_fourier(spec, spec.lattice(2))
    for order in tab.orders:
        if order != (0, 0):
            assert np.abs(tab.stiffness(order)).max() < 1e-15 * copper.c.max()
    assert np.allclose(tab.stiffness((0, 0)).real, copper.c)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("offset", [0.0, 0.17])
def test_fourier_quadrature_oracle(cu_al, offset):
    spec = LaminateSpec(cu_al.mat1, cu_al.mat2, 0.5, 1.0, offset=offset)
    tab = laminate_fourier(spec, spec.lattice(3))

    def h(x, which):
        m = spec.material_at(x)
        return m.density if which is None else m.c[which]

    for n in (1, 3):
        for which in (None, (0, 0, 0, 0), (0, 1, 0, 1)):
            pts = [offset - 0.25, offset + 0.25]
            re = quad(lambda x: h(x, which) * np.cos(2 * np.pi * n * x), -0.5, 0.5, points=pts, epsabs=0, epsrel=1e-12)[0]
            im = quad(lambda x: -h(x, which) * np.sin(2 * np.pi * n * x), -0.5, 0.5, points=pts, epsabs=0, epsrel=1e-12)[0]
            got = tab.density((n, 0)) if which is None else tab.stiffness((n, 0))[which]
            ref = complex(re, im)
            assert abs(got - ref) < 1e-10 * max(abs(ref), h(0.0, which))


def test_fourier_hermitian(cu_al):
    spec = LaminateSpec(cu_al.mat1, cu_al.mat2, 0.3, 1.0, offset=0.11)
    tab = laminate_fourier(spec, spec.lattice(2))
    for n in range(1, 5):
        assert np.allclose(tab.stiffness((-n, 0)), np.conj(tab.stiffness((n, 0))))


# assembly


def test_homogeneous_block_diagonal(copper):
    spec = LaminateSpec(copper, copper, 0.5, 1.0)
    ps = assemble_pwe(spec, spec.lattice(2), 1.0, 0.0, 1500.0)
    N = ps.entries
    nb = ps.size
    idx0 = nb // 2
    sel = np.r_[3 * idx0 : 3 * idx0 + 3, 3 * nb + 3 * idx0 : 3 * nb + 3 * idx0 + 3]
    N0 = N[np.ix_(sel, sel)]
    Nh = build_stroh(copper, Geometry(), 1500.0).entries
    assert np.linalg.norm(N0 - Nh) < 1e-12 * np.linalg.norm(Nh)
    # off-diagonal coupling between different g vanishes
    mask = np.ones_like(N, dtype=bool)
    for j in range(nb):
        for off_r in (0, 3 * nb):
            for off_c in (0, 3 * nb):
                mask[off_r + 3 * j : off_r + 3 * j + 3, off_c + 3 * j : off_c + 3 * j + 3] = False
    assert np.abs(N[mask]).max() < 1e-12 * np.abs(N).max()


def test_symmetric_cell_real(cu_al):
    ps = assemble_pwe(cu_al, cu_al.lattice(3), 2.0, 0.4, 1800.0)
    assert np.abs(ps.entries.imag).max() < 1e-10 * np.linalg.norm(ps.entries)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_hermitian_K_symmetry(cu_al, seed):
    rng = np.random.default_rng(seed)
    spec = LaminateSpec(cu_al.mat1, cu_al.mat2, rng.uniform(0.2, 0.8), 1.0, offset=rng.uniform(0, 1))
    ps = assemble_pwe(spec, spec.lattice(2), rng.uniform(0.1, np.pi), rng.uniform(0, np.pi / 2), rng.uniform(0, 2000))
    N = ps.entries
    K = block_swap(N.shape[0] // 2)
    assert np.linalg.norm(K @ N.conj().T @ K - N) < 1e-10 * np.linalg.norm(N)


def test_T_positive_definite(cu_st):
    sys_ = PWESystem(cu_st, cu_st.lattice(5), 1.0, 0.2)
    assert sys_.t_inertia == (3 * 11, 0)
    assert np.all(np.linalg.eigvalsh(sys_.T) > 0)


def test_outside_zone_warns(cu_al):
    with pytest.warns(UserWarning, match="Brillouin"):
        PWESystem(cu_al, cu_al.lattice(2), 4.0, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        PWESystem(cu_al, cu_al.lattice(2), 4.0, np.pi / 2)


# blocks


def test_homogeneous_blocks_match(copper):
    spec = LaminateSpec(copper, copper, 0.5, 1.0)
    ps = assemble_pwe(spec, spec.lattice(2), 1.0, 0.0, 1500.0)
    b = periodic_blocks(ps)
    i0 = 3 * (ps.size // 2)
    h = barnett_lothe(copper, Geometry(), 1500.0, "newton")
    sl = slice(i0, i0 + 3)
    assert np.linalg.norm(b.S[sl, sl] - h.S) < 1e-9
    assert np.linalg.norm(b.Q[sl, sl] - h.Q) < 1e-9 * np.linalg.norm(h.Q)
    assert np.linalg.norm(b.B[sl, sl] - h.B) < 1e-9 * np.linalg.norm(h.B)
    off = b.S.copy()
    for j in range(ps.size):
        off[3 * j : 3 * j + 3, 3 * j : 3 * j + 3] = 0
    assert np.abs(off).max() < 1e-9


@pytest.mark.parametrize("psi", [0.0, 0.7, 1.5])
def test_periodic_identities(cu_al, psi):
    ps = assemble_pwe(cu_al, cu_al.lattice(3), np.pi / 2, psi, 1600.0)
    b = periodic_blocks(ps)
    res = b.identity_residuals()
    assert max(res.values()) < 1e-9, res
    d = b.det_I_plus_iS()
    assert abs(d.imag) < 1e-8 * max(1.0, abs(d))


def test_detS_generally_nonzero(cu_al):
    # unlike the homogeneous case, no zero-determinant constraint on S~
    b = periodic_blocks(assemble_pwe(cu_al, cu_al.lattice(2), 2.0, 0.3, 1500.0))
    assert np.isfinite(np.linalg.det(b.S))


def test_newton_vs_spectral(cu_al):
    ps = assemble_pwe(cu_al, cu_al.lattice(3), np.pi / 2, 0.5, 1800.0)
    a, b = periodic_blocks(ps, "newton"), periodic_blocks(ps, "spectral")
    assert np.linalg.norm(a.S - b.S) < 1e-8 * max(1, np.linalg.norm(a.S))
    assert np.linalg.norm(a.Q - b.Q) < 1e-8 * np.linalg.norm(a.Q)
    assert np.linalg.norm(a.B - b.B) < 1e-8 * np.linalg.norm(a.B)


def test_projector_rank(cu_al):
    ps = assemble_pwe(cu_al, cu_al.lattice(2), 1.0, 0.3, 1500.0)
    s = ps.size
    Nt = ps.entries
    scale = np.sqrt(np.linalg.norm(Nt[3 * s :, : 3 * s]) / np.linalg.norm(Nt[: 3 * s, 3 * s :]))
    X = sign_newton(1j * balance(Nt, scale))
    Pm = 0.5 * (np.eye(6 * s) - X)
    assert np.linalg.matrix_rank(Pm, tol=1e-8) == 3 * s


def test_complex_cell_eigenvectors_not_conjugate(cu_al):
    def conj_residual(spec):
        ps = assemble_pwe(spec, spec.lattice(2), 1.3, 0.4, 1500.0)
        M = 1j * ps.entries
        w, V = np.linalg.eig(M)
        j = int(np.argmin(w.real))
        xi = V[:, j]
        # spectrum is always closed under lambda -> -conj(lambda)
        assert np.min(np.abs(w + np.conj(w[j]))) < 1e-6 * np.abs(w).max()
        r = M @ np.conj(xi) + np.conj(w[j]) * np.conj(xi)
        return np.linalg.norm(r) / (np.abs(w[j]) * np.linalg.norm(xi))

    assert conj_residual(cu_al) < 1e-8
    skew = LaminateSpec(cu_al.mat1, cu_al.mat2, 0.5, 1.0, offset=0.2)
    assert conj_residual(skew) > 1e-3


# angular average form


def test_rotated_blocks_reduce_to_brackets(copper):
    from strohsign.stroh import bracket_blocks

    spec = LaminateSpec(copper, copper, 0.5, 1.0)
    lat = Lattice.laminate(1.0, nh=0)
    ps = assemble_pwe(spec, lat, 1.0, 0.0, 1200.0)
    thetas = np.array([0.3, 1.1, 2.0])
    Tt, Rt, Tq = rotated_pwe_blocks(ps.T, ps.R, ps.P, thetas)
    ss, sr, rs, rr = bracket_blocks(copper, Geometry(), 1200.0, thetas)
    scale = np.abs(rr).max()
    assert np.abs(Tt - ss).max() < 1e-12 * scale
    assert np.abs(Rt - rs).max() < 1e-12 * scale
    assert np.abs(Tq - rr).max() < 1e-12 * scale


def test_integral_matches_newton(cu_st):
    ps = assemble_pwe(cu_st, cu_st.lattice(3), np.pi / 2, 0.3, 1900.0)
    a, b = periodic_blocks(ps), periodic_blocks_integral(ps)
    assert np.linalg.norm(a.S - b.S) < 1e-7 * max(1, np.linalg.norm(a.S))
    assert np.linalg.norm(a.Q - b.Q) < 1e-7 * np.linalg.norm(a.Q)
    assert np.linalg.norm(a.B - b.B) < 1e-7 * np.linalg.norm(a.B)


def test_integral_refinement(cu_al):
    ps = assemble_pwe(cu_al, cu_al.lattice(3), 1.0, 0.3, 1500.0)
    a, b = periodic_blocks_integral(ps, 256), periodic_blocks_integral(ps, 512)
    assert np.linalg.norm(a.S - b.S) < 1e-8 * max(1, np.linalg.norm(b.S))
    assert np.linalg.norm(a.B - b.B) < 1e-8 * np.linalg.norm(b.B)


def test_sign_convention_of_rotated_coupling(cu_al):
    # the alternative R_t = c^2 R + s^2 R^+ + sc (T + P) does not reproduce sign(iN~)
    ps = assemble_pwe(cu_al, cu_al.lattice(3), 1.0, 0.3, 1500.0)
    n = 512
    th = np.pi * np.arange(n) / n
    c, s = np.cos(th)[:, None, None], np.sin(th)[:, None, None]
    T, R, P = ps.T, ps.R, ps.P
    Tt = c**2 * T + s**2 * P - s * c * (R + R.conj().T)
    Rt_alt = c**2 * R + s**2 * R.conj().T + s * c * (T + P)
    S_alt = -(np.linalg.inv(Tt) @ np.conj(np.swapaxes(Rt_alt, 1, 2))).mean(axis=0)
    S = periodic_blocks(ps).S
    assert np.linalg.norm(S_alt - S) > 0.1 * np.linalg.norm(S)
    assert np.linalg.norm(periodic_blocks_integral(ps, n).S - S) < 1e-12 * np.linalg.norm(S)


# speeds


@pytest.mark.parametrize("nh, k, psi", [(1, 0.3, 0.0), (2, 1.7, 0.5), (3, 3.0, 1.2), (3, 0.9, np.pi / 2)])
def test_homogenization_limit(copper, nh, k, psi):
    spec = LaminateSpec(copper, copper, 0.5, 1.0)
    ref = solve_surface_speed(copper).v_s
    assert solve_periodic_speed(spec, k, psi, nh=nh).v_s == pytest.approx(ref, rel=1e-6)


def test_two_dimensional_lattice_pathway(cu_al):
    lat = Lattice(np.array([1.0, 0.0]), np.array([0.0, 1.0]), (2, 1))
    v2 = solve_periodic_speed(cu_al, 1.0, 0.4, lattice=lat, tol=1e-12).v_s
    v1 = solve_periodic_speed(cu_al, 1.0, 0.4, nh=2, tol=1e-12).v_s
    assert v2 == pytest.approx(v1, rel=1e-9)


def test_monotone_in_psi(cu_al):
    v = [solve_periodic_speed(cu_al, np.pi / 2, np.radians(p)).v_s for p in range(0, 91, 15)]
    assert np.all(np.diff(v) >= 0)


def test_monotone_in_k(cu_al):
    v = [solve_periodic_speed(cu_al, k, 0.0).v_s for k in np.pi * np.arange(1, 13) / 12]
    assert np.all(np.diff(v) <= 0)


def test_truncation_convergence(cu_al):
    v = {nh: solve_periodic_speed(cu_al, np.pi / 2, 0.0, nh=nh, tol=1e-12).v_s for nh in (1, 3, 5, 7)}
    d = [abs(v[3] - v[1]), abs(v[5] - v[3]), abs(v[7] - v[5])]
    assert d[0] > d[1] > d[2]


def test_small_k_continuity(cu_al):
    v = [solve_periodic_speed(cu_al, k, 0.0).v_s for k in (0.02, 0.04, 0.08)]
    assert abs(v[1] - v[0]) < 0.01 * v[0] and abs(v[2] - v[1]) < 0.01 * v[1]


def test_long_wave_limit_backus(steel, aluminum):
    spec = LaminateSpec(steel, aluminum, 0.5, 1.0)
    eff = solve_surface_speed(backus(steel, aluminum, 0.5)).v_s
    v10 = solve_periodic_speed(spec, 0.01, 0.0, nh=10).v_s
    v20 = solve_periodic_speed(spec, 0.01, 0.0, nh=20).v_s
    # truncation error decays like 1/N_h; Richardson removes the leading term
    assert abs(2 * v20 - v10 - eff) < 1e-3 * eff
    assert abs(v20 - eff) < abs(v10 - eff)


def test_no_root_across_layers_mode(steel, aluminum):
    # long-wave St/Al along the layers: the effective medium has no subsonic surface wave
    with pytest.raises(NoSurfaceWaveError):
        solve_surface_speed(backus(steel, aluminum, 0.5), Geometry(np.array([0.0, 0, 1.0]), np.array([0, 1.0, 0])))
    spec = LaminateSpec(steel, aluminum, 0.5, 1.0)
    with pytest.raises(NoSurfaceWaveError):
        solve_periodic_speed(spec, np.pi / 12, np.pi / 2)


def test_solution_diagnostics(cu_al):
    sol = solve_periodic_speed(cu_al, 1.0, 0.2, diagnose=True)
    r = sol.residuals
    assert r["I+iS_null"] < 1e-6 and r["B_null"] < 1e-6
    assert abs(r["combined_min_eig_rel"]) < 1e-10
    assert sol.v_s < r["window"]
    assert np.all(sol.exponents.real < 0)
    assert min(r["sigma_min_L1"], r["sigma_min_L2"]) < 1e-6


def test_window_below_bulk(cu_al):
    sys_ = PWESystem(cu_al, cu_al.lattice(3), 1.0, 0.0)
    w = subsonic_window(sys_)
    assert 0 < w < max(np.sqrt(cu_al.mat1.c[0, 1, 0, 1] / cu_al.mat1.density), np.sqrt(cu_al.mat2.c[0, 1, 0, 1] / cu_al.mat2.density))


# sweeps


def test_single_point_sweep(cu_al):
    tab = dispersion_sweep(cu_al, [1.0], [30.0], nh=3, workers=1)
    assert len(tab) == 1
    assert tab.rows[0].v_s == solve_periodic_speed(cu_al, 1.0, np.radians(30.0), nh=3).v_s


def test_sweep_order_and_parallel(cu_al):
    ks, psis = [0.5, 2.0], [90.0, 0.0]
    serial = dispersion_sweep(cu_al, ks, psis, nh=2, workers=1)
    parallel = dispersion_sweep(cu_al, ks, psis, nh=2, workers=2)
    assert [(r.psi_deg, r.k) for r in serial.rows] == [(90.0, 0.5), (90.0, 2.0), (0.0, 0.5), (0.0, 2.0)]
    assert serial.to_csv() == parallel.to_csv()


def test_sweep_flags_no_root(steel, aluminum):
    spec = LaminateSpec(steel, aluminum, 0.5, 1.0)
    tab = dispersion_sweep(spec, [np.pi / 12, np.pi], [90.0], workers=1)
    assert [r.status for r in tab.rows] == [STATUS_NO_ROOT, STATUS_OK]
    assert np.isnan(tab.rows[0].v_s)


def test_sweep_rejects_empty(cu_al):
    with pytest.raises(InvalidParameterError):
        dispersion_sweep(cu_al, [], [0.0])


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("STROH_SIGN_THREADS", "1")
    assert _worker_count(8) == 1
    monkeypatch.setenv("STROH_SIGN_THREADS", "x")
    with pytest.raises(InvalidParameterError):
        _worker_count(2)
    monkeypatch.delenv("STROH_SIGN_THREADS")
    assert _worker_count(3) == 3
