"""Field-core: grids, spectral operators, Sobolev norms, radial machinery."""

import numpy as np
import pytest
from scipy.integrate import quad

import llgauge as lg
from llgauge.errors import ConfigError, DomainCoverageError
from llgauge.fields import (boundary_flatness, dealias, export_field_csv,
                            export_profile_csv, fourier_shift,
                            fourier_upsample, gradient_energy, l2_norm,
                            lift_radial, nonlocal_tail, profile_spline,
                            radial_d1, radial_d2, read_snapshot, sample_ray,
                            write_snapshot)


@pytest.fixture(scope="module")
def grid():
    return lg.PeriodicGrid2D(64, 10.0)


def smooth_random(grid, seed=7, kcap=6, complex_valued=True):
    rng = np.random.default_rng(seed)
    fh = np.zeros((grid.N, grid.N), dtype=complex)
    idx = np.fft.fftfreq(grid.N) * grid.N
    mask = (np.abs(idx[:, None]) <= kcap) & (np.abs(idx[None, :]) <= kcap)
    fh[mask] = rng.normal(size=mask.sum()) + 1j * rng.normal(size=mask.sum())
    f = np.fft.ifft2(fh)
    return f if complex_valued else f.real


def test_grid_validation():
    with pytest.raises(ConfigError):
        lg.PeriodicGrid2D(63, 10.0)
    with pytest.raises(ConfigError):
        lg.PeriodicGrid2D(8, 10.0)
    with pytest.raises(ConfigError):
        lg.PeriodicGrid2D(64, -1.0)


def test_wavenumbers_match_box(grid):
    # k_j = pi j / L
    assert grid.k[1] == pytest.approx(np.pi / grid.L, rel=1e-15)


def test_derivative_of_constant(grid):
    f = np.full((grid.N, grid.N), 2.3 + 0.0j)
    for which in ("dz", "dzbar", "dx", "dy", "lap"):
        assert np.max(np.abs(lg.spectral_derivative(grid, f, which))) < 1e-13


def test_fourier_eigenfunction(grid):
    k = np.pi / grid.L
    f = np.exp(1j * k * grid.X)
    d = lg.spectral_derivative(grid, f, "dx")
    assert np.max(np.abs(d - 1j * k * f)) < 1e-12


def test_dz_dzbar_equals_laplacian(grid):
    f = smooth_random(grid)
    two_step = lg.spectral_derivative(grid, lg.spectral_derivative(grid, f, "dz"), "dzbar")
    lap = lg.spectral_derivative(grid, f, "lap")
    assert np.max(np.abs(two_step - lap)) / np.max(np.abs(lap)) < 1e-10


def test_half_scaling_convention(grid):
    # dz dzbar acting on a plane wave returns -|k|^2 times it
    kx, ky = 2 * np.pi / grid.L, 3 * np.pi / grid.L
    f = np.exp(1j * (kx * grid.X + ky * grid.Y))
    out = lg.spectral_derivative(grid, lg.spectral_derivative(grid, f, "dz"), "dzbar")
    assert np.max(np.abs(out + (kx**2 + ky**2) * f)) < 1e-9


def test_mixed_derivatives_commute(grid):
    f = smooth_random(grid, seed=3)
    dxy = lg.spectral_derivative(grid, lg.spectral_derivative(grid, f, "dx"), "dy")
    dyx = lg.spectral_derivative(grid, lg.spectral_derivative(grid, f, "dy"), "dx")
    assert np.array_equal(dxy, dyx) or np.max(np.abs(dxy - dyx)) < 1e-14


def test_fourier_round_trip(grid):
    f = smooth_random(grid, seed=11)
    back = np.fft.ifft2(np.fft.fft2(f))
    assert np.max(np.abs(back - f)) / np.max(np.abs(f)) < 1e-12


def test_unknown_derivative_rejected(grid):
    with pytest.raises(ValueError):
        lg.spectral_derivative(grid, np.zeros((grid.N, grid.N)), "dt")


def test_nonfinite_rejected(grid):
    f = np.zeros((grid.N, grid.N))
    f[3, 4] = np.inf
    with pytest.raises(ValueError):
        lg.spectral_derivative(grid, f, "dx")


def test_sobolev_zero_and_monotone(grid):
    z = np.zeros((grid.N, grid.N))
    assert all(lg.sobolev_norm(grid, z, m) == 0.0 for m in range(4))
    f = smooth_random(grid, seed=5)
    norms = [lg.sobolev_norm(grid, f, m) for m in range(4)]
    assert norms[0] <= norms[1] <= norms[2] <= norms[3]
    with pytest.raises(ValueError):
        lg.sobolev_norm(grid, f, 4)


def test_sobolev_sech_against_quadrature():
    g = lg.PeriodicGrid2D(256, 20.0)
    win = np.exp(-((g.Y / 6.0) ** 2))
    f = 1.0 / np.cosh(g.X) * win
    # independent 1D quadrature oracle: int sech^2 dx * int win^2 dy
    ix = quad(lambda x: 1 / np.cosh(x) ** 2, -20, 20)[0]
    iy = quad(lambda y: np.exp(-2 * (y / 6.0) ** 2), -20, 20)[0]
    expect = np.sqrt(ix * iy)
    assert lg.sobolev_norm(g, f, 0) == pytest.approx(expect, rel=1e-6)
    assert ix == pytest.approx(2.0, rel=1e-12)


def test_gradient_energy_matches_quadrature():
    g = lg.PeriodicGrid2D(128, 10.0)
    f = np.exp(-(g.X**2 + g.Y**2))
    # |grad f|^2 = 4 rho^2 e^{-2 rho^2}; integral = pi/2... computed by quadrature
    expect = quad(lambda r: 4 * r**2 * np.exp(-2 * r**2) * 2 * np.pi * r, 0, 10)[0]
    assert gradient_energy(g, f) == pytest.approx(expect, rel=1e-8)


def test_dealias_kills_high_modes(grid):
    fh = np.zeros((grid.N, grid.N), dtype=complex)
    fh[grid.N // 2, 0] = 1.0   # highest mode
    f = np.fft.ifft2(fh)
    assert np.max(np.abs(dealias(grid, f))) < 1e-15
    low = np.exp(1j * np.pi / grid.L * grid.X)
    assert np.max(np.abs(dealias(grid, low) - low)) < 1e-12


def test_boundary_flatness_contract():
    g = lg.PeriodicGrid2D(64, 10.0)
    decaying = np.exp(-(g.rho**2))
    assert boundary_flatness(g, decaying) < 1e-10
    assert boundary_flatness(g, g.X) > 1.0


def test_fourier_shift_and_upsample():
    g = lg.PeriodicGrid2D(64, 5.0)
    f = np.exp(np.cos(np.pi * g.x / g.L))
    shifted = fourier_shift(f, 0.5 * g.dx, axis=0, dx=g.dx)
    exact = np.exp(np.cos(np.pi * (g.x + 0.5 * g.dx) / g.L))
    assert np.max(np.abs(shifted - exact)) < 1e-12
    up = fourier_upsample(f, 4, axis=0)
    fine_x = -g.L + (2 * g.L / (4 * g.N)) * np.arange(4 * g.N)
    assert np.max(np.abs(up - np.exp(np.cos(np.pi * fine_x / g.L)))) < 1e-11


# --- radial ----------------------------------------------------------------

def test_radial_grid_staggering():
    rg = lg.RadialGrid(100, 10.0)
    assert rg.rho[0] == pytest.approx(0.05)
    assert np.all(rg.rho > 0)
    with pytest.raises(ConfigError):
        lg.RadialGrid(8, 10.0)


def test_radial_derivatives_4th_order():
    errs = []
    for M in (256, 512):
        rg = lg.RadialGrid(M, 8.0)
        Q = rg.rho * np.exp(-rg.rho**2)
        d1_true = (1 - 2 * rg.rho**2) * np.exp(-rg.rho**2)
        errs.append(np.max(np.abs(radial_d1(rg, Q) - d1_true)))
    assert errs[0] / errs[1] > 12   # ~16 for clean 4th order


def test_nonlocal_tail_examples():
    rg = lg.RadialGrid(4096, 3.0)
    zero = lg.RadialProfile(rg, np.zeros(rg.M))
    assert np.all(nonlocal_tail(zero) == 0.0)

    Q = np.where((rg.rho >= 1) & (rg.rho <= 2), 1.0, 0.0).astype(complex)
    prof = lg.RadialProfile(rg, Q)
    I = nonlocal_tail(prof)
    j = np.argmin(np.abs(rg.rho - 1.0))
    # analytic integral ln 2, and an independent quadrature oracle on the array
    oracle = np.trapezoid(np.abs(Q[j:]) ** 2 / rg.rho[j:], rg.rho[j:])
    assert abs(I[j] - np.log(2)) < 4 * rg.h
    assert I[j] == pytest.approx(oracle, abs=1e-12)
    # nonincreasing, nonnegative, zero at the outer node
    assert np.all(np.diff(I) <= 1e-15) and np.all(I >= 0) and I[-1] == 0.0


def test_nonlocal_tail_linear_and_monotone():
    rg = lg.RadialGrid(512, 6.0)
    Qa = lg.RadialProfile(rg, 0.3 * rg.rho * np.exp(-rg.rho**2))
    Qb = lg.RadialProfile(rg, 0.7 * rg.rho * np.exp(-0.5 * rg.rho**2))
    # linear in |Q|^2: tail(a|Q|) = a^2 tail(|Q|)
    assert np.allclose(nonlocal_tail(lg.RadialProfile(rg, 2 * Qa.Q)),
                       4 * nonlocal_tail(Qa), rtol=1e-13, atol=1e-16)
    # order preserving: |Qa| <= |Qb| pointwise implies Ia <= Ib
    assert np.all(np.abs(Qa.Q) <= np.abs(Qb.Q) + 1e-15)
    assert np.all(nonlocal_tail(Qa) <= nonlocal_tail(Qb) + 1e-15)


def test_lift_radial_zero_and_coverage():
    g = lg.PeriodicGrid2D(32, 4.0)
    rg = lg.RadialGrid(64, 8.0)
    zero = lg.RadialProfile(rg, np.zeros(64))
    assert np.max(np.abs(lift_radial(zero, g))) == 0.0
    small = lg.RadialGrid(64, 3.0)
    with pytest.raises(DomainCoverageError):
        lift_radial(lg.RadialProfile(small, np.zeros(64)), g)


def test_lift_radial_smooth_at_origin():
    # Laplacian of the lifted vorticity-one field stays bounded under refinement
    g = lg.PeriodicGrid2D(96, 6.0)
    prev = None
    for M in (512, 1024):
        rg = lg.RadialGrid(M, 9.0)
        prof = lg.RadialProfile(rg, rg.rho * np.exp(-rg.rho**2))
        f = lift_radial(prof, g, kind="cubic")
        lap = lg.spectral_derivative(g, f, "lap")
        center = np.abs(lap)[g.N // 2 - 3:g.N // 2 + 3, g.N // 2 - 3:g.N // 2 + 3]
        assert np.max(center) < 10.0
        prev = f if prev is None else prev
    assert np.max(np.abs(f - prev)) < 1e-4   # refinement converges


def test_lift_radial_ray_round_trip():
    g = lg.PeriodicGrid2D(128, 6.0)
    errs = []
    for M in (128, 256):
        rg = lg.RadialGrid(M, 9.0)
        prof = lg.RadialProfile(rg, rg.rho * np.exp(-rg.rho**2))
        f = lift_radial(prof, g, kind="linear")
        x, vals = sample_ray(g, f, vorticity=1)
        true = x * np.exp(-x**2)
        errs.append(np.max(np.abs(vals - true)))
    assert errs[0] / errs[1] > 3.0   # O(h^2) interpolation


def test_lift_vorticity_zero_keeps_origin():
    g = lg.PeriodicGrid2D(64, 4.0)
    rg = lg.RadialGrid(512, 6.0)
    prof = lg.RadialProfile(rg, np.exp(-rg.rho**2).astype(complex))
    f = lift_radial(prof, g, vorticity=0, require_coverage=False)
    assert abs(f[g.origin_index] - 1.0) < 1e-3


def test_profile_spline_derivative_accuracy():
    rg = lg.RadialGrid(512, 8.0)
    prof = lg.RadialProfile(rg, rg.rho * np.exp(-rg.rho**2))
    ev1 = profile_spline(prof, nu=1)
    r = np.linspace(0.2, 5.0, 301)
    true = (1 - 2 * r**2) * np.exp(-r**2)
    assert np.max(np.abs(ev1(r) - true)) < 1e-6
    # zero tail beyond rho_max
    assert np.all(profile_spline(prof)(np.array([9.0, 12.0])) == 0.0)


def test_regularity_constant():
    rg = lg.RadialGrid(256, 8.0)
    prof = lg.RadialProfile(rg, rg.rho * np.exp(-rg.rho**2))
    assert prof.regularity_constant() == pytest.approx(1.0, rel=1e-3)


def test_radial_norm_cross_check_with_fft():
    # radial Hessian norm formula agrees with the planar FFT measurement
    rg = lg.RadialGrid(2048, 17.0)
    prof = lg.RadialProfile(rg, (rg.rho + 0.1 * rg.rho**3) * np.exp(-rg.rho**2))
    g = lg.PeriodicGrid2D(256, 12.0)
    f = lift_radial(prof, g, kind="cubic")
    fh = np.fft.fft2(f)
    k4 = (g.KX**2 + g.KY**2) ** 2
    fft_val = np.sqrt(np.sum(k4 * np.abs(fh) ** 2) * g.cell_area / g.N**2)
    from llgauge.fields import radial_grad2_norm
    assert radial_grad2_norm(prof) == pytest.approx(fft_val, rel=2e-4)


# --- snapshots --------------------------------------------------------------

def test_snapshot_round_trip(tmp_path):
    g = lg.PeriodicGrid2D(32, 3.0)
    rng = np.random.default_rng(0)
    fields = [rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
              for _ in range(2)]
    path = tmp_path / "snap.bin"
    write_snapshot(path, g, fields, t=0.25)
    g2, fields2, t = read_snapshot(path)
    assert g2 == g and t == 0.25
    for a, b in zip(fields, fields2):
        assert np.array_equal(a, b)


def test_snapshot_rejects_garbage(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError):
        read_snapshot(path)


def test_csv_exports(tmp_path):
    g = lg.PeriodicGrid2D(16, 2.0)
    f = np.exp(-(g.rho**2)) * np.exp(1j * g.theta)
    p = tmp_path / "field.csv"
    export_field_csv(p, g, f)
    lines = p.read_text().strip().split("\n")
    assert lines[0] == "x,y,re,im" and len(lines) == 1 + 16 * 16

    rg = lg.RadialGrid(32, 4.0)
    prof = lg.RadialProfile(rg, rg.rho * np.exp(-rg.rho**2))
    p2 = tmp_path / "profile.csv"
    export_profile_csv(p2, prof)
    lines = p2.read_text().strip().split("\n")
    assert lines[0] == "rho,reQ,imQ" and len(lines) == 33
