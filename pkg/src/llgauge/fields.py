"""Grids, spectral operators, Sobolev norms, and radial field machinery.

Complex coordinates carry the half scaling z = (x+iy)/2, zbar = (x-iy)/2, so

    dz = dx - i dy,   dzbar = dx + i dy,   dz dzbar = dxx + dyy = Lap.

All planar fields live on a periodic box [-L, L)^2 with N points per axis and
wavenumbers k_j = pi j / L, j = -N/2 .. N/2-1.  Initial data is expected to
decay so that boundary values are constant to <= 1e-10; `boundary_flatness`
measures the contract and solvers check it at load.

Radial profiles Q(rho) live on a staggered grid rho_j = (j+1/2) h that keeps
1/rho and 1/rho^2 finite; vorticity-one regularity (Q ~ alpha rho at the axis)
is encoded by the odd ghost extension used in the finite differences.
"""

from dataclasses import dataclass, field
import struct

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DomainCoverageError

_DERIV_KEYS = ("dz", "dzbar", "dx", "dy", "lap")


def require_finite(arr, label="field"):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{label} contains non-finite values")
    return arr


class PeriodicGrid2D:
    """Square periodic grid on [-L, L)^2, N points per axis (N even, >= 16)."""

    def __init__(self, N: int, L: float):
        if N % 2 != 0 or N < 16:
            raise ConfigError(f"N must be even and >= 16, got {N}")
        if L <= 0:
            raise ConfigError(f"L must be positive, got {L}")
        self.N = int(N)
        self.L = float(L)
        self.dx = 2 * L / N
        x = -L + self.dx * np.arange(N)
        self.x = x
        self.X, self.Y = np.meshgrid(x, x, indexing="ij")
        k = 2 * np.pi * np.fft.fftfreq(N, d=self.dx)   # = pi j / L
        self.k = k
        self.KX, self.KY = np.meshgrid(k, k, indexing="ij")
        self.k2 = self.KX**2 + self.KY**2
        self._mult = {
            "dx": 1j * self.KX,
            "dy": 1j * self.KY,
            "dz": 1j * self.KX + self.KY,
            "dzbar": 1j * self.KX - self.KY,
            "lap": -self.k2,
        }
        # 2/3-rule mask for cubic nonlinearities
        kcut = (2.0 / 3.0) * np.abs(k).max()
        self.dealias_mask = (np.abs(self.KX) <= kcut) & (np.abs(self.KY) <= kcut)
        self.rho = np.hypot(self.X, self.Y)
        self.theta = np.arctan2(self.Y, self.X)
        self.cell_area = self.dx * self.dx
        self.origin_index = (N // 2, N // 2)

    def __eq__(self, other):
        return isinstance(other, PeriodicGrid2D) and self.N == other.N and self.L == other.L

    def __repr__(self):
        return f"PeriodicGrid2D(N={self.N}, L={self.L})"


def spectral_derivative(grid: PeriodicGrid2D, f, which: str):
    """Fourier-multiplier derivative of a 2D field; `which` in dz/dzbar/dx/dy/lap."""
    if which not in _DERIV_KEYS:
        raise ValueError(f"unknown derivative {which!r}, expected one of {_DERIV_KEYS}")
    require_finite(f, "spectral_derivative input")
    return np.fft.ifft2(grid._mult[which] * np.fft.fft2(f))


def dealias(grid: PeriodicGrid2D, f):
    """2/3-rule truncation; apply to products that feed back into derivatives."""
    return np.fft.ifft2(grid.dealias_mask * np.fft.fft2(f))


def integrate(grid: PeriodicGrid2D, f):
    """Box integral of a nodal field (rectangle rule, spectrally accurate here)."""
    return np.sum(f) * grid.cell_area


def l2_norm(grid: PeriodicGrid2D, f):
    """L2 norm over the box; accepts a single field or a leading stack axis."""
    return float(np.sqrt(np.sum(np.abs(f) ** 2) * grid.cell_area))


def sobolev_norm(grid: PeriodicGrid2D, f, order: int):
    """H^m norm (sum_k (1+|k|^2)^m |fhat|^2 dx^2)^(1/2), m in 0..3.

    `f` may be a single (N,N) field or a stack (c,N,N); component norms add
    in quadrature.  Monotone nondecreasing in m by construction.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"Sobolev order must be in 0..3, got {order}")
    require_finite(f, "sobolev_norm input")
    arr = np.asarray(f)
    if arr.ndim == 2:
        arr = arr[None]
    w = (1.0 + grid.k2) ** order
    total = 0.0
    for comp in arr:
        fh = np.fft.fft2(comp)
        total += np.sum(w * np.abs(fh) ** 2)
    return float(np.sqrt(total * grid.cell_area / grid.N**2))


def gradient_energy(grid: PeriodicGrid2D, f):
    """int |grad f|^2 dx dy via multipliers; stacks sum over components."""
    arr = np.asarray(f)
    if arr.ndim == 2:
        arr = arr[None]
    total = 0.0
    for comp in arr:
        fh = np.fft.fft2(comp)
        total += np.sum(grid.k2 * np.abs(fh) ** 2)
    return float(total * grid.cell_area / grid.N**2)


def boundary_flatness(grid: PeriodicGrid2D, f):
    """Max deviation of f from its boundary mean along the box edge."""
    edge = np.concatenate([f[0, :].ravel(), f[-1, :].ravel(),
                           f[:, 0].ravel(), f[:, -1].ravel()])
    return float(np.max(np.abs(edge - edge.mean())))


def fourier_shift(f, offset, axis, dx):
    """Evaluate the band-limited interpolant of f shifted by `offset` along axis."""
    n = f.shape[axis]
    k = 2 * np.pi * np.fft.fftfreq(n, d=dx)
    phase = np.exp(1j * k * offset)
    shape = [1] * f.ndim
    shape[axis] = n
    out = np.fft.ifft(np.fft.fft(f, axis=axis) * phase.reshape(shape), axis=axis)
    return out


def fourier_upsample(f, factor, axis, renorm=True):
    """Zero-pad the spectrum along `axis` by an integer factor."""
    if factor == 1:
        return np.asarray(f, dtype=complex)
    fh = np.fft.fft(f, axis=axis)
    n = f.shape[axis]
    m = n * factor
    shape = list(f.shape)
    shape[axis] = m
    out = np.zeros(shape, dtype=complex)
    half = n // 2
    idx_lo = [slice(None)] * f.ndim
    idx_hi = [slice(None)] * f.ndim
    idx_lo[axis] = slice(0, half)
    idx_hi[axis] = slice(m - half, m)
    src_lo = [slice(None)] * f.ndim
    src_hi = [slice(None)] * f.ndim
    src_lo[axis] = slice(0, half)
    src_hi[axis] = slice(n - half, n)
    out[tuple(idx_lo)] = fh[tuple(src_lo)]
    out[tuple(idx_hi)] = fh[tuple(src_hi)]
    if renorm:
        out *= factor
    return np.fft.ifft(out, axis=axis)


# ---------------------------------------------------------------------------
# radial side

class RadialGrid:
    """Staggered radial grid rho_j = (j+1/2) h, h = rho_max / M."""

    def __init__(self, M: int, rho_max: float):
        if M < 16:
            raise ConfigError(f"M must be >= 16, got {M}")
        if rho_max <= 0:
            raise ConfigError(f"rho_max must be positive, got {rho_max}")
        self.M = int(M)
        self.rho_max = float(rho_max)
        self.h = rho_max / M
        self.rho = (np.arange(M) + 0.5) * self.h

    def __eq__(self, other):
        return (isinstance(other, RadialGrid)
                and self.M == other.M and self.rho_max == other.rho_max)

    def __repr__(self):
        return f"RadialGrid(M={self.M}, rho_max={self.rho_max})"


@dataclass
class RadialProfile:
    """Complex vorticity-one profile Q(rho) on a staggered radial grid."""
    grid: RadialGrid
    Q: np.ndarray

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=complex)
        if self.Q.shape != (self.grid.M,):
            raise ValueError("profile length does not match grid")

    def copy(self):
        return RadialProfile(self.grid, self.Q.copy())

    def regularity_constant(self):
        """|Q(rho_0)| / rho_0; finite and O(1) for vorticity-one data."""
        return float(np.abs(self.Q[0]) / self.grid.rho[0])

    def edge_magnitude(self, cells: int = 4):
        return float(np.max(np.abs(self.Q[-cells:])))


def _pad_parity(Q, parity="odd"):
    # axis rule Q(-rho) = -+ Q(rho) (odd for vorticity-one data); zero beyond rho_max
    s = -1.0 if parity == "odd" else 1.0
    return np.concatenate([[s * Q[1], s * Q[0]], Q, [0.0, 0.0]])


def _radial_d1_parity(grid, Q, parity):
    P = _pad_parity(np.asarray(Q, dtype=complex), parity)
    return (-P[4:] + 8 * P[3:-1] - 8 * P[1:-3] + P[:-4]) / (12 * grid.h)


def _radial_d2_parity(grid, Q, parity):
    P = _pad_parity(np.asarray(Q, dtype=complex), parity)
    return (-P[4:] + 16 * P[3:-1] - 30 * P[2:-2] + 16 * P[1:-3] - P[:-4]) / (12 * grid.h**2)


def radial_d1(grid: RadialGrid, Q):
    """4th-order first derivative with odd inner / zero outer ghosts."""
    return _radial_d1_parity(grid, Q, "odd")


def radial_d2(grid: RadialGrid, Q):
    """4th-order second derivative with odd inner / zero outer ghosts."""
    return _radial_d2_parity(grid, Q, "odd")


def radial_laplacian(grid: RadialGrid, Q):
    """Vorticity-one radial Laplacian Q'' + Q'/rho - Q/rho^2."""
    return radial_d2(grid, Q) + radial_d1(grid, Q) / grid.rho - Q / grid.rho**2


def nonlocal_tail(profile: RadialProfile):
    """I(rho_j) = int_{rho_j}^{inf} |Q|^2 / tau dtau, zero tail beyond rho_max.

    Cumulative trapezoid from the outer boundary inward, O(M) total.  I is
    nonincreasing and I at the outermost node is 0.
    """
    grid = profile.grid
    g = np.abs(profile.Q) ** 2 / grid.rho
    I = np.zeros(grid.M)
    if grid.M > 1:
        seg = 0.5 * (g[:-1] + g[1:]) * grid.h
        I[:-1] = np.cumsum(seg[::-1])[::-1]
    return I


def radial_mass(profile: RadialProfile):
    """int_{R^2} |Q|^2 = 2 pi int |Q|^2 rho drho (midpoint rule)."""
    g = profile.grid
    return float(2 * np.pi * np.sum(np.abs(profile.Q) ** 2 * g.rho) * g.h)


def radial_l2(profile: RadialProfile):
    return float(np.sqrt(radial_mass(profile)))


def radial_grad2_norm(profile: RadialProfile):
    """L2 norm of the full 2D Hessian of Q(rho) e^{-i theta}.

    With D3 = Q'' - 3Q'/rho + 3Q/rho^2 (the dz dz radial symbol) and
    D1 = Q'' + Q'/rho - Q/rho^2 (the Laplacian symbol),

        ||Hess||^2 = (1/4) (||D3||^2 + 3 ||D1||^2)   over R^2.
    """
    g = profile.grid
    q1 = radial_d1(g, profile.Q)
    q2 = radial_d2(g, profile.Q)
    D3 = q2 - 3 * q1 / g.rho + 3 * profile.Q / g.rho**2
    D1 = q2 + q1 / g.rho - profile.Q / g.rho**2
    val = 0.25 * 2 * np.pi * np.sum((np.abs(D3) ** 2 + 3 * np.abs(D1) ** 2) * g.rho) * g.h
    return float(np.sqrt(val))


def radial_sigma_norm(profile: RadialProfile, sigma: int):
    """Discrete W^{0,sigma} norm over R^2 of Q e^{-i theta}."""
    g = profile.grid
    return float((2 * np.pi * np.sum(np.abs(profile.Q) ** sigma * g.rho) * g.h) ** (1.0 / sigma))


def profile_spline(profile: RadialProfile, nu: int = 0, parity: str = "odd"):
    """Cubic spline of Q (or its FD4 derivative for nu=1,2) with parity extension.

    `parity` is the symmetry of the profile itself ("odd" for vorticity-one
    data, "even" for scalar radial functions such as u); derivatives flip it.
    Derivatives are formed on the grid at 4th order first and then splined,
    so interpolated values of Q', Q'' keep O(h^4) accuracy.
    """
    g = profile.grid
    base = -1.0 if parity == "odd" else +1.0
    if nu == 0:
        vals = profile.Q
        sign = base
    elif nu == 1:
        vals = _radial_d1_parity(g, profile.Q, parity)
        sign = -base
    elif nu == 2:
        vals = _radial_d2_parity(g, profile.Q, parity)
        sign = base
    else:
        raise ValueError("nu must be 0, 1 or 2")
    rho_ext = np.concatenate([-g.rho[2::-1], g.rho, [g.rho_max + 0.5 * g.h]])
    vals_ext = np.concatenate([sign * vals[2::-1], vals, [0.0]])
    re = CubicSpline(rho_ext, vals_ext.real, extrapolate=False)
    im = CubicSpline(rho_ext, vals_ext.imag, extrapolate=False)

    def ev(r):
        r = np.asarray(r, dtype=float)
        out = re(r) + 1j * im(r)
        return np.where(np.isnan(out), 0.0, out)   # beyond rho_max: zero tail
    return ev


def lift_radial(profile: RadialProfile, grid: PeriodicGrid2D, vorticity: int = 1,
                kind: str = "linear", require_coverage: bool = True):
    """Map Q(rho) to the Cartesian field Q(rho) e^{-i m theta} (m = vorticity).

    Linear interpolation in rho (O(h^2)) by default; `kind="cubic"` uses the
    spline path.  For nonzero vorticity the origin node is set exactly to 0
    (regularity forces Q(0) = 0); vorticity-0 profiles extend evenly through
    the axis.
    """
    g = profile.grid
    if require_coverage and g.rho_max < np.sqrt(2.0) * grid.L:
        raise DomainCoverageError(
            f"rho_max={g.rho_max} < sqrt(2) L = {np.sqrt(2)*grid.L:.6g}: "
            "profile does not cover the box corners")
    parity = "odd" if vorticity % 2 else "even"
    if kind == "linear":
        if parity == "odd":
            origin_val = 0.0
        else:
            # parabola through the first two staggered nodes of an even function
            origin_val = (9.0 * profile.Q[0] - profile.Q[1]) / 8.0
        xp = np.concatenate([[0.0], g.rho, [g.rho_max + 0.5 * g.h]])
        fp = np.concatenate([[origin_val], profile.Q, [0.0]])
        vals = (np.interp(grid.rho, xp, fp.real, right=0.0)
                + 1j * np.interp(grid.rho, xp, fp.imag, right=0.0))
    elif kind == "cubic":
        vals = profile_spline(profile, parity=parity)(grid.rho)
    else:
        raise ValueError(f"unknown interpolation kind {kind!r}")
    out = vals * np.exp(-1j * vorticity * grid.theta)
    if vorticity % 2:
        out[grid.origin_index] = 0.0
    return out


def sample_ray(grid: PeriodicGrid2D, f, vorticity: int = 1):
    """Values of f e^{+i m theta} along the positive-x ray (theta = 0)."""
    i0, j0 = grid.origin_index
    return grid.x[i0 + 1:], f[i0 + 1:, j0]


# ---------------------------------------------------------------------------
# snapshot files

_MAGIC = b"LLG1"


def write_snapshot(path, grid: PeriodicGrid2D, fields, t: float):
    """Binary snapshot: header (N, L, field count, t) + row-major re/im pairs."""
    fields = [np.asarray(f) for f in fields]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qdqd", grid.N, grid.L, len(fields), float(t)))
        for f in fields:
            pair = np.empty((grid.N, grid.N, 2), dtype="<f8")
            pair[..., 0] = f.real
            pair[..., 1] = np.imag(f)
            fh.write(pair.tobytes())


def read_snapshot(path):
    """Inverse of `write_snapshot`; returns (grid, fields, t)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a field snapshot")
        N, L, count, t = struct.unpack("<qdqd", fh.read(32))
        grid = PeriodicGrid2D(N, L)
        fields = []
        for _ in range(count):
            raw = np.frombuffer(fh.read(N * N * 16), dtype="<f8").reshape(N, N, 2)
            fields.append(raw[..., 0] + 1j * raw[..., 1])
    return grid, fields, t


def export_field_csv(path, grid: PeriodicGrid2D, f):
    """CSV export (x, y, re, im) for plotting."""
    f = np.asarray(f)
    with open(path, "w") as fh:
        fh.write("x,y,re,im\n")
        for i in range(grid.N):
            for j in range(grid.N):
                fh.write(f"{grid.x[i]:.17g},{grid.x[j]:.17g},"
                         f"{f[i, j].real:.17g},{np.imag(f[i, j]):.17g}\n")


def export_profile_csv(path, profile: RadialProfile):
    """CSV export (rho, reQ, imQ)."""
    with open(path, "w") as fh:
        fh.write("rho,reQ,imQ\n")
        for r, q in zip(profile.grid.rho, profile.Q):
            fh.write(f"{r:.17g},{q.real:.17g},{q.imag:.17g}\n")
