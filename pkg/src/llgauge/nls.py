"""The coupled Schrodinger-type system and its radial reductions.

Planar system for complex p, q, r and real u (z = (x+iy)/2 scaling, so
q_{z zbar} is the full Laplacian):

    i q_t - q_{z zbar} + 2 u q - 2 (pbar q)_z + 2 p q_zbar + 4 |p|^2 q = 0
    i r_t + r_{z zbar} - 2 u r - 2 (pbar r)_z + 2 p r_zbar - 4 |p|^2 r = 0
    i p_t = (q r)_zbar - u_z

with the first-order restrictions

    pbar_z + p_zbar = |q|^2 - |r|^2,
    rbar_z + q_zbar = 2 (p rbar - pbar q).

Radial reductions for vorticity-one profiles Q(rho, t):

  "qq" form:     i Q_t - (Q'' + Q'/rho - Q/rho^2) - 2 Q (|Q|^2 - 2 I(rho)) = 0
  "drift" form:  i Q_t + (Q'' + Q'/rho - Q/rho^2) + Q (2|Q|^2 - 4 I(rho))
                      - i b/(d - b t) (Q + rho Q') = 0

where I(rho) = int_rho^inf |Q|^2/tau dtau.  The two forms are complex
conjugates of one another at b = 0 (checked numerically in the tests, not
assumed).  u is closed either by the radial formula
u = -|Q|^2 + 2 I(rho) or by inverting d_z on the zero-mean part.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (ConfigError, ExtrapolationError, HorizonError,
                     SolverInstabilityError)
from .fields import (PeriodicGrid2D, RadialGrid, RadialProfile, dealias,
                     l2_norm, lift_radial, nonlocal_tail, radial_d1,
                     radial_grad2_norm, radial_laplacian, radial_mass,
                     require_finite, spectral_derivative)


@dataclass
class DriftParams:
    """Coefficients of the -i b/(d - b t) (Q + rho Q') drift term."""
    b: float = 0.0
    d: float = 1.0

    def coefficient(self, t: float):
        den = self.d - self.b * t
        if den <= 0:
            raise HorizonError(f"d - b t = {den:g} <= 0 at t = {t:g}")
        return self.b / den

    def check_interval(self, t_end: float):
        self.coefficient(0.0)
        self.coefficient(t_end)
        return self


@dataclass
class SchrodingerState:
    """State of the planar system; u must be real to 1e-12.

    `p_zbar` and `u_z` are optional analytic overrides for states whose p or u
    has a non-decaying closed-form part (the conformal family); when absent,
    spectral derivatives of the stored arrays are used.
    """
    grid: PeriodicGrid2D
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray
    u: np.ndarray
    t: float = 0.0
    p_zbar: Optional[np.ndarray] = None
    u_z: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("p", "q", "r"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=complex))
        self.u = np.asarray(self.u)
        if np.iscomplexobj(self.u):
            if np.max(np.abs(self.u.imag)) > 1e-12:
                raise ValueError("u has imaginary part above 1e-12")
            self.u = self.u.real
        for name in ("p", "q", "r", "u"):
            require_finite(getattr(self, name), name)

    def masses(self):
        return (l2_norm(self.grid, self.q) ** 2, l2_norm(self.grid, self.r) ** 2)


def vacuum_state(grid: PeriodicGrid2D, t: float = 0.0) -> SchrodingerState:
    z = np.zeros((grid.N, grid.N), dtype=complex)
    return SchrodingerState(grid, z, z.copy(), z.copy(), z.real.copy(), t)


def restriction_residual(state: SchrodingerState):
    """L2 norms of the two first-order constraint defects (0 for exact states)."""
    g = state.grid
    p_zbar = state.p_zbar if state.p_zbar is not None else spectral_derivative(g, state.p, "dzbar")
    r1 = 2 * p_zbar.real - (np.abs(state.q) ** 2 - np.abs(state.r) ** 2)
    rbar_z = np.conj(spectral_derivative(g, state.r, "dzbar"))
    q_zbar = spectral_derivative(g, state.q, "dzbar")
    r2 = rbar_z + q_zbar - 2 * (state.p * np.conj(state.r) - np.conj(state.p) * state.q)
    return l2_norm(g, r1), l2_norm(g, r2)


def u_from_closure(grid: PeriodicGrid2D, q, r, mode: str = "spectral",
                   profile: Optional[RadialProfile] = None, warn=None):
    """Close the real potential u from (q, r).

    "spectral": invert d_z on (q r)_zbar with the k=0 mode gauged to zero
    (stationary-p gauge).  "radial-ansatz": the closed form
    u = -|Q|^2 + 2 int_rho^inf |Q|^2/tau dtau lifted from `profile`.
    """
    if mode == "radial-ansatz":
        if profile is None:
            raise ValueError("radial-ansatz closure needs a RadialProfile")
        u_prof = RadialProfile(profile.grid, -np.abs(profile.Q) ** 2 + 2 * nonlocal_tail(profile))
        lifted = lift_radial(u_prof, grid, vorticity=0)
        return lifted.real
    if mode != "spectral":
        raise ValueError(f"unknown closure mode {mode!r}")
    rhs = spectral_derivative(grid, q * r, "dzbar")
    rh = np.fft.fft2(rhs)
    if warn is not None and np.abs(rh[0, 0]) > 1e-10 * grid.N**2:
        warn("u closure: nonzero mean in (qr)_zbar, constant mode gauged to 0")
    mz = grid._mult["dz"]
    inv = np.zeros_like(rh)
    nz = mz != 0
    inv[nz] = rh[nz] / mz[nz]
    u = np.fft.ifft2(inv)
    return u.real


def system8_rhs(state: SchrodingerState, dealias_products: bool = True):
    """(p_t, q_t, r_t) solved from the three evolution equations.

    Products feeding back into spectral derivatives are 2/3-rule dealiased.
    States with non-decaying p must carry analytic overrides and be evaluated
    through `system8_residual` instead; this entry point assumes decaying
    fields (documented user contract).
    """
    g = state.grid
    p, q, r, u = state.p, state.q, state.r, state.u

    def dz(f):
        return spectral_derivative(g, f, "dz")

    def dzbar(f):
        return spectral_derivative(g, f, "dzbar")

    def prod(a, b):
        ab = a * b
        return dealias(g, ab) if dealias_products else ab

    lap_q = spectral_derivative(g, q, "lap")
    lap_r = spectral_derivative(g, r, "lap")
    pbar = np.conj(p)
    q_t = -1j * (lap_q - 2 * u * q + 2 * dz(prod(pbar, q)) - 2 * p * dzbar(q) - 4 * np.abs(p) ** 2 * q)
    r_t = -1j * (-lap_r + 2 * u * r + 2 * dz(prod(pbar, r)) - 2 * p * dzbar(r) + 4 * np.abs(p) ** 2 * r)
    u_z = state.u_z if state.u_z is not None else spectral_derivative(g, state.u, "dz")
    p_t = -1j * (dzbar(prod(q, r)) - u_z)
    for arr in (p_t, q_t, r_t):
        if not np.all(np.isfinite(arr)):
            raise SolverInstabilityError("non-finite intermediate in system rhs")
    return p_t, q_t, r_t


def system8_residual(state: SchrodingerState, p_t, q_t, r_t):
    """L2 residuals of the three equations given time derivatives.

    Arranged so that no bare non-decaying field is differentiated spectrally:
    p enters only through decaying products and the analytic overrides.
    """
    g = state.grid
    p, q, r, u = state.p, state.q, state.r, state.u

    def dz(f):
        return spectral_derivative(g, f, "dz")

    def dzbar(f):
        return spectral_derivative(g, f, "dzbar")

    pbar = np.conj(p)
    res_q = (1j * q_t - spectral_derivative(g, q, "lap") + 2 * u * q
             - 2 * dz(pbar * q) + 2 * p * dzbar(q) + 4 * np.abs(p) ** 2 * q)
    res_r = (1j * r_t + spectral_derivative(g, r, "lap") - 2 * u * r
             - 2 * dz(pbar * r) + 2 * p * dzbar(r) - 4 * np.abs(p) ** 2 * r)
    u_z = state.u_z if state.u_z is not None else spectral_derivative(g, u, "dz")
    res_p = 1j * p_t - dzbar(q * r) + u_z
    return {"q": l2_norm(g, res_q), "r": l2_norm(g, res_r), "p": l2_norm(g, res_p)}


def run_system8(state: SchrodingerState, dt: float, t_end: float,
                cfl_safety: float = 0.4, log_every: int = 5):
    """RK4 evolution of the full planar system (experimental).

    u is re-closed spectrally at every stage (stationary-p gauge; the global
    constant mode of u is gauged to zero, which rotates the overall phase of
    q and r but leaves moduli and masses untouched).
    """
    g = state.grid
    dt_max = cfl_safety * 2.8 / (2 * (np.pi / g.dx) ** 2)
    if dt > dt_max:
        raise ConfigError(f"dt={dt:g} above dispersive stability bound {dt_max:g}")
    cur = SchrodingerState(g, state.p.copy(), state.q.copy(), state.r.copy(),
                           state.u.copy(), state.t)
    log = [(cur.t, *cur.masses())]

    def rhs(p, q, r, t):
        u = u_from_closure(g, q, r, "spectral")
        st = SchrodingerState(g, p, q, r, u, t)
        return system8_rhs(st)

    nsteps = int(round((t_end - state.t) / dt))
    for n in range(nsteps):
        t = cur.t
        p, q, r = cur.p, cur.q, cur.r
        k1 = rhs(p, q, r, t)
        k2 = rhs(p + 0.5 * dt * k1[0], q + 0.5 * dt * k1[1], r + 0.5 * dt * k1[2], t + 0.5 * dt)
        k3 = rhs(p + 0.5 * dt * k2[0], q + 0.5 * dt * k2[1], r + 0.5 * dt * k2[2], t + 0.5 * dt)
        k4 = rhs(p + dt * k3[0], q + dt * k3[1], r + dt * k3[2], t + dt)
        p = p + (dt / 6) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        q = q + (dt / 6) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        r = r + (dt / 6) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        u = u_from_closure(g, q, r, "spectral")
        cur = SchrodingerState(g, p, q, r, u, t + dt)
        if (n + 1) % log_every == 0 or n == nsteps - 1:
            log.append((cur.t, *cur.masses()))
    return cur, log


def conservation_report(mass_log):
    """Relative drifts of both masses versus t = 0 from a (t, mq, mr) log."""
    t0, mq0, mr0 = mass_log[0]
    drift_q = max(abs(mq / mq0 - 1.0) for _, mq, _ in mass_log) if mq0 else 0.0
    drift_r = max(abs(mr / mr0 - 1.0) for _, _, mr in mass_log) if mr0 else 0.0
    return {"mass_q": mq0, "mass_r": mr0, "drift_q": drift_q, "drift_r": drift_r}


# ---------------------------------------------------------------------------
# radial solvers

def radialQQ_rhs(profile: RadialProfile):
    """Q_t for the "qq" form: i Q_t = Lap_1 Q + 2 Q (|Q|^2 - 2 I)."""
    lap = radial_laplacian(profile.grid, profile.Q)
    I = nonlocal_tail(profile)
    return -1j * (lap + 2.0 * profile.Q * (np.abs(profile.Q) ** 2 - 2.0 * I))


def drift_rhs(profile: RadialProfile, t: float, drift: DriftParams):
    """Q_t for the drift form (b = 0 reduces to the conjugate of the qq form)."""
    g = profile.grid
    lap = radial_laplacian(g, profile.Q)
    I = nonlocal_tail(profile)
    out = 1j * (lap + profile.Q * (2.0 * np.abs(profile.Q) ** 2 - 4.0 * I))
    if drift.b != 0.0:
        out = out + drift.coefficient(t) * (profile.Q + g.rho * radial_d1(g, profile.Q))
    return out


def radial_rhs(profile: RadialProfile, t: float, form: str, drift: DriftParams):
    if form == "qq":
        return radialQQ_rhs(profile)
    if form == "drift":
        return drift_rhs(profile, t, drift)
    raise ConfigError(f"unknown radial form {form!r}")


@dataclass
class RadialRun:
    """Stored snapshots (T_j, Q_j, Qdot_j) of a radial evolution plus norm logs."""
    grid: RadialGrid
    form: str
    drift: DriftParams
    times: list = field(default_factory=list)
    profiles: list = field(default_factory=list)
    rhs_profiles: list = field(default_factory=list)
    log: list = field(default_factory=list)   # rows: t, mass, grad2, edge
    status: str = "completed"

    def log_columns(self):
        return ("t", "mass", "grad2", "edge_magnitude")

    @property
    def t_final(self):
        return self.times[-1] if self.times else 0.0

    def snapshot_index(self, t: float, tol: float = 1e-9):
        for j, tj in enumerate(self.times):
            if abs(tj - t) <= tol:
                return j
        return None

    def profile_at(self, t: float) -> RadialProfile:
        """Snapshot at t; linear interpolation in time between stored frames."""
        j = self.snapshot_index(t)
        if j is not None:
            return RadialProfile(self.grid, self.profiles[j].copy())
        times = np.asarray(self.times)
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ExtrapolationError(f"t={t:g} outside stored run [{times[0]:g}, {times[-1]:g}]")
        jhi = int(np.searchsorted(times, t))
        jlo = jhi - 1
        w = (t - times[jlo]) / (times[jhi] - times[jlo])
        Q = (1 - w) * self.profiles[jlo] + w * self.profiles[jhi]
        return RadialProfile(self.grid, Q)

    def rhs_at(self, t: float) -> np.ndarray:
        j = self.snapshot_index(t)
        if j is not None:
            return self.rhs_profiles[j].copy()
        times = np.asarray(self.times)
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ExtrapolationError(f"t={t:g} outside stored run")
        jhi = int(np.searchsorted(times, t))
        jlo = jhi - 1
        w = (t - times[jlo]) / (times[jhi] - times[jlo])
        return (1 - w) * self.rhs_profiles[jlo] + w * self.rhs_profiles[jhi]


def run_radial(Q0: RadialProfile, t_end: float, form: str = "drift",
               drift: DriftParams = None, cfl: float = 0.8,
               save_at=None, log_every_t: float = 0.01,
               edge_warn: float = 1e-6, sponge_frac: float = 0.0,
               sponge_strength: float = 20.0) -> RadialRun:
    """RK4 evolution of a radial reduction with exact-hit snapshot times.

    dt = cfl h^2 / 4 (diffusion-type stiffness of the vorticity Laplacian under
    RK4); steps shorten to land exactly on requested save/log times so stored
    snapshots carry no time-interpolation error.

    `sponge_frac > 0` absorbs outgoing waves in the outer fraction of the
    domain (smooth multiplicative damping), emulating the unbounded-domain
    truncation on long dispersive runs.  Mass is not conserved inside the
    sponge, so conservation diagnostics only make sense with the sponge off.
    """
    drift = drift or DriftParams()
    if form == "drift":
        drift.check_interval(t_end)
    g = Q0.grid
    dt = cfl * g.h**2 / 4
    if sponge_frac > 0.0:
        rho_s = (1.0 - sponge_frac) * g.rho_max
        xi = np.clip((g.rho - rho_s) / (g.rho_max - rho_s), 0.0, 1.0)
        sigma = sponge_strength * xi**3
    save_at = sorted(set([0.0, t_end] + [float(s) for s in (save_at or [])]))
    if save_at[-1] > t_end + 1e-12:
        raise ConfigError("save_at times beyond t_end")
    log_times = np.arange(0.0, t_end + 1e-12, log_every_t)
    merged = sorted(np.concatenate([save_at, log_times]).tolist())
    hit_times = []
    for h in merged:
        if not hit_times or h - hit_times[-1] > 1e-12:
            hit_times.append(h)

    run = RadialRun(g, form, drift)
    Q = Q0.Q.astype(complex).copy()
    t = 0.0

    def record(t, Q):
        prof = RadialProfile(g, Q)
        run.log.append((t, radial_mass(prof), radial_grad2_norm(prof), prof.edge_magnitude()))
        wanted = any(abs(t - s) <= 1e-10 for s in save_at)
        fresh = not run.times or t - run.times[-1] > 1e-10
        if wanted and fresh:
            run.times.append(t)
            run.profiles.append(Q.copy())
            run.rhs_profiles.append(radial_rhs(prof, t, form, drift))

    record(0.0, Q)
    hit_iter = iter([h for h in hit_times if h > 1e-15])
    nxt = next(hit_iter, None)
    while t < t_end - 1e-14:
        step = min(dt, t_end - t)
        if nxt is not None:
            step = min(step, nxt - t)
        prof = RadialProfile(g, Q)
        k1 = radial_rhs(prof, t, form, drift)
        k2 = radial_rhs(RadialProfile(g, Q + 0.5 * step * k1), t + 0.5 * step, form, drift)
        k3 = radial_rhs(RadialProfile(g, Q + 0.5 * step * k2), t + 0.5 * step, form, drift)
        k4 = radial_rhs(RadialProfile(g, Q + step * k3), t + step, form, drift)
        Q = Q + (step / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if sponge_frac > 0.0:
            Q = Q * np.exp(-step * sigma)
        if not np.all(np.isfinite(Q)):
            raise SolverInstabilityError(f"non-finite radial profile at t={t:g}")
        t += step
        if nxt is not None and t >= nxt - 1e-13:
            record(nxt, Q)
            nxt = next(hit_iter, None)
    if run.times[-1] < t_end - 1e-12:
        record(t_end, Q)
    if max(row[3] for row in run.log) > edge_warn:
        run.status = "completed (outer-boundary magnitude exceeded monitor threshold)"
    return run


def lemma_lower_bound_ratios(run: RadialRun):
    """Sequence (t_j, (1/g(t_j)^2 - 1/g0^2)/t_j) from the run's Hessian-norm log."""
    g0 = run.log[0][2]
    out = []
    for t, _, g2, _ in run.log[1:]:
        if t > 0:
            out.append((t, (1.0 / g2**2 - 1.0 / g0**2) / t))
    return out


def fit_lower_bound_constant(run: RadialRun, window: float = 0.1,
                             calibration: float = 3.0):
    """Bound constant for the inverse-Hessian growth, fitted on t <= window.

    The weak-field dynamics of the drift form follows the exact scaling law
    ||Hess Q(t)|| (1+t)^2 = const (for b=-1, d=1), under which the secant ratio
    (1/g^2 - 1/g0^2)/t equals g0^{-2} ((1+t)^4 - 1)/t and grows by a factor
    ~2.6 between t=0.1 and t=0.8.  A raw early-window maximum therefore cannot
    bound the tail even for exact solutions; the fit inflates the early-window
    maximum by a fixed calibration factor (default 3) that covers the scaling
    law's secant growth with margin while still failing solutions whose
    inverse-Hessian norm grows super-linearly.
    """
    ratios = lemma_lower_bound_ratios(run)
    early = [r for t, r in ratios if t <= window + 1e-12]
    if not early:
        raise ValueError("no log samples inside the fit window")
    base = max(early)
    scale = max(abs(r) for r in early)
    return base + (calibration - 1.0) * scale
