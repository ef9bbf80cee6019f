"""Fixed-grid solvers for the coupled fractional melting model.

Two explicit L1 schemes share one blocked memory engine:

``tracked`` (default) solves the coupled model as stated: the liquid
temperature carries a Caputo memory that starts when the melt front reaches
each node (u is identically zero before arrival, so the windowed and
full-history L1 sums coincide), and the front position advances through the
fractional interface condition

    rho * l * D^gamma s = -tau^(1-gamma) * k * u_x(s(t)-, t),

discretized with its own L1 memory on the front increments.  The last liquid
node is slaved to the interface by interpolation, all other liquid nodes use
the regular explicit stencil.

``enthalpy`` evolves the conservative weak form D^gamma e = tau^(1-gamma)
k u_xx on the enthalpy e = rho*c*u + rho*l*phi, memory from t = 0.  This is
the natural front-capturing discretization of the fractional conservation
law, but the memory of each node's latent-absorption ramp acts as the
singular latent term of the local-balance model variant, so for gamma < 1
this scheme follows that model rather than the coupled one: its front runs
measurably ahead and its quasi-static profile is convex.  The two schemes
agree at gamma = 1, where every model variant collapses to the classical
Stefan problem.  The discrepancy between the two runs is the nonequivalence
phenomenon reproduced by a pair of discretizations, and
analysis.model_a_residual tells them apart on solver output.

Explicit stepping needs dt^gamma <= Gamma(2-gamma) rho c dx^2 /
(2 k tau^(1-gamma)), checked before any stepping.  The per-level memory sum
is O(n); run() amortizes it with a blocked evaluation (chunked dense
products against the Hankel weight structure).  Fast history compression is
out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .fractional import l1_weights
from .params import BoundaryData, FracParams, Material

__all__ = [
    "Grid1D",
    "FrontPath",
    "SimState",
    "StabilityError",
    "FrontRunoutError",
    "max_stable_dt",
    "stable_step_count",
    "initial_state",
    "step",
    "run",
    "SCHEMES",
]

HIST_CHUNK = 1024
MAX_HISTORY_BYTES = 4 << 30
SCHEMES = ("tracked", "enthalpy")


class StabilityError(RuntimeError):
    """Explicit-step stability bound violated by the requested grid."""


class FrontRunoutError(RuntimeError):
    """Melt front reached the right boundary; the domain is too small."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform space-time grid: nx cells on [0, x_max], nt steps to t_max."""

    x_max: float
    nx: int
    t_max: float
    nt: int

    def __post_init__(self):
        if self.nx < 8 or self.nt < 8:
            raise ValueError("grid needs nx >= 8 and nt >= 8")
        if not (self.x_max > 0.0 and self.t_max > 0.0):
            raise ValueError("x_max and t_max must be positive")

    @property
    def dx(self) -> float:
        return self.x_max / self.nx

    @property
    def dt(self) -> float:
        return self.t_max / self.nt

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.x_max, self.nx + 1)


@dataclass(frozen=True)
class FrontPath:
    """Sampled interface trajectory; positions start at 0 and never decrease."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.positions, dtype=float)
        if t.shape != p.shape or t.ndim != 1:
            raise ValueError("times and positions must be 1-d arrays of equal length")
        if p.size and p[0] != 0.0:
            raise ValueError("front must start at position 0")
        if np.any(np.diff(p) < 0.0):
            raise ValueError("front positions must be non-decreasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)

    def position_at(self, t):
        return np.interp(t, self.times, self.positions)

    def inverse_time(self, x):
        """First time the front reaches x (monotone linear interpolation)."""
        return np.interp(x, self.positions, self.times)


@dataclass
class SimState:
    """Solver output: thinned field history plus full-rate front and balances.

    Field snapshots live at times[j] = j * out_every * dt (uniform).  The
    front path, total energy (trapezoid of e) and boundary flux
    q(0,t) = -k u_x(0,t) are recorded at every step.
    """

    x: np.ndarray
    times: np.ndarray
    enthalpy: np.ndarray          # (n_snap, nx+1)
    temperature: np.ndarray
    liquid_fraction: np.ndarray
    front: FrontPath
    total_energy: np.ndarray      # (nt+1,)
    boundary_flux: np.ndarray     # (nt+1,)
    dt: float
    out_every: int
    scheme: str = "enthalpy"

    @property
    def snapshot_dt(self) -> float:
        return self.dt * self.out_every


def max_stable_dt(mat: Material, frac: FracParams, dx: float) -> float:
    """Largest dt admitted by the explicit L1 stability bound."""
    g = frac.gamma
    bound = math.gamma(2.0 - g) * mat.rho * mat.c * dx * dx / (2.0 * mat.k * frac.tau_factor)
    return bound ** (1.0 / g)


def stable_step_count(mat: Material, frac: FracParams, x_max: float, nx: int,
                      t_max: float, safety: float = 0.9) -> int:
    """Step count putting dt at `safety` times the stability bound."""
    if not 0.0 < safety <= 1.0:
        raise ValueError("safety must lie in (0, 1]")
    dt = safety * max_stable_dt(mat, frac, x_max / nx)
    return max(8, math.ceil(t_max / dt))


def _check_stability(mat: Material, frac: FracParams, grid: Grid1D) -> None:
    dt_max = max_stable_dt(mat, frac, grid.dx)
    if grid.dt > dt_max * (1.0 + 1e-12):
        raise StabilityError(
            f"dt = {grid.dt:g} exceeds the explicit stability bound {dt_max:g} "
            f"(gamma={frac.gamma}); increase nt to at least "
            f"{math.ceil(grid.t_max / dt_max)}")


def _recover(e: np.ndarray, mat: Material, bc: BoundaryData):
    """Temperature and liquid fraction from enthalpy."""
    rl = mat.rho * mat.l
    liquid = e >= rl
    u = np.where(liquid, (e - rl) / (mat.rho * mat.c), 0.0)
    phi = np.where(liquid, 1.0, e / rl)
    u[0] = bc.u0
    phi[0] = 1.0
    return u, phi


def _front_from_phi(phi: np.ndarray, x: np.ndarray, dx: float) -> float:
    """phi = 1/2 crossing with linear interpolation between bracketing nodes."""
    idx = np.nonzero(phi >= 0.5)[0]
    if idx.size == 0:
        return 0.0
    i = int(idx[-1])
    if i + 1 >= phi.size:
        raise FrontRunoutError("melt front reached the right boundary")
    return float(x[i] + dx * (phi[i] - 0.5) / (phi[i] - phi[i + 1]))


def _boundary_flux(u: np.ndarray, mat: Material, dx: float) -> float:
    # q(0,t) = -k u_x(0,t), one-sided second-order difference
    return float(mat.k * (3.0 * u[0] - 4.0 * u[1] + u[2]) / (2.0 * dx))


def _total_energy(e: np.ndarray, dx: float) -> float:
    return float(dx * (e.sum() - 0.5 * (e[0] + e[-1])))


def _tracked_phi(s: float, x: np.ndarray, dx: float) -> np.ndarray:
    # melted fraction of the cell [x - dx/2, x + dx/2] around each node
    phi = np.clip((s - (x - 0.5 * dx)) / dx, 0.0, 1.0)
    phi[0] = 1.0
    return phi


def initial_state(mat: Material, bc: BoundaryData, grid: Grid1D,
                  out_every: int = 1) -> SimState:
    """Cold start: solid at melt temperature everywhere, boundary node liquid."""
    x = grid.nodes
    e = np.zeros(grid.nx + 1)
    e[0] = mat.rho * mat.c * bc.u0 + mat.rho * mat.l
    u, phi = _recover(e, mat, bc)
    return SimState(
        x=x,
        times=np.zeros(1),
        enthalpy=e[None, :].copy(),
        temperature=u[None, :],
        liquid_fraction=phi[None, :],
        front=FrontPath(times=np.zeros(1), positions=np.zeros(1)),
        total_energy=np.array([_total_energy(e, grid.dx)]),
        boundary_flux=np.array([_boundary_flux(u, mat, grid.dx)]),
        dt=grid.dt,
        out_every=out_every,
    )


def step(state: SimState, mat: Material, frac: FracParams, bc: BoundaryData,
         grid: Grid1D, n: int) -> SimState:
    """Advance the dense enthalpy-scheme reference state from level n-1 to n.

    Naive arithmetic (full memory sum per call); intended for small grids and
    as the ground truth the blocked run() engine is checked against.  The
    state must be dense (out_every == 1) and hold levels 0..n-1.
    """
    if state.out_every != 1:
        raise ValueError("step() needs a dense state (out_every == 1)")
    if state.times.size != n:
        raise ValueError(f"state holds {state.times.size} levels, expected {n}")
    _check_stability(mat, frac, grid)

    g = frac.gamma
    dx, dt = grid.dx, grid.dt
    coef = math.gamma(2.0 - g) * dt ** g * frac.tau_factor * mat.k / (dx * dx)
    e = state.enthalpy[-1].copy()
    u = state.temperature[-1]

    mem = np.zeros_like(e)
    if g < 1.0 and n >= 2:
        de = np.diff(state.enthalpy, axis=0)        # (n-1, nx+1)
        b = l1_weights(g, n)
        mem = b[n - 1:0:-1] @ de                    # sum_{j<=n-2} b[n-1-j] de[j]

    lap = u[2:] - 2.0 * u[1:-1] + u[:-2]
    e[1:-1] += coef * lap - mem[1:-1]
    u_new, phi_new = _recover(e, mat, bc)
    s = _front_from_phi(phi_new, state.x, dx)
    if s > grid.x_max - 2.0 * dx:
        raise FrontRunoutError("melt front reached the right boundary")

    return SimState(
        x=state.x,
        times=np.append(state.times, n * dt),
        enthalpy=np.vstack([state.enthalpy, e[None, :]]),
        temperature=np.vstack([state.temperature, u_new[None, :]]),
        liquid_fraction=np.vstack([state.liquid_fraction, phi_new[None, :]]),
        front=FrontPath(times=np.append(state.front.times, n * dt),
                        positions=np.append(state.front.positions,
                                            max(s, state.front.positions[-1]))),
        total_energy=np.append(state.total_energy, _total_energy(e, dx)),
        boundary_flux=np.append(state.boundary_flux, _boundary_flux(u_new, mat, dx)),
        dt=dt,
        out_every=1,
    )


def _preload_history(hist: np.ndarray, de: np.ndarray, b: np.ndarray,
                     m0: int, b_eff: int, ncol_active: int,
                     wbuf: np.ndarray) -> None:
    """hist[r] = sum_{j < m0} b[m0 + r - j] * de[j], r = 0..b_eff-1.

    The weight matrix is Hankel in (r, j): row r is a contiguous slice of b.
    Each history chunk is copied into a preallocated buffer (BLAS on the
    overlapping strided view itself is far slower) and consumed by one dense
    product in the (ncol x lc) @ (lc x b_eff) orientation, which handles the
    skinny column count much better than the transposed one.  Columns >=
    ncol_active have all-zero history and are skipped.
    """
    hist[:b_eff] = 0.0
    if m0 == 0 or ncol_active == 0:
        return
    acc = np.zeros((ncol_active, b_eff))
    chunk = wbuf.shape[1]
    for j0 in range(0, m0, chunk):
        j1 = min(j0 + chunk, m0)
        lc = j1 - j0
        wc = wbuf[:b_eff, :lc]
        np.copyto(wc, sliding_window_view(b, lc)[m0 - j1 + 1: m0 - j1 + 1 + b_eff])
        det = np.ascontiguousarray(de[j0:j1, :ncol_active][::-1].T)
        acc += det @ wc.T
    hist[:b_eff, :ncol_active] = acc.T


class _MemoryEngine:
    """Blocked L1 memory sums over a shared increment history."""

    def __init__(self, nt: int, ncol: int, gamma: float, block: int):
        self.b = l1_weights(gamma, nt)
        self.de = np.zeros((nt, ncol))
        self.block = block
        self.hist = np.zeros((block, ncol))
        self.wbuf = np.empty((block, min(HIST_CHUNK, max(1, nt - 1))))
        self.nt = nt

    def memory(self, m: int, ncol_active: int) -> np.ndarray:
        """sum_{j < m} b[m - j] * de[j] (excludes the unknown level-m term)."""
        r = m % self.block
        if r == 0:
            _preload_history(self.hist, self.de, self.b, m,
                             min(self.block, self.nt - m), ncol_active, self.wbuf)
        if r:
            return self.hist[r] + self.b[r:0:-1] @ self.de[m - r:m]
        return self.hist[0].copy()

    def record(self, m: int, increments: np.ndarray) -> None:
        self.de[m] = increments


def _run_tracked(mat: Material, frac: FracParams, bc: BoundaryData,
                 grid: Grid1D, out_every: int, block: int) -> SimState:
    g = frac.gamma
    nx, nt = grid.nx, grid.nt
    dx, dt = grid.dx, grid.dt
    u0 = bc.u0
    gfac = math.gamma(2.0 - g) * dt ** g * frac.tau_factor
    coef_u = gfac * mat.alpha / (dx * dx)
    coef_s = gfac * mat.k / (mat.rho * mat.l)
    fractional = g < 1.0

    x = grid.nodes
    u = np.zeros(nx + 1)
    u[0] = u0
    s = 0.0
    # memory columns: 0 = front increments (never pruned), 1.. = node
    # temperature increments
    engine = _MemoryEngine(nt, nx + 2, g, block) if fractional else None

    n_snap = nt // out_every + 1
    snap_u = np.zeros((n_snap, nx + 1))
    snap_u[0] = u
    front = np.zeros(nt + 1)
    energy = np.zeros(nt + 1)
    flux = np.zeros(nt + 1)
    e_init = mat.rho * mat.c * u + mat.rho * mat.l * _tracked_phi(0.0, x, dx)
    energy[0] = _total_energy(e_init, dx)
    flux[0] = _boundary_flux(u, mat, dx)

    runout_limit = grid.x_max - 2.0 * dx
    iface = 0    # index of the first node at or beyond the interface
    incr = np.zeros(nx + 2)
    for m in range(nt):
        if fractional:
            mem = engine.memory(m, min(iface + 2, nx + 2))
            mem_s, mem_u = float(mem[0]), mem[1:]
        else:
            mem_s, mem_u = 0.0, None

        if m == 0:
            # self-consistent first increment of the interface relation:
            # b0*ds/(Gamma(2-g) dt^g) = tau^(1-g) k u0 / (rho l ds)
            ds = math.sqrt(coef_s * u0)
        else:
            ip = max(iface - 2, 0)   # last regular liquid sample
            grad = -(u0 if ip == 0 else u[ip]) / (s - x[ip])
            # the model assumes a front that only advances; the explicit
            # update can dip below zero transiently at slave switches
            ds = max(coef_s * (-grad) - mem_s, 0.0)
        s_new = s + ds
        if s_new > runout_limit:
            raise FrontRunoutError(
                f"melt front at {s_new:g} within two cells of x_max = {grid.x_max:g}")

        du = np.zeros(nx + 1)
        last_liq = iface - 1         # slaved node; 1..last_liq-1 are regular
        if last_liq >= 2:
            lap = u[2:last_liq + 1] - 2.0 * u[1:last_liq] + u[:last_liq - 1]
            du[1:last_liq] = coef_u * lap
            if fractional:
                du[1:last_liq] -= mem_u[1:last_liq]
        u_new = u + du
        iface_new = int(np.searchsorted(x, s_new, side="right"))
        last = iface_new - 1
        if last >= 1:
            # slave the last liquid node to the linear profile through the
            # neighbouring liquid sample and (s, 0)
            left_u = u_new[last - 1] if last >= 2 else u0
            left_x = x[last - 1]
            u_new[last] = left_u * (s_new - x[last]) / (s_new - left_x)
            du[last] = u_new[last] - u[last]

        if fractional:
            incr[0] = s_new - s
            incr[1:] = du
            engine.record(m, incr)

        u, s, iface = u_new, s_new, iface_new
        front[m + 1] = s
        e = mat.rho * mat.c * u + mat.rho * mat.l * _tracked_phi(s, x, dx)
        energy[m + 1] = _total_energy(e, dx)
        flux[m + 1] = _boundary_flux(u, mat, dx) if iface >= 3 else mat.k * u0 / s
        if (m + 1) % out_every == 0:
            snap_u[(m + 1) // out_every] = u

    snap_s = front[::out_every][:n_snap]
    snap_phi = np.array([_tracked_phi(sv, x, dx) for sv in snap_s])
    snap_e = mat.rho * mat.c * snap_u + mat.rho * mat.l * snap_phi
    return SimState(
        x=x,
        times=dt * out_every * np.arange(n_snap),
        enthalpy=snap_e,
        temperature=snap_u,
        liquid_fraction=snap_phi,
        front=FrontPath(times=dt * np.arange(nt + 1), positions=front),
        total_energy=energy,
        boundary_flux=flux,
        dt=dt,
        out_every=out_every,
        scheme="tracked",
    )


def _run_enthalpy(mat: Material, frac: FracParams, bc: BoundaryData,
                  grid: Grid1D, out_every: int, block: int) -> SimState:
    g = frac.gamma
    nx, nt = grid.nx, grid.nt
    dx, dt = grid.dx, grid.dt
    rl = mat.rho * mat.l
    rc = mat.rho * mat.c
    u0 = bc.u0
    coef = math.gamma(2.0 - g) * dt ** g * frac.tau_factor * mat.k / (dx * dx)
    fractional = g < 1.0

    x = grid.nodes
    e = np.zeros(nx + 1)
    e[0] = rc * u0 + rl
    u = np.zeros(nx + 1)
    u[0] = u0
    phi = np.zeros(nx + 1)
    phi[0] = 1.0
    engine = _MemoryEngine(nt, nx + 1, g, block) if fractional else None
    incr = np.zeros(nx + 1)

    n_snap = nt // out_every + 1
    snap_e = np.zeros((n_snap, nx + 1))
    snap_u = np.zeros((n_snap, nx + 1))
    snap_phi = np.zeros((n_snap, nx + 1))
    snap_e[0], snap_u[0], snap_phi[0] = e, u, phi

    front = np.zeros(nt + 1)
    energy = np.zeros(nt + 1)
    flux = np.zeros(nt + 1)
    energy[0] = _total_energy(e, dx)
    flux[0] = _boundary_flux(u, mat, dx)

    runout_limit = grid.x_max - 2.0 * dx
    iface = 0
    for m in range(nt):
        if fractional:
            mem = engine.memory(m, min(iface + 4, nx + 1))
            dnew = coef * (u[2:] - 2.0 * u[1:-1] + u[:-2]) - mem[1:-1]
            incr[1:-1] = dnew
            engine.record(m, incr)
        else:
            dnew = coef * (u[2:] - 2.0 * u[1:-1] + u[:-2])
        e[1:-1] += dnew

        liquid = e >= rl
        u = np.where(liquid, (e - rl) / rc, 0.0)
        phi = np.where(liquid, 1.0, e / rl)
        u[0] = u0
        phi[0] = 1.0

        while iface + 1 <= nx and phi[iface + 1] >= 0.5:
            iface += 1
        if iface >= nx:
            raise FrontRunoutError("melt front reached the right boundary")
        s = x[iface] + dx * (phi[iface] - 0.5) / (phi[iface] - phi[iface + 1])
        if s > runout_limit:
            raise FrontRunoutError(
                f"melt front at {s:g} within two cells of x_max = {grid.x_max:g}")
        front[m + 1] = s
        energy[m + 1] = _total_energy(e, dx)
        flux[m + 1] = _boundary_flux(u, mat, dx)
        if (m + 1) % out_every == 0:
            j = (m + 1) // out_every
            snap_e[j], snap_u[j], snap_phi[j] = e, u, phi

    # fronts are monotone up to interpolation wiggle within a cell; clamp it
    front = np.maximum.accumulate(front)
    return SimState(
        x=x,
        times=dt * out_every * np.arange(n_snap),
        enthalpy=snap_e,
        temperature=snap_u,
        liquid_fraction=snap_phi,
        front=FrontPath(times=dt * np.arange(nt + 1), positions=front),
        total_energy=energy,
        boundary_flux=flux,
        dt=dt,
        out_every=out_every,
        scheme="enthalpy",
    )


def run(mat: Material, frac: FracParams, bc: BoundaryData, grid: Grid1D,
        out_every: int | None = None, block: int = 2048,
        scheme: str = "tracked") -> SimState:
    """Full melting run on the given grid.

    scheme='tracked' integrates the coupled model (windowed temperature
    memory plus the fractional interface condition); scheme='enthalpy' is
    the conservative weak form, which for gamma < 1 carries the extra
    latent-ramp memory of the local-balance variant (see module docstring).
    Records field snapshots every `out_every` levels (default targets ~400
    snapshots) and full-rate front/energy/flux series.  Raises
    StabilityError before stepping if the grid violates the explicit bound,
    FrontRunoutError if the melt front comes within two cells of x_max.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    _check_stability(mat, frac, grid)
    nt, nx = grid.nt, grid.nx
    if out_every is None:
        out_every = max(1, nt // 400)
    if out_every < 1:
        raise ValueError("out_every must be >= 1")
    if frac.gamma < 1.0 and (nt * (nx + 2) * 8) > MAX_HISTORY_BYTES:
        raise ValueError(
            f"fractional history would need {nt * (nx + 2) * 8 / 1e9:.1f} GB; "
            "coarsen the grid")
    if scheme == "tracked":
        return _run_tracked(mat, frac, bc, grid, out_every, block)
    return _run_enthalpy(mat, frac, bc, grid, out_every, block)
