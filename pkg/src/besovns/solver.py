"""Dealiased pseudo-spectral integration of incompressible flow on the torus.

The momentum equation is advanced in coefficient space in projected form,

    du/dt = -nu |k|^2 u - P [conv(u)],      div u = 0,

where P is the orthogonal projection onto divergence-free fields and conv(u)
is the convection term evaluated pseudo-spectrally in divergence form
d_j(u_i u_j).  Products are formed on the grid and masked with the 2/3 rule
(all modes with any |k_i| > floor((n-1)/3) zeroed), so the retained
coefficients of quadratic products are alias-free and the projected convection
term is exactly energy-neutral on masked states.

Time stepping is integrating-factor RK4: the viscous factor exp(-nu |k|^2 dt)
is applied exactly and classical RK4 handles the convection, so the scheme is
exact in the Stokes limit and fourth-order accurate overall.

Pressure is diagnostic only; it is recovered on demand from the Poisson
equation  -Lap p = sum_ij d_i d_j (u_i u_j)  with the same masked products.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as _fft

from .fields import (
    BOX_VOLUME,
    Grid,
    RealField,
    SpectralField,
    VectorField,
    forward_transform,
    grad_l2_norm_sq,
    inverse_transform,
    laplacian_l2_norm_sq,
    leray_project,
    lp_norm,
    magnitude_samples,
    vector_l2_norm,
)


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters: grid, viscosity, time stepping, initial data, sampling."""

    n: int = 32
    viscosity: float = 0.1
    dt: float = 1e-3
    t_end: float = 1.0
    dealias: bool = True
    init: str = "taylor-green"
    amplitude: float = 1.0
    spectral_slope: float = -2.0
    seed: int = 0
    sample_stride: int = 10

    def __post_init__(self):
        if self.viscosity <= 0:
            raise ValueError(f"viscosity must be positive, got {self.viscosity}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.init not in ("taylor-green", "random"):
            raise ValueError(f"unknown initial condition {self.init!r}")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")

    @property
    def grid(self) -> Grid:
        return Grid(self.n)


@dataclass(frozen=True)
class FlowState:
    """Divergence-free, mean-zero velocity in coefficient space at time t."""

    time: float
    velocity: VectorField

    @property
    def grid(self) -> Grid:
        return self.velocity.grid


@dataclass(frozen=True)
class TrajectorySample:
    """One recorded instant: state plus the standing diagnostics."""

    time: float
    state: FlowState
    energy: float
    grad_sq: float
    omega_l2: float
    laplacian_sq: float
    pressure: RealField
    extra: dict = field(default_factory=dict)


@dataclass
class EnergyBudget:
    """Initial energy, running dissipation integral, and their mismatch.

    ``dissipation`` is 2 nu int_0^t ||grad u||^2, accumulated by the trapezoid
    rule at every time step.  For the truncated system the energy balance is
    an equality, so ``defect`` measures only time-integration error.
    """

    initial_energy: float
    dissipation: float = 0.0
    current_energy: float = 0.0

    @property
    def defect(self) -> float:
        return self.current_energy + self.dissipation - self.initial_energy


@dataclass(frozen=True)
class Trajectory:
    config: SolverConfig
    samples: tuple
    budget: EnergyBudget
    aborted: bool = False
    abort_reason: str = ""

    @property
    def grad_sq_integral(self) -> float:
        """int_0^T ||grad u||^2 dt from the per-step dissipation accumulator."""
        return self.budget.dissipation / (2.0 * self.config.viscosity)


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


def taylor_green_init(grid: Grid, amplitude: float = 1.0) -> FlowState:
    """u = A (sin x1 cos x2 cos x3, -cos x1 sin x2 cos x3, 0): divergence-free."""
    x1, x2, x3 = grid.x
    u1 = amplitude * np.sin(x1) * np.cos(x2) * np.cos(x3)
    u2 = -amplitude * np.cos(x1) * np.sin(x2) * np.cos(x3)
    u3 = np.zeros(grid.shape)
    comps = tuple(forward_transform(RealField(grid, s)) for s in (u1, u2, u3))
    return FlowState(0.0, VectorField(comps))


def random_divfree_init(
    grid: Grid,
    seed: int,
    spectral_slope: float = -2.0,
    amplitude: float = 1.0,
) -> FlowState:
    """Gaussian coefficients shaped by |k|^slope, projected and symmetrized.

    Mean-zero and Nyquist-free by construction; bit-reproducible for a fixed
    seed.  Energy scales as amplitude^2.
    """
    rng = np.random.default_rng(seed)
    shape = grid.shape
    ksq = grid.k_sq
    envelope = np.zeros(shape)
    mask = ksq > 0
    envelope[mask] = np.sqrt(ksq[mask]) ** spectral_slope
    ka = grid.k_axis
    nyq = np.abs(ka) == grid.n // 2
    for axis in range(3):
        sl = [slice(None)] * 3
        sl[axis] = nyq
        envelope[tuple(sl)] = 0.0
    comps = []
    for _ in range(3):
        g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        comps.append(amplitude * envelope * g)
    # Hermitian part: c(k) <- (c(k) + conj(c(-k))) / 2
    def herm(c):
        r = c
        for axis in range(3):
            r = np.roll(np.flip(r, axis=axis), 1, axis=axis)
        return 0.5 * (c + np.conj(r))

    V = VectorField(tuple(SpectralField(grid, herm(c)) for c in comps))
    return FlowState(0.0, leray_project(V))


# ---------------------------------------------------------------------------
# Convection, dealiasing, pressure
# ---------------------------------------------------------------------------


def dealias_cutoff(n: int) -> int:
    """Largest retained |k_i| under the 2/3 rule; chosen so 2K < n - K and the
    retained band of quadratic products stays alias-free for every even n."""
    return (n - 1) // 3


@lru_cache(maxsize=None)
def _dealias_mask_cached(n: int) -> np.ndarray:
    cut = dealias_cutoff(n)
    ka = np.abs(Grid(n).k_axis)
    keep = ka <= cut
    m = keep.reshape(-1, 1, 1) & keep.reshape(1, -1, 1) & keep.reshape(1, 1, -1)
    m.setflags(write=False)
    return m


def dealias_mask(grid: Grid) -> np.ndarray:
    return _dealias_mask_cached(grid.n)


def apply_mask(V: VectorField, mask: np.ndarray) -> VectorField:
    return VectorField(tuple(SpectralField(c.grid, c.coeff * mask) for c in V))


def _convection_coeff(u_hat: list[np.ndarray], grid: Grid, mask) -> list[np.ndarray]:
    """Coefficients of d_j(u_i u_j) from grid products, optionally masked."""
    u = [_fft.ifftn(c, norm="forward").real for c in u_hat]
    d1, d2, d3 = grid.deriv_k
    dk = (d1, d2, d3)
    prods: dict[tuple[int, int], np.ndarray] = {}
    for i in range(3):
        for j in range(i, 3):
            prods[(i, j)] = _fft.fftn(u[i] * u[j], norm="forward")
    out = []
    for i in range(3):
        acc = dk[0] * prods[(min(i, 0), max(i, 0))]
        acc += dk[1] * prods[(min(i, 1), max(i, 1))]
        acc += dk[2] * prods[(min(i, 2), max(i, 2))]
        acc *= 1j
        if mask is not None:
            acc *= mask
        out.append(acc)
    return out


class _HalfSpectrum:
    """Per-grid multiplier bundle for the real-to-complex solver hot loop.

    States cross the public API as full-lattice coefficient arrays; the time
    stepper works on the rfftn half-spectrum (last axis truncated to n/2 + 1),
    which halves both transform cost and multiplier arithmetic.  All
    multipliers follow the same conventions as the full-lattice operators
    (first derivatives zero the Nyquist planes, the viscous factor keeps the
    full |k|^2).
    """

    _cache: dict[int, "_HalfSpectrum"] = {}

    def __init__(self, n: int):
        self.n = n
        self.h = n // 2 + 1
        ka = (np.fft.fftfreq(n) * n).astype(np.float64)
        kh = np.arange(self.h, dtype=np.float64)
        dka = ka.copy()
        dka[n // 2] = 0.0
        dkh = kh.copy()
        dkh[-1] = 0.0
        self.d1 = dka.reshape(-1, 1, 1)
        self.d2 = dka.reshape(1, -1, 1)
        self.d3 = dkh.reshape(1, 1, -1)
        k1 = ka.reshape(-1, 1, 1)
        k2 = ka.reshape(1, -1, 1)
        k3 = kh.reshape(1, 1, -1)
        self.k_sq = k1**2 + k2**2 + k3**2
        dk_sq = self.d1**2 + self.d2**2 + self.d3**2
        self.proj_inv = np.zeros_like(dk_sq)
        np.divide(1.0, dk_sq, out=self.proj_inv, where=dk_sq > 0)
        cut = dealias_cutoff(n)
        keep_a = np.abs(ka) <= cut
        keep_h = kh <= cut
        self.mask = (
            keep_a.reshape(-1, 1, 1) & keep_a.reshape(1, -1, 1) & keep_h.reshape(1, 1, -1)
        )
        # Parseval duplication weight: interior k3 planes represent +-k3.
        w = np.full(self.h, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self.parseval_w = w.reshape(1, 1, -1)

    @classmethod
    def get(cls, n: int) -> "_HalfSpectrum":
        if n not in cls._cache:
            cls._cache[n] = cls(n)
        return cls._cache[n]

    def to_half(self, full: np.ndarray) -> np.ndarray:
        return full[:, :, : self.h].copy()

    def to_full(self, half: np.ndarray) -> np.ndarray:
        n, h = self.n, self.h
        full = np.empty((n, n, n), dtype=complex)
        full[:, :, :h] = half
        rev = (n - np.arange(n)) % n
        src = np.arange(n - h, 0, -1)  # k3 = h..n-1 mirrors to n-k3 = n-h..1
        full[:, :, h:] = np.conj(half[np.ix_(rev, rev, src)])
        return full

    def grad_sq(self, u_half) -> float:
        s = sum(float(np.sum(self.parseval_w * self.k_sq * np.abs(c) ** 2)) for c in u_half)
        return BOX_VOLUME * s

    def energy(self, u_half) -> float:
        s = sum(float(np.sum(self.parseval_w * np.abs(c) ** 2)) for c in u_half)
        return BOX_VOLUME * s

    def project(self, c):
        lam = (self.d1 * c[0] + self.d2 * c[1] + self.d3 * c[2]) * self.proj_inv
        return [c[0] - self.d1 * lam, c[1] - self.d2 * lam, c[2] - self.d3 * lam]

    def convection(self, u_half, dealias: bool):
        n = self.n
        u = [_fft.irfftn(c, s=(n, n, n), norm="forward") for c in u_half]
        prods = {}
        for i in range(3):
            for j in range(i, 3):
                prods[(i, j)] = _fft.rfftn(u[i] * u[j], norm="forward")
        out = []
        for i in range(3):
            acc = self.d1 * prods[(min(i, 0), max(i, 0))]
            acc += self.d2 * prods[(min(i, 1), max(i, 1))]
            acc += self.d3 * prods[(min(i, 2), max(i, 2))]
            acc *= 1j
            if dealias:
                acc *= self.mask
            out.append(acc)
        return self.project(out)


def nonlinear_term(state: FlowState, dealias: bool = True) -> VectorField:
    """Leray-projected convection term P[(u.grad)u], dealiased by default."""
    grid = state.grid
    mask = dealias_mask(grid) if dealias else None
    conv = _convection_coeff([c.coeff for c in state.velocity], grid, mask)
    V = VectorField(tuple(SpectralField(grid, c) for c in conv))
    return leray_project(V)


def pressure_solve(state: FlowState, dealias: bool = True) -> RealField:
    """Mean-zero pressure from  -Lap p = sum_ij d_i d_j (u_i u_j)."""
    grid = state.grid
    mask = dealias_mask(grid) if dealias else None
    u = [_fft.ifftn(c.coeff, norm="forward").real for c in state.velocity]
    d1, d2, d3 = grid.deriv_k
    dk = (d1, d2, d3)
    acc = np.zeros(grid.shape, dtype=complex)
    for i in range(3):
        for j in range(i, 3):
            gij = _fft.fftn(u[i] * u[j], norm="forward")
            weight = 1.0 if i == j else 2.0
            acc += weight * dk[i] * dk[j] * gij
    # -Lap p = -(ik_i)(ik_j) g_ij summed = acc, so p_hat = -acc-with-k-squared...
    dk_sq = d1**2 + d2**2 + d3**2
    inv = np.zeros_like(dk_sq)
    np.divide(1.0, dk_sq, out=inv, where=dk_sq > 0)
    p_hat = -acc * inv
    if mask is not None:
        p_hat *= mask
    p_hat[0, 0, 0] = 0.0
    return inverse_transform(SpectralField(grid, p_hat), symmetry_tol=math.inf)


def pressure_gradient(state: FlowState, dealias: bool = True) -> VectorField:
    p_hat = forward_transform(pressure_solve(state, dealias))
    from .fields import gradient

    return gradient(p_hat)


@dataclass(frozen=True)
class PressureEstimateRow:
    q: float
    cz_ratio: float | None
    pressure_ratio: float | None
    skipped: bool


def check_pressure_estimates(state: FlowState, q_list) -> list[PressureEstimateRow]:
    """Measured ratios ||grad p||_q / || |grad u| |u| ||_q and ||p||_q / ||u||_{2q}^2."""
    from .fields import gradient, gradient_magnitude_samples, vector_inverse

    rows = []
    p = pressure_solve(state)
    gp = magnitude_samples(gradient(forward_transform(p)))
    gu = gradient_magnitude_samples(state.velocity)
    uu = magnitude_samples(vector_inverse(state.velocity))
    mixed = RealField(state.grid, gu.samples * uu.samples)
    for q in q_list:
        if not (1 < q < math.inf):
            raise ValueError(f"pressure estimates need 1 < q < inf, got {q}")
        den1 = lp_norm(mixed, q)
        den2 = lp_norm(uu, 2 * q) ** 2
        if den1 == 0.0 or den2 == 0.0:
            rows.append(PressureEstimateRow(q, None, None, True))
            continue
        rows.append(
            PressureEstimateRow(q, lp_norm(gp, q) / den1, lp_norm(p, q) / den2, False)
        )
    return rows


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _viscous_factor_cached(n: int, viscosity: float, dt: float) -> np.ndarray:
    w = np.exp(-viscosity * Grid(n).k_sq * dt)
    w.setflags(write=False)
    return w


def _viscous_factor(grid: Grid, viscosity: float, dt: float) -> np.ndarray:
    return _viscous_factor_cached(grid.n, viscosity, dt)


@lru_cache(maxsize=8)
def _viscous_half_cached(n: int, viscosity: float, dt: float) -> np.ndarray:
    w = np.exp(-viscosity * _HalfSpectrum.get(n).k_sq * dt)
    w.setflags(write=False)
    return w


def _step_half(u0, t: float, dt: float, viscosity: float, dealias: bool, hs: _HalfSpectrum):
    """Integrating-factor RK4 on half-spectrum coefficient arrays."""
    half = _viscous_half_cached(hs.n, viscosity, 0.5 * dt)
    full = _viscous_half_cached(hs.n, viscosity, dt)
    conv = lambda c: hs.convection(c, dealias)
    k1 = conv(u0)
    k2 = conv([half * (u0[i] - 0.5 * dt * k1[i]) for i in range(3)])
    k3 = conv([half * u0[i] - 0.5 * dt * k2[i] for i in range(3)])
    k4 = conv([full * u0[i] - dt * half * k3[i] for i in range(3)])
    new = [
        full * u0[i]
        - (dt / 6.0) * (full * k1[i] + 2.0 * half * (k2[i] + k3[i]) + k4[i])
        for i in range(3)
    ]
    for c in new:
        c[0, 0, 0] = 0.0
    worst = max(float(np.max(np.abs(c))) for c in new)
    if not math.isfinite(worst):
        bad = None
        for c in new:
            nf = ~np.isfinite(np.abs(c))
            if nf.any():
                bad = np.argwhere(nf)[0]
                break
        raise BlowUpError(t + dt, tuple(int(i) for i in bad) if bad is not None else None)
    return new


def step(state: FlowState, dt: float, viscosity: float, dealias: bool = True) -> FlowState:
    """One integrating-factor RK4 step; aborts with a blow-up report on NaN."""
    grid = state.grid
    hs = _HalfSpectrum.get(grid.n)
    u0 = [hs.to_half(c.coeff) for c in state.velocity]
    new = _step_half(u0, state.time, dt, viscosity, dealias, hs)
    V = VectorField(tuple(SpectralField(grid, hs.to_full(c)) for c in new))
    return FlowState(state.time + dt, V)


def _leray_arrays(coeffs, grid: Grid):
    d1, d2, d3 = grid.deriv_k
    lam = (d1 * coeffs[0] + d2 * coeffs[1] + d3 * coeffs[2]) * grid.proj_inv
    return [coeffs[0] - d1 * lam, coeffs[1] - d2 * lam, coeffs[2] - d3 * lam]


class BlowUpError(RuntimeError):
    """Raised when a step produces non-finite coefficients."""

    def __init__(self, time: float, worst_mode):
        self.time = time
        self.worst_mode = worst_mode
        super().__init__(f"solution blew up at t={time:.6g} (first bad mode index {worst_mode})")


def stability_headroom(state: FlowState, dt: float) -> float:
    """Advective CFL headroom: 0.5 * spacing / max|u| divided by dt.

    The viscous term needs no step restriction (the integrating factor is
    exact); values below 1 trigger a warning, not an abort.
    """
    umax = float(np.max(magnitude_samples(state.velocity).samples))
    if umax == 0.0:
        return math.inf
    return 0.5 * state.grid.spacing / umax / dt


def _make_state(grid: Grid, config: SolverConfig) -> FlowState:
    if config.init == "taylor-green":
        state = taylor_green_init(grid, config.amplitude)
    else:
        state = random_divfree_init(grid, config.seed, config.spectral_slope, config.amplitude)
    if config.dealias:
        state = FlowState(state.time, apply_mask(state.velocity, dealias_mask(grid)))
    return state


def run(config: SolverConfig, extra_diagnostics=None, initial_state: FlowState | None = None) -> Trajectory:
    """Integrate from t = 0 to t_end, sampling every ``sample_stride`` steps.

    ``extra_diagnostics(state) -> dict`` is evaluated at every emitted sample
    and stored under ``TrajectorySample.extra`` (the monitor hooks in here).
    A blow-up mid-run yields a truncated trajectory with the abort marker set.
    """
    grid = config.grid
    state = initial_state if initial_state is not None else _make_state(grid, config)
    n_steps = int(round(config.t_end / config.dt)) if config.t_end > 0 else 0
    hs = _HalfSpectrum.get(grid.n)

    budget = EnergyBudget(initial_energy=vector_l2_norm(state.velocity) ** 2)
    samples = []
    aborted = False
    reason = ""

    headroom = stability_headroom(state, config.dt)
    if headroom < 1.0:
        warnings.warn(
            f"time step dt={config.dt} exceeds the advective stability bound "
            f"by {1.0 / headroom:.2f}x; proceeding",
            RuntimeWarning,
            stacklevel=2,
        )

    def record(u_half, t: float):
        s = FlowState(
            t, VectorField(tuple(SpectralField(grid, hs.to_full(c)) for c in u_half))
        )
        energy = vector_l2_norm(s.velocity) ** 2
        gsq = grad_l2_norm_sq(s.velocity)
        lsq = laplacian_l2_norm_sq(s.velocity)
        extra = extra_diagnostics(s) if extra_diagnostics is not None else {}
        samples.append(
            TrajectorySample(
                time=t,
                state=s,
                energy=energy,
                grad_sq=gsq,
                omega_l2=math.sqrt(gsq),
                laplacian_sq=lsq,
                pressure=pressure_solve(s, config.dealias),
                extra=extra,
            )
        )

    u_half = [hs.to_half(c.coeff) for c in state.velocity]
    t = state.time
    record(u_half, t)
    budget.current_energy = budget.initial_energy
    prev_gsq = hs.grad_sq(u_half)
    for istep in range(1, n_steps + 1):
        try:
            u_half = _step_half(u_half, t, config.dt, config.viscosity, config.dealias, hs)
        except BlowUpError as exc:
            aborted = True
            reason = str(exc)
            break
        t = istep * config.dt
        gsq = hs.grad_sq(u_half)
        budget.dissipation += config.viscosity * config.dt * (prev_gsq + gsq)
        prev_gsq = gsq
        energy = hs.energy(u_half)
        budget.current_energy = energy
        if energy > 10.0 * budget.initial_energy + 1e-300:
            aborted = True
            reason = f"energy grew past 10x the initial value at t={t:.6g}"
            break
        if istep % config.sample_stride == 0 or istep == n_steps:
            record(u_half, t)
    return Trajectory(config, tuple(samples), budget, aborted, reason)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, state: FlowState, viscosity: float):
    """Dump (n, t, nu, coefficients) to a .npz archive.

    Layout: scalar arrays ``n``, ``time``, ``viscosity`` and complex arrays
    ``u1``, ``u2``, ``u3`` of shape (n, n, n) in numpy fftn index order
    (axis order x1, x2, x3; wavenumber k at index k mod n).  Loading restores
    the state bit-exactly.
    """
    np.savez(
        path,
        n=np.int64(state.grid.n),
        time=np.float64(state.time),
        viscosity=np.float64(viscosity),
        u1=state.velocity[0].coeff,
        u2=state.velocity[1].coeff,
        u3=state.velocity[2].coeff,
    )


def load_checkpoint(path) -> tuple[FlowState, float]:
    with np.load(path) as data:
        grid = Grid(int(data["n"]))
        comps = tuple(SpectralField(grid, data[name]) for name in ("u1", "u2", "u3"))
        return FlowState(float(data["time"]), VectorField(comps)), float(data["viscosity"])
