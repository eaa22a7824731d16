"""Periodic-box fields, discrete Fourier transforms, and spectral calculus.

Everything in this package lives on the torus [0, 2pi)^3 sampled on a uniform
n^3 grid.  A scalar field has two interchangeable representations:

* ``RealField``      -- samples f(x_j) on the grid, real valued;
* ``SpectralField``  -- Fourier-series coefficients c(k) with
  f(x) = sum_k c(k) exp(i k.x) over the integer wavenumber lattice.

Normalization (used everywhere, stated once): ``forward_transform`` divides by
n^3 so the coefficients are the trigonometric-interpolant series coefficients.
With uniform quadrature weights (2pi/n)^3 this gives the Parseval identity

    integral |f|^2 dx = (2pi)^3 * sum_k |c(k)|^2,

and the round trip inverse(forward(f)) reproduces f to round-off.

First-derivative multipliers zero the Nyquist plane (k_i = n/2): the odd
derivative of the Nyquist mode is not determined by real samples.  The
Laplacian, an even multiplier, keeps the full |k|^2.  Consequently the exact
vector-calculus identities (curl grad = 0, div curl = 0, Laplacian = -curl curl
on divergence-free fields) hold to round-off on fields with empty Nyquist
planes, which every field constructor in this package produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as _fft

TWO_PI = 2.0 * math.pi
#: (2pi)^3, the volume of the periodic box.
BOX_VOLUME = TWO_PI**3


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with n points per axis on [0, 2pi)^3.

    The wavenumber lattice is k in {-n/2+1, ..., n/2}^3 stored in numpy fftn
    layout; the index n/2 holds the Nyquist pair +-n/2 (self-conjugate, carries
    a real coefficient for real fields).
    """

    n: int

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < 8:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @cached_property
    def k_axis(self) -> np.ndarray:
        """Integer wavenumbers along one axis in fftn order."""
        return (np.fft.fftfreq(self.n) * self.n).astype(np.int64)

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable integer wavenumber arrays (k1, k2, k3)."""
        ka = self.k_axis
        return (
            ka.reshape(-1, 1, 1),
            ka.reshape(1, -1, 1),
            ka.reshape(1, 1, -1),
        )

    @cached_property
    def deriv_k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavenumbers for first-derivative multipliers, Nyquist plane zeroed."""
        ka = self.k_axis.astype(np.float64)
        ka[self.n // 2] = 0.0
        return (
            ka.reshape(-1, 1, 1),
            ka.reshape(1, -1, 1),
            ka.reshape(1, 1, -1),
        )

    @cached_property
    def k_sq(self) -> np.ndarray:
        """|k|^2 on the full lattice (Nyquist included)."""
        k1, k2, k3 = self.k
        return (k1.astype(np.float64)) ** 2 + k2**2 + k3**2

    @cached_property
    def proj_inv(self) -> np.ndarray:
        """1/|k|^2 with derivative wavenumbers, zero where they vanish."""
        d1, d2, d3 = self.deriv_k
        dk_sq = d1**2 + d2**2 + d3**2
        inv = np.zeros_like(dk_sq)
        np.divide(1.0, dk_sq, out=inv, where=dk_sq > 0)
        inv.setflags(write=False)
        return inv

    @cached_property
    def k_abs(self) -> np.ndarray:
        return np.sqrt(self.k_sq)

    @cached_property
    def x(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable sample coordinates x_j = j * spacing."""
        ax = np.arange(self.n) * self.spacing
        return (ax.reshape(-1, 1, 1), ax.reshape(1, -1, 1), ax.reshape(1, 1, -1))


@dataclass(frozen=True)
class RealField:
    """Scalar field given by real samples on the grid."""

    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        if self.samples.shape != self.grid.shape:
            raise ValueError(
                f"sample array shape {self.samples.shape} does not match grid {self.grid.shape}"
            )


@dataclass(frozen=True)
class SpectralField:
    """Scalar field given by complex Fourier coefficients in fftn layout."""

    grid: Grid
    coeff: np.ndarray

    def __post_init__(self):
        if self.coeff.shape != self.grid.shape:
            raise ValueError(
                f"coefficient array shape {self.coeff.shape} does not match grid {self.grid.shape}"
            )


@dataclass(frozen=True)
class VectorField:
    """Three scalar components sharing one grid and one representation."""

    components: tuple

    def __post_init__(self):
        if len(self.components) != 3:
            raise ValueError("a vector field has exactly three components")
        kinds = {type(c) for c in self.components}
        if len(kinds) != 1 or kinds.pop() not in (RealField, SpectralField):
            raise ValueError("vector components must be all RealField or all SpectralField")
        grids = {c.grid.n for c in self.components}
        if len(grids) != 1:
            raise ValueError("vector components must share one grid")

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    @property
    def is_spectral(self) -> bool:
        return isinstance(self.components[0], SpectralField)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]


def _first_nonfinite_index(a: np.ndarray):
    bad = ~np.isfinite(a)
    if bad.any():
        return tuple(int(i) for i in np.argwhere(bad)[0])
    return None


def forward_transform(f: RealField) -> SpectralField:
    """Samples -> series coefficients (divides by n^3); rejects non-finite input."""
    idx = _first_nonfinite_index(f.samples)
    if idx is not None:
        raise ValueError(f"non-finite sample at grid index {idx}: {f.samples[idx]!r}")
    coeff = _fft.fftn(f.samples, norm="forward")
    return SpectralField(f.grid, coeff)


def _conjugate_reflection(coeff: np.ndarray) -> np.ndarray:
    """conj(c(-k)) laid out on the same index lattice."""
    out = coeff
    for axis in range(3):
        out = np.roll(np.flip(out, axis=axis), 1, axis=axis)
    return np.conj(out)


def hermitian_defect(F: SpectralField) -> float:
    """Largest |c(k) - conj(c(-k))| relative to the largest coefficient."""
    diff = np.abs(F.coeff - _conjugate_reflection(F.coeff))
    scale = float(np.max(np.abs(F.coeff)))
    if scale == 0.0:
        return 0.0
    return float(np.max(diff)) / scale


def inverse_transform(F: SpectralField, symmetry_tol: float = 1e-10) -> RealField:
    """Coefficients -> real samples; rejects Hermitian-symmetry violations.

    The violation report names the worst-offending wavenumber k.
    """
    diff = np.abs(F.coeff - _conjugate_reflection(F.coeff))
    scale = float(np.max(np.abs(F.coeff)))
    if scale > 0.0:
        worst = float(np.max(diff))
        if worst > symmetry_tol * scale:
            idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
            ka = F.grid.k_axis
            k = tuple(int(ka[i]) for i in idx)
            raise ValueError(
                f"Hermitian symmetry violated at k={k}: |c(k)-conj(c(-k))| = {worst:.3e} "
                f"(tolerance {symmetry_tol:.1e} x max|c| = {symmetry_tol * scale:.3e})"
            )
    samples = _fft.ifftn(F.coeff, norm="forward").real
    return RealField(F.grid, samples)


def partial_derivative(F: SpectralField, axis: int) -> SpectralField:
    """d/dx_axis as the multiplier i*k_axis, axis in {1, 2, 3}; Nyquist zeroed."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    dk = F.grid.deriv_k[axis - 1]
    return SpectralField(F.grid, 1j * dk * F.coeff)


def gradient(F: SpectralField) -> VectorField:
    return VectorField(tuple(partial_derivative(F, a) for a in (1, 2, 3)))


def horizontal_gradient(F: SpectralField) -> tuple[SpectralField, SpectralField]:
    """(d1 F, d2 F), the horizontal gradient pair."""
    return partial_derivative(F, 1), partial_derivative(F, 2)


def laplacian(F: SpectralField) -> SpectralField:
    return SpectralField(F.grid, -F.grid.k_sq * F.coeff)


def _require_spectral_vector(V: VectorField, what: str):
    if not V.is_spectral:
        raise ValueError(f"{what} requires a coefficient-space vector field")


def divergence(V: VectorField) -> SpectralField:
    _require_spectral_vector(V, "divergence")
    g = V.grid
    dk = g.deriv_k
    coeff = 1j * (dk[0] * V[0].coeff + dk[1] * V[1].coeff + dk[2] * V[2].coeff)
    return SpectralField(g, coeff)


def curl(V: VectorField) -> VectorField:
    _require_spectral_vector(V, "curl")
    g = V.grid
    d1, d2, d3 = g.deriv_k
    c1, c2, c3 = (c.coeff for c in V)
    w1 = 1j * (d2 * c3 - d3 * c2)
    w2 = 1j * (d3 * c1 - d1 * c3)
    w3 = 1j * (d1 * c2 - d2 * c1)
    return VectorField(tuple(SpectralField(g, w) for w in (w1, w2, w3)))


def leray_project(V: VectorField) -> VectorField:
    """Remove the gradient part: v(k) <- v(k) - k (k.v(k)) / |k|^2 for k != 0.

    Uses the Nyquist-zeroed wavenumbers so the projected field is
    divergence-free (in the discrete-derivative sense) to round-off, and the
    projection is idempotent.
    """
    _require_spectral_vector(V, "leray_project")
    g = V.grid
    d1, d2, d3 = g.deriv_k
    kdotv = d1 * V[0].coeff + d2 * V[1].coeff + d3 * V[2].coeff
    lam = kdotv * g.proj_inv
    out = (V[0].coeff - d1 * lam, V[1].coeff - d2 * lam, V[2].coeff - d3 * lam)
    return VectorField(tuple(SpectralField(g, c) for c in out))


def lp_norm(f: RealField, p) -> float:
    """L^p norm with uniform Riemann weights; p = inf gives max |f|.

    The Riemann sum is exact for trigonometric polynomials below Nyquist when
    p = 2 and spectrally accurate for smooth fields otherwise.
    """
    if p != math.inf and p < 1:
        raise ValueError(f"L^p norm requires p >= 1 or p = inf, got {p}")
    a = np.abs(f.samples)
    if p == math.inf:
        return float(np.max(a))
    if p == 2:
        return float(math.sqrt(f.grid.cell_volume * np.sum(a * a)))
    return float((f.grid.cell_volume * np.sum(a**p)) ** (1.0 / p))


def l2_norm_spectral(F: SpectralField) -> float:
    """||f||_{L^2} evaluated in coefficient space (Parseval)."""
    return float(math.sqrt(BOX_VOLUME * np.sum(np.abs(F.coeff) ** 2)))


def vector_l2_norm(V: VectorField) -> float:
    _require_spectral_vector(V, "vector_l2_norm")
    s = sum(np.sum(np.abs(c.coeff) ** 2) for c in V)
    return float(math.sqrt(BOX_VOLUME * s))


def grad_l2_norm_sq(V: VectorField) -> float:
    """||grad u||_{L^2}^2 = (2pi)^3 sum |k|^2 |u(k)|^2 over the three components."""
    _require_spectral_vector(V, "grad_l2_norm_sq")
    ksq = V.grid.k_sq
    s = sum(np.sum(ksq * np.abs(c.coeff) ** 2) for c in V)
    return float(BOX_VOLUME * s)


def laplacian_l2_norm_sq(V: VectorField) -> float:
    """||Lap u||_{L^2}^2 = (2pi)^3 sum |k|^4 |u(k)|^2 over the three components."""
    _require_spectral_vector(V, "laplacian_l2_norm_sq")
    k4 = V.grid.k_sq**2
    s = sum(np.sum(k4 * np.abs(c.coeff) ** 2) for c in V)
    return float(BOX_VOLUME * s)


def vector_inverse(V: VectorField) -> VectorField:
    return VectorField(tuple(inverse_transform(c) for c in V))


def vector_forward(V: VectorField) -> VectorField:
    return VectorField(tuple(forward_transform(c) for c in V))


def magnitude_samples(V: VectorField) -> RealField:
    """Pointwise Euclidean magnitude of a sample-space vector field."""
    if V.is_spectral:
        V = vector_inverse(V)
    m = np.sqrt(sum(c.samples**2 for c in V))
    return RealField(V.grid, m)


def gradient_tensor(V: VectorField) -> list[list[SpectralField]]:
    """All nine derivatives d_j u_i, indexed [i][j] (coefficient space)."""
    _require_spectral_vector(V, "gradient_tensor")
    return [[partial_derivative(c, axis) for axis in (1, 2, 3)] for c in V]


def gradient_magnitude_samples(V: VectorField) -> RealField:
    """Pointwise Frobenius magnitude |grad u| of the velocity gradient."""
    _require_spectral_vector(V, "gradient_magnitude_samples")
    acc = np.zeros(V.grid.shape)
    for row in gradient_tensor(V):
        for d in row:
            acc += inverse_transform(d).samples ** 2
    return RealField(V.grid, np.sqrt(acc))


def l2_inner(V: VectorField, W: VectorField) -> float:
    """L^2 inner product of two coefficient-space vector fields."""
    _require_spectral_vector(V, "l2_inner")
    _require_spectral_vector(W, "l2_inner")
    s = sum(np.sum(v.coeff * np.conj(w.coeff)).real for v, w in zip(V, W))
    return float(BOX_VOLUME * s)


def mean_zero(F: SpectralField) -> bool:
    scale = float(np.max(np.abs(F.coeff)))
    return abs(F.coeff[0, 0, 0]) <= 1e-14 * max(scale, 1e-300)


def relative_divergence(V: VectorField) -> float:
    """||div u||_{L^2} / ||u||_{L^2} (0 for the zero field)."""
    nrm = vector_l2_norm(V)
    if nrm == 0.0:
        return 0.0
    return l2_norm_spectral(divergence(V)) / nrm
