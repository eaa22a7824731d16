"""Dyadic frequency decomposition and Besov norms.

The decomposition is built from two radial cutoffs chi, phi with

    chi = 1 on {rho <= 1},        supp chi in {rho <= 4/3},
    phi(rho) = chi(rho/2) - chi(rho),

so supp phi is contained in [1, 8/3], phi = 1 on [4/3, 2], and the dyadic
family phi(2^-j rho) telescopes to an exact partition of unity on rho > 0:

    sum_j phi(2^-j rho) = 1,      chi(rho) + sum_{j>=0} phi(2^-j rho) = 1.

Blocks act directly as Fourier multipliers on the coefficient lattice: the
j-th block keeps the annulus |k| ~ 2^j, the low-pass keeps the ball
|k| <~ 2^j.  The convolution kernels behind the multipliers are never
materialized; on the grid the two definitions coincide.

Besov norms assemble the block L^p norms with weights 2^(j s) in l^q over the
finite range of dyadic indices resolvable on the grid.  The k = 0 mode is
excluded throughout (homogeneous norms are blind to constants), and results
carry warning flags instead of silently dropping information: nonzero mean,
empty block range, and spectra with more than 1% of their weighted mass in the
top resolvable block are all flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as _fft

from .fields import (
    Grid,
    RealField,
    SpectralField,
    inverse_transform,
    lp_norm,
    partial_derivative,
)


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C^infinity transition: 0 for t <= 0, 1 for t >= 1, strictly monotone between."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(1 - t > 0, np.exp(-1.0 / np.maximum(1 - t, 1e-300)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class DyadicProfile:
    """The radial cutoffs chi, phi and their support descriptors.

    ``ball_radius`` bounds supp chi; ``annulus`` bounds supp phi.  The actual
    phi constructed here is supported in [1, 8/3], inside the nominal
    [3/4, 8/3] annulus.
    """

    ball_radius: float = 4.0 / 3.0
    annulus: tuple[float, float] = (0.75, 8.0 / 3.0)
    plateau: tuple[float, float] = (4.0 / 3.0, 2.0)

    def chi(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=np.float64)
        return _smooth_step((self.ball_radius - rho) / (self.ball_radius - 1.0))

    def phi(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=np.float64)
        return self.chi(rho / 2.0) - self.chi(rho)


DEFAULT_PROFILE = DyadicProfile()


@dataclass(frozen=True)
class BlockRange:
    """Dyadic indices resolvable on a grid: j_min..j_max inclusive."""

    j_min: int
    j_max: int

    def __iter__(self):
        return iter(range(self.j_min, self.j_max + 1))

    def __contains__(self, j) -> bool:
        return self.j_min <= j <= self.j_max

    def __len__(self) -> int:
        return self.j_max - self.j_min + 1


@lru_cache(maxsize=None)
def block_range(n: int) -> BlockRange:
    """Smallest/largest j whose annulus [3/4, 8/3]*2^j meets the nonzero lattice.

    j_min = -1 on the unit integer lattice; j_max grows like log2(n).
    """
    grid = Grid(n)
    kabs = np.unique(grid.k_abs)
    kabs = kabs[kabs > 0]
    k_lo, k_hi = float(kabs[0]), float(kabs[-1])
    hits = [
        j
        for j in range(-8, int(math.ceil(math.log2(k_hi))) + 3)
        if np.any((kabs >= 0.75 * 2.0**j) & (kabs <= (8.0 / 3.0) * 2.0**j))
    ]
    return BlockRange(min(hits), max(hits))


_weight_cache: dict[tuple[int, int, int], np.ndarray] = {}


def _block_weights(grid: Grid, j: int, profile: DyadicProfile) -> np.ndarray:
    key = (grid.n, j, id(profile))
    w = _weight_cache.get(key)
    if w is None:
        w = profile.phi(grid.k_abs * 2.0 ** (-j))
        w[0, 0, 0] = 0.0
        _weight_cache[key] = w
    return w


def dyadic_block(f: SpectralField, j: int, profile: DyadicProfile = DEFAULT_PROFILE) -> SpectralField:
    """Frequency projection to the annulus |k| ~ 2^j; k = 0 always zeroed."""
    return SpectralField(f.grid, _block_weights(f.grid, j, profile) * f.coeff)


def low_pass(f: SpectralField, j: int, profile: DyadicProfile = DEFAULT_PROFILE) -> SpectralField:
    """Frequency projection to the ball |k| <~ 2^j via the chi multiplier."""
    w = profile.chi(f.grid.k_abs * 2.0 ** (-j))
    return SpectralField(f.grid, w * f.coeff)


@dataclass(frozen=True)
class BesovIndex:
    """Regularity s, integrability p, summation q of a homogeneous Besov norm."""

    s: float
    p: float = math.inf
    q: float = math.inf

    def __post_init__(self):
        for name, e in (("p", self.p), ("q", self.q)):
            if e != math.inf and e < 1:
                raise ValueError(f"Besov exponent {name} must be >= 1 or inf, got {e}")


@dataclass(frozen=True)
class BesovNorm:
    """A Besov norm value plus the bookkeeping of how it was computed."""

    value: float
    index: BesovIndex
    j_range: BlockRange
    block_norms: tuple[float, ...]
    warnings: tuple[str, ...] = field(default=())
    top_block_share: float = 0.0

    def __float__(self) -> float:
        return self.value


def besov_norm(
    f: SpectralField,
    index: BesovIndex,
    profile: DyadicProfile = DEFAULT_PROFILE,
    j_range: BlockRange | None = None,
) -> BesovNorm:
    """Homogeneous Besov norm over the resolvable dyadic range.

    Each block L^p norm is evaluated by inverse transform and quadrature.  A
    nonzero k = 0 coefficient is excluded and flagged; a top block holding
    more than 1% of the weighted l^q mass flags possible truncation loss.
    """
    if j_range is None:
        j_range = block_range(f.grid.n)
    warnings: list[str] = []
    scale = float(np.max(np.abs(f.coeff)))
    if scale > 0 and abs(f.coeff[0, 0, 0]) > 1e-13 * scale:
        warnings.append("nonzero mean excluded from homogeneous norm")
    terms = []
    for j in j_range:
        block = dyadic_block(f, j, profile)
        nrm = lp_norm(inverse_transform(block, symmetry_tol=math.inf), index.p)
        terms.append(2.0 ** (j * index.s) * nrm)
    if not terms:
        return BesovNorm(0.0, index, j_range, (), ("empty block range",), 0.0)
    arr = np.array(terms)
    if index.q == math.inf:
        value = float(np.max(arr))
        mass = arr
    else:
        value = float(np.sum(arr**index.q) ** (1.0 / index.q))
        mass = arr**index.q
    total = float(np.sum(mass))
    share = float(mass[-1] / total) if total > 0 else 0.0
    if share > 0.01:
        warnings.append(
            f"top dyadic block j={j_range.j_max} holds {share:.1%} of the norm; "
            "grid truncation may under-report"
        )
    return BesovNorm(value, index, j_range, tuple(terms), tuple(warnings), share)


class BlockTable:
    """Per-block sample arrays and L^p norms of one scalar field.

    Besov norms with different regularity indices reuse the same block
    transforms, so hot paths (criterion evaluation, calibration) build one
    table per scalar and assemble every norm from it.
    """

    def __init__(
        self,
        f: SpectralField,
        profile: DyadicProfile = DEFAULT_PROFILE,
        j_range: BlockRange | None = None,
    ):
        self.grid = f.grid
        self.profile = profile
        self.j_range = j_range if j_range is not None else block_range(f.grid.n)
        self.samples = {}
        for j in self.j_range:
            block = dyadic_block(f, j, profile)
            self.samples[j] = _fft.ifftn(block.coeff, norm="forward").real
        self._norms: dict = {}

    def lp(self, j: int, p) -> float:
        key = (j, p)
        if key not in self._norms:
            self._norms[key] = lp_norm(RealField(self.grid, self.samples[j]), p)
        return self._norms[key]

    def besov(self, index: BesovIndex) -> float:
        terms = np.array(
            [2.0 ** (j * index.s) * self.lp(j, index.p) for j in self.j_range]
        )
        if len(terms) == 0:
            return 0.0
        if index.q == math.inf:
            return float(np.max(terms))
        return float(np.sum(terms**index.q) ** (1.0 / index.q))


def besov_max(tables, index: BesovIndex) -> float:
    """Max-over-components Besov norm from prebuilt block tables."""
    return max(t.besov(index) for t in tables)


def besov_magnitude(tables, index: BesovIndex) -> float:
    """Pointwise-Euclidean-magnitude Besov norm from prebuilt block tables."""
    tables = list(tables)
    grid = tables[0].grid
    j_range = tables[0].j_range
    terms = []
    for j in j_range:
        mag = np.sqrt(sum(t.samples[j] ** 2 for t in tables))
        terms.append(2.0 ** (j * index.s) * lp_norm(RealField(grid, mag), index.p))
    arr = np.array(terms)
    if index.q == math.inf:
        return float(np.max(arr)) if terms else 0.0
    return float(np.sum(arr**index.q) ** (1.0 / index.q))


def besov_norm_components(
    components,
    index: BesovIndex,
    combine: str = "max",
    profile: DyadicProfile = DEFAULT_PROFILE,
) -> float:
    """Besov norm of a component list under a stated vector convention.

    ``combine="max"`` takes the maximum of the scalar component norms (the
    monitor's convention); ``combine="magnitude"`` applies the block to every
    component and measures the pointwise Euclidean magnitude, which is the
    convention under which a single mode cos(x1+x2) has gradient norm sqrt(2).
    """
    components = list(components)
    if combine == "max":
        return besov_max([BlockTable(c, profile) for c in components], index)
    if combine != "magnitude":
        raise ValueError(f"unknown combine convention {combine!r}")
    return besov_magnitude([BlockTable(c, profile) for c in components], index)


def sobolev_seminorm(f: SpectralField, s: float) -> float:
    """Homogeneous Sobolev seminorm ((2pi)^3 sum_{k!=0} |k|^{2s} |c(k)|^2)^{1/2}."""
    ksq = f.grid.k_sq
    mask = ksq > 0
    power = np.zeros_like(ksq)
    power[mask] = ksq[mask] ** s
    return float(math.sqrt((2 * math.pi) ** 3 * np.sum(power * np.abs(f.coeff) ** 2)))


def dyadic_dilate(f: SpectralField, target: Grid) -> SpectralField:
    """f(x) -> f(2x) by the index remap c'(2k) = c(k).

    The target grid must resolve the doubled lattice: target.n >= 2 n works
    always; equal n works when f is band-limited to |k|_inf < n/4.
    """
    src = f.grid
    out = np.zeros(target.shape, dtype=complex)
    ka = src.k_axis
    keep = np.abs(ka) < max(src.n // 2, 1)  # drop the ambiguous Nyquist pair
    idx = np.nonzero(keep)[0]
    kvals = ka[idx]
    if np.max(np.abs(kvals)) * 2 > target.n // 2:
        raise ValueError(
            f"dilated modes |k| <= {np.max(np.abs(kvals)) * 2} do not fit on grid n={target.n}"
        )
    tgt_idx = (2 * kvals) % target.n
    src_ix = np.ix_(idx, idx, idx)
    tgt_ix = np.ix_(tgt_idx, tgt_idx, tgt_idx)
    out[tgt_ix] = f.coeff[src_ix]
    return SpectralField(target, out)


# ---------------------------------------------------------------------------
# Inequality probes
# ---------------------------------------------------------------------------

_AXES = (1, 2, 3)


def _multi_indices(order: int):
    """All derivative multi-indices of total order ``order`` (axes 1..3)."""
    if order == 0:
        return [()]
    out = []

    def rec(prefix, start):
        if len(prefix) == order:
            out.append(tuple(prefix))
            return
        for a in _AXES[start - 1 :]:
            rec(prefix + [a], a)

    rec([], 1)
    return out


def _apply_multi(f: SpectralField, alpha) -> SpectralField:
    for a in alpha:
        f = partial_derivative(f, a)
    return f


@dataclass(frozen=True)
class BernsteinReport:
    j: int
    lam: float
    k_order: int
    p: float
    q: float
    f_norm_p: float
    sup_deriv_q: float
    upper_ratio: float
    lower_ratio: float | None
    gradient_ratio: float | None
    skipped: bool = False


def check_bernstein(
    f_band: SpectralField,
    j: int,
    k_order: int,
    p: float,
    q: float,
) -> BernsteinReport:
    """Measured Bernstein ratios for a single dyadic block at scale 2^j.

    upper_ratio = sup_{|a|=k} ||d^a f||_q / (lam^{k + 3(1/p - 1/q)} ||f||_p);
    lower_ratio (p = q only) = lam^k ||f||_p / sup_{|a|=k} ||d^a f||_p.
    For k_order = 1 the report also carries the gradient-magnitude ratio
    || |grad f| ||_q / (lam ||f||_p), which equals 1 exactly on a pure mode
    normalized by its own |k|.
    """
    if q < p:
        raise ValueError(f"Bernstein ratio requires q >= p, got p={p}, q={q}")
    lam = 2.0**j
    if not np.any(f_band.coeff):
        return BernsteinReport(j, lam, k_order, p, q, 0.0, 0.0, math.nan, None, None, skipped=True)
    f_norm = lp_norm(inverse_transform(f_band, symmetry_tol=math.inf), p)
    derivs = [
        lp_norm(inverse_transform(_apply_multi(f_band, alpha), symmetry_tol=math.inf), q)
        for alpha in _multi_indices(k_order)
    ]
    sup_d = max(derivs)
    upper = sup_d / (lam ** (k_order + 3.0 * (1.0 / p - 1.0 / q)) * f_norm)
    lower = None
    if p == q and sup_d > 0:
        lower = lam**k_order * f_norm / sup_d
    grad_ratio = None
    if k_order == 1:
        acc = np.zeros(f_band.grid.shape)
        for a in _AXES:
            acc += inverse_transform(partial_derivative(f_band, a), symmetry_tol=math.inf).samples ** 2
        gmag = lp_norm(RealField(f_band.grid, np.sqrt(acc)), q)
        grad_ratio = gmag / (lam ** (1.0 + 3.0 * (1.0 / p - 1.0 / q)) * f_norm)
    return BernsteinReport(j, lam, k_order, p, q, f_norm, sup_d, upper, lower, grad_ratio)


@dataclass(frozen=True)
class InterpolationSpec:
    """Parameters of the low-frequency/Sobolev interpolation inequality.

    The derived quantities satisfy beta = alpha (p/q - 1) and theta = q/p with
    1 <= q < p < infinity and alpha > 0.
    """

    alpha: float
    p: float
    q: float

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValueError("alpha must be positive")
        if not (1 <= self.q < self.p < math.inf):
            raise ValueError(f"need 1 <= q < p < inf, got q={self.q}, p={self.p}")

    @property
    def beta(self) -> float:
        return self.alpha * (self.p / self.q - 1.0)

    @property
    def theta(self) -> float:
        return self.q / self.p


#: ||f||_{L^4} <= C ||f||^{1/2}_{B^-1} ||f||^{1/2}_{H^1}
SPEC_A3 = InterpolationSpec(alpha=1.0, p=4.0, q=2.0)
#: ||f||_{L^6} <= C ||f||^{2/3}_{B^-1/2} ||f||^{1/3}_{H^1}
SPEC_A4_P6 = InterpolationSpec(alpha=0.5, p=6.0, q=2.0)
#: ||f||_{L^3} <= C ||f||^{1/3}_{B^-2} ||f||^{2/3}_{H^1}
SPEC_A4_P3 = InterpolationSpec(alpha=2.0, p=3.0, q=2.0)


@dataclass(frozen=True)
class RatioReport:
    ratio: float
    numerator: float
    denominator: float
    skipped: bool = False
    detail: str = ""


def interpolation_ratio(
    f: SpectralField,
    spec: InterpolationSpec = SPEC_A3,
    profile: DyadicProfile = DEFAULT_PROFILE,
) -> RatioReport:
    """r = ||f||_p / (||f||^{1-theta}_{B^{-alpha}_{inf,inf}} ||f||^theta_{B^beta_{q,q}}).

    For q = 2 the second factor is evaluated as the Sobolev seminorm (the
    two are equivalent norms and equal here by definition of the artifact's
    H^s evaluation).
    """
    num = lp_norm(inverse_transform(f, symmetry_tol=math.inf), spec.p)
    low = float(besov_norm(f, BesovIndex(-spec.alpha), profile))
    if spec.q == 2:
        high = sobolev_seminorm(f, spec.beta)
    else:
        high = float(besov_norm(f, BesovIndex(spec.beta, spec.q, spec.q), profile))
    den = low ** (1.0 - spec.theta) * high**spec.theta
    if den == 0.0:
        return RatioReport(math.nan, num, den, skipped=True, detail="zero denominator")
    return RatioReport(num / den, num, den)


def besov_interpolation_ratio(
    f: SpectralField,
    s1: float,
    s2: float,
    theta: float,
    p: float = math.inf,
    r: float = math.inf,
    profile: DyadicProfile = DEFAULT_PROFILE,
) -> RatioReport:
    """Ratio of ||f||_{B^{theta s1 + (1-theta) s2}_{p,r}} to the interpolated product.

    For r = inf the inequality is a blockwise Hoelder bound with constant 1,
    so the ratio never exceeds 1 up to round-off.
    """
    if not (s1 < s2):
        raise ValueError(f"requires s1 < s2, got {s1}, {s2}")
    if not (0 < theta < 1):
        raise ValueError(f"theta must lie in (0,1), got {theta}")
    s_mid = theta * s1 + (1 - theta) * s2
    left = float(besov_norm(f, BesovIndex(s_mid, p, r), profile))
    n1 = float(besov_norm(f, BesovIndex(s1, p, r), profile))
    n2 = float(besov_norm(f, BesovIndex(s2, p, r), profile))
    den = n1**theta * n2 ** (1 - theta)
    if den == 0.0:
        return RatioReport(math.nan, left, den, skipped=True, detail="zero denominator")
    return RatioReport(left / den, left, den)


def partition_of_unity_defect(
    rho: np.ndarray,
    j_range: BlockRange,
    profile: DyadicProfile = DEFAULT_PROFILE,
) -> float:
    """max_rho |sum_{j in range} phi(2^-j rho) - 1| over the given radii."""
    total = np.zeros_like(np.asarray(rho, dtype=np.float64))
    for j in j_range:
        total += profile.phi(np.asarray(rho) * 2.0 ** (-j))
    return float(np.max(np.abs(total - 1.0)))
