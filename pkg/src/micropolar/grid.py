"""Fourier representation of fields on an anisotropic periodic box.

Coefficients are stored in the real-FFT half layout ``(N1, N2, N3//2 + 1)``
with the series normalization ``f(x) = sum c(xi) exp(i xi.x)``.  Wave vectors
are ``xi = (2 pi n1/L1, 2 pi n2/L2, 2 pi n3/L3)`` with ``n_i in [-N_i/2, N_i/2)``.

Continuous-transform values used by the Fourier-side norms are recovered as
``a_cont(xi) = c(xi) * L1 L2 L3 / (2 pi)^3``; with this scaling
``f(x) = int a_cont(xi) exp(i xi.x) dxi`` up to the Riemann sum.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _fft, kernels

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class WaveGrid:
    dims: tuple[int, int, int]
    lengths: tuple[float, float, float] = (TWO_PI, TWO_PI, TWO_PI)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        lengths = tuple(float(x) for x in self.lengths)
        if len(dims) != 3 or len(lengths) != 3:
            raise ValueError("grid needs three dims and three box lengths")
        if any(n <= 0 or n % 2 for n in dims):
            raise ValueError(f"dims must be positive even integers, got {dims}")
        if any(not (x > 0) for x in lengths):
            raise ValueError(f"box lengths must be positive, got {lengths}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lengths", lengths)

    @property
    def half_shape(self):
        n1, n2, n3 = self.dims
        return (n1, n2, n3 // 2 + 1)

    @property
    def npoints(self):
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def volume(self):
        return self.lengths[0] * self.lengths[1] * self.lengths[2]

    @property
    def cell_volume(self):
        return self.volume / self.npoints

    @property
    def dxi(self):
        """Frequency cell volume (2 pi)^3 / (L1 L2 L3)."""
        return TWO_PI**3 / self.volume

    @property
    def spacing(self):
        return tuple(TWO_PI / L for L in self.lengths)

    @property
    def coeff_to_cont(self):
        return self.volume / TWO_PI**3

    @cached_property
    def mode_numbers(self):
        """Integer mode indices per axis (full layout for axes 1, 2; half for 3)."""
        n1, n2, n3 = self.dims
        return (
            np.fft.fftfreq(n1, 1.0 / n1).astype(np.int64),
            np.fft.fftfreq(n2, 1.0 / n2).astype(np.int64),
            np.arange(n3 // 2 + 1, dtype=np.int64),
        )

    @cached_property
    def wavenumbers(self):
        """Per-axis derivative wavenumbers, Nyquist entries set to zero."""
        out = []
        for n, N, h in zip(self.mode_numbers, self.dims, self.spacing):
            k = n.astype(np.float64) * h
            k[np.abs(n) == N // 2] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def raw_wavenumbers(self):
        """Per-axis wavenumbers with Nyquist entries kept (signed -N/2 side)."""
        out = []
        for i, (n, h) in enumerate(zip(self.mode_numbers, self.spacing)):
            nn = n.copy()
            if i == 2:
                nn[-1] = -nn[-1]
            out.append(nn.astype(np.float64) * h)
        return tuple(out)

    @cached_property
    def k(self):
        k1, k2, k3 = self.wavenumbers
        return k1[:, None, None], k2[None, :, None], k3[None, None, :]

    @cached_property
    def ksq(self):
        a, b, c = self.k
        return a * a + b * b + c * c

    @cached_property
    def kmag(self):
        return np.sqrt(self.ksq)

    @cached_property
    def nyquist_mask(self):
        """1.0 off the Nyquist planes, 0.0 on them."""
        n1, n2, n3 = self.mode_numbers
        N1, N2, N3 = self.dims
        m = (
            (np.abs(n1) != N1 // 2)[:, None, None]
            & (np.abs(n2) != N2 // 2)[None, :, None]
            & (n3 != N3 // 2)[None, None, :]
        )
        return m.astype(np.float64)

    @cached_property
    def dealias_mask(self):
        """2/3 rule: keep modes with 3|n_i| < N_i on every axis."""
        n1, n2, n3 = self.mode_numbers
        N1, N2, N3 = self.dims
        m = (
            (3 * np.abs(n1) < N1)[:, None, None]
            & (3 * np.abs(n2) < N2)[None, :, None]
            & (3 * n3 < N3)[None, None, :]
        )
        return m.astype(np.float64)

    @cached_property
    def half_weight(self):
        """Multiplicity of each stored mode in the full spectrum."""
        N3 = self.dims[2]
        w = np.full(self.half_shape[2], 2.0)
        w[0] = 1.0
        w[-1] = 1.0 if N3 % 2 == 0 else 2.0
        return np.broadcast_to(w[None, None, :], self.half_shape)

    def coordinates(self):
        """Physical sample coordinates x_i = L_i m / N_i, broadcastable."""
        xs = [np.arange(N) * (L / N) for N, L in zip(self.dims, self.lengths)]
        return xs[0][:, None, None], xs[1][None, :, None], xs[2][None, None, :]

    def band(self, axis, lo, hi):
        """Number of non-negative modes with lo <= |xi_axis| <= hi."""
        n = np.abs(np.fft.fftfreq(self.dims[axis - 1], 1.0 / self.dims[axis - 1]))
        n = np.unique(n)
        xi = n * self.spacing[axis - 1]
        return int(np.count_nonzero((xi >= lo) & (xi <= hi) & (n < self.dims[axis - 1] // 2)))


class SpectralField:
    """Fourier coefficients of a real scalar field."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid, coeffs):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != grid.half_shape:
            raise ValueError(f"coefficient shape {coeffs.shape} != {grid.half_shape}")
        self.grid = grid
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.half_shape, dtype=np.complex128))

    def _wrap(self, coeffs):
        return type(self)(self.grid, coeffs)

    def _check(self, other):
        if type(other) is not type(self) or other.grid != self.grid:
            raise ValueError("fields must share type and grid")

    def __add__(self, other):
        self._check(other)
        return self._wrap(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return self._wrap(self.coeffs - other.coeffs)

    def __neg__(self):
        return self._wrap(-self.coeffs)

    def __mul__(self, scalar):
        return self._wrap(self.coeffs * scalar)

    __rmul__ = __mul__

    def to_physical(self):
        return _fft.irfftn(self.coeffs, self.grid.dims)

    def full_coeffs(self):
        return expand_half(self.coeffs, self.grid.dims)

    def max_abs(self):
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.grid.dims}, max|c|={self.max_abs():.3e})"


class VectorSpectralField(SpectralField):
    """Three scalar components on one grid, stacked on a leading axis."""

    __slots__ = ()

    def __init__(self, grid, coeffs):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (3,) + grid.half_shape:
            raise ValueError(f"coefficient shape {coeffs.shape} != {(3,) + grid.half_shape}")
        self.grid = grid
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((3,) + grid.half_shape, dtype=np.complex128))

    @classmethod
    def from_components(cls, components):
        comps = list(components)
        grid = comps[0].grid
        if len(comps) != 3 or any(c.grid != grid for c in comps):
            raise ValueError("need three components on one grid")
        return cls(grid, np.stack([c.coeffs for c in comps]))

    def __getitem__(self, i):
        return SpectralField(self.grid, self.coeffs[i])

    @property
    def components(self):
        return tuple(self[i] for i in range(3))


def expand_half(coeffs, dims):
    """Full-spectrum coefficients (numpy FFT ordering) from the half layout."""
    n1, n2, n3 = dims
    m = n3 // 2 + 1
    lead = coeffs.shape[:-3]
    full = np.empty(lead + (n1, n2, n3), dtype=np.complex128)
    full[..., :m] = coeffs
    i1 = (-np.arange(n1)) % n1
    i2 = (-np.arange(n2)) % n2
    k = np.arange(m, n3)
    mirror = coeffs[..., i1, :, :][..., :, i2, :][..., n3 - k]
    full[..., m:] = np.conj(mirror)
    return full


def hermitian_defect(f):
    """Relative violation of c(-xi) = conj(c(xi)) on the self-mirrored planes."""
    c = f.coeffs
    scale = max(float(np.max(np.abs(c))), 1e-300)
    n1, n2, n3 = f.grid.dims
    i1 = (-np.arange(n1)) % n1
    i2 = (-np.arange(n2)) % n2
    worst = 0.0
    for plane in {0, n3 // 2}:
        p = c[..., plane]
        mirror = np.conj(p[..., i1, :][..., :, i2])
        worst = max(worst, float(np.max(np.abs(p - mirror))))
    return worst / scale


def nyquist_content(f):
    return float(np.max(np.abs(f.coeffs * (1.0 - f.grid.nyquist_mask)))) if f.coeffs.size else 0.0


# ---------------------------------------------------------------- transforms


def forward_transform(grid, samples):
    """Series coefficients of real samples; the Nyquist content is retained."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape == grid.dims:
        return SpectralField(grid, _fft.rfftn(samples))
    if samples.shape == (3,) + grid.dims:
        return VectorSpectralField(grid, _fft.rfftn(samples))
    raise ValueError(f"sample shape {samples.shape} does not match grid {grid.dims}")


def inverse_transform(f):
    return f.to_physical()


# ---------------------------------------------------------------- operators


def derivative(f, axis):
    """Spectral d/dx_axis with axis in {1, 2, 3}."""
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    k = f.grid.k[axis - 1]
    return f._wrap(1j * k * f.coeffs * f.grid.nyquist_mask)


def grad(f):
    g = f.grid
    return VectorSpectralField(g, np.stack([1j * k * f.coeffs * g.nyquist_mask for k in g.k]))


def div(f):
    g = f.grid
    a, b, c = g.k
    return SpectralField(g, 1j * (a * f.coeffs[0] + b * f.coeffs[1] + c * f.coeffs[2]) * g.nyquist_mask)


def curl_coeffs(coeffs, grid):
    a, b, c = grid.k
    x, y, z = coeffs
    return 1j * np.stack([b * z - c * y, c * x - a * z, a * y - b * x]) * grid.nyquist_mask


def curl(f):
    return VectorSpectralField(f.grid, curl_coeffs(f.coeffs, f.grid))


def laplacian(f):
    return f._wrap(-f.grid.ksq * f.coeffs * f.grid.nyquist_mask)


def leray_project(f):
    """Project onto divergence-free fields; the zero mode passes unchanged."""
    g = f.grid
    out = kernels.leray(f.coeffs, *g.wavenumbers)
    return VectorSpectralField(g, out * g.nyquist_mask)


def dealias(f):
    return f._wrap(f.coeffs * f.grid.dealias_mask)


def product(f, g, dealiased=True):
    """Pointwise product of two scalar fields, optionally 2/3-dealiased."""
    grid = f.grid
    p = forward_transform(grid, f.to_physical() * g.to_physical())
    if dealiased:
        return dealias(p)
    return SpectralField(grid, p.coeffs * grid.nyquist_mask)


def padded_product(f, g):
    """Alias-free product truncated to the grid (zero-padding to 2N per axis)."""
    grid = f.grid
    big = tuple(2 * n for n in grid.dims)
    pf = _pad(f.coeffs, grid.dims, big)
    pg = _pad(g.coeffs, grid.dims, big)
    prod = _fft.rfftn(_fft.irfftn(pf, big) * _fft.irfftn(pg, big))
    return SpectralField(grid, _unpad(prod, grid.dims, big) * grid.nyquist_mask)


def _axis_index(n_small, n_big):
    n = np.fft.fftfreq(n_small, 1.0 / n_small).astype(np.int64)
    keep = np.abs(n) < n_small // 2
    return np.nonzero(keep)[0], (n[keep] % n_big)


def _pad(c, dims, big):
    out = np.zeros((big[0], big[1], big[2] // 2 + 1), dtype=np.complex128)
    s1, b1 = _axis_index(dims[0], big[0])
    s2, b2 = _axis_index(dims[1], big[1])
    m = dims[2] // 2
    out[np.ix_(b1, b2, np.arange(m))] = c[np.ix_(s1, s2, np.arange(m))]
    return out


def _unpad(c, dims, big):
    out = np.zeros((dims[0], dims[1], dims[2] // 2 + 1), dtype=np.complex128)
    s1, b1 = _axis_index(dims[0], big[0])
    s2, b2 = _axis_index(dims[1], big[1])
    m = dims[2] // 2
    out[np.ix_(s1, s2, np.arange(m))] = c[np.ix_(b1, b2, np.arange(m))]
    return out


# ---------------------------------------------------------------- norms


def _check_exponent(p):
    p = float(p)
    if not (p >= 1.0):
        raise ValueError(f"exponent must lie in [1, inf], got {p}")
    return p


def _pointwise_magnitude(f):
    x = f.to_physical()
    if x.ndim == 4:
        return np.sqrt(np.sum(x * x, axis=0))
    return np.abs(x)


def lp_norm_samples(mag, p, cell_volume):
    if math.isinf(p):
        return float(np.max(mag)) if mag.size else 0.0
    return float((np.sum(mag**p) * cell_volume) ** (1.0 / p))


def lp_norm_physical(f, p):
    """Physical L^p norm by uniform-grid quadrature (Euclidean magnitude for vectors)."""
    p = _check_exponent(p)
    return lp_norm_samples(_pointwise_magnitude(f), p, f.grid.cell_volume)


def lq_norm_fourier(f, q):
    """L^q norm of the continuous transform, as a dxi-weighted mode sum."""
    q = _check_exponent(q)
    g = f.grid
    c = np.abs(f.coeffs) * g.coeff_to_cont
    if c.ndim == 4:
        c = np.sqrt(np.sum(c * c, axis=0))
    if math.isinf(q):
        return float(np.max(c))
    return float((np.sum(g.half_weight * c**q) * g.dxi) ** (1.0 / q))


def l2_norm_spectral(f):
    """Physical L^2 norm via Parseval: ||f||^2 = V sum |c|^2."""
    g = f.grid
    c2 = np.abs(f.coeffs) ** 2
    if c2.ndim == 4:
        c2 = np.sum(c2, axis=0)
    return float(np.sqrt(g.volume * np.sum(g.half_weight * c2)))


# ---------------------------------------------------------------- test fields


def rng_for(seed, name):
    """Counter-based generator keyed by a 64-bit seed and a stream name."""
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    return np.random.Generator(np.random.Philox(key=key))


def random_field(grid, seed, name="field", band=None, vector=False, zero_mean=True, decay=0.0):
    """Random real field with modes |n_i| <= band[i] (default: the 2/3 band).

    ``decay`` > 0 damps amplitudes by exp(-decay |xi|^2) for smooth test data.
    """
    rng = rng_for(seed, name)
    shape = ((3,) if vector else ()) + grid.dims
    samples = rng.standard_normal(shape)
    f = forward_transform(grid, samples)
    n1, n2, n3 = grid.mode_numbers
    if band is None:
        mask = grid.dealias_mask
    else:
        b1, b2, b3 = band
        mask = (
            (np.abs(n1) <= b1)[:, None, None] & (np.abs(n2) <= b2)[None, :, None] & (n3 <= b3)[None, None, :]
        ).astype(np.float64)
    c = f.coeffs * mask * grid.nyquist_mask
    if decay:
        c = c * np.exp(-decay * grid.ksq)
    if zero_mean:
        c[..., 0, 0, 0] = 0.0
    return f._wrap(c)
