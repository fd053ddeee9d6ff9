"""Dyadic blocks, homogeneous Besov norms and Bony's paraproduct on a WaveGrid."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import (
    SpectralField,
    VectorSpectralField,
    _pointwise_magnitude,
    forward_transform,
    grad,
    lp_norm_samples,
)

SMOOTHSTEP = "exp(-1/t) / (exp(-1/t) + exp(-1/(1-t)))"

# radial cutoff: 1 on |xi| <= CHI_INNER, 0 on |xi| >= CHI_OUTER
CHI_INNER = 0.75 * math.sqrt(4.0 / 3.0)
CHI_OUTER = 4.0 / 3.0
PHI_LO = CHI_INNER
PHI_HI = 2.0 * CHI_OUTER


def smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    out[t >= 1.0] = 1.0
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / (1.0 - tm))
    out[mid] = a / (a + b)
    return out


def radial_cutoff(r):
    return smoothstep((CHI_OUTER - np.asarray(r, dtype=np.float64)) / (CHI_OUTER - CHI_INNER))


def phi(r):
    """Annulus profile chi(r/2) - chi(r), supported in [CHI_INNER, 8/3]."""
    r = np.asarray(r, dtype=np.float64)
    return radial_cutoff(0.5 * r) - radial_cutoff(r)


@dataclass(frozen=True)
class BesovSpec:
    s: float
    p: float
    r: float

    def __post_init__(self):
        if not (self.p >= 1.0 and self.r >= 1.0):
            raise ValueError(f"Besov exponents must lie in [1, inf]: p={self.p}, r={self.r}")

    def __str__(self):
        def fmt(x):
            return "inf" if math.isinf(x) else f"{x:g}"

        return f"B[{fmt(self.s)},{fmt(self.p)},{fmt(self.r)}]"

    @classmethod
    def parse(cls, text):
        body = text.strip()
        if not (body.startswith("B[") and body.endswith("]")):
            raise ValueError(f"not a Besov spec string: {text!r}")
        s, p, r = (float(x) for x in body[2:-1].split(","))
        return cls(s, p, r)


class DyadicPartition:
    """Multiplier tables phi(2^-j xi) for j in [j_min, j_max] on one grid.

    The range is chosen so that the blocks sum to one on every nonzero grid
    mode; ``resolved_annulus`` is the narrower band where the identity holds
    for every radius, not only grid radii.
    """

    def __init__(self, grid, j_min, j_max):
        if j_max - j_min < 3:
            raise ValueError(
                f"grid too coarse: block range [{j_min}, {j_max}] spans fewer than 4 octaves"
            )
        self.grid = grid
        self.j_min = int(j_min)
        self.j_max = int(j_max)

    @property
    def indices(self):
        return range(self.j_min, self.j_max + 1)

    @property
    def resolved_annulus(self):
        return 2.0 ** (self.j_min + 1), 2.0 ** (self.j_max - 1)

    @cached_property
    def tables(self):
        kmag = self.grid.kmag
        return np.stack([phi(kmag * 2.0**-j) for j in self.indices])

    def table(self, j):
        self._check(j)
        return self.tables[j - self.j_min]

    def _check(self, j):
        if not (self.j_min <= j <= self.j_max):
            raise ValueError(f"block {j} outside [{self.j_min}, {self.j_max}]")

    def partition_sum(self, radii):
        """sum_j phi(2^-j r) over the table range, evaluated at arbitrary radii."""
        r = np.asarray(radii, dtype=np.float64)
        return sum(phi(r * 2.0**-j) for j in self.indices)


def make_partition(grid):
    h = min(grid.spacing)
    kmax = math.sqrt(sum((((N // 2) - 1) * s) ** 2 for N, s in zip(grid.dims, grid.spacing)))
    j_min = math.floor(math.log2(0.75 * h))
    j_max = math.ceil(math.log2(kmax / CHI_INNER) - 1.0)
    return DyadicPartition(grid, j_min, j_max)


def _partition(f, partition):
    if partition is None:
        return make_partition(f.grid)
    if partition.grid != f.grid:
        raise ValueError("partition built for a different grid")
    return partition


def lp_block(f, j, partition=None):
    part = _partition(f, partition)
    return f._wrap(f.coeffs * part.table(j))


def lowpass(f, j, partition=None):
    """S_j f = sum of blocks k <= j-1 inside the table range."""
    part = _partition(f, partition)
    if not (part.j_min <= j <= part.j_max + 1):
        raise ValueError(f"lowpass index {j} outside [{part.j_min}, {part.j_max + 1}]")
    if j - 1 < part.j_min:
        return f._wrap(np.zeros_like(f.coeffs))
    mult = part.tables[: j - part.j_min].sum(axis=0)
    return f._wrap(f.coeffs * mult)


def block_norms(f, p, partition=None):
    """||Delta_j f||_{L^p} for every block in the range (zero blocks skip the FFT)."""
    part = _partition(f, partition)
    p = float(p)
    out = np.zeros(len(part.indices))
    for idx, tab in enumerate(part.tables):
        c = f.coeffs * tab
        if not np.any(c):
            continue
        out[idx] = lp_norm_samples(_pointwise_magnitude(f._wrap(c)), p, f.grid.cell_volume)
    return out


def besov_from_blocks(norms, j_values, s, r):
    weights = np.power(2.0, s * np.asarray(list(j_values), dtype=np.float64))
    seq = weights * norms
    if math.isinf(r):
        return float(np.max(seq)) if seq.size else 0.0
    return float(np.sum(seq**r) ** (1.0 / r))


def besov_norm(f, spec, partition=None):
    """Homogeneous Besov norm; the xi = 0 mode never enters a block."""
    part = _partition(f, partition)
    norms = block_norms(f, spec.p, part)
    return besov_from_blocks(norms, part.indices, spec.s, spec.r)


def besov_rows(time, fields, specs, partition=None):
    """CSV-ready rows (time, spec string, value) for a sum of field norms."""
    rows = []
    for spec in specs:
        value = sum(besov_norm(f, spec, partition) for f in fields)
        rows.append((float(time), str(spec), value))
    return rows


def bernstein_ratio(f, j, p):
    """||grad f||_{L^p} / (2^j ||f||_{L^p}) for a scalar field."""
    g = grad(f)
    num = lp_norm_samples(_pointwise_magnitude(g), p, f.grid.cell_volume)
    den = lp_norm_samples(_pointwise_magnitude(f), p, f.grid.cell_volume)
    return num / (2.0**j * den)


def _support_extent(f):
    grid = f.grid
    nz = np.abs(f.coeffs) > 0
    if f.coeffs.ndim == 4:
        nz = nz.any(axis=0)
    ext = []
    for axis, n in enumerate(grid.mode_numbers):
        other = tuple(i for i in range(3) if i != axis)
        hit = nz.any(axis=other)
        ext.append(int(np.max(np.abs(n[hit]))) if hit.any() else 0)
    return ext


def _exact_product(a, b):
    grid = a.grid
    prod = forward_transform(grid, a.to_physical() * b.to_physical())
    return SpectralField(grid, prod.coeffs * grid.nyquist_mask)


def bony_decompose(u, v, partition=None):
    """Split uv into (T_u v, T_v u, R(u, v)).

    Inputs must be narrow enough that every pairwise product is alias free
    on the grid.
    """
    if isinstance(u, VectorSpectralField) or isinstance(v, VectorSpectralField):
        raise TypeError("bony_decompose acts on scalar fields")
    part = _partition(u, partition)
    eu, ev = _support_extent(u), _support_extent(v)
    for a, b, N in zip(eu, ev, u.grid.dims):
        if a + b >= N // 2:
            raise ValueError("inputs too wide-band for exact products on this grid")
    du = [u._wrap(u.coeffs * t) for t in part.tables]
    dv = [v._wrap(v.coeffs * t) for t in part.tables]
    nb = len(du)

    def para(low, high):
        acc = np.zeros(u.grid.half_shape, dtype=np.complex128)
        running = np.zeros_like(acc)
        for idx in range(nb):
            # running holds S_{j-1} = sum_{k <= j-2}
            if idx >= 2:
                running = running + low[idx - 2].coeffs
            if idx >= 2 and np.any(running) and np.any(high[idx].coeffs):
                acc += _exact_product(u._wrap(running), high[idx]).coeffs
        return u._wrap(acc)

    tuv = para(du, dv)
    tvu = para(dv, du)
    rem = np.zeros(u.grid.half_shape, dtype=np.complex128)
    for idx in range(nb):
        if not np.any(du[idx].coeffs):
            continue
        tilde = sum(dv[k].coeffs for k in range(max(0, idx - 1), min(nb, idx + 2)))
        if np.any(tilde):
            rem += _exact_product(du[idx], v._wrap(tilde)).coeffs
    return tuv, tvu, u._wrap(rem)
