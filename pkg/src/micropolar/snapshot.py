"""MPSF binary snapshots of spectral fields.

Layout (little endian)::

    b"MPSF"  version:u32  N1 N2 N3:u32  L1 L2 L3:f64  eps:f64
    complex coefficients as (re, im) f64 pairs

Coefficients cover the full spectrum in row-major (n1, n2, n3) order with
every mode number running upward from -N/2 to N/2 - 1.  A vector field is
written as its components one after another; the reader infers the count
from the file size.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import SpectralField, VectorSpectralField, WaveGrid, expand_half

MAGIC = b"MPSF"
VERSION = 1
_HEADER = struct.Struct("<4sI3I3dd")


def _to_ordered(half, dims):
    full = expand_half(half, dims)
    return np.fft.fftshift(full, axes=(-3, -2, -1))


def _from_ordered(ordered, dims):
    full = np.fft.ifftshift(ordered, axes=(-3, -2, -1))
    return np.ascontiguousarray(full[..., : dims[2] // 2 + 1])


def write_snapshot(path, field, eps=0.0):
    """Write a SpectralField or VectorSpectralField; returns the path."""
    g = field.grid
    path = Path(path)
    header = _HEADER.pack(MAGIC, VERSION, *g.dims, *g.lengths, float(eps))
    data = _to_ordered(field.coeffs, g.dims).astype("<c16", copy=False)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))
    return path


def read_snapshot(path):
    """(field, eps); a file with three components comes back as a VectorSpectralField."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n1, n2, n3, l1, l2, l3, eps = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    grid = WaveGrid((n1, n2, n3), (l1, l2, l3))
    body = raw[_HEADER.size :]
    per = n1 * n2 * n3 * 16
    if len(body) == 0 or len(body) % per:
        raise ValueError(f"{path}: payload of {len(body)} bytes is not a whole number of fields")
    ncomp = len(body) // per
    data = np.frombuffer(body, dtype="<c16").astype(np.complex128)
    shape = (n1, n2, n3) if ncomp == 1 else (ncomp, n1, n2, n3)
    half = _from_ordered(data.reshape(shape), grid.dims)
    if ncomp == 1:
        return SpectralField(grid, half), eps
    if ncomp == 3:
        return VectorSpectralField(grid, half), eps
    raise ValueError(f"{path}: {ncomp} components, expected 1 or 3")
