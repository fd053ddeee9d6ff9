"""FFT backend with Fourier-series normalization.

Coefficients follow ``f(x) = sum_xi c(xi) exp(i xi.x)``, so the forward
transform divides by the number of grid points and the inverse does not.
pyFFTW is used when importable (``MPS_FFT=scipy`` forces scipy.fft).
"""

from __future__ import annotations

import os

import scipy.fft as _sfft

BACKEND = "scipy"
_rfftn = _sfft.rfftn
_irfftn = _sfft.irfftn

if os.environ.get("MPS_FFT", "").lower() != "scipy":
    try:
        import pyfftw
        import pyfftw.interfaces.scipy_fft as _pfft

        pyfftw.interfaces.cache.enable()
        pyfftw.interfaces.cache.set_keepalive_time(60.0)
        _rfftn = _pfft.rfftn
        _irfftn = _pfft.irfftn
        BACKEND = "pyfftw"
    except ImportError:  # pragma: no cover - optional dependency
        pass


def rfftn(samples, ndim=3):
    axes = tuple(range(-ndim, 0))
    return _rfftn(samples, axes=axes, norm="forward")


def irfftn(coeffs, shape):
    axes = tuple(range(-len(shape), 0))
    return _irfftn(coeffs, s=shape, axes=axes, norm="forward")
