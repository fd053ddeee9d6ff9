"""The anisotropic large datum a0, its assembly into (U0, W0), and the
smallness / largeness functionals evaluated on it.

The Fourier profile is

    a0_hat(xi) = A * b_strip(xi1 + xi2) * b_ring(xi1^2 + xi2^2) * b_band(|xi3|)

with smooth bumps: b_strip on [-w, w] (plateau [-w/2, w/2], w = eps by
default), b_ring on [1, 2] (plateau [5/4, 7/4]) and b_band on [eps, 2 eps]
(plateau [5 eps/4, 7 eps/4]), mirrored to negative xi3 so a0 is real and
even.  ``A`` is eps^-2 (log log 1/eps)^(1/2) in the "large" amplitude mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import SpectralField, VectorSpectralField, lp_norm_physical, lq_norm_fourier
from .littlewood_paley import SMOOTHSTEP, BesovSpec, besov_norm, smoothstep

SQRT2 = math.sqrt(2.0)


class Bump:
    """C-infinity profile: 0 outside [lo, hi], 1 on [plateau_lo, plateau_hi]."""

    def __init__(self, lo, hi, plateau_lo, plateau_hi):
        if not (lo < plateau_lo < plateau_hi < hi):
            raise ValueError(
                f"need lo < plateau_lo < plateau_hi < hi, got {lo}, {plateau_lo}, {plateau_hi}, {hi}"
            )
        self.lo, self.hi = float(lo), float(hi)
        self.plateau_lo, self.plateau_hi = float(plateau_lo), float(plateau_hi)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        rise = smoothstep((x - self.lo) / (self.plateau_lo - self.lo))
        fall = smoothstep((self.hi - x) / (self.hi - self.plateau_hi))
        return rise * fall

    def __repr__(self):
        return f"Bump([{self.lo:g}, {self.hi:g}], plateau=[{self.plateau_lo:g}, {self.plateau_hi:g}])"


def build_bump_1d(lo, hi, plateau_lo, plateau_hi):
    return Bump(lo, hi, plateau_lo, plateau_hi)


def loglog(eps):
    return math.log(math.log(1.0 / eps))


@dataclass(frozen=True)
class ProfileParams:
    eps: float
    p: float = 5.0
    amp: str | float = "large"
    const_C: float = 1.0
    strip: float | None = None  # half-width of the xi1+xi2 strip; None means eps

    def __post_init__(self):
        if not (0.0 < self.eps <= 0.25):
            raise ValueError(f"eps must lie in (0, 1/4], got {self.eps}")
        if not (4.0 < self.p < 6.0):
            raise ValueError(f"p must lie in (4, 6), got {self.p}")
        if isinstance(self.amp, str) and self.amp not in ("large", "unit"):
            raise ValueError(f"amplitude mode must be 'large', 'unit' or a number, got {self.amp!r}")

    @property
    def strip_width(self):
        return self.eps if self.strip is None else float(self.strip)

    @property
    def amplitude(self):
        if self.amp == "large":
            return self.eps**-2 * math.sqrt(loglog(self.eps))
        if self.amp == "unit":
            return 1.0
        return float(self.amp)

    @property
    def p_dual(self):
        return self.p / (self.p - 1.0)

    @property
    def strip_bump(self):
        w = self.strip_width
        return Bump(-w, w, -0.5 * w, 0.5 * w)

    @property
    def ring_bump(self):
        return Bump(1.0, 2.0, 1.25, 1.75)

    @property
    def band_bump(self):
        e = self.eps
        return Bump(e, 2.0 * e, 1.25 * e, 1.75 * e)

    def metadata(self):
        return {
            "eps": self.eps,
            "p": self.p,
            "amp": self.amp,
            "amplitude": self.amplitude,
            "const_C": self.const_C,
            "strip": self.strip_width,
            "smoothstep": SMOOTHSTEP,
        }


def profile_hat(params, xi1, xi2, xi3):
    """Continuous-transform values of a0 at the given wave vectors."""
    return (
        params.amplitude
        * params.strip_bump(xi1 + xi2)
        * params.ring_bump(xi1 * xi1 + xi2 * xi2)
        * params.band_bump(np.abs(xi3))
    )


def check_resolution(params, grid):
    eps = params.eps
    h1, h2, h3 = grid.spacing
    n_band = grid.band(3, eps, 2.0 * eps)
    if n_band < 8:
        raise ValueError(
            f"unresolvable band: only {n_band} xi3 modes in [eps, 2 eps]; need >= 8 (L3 >= {16 * math.pi / eps:.4g})"
        )
    if max(h1, h2) > 0.5 * params.strip_width:
        raise ValueError("unresolvable strip: horizontal spacing exceeds half the |xi1+xi2| width")
    for axis, h in ((0, h1), (1, h2)):
        if (grid.dims[axis] // 2 - 1) * h < 2.0:
            raise ValueError("grid does not reach |xi_h| = 2 on the horizontal axes")
    if (grid.dims[2] // 2 - 1) * h3 < 2.0 * eps:
        raise ValueError("grid does not reach |xi3| = 2 eps")


def build_a0(params, grid):
    """a0 as a real, even SpectralField with nonnegative coefficients."""
    check_resolution(params, grid)
    k1, k2, k3 = grid.k
    hat = profile_hat(params, k1, k2, k3) * grid.nyquist_mask
    return SpectralField(grid, hat / grid.coeff_to_cont)


def support_report(a0, eps):
    """Extremes of the wave-vector coordinates over the nonzero modes of a0."""
    grid = a0.grid
    k1, k2, k3 = (np.broadcast_to(k, grid.half_shape) for k in grid.k)
    nz = a0.coeffs != 0
    if not nz.any():
        return {"modes": 0}
    s = np.abs(k1[nz] + k2[nz])
    h = np.sqrt(k1[nz] ** 2 + k2[nz] ** 2)
    z = np.abs(k3[nz])
    return {
        "modes": int(nz.sum()),
        "max_abs_xi1_plus_xi2": float(s.max()),
        "min_xi_h": float(h.min()),
        "max_xi_h": float(h.max()),
        "min_abs_xi3": float(z.min()),
        "max_abs_xi3": float(z.max()),
        "inside_C": bool(
            s.max() <= eps and h.min() >= 1.0 and h.max() <= 2.0 and z.min() >= eps and z.max() <= 2.0 * eps
        ),
    }


def assemble_U0_W0(a0):
    """U0 = (d2 a0, -d1 a0, 0) and W0 = (0, 0, a0)."""
    g = a0.grid
    k1, k2, _ = g.k
    c = a0.coeffs * g.nyquist_mask
    zero = np.zeros_like(c)
    U0 = VectorSpectralField(g, np.stack([1j * k2 * c, -1j * k1 * c, zero]))
    W0 = VectorSpectralField(g, np.stack([zero, zero, c]))
    return U0, W0


# ---------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class ProfileNorms:
    """Fourier-side norms of a0 (and of its vorticity) for one profile."""

    l1: float
    lp_dual: float
    linf: float
    omega_l1: float


def profile_norms_quadrature(params, n_eta=257, n_zeta=2049, n_band=513):
    """Norms of a0_hat by tensor trapezoid rules, no FFT and no PDE grid.

    Integration runs in rotated coordinates eta = (xi1 + xi2)/sqrt2,
    zeta = (xi1 - xi2)/sqrt2 (unit Jacobian).  All integrands are smooth and
    vanish to infinite order at the ends, so the trapezoid rule converges
    spectrally.
    """
    w = params.strip_width
    eta = np.linspace(-w / SQRT2, w / SQRT2, n_eta)
    zmax = SQRT2
    zeta = np.linspace(-zmax, zmax, n_zeta)
    E, Z = np.meshgrid(eta, zeta, indexing="ij")
    rsq = E * E + Z * Z
    h2d = params.strip_bump(SQRT2 * E) * params.ring_bump(rsq)
    x3 = np.linspace(params.eps, 2.0 * params.eps, n_band)
    b3 = params.band_bump(x3)
    d_eta = eta[1] - eta[0]
    d_zeta = zeta[1] - zeta[0]
    d3 = x3[1] - x3[0]

    def integ2(f):
        return float(np.trapezoid(np.trapezoid(f, dx=d_zeta, axis=1), dx=d_eta))

    def integ3(f):
        return 2.0 * float(np.trapezoid(f, dx=d3))

    A = params.amplitude
    q = params.p_dual
    l1 = A * integ2(h2d) * integ3(b3)
    lq = A * (integ2(h2d**q) * integ3(b3**q)) ** (1.0 / q)
    om = A * integ2(rsq * h2d) * integ3(b3)
    return ProfileNorms(l1=l1, lp_dual=lq, linf=A * float(h2d.max() * b3.max()), omega_l1=om)


def profile_norms_grid(a0, p):
    q = p / (p - 1.0)
    g = a0.grid
    k1, k2, _ = g.k
    omega = SpectralField(g, -(k1 * k1 + k2 * k2) * a0.coeffs)
    return ProfileNorms(
        l1=lq_norm_fourier(a0, 1.0),
        lp_dual=lq_norm_fourier(a0, q),
        linf=lq_norm_fourier(a0, math.inf),
        omega_l1=lq_norm_fourier(omega, 1.0),
    )


def a0_norms(a0, params):
    if isinstance(a0, SpectralField):
        return profile_norms_grid(a0, params.p)
    if a0 is None:
        return ProfileNorms(0.0, 0.0, 0.0, 0.0)
    return profile_norms_quadrature(params)


# ---------------------------------------------------------------- condition


@dataclass(frozen=True)
class ConditionTerms:
    perturbation: float
    eps_sq_term: float
    eps_lin_term: float
    exp_argument: float

    @property
    def pre_exponential(self):
        return self.perturbation + self.eps_sq_term + self.eps_lin_term

    @property
    def value(self):
        try:
            return self.pre_exponential * math.exp(self.exp_argument)
        except OverflowError:
            return math.inf

    @property
    def log_value(self):
        pre = self.pre_exponential
        return math.log(pre) + self.exp_argument if pre > 0 else -math.inf


def condition_terms(v0, c0, a0, params, partition=None):
    """Pieces of the smallness functional.

    ``a0`` is a grid SpectralField, ``None`` (zero datum) or the string
    ``"quadrature"`` for the FFT-free evaluation of the closed-form profile.
    """
    spec = BesovSpec(-1.0 + 3.0 / params.p, params.p, 1.0)
    pert = 0.0
    for f in (v0, c0):
        if f is not None:
            pert += besov_norm(f, spec, partition)
    n = a0_norms(a0, params)
    eps = params.eps
    C = params.const_C
    return ConditionTerms(
        perturbation=pert,
        eps_sq_term=eps * n.lp_dual**2,
        eps_lin_term=eps * n.lp_dual,
        exp_argument=C * (n.l1**2 + n.l1),
    )


def condition_lhs(v0, c0, a0, params, partition=None):
    return condition_terms(v0, c0, a0, params, partition).value


# ---------------------------------------------------------------- largeness


class IdentityViolation(AssertionError):
    pass


def largeness_metrics(a0, partition=None, rtol=1e-8):
    """Size of the datum in the norms where it is large.

    Checks ||omega0||_Linf == ||omega0_hat||_L1 whenever a0_hat >= 0.
    """
    g = a0.grid
    U0, W0 = assemble_U0_W0(a0)
    k1, k2, _ = g.k
    omega = SpectralField(g, -(k1 * k1 + k2 * k2) * a0.coeffs)
    om_hat_l1 = lq_norm_fourier(omega, 1.0)
    om_linf = lp_norm_physical(omega, math.inf)
    spec = BesovSpec(-1.0, math.inf, math.inf)
    out = {
        "omega_hat_L1": om_hat_l1,
        "omega_Linf": om_linf,
        "u_Linf": lp_norm_physical(U0, math.inf),
        "u_B-1_inf_inf": besov_norm(U0, spec, partition),
        "w_Linf": lp_norm_physical(W0, math.inf),
        "w_B-1_inf_inf": besov_norm(W0, spec, partition),
    }
    one_signed = bool(np.all(a0.coeffs.real >= 0.0) and np.all(a0.coeffs.imag == 0.0))
    if one_signed and om_hat_l1 > 0.0:
        defect = abs(om_linf - om_hat_l1) / om_hat_l1
        out["omega_identity_defect"] = defect
        if defect > rtol:
            raise IdentityViolation(
                f"||omega0||_Linf = {om_linf:.16e} differs from ||omega0_hat||_L1 = {om_hat_l1:.16e}"
            )
    return out


def default_box(eps, horizontal_cells=2.0):
    """Box lengths resolving the datum: xi_h spacing eps/horizontal_cells, xi3 spacing eps/8."""
    L_h = 2.0 * math.pi * horizontal_cells / eps
    L3 = 16.0 * math.pi / eps
    return (L_h, L_h, L3)


def resolving_dims(eps, dealias=False):
    """Smallest multiple-of-8 grid on default_box(eps) reaching |xi_h| = 2 and |xi3| = 2 eps.

    With ``dealias`` the reach must survive the 2/3 truncation.
    """
    n_h = math.ceil(4.0 / eps)
    n_3 = 16
    factor = 3 if dealias else 2

    def size(n):
        return 8 * math.ceil((factor * n + 2) / 8)

    return (size(n_h), size(n_h), size(n_3))
