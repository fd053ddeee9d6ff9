"""Auxiliary linear system for (a, m) and the fields built from it.

Per mode the system reads d/dt (a, m) = -A(xi) (a, m) with

    A(xi) = [[|xi|^2, -1], [-|xi|^2, |xi|^2 + 2]],

whose eigenvalues are lam_pm = (|xi|^2 + 1) +- sqrt(|xi|^2 + 1).  The
propagator is assembled from the two spectral projectors; the eigenvalue
gap 2 sqrt(|xi|^2 + 1) >= 2 never closes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .grid import (
    SpectralField,
    VectorSpectralField,
    curl_coeffs,
    forward_transform,
    lp_norm_physical,
)
from .initial_data import assemble_U0_W0


def _ksq(xi):
    xi = np.asarray(xi, dtype=np.float64)
    if xi.ndim == 0:
        raise ValueError("xi must be a 3-vector (or a stack of them)")
    return np.sum(xi * xi, axis=-1)


def matrix_A(xi):
    ksq = _ksq(xi)
    out = np.empty(ksq.shape + (2, 2))
    out[..., 0, 0] = ksq
    out[..., 0, 1] = -1.0
    out[..., 1, 0] = -ksq
    out[..., 1, 1] = ksq + 2.0
    return out


def eigenvalues(ksq):
    """(lam_minus, lam_plus); lam_minus in the cancellation-free form s k^2 / (s + 1)."""
    ksq = np.asarray(ksq, dtype=np.float64)
    s = np.sqrt(ksq + 1.0)
    return s * ksq / (s + 1.0), ksq + 1.0 + s


def _scaled_entries(ksq, t):
    """exp(lam_minus t) * (g00, g01, g10, g11): the Green entries with the slow exponential factored out."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("green_exp needs t >= 0")
    ksq = np.asarray(ksq, dtype=np.float64)
    s = np.sqrt(ksq + 1.0)
    sm1 = ksq / (s + 1.0)
    diff = -np.expm1(-2.0 * s * t)  # 1 - exp(-(lam_plus - lam_minus) t)
    ep = 1.0 - diff
    inv = 0.5 / s
    return (
        ((1.0 + s) + sm1 * ep) * inv,
        diff * inv,
        ksq * diff * inv,
        (sm1 + (1.0 + s) * ep) * inv,
    )


def green_entries(ksq, t):
    """Entries (g00, g01, g10, g11) of exp(-A t) as arrays broadcast over ksq."""
    scaled = _scaled_entries(ksq, t)
    lam_m, _ = eigenvalues(ksq)
    em = np.exp(-lam_m * np.asarray(t, dtype=np.float64))
    return tuple(em * g for g in scaled)


def green_exp(xi, t):
    g00, g01, g10, g11 = green_entries(_ksq(xi), t)
    g00, g01, g10, g11 = np.broadcast_arrays(g00, g01, g10, g11)
    out = np.empty(g00.shape + (2, 2))
    out[..., 0, 0] = g00
    out[..., 0, 1] = g01
    out[..., 1, 0] = g10
    out[..., 1, 1] = g11
    return out


# ---------------------------------------------------------------- certificate


@dataclass
class DecayReport:
    decay_rate: float
    K_measured: float
    K_bound: float
    t_samples: tuple
    modes_checked: int
    lam_samples: int
    lam_min_margin: float
    lam_exact_checked: int
    lam_exact_ok: bool

    @property
    def passed(self):
        return self.K_measured <= self.K_bound and self.lam_min_margin >= 0.0 and self.lam_exact_ok


def lambda_minus_margin(k_max=50.0, n=100_000):
    """min over dense k of lam_minus(k) - k^2/2 (floating point)."""
    k = np.linspace(0.0, k_max, n)
    lam_m, _ = eigenvalues(k * k)
    return float(np.min(lam_m - 0.5 * k * k))


def lambda_minus_exact(n=2000, denom=40):
    """Exact check of lam_minus >= k^2/2 at rational k = i/denom.

    lam_minus >= k^2/2  <=>  k^2/2 + 1 >= sqrt(k^2 + 1)  <=>  (k^2/2 + 1)^2 >= k^2 + 1.
    """
    for i in range(n):
        k2 = Fraction(i, denom) ** 2
        if (k2 / 2 + 1) ** 2 < k2 + 1:
            return False
    return True


def decay_certificate(grid, t_samples, decay_rate=0.5, K_bound=4.0, lam_samples=100_000):
    """Entrywise |exp(-A t)| <= K exp(-decay_rate |xi|^2 t) over nonzero grid modes."""
    ksq = grid.ksq[(grid.ksq > 0) & (grid.nyquist_mask > 0)]
    ksq = np.unique(ksq)
    lam_m, _ = eigenvalues(ksq)
    log_K = -math.inf
    # log-domain ratio: entries and bound both underflow at large |xi|^2 t
    for t in t_samples:
        with np.errstate(divide="ignore"):
            for e in _scaled_entries(ksq, t):
                r = np.log(np.abs(e)) + (decay_rate * ksq - lam_m) * t
                log_K = max(log_K, float(np.max(r)))
    K = math.exp(log_K)
    return DecayReport(
        decay_rate=decay_rate,
        K_measured=K,
        K_bound=K_bound,
        t_samples=tuple(float(t) for t in t_samples),
        modes_checked=int(ksq.size),
        lam_samples=lam_samples,
        lam_min_margin=lambda_minus_margin(n=lam_samples),
        lam_exact_checked=2000,
        lam_exact_ok=lambda_minus_exact(),
    )


# ---------------------------------------------------------------- evolution


@dataclass
class AuxState:
    t: float
    a: SpectralField
    m: SpectralField


def evolve_linear(a0, t, m0=None):
    """(a, m)(t) from (a0, m0); m0 defaults to a0."""
    if t < 0:
        raise ValueError("evolve_linear needs t >= 0")
    m0 = a0 if m0 is None else m0
    g00, g01, g10, g11 = green_entries(a0.grid.ksq, t)
    a = g00 * a0.coeffs + g01 * m0.coeffs
    m = g10 * a0.coeffs + g11 * m0.coeffs
    return AuxState(float(t), a0._wrap(a), a0._wrap(m))


def propagate(state, dt):
    """Advance an AuxState by dt."""
    nxt = evolve_linear(state.a, dt, state.m)
    return AuxState(state.t + dt, nxt.a, nxt.m)


def assemble_U_W(state):
    """U = (d2 a, -d1 a, 0), W = (0, 0, m)."""
    U, _ = assemble_U0_W0(state.a)
    _, W = assemble_U0_W0(state.m)
    return U, W


def forcing_F(state):
    """F = -(d1 d3, d2 d3, d3 d3)(a + m); spectrally +(k1 k3, k2 k3, k3^2)(a + m)."""
    g = state.a.grid
    k1, k2, k3 = g.k
    s = (state.a.coeffs + state.m.coeffs) * g.nyquist_mask
    return VectorSpectralField(g, np.stack([k1 * k3 * s, k2 * k3 * s, k3 * k3 * s]))


def _deal(grid, samples):
    return forward_transform(grid, samples).coeffs * grid.dealias_mask


def forcing_G(a, form="direct"):
    """G = -U.grad U with U built from a; products 2/3-dealiased.

    ``form='cancel'`` evaluates the rearranged expression whose every
    product carries a factor (d1 + d2) a or its derivatives.
    """
    g = a.grid
    k1, k2, k3 = g.k
    c = a.coeffs * g.nyquist_mask
    phys = lambda x: SpectralField(g, x).to_physical()  # noqa: E731
    if form == "direct":
        U1, U2 = 1j * k2 * c, -1j * k1 * c
        out = []
        for Ui in (U1, U2):
            adv = phys(U1) * phys(1j * k1 * Ui) + phys(U2) * phys(1j * k2 * Ui)
            out.append(-_deal(g, adv))
        out.append(np.zeros_like(c))
    elif form == "cancel":
        s = 1j * (k1 + k2) * c  # (d1 + d2) a
        d2a = phys(1j * k2 * c)
        g1 = phys(s) * phys(-k2 * k2 * c) - d2a * phys(1j * k2 * s)
        g2 = -phys(s) * phys(-k1 * k2 * c) + d2a * phys(1j * k1 * s)
        out = [_deal(g, g1), _deal(g, g2), np.zeros_like(c)]
    else:
        raise ValueError(f"unknown form {form!r}")
    return VectorSpectralField(g, np.stack(out))


def forcing_H(a, m, form="direct"):
    """H = -U.grad W; only the third component survives."""
    g = a.grid
    k1, k2, _ = g.k
    ca = a.coeffs * g.nyquist_mask
    cm = m.coeffs * g.nyquist_mask
    phys = lambda x: SpectralField(g, x).to_physical()  # noqa: E731
    zero = np.zeros_like(ca)
    if form == "direct":
        U1, U2 = 1j * k2 * ca, -1j * k1 * ca
        h3 = -(phys(U1) * phys(1j * k1 * cm) + phys(U2) * phys(1j * k2 * cm))
    elif form == "cancel":
        sa = phys(1j * (k1 + k2) * ca)
        sm = phys(1j * (k1 + k2) * cm)
        h3 = sa * phys(1j * k2 * cm) - phys(1j * k2 * ca) * sm
    else:
        raise ValueError(f"unknown form {form!r}")
    return VectorSpectralField(g, np.stack([zero, zero, _deal(g, h3)]))


# ---------------------------------------------------------------- residuals


def ml1_residual(a0, t, dt=1e-4):
    """Relative residual of the (a, m) system by central differences in time."""
    s0 = evolve_linear(a0, t)
    sp = evolve_linear(a0, t + dt)
    sm = evolve_linear(a0, t - dt)
    g = a0.grid
    da = (sp.a.coeffs - sm.a.coeffs) / (2 * dt)
    dm = (sp.m.coeffs - sm.m.coeffs) / (2 * dt)
    ra = da + g.ksq * s0.a.coeffs - s0.m.coeffs
    rm = dm + g.ksq * s0.m.coeffs + 2 * s0.m.coeffs - g.ksq * s0.a.coeffs
    scale = max(np.max(np.abs(s0.a.coeffs)), np.max(np.abs(s0.m.coeffs)), 1e-300)
    return float(max(np.max(np.abs(ra)), np.max(np.abs(rm))) / scale)


def ml2_residuals(a0, t, dt=1e-4):
    """Relative residuals of both rows of the (U, W) system with forcing F."""
    g = a0.grid
    k1, k2, k3 = g.k
    st = evolve_linear(a0, t)
    Up, Wp = assemble_U_W(evolve_linear(a0, t + dt))
    Um, Wm = assemble_U_W(evolve_linear(a0, t - dt))
    U, W = assemble_U_W(st)
    F = forcing_F(st)
    dU = (Up.coeffs - Um.coeffs) / (2 * dt)
    dW = (Wp.coeffs - Wm.coeffs) / (2 * dt)
    curlW = curl_coeffs(W.coeffs, g)
    curlU = curl_coeffs(U.coeffs, g)
    kdotW = k1 * W.coeffs[0] + k2 * W.coeffs[1] + k3 * W.coeffs[2]
    grad_div_W = -np.stack([k1 * kdotW, k2 * kdotW, k3 * kdotW])
    r1 = dU + g.ksq * U.coeffs - curlW
    r2 = dW + g.ksq * W.coeffs - grad_div_W + 2 * W.coeffs - curlU - F.coeffs
    scale = max(np.max(np.abs(U.coeffs)), np.max(np.abs(W.coeffs)), 1e-300)
    return float(np.max(np.abs(r1)) / scale), float(np.max(np.abs(r2)) / scale)


# ---------------------------------------------------------------- smallness


@dataclass
class SmallnessSeries:
    t: np.ndarray
    p: float
    sum12_a: np.ndarray
    sum12_m: np.ndarray
    d3_a: np.ndarray
    d3_m: np.ndarray
    support_sum_max: float
    support_xi3_max: float
    rate: float = field(default=float("nan"))

    @property
    def total(self):
        return self.sum12_a + self.sum12_m + self.d3_a + self.d3_m

    def rows(self):
        header = ("t", "dsum_a_Lp", "dsum_m_Lp", "d3_a_Lp", "d3_m_Lp", "total")
        body = [
            tuple(float(x) for x in r)
            for r in zip(self.t, self.sum12_a, self.sum12_m, self.d3_a, self.d3_m, self.total)
        ]
        return header, body


def smallness_series(a0, t_grid, p, eps=None):
    """L^p norms of (d1 + d2)a, (d1 + d2)m, d3 a, d3 m along t_grid.

    With ``eps`` given, the support mechanism sup|xi1 + xi2| <= eps and
    sup|xi3| <= 2 eps on supp a0_hat is asserted.
    """
    g = a0.grid
    k1, k2, k3 = (np.broadcast_to(k, g.half_shape) for k in g.k)
    nz = a0.coeffs != 0
    s_max = float(np.max(np.abs(k1 + k2)[nz])) if nz.any() else 0.0
    z_max = float(np.max(np.abs(k3)[nz])) if nz.any() else 0.0
    if eps is not None and (s_max > eps or z_max > 2.0 * eps):
        raise AssertionError(
            f"support mechanism violated: sup|xi1+xi2| = {s_max}, sup|xi3| = {z_max}, eps = {eps}"
        )
    K1, K2, K3 = g.k
    cols = [[], [], [], []]
    for t in t_grid:
        st = evolve_linear(a0, t)
        for idx, (mult, f) in enumerate(
            (
                (1j * (K1 + K2), st.a),
                (1j * (K1 + K2), st.m),
                (1j * K3, st.a),
                (1j * K3, st.m),
            )
        ):
            cols[idx].append(lp_norm_physical(f._wrap(mult * f.coeffs), p))
    series = SmallnessSeries(
        t=np.asarray(t_grid, dtype=np.float64),
        p=float(p),
        sum12_a=np.array(cols[0]),
        sum12_m=np.array(cols[1]),
        d3_a=np.array(cols[2]),
        d3_m=np.array(cols[3]),
        support_sum_max=s_max,
        support_xi3_max=z_max,
    )
    tot = series.total
    if len(t_grid) >= 2 and np.all(tot > 0):
        slope = np.polyfit(series.t, np.log(tot), 1)[0]
        series.rate = float(-slope)
    return series


def min_support_lambda(a0):
    """lam_minus at the smallest |xi|^2 on supp a0_hat."""
    nz = a0.coeffs != 0
    kmin = float(np.min(a0.grid.ksq[nz]))
    return float(eigenvalues(kmin)[0]), kmin
