"""Time integration of the micropolar system and of its perturbation form.

Both systems share the linear operator

    d/dt v = Lap v + curl c
    d/dt c = Lap c + grad div c - 2 c + curl v

which is integrated exactly per mode.  Advection is explicit, evaluated in
divergence form on the physical grid and 2/3-dealiased.  The perturbation
system receives (U, W, F, G, H) from the exact auxiliary solution at the
requested time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _fft, kernels
from .grid import SpectralField, VectorSpectralField, l2_norm_spectral, lp_norm_samples
from . import linear_system
from .linear_system import AuxState, assemble_U_W, eigenvalues, evolve_linear, green_entries
from .littlewood_paley import besov_from_blocks, make_partition

SCHEMES = ("strang-exact-linear", "integrating-factor-rk4")
SCHEME_ALIASES = {"strang": SCHEMES[0], "ifrk4": SCHEMES[1]}
SUBSTEPS = ("midpoint", "rk4")


class BlowupError(RuntimeError):
    def __init__(self, message, last_record=None):
        super().__init__(message)
        self.last_record = last_record


@dataclass
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = SCHEMES[0]
    substep: str = "midpoint"
    dealias: bool = True
    stride: int = 10
    p: float = 5.0
    eta: float | None = None
    eta_mult: float = 10.0

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if not (self.t_end >= self.dt):
            raise ValueError("t_end must be at least dt")
        self.scheme = SCHEME_ALIASES.get(self.scheme, self.scheme)
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.substep not in SUBSTEPS:
            raise ValueError(f"substep must be one of {SUBSTEPS}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def nsteps(self):
        return int(round(self.t_end / self.dt))


@dataclass
class MicropolarState:
    t: float
    u: VectorSpectralField
    w: VectorSpectralField


@dataclass
class PerturbationState:
    t: float
    v: VectorSpectralField
    c: VectorSpectralField


# ---------------------------------------------------------------- linear part


def propagator_coefficients(ksq, dt):
    """(v_par, v_perp, couple, c_perp, c_par) of the exact linear update.

    On the plane orthogonal to xi the (v, c) pair evolves with the rates
    lam_pm of the auxiliary system; along xi, v decays like exp(-k^2 t) and
    c like exp(-2(k^2 + 1) t).
    """
    ksq = np.asarray(ksq, dtype=np.float64)
    s = np.sqrt(ksq + 1.0)
    lam_m, _ = eigenvalues(ksq)
    em = np.exp(-lam_m * dt)
    diff = -em * np.expm1(-2.0 * s * dt)  # e_minus - e_plus
    ep = em - diff
    inv_s = 1.0 / s
    v_perp = 0.5 * (em * (1.0 + inv_s) + ep * (1.0 - inv_s))
    c_perp = 0.5 * (em * (1.0 - inv_s) + ep * (1.0 + inv_s))
    couple = 0.5 * diff * inv_s
    v_par = np.exp(-ksq * dt)
    c_par = np.exp(-2.0 * (ksq + 1.0) * dt)
    return np.stack(np.broadcast_arrays(v_par, v_perp, couple, c_perp, c_par))


def _cross_matrix(xi):
    x, y, z = xi
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def generator_6x6(xi):
    """Linear operator on (v_hat, c_hat) at one wave vector."""
    xi = np.asarray(xi, dtype=np.float64)
    ksq = float(xi @ xi)
    J = 1j * _cross_matrix(xi)
    I = np.eye(3)
    M = np.zeros((6, 6), dtype=np.complex128)
    M[:3, :3] = -ksq * I
    M[:3, 3:] = J
    M[3:, :3] = J
    M[3:, 3:] = -(ksq + 2.0) * I - np.outer(xi, xi)
    return M


def linear_propagator_6x6(xi, dt):
    """exp(dt * generator) at one wave vector, in closed form."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    xi = np.asarray(xi, dtype=np.float64)
    ksq = float(xi @ xi)
    v_par, v_perp, couple, c_perp, c_par = propagator_coefficients(ksq, dt)
    Pi = np.outer(xi, xi) / ksq if ksq > 0 else np.zeros((3, 3))
    Q = np.eye(3) - Pi
    J = 1j * _cross_matrix(xi)
    E = np.zeros((6, 6), dtype=np.complex128)
    E[:3, :3] = v_par * Pi + v_perp * Q
    E[:3, 3:] = couple * J
    E[3:, :3] = couple * J
    E[3:, 3:] = c_par * Pi + c_perp * Q
    return E


class LinearPropagator:
    """Cached per-mode coefficient tables for one grid."""

    def __init__(self, grid):
        self.grid = grid
        self._cache = {}

    def coefficients(self, dt):
        key = float(dt)
        tab = self._cache.get(key)
        if tab is None:
            tab = np.ascontiguousarray(propagator_coefficients(self.grid.ksq, key))
            self._cache[key] = tab
        return tab

    def apply(self, v, c, dt):
        if dt == 0:
            return v, c
        return kernels.apply_propagator(v, c, self.coefficients(dt), *self.grid.wavenumbers)


# ---------------------------------------------------------------- nonlinear part


def _sym_products(a, b=None):
    """Symmetrised a_i b_j in the order (11, 22, 33, 12, 13, 23); b defaults to a."""
    b = a if b is None else b
    out = np.empty((6,) + a.shape[1:], dtype=a.dtype)
    for n, (i, j) in enumerate(((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))):
        if b is a:
            np.multiply(a[i], a[j], out=out[n])
        else:
            out[n] = 0.5 * (a[i] * b[j] + a[j] * b[i])
    return out


class Advection:
    """Dealiased advection terms on one grid."""

    def __init__(self, grid, dealias=True):
        self.grid = grid
        self.k = grid.wavenumbers
        mask = grid.dealias_mask * grid.nyquist_mask if dealias else grid.nyquist_mask
        self.mask = np.ascontiguousarray(mask)

    def phys(self, coeffs):
        return _fft.irfftn(coeffs, self.grid.dims)

    def spec(self, samples):
        return _fft.rfftn(samples)

    def sym_div(self, tensor_samples):
        return kernels.sym_tensor_div(np.ascontiguousarray(self.spec(tensor_samples)), *self.k, self.mask)

    def div(self, tensor_samples):
        return kernels.tensor_div(np.ascontiguousarray(self.spec(tensor_samples)), *self.k, self.mask)

    def project(self, v):
        return kernels.leray(np.ascontiguousarray(v), *self.k) * self.grid.nyquist_mask


def _outer(w, u):
    """T[3 i + j] = w_i u_j."""
    out = np.empty((9,) + u.shape[1:], dtype=u.dtype)
    for i in range(3):
        for j in range(3):
            np.multiply(w[i], u[j], out=out[3 * i + j])
    return out


class FullSystem:
    """Tendency of (u, w) for the complete micropolar system."""

    def __init__(self, grid, dealias=True):
        self.grid = grid
        self.adv = Advection(grid, dealias)

    def nonlinear(self, u, w, t):
        ph = self.adv.phys(np.concatenate([u, w]))
        up, wp = ph[:3], ph[3:]
        nu = -self.adv.sym_div(_sym_products(up))
        nu = self.adv.project(nu)
        nw = -self.adv.div(_outer(wp, up))
        return nu, nw

    def linear(self, u, w):
        return linear_tendency(self.grid, u, w)


def linear_tendency(g, u, w):
    """(Lap u + curl w, Lap w + grad div w - 2w + curl u) on spectral arrays."""
    k1, k2, k3 = g.k
    kw = k1 * w[0] + k2 * w[1] + k3 * w[2]
    graddiv = -np.stack([k1 * kw, k2 * kw, k3 * kw])
    return -g.ksq * u + _curl(w, g), -g.ksq * w + graddiv - 2.0 * w + _curl(u, g)


def _curl(x, g):
    a, b, c = g.k
    return 1j * np.stack([b * x[2] - c * x[1], c * x[0] - a * x[2], a * x[1] - b * x[0]])


class AuxiliaryFields:
    """Exact (a, m) from a0 and the fields U, W, F at any time."""

    def __init__(self, a0):
        self.grid = a0.grid
        self.a0 = a0.coeffs * a0.grid.nyquist_mask

    def am(self, t):
        g00, g01, g10, g11 = green_entries(self.grid.ksq, t)
        return (g00 + g01) * self.a0, (g10 + g11) * self.a0

    def UW(self, t):
        a, m = self.am(t)
        k1, k2, _ = self.grid.k
        zero = np.zeros_like(a)
        return np.stack([1j * k2 * a, -1j * k1 * a, zero]), np.stack([zero, zero, m])

    def F(self, t):
        a, m = self.am(t)
        k1, k2, k3 = self.grid.k
        s = a + m
        return np.stack([k1 * k3 * s, k2 * k3 * s, k3 * k3 * s])


class PerturbationSystem:
    """Tendency of (v, c) for u = U + v, w = W + c.

    The bilinear terms in v and c, the cross terms with (U, W) and the
    forcings G = -U.grad U, H = -U.grad W are each a divergence of a product
    of the same physical fields, so they are summed on the grid and
    transformed once.  ``forcings_GH`` exposes G and H on their own.
    """

    def __init__(self, grid, aux, dealias=True):
        self.grid = grid
        self.aux = aux
        self.adv = Advection(grid, dealias)

    def _aux_spectral(self, t):
        a, m = self.aux.am(t)
        k1, k2, k3 = self.grid.k
        s = (a + m) * self.grid.nyquist_mask
        F = np.stack([k1 * k3 * s, k2 * k3 * s, k3 * k3 * s])
        return np.stack([1j * k2 * a, -1j * k1 * a, m]), F

    def nonlinear(self, v, c, t):
        aux, F = self._aux_spectral(t)
        ph = self.adv.phys(np.concatenate([v, c, aux]))
        vp, cp = ph[:3], ph[3:6]
        U1, U2, m = ph[6], ph[7], ph[8]
        # u = U + v and w = W + c on the grid (U_3 = 0, W = (0, 0, m))
        u = vp
        u[0] += U1
        u[1] += U2
        w = cp
        w[2] += m
        # sym(v) + 2 sym(U, v) + sym(U): the last piece is the source of G
        nv = self.adv.project(-self.adv.sym_div(_sym_products(u)))
        # c (x) (v + U) + W (x) v + W (x) U: the last piece is the source of H
        nc = -self.adv.div(_outer(w, u)) - F
        return nv, nc

    def forcings_GH(self, t):
        """Dealiased spectral G = -U.grad U and H = -U.grad W at time t."""
        aux, _ = self._aux_spectral(t)
        ph = self.adv.phys(aux)
        zero = np.zeros_like(ph[0])
        Up = np.stack([ph[0], ph[1], zero])
        Wp = np.stack([zero, zero, ph[2]])
        G = -self.adv.sym_div(_sym_products(Up))
        H = -self.adv.div(_outer(Wp, Up))
        return G, H

    def linear(self, v, c):
        return linear_tendency(self.grid, v, c)


# ---------------------------------------------------------------- stepping


class Integrator:
    """Strang splitting or integrating-factor RK4 around an exact linear flow."""

    def __init__(self, system, config):
        self.system = system
        self.config = config
        self.prop = LinearPropagator(system.grid)

    def _substep(self, y, t, h):
        N = self.system.nonlinear
        v, c = y
        if self.config.substep == "midpoint":
            k1 = N(v, c, t)
            k2 = N(v + 0.5 * h * k1[0], c + 0.5 * h * k1[1], t + 0.5 * h)
            return v + h * k2[0], c + h * k2[1]
        k1 = N(v, c, t)
        k2 = N(v + 0.5 * h * k1[0], c + 0.5 * h * k1[1], t + 0.5 * h)
        k3 = N(v + 0.5 * h * k2[0], c + 0.5 * h * k2[1], t + 0.5 * h)
        k4 = N(v + h * k3[0], c + h * k3[1], t + h)
        return (
            v + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            c + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        )

    def step(self, v, c, t, h):
        E = self.prop.apply
        if self.config.scheme == SCHEMES[0]:
            v, c = E(v, c, 0.5 * h)
            v, c = self._substep((v, c), t, h)
            v, c = E(v, c, 0.5 * h)
        else:
            N = self.system.nonlinear
            k1 = N(v, c, t)
            a = E(v + 0.5 * h * k1[0], c + 0.5 * h * k1[1], 0.5 * h)
            k2 = N(*a, t + 0.5 * h)
            ev, ec = E(v, c, 0.5 * h)
            k3 = N(ev + 0.5 * h * k2[0], ec + 0.5 * h * k2[1], t + 0.5 * h)
            e3 = E(*k3, 0.5 * h)
            fv, fc = E(v, c, h)
            k4 = N(fv + h * e3[0], fc + h * e3[1], t + h)
            e1 = E(*k1, h)
            e23 = E(k2[0] + k3[0], k2[1] + k3[1], 0.5 * h)
            v = fv + h / 6.0 * (e1[0] + 2 * e23[0] + k4[0])
            c = fc + h / 6.0 * (e1[1] + 2 * e23[1] + k4[1])
        v = self.system.adv.project(v)
        c = c * self.system.grid.nyquist_mask
        return v, c


def step(state, config, system=None, integrator=None):
    """Advance a MicropolarState or PerturbationState by one dt."""
    if isinstance(state, MicropolarState):
        sys_ = system or FullSystem(state.u.grid, config.dealias)
        x, y = state.u.coeffs, state.w.coeffs
    else:
        if system is None:
            raise ValueError("perturbation steps need the PerturbationSystem")
        sys_ = system
        x, y = state.v.coeffs, state.c.coeffs
    integ = integrator or Integrator(sys_, config)
    x, y = integ.step(x, y, state.t, config.dt)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise BlowupError(f"non-finite state after step from t={state.t:.6g}")
    g = sys_.grid
    t = state.t + config.dt
    if isinstance(state, MicropolarState):
        return MicropolarState(t, VectorSpectralField(g, x), VectorSpectralField(g, y))
    return PerturbationState(t, VectorSpectralField(g, x), VectorSpectralField(g, y))


def rhs_full(state, dealias=True):
    """(du/dt, dw/dt) of the micropolar system at a state."""
    sys_ = FullSystem(state.u.grid, dealias)
    nu, nw = sys_.nonlinear(state.u.coeffs, state.w.coeffs, state.t)
    lu, lw = sys_.linear(state.u.coeffs, state.w.coeffs)
    g = state.u.grid
    return VectorSpectralField(g, (lu + nu) * g.nyquist_mask), VectorSpectralField(g, (lw + nw) * g.nyquist_mask)


@dataclass
class AuxiliaryInputs:
    """(U, W, F, G, H) of the auxiliary linear solution at one time."""

    t: float
    U: VectorSpectralField
    W: VectorSpectralField
    F: VectorSpectralField
    G: VectorSpectralField
    H: VectorSpectralField


def auxiliary_inputs(a0, t):
    st = evolve_linear(a0, t)
    U, W = assemble_U_W(st)
    return AuxiliaryInputs(
        t=float(t),
        U=U,
        W=W,
        F=linear_system.forcing_F(st),
        G=linear_system.forcing_G(st.a),
        H=linear_system.forcing_H(st.a, st.m),
    )


def rhs_perturbation(pstate, aux, dt=None, dealias=True):
    """(dv/dt, dc/dt) with the auxiliary fields supplied, term by term.

    v row: Lap v + curl c + P(-v.grad v + G - U.grad v - v.grad U)
    c row: Lap c + grad div c - 2c + curl v + H - F - U.grad c - v.grad W - v.grad c
    """
    tol = 0.5 * dt if dt is not None else 1e-12
    if abs(aux.t - pstate.t) > tol:
        raise ValueError(f"auxiliary fields at t={aux.t} do not match state time t={pstate.t}")
    g = pstate.v.grid
    adv = Advection(g, dealias)
    v, c = pstate.v.coeffs, pstate.c.coeffs
    ph = adv.phys(np.concatenate([v, c, aux.U.coeffs, aux.W.coeffs]))
    vp, cp, Up, Wp = ph[:3], ph[3:6], ph[6:9], ph[9:]
    # div U = div v = 0, so every advection is a divergence of a product
    bil_v = -adv.sym_div(_sym_products(vp) + 2.0 * _sym_products(Up, vp))
    nv = adv.project(bil_v + aux.G.coeffs)
    bil_c = -adv.div(_outer(cp, Up + vp) + _outer(Wp, vp))
    nc = bil_c + aux.H.coeffs - aux.F.coeffs
    lv, lc = linear_tendency(g, v, c)
    return VectorSpectralField(g, (lv + nv) * g.nyquist_mask), VectorSpectralField(g, (lc + nc) * g.nyquist_mask)


def background_residual(aux):
    """rhs_full(U + v, W + c) - rhs_perturbation(v, c) for exact (U, W).

    Algebraically (Lap U + curl W, Lap W + grad div W - 2W + curl U + F),
    which is d/dt (U, W) when the auxiliary system is solved exactly.
    """
    g = aux.U.grid
    lu, lw = linear_tendency(g, aux.U.coeffs, aux.W.coeffs)
    return VectorSpectralField(g, lu * g.nyquist_mask), VectorSpectralField(g, (lw + aux.F.coeffs) * g.nyquist_mask)


def background_rate(aux_state):
    """d/dt (U, W) from d/dt (a, m) = -A(xi) (a, m), no differencing."""
    g = aux_state.a.grid
    a, m = aux_state.a.coeffs, aux_state.m.coeffs
    da = -g.ksq * a + m
    dm = g.ksq * a - (g.ksq + 2.0) * m
    return assemble_U_W(AuxState(aux_state.t, aux_state.a._wrap(da), aux_state.m._wrap(dm)))


# ---------------------------------------------------------------- diagnostics


def divergence_residual(coeffs, grid):
    """max |xi . f_hat| / max(|xi| |f_hat|); zero for the zero field."""
    k1, k2, k3 = grid.k
    d = np.abs(k1 * coeffs[0] + k2 * coeffs[1] + k3 * coeffs[2])
    scale = np.max(grid.kmag * np.sqrt(np.sum(np.abs(coeffs) ** 2, axis=0)))
    return float(np.max(d) / scale) if scale > 0 else 0.0


@dataclass
class DiagnosticsRecord:
    t: float
    monitor: float
    dissipation_integral: float
    dissipation_rate: float
    u_linf: float
    energy: float
    div_u: float
    div_v: float
    gamma_crossed: bool = False
    blowup: bool = False
    extra: dict = field(default_factory=dict)

    COLUMNS = (
        "t",
        "monitor",
        "dissipation_integral",
        "dissipation_rate",
        "u_linf",
        "energy",
        "div_u",
        "div_v",
        "gamma_crossed",
        "blowup",
    )

    def row(self):
        return (
            self.t,
            self.monitor,
            self.dissipation_integral,
            self.dissipation_rate,
            self.u_linf,
            self.energy,
            self.div_u,
            self.div_v,
            int(self.gamma_crossed),
            int(self.blowup),
        )


class Monitor:
    """Critical-norm bookkeeping: B^{-1+3/p}_{p,1} and B^{1+3/p}_{p,1} of (v, c)."""

    def __init__(self, grid, p):
        self.grid = grid
        self.p = float(p)
        self.partition = make_partition(grid)
        self.tables = self.partition.tables
        self.js = np.array(list(self.partition.indices), dtype=np.float64)

    def block_norms(self, coeffs):
        out = np.zeros(len(self.js))
        for idx, tab in enumerate(self.tables):
            c = coeffs * tab
            if not np.any(c):
                continue
            x = _fft.irfftn(c, self.grid.dims)
            mag = np.sqrt(np.sum(x * x, axis=0))
            out[idx] = lp_norm_samples(mag, self.p, self.grid.cell_volume)
        return out

    def norms(self, v, c):
        s = 3.0 / self.p
        crit = 0.0
        high = 0.0
        for x in (v, c):
            b = self.block_norms(x)
            crit += besov_from_blocks(b, self.js, s - 1.0, 1.0)
            high += besov_from_blocks(b, self.js, s + 1.0, 1.0)
        return crit, high


class Diagnostics:
    def __init__(self, grid, config):
        self.grid = grid
        self.config = config
        self.monitor = Monitor(grid, config.p)
        self.eta = config.eta
        self.integral = 0.0
        self.prev = None
        self.crossed = False
        self.crossing_time = None

    def set_threshold(self, initial_monitor, reference):
        if self.eta is None:
            base = initial_monitor if initial_monitor > 0 else reference
            self.eta = self.config.eta_mult * base

    def record(self, t, u, w, v, c):
        crit, high = self.monitor.norms(v, c)
        if self.prev is not None:
            t0, h0 = self.prev
            self.integral += 0.5 * (t - t0) * (h0 + high)
        self.prev = (t, high)
        if self.eta is not None and crit > self.eta and not self.crossed:
            self.crossed = True
            self.crossing_time = t
        up = _fft.irfftn(u, self.grid.dims)
        u_linf = float(np.max(np.sqrt(np.sum(up * up, axis=0))))
        U = VectorSpectralField(self.grid, u)
        W = VectorSpectralField(self.grid, w)
        energy = l2_norm_spectral(U) ** 2 + l2_norm_spectral(W) ** 2
        return DiagnosticsRecord(
            t=float(t),
            monitor=crit,
            dissipation_integral=self.integral,
            dissipation_rate=high,
            u_linf=u_linf,
            energy=energy,
            div_u=divergence_residual(u, self.grid),
            div_v=divergence_residual(v, self.grid),
            gamma_crossed=self.crossed,
        )


@dataclass
class RunResult:
    mode: str
    records: list
    final: object
    eta: float
    crossing_time: float | None
    blowup: bool = False
    message: str = ""

    @property
    def max_monitor(self):
        return max((r.monitor for r in self.records), default=0.0)


def run_experiment(config, a0=None, v0=None, c0=None, mode="full", grid=None, on_record=None):
    """Integrate to t_end, emitting a DiagnosticsRecord every ``stride`` steps.

    ``mode='full'`` evolves (u, w) from u0 = U0 + v0, w0 = W0 + c0;
    ``mode='perturbation'`` evolves (v, c) against the exact (U, W).
    Diagnostics always report the perturbation (v, c) and the full (u, w).
    """
    if grid is None:
        grid = next(f.grid for f in (a0, v0, c0) if f is not None)
    zero = np.zeros((3,) + grid.half_shape, dtype=np.complex128)
    aux = AuxiliaryFields(a0) if a0 is not None else None
    v = v0.coeffs.copy() if v0 is not None else zero.copy()
    c = c0.coeffs.copy() if c0 is not None else zero.copy()

    def aux_UW(t):
        if aux is None:
            return zero, zero
        return aux.UW(t)

    if mode == "full":
        system = FullSystem(grid, config.dealias)
        U0, W0 = aux_UW(0.0)
        x, y = U0 + v, W0 + c
    elif mode == "perturbation":
        if aux is None:
            aux = AuxiliaryFields(_zero_scalar(grid))
        system = PerturbationSystem(grid, aux, config.dealias)
        x, y = v, c
    else:
        raise ValueError(f"unknown mode {mode!r}")

    integ = Integrator(system, config)
    diag = Diagnostics(grid, config)

    def split(t, x, y):
        U, W = aux_UW(t)
        if mode == "full":
            return x, y, x - U, y - W
        return U + x, W + y, x, y

    u, w, vv, cc = split(0.0, x, y)
    init_crit, _ = diag.monitor.norms(vv, cc)
    U0, W0 = aux_UW(0.0)
    ref, _ = diag.monitor.norms(U0, W0)
    diag.set_threshold(init_crit, ref)
    rec = diag.record(0.0, u, w, vv, cc)
    records = [rec]
    if on_record:
        on_record(rec)
    t = 0.0
    n = config.nsteps
    for i in range(1, n + 1):
        x_new, y_new = integ.step(x, y, t, config.dt)
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(y_new))):
            last = records[-1]
            last.blowup = True
            return RunResult(mode, records, (t, x, y), diag.eta, diag.crossing_time, True, f"blowup after t={t:.6g}")
        x, y = x_new, y_new
        t = i * config.dt
        if i % config.stride == 0 or i == n:
            u, w, vv, cc = split(t, x, y)
            rec = diag.record(t, u, w, vv, cc)
            records.append(rec)
            if on_record:
                on_record(rec)
    return RunResult(mode, records, (t, x, y), diag.eta, diag.crossing_time)


def _zero_scalar(grid):
    return SpectralField.zeros(grid)


def state_at(result, a0, grid):
    """(u, w) spectral arrays of a run's final state."""
    t, x, y = result.final
    if result.mode == "full":
        return x, y
    if a0 is None:
        return x, y
    U, W = AuxiliaryFields(a0).UW(t)
    return U + x, W + y


# ---------------------------------------------------------------- oracle


@dataclass
class OracleReport:
    dt: float
    t_end: float
    times: list
    diffs: list
    ladder: list
    ladder_diffs: list
    c_conv: float
    observed_order: float
    envelope: float
    safety: float
    eta: float
    crossed: bool
    max_monitor: float
    records: list = field(default_factory=list)

    @property
    def max_diff(self):
        return max(self.diffs) if self.diffs else 0.0

    @property
    def passed(self):
        return self.max_diff <= self.envelope and not self.crossed


def pair_difference(config, a0, v0, c0, grid, diagnostics=None):
    """Run both formulations side by side; return record times and
    ||u_full - (U + v)||_L2 + ||w_full - (W + c)||_L2 at each.

    When ``diagnostics`` is given it also records the perturbation run.
    """
    diffs = []
    times = []
    records = []
    aux = AuxiliaryFields(a0)
    zero = np.zeros((3,) + grid.half_shape, dtype=np.complex128)
    cfg = config
    fi = Integrator(FullSystem(grid, cfg.dealias), cfg)
    pi_ = Integrator(PerturbationSystem(grid, aux, cfg.dealias), cfg)
    v = v0.coeffs.copy() if v0 is not None else zero.copy()
    c = c0.coeffs.copy() if c0 is not None else zero.copy()
    U, W = aux.UW(0.0)
    x, y = U + v, W + c
    if diagnostics is not None:
        init, _ = diagnostics.monitor.norms(v, c)
        ref, _ = diagnostics.monitor.norms(U, W)
        diagnostics.set_threshold(init, ref)
        records.append(diagnostics.record(0.0, x, y, v, c))
    t = 0.0
    for i in range(1, cfg.nsteps + 1):
        x, y = fi.step(x, y, t, cfg.dt)
        v, c = pi_.step(v, c, t, cfg.dt)
        t = i * cfg.dt
        if i % cfg.stride == 0 or i == cfg.nsteps:
            U, W = aux.UW(t)
            du = VectorSpectralField(grid, x - (U + v))
            dw = VectorSpectralField(grid, y - (W + c))
            d = l2_norm_spectral(du) + l2_norm_spectral(dw)
            if not math.isfinite(d):
                raise BlowupError(f"non-finite difference at t={t:.6g}")
            diffs.append(d)
            times.append(t)
            if diagnostics is not None:
                records.append(diagnostics.record(t, U + v, W + c, v, c))
    if diagnostics is not None:
        return times, diffs, records
    return times, diffs


def full_vs_perturbation_oracle(config, a0, v0=None, c0=None, ladder=(2, 4), safety=1.5):
    """Agreement of the two formulations against a calibrated O(dt^2) envelope.

    Both runs share the linear flow exactly, so their difference is the
    splitting error.  Runs at ``ladder`` multiples of dt measure its constant
    C_conv = max D(h)/h^2; the production run must satisfy
    max_t D(dt) <= safety * C_conv * dt^2.
    """
    grid = a0.grid
    diag = Diagnostics(grid, config)
    times, diffs, records = pair_difference(config, a0, v0, c0, grid, diagnostics=diag)
    ladder_diffs = []
    for m in ladder:
        cfg = replace(config, dt=config.dt * m, stride=max(1, config.stride // m))
        _, d = pair_difference(cfg, a0, v0, c0, grid)
        ladder_diffs.append(max(d))
    hs = [config.dt * m for m in ladder]
    c_conv = max(d / h**2 for d, h in zip(ladder_diffs, hs))
    if len(hs) > 1 and ladder_diffs[0] > 0:
        order = math.log(ladder_diffs[-1] / ladder_diffs[0]) / math.log(hs[-1] / hs[0])
    else:
        order = float("nan")
    return OracleReport(
        dt=config.dt,
        t_end=config.t_end,
        times=times,
        diffs=diffs,
        ladder=hs,
        ladder_diffs=ladder_diffs,
        c_conv=c_conv,
        observed_order=order,
        envelope=safety * c_conv * config.dt**2,
        safety=safety,
        eta=diag.eta,
        crossed=diag.crossed,
        max_monitor=max(r.monitor for r in records),
        records=records,
    )
