"""Invariant checks for every module, collected into one deterministic report."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .. import linear_system as ls
from .. import solver as sv
from ..grid import (
    SpectralField,
    VectorSpectralField,
    WaveGrid,
    curl,
    div,
    forward_transform,
    grad,
    hermitian_defect,
    l2_norm_spectral,
    laplacian,
    leray_project,
    product,
    random_field,
    rng_for,
)
from ..initial_data import (
    ProfileParams,
    a0_norms,
    assemble_U0_W0,
    build_a0,
    condition_terms,
    default_box,
    largeness_metrics,
    resolving_dims,
    support_report,
)
from ..littlewood_paley import (
    bernstein_ratio,
    bony_decompose,
    lp_block,
    make_partition,
)

REPORT_SCHEMA = "micropolar-verify/1"


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def as_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": _round(self.value),
            "tolerance": _round(self.tolerance),
            "detail": self.detail,
        }


def _round(x):
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return float(f"{x:.6e}")


REGISTRY = {}


def check(name):
    def deco(fn):
        REGISTRY[name] = fn
        return fn

    return deco


def _le(name, value, tol, detail=""):
    return CheckResult(name, bool(value <= tol), value, tol, detail)


class Context:
    """Shared fields for one verification run, built lazily."""

    def __init__(self, config):
        self.config = config
        self.seed = config.seed
        self._cache = {}

    def cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def grid(self):
        return self.cached("grid", lambda: WaveGrid(self.config.dims))

    def field(self, name, vector=False):
        return random_field(self.grid, self.seed, name, vector=vector)

    def solenoidal(self, name):
        return leray_project(self.field(name, vector=True))

    @property
    def datum_grid(self):
        eps = self.config.eps
        return self.cached("dgrid", lambda: WaveGrid(resolving_dims(eps, dealias=True), default_box(eps)))

    @property
    def params(self):
        return ProfileParams(self.config.eps, p=self.config.p, const_C=self.config.const_C, amp=self.config.amp)

    @property
    def a0(self):
        return self.cached("a0", lambda: build_a0(self.params, self.datum_grid))


# ---------------------------------------------------------------- grid


@check("grid.round_trip")
def _(ctx):
    g = ctx.grid
    x = rng_for(ctx.seed, "round_trip").standard_normal(g.dims)
    y = forward_transform(g, x).to_physical()
    return _le("grid.round_trip", float(np.max(np.abs(x - y)) / np.max(np.abs(x))), 1e-12)


@check("grid.parseval")
def _(ctx):
    f = ctx.field("parseval")
    x = f.to_physical()
    phys = math.sqrt(float(np.sum(x * x)) * f.grid.cell_volume)
    spec = l2_norm_spectral(f)
    return _le("grid.parseval", abs(phys - spec) / spec, 1e-12)


@check("grid.leray_idempotent")
def _(ctx):
    u = ctx.field("leray", vector=True)
    p1 = leray_project(u)
    p2 = leray_project(p1)
    return _le("grid.leray_idempotent", float(np.max(np.abs(p2.coeffs - p1.coeffs)) / p1.max_abs()), 1e-12)


@check("grid.leray_divergence")
def _(ctx):
    u = ctx.field("leray", vector=True)
    d = div(leray_project(u))
    scale = max(float(np.max(np.abs(ctx.grid.kmag * u.coeffs))), 1e-300)
    return _le("grid.leray_divergence", d.max_abs() / scale, 1e-12)


@check("grid.leray_self_adjoint")
def _(ctx):
    u = ctx.field("leray_u", vector=True)
    v = ctx.field("leray_v", vector=True)
    up, vp = leray_project(u).to_physical(), leray_project(v).to_physical()
    lhs = float(np.sum(up * v.to_physical()))
    rhs = float(np.sum(u.to_physical() * vp))
    return _le("grid.leray_self_adjoint", abs(lhs - rhs) / max(abs(lhs), 1e-300), 1e-12)


@check("grid.operator_reality")
def _(ctx):
    f = ctx.field("reality")
    u = ctx.field("reality_u", vector=True)
    outs = [grad(f), div(u), curl(u), laplacian(f), leray_project(u), product(f, f)]
    worst = max(hermitian_defect(o) / max(o.max_abs(), 1e-300) for o in outs)
    return _le("grid.operator_reality", worst, 1e-12)


# ---------------------------------------------------------------- littlewood_paley


@check("lp.telescoping")
def _(ctx):
    part = make_partition(ctx.grid)
    lo, hi = part.resolved_annulus
    r = np.linspace(lo, hi, 4001)
    err = float(np.max(np.abs(part.partition_sum(r) - 1.0)))
    return _le("lp.telescoping", err, 1e-12, f"annulus [{lo:g}, {hi:g}]")


@check("lp.orthogonality")
def _(ctx):
    part = make_partition(ctx.grid)
    tabs = part.tables
    worst = 0.0
    for i in range(len(tabs)):
        for j in range(i + 2, len(tabs)):
            worst = max(worst, float(np.max(np.abs(tabs[i] * tabs[j]))))
    return CheckResult("lp.orthogonality", worst < 1e-15, worst, 1e-15)


@check("lp.bernstein")
def _(ctx):
    part = make_partition(ctx.grid)
    f = ctx.field("bernstein")
    lo, hi = 0.75, 8.0 / 3.0
    worst_lo, worst_hi = math.inf, 0.0
    for j in part.indices:
        b = lp_block(f, j, part)
        if b.max_abs() == 0.0:
            continue
        for p in (2.0, ctx.config.p):
            r = bernstein_ratio(b, j, p)
            worst_lo, worst_hi = min(worst_lo, r), max(worst_hi, r)
    ok = lo <= worst_lo and worst_hi <= hi
    dev = max(lo - worst_lo, worst_hi - hi, 0.0)
    return CheckResult("lp.bernstein", ok, dev, 0.0, f"ratios in [{worst_lo:.4f}, {worst_hi:.4f}]")


@check("lp.bony")
def _(ctx):
    g = ctx.grid
    band = tuple(n // 8 for n in g.dims)
    u = random_field(g, ctx.seed, "bony_u", band=band)
    v = random_field(g, ctx.seed, "bony_v", band=band)
    part = make_partition(g)
    tuv, tvu, rem = bony_decompose(u, v, part)
    exact = forward_transform(g, u.to_physical() * v.to_physical()).coeffs * g.nyquist_mask
    err = float(np.max(np.abs(tuv.coeffs + tvu.coeffs + rem.coeffs - exact)) / np.max(np.abs(exact)))
    return _le("lp.bony", err, 1e-10)


# ---------------------------------------------------------------- initial_data


@check("initial_data.support")
def _(ctx):
    rep = support_report(ctx.a0, ctx.config.eps)
    return CheckResult("initial_data.support", rep["inside_C"], rep["modes"], 0.0, f"{rep['modes']} modes")


@check("initial_data.nonnegative")
def _(ctx):
    c = ctx.a0.coeffs
    neg = float(max(-np.min(c.real), np.max(np.abs(c.imag))))
    return _le("initial_data.nonnegative", neg, 0.0)


@check("initial_data.div_U0")
def _(ctx):
    U0, _ = assemble_U0_W0(ctx.a0)
    scale = float(np.max(ctx.datum_grid.kmag * np.abs(U0.coeffs)))
    return _le("initial_data.div_U0", div(U0).max_abs() / scale, 1e-12)


@check("initial_data.real_U0_W0")
def _(ctx):
    U0, W0 = assemble_U0_W0(ctx.a0)
    d = max(hermitian_defect(U0) / U0.max_abs(), hermitian_defect(W0) / W0.max_abs())
    return _le("initial_data.real_U0_W0", d, 1e-12)


@check("initial_data.condition_homogeneity")
def _(ctx):
    pr = ctx.params
    a0 = ctx.a0
    t1 = condition_terms(None, None, a0, pr)
    t2 = condition_terms(None, None, a0 * 2.0, pr)
    ratios = (t2.eps_sq_term / t1.eps_sq_term, t2.eps_lin_term / t1.eps_lin_term)
    l1 = a0_norms(a0, pr).l1
    expected_gap = pr.const_C * (3 * l1 * l1 + l1)
    gap = t2.exp_argument - t1.exp_argument
    err = max(abs(ratios[0] - 4.0) / 4.0, abs(ratios[1] - 2.0) / 2.0, abs(gap - expected_gap) / expected_gap)
    return _le("initial_data.condition_homogeneity", err, 1e-12, f"ratios {ratios[0]:.6f}, {ratios[1]:.6f}")


@check("initial_data.omega_identity")
def _(ctx):
    m = largeness_metrics(ctx.a0)
    return _le("initial_data.omega_identity", m.get("omega_identity_defect", math.inf), 1e-8)


# ---------------------------------------------------------------- linear_system


@check("linear_system.green_vs_expm")
def _(ctx):
    rng = rng_for(ctx.seed, "green")
    n = 500
    xi = rng.normal(size=(n, 3))
    xi *= (10.0 * rng.random(n) / np.linalg.norm(xi, axis=1))[:, None]
    t = 5.0 * rng.random(n)
    G = ls.green_exp(xi, t)
    ref = np.stack([expm(-ls.matrix_A(x) * s) for x, s in zip(xi, t)])
    return _le("linear_system.green_vs_expm", float(np.max(np.abs(G - ref))), 1e-10)


@check("linear_system.lambda_minus")
def _(ctx):
    margin = ls.lambda_minus_margin()
    exact = ls.lambda_minus_exact()
    return CheckResult("linear_system.lambda_minus", margin >= 0.0 and exact, -margin, 0.0, f"exact rational scan {exact}")


@check("linear_system.decay_certificate")
def _(ctx):
    rep = ls.decay_certificate(ctx.grid, (0.1, 0.5, 1.0, 2.0, 5.0))
    return CheckResult("linear_system.decay_certificate", rep.passed, rep.K_measured, rep.K_bound)


@check("linear_system.semigroup")
def _(ctx):
    a0 = ctx.field("semigroup")
    s1 = ls.evolve_linear(a0, 1.0)
    s2 = ls.propagate(ls.evolve_linear(a0, 0.3), 0.7)
    s0 = ls.evolve_linear(a0, 0.0)
    err = max(
        float(np.max(np.abs(s1.a.coeffs - s2.a.coeffs))),
        float(np.max(np.abs(s1.m.coeffs - s2.m.coeffs))),
        float(np.max(np.abs(s0.a.coeffs - a0.coeffs))),
        float(np.max(np.abs(s0.m.coeffs - a0.coeffs))),
    ) / a0.max_abs()
    return _le("linear_system.semigroup", err, 1e-10)


def _cancel_inputs(ctx, count=5):
    g = ctx.grid
    band = tuple(n // 4 for n in g.dims)
    for i in range(count):
        yield random_field(g, ctx.seed, f"cancel_a{i}", band=band), random_field(g, ctx.seed, f"cancel_m{i}", band=band)


@check("linear_system.G_cancellation")
def _(ctx):
    worst = 0.0
    for a, _m in _cancel_inputs(ctx):
        d, c = ls.forcing_G(a, "direct"), ls.forcing_G(a, "cancel")
        worst = max(worst, float(np.max(np.abs(d.coeffs - c.coeffs)) / d.max_abs()))
    return _le("linear_system.G_cancellation", worst, 1e-10)


@check("linear_system.H_cancellation")
def _(ctx):
    worst = 0.0
    for a, m in _cancel_inputs(ctx):
        d, c = ls.forcing_H(a, m, "direct"), ls.forcing_H(a, m, "cancel")
        worst = max(worst, float(np.max(np.abs(d.coeffs - c.coeffs)) / d.max_abs()))
    return _le("linear_system.H_cancellation", worst, 1e-10)


@check("linear_system.vanishing_components")
def _(ctx):
    worst = 0.0
    for a, m in _cancel_inputs(ctx):
        G, H = ls.forcing_G(a), ls.forcing_H(a, m)
        worst = max(worst, G[2].max_abs(), H[0].max_abs(), H[1].max_abs())
    return CheckResult("linear_system.vanishing_components", worst < 1e-14, worst, 1e-14)


@check("linear_system.forcing_reality")
def _(ctx):
    st = ls.evolve_linear(ctx.a0, 0.5)
    U, W = ls.assemble_U_W(st)
    # G and H are small differences of products; measure against the product size
    u_max = float(np.max(np.abs(U.to_physical())))
    grad_max = max(float(np.max(np.abs(grad(f).to_physical()))) for f in (*U.components, W[2]))
    F = ls.forcing_F(st)
    worst = max(
        hermitian_defect(F) / F.max_abs(),
        hermitian_defect(ls.forcing_G(st.a)) / (u_max * grad_max),
        hermitian_defect(ls.forcing_H(st.a, st.m)) / (u_max * grad_max),
    )
    return _le("linear_system.forcing_reality", worst, 1e-12)


@check("linear_system.ml1_residual")
def _(ctx):
    r = max(ls.ml1_residual(ctx.a0, t) for t in (0.1, 1.0))
    return _le("linear_system.ml1_residual", r, 1e-6)


@check("linear_system.ml2_F_cancellation")
def _(ctx):
    r = max(max(ls.ml2_residuals(ctx.a0, t)) for t in (0.1, 1.0))
    return _le("linear_system.ml2_F_cancellation", r, 1e-6, "W row balanced by F")


# ---------------------------------------------------------------- solver


@check("solver.propagator_vs_expm")
def _(ctx):
    rng = rng_for(ctx.seed, "propagator")
    worst = 0.0
    for _ in range(200):
        xi = rng.normal(size=3) * 4.0
        t = 2.0 * rng.random()
        ref = expm(t * sv.generator_6x6(xi))
        worst = max(worst, float(np.max(np.abs(sv.linear_propagator_6x6(xi, t) - ref))))
    return _le("solver.propagator_vs_expm", worst, 1e-12)


@check("solver.spectral_radius")
def _(ctx):
    g = ctx.grid
    worst = 0.0
    for dt in (1e-3, 0.1, 1.0):
        v_par, v_perp, couple, c_perp, c_par = sv.propagator_coefficients(g.ksq, dt)
        k = g.kmag
        # on the plane orthogonal to xi the curl has eigenvalues +-|xi|
        tr = 0.5 * (v_perp + c_perp)
        disc = np.sqrt(0.25 * (v_perp - c_perp) ** 2 + (couple * k) ** 2)
        rad = np.maximum.reduce([np.abs(v_par), np.abs(c_par), np.abs(tr + disc), np.abs(tr - disc)])
        worst = max(worst, float(np.max(rad)))
    return _le("solver.spectral_radius", worst, 1.0 + 1e-14)


def _small_state(ctx, amp=0.5):
    g = ctx.grid
    band = tuple(n // 6 for n in g.dims)
    v = leray_project(random_field(g, ctx.seed, "state_v", band=band, vector=True))
    c = random_field(g, ctx.seed, "state_c", band=band, vector=True)
    sv_ = amp / max(float(np.max(np.abs(v.to_physical()))), 1e-300)
    sc = amp / max(float(np.max(np.abs(c.to_physical()))), 1e-300)
    return v * sv_, c * sc


@check("solver.step_invariants")
def _(ctx):
    g = ctx.grid
    v, c = _small_state(ctx)
    cfg = sv.SolverConfig(dt=1e-2, t_end=0.1, scheme=ctx.config.scheme, substep=ctx.config.substep)
    st = sv.MicropolarState(0.0, v, c)
    div_worst, herm_worst = 0.0, 0.0
    system = sv.FullSystem(g, cfg.dealias)
    integ = sv.Integrator(system, cfg)
    for _ in range(cfg.nsteps):
        st = sv.step(st, cfg, system, integ)
        div_worst = max(div_worst, sv.divergence_residual(st.u.coeffs, g))
        herm_worst = max(herm_worst, hermitian_defect(st.u) / st.u.max_abs(), hermitian_defect(st.w) / st.w.max_abs())
    return _le(
        "solver.step_invariants",
        max(div_worst / 1e-10, herm_worst / 1e-12),
        1.0,
        f"div {div_worst:.2e}, hermitian {herm_worst:.2e}",
    )


@check("solver.dissipativity")
def _(ctx):
    g = ctx.grid
    v, c = _small_state(ctx)
    prop = sv.LinearPropagator(g)
    x, y = v.coeffs, c.coeffs
    prev = math.hypot(l2_norm_spectral(v), l2_norm_spectral(c))
    worst = -math.inf
    for _ in range(20):
        x, y = prop.apply(x, y, 0.05)
        now = math.hypot(l2_norm_spectral(VectorSpectralField(g, x)), l2_norm_spectral(VectorSpectralField(g, y)))
        worst = max(worst, (now - prev) / prev)
        prev = now
    return _le("solver.dissipativity", worst, 1e-14)


@check("solver.self_convergence")
def _(ctx):
    g = ctx.grid
    v, c = _small_state(ctx, amp=1.0)
    ratio = convergence_ratio(g, v, c, ctx.config.scheme, ctx.config.substep)
    lo, hi = (3.5, 4.5) if ctx.config.scheme == sv.SCHEMES[0] else (12.0, 20.0)
    ok = lo <= ratio <= hi
    return CheckResult("solver.self_convergence", ok, ratio, hi, f"expected ratio in [{lo}, {hi}]")


def convergence_ratio(grid, v, c, scheme=sv.SCHEMES[0], substep="midpoint", t_end=0.2, dt=0.02):
    """||y(dt) - y(dt/2)|| / ||y(dt/2) - y(dt/4)|| for the full system."""
    finals = []
    for h in (dt, dt / 2, dt / 4):
        cfg = sv.SolverConfig(dt=h, t_end=t_end, scheme=scheme, substep=substep)
        system = sv.FullSystem(grid)
        integ = sv.Integrator(system, cfg)
        x, y, t = v.coeffs, c.coeffs, 0.0
        for i in range(cfg.nsteps):
            x, y = integ.step(x, y, t, h)
            t = (i + 1) * h
        finals.append(np.concatenate([x, y]))

    def nrm(a):
        return math.sqrt(float(np.sum(np.abs(a) ** 2)))

    return nrm(finals[0] - finals[1]) / nrm(finals[1] - finals[2])


@check("solver.transcription_consistency")
def _(ctx):
    a0 = ctx.a0
    g = a0.grid
    v = leray_project(random_field(g, ctx.seed, "consist_v", vector=True)) * 1e-2
    c = random_field(g, ctx.seed, "consist_c", vector=True) * 1e-2
    t = 0.3
    aux = sv.auxiliary_inputs(a0, t)
    pv, pc = sv.rhs_perturbation(sv.PerturbationState(t, v, c), aux)
    fu, fw = sv.rhs_full(sv.MicropolarState(t, aux.U + v, aux.W + c))
    # exact rates of (U, W) from the (a, m) ODE
    ru, rw = sv.background_rate(ls.evolve_linear(a0, t))
    e_u = float(np.max(np.abs(fu.coeffs - pv.coeffs - ru.coeffs * g.nyquist_mask))) / fu.max_abs()
    e_w = float(np.max(np.abs(fw.coeffs - pc.coeffs - rw.coeffs * g.nyquist_mask))) / fw.max_abs()
    return _le("solver.transcription_consistency", max(e_u, e_w), 1e-8)


@check("solver.linear_run_match")
def _(ctx):
    g = ctx.grid
    v, c = _small_state(ctx, amp=1e-8)
    T = 1.0
    cfg = sv.SolverConfig(dt=0.05, t_end=T, scheme=ctx.config.scheme, substep=ctx.config.substep)
    system = sv.FullSystem(g)
    integ = sv.Integrator(system, cfg)
    x, y, t = v.coeffs, c.coeffs, 0.0
    for i in range(cfg.nsteps):
        x, y = integ.step(x, y, t, cfg.dt)
        t = (i + 1) * cfg.dt
    ex, ey = sv.LinearPropagator(g).apply(v.coeffs, c.coeffs, T)
    err = float(max(np.max(np.abs(x - ex)), np.max(np.abs(y - ey))))
    return _le("solver.linear_run_match", err, 1e-10, "absolute, amplitude 1e-8")


# ---------------------------------------------------------------- runner


def run_checks(config, names=None):
    ctx = Context(config)
    results = []
    for name, fn in REGISTRY.items():
        if names is not None and name not in names:
            continue
        try:
            res = fn(ctx)
        except Exception as exc:  # a crashing check is a failed check
            res = CheckResult(name, False, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
        results.append(res)
    return results


def build_report(config, results):
    return {
        "schema": REPORT_SCHEMA,
        "config": config.as_dict(),
        "passed": all(r.passed for r in results),
        "failed": [r.name for r in results if not r.passed],
        "checks": [r.as_dict() for r in results],
    }


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
