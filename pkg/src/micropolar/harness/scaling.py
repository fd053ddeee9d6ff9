"""Epsilon sweeps of the condition functional and the largeness of the datum."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..grid import WaveGrid
from ..initial_data import (
    ProfileParams,
    build_a0,
    condition_terms,
    default_box,
    largeness_metrics,
    loglog,
    profile_norms_quadrature,
)
from .csvio import write_table

COLUMNS = (
    "eps",
    "loglog",
    "a0_l1",
    "a0_lp_dual",
    "a0_linf",
    "omega_hat_l1",
    "omega_ratio",
    "pre_exponential",
    "leading_term",
    "exp_argument",
    "log_lhs",
    "u_Linf",
    "u_B-1_inf_inf",
)

FIT_COLUMNS = ("quantity", "slope", "expected", "rel_tol", "rel_error", "residual_rms", "passed")


def sweep_point(eps, p=5.0, const_C=1.0, amp="large", largeness_dims=None):
    """One row of the sweep; norms by quadrature, largeness on a grid when dims are given."""
    params = ProfileParams(eps, p=p, const_C=const_C, amp=amp)
    norms = profile_norms_quadrature(params)
    terms = condition_terms(None, None, "quadrature", params)
    ll = loglog(eps)
    row = {
        "eps": float(eps),
        "loglog": ll,
        "a0_l1": norms.l1,
        "a0_lp_dual": norms.lp_dual,
        "a0_linf": norms.linf,
        "omega_hat_l1": norms.omega_l1,
        "omega_ratio": norms.omega_l1 / math.sqrt(ll),
        "pre_exponential": terms.pre_exponential,
        "leading_term": terms.eps_sq_term,
        "exp_argument": terms.exp_argument,
        "log_lhs": terms.log_value,
        "u_Linf": math.nan,
        "u_B-1_inf_inf": math.nan,
    }
    if largeness_dims is not None:
        a0 = build_a0(params, WaveGrid(largeness_dims, default_box(eps)))
        m = largeness_metrics(a0)
        row["u_Linf"] = m["u_Linf"]
        row["u_B-1_inf_inf"] = m["u_B-1_inf_inf"]
    return row


def _point(args):
    return sweep_point(*args)


def sweep(eps_list, p=5.0, const_C=1.0, amp="large", workers=1, largeness_dims=None):
    """Rows in the order of ``eps_list``; ``largeness_dims`` maps eps -> grid dims."""
    largeness_dims = largeness_dims or {}
    jobs = [(e, p, const_C, amp, largeness_dims.get(e)) for e in eps_list]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_point, jobs))
    return [_point(j) for j in jobs]


@dataclass
class Fit:
    quantity: str
    slope: float
    expected: float
    rel_tol: float
    residual_rms: float

    @property
    def rel_error(self):
        return abs(self.slope - self.expected) / abs(self.expected)

    @property
    def passed(self):
        return self.rel_error <= self.rel_tol

    def row(self):
        return (self.quantity, self.slope, self.expected, self.rel_tol, self.rel_error, self.residual_rms, int(self.passed))


def _loglog_fit(eps, values):
    x = np.log(np.asarray(eps, dtype=np.float64))
    y = np.log(np.asarray(values, dtype=np.float64))
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(float(res[0]) / len(x)) if len(res) else 0.0
    return float(coef[0]), rms


def fit_exponents(rows, p):
    """Log-log slopes in eps after dividing out the loglog factors of the profile.

    ``pre_exponential`` is the full factor in front of the exponential;
    ``leading_term`` is its eps |a0_hat|^2 part alone.
    """
    if len(rows) < 2:
        return []
    eps = [r["eps"] for r in rows]
    ll = np.array([r["loglog"] for r in rows])
    target = (p - 4.0) / p
    specs = [
        ("a0_lp_dual/loglog^0.5", np.array([r["a0_lp_dual"] for r in rows]) / np.sqrt(ll), -2.0 / p, 0.10),
        ("pre_exponential/loglog", np.array([r["pre_exponential"] for r in rows]) / ll, target, 0.15),
        ("leading_term/loglog", np.array([r["leading_term"] for r in rows]) / ll, target, 0.15),
    ]
    fits = []
    for name, vals, expected, tol in specs:
        slope, rms = _loglog_fit(eps, vals)
        fits.append(Fit(name, slope, expected, tol, rms))
    return fits


def omega_band(rows):
    """max / min of ||omega0_hat||_L1 / loglog^0.5 over the sweep."""
    vals = [r["omega_ratio"] for r in rows]
    return max(vals) / min(vals)


def write_outputs(out_dir, rows, fits):
    out = Path(out_dir)
    write_table(out / "scaling.csv", "micropolar-scaling", COLUMNS, [[r[c] for c in COLUMNS] for r in rows])
    if fits:
        band = omega_band(rows)
        fit_rows = [f.row() for f in fits]
        fit_rows.append(("omega_ratio_band", band, 2.0, 0.0, max(band - 2.0, 0.0), 0.0, int(band <= 2.0)))
        write_table(out / "fits.csv", "micropolar-scaling-fits", FIT_COLUMNS, fit_rows)
    return out
